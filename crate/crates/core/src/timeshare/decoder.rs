use crate::channel::{empirical_distribution, marginal_y_exact};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::model::{ChannelSpec, Distribution, DistributionKind, Symbol};

use super::encoder::TsMessage;
use super::layout::TimeShareLayout;
use super::MessageSpace;

/// Linear system of the general decoder.
///
/// Columns are indexed by `(c, k)` as `c*p + k`, rows of `c1` by output symbol
/// and rows of `c2` by segment.
#[derive(Debug, Clone)]
pub struct DecoderMatrices {
    pub c1: DenseMatrix,
    pub c2: DenseMatrix,
    /// `[c1; c2]`.
    pub c: DenseMatrix,
    /// Block diagonal `diag(Pᵀ, I_d)`.
    pub b: DenseMatrix,
    /// `b * c`.
    pub a: DenseMatrix,
    /// `(AᵀA)⁻¹Aᵀ`.
    pub a_pinv: DenseMatrix,
    /// `c` with the first standard basis vector prepended as a column.
    pub c_tilde: DenseMatrix,
}

fn check_shapes(spec: &ChannelSpec, layout: &TimeShareLayout) -> Result<()> {
    if spec.d() != layout.d() || spec.p() != layout.p() {
        return Err(Error::DimensionMismatch(format!(
            "channel is for (d, p) = ({}, {}), layout for ({}, {})",
            spec.d(),
            spec.p(),
            layout.d(),
            layout.p()
        )));
    }
    Ok(())
}

pub fn build_decoder_matrices(spec: &ChannelSpec, layout: &TimeShareLayout) -> Result<DecoderMatrices> {
    check_shapes(spec, layout)?;
    let (d, p, q) = (spec.d(), spec.p(), spec.q());
    let cols = d * p;
    let mut c1 = DenseMatrix::zeros(q, cols);
    let mut c2 = DenseMatrix::zeros(d, cols);
    for c in 0..d {
        for k in 0..p {
            c1[(c * (p - 1) + k, c * p + k)] = 1.0;
            c2[(c, c * p + k)] = 1.0;
        }
    }
    let cmat = c1.vstack(&c2)?;
    let mut b = DenseMatrix::zeros(q + d, q + d);
    for i in 0..q {
        for j in 0..q {
            b[(i, j)] = spec.prob(j, i);
        }
    }
    for i in 0..d {
        b[(q + i, q + i)] = 1.0;
    }
    let a = b.mul(&cmat)?;
    let a_pinv = linalg::pseudoinverse(&a)?;
    let mut e1 = DenseMatrix::zeros(q + d, 1);
    e1[(0, 0)] = 1.0;
    let c_tilde = e1.hstack(&cmat)?;
    Ok(DecoderMatrices {
        c1,
        c2,
        c: cmat,
        b,
        a,
        a_pinv,
        c_tilde,
    })
}

/// Linear system of the binary decoder.
#[derive(Debug, Clone)]
pub struct BinaryDecoderMatrices {
    /// `(d+1) x d` difference matrix: column `c` is `e_{c+1} - e_c`.
    pub c: DenseMatrix,
    /// `Pᵀ c`.
    pub a: DenseMatrix,
    /// `c` with the first standard basis vector prepended as a column.
    pub c_tilde: DenseMatrix,
    /// `Σ_{t<d}` of row `t` of the channel matrix.
    pub offset: Vec<f64>,
}

pub fn build_binary_decoder_matrices(
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
) -> Result<BinaryDecoderMatrices> {
    check_shapes(spec, layout)?;
    if spec.p() != 2 {
        return Err(Error::InvalidParameter(format!(
            "binary decoder needs p = 2, got p = {}",
            spec.p()
        )));
    }
    let d = spec.d();
    let q = d + 1;
    let mut c = DenseMatrix::zeros(q, d);
    for col in 0..d {
        c[(col, col)] = -1.0;
        c[(col + 1, col)] = 1.0;
    }
    let a = spec.matrix().transpose().mul(&c)?;
    let mut e1 = DenseMatrix::zeros(q, 1);
    e1[(0, 0)] = 1.0;
    let c_tilde = e1.hstack(&c)?;
    let mut offset = vec![0.0; q];
    for t in 0..d {
        for (o, v) in offset.iter_mut().zip(spec.row(t)) {
            *o += v;
        }
    }
    Ok(BinaryDecoderMatrices {
        c,
        a,
        c_tilde,
        offset,
    })
}

/// Output of the time-sharing decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct TsDecoding {
    /// Least-squares estimate of the segment mixtures.
    pub phi_tilde: Vec<f64>,
    /// Rounded mixtures as numerators over `∏ m_i`.
    pub phi_index: Vec<u64>,
    /// Decoded messages, or `None` when some message left its message set.
    pub messages: Option<Vec<TsMessage>>,
}

/// Index of the element of `{0, 1/m, …, (m-1)/m}` nearest to `x`; ties go down.
fn round_to_phi(x: f64, m: u64) -> u64 {
    let scaled = x * m as f64;
    let l = (scaled - 0.5).ceil();
    if l <= 0.0 || l.is_nan() {
        0
    } else if l >= (m - 1) as f64 {
        m - 1
    } else {
        l as u64
    }
}

/// Least-squares decoder for lattice messages.
#[derive(Debug, Clone)]
pub struct TimeShareDecoder {
    layout: TimeShareLayout,
    matrices: DecoderMatrices,
}

impl TimeShareDecoder {
    pub fn new(spec: &ChannelSpec, layout: &TimeShareLayout) -> Result<Self> {
        Ok(TimeShareDecoder {
            layout: layout.clone(),
            matrices: build_decoder_matrices(spec, layout)?,
        })
    }

    pub fn matrices(&self) -> &DecoderMatrices {
        &self.matrices
    }

    /// Right-hand side `[d p_Y; 1_d]`.
    pub fn rhs(&self, p_y: &Distribution) -> Vec<f64> {
        let d = self.layout.d();
        let mut b: Vec<f64> = p_y.probs.iter().map(|v| d as f64 * v).collect();
        b.extend(std::iter::repeat_n(1.0, d));
        b
    }

    pub fn decode_distribution(&self, p_y: &Distribution) -> Result<TsDecoding> {
        let q = self.matrices.c1.rows();
        if p_y.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "distribution over {} symbols, expected {q}",
                p_y.len()
            )));
        }
        let phi_tilde = linalg::least_squares(&self.matrices.a, &self.rhs(p_y))?;
        Ok(reassemble(&self.layout, phi_tilde, MessageSpace::Lattice))
    }

    pub fn decode(&self, y: &[Symbol]) -> Result<TsDecoding> {
        let q = self.matrices.c1.rows();
        self.decode_distribution(&empirical_distribution(y, q)?)
    }
}

/// Difference-matrix decoder for binary grid messages (`p = 2`).
#[derive(Debug, Clone)]
pub struct BinaryTimeShareDecoder {
    layout: TimeShareLayout,
    matrices: BinaryDecoderMatrices,
}

impl BinaryTimeShareDecoder {
    pub fn new(spec: &ChannelSpec, layout: &TimeShareLayout) -> Result<Self> {
        Ok(BinaryTimeShareDecoder {
            layout: layout.clone(),
            matrices: build_binary_decoder_matrices(spec, layout)?,
        })
    }

    pub fn matrices(&self) -> &BinaryDecoderMatrices {
        &self.matrices
    }

    /// Right-hand side `d p_Y - Σ_{t<d} P_t`.
    pub fn rhs(&self, p_y: &Distribution) -> Vec<f64> {
        let d = self.layout.d() as f64;
        p_y.probs
            .iter()
            .zip(&self.matrices.offset)
            .map(|(v, o)| d * v - o)
            .collect()
    }

    pub fn decode_distribution(&self, p_y: &Distribution) -> Result<TsDecoding> {
        let q = self.layout.d() + 1;
        if p_y.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "distribution over {} symbols, expected {q}",
                p_y.len()
            )));
        }
        let ones = linalg::least_squares(&self.matrices.a, &self.rhs(p_y))?;
        // Expand to the (c, k) ordering shared with the general decoder.
        let phi_tilde = ones.iter().flat_map(|&v| [1.0 - v, v]).collect();
        Ok(reassemble(&self.layout, phi_tilde, MessageSpace::Binary))
    }

    pub fn decode(&self, y: &[Symbol]) -> Result<TsDecoding> {
        self.decode_distribution(&empirical_distribution(y, self.layout.d() + 1)?)
    }
}

/// Rounds each mixture, splits it into per-sender digits and checks membership.
fn reassemble(layout: &TimeShareLayout, phi_tilde: Vec<f64>, space: MessageSpace) -> TsDecoding {
    let (d, p) = (layout.d(), layout.p());
    let radix = layout.radix();
    let total = radix.total();
    let mut segments = vec![vec![vec![0u32; p]; d]; d];
    let mut digits = vec![0u64; d];
    let phi_index: Vec<u64> = match space {
        MessageSpace::Lattice => phi_tilde.iter().map(|&v| round_to_phi(v, total)).collect(),
        // Only P(X = 1) is estimated; the zero column follows from the grid.
        MessageSpace::Binary => phi_tilde
            .chunks(2)
            .flat_map(|ch| [0, round_to_phi(ch[1], total)])
            .collect(),
    };
    for c in 0..d {
        for k in 0..p {
            radix
                .inverse_into(phi_index[c * p + k], &mut digits)
                .expect("rounded index lies below the radix total");
            for (i, &l) in digits.iter().enumerate() {
                segments[i][c][k] = l as u32;
            }
        }
    }
    if space == MessageSpace::Binary {
        for (i, msg) in segments.iter_mut().enumerate() {
            let denom = layout.denominator(i) as u32;
            for pt in msg.iter_mut() {
                pt[0] = denom - pt[1];
            }
        }
    }
    let messages: Vec<TsMessage> = segments.into_iter().map(TsMessage::new).collect();
    let ok = messages
        .iter()
        .enumerate()
        .all(|(i, msg)| msg.is_member(layout, i, space));
    TsDecoding {
        phi_tilde,
        phi_index,
        messages: ok.then_some(messages),
    }
}

/// One-shot general decode of a channel output.
pub fn decode_timeshare(y: &[Symbol], spec: &ChannelSpec, layout: &TimeShareLayout) -> Result<TsDecoding> {
    TimeShareDecoder::new(spec, layout)?.decode(y)
}

/// One-shot binary decode of a channel output.
pub fn decode_timeshare_binary(
    y: &[Symbol],
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
) -> Result<TsDecoding> {
    BinaryTimeShareDecoder::new(spec, layout)?.decode(y)
}

/// Distribution of a channel output letter in subsegment `b` of segment `c`.
pub fn segment_output_distribution(
    messages: &[TsMessage],
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
    c: usize,
    b: usize,
) -> Distribution {
    let p = layout.p();
    let denom = layout.denominator(b) as f64;
    let mut p_w = vec![0.0; spec.q()];
    for (k, &l) in messages[b].segments[c].iter().enumerate() {
        p_w[c * (p - 1) + k] += l as f64 / denom;
    }
    let p_z = spec
        .matrix()
        .tr_mul_vec(&p_w)
        .expect("distribution length matches the channel");
    Distribution::new(DistributionKind::Exact, p_z)
}

fn mixture(
    messages: &[TsMessage],
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
    weight: impl Fn(usize) -> f64,
) -> Result<Distribution> {
    let d = layout.d();
    let mut dists = Vec::with_capacity(d * d);
    let mut weights = Vec::with_capacity(d * d);
    for c in 0..d {
        for b in 0..d {
            dists.push(segment_output_distribution(messages, spec, layout, c, b));
            weights.push(weight(b));
        }
    }
    marginal_y_exact(&dists, &weights)
}

/// Output marginal with subsegment weights `ρ_b/d`.
pub fn ideal_output_distribution(
    messages: &[TsMessage],
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
) -> Result<Distribution> {
    let rho = layout.rho_f64();
    let d = layout.d() as f64;
    mixture(messages, spec, layout, |b| rho[b] / d)
}

/// Output marginal with the realized subsegment lengths of the layout.
pub fn layout_output_distribution(
    messages: &[TsMessage],
    spec: &ChannelSpec,
    layout: &TimeShareLayout,
) -> Result<Distribution> {
    let lens = layout.subsegment_lens().to_vec();
    let n = layout.n() as f64;
    mixture(messages, spec, layout, |b| lens[b] as f64 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_channel;
    use crate::timeshare::build_lattice;

    #[test]
    fn fig_five_pattern() {
        let spec = default_channel(2, 3, 0.1).unwrap();
        let lay = TimeShareLayout::with_granularities(10, 2, 3, &[2, 2]).unwrap();
        let m = build_decoder_matrices(&spec, &lay).unwrap();
        assert_eq!((m.c.rows(), m.c.cols()), (7, 6));
        let c1_rows = [0, 1, 2, 2, 3, 4];
        for (col, &row) in c1_rows.iter().enumerate() {
            for r in 0..5 {
                assert_eq!(m.c1[(r, col)], if r == row { 1.0 } else { 0.0 });
            }
            for s in 0..2 {
                assert_eq!(m.c2[(s, col)], if col / 3 == s { 1.0 } else { 0.0 });
            }
        }
        assert!((m.c.frobenius_norm().powi(2) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn a_has_full_column_rank() {
        for d in 2..=3 {
            for p in 2..=4 {
                let spec = default_channel(d, p, 0.1).unwrap();
                let lay = TimeShareLayout::with_granularities(d * 10, d, p, &vec![2; d]).unwrap();
                let m = build_decoder_matrices(&spec, &lay).unwrap();
                assert_eq!(linalg::rank(&m.a, 1e-10), d * p);
            }
        }
    }

    #[test]
    fn binary_c_tilde_inverse_is_upper_ones() {
        let spec = default_channel(4, 2, 0.1).unwrap();
        let lay = TimeShareLayout::with_granularities(8, 4, 2, &[2; 4]).unwrap();
        let m = build_binary_decoder_matrices(&spec, &lay).unwrap();
        let inv = linalg::invert(&m.c_tilde).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((inv[(i, j)] - if i <= j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((inv.frobenius_norm() - (5.0f64 * 6.0 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(round_to_phi(0.125, 4), 0);
        assert_eq!(round_to_phi(0.1251, 4), 1);
        assert_eq!(round_to_phi(-0.3, 4), 0);
        assert_eq!(round_to_phi(1.4, 4), 3);
    }

    #[test]
    fn exact_statistics_recovery_small() {
        let spec = default_channel(2, 2, 0.05).unwrap();
        let lay = TimeShareLayout::with_granularities(100, 2, 2, &[3, 3]).unwrap();
        let dec = TimeShareDecoder::new(&spec, &lay).unwrap();
        let bin = BinaryTimeShareDecoder::new(&spec, &lay).unwrap();
        let l1 = build_lattice(2, 3, false).unwrap();
        let l2 = build_lattice(2, 3, true).unwrap();
        for a in l1.points() {
            for b in l1.points() {
                for c in l2.points() {
                    for e in l2.points() {
                        let msgs = vec![
                            TsMessage::new(vec![a.clone(), b.clone()]),
                            TsMessage::new(vec![c.clone(), e.clone()]),
                        ];
                        let p_y = ideal_output_distribution(&msgs, &spec, &lay).unwrap();
                        assert_eq!(dec.decode_distribution(&p_y).unwrap().messages, Some(msgs.clone()));
                        assert_eq!(bin.decode_distribution(&p_y).unwrap().messages, Some(msgs));
                    }
                }
            }
        }
    }

    #[test]
    fn off_lattice_rounding_gives_erasure() {
        // φ rounded so that sender 1's segment-1 numerators sum to 3 over denominator 2.
        let lay = TimeShareLayout::with_granularities(100, 2, 2, &[3, 3]).unwrap();
        let out = reassemble(&lay, vec![4.0 / 9.0, 7.0 / 9.0, 0.5, 0.5], MessageSpace::Lattice);
        assert!(out.messages.is_none());
    }

    #[test]
    fn permutation_invariance() {
        let spec = default_channel(2, 3, 0.1).unwrap();
        let lay = TimeShareLayout::with_granularities(2000, 2, 3, &[3, 3]).unwrap();
        let y: Vec<Symbol> = (0..2000).map(|j| (j * 7 % 5) as Symbol).collect();
        let mut shuffled = y.clone();
        shuffled.reverse();
        assert_eq!(
            decode_timeshare(&y, &spec, &lay).unwrap(),
            decode_timeshare(&shuffled, &spec, &lay).unwrap()
        );
    }
}
