//! Binary scheme that identifies the senders' Bernoulli parameters from the
//! roots of the output's probability generating function.
//!
//! Sender `i` owns the subinterval `[(2i-1)/(2d+1), 2i/(2d+1)]` and spreads its
//! message grid evenly over it. The decoder undoes the channel on the empirical
//! output distribution, treats the result as polynomial coefficients, and maps
//! each root `ξ` back to a parameter via `θ = 1/(1-Re ξ)`.

use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;

use crate::channel::empirical_distribution;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::model::{ChannelSpec, Codeword, Distribution, DistributionKind, Symbol};

/// Parameter substituted for missing or singular roots. It lies outside
/// `[0, 1]` and rounds to the largest grid point.
pub const SENTINEL: f64 = 2.0;
/// Relative size below which the leading PGF coefficient is trimmed.
pub const LEADING_TOL: f64 = 1e-10;
/// Distance of `Re ξ` from 1 below which the parameter map is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Evenly spaced message grids, one per sender, on disjoint subintervals.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCodebook {
    d: usize,
    exact: Vec<Vec<Ratio<i64>>>,
    grids: Vec<Vec<f64>>,
}

impl RootCodebook {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.grids.iter().map(Vec::len).collect()
    }

    /// Grid of sender `i` (zero-based) as exact fractions.
    pub fn exact_grid(&self, i: usize) -> &[Ratio<i64>] {
        &self.exact[i]
    }

    /// Grid of sender `i` (zero-based) as floats.
    pub fn grid(&self, i: usize) -> &[f64] {
        &self.grids[i]
    }

    /// Parameter of message `l` (zero-based) for sender `i`.
    pub fn theta(&self, i: usize, l: usize) -> f64 {
        self.grids[i][l]
    }

    /// Index of the grid point of sender `i` closest to `x`; ties go to the
    /// smaller parameter.
    pub fn nearest(&self, i: usize, x: f64) -> usize {
        let grid = &self.grids[i];
        let mut best = 0;
        let mut best_dist = (grid[0] - x).abs();
        for (l, &g) in grid.iter().enumerate().skip(1) {
            let dist = (g - x).abs();
            if dist < best_dist {
                best = l;
                best_dist = dist;
            }
        }
        best
    }
}

/// Builds the message grids `θ_{i,l} = (2i-1)/(2d+1) + l/((|M_i|-1)(2d+1))`
/// for `l = 0..|M_i|`, with senders numbered from 1 in the formula.
pub fn build_root_codebook(d: usize, sizes: &[usize]) -> Result<RootCodebook> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    if sizes.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} codebook sizes for {d} senders",
            sizes.len()
        )));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidParameter(format!(
            "codebook size {s} is below 2"
        )));
    }
    let width = 2 * d as i64 + 1;
    let mut exact = Vec::with_capacity(d);
    for (idx, &size) in sizes.iter().enumerate() {
        let i = idx as i64 + 1;
        let steps = size as i64 - 1;
        let grid: Vec<Ratio<i64>> = (0..size as i64)
            .map(|l| Ratio::new((2 * i - 1) * steps + l, steps * width))
            .collect();
        exact.push(grid);
    }
    let grids = exact
        .iter()
        .map(|g| g.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect())
        .collect();
    Ok(RootCodebook { d, exact, grids })
}

/// `n` independent Bernoulli(θ) letters.
pub fn encode_root<R: Rng + ?Sized>(theta: f64, n: usize, rng: &mut R) -> Codeword {
    (0..n).map(|_| (rng.random::<f64>() < theta) as Symbol).collect()
}

/// Mass function of a sum of independent Bernoulli variables, by repeated
/// convolution with `(1-θ, θ)`.
pub fn bernoulli_sum_pmf(thetas: &[f64]) -> Distribution {
    let mut pmf = vec![1.0];
    for &t in thetas {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &v) in pmf.iter().enumerate() {
            next[k] += v * (1.0 - t);
            next[k + 1] += v * t;
        }
        pmf = next;
    }
    Distribution::new(DistributionKind::Exact, pmf)
}

/// Coefficients and roots of an estimated generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfEstimate {
    /// Coefficients from the constant term up.
    pub coeffs: Vec<f64>,
    /// Roots of the trimmed polynomial; fewer than `coeffs.len() - 1` when degenerate.
    pub roots: Vec<Complex64>,
    /// Set when the leading coefficient was trimmed.
    pub degenerate: bool,
}

impl PgfEstimate {
    /// Largest `|G(ξ)|` over the stored roots.
    pub fn max_residual(&self) -> f64 {
        self.roots
            .iter()
            .map(|&z| linalg::poly_eval(&self.coeffs, z).norm())
            .fold(0.0, f64::max)
    }
}

/// Roots of the polynomial with the given coefficients (constant term first).
///
/// Trailing coefficients below `1e-10` times the largest one are dropped
/// first, so a degenerate input yields fewer roots.
pub fn poly_roots(coeffs: &[f64]) -> Result<PgfEstimate> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(
            "coefficients must be finite and non-empty".into(),
        ));
    }
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut deg = coeffs.len() - 1;
    while deg > 0 && !(coeffs[deg].abs() >= LEADING_TOL * scale) {
        deg -= 1;
    }
    let degenerate = deg < coeffs.len() - 1;
    let roots = if deg == 0 {
        Vec::new()
    } else {
        let lead = coeffs[deg];
        let monic: Vec<f64> = coeffs[..=deg]
            .iter()
            .enumerate()
            .map(|(t, &c)| if t == deg { 1.0 } else { c / lead })
            .collect();
        let mut roots = linalg::companion_eigenvalues(&monic)?;
        linalg::polish_roots(&monic, &mut roots);
        roots
    };
    Ok(PgfEstimate {
        coeffs: coeffs.to_vec(),
        roots,
        degenerate,
    })
}

/// Maps a root to a Bernoulli parameter, `θ = 1/(1-Re ξ)`.
pub fn root_to_param(root: Complex64) -> f64 {
    let gap = 1.0 - root.re;
    if gap.abs() < SINGULAR_TOL || gap < 0.0 {
        SENTINEL
    } else {
        1.0 / gap
    }
}

/// Maps a Bernoulli parameter to its generating-function root, `(θ-1)/θ`.
pub fn param_to_root(theta: f64) -> f64 {
    (theta - 1.0) / theta
}

/// Converts roots to ascending parameters and pads to `d` entries with the sentinel.
pub fn recover_params(roots: &[Complex64], d: usize) -> Vec<f64> {
    let mut params: Vec<f64> = roots.iter().map(|&z| root_to_param(z)).collect();
    params.sort_by(f64::total_cmp);
    params.truncate(d);
    params.resize(d, SENTINEL);
    params
}

/// Output of [`decode_root`].
#[derive(Debug, Clone, PartialEq)]
pub struct RootDecoding {
    /// Zero-based grid index per sender.
    pub messages: Vec<usize>,
    /// Sorted parameter estimates before rounding.
    pub params: Vec<f64>,
    pub estimate: PgfEstimate,
}

/// Decoder holding the inverted channel matrix.
#[derive(Debug, Clone)]
pub struct RootDecoder {
    codebook: RootCodebook,
    /// Transpose of the channel inverse, so `p̃_W = P⁻ᵀ p̂_Z`.
    inv_t: DenseMatrix,
}

impl RootDecoder {
    pub fn new(spec: &ChannelSpec, codebook: RootCodebook) -> Result<Self> {
        if spec.p() != 2 {
            return Err(Error::InvalidParameter(format!(
                "root scheme needs p = 2, got p = {}",
                spec.p()
            )));
        }
        if spec.d() != codebook.d() {
            return Err(Error::DimensionMismatch(format!(
                "channel has d = {}, codebook has d = {}",
                spec.d(),
                codebook.d()
            )));
        }
        let inv_t = linalg::invert(spec.matrix())?.transpose();
        Ok(RootDecoder { codebook, inv_t })
    }

    pub fn codebook(&self) -> &RootCodebook {
        &self.codebook
    }

    /// Undoes the channel on an output distribution.
    pub fn pseudo_input(&self, p_z: &Distribution) -> Result<Distribution> {
        Ok(Distribution::new(
            DistributionKind::Pseudo,
            self.inv_t.mul_vec(&p_z.probs)?,
        ))
    }

    /// Decodes from an output distribution.
    pub fn decode_distribution(&self, p_z: &Distribution) -> Result<RootDecoding> {
        let p_w = self.pseudo_input(p_z)?;
        let estimate = poly_roots(&p_w.probs)?;
        let params = recover_params(&estimate.roots, self.codebook.d());
        let messages = params
            .iter()
            .enumerate()
            .map(|(i, &t)| self.codebook.nearest(i, t))
            .collect();
        Ok(RootDecoding {
            messages,
            params,
            estimate,
        })
    }

    pub fn decode(&self, y: &[Symbol]) -> Result<RootDecoding> {
        let q = self.codebook.d() + 1;
        self.decode_distribution(&empirical_distribution(y, q)?)
    }
}

/// One-shot decode of a channel output.
pub fn decode_root(y: &[Symbol], spec: &ChannelSpec, codebook: &RootCodebook) -> Result<RootDecoding> {
    RootDecoder::new(spec, codebook.clone())?.decode(y)
}

/// Bound on the matching distance between the roots of a monic polynomial and
/// those of a perturbation of it:
/// `((2d-1)d²/δ^{d-1}) (2+max_t a_t)^{2d} · coeff_error`.
///
/// `true_coeffs` are the monic coefficients `a_0, …, a_{d-1}, 1`.
pub fn root_stability_bound(true_coeffs: &[f64], delta: f64, coeff_error: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if true_coeffs.len() < 2 {
        return Err(Error::InvalidParameter("polynomial must have degree >= 1".into()));
    }
    let d = (true_coeffs.len() - 1) as i32;
    let a_max = true_coeffs[..d as usize]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let df = d as f64;
    Ok((2.0 * df - 1.0) * df * df / delta.powi(d - 1) * (2.0 + a_max).powi(2 * d) * coeff_error)
}

/// Expands `∏(ξ - r)` into monic coefficients, constant term first.
pub fn monic_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &v) in c.iter().enumerate() {
            next[k + 1] += v;
            next[k] -= r * v;
        }
        c = next;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn codebook_grids_match_reference_ticks() {
        let cb = build_root_codebook(2, &[3, 4]).unwrap();
        assert_eq!(cb.exact_grid(0), &[r(1, 5), r(3, 10), r(2, 5)]);
        assert_eq!(cb.exact_grid(1), &[r(3, 5), r(10, 15), r(11, 15), r(4, 5)]);
        let cb = build_root_codebook(2, &[2, 2]).unwrap();
        assert_eq!(cb.exact_grid(0), &[r(1, 5), r(2, 5)]);
    }

    #[test]
    fn codebook_padding_and_gaps() {
        for d in 2..=5 {
            let sizes: Vec<usize> = (0..d).map(|i| 2 + 3 * i).collect();
            let cb = build_root_codebook(d, &sizes).unwrap();
            let w = (2 * d + 1) as i64;
            for i in 0..d {
                let g = cb.exact_grid(i);
                assert_eq!(g.len(), sizes[i]);
                assert_eq!(g[0], r(2 * i as i64 + 1, w));
                assert_eq!(*g.last().unwrap(), r(2 * i as i64 + 2, w));
                if i + 1 < d {
                    assert!(cb.exact_grid(i + 1)[0] - *g.last().unwrap() >= r(1, w));
                }
            }
        }
        assert!(build_root_codebook(2, &[1, 3]).is_err());
        assert!(build_root_codebook(2, &[3]).is_err());
    }

    #[test]
    fn nearest_prefers_smaller_on_ties() {
        let cb = build_root_codebook(2, &[3, 4]).unwrap();
        assert_eq!(cb.nearest(0, 0.25), 0);
        assert_eq!(cb.nearest(0, 0.2500001), 1);
        assert_eq!(cb.nearest(1, SENTINEL), 3);
        for i in 0..2 {
            for (l, &t) in cb.grid(i).iter().enumerate() {
                assert_eq!(cb.nearest(i, t), l);
            }
        }
    }

    #[test]
    fn bernoulli_pmf_examples() {
        let pmf = bernoulli_sum_pmf(&[1.0 / 3.0, 0.5]);
        let expect = [1.0 / 3.0, 0.5, 1.0 / 6.0];
        for (a, b) in pmf.probs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(bernoulli_sum_pmf(&[0.0, 0.0]).probs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn poly_roots_examples() {
        let est = poly_roots(&[1.0 / 3.0, 0.5, 1.0 / 6.0]).unwrap();
        let mut re: Vec<f64> = est.roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-12 && (re[1] + 1.0).abs() < 1e-12);
        assert!(!est.degenerate);

        let coeffs = monic_from_roots(&[-1.0, -2.0, -3.0, -4.0]);
        let est = poly_roots(&coeffs).unwrap();
        let mut re: Vec<f64> = est.roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (k, v) in re.iter().enumerate() {
            assert!((v + 4.0 - k as f64).abs() < 1e-9);
        }

        let est = poly_roots(&[-5.0, 0.0, 0.0, 1.0]).unwrap();
        for z in &est.roots {
            assert!((z.norm() - 5f64.cbrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_leading_coefficient_yields_sentinels() {
        let est = poly_roots(&[0.5, 0.5, 1e-13]).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.roots.len(), 1);
        let params = recover_params(&est.roots, 2);
        assert!((params[0] - 0.5).abs() < 1e-12);
        assert_eq!(params[1], SENTINEL);
    }

    #[test]
    fn pathological_root_maps_to_sentinel() {
        assert_eq!(root_to_param(Complex64::new(1.0, 0.0)), SENTINEL);
        assert_eq!(root_to_param(Complex64::new(1.5, 0.0)), SENTINEL);
        assert!((root_to_param(Complex64::new(-1.0, 0.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn param_root_inverse_pair() {
        for t in [0.05, 0.3, 0.5, 0.95] {
            let z = Complex64::new(param_to_root(t), 0.0);
            assert!((root_to_param(z) - t).abs() < 1e-14);
        }
    }

    #[test]
    fn encode_root_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(encode_root(1e-12, 100, &mut rng).iter().all(|&x| x == 0));
        let x = encode_root(0.3, 100_000, &mut rng);
        let mean = x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
        assert!((mean - 0.3).abs() < 0.01);
        let a = encode_root(0.4, 50, &mut ChaCha8Rng::seed_from_u64(3));
        let b = encode_root(0.4, 50, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn exact_statistics_decode() {
        let spec = default_channel(2, 2, 0.05).unwrap();
        let cb = build_root_codebook(2, &[3, 4]).unwrap();
        let dec = RootDecoder::new(&spec, cb.clone()).unwrap();
        for l1 in 0..3 {
            for l2 in 0..4 {
                let pw = bernoulli_sum_pmf(&[cb.theta(0, l1), cb.theta(1, l2)]);
                let pz = spec.matrix().tr_mul_vec(&pw.probs).unwrap();
                let out = dec
                    .decode_distribution(&Distribution::new(DistributionKind::Exact, pz))
                    .unwrap();
                assert_eq!(out.messages, vec![l1, l2]);
                assert!(out.estimate.max_residual() <= 1e-8);
            }
        }
    }

    #[test]
    fn root_decoder_rejects_nonbinary() {
        let spec = default_channel(2, 3, 0.05).unwrap();
        let cb = build_root_codebook(2, &[3, 4]).unwrap();
        assert!(RootDecoder::new(&spec, cb).is_err());
    }

    #[test]
    fn stability_bound_shape() {
        let f = monic_from_roots(&[-1.0, -1.5, -2.0]);
        assert_eq!(root_stability_bound(&f, 0.5, 0.0).unwrap(), 0.0);
        let b1 = root_stability_bound(&f, 0.5, 1e-6).unwrap();
        let b2 = root_stability_bound(&f, 0.5, 2e-6).unwrap();
        let b3 = root_stability_bound(&f, 0.25, 1e-6).unwrap();
        assert!(b2 > b1 && b3 > b1);
        assert!(root_stability_bound(&f, 0.0, 1e-6).is_err());
    }
}
