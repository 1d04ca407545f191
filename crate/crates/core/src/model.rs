//! Formal model: channel kernels, rate tuples, distributions and codewords.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// Tolerance on row sums of a stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Smallest admissible singular value of a channel matrix.
pub const SIGMA_MIN_TOL: f64 = 1e-10;
/// Tolerance used when classifying a sum rate against the region boundary.
pub const REGION_TOL: f64 = 1e-12;

/// A single channel symbol.
pub type Symbol = u32;

/// A length-n sequence of channel symbols.
pub type Codeword = Vec<Symbol>;

/// Size of the adder output alphabet, `d(p-1)+1`.
pub fn output_alphabet(d: usize, p: usize) -> usize {
    d * (p - 1) + 1
}

/// A validated discrete memoryless channel acting on the adder output.
///
/// Rows index the input symbol `w`, columns the output symbol `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    d: usize,
    p: usize,
    matrix: DenseMatrix,
    epsilon: Option<f64>,
}

impl ChannelSpec {
    /// Builds a channel from explicit rows, rejecting it unless every
    /// invariant holds.
    pub fn new(d: usize, p: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let violations = validate_channel(d, p, &rows);
        if !violations.is_empty() {
            return Err(Error::InvalidChannel(
                violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        Ok(ChannelSpec {
            d,
            p,
            matrix: DenseMatrix::from_rows(&rows)?,
            epsilon: None,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        output_alphabet(self.d, self.p)
    }

    /// Mixing parameter, when the channel came from [`default_channel`].
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn row(&self, w: usize) -> &[f64] {
        self.matrix.row(w)
    }

    /// Transition probability `P(z | w)`.
    pub fn prob(&self, w: usize, z: usize) -> f64 {
        self.matrix[(w, z)]
    }
}

/// One violated channel invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelViolation {
    BadParameters { d: usize, p: usize },
    Dimension { expected: usize, rows: usize, row_lengths: Vec<usize> },
    NonFinite { row: usize, col: usize },
    NonPositive { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    NearSingular { sigma_min: f64 },
}

impl std::fmt::Display for ChannelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelViolation::BadParameters { d, p } => {
                write!(f, "need d >= 2 and p >= 2, got d={d}, p={p}")
            }
            ChannelViolation::Dimension {
                expected,
                rows,
                row_lengths,
            } => write!(
                f,
                "matrix must be {expected}x{expected}, got {rows} rows with lengths {row_lengths:?}"
            ),
            ChannelViolation::NonFinite { row, col } => {
                write!(f, "entry ({row},{col}) is not finite")
            }
            ChannelViolation::NonPositive { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is not strictly positive")
            }
            ChannelViolation::RowSum { row, sum } => {
                write!(f, "row {row} sums to {sum}, not 1")
            }
            ChannelViolation::NearSingular { sigma_min } => {
                write!(f, "smallest singular value {sigma_min:e} is below {SIGMA_MIN_TOL:e}")
            }
        }
    }
}

/// Checks the channel invariants and lists every violation found.
///
/// An empty list means the matrix is a strictly positive, row-stochastic,
/// invertible `q x q` kernel with `q = d(p-1)+1`.
pub fn validate_channel(d: usize, p: usize, rows: &[Vec<f64>]) -> Vec<ChannelViolation> {
    if d < 2 || p < 2 {
        return vec![ChannelViolation::BadParameters { d, p }];
    }
    let q = output_alphabet(d, p);
    if rows.len() != q || rows.iter().any(|r| r.len() != q) {
        return vec![ChannelViolation::Dimension {
            expected: q,
            rows: rows.len(),
            row_lengths: rows.iter().map(|r| r.len()).collect(),
        }];
    }
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                out.push(ChannelViolation::NonFinite { row: i, col: j });
            } else if v <= 0.0 {
                out.push(ChannelViolation::NonPositive {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
            out.push(ChannelViolation::RowSum { row: i, sum });
        }
    }
    if out.iter().any(|v| matches!(v, ChannelViolation::NonFinite { .. })) {
        return out;
    }
    let m = DenseMatrix::from_rows(rows).expect("shape already checked");
    let sigma_min = linalg::min_singular_value(&m);
    if !(sigma_min > SIGMA_MIN_TOL) {
        out.push(ChannelViolation::NearSingular { sigma_min });
    }
    out
}

/// The mixing channel `(1-ε)I + (ε/q)J` on `q = d(p-1)+1` symbols.
pub fn default_channel(d: usize, p: usize, epsilon: f64) -> Result<ChannelSpec> {
    if d < 2 || p < 2 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 2 and p >= 2, got d={d}, p={p}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let q = output_alphabet(d, p);
    let off = epsilon / q as f64;
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            let mut row = vec![off; q];
            // Fix the diagonal from the off-diagonal sum so rows sum to 1 to the last bit.
            row[i] = 1.0 - off * (q - 1) as f64;
            row
        })
        .collect();
    let mut spec = ChannelSpec::new(d, p, rows)?;
    spec.epsilon = Some(epsilon);
    Ok(spec)
}

/// Serializable channel description: either a mixing parameter or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub d: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl ChannelConfig {
    pub fn to_spec(&self) -> Result<ChannelSpec> {
        match (self.epsilon, &self.matrix) {
            (Some(eps), None) => default_channel(self.d, self.p, eps),
            (None, Some(rows)) => ChannelSpec::new(self.d, self.p, rows.clone()),
            (Some(_), Some(_)) => Err(Error::Config(
                "give either `epsilon` or `matrix`, not both".into(),
            )),
            (None, None) => Err(Error::Config("channel needs `epsilon` or `matrix`".into())),
        }
    }
}

/// Position of a rate tuple relative to the capacity region `ΣR_i ≤ d(p-1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionStatus {
    Inside,
    Boundary,
    Outside,
}

impl std::fmt::Display for RegionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegionStatus::Inside => "inside",
            RegionStatus::Boundary => "boundary",
            RegionStatus::Outside => "outside",
        })
    }
}

/// Per-sender rates, each the exponent of n in the message-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTuple(pub Vec<f64>);

impl RateTuple {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "rates must be finite and non-negative, got {rates:?}"
            )));
        }
        Ok(RateTuple(rates))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Sum-rate capacity `d(p-1)/2`.
pub fn sum_capacity(d: usize, p: usize) -> f64 {
    (d * (p - 1)) as f64 / 2.0
}

/// Classifies a rate tuple against the sum-rate threshold.
pub fn rate_region_check(rates: &RateTuple, d: usize, p: usize) -> Result<RegionStatus> {
    if rates.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} rates for {d} senders",
            rates.len()
        )));
    }
    let gap = rates.sum() - sum_capacity(d, p);
    Ok(if gap < -REGION_TOL {
        RegionStatus::Inside
    } else if gap <= REGION_TOL {
        RegionStatus::Boundary
    } else {
        RegionStatus::Outside
    })
}

/// How a [`Distribution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Exact,
    Empirical,
    /// Result of undoing a channel; may have negative entries.
    Pseudo,
}

/// A (possibly signed) mass function over `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub kind: DistributionKind,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn new(kind: DistributionKind, probs: Vec<f64>) -> Self {
        Distribution { kind, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// True when the invariants for this kind hold: exact and empirical
    /// kinds must be non-negative and sum to 1; pseudo kinds only need to
    /// sum to 1 within `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let sums = (self.total() - 1.0).abs() <= tol;
        match self.kind {
            DistributionKind::Pseudo => sums,
            _ => sums && self.probs.iter().all(|&v| v >= 0.0),
        }
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}
