//! Block layout of the time-sharing scheme and the mixed-radix map between
//! per-sender grid values and segment mixtures.

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{rate_region_check, RateTuple, RegionStatus};

use super::lattice::denominator;

/// Mixed-radix positional system with digit bounds `m_1, …, m_d`, most
/// significant digit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    m: Vec<u64>,
    strides: Vec<u64>,
    total: u64,
    /// `⌊(2^64-1)/s⌋ + 1` per stride except the last (which is 1), for
    /// exact division of 32-bit indices.
    recips: Vec<u64>,
}

impl MixedRadix {
    pub fn new(m: &[u64]) -> Result<Self> {
        if m.is_empty() || m.iter().any(|&x| x < 2) {
            return Err(Error::InvalidParameter(format!(
                "granularities must be at least 2, got {m:?}"
            )));
        }
        let mut strides = vec![1u64; m.len()];
        for b in (0..m.len() - 1).rev() {
            strides[b] = strides[b + 1]
                .checked_mul(m[b + 1])
                .ok_or_else(|| Error::InvalidParameter("granularity product overflows".into()))?;
        }
        let total = strides[0]
            .checked_mul(m[0])
            .ok_or_else(|| Error::InvalidParameter("granularity product overflows".into()))?;
        let recips = strides[..m.len() - 1].iter().map(|&s| u64::MAX / s + 1).collect();
        Ok(MixedRadix {
            m: m.to_vec(),
            strides,
            total,
            recips,
        })
    }

    pub fn digits(&self) -> &[u64] {
        &self.m
    }

    /// `∏_{i>b} m_i` for each position `b`.
    pub fn strides(&self) -> &[u64] {
        &self.strides
    }

    /// `∏ m_i`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// `Σ_b l_b ∏_{i>b} m_i`.
    #[inline]
    pub fn forward(&self, digits: &[u64]) -> Result<u64> {
        if digits.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} digits for {} positions",
                digits.len(),
                self.m.len()
            )));
        }
        let mut acc = 0u64;
        let mut in_range = true;
        for ((&l, &mb), &s) in digits.iter().zip(&self.m).zip(&self.strides) {
            in_range &= l < mb;
            acc += l.min(mb) * s;
        }
        if !in_range {
            let b = digits.iter().zip(&self.m).position(|(l, mb)| l >= mb).unwrap_or(0);
            return Err(Error::OffGrid(format!(
                "digit {} at position {b} exceeds {}",
                digits[b],
                self.m[b] - 1
            )));
        }
        Ok(acc)
    }

    /// `l_b = ⌊l / ∏_{i>b} m_i⌋ mod m_b`.
    pub fn inverse(&self, l: u64) -> Result<Vec<u64>> {
        let mut out = vec![0; self.m.len()];
        self.inverse_into(l, &mut out)?;
        Ok(out)
    }

    /// Allocation-free form of [`MixedRadix::inverse`].
    #[inline]
    pub fn inverse_into(&self, l: u64, out: &mut [u64]) -> Result<()> {
        if l >= self.total {
            return Err(Error::OffGrid(format!("index {l} exceeds {}", self.total - 1)));
        }
        if out.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outputs for {} positions",
                out.len(),
                self.m.len()
            )));
        }
        if self.total <= u64::from(u32::MAX) {
            // q_b = ⌊l/s_b⌋ by multiply-high; then l_b = q_b - m_b q_{b-1}.
            let d = self.m.len();
            let mut prev = 0u64;
            for b in 0..d - 1 {
                let q = ((u128::from(self.recips[b]) * u128::from(l)) >> 64) as u64;
                out[b] = q - self.m[b] * prev;
                prev = q;
            }
            out[d - 1] = l - self.m[d - 1] * prev;
        } else {
            for ((o, &s), &mb) in out.iter_mut().zip(&self.strides).zip(&self.m) {
                *o = (l / s) % mb;
            }
        }
        Ok(())
    }
}

/// Mixture weights `ρ_b = (m_b-1)/∏_{i≤b} m_i` for `b < d` and `m_d/∏ m_i`.
pub fn subsegment_proportions(m: &[u64]) -> Vec<Ratio<i128>> {
    let mut prefix: i128 = 1;
    let d = m.len();
    m.iter()
        .enumerate()
        .map(|(b, &mb)| {
            prefix *= mb as i128;
            if b + 1 < d {
                Ratio::new(mb as i128 - 1, prefix)
            } else {
                Ratio::new(mb as i128, prefix)
            }
        })
        .collect()
}

/// Grid numerator of `θ` for position `b`, if `θ` is on that grid.
fn grid_numerator(theta: Ratio<u64>, m: u64, is_last: bool) -> Option<u64> {
    let scaled = theta * Ratio::from_integer(denominator(m, is_last));
    (scaled.is_integer() && *scaled.numer() < m).then(|| *scaled.numer())
}

/// `φ = Σ_b ρ_b θ_b`, evaluated as `(1/∏m) Σ_b l_b ∏_{i>b} m_i`.
pub fn h_forward(thetas: &[Ratio<u64>], m: &[u64]) -> Result<Ratio<u64>> {
    let radix = MixedRadix::new(m)?;
    if thetas.len() != m.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters for {} granularities",
            thetas.len(),
            m.len()
        )));
    }
    let d = m.len();
    let mut digits = Vec::with_capacity(d);
    for (b, (&t, &mb)) in thetas.iter().zip(m).enumerate() {
        let l = grid_numerator(t, mb, b + 1 == d)
            .ok_or_else(|| Error::OffGrid(format!("θ_{} = {t} is off its grid", b + 1)))?;
        digits.push(l);
    }
    Ok(Ratio::new(radix.forward(&digits)?, radix.total()))
}

/// Inverse of [`h_forward`], computed on the integer `l = φ ∏m`.
pub fn h_inverse(phi: Ratio<u64>, m: &[u64]) -> Result<Vec<Ratio<u64>>> {
    let radix = MixedRadix::new(m)?;
    let scaled = phi * Ratio::from_integer(radix.total());
    if !scaled.is_integer() {
        return Err(Error::OffGrid(format!("φ = {phi} is not a multiple of 1/{}", radix.total())));
    }
    let digits = radix.inverse(*scaled.numer())?;
    let d = m.len();
    Ok(digits
        .iter()
        .zip(m)
        .enumerate()
        .map(|(b, (&l, &mb))| Ratio::new(l, denominator(mb, b + 1 == d)))
        .collect())
}

/// Segment and subsegment structure for blocklength `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeShareLayout {
    n: usize,
    d: usize,
    p: usize,
    radix: MixedRadix,
    rho: Vec<Ratio<i128>>,
    sub_lens: Vec<usize>,
}

impl TimeShareLayout {
    /// Layout with explicit granularities.
    pub fn with_granularities(n: usize, d: usize, p: usize, m: &[u64]) -> Result<Self> {
        if d < 2 || p < 2 {
            return Err(Error::InvalidParameter(format!(
                "need d >= 2 and p >= 2, got d={d}, p={p}"
            )));
        }
        if m.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} granularities for {d} senders",
                m.len()
            )));
        }
        if n == 0 || n % d != 0 {
            return Err(Error::InvalidParameter(format!(
                "blocklength {n} is not a positive multiple of d={d}"
            )));
        }
        if m.iter().any(|&x| x > u32::MAX as u64) {
            return Err(Error::InvalidParameter("granularity too large".into()));
        }
        let radix = MixedRadix::new(m)?;
        let rho = subsegment_proportions(m);
        let sub_lens = apportion(&radix, n / d);
        Ok(TimeShareLayout {
            n,
            d,
            p,
            radix,
            rho,
            sub_lens,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> &[u64] {
        self.radix.digits()
    }

    pub fn radix(&self) -> &MixedRadix {
        &self.radix
    }

    pub fn rho(&self) -> &[Ratio<i128>] {
        &self.rho
    }

    pub fn rho_f64(&self) -> Vec<f64> {
        self.rho
            .iter()
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .collect()
    }

    pub fn segment_len(&self) -> usize {
        self.n / self.d
    }

    /// Subsegment lengths, identical in every segment.
    pub fn subsegment_lens(&self) -> &[usize] {
        &self.sub_lens
    }

    /// Letter range of subsegment `b` in segment `c` (both zero-based).
    pub fn subsegment_range(&self, c: usize, b: usize) -> std::ops::Range<usize> {
        let start = c * self.segment_len() + self.sub_lens[..b].iter().sum::<usize>();
        start..start + self.sub_lens[b]
    }

    /// Segment and subsegment (zero-based) of letter `j`.
    pub fn locate(&self, j: usize) -> (usize, usize) {
        let c = j / self.segment_len();
        let mut off = j % self.segment_len();
        for (b, &len) in self.sub_lens.iter().enumerate() {
            if off < len {
                return (c, b);
            }
            off -= len;
        }
        unreachable!("subsegment lengths sum to the segment length")
    }

    /// Whether sender `i` (zero-based) is the final sender.
    pub fn is_last(&self, i: usize) -> bool {
        i + 1 == self.d
    }

    /// Grid denominator of sender `i` (zero-based).
    pub fn denominator(&self, i: usize) -> u64 {
        denominator(self.m()[i], self.is_last(i))
    }

    /// Nominal rates `d(p-1) log m_i / log n`.
    pub fn effective_rates(&self) -> Vec<f64> {
        let ln_n = (self.n as f64).ln();
        self.m()
            .iter()
            .map(|&mi| (self.d * (self.p - 1)) as f64 * (mi as f64).ln() / ln_n)
            .collect()
    }
}

/// Largest-remainder apportionment of `len` letters by the weights `ρ_b`.
/// Ties go to the earlier subsegment.
fn apportion(radix: &MixedRadix, len: usize) -> Vec<usize> {
    let m = radix.digits();
    let d = m.len();
    let total = radix.total() as u128;
    let weights: Vec<u128> = (0..d)
        .map(|b| {
            if b + 1 < d {
                (m[b] as u128 - 1) * radix.strides()[b] as u128
            } else {
                m[b] as u128
            }
        })
        .collect();
    let mut lens: Vec<usize> = weights
        .iter()
        .map(|&w| (w * len as u128 / total) as usize)
        .collect();
    let rems: Vec<u128> = weights.iter().map(|&w| w * len as u128 % total).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    let short = len - lens.iter().sum::<usize>();
    for &b in order.iter().take(short) {
        lens[b] += 1;
    }
    lens
}

/// `floor(x)` after snapping values within `1e-9` relative of an integer.
fn snapped_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Granularities `m_i = max(2, ⌊n^{(R_i + α/(2d))/(d(p-1))}⌋)` with
/// `α = d(p-1)/2 - ΣR_i`.
pub fn granularities(n: usize, d: usize, p: usize, rates: &RateTuple) -> Result<Vec<u64>> {
    if rates.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} rates for {d} senders",
            rates.len()
        )));
    }
    let dp1 = (d * (p - 1)) as f64;
    let alpha = dp1 / 2.0 - rates.sum();
    Ok(rates
        .as_slice()
        .iter()
        .map(|&r| {
            let e = (r + alpha / (2.0 * d as f64)) / dp1;
            let f = snapped_floor((n as f64).powf(e));
            if f.is_finite() && f >= 2.0 {
                f as u64
            } else {
                2
            }
        })
        .collect())
}

/// Layout for a rate tuple strictly inside the capacity region.
pub fn build_layout(n: usize, d: usize, p: usize, rates: &RateTuple) -> Result<TimeShareLayout> {
    if rate_region_check(rates, d, p)? != RegionStatus::Inside {
        return Err(Error::InvalidParameter(format!(
            "rate tuple {:?} is not inside the open region (sum must be below {})",
            rates.as_slice(),
            (d * (p - 1)) as f64 / 2.0
        )));
    }
    build_layout_any_region(n, d, p, rates)
}

/// Like [`build_layout`] but accepts rate tuples on or outside the region
/// boundary, for negative experiments.
pub fn build_layout_any_region(n: usize, d: usize, p: usize, rates: &RateTuple) -> Result<TimeShareLayout> {
    if rates.as_slice().iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "every rate must be positive, got {:?}",
            rates.as_slice()
        )));
    }
    let m = granularities(n, d, p, rates)?;
    TimeShareLayout::with_granularities(n, d, p, &m)
}

/// `Σ_b ρ_b == 1` in exact arithmetic.
pub fn proportions_sum_to_one(m: &[u64]) -> bool {
    let sum = subsegment_proportions(m)
        .into_iter()
        .fold(Ratio::<i128>::zero(), |acc, r| acc + r);
    sum == Ratio::from_integer(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn figure_three_table() {
        let m = [3, 4];
        for l1 in 0..3u64 {
            for l2 in 0..4u64 {
                let phi = h_forward(&[r(l1, 2), r(l2, 4)], &m).unwrap();
                assert_eq!(phi, r(4 * l1 + l2, 12));
                assert_eq!(h_inverse(phi, &m).unwrap(), vec![r(l1, 2), r(l2, 4)]);
            }
        }
        assert_eq!(h_forward(&[r(1, 2), r(2, 4)], &m).unwrap(), r(6, 12));
        assert_eq!(h_forward(&[r(1, 1), r(3, 4)], &m).unwrap(), r(11, 12));
        assert_eq!(h_forward(&[r(0, 1), r(0, 1)], &m).unwrap(), r(0, 1));
        assert_eq!(h_inverse(r(0, 1), &m).unwrap(), vec![r(0, 1), r(0, 1)]);
    }

    #[test]
    fn inverse_fast_path_matches_division() {
        for m in [vec![2u64, 3], vec![7, 11, 13], vec![65_536, 65_535], vec![3, 5, 7, 9, 11]] {
            let radix = MixedRadix::new(&m).unwrap();
            let step = (radix.total() / 5000).max(1);
            let mut out = vec![0; m.len()];
            for l in (0..radix.total()).step_by(step as usize).chain([radix.total() - 1]) {
                radix.inverse_into(l, &mut out).unwrap();
                let slow: Vec<u64> = radix
                    .strides()
                    .iter()
                    .zip(&m)
                    .map(|(&s, &mb)| (l / s) % mb)
                    .collect();
                assert_eq!(out, slow, "m={m:?} l={l}");
            }
        }
    }

    #[test]
    fn h_rejects_off_grid() {
        assert!(h_forward(&[r(1, 3), r(0, 1)], &[3, 4]).is_err());
        // The final grid stops at (m-1)/m.
        assert!(h_forward(&[r(0, 1), r(1, 1)], &[3, 4]).is_err());
        assert!(h_inverse(r(1, 24), &[3, 4]).is_err());
        assert!(h_inverse(r(1, 1), &[3, 4]).is_err());
    }

    #[test]
    fn h_matches_weighted_sum() {
        let m = [3, 5, 2];
        let rho = subsegment_proportions(&m);
        for l1 in 0..3u64 {
            for l2 in 0..5u64 {
                for l3 in 0..2u64 {
                    let th = [r(l1, 2), r(l2, 4), r(l3, 2)];
                    let phi = h_forward(&th, &m).unwrap();
                    let mut sum = Ratio::<i128>::zero();
                    for (t, w) in th.iter().zip(&rho) {
                        sum = sum + Ratio::new(*t.numer() as i128, *t.denom() as i128) * w;
                    }
                    assert_eq!(Ratio::new(*phi.numer() as i128, *phi.denom() as i128), sum);
                }
            }
        }
    }

    #[test]
    fn proportions_examples() {
        let rho = subsegment_proportions(&[3, 4]);
        assert_eq!(rho, vec![Ratio::new(2, 3), Ratio::new(1, 3)]);
        let rho = subsegment_proportions(&[10, 10, 10, 10]);
        assert_eq!(
            rho,
            vec![
                Ratio::new(9, 10),
                Ratio::new(9, 100),
                Ratio::new(9, 1000),
                Ratio::new(10, 10000)
            ]
        );
        assert!(proportions_sum_to_one(&[7, 2, 13, 5]));
    }

    #[test]
    fn apportionment_is_exact_when_divisible() {
        let lay = TimeShareLayout::with_granularities(24, 2, 2, &[3, 4]).unwrap();
        assert_eq!(lay.subsegment_lens(), &[8, 4]);
        assert_eq!(lay.locate(0), (0, 0));
        assert_eq!(lay.locate(8), (0, 1));
        assert_eq!(lay.locate(12), (1, 0));
        assert_eq!(lay.subsegment_range(1, 1), 20..24);
    }

    #[test]
    fn apportionment_sums_and_decreases() {
        for (n, m) in [(1000, vec![13, 13]), (999, vec![2, 2, 2]), (10, vec![5, 9, 3, 7, 2])] {
            let d = m.len();
            let n = n - n % d;
            let lay = TimeShareLayout::with_granularities(n, d, 3, &m).unwrap();
            let lens = lay.subsegment_lens();
            assert_eq!(lens.iter().sum::<usize>(), n / d);
            assert!(lens.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn granularity_formula() {
        let rates = RateTuple::new(vec![0.4, 0.4]).unwrap();
        assert_eq!(granularities(1000, 2, 2, &rates).unwrap(), vec![4, 4]);
        assert_eq!(granularities(10_000, 2, 2, &rates).unwrap(), vec![7, 7]);
        assert_eq!(granularities(100_000, 2, 2, &rates).unwrap(), vec![13, 13]);
        // Exponent 1/2 on n = 10^4 must land exactly on 100.
        let rates = RateTuple::new(vec![1.5, 1.5]).unwrap();
        assert_eq!(granularities(10_000, 2, 2, &rates).unwrap(), vec![100, 100]);
    }

    #[test]
    fn build_layout_errors() {
        let ok = RateTuple::new(vec![0.4, 0.4]).unwrap();
        assert!(build_layout(1001, 2, 2, &ok).is_err());
        let outside = RateTuple::new(vec![0.8, 0.8]).unwrap();
        assert!(build_layout(1000, 2, 2, &outside).is_err());
        assert!(build_layout_any_region(1000, 2, 2, &outside).is_ok());
        let zero = RateTuple::new(vec![0.0, 0.4]).unwrap();
        assert!(build_layout(1000, 2, 2, &zero).is_err());
        let lay = build_layout(1000, 2, 2, &ok).unwrap();
        assert_eq!(lay.m(), &[4, 4]);
        let eff = lay.effective_rates();
        assert!((eff[0] - 2.0 * 4f64.ln() / 1000f64.ln()).abs() < 1e-12);
    }
}
