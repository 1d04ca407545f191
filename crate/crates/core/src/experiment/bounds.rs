//! Closed-form bounds and interval estimates.

use crate::model::ChannelSpec;

use super::config::Scheme;

/// Two-sided Hoeffding bound `2 exp(-2nτ²)` for the mean of `n` variables in `[0, 1]`.
pub fn hoeffding_bound(n: usize, tau: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * tau * tau).exp()
}

/// Union of per-symbol Hoeffding bounds at `τ = sqrt(ln n / n)`:
/// `2 q / n²` for an output alphabet of size `q`.
///
/// This is only a reference curve. The achievability arguments need `n` far
/// beyond simulation scale before it bounds the block error rate.
pub fn analytic_error_envelope(_scheme: Scheme, spec: &ChannelSpec, n: usize) -> f64 {
    let n = n as f64;
    2.0 * spec.q() as f64 / (n * n)
}

/// Standard normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors >= trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_channel;

    #[test]
    fn hoeffding_examples() {
        assert!((hoeffding_bound(100, 0.1) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((hoeffding_bound(100, 0.1) - 0.2707).abs() < 1e-4);
        for n in [10usize, 1000, 100_000] {
            let tau = ((n as f64).ln() / n as f64).sqrt();
            let expect = 2.0 / (n as f64 * n as f64);
            assert!((hoeffding_bound(n, tau) - expect).abs() <= 1e-12 * expect);
        }
        assert!(hoeffding_bound(1_000_000, 0.05) < 1e-300);
    }

    #[test]
    fn envelope_examples() {
        let s22 = default_channel(2, 2, 0.1).unwrap();
        assert!((analytic_error_envelope(Scheme::Timeshare, &s22, 1000) - 6e-6).abs() < 1e-18);
        let s23 = default_channel(2, 3, 0.1).unwrap();
        assert!((analytic_error_envelope(Scheme::Timeshare, &s23, 10_000) - 1e-7).abs() < 1e-19);
        let a = analytic_error_envelope(Scheme::Root, &s22, 5000);
        let n2 = (5000.0f64 * 2f64.sqrt()) as usize;
        let b = analytic_error_envelope(Scheme::Root, &s22, n2);
        assert!((a / b - 2.0).abs() < 1e-3);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (e, t) in [(0u64, 10u64), (3, 10), (10, 10), (17, 500), (250, 500)] {
            let (lo, hi) = wilson_interval(e, t, Z95);
            let p = e as f64 / t as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        // Reference value: 17/500 gives roughly [0.0213, 0.0538].
        let (lo, hi) = wilson_interval(17, 500, Z95);
        assert!((lo - 0.02133).abs() < 1e-4 && (hi - 0.05380).abs() < 1e-4);
    }
}
