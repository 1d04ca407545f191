use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RegionStatus;

use super::bounds::{analytic_error_envelope, wilson_interval, Z95};
use super::config::{ExperimentConfig, Scheme};
use super::trial::{TrialOutcome, TrialSetup};

/// CSV header of sweep output.
pub const CSV_HEADER: &str =
    "scheme,d,p,n,rates,effective_rates,epsilon,trials,errors,error_rate,wilson_lo,wilson_hi,seed,envelope";

/// Aggregate for one blocklength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub rates: Vec<f64>,
    pub effective_rates: Vec<f64>,
    pub epsilon: Option<f64>,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
    pub envelope: f64,
    pub erasures: u64,
    pub sender_errors: Vec<u64>,
    pub region: RegionStatus,
    /// Seconds spent on this row. Not written to CSV.
    pub wall_clock: f64,
}

impl SweepRow {
    pub fn sender_error_rates(&self) -> Vec<f64> {
        self.sender_errors
            .iter()
            .map(|&e| if self.trials == 0 { 0.0 } else { e as f64 / self.trials as f64 })
            .collect()
    }

    /// CSV line (no trailing newline) in [`CSV_HEADER`] order.
    pub fn csv_line(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(";");
        let fields = [
            self.scheme.to_string(),
            self.d.to_string(),
            self.p.to_string(),
            self.n.to_string(),
            join(&self.rates),
            join(&self.effective_rates),
            self.epsilon.map(fmt_sig).unwrap_or_default(),
            self.trials.to_string(),
            self.errors.to_string(),
            fmt_sig(self.error_rate),
            fmt_sig(self.wilson_lo),
            fmt_sig(self.wilson_hi),
            self.seed.to_string(),
            fmt_sig(self.envelope),
        ];
        fields.join(",")
    }
}

/// All rows of a sweep plus the trend flag.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub region: RegionStatus,
    /// Error rate strictly decreases along the blocklength grid (sorted by `n`).
    pub monotone_decreasing: bool,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Decimal with 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let sci = format!("{:.11e}", x);
    // Re-read the exponent after rounding (9.9999999999996 -> 1e1).
    let (mant, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().unwrap_or(exp);
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Whether error rates strictly decrease when listed in increasing order of `n`.
pub fn strictly_decreasing(rows: &[SweepRow]) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    sorted.windows(2).all(|w| w[1].error_rate < w[0].error_rate)
}

fn aggregate(outcomes: &[TrialOutcome], d: usize) -> (u64, u64, Vec<u64>) {
    let mut errors = 0;
    let mut erasures = 0;
    let mut per_sender = vec![0u64; d];
    for o in outcomes {
        errors += u64::from(!o.correct);
        erasures += u64::from(o.erasure);
        for (acc, &ok) in per_sender.iter_mut().zip(&o.sender_correct) {
            *acc += u64::from(!ok);
        }
    }
    (errors, erasures, per_sender)
}

/// Runs every (blocklength, trial) pair. Trials are spread over `workers`
/// threads; each trial owns its random stream, so counts do not depend on the
/// thread count. Writes CSV to `cfg.output` when set.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    let v = cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers.or(cfg.workers) {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let mut rows = Vec::with_capacity(cfg.blocklengths.len());
    for &n in &cfg.blocklengths {
        let start = Instant::now();
        let setup = TrialSetup::new(cfg, &v.spec, n)?;
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| setup.run(cfg.seed, t))
                .collect::<Result<_>>()
        })?;
        let (errors, erasures, sender_errors) = aggregate(&outcomes, cfg.d);
        let trials = cfg.trials as u64;
        let (wilson_lo, wilson_hi) = wilson_interval(errors, trials, Z95);
        rows.push(SweepRow {
            scheme: cfg.scheme,
            d: cfg.d,
            p: cfg.p,
            n,
            rates: cfg.rates.clone(),
            effective_rates: setup.effective_rates().to_vec(),
            epsilon: v.spec.epsilon(),
            trials,
            errors,
            error_rate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            wilson_lo,
            wilson_hi,
            seed: cfg.seed,
            envelope: analytic_error_envelope(cfg.scheme, &v.spec, n),
            erasures,
            sender_errors,
            region: v.region,
            wall_clock: start.elapsed().as_secs_f64(),
        });
    }
    let result = SweepResult {
        monotone_decreasing: strictly_decreasing(&rows),
        rows,
        region: v.region,
    };
    if let Some(path) = &cfg.output {
        result.write_csv(path)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            scheme: Scheme::Timeshare,
            d: 2,
            p: 2,
            rates: vec![0.4, 0.4],
            blocklengths: vec![1000, 2000],
            epsilon: Some(0.05),
            matrix: None,
            trials,
            seed: 11,
            output: None,
            workers: None,
            skip_permutation: false,
            exhaustive: false,
        }
    }

    #[test]
    fn significant_digit_format() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.05), "0.05");
        assert_eq!(fmt_sig(6e-6), "6e-6");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(fmt_sig(1000.0), "1000");
        assert_eq!(fmt_sig(0.4), "0.4");
        assert_eq!(fmt_sig(-1.25), "-1.25");
        assert_eq!(fmt_sig(9.9999999999999), "10");
    }

    #[test]
    fn zero_trials_give_placeholder_rows() {
        let r = run_sweep(&cfg(0), Some(1)).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert_eq!((row.trials, row.errors, row.error_rate), (0, 0, 0.0));
            assert_eq!((row.wilson_lo, row.wilson_hi), (0.0, 1.0));
        }
        assert_eq!(r.to_csv().lines().count(), 3);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let c = cfg(24);
        let a = run_sweep(&c, Some(1)).unwrap();
        let b = run_sweep(&c, Some(3)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        for row in &a.rows {
            assert!(row.errors <= row.trials);
            assert!(row.wilson_lo <= row.error_rate && row.error_rate <= row.wilson_hi);
        }
    }

    #[test]
    fn csv_header_and_fields() {
        let r = run_sweep(&cfg(4), Some(2)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 14);
        assert_eq!(first[0], "timeshare");
        assert_eq!(first[3], "1000");
        assert_eq!(first[4], "0.4;0.4");
        assert_eq!(first[6], "0.05");
    }

    #[test]
    fn trend_flag() {
        let mk = |n, rate| SweepRow {
            scheme: Scheme::Root,
            d: 2,
            p: 2,
            n,
            rates: vec![],
            effective_rates: vec![],
            epsilon: None,
            trials: 10,
            errors: 0,
            error_rate: rate,
            wilson_lo: 0.0,
            wilson_hi: 1.0,
            seed: 0,
            envelope: 0.0,
            erasures: 0,
            sender_errors: vec![],
            region: RegionStatus::Inside,
            wall_clock: 0.0,
        };
        assert!(strictly_decreasing(&[mk(100, 0.5), mk(10, 0.9), mk(1000, 0.1)]));
        assert!(!strictly_decreasing(&[mk(10, 0.5), mk(100, 0.5)]));
    }
}
