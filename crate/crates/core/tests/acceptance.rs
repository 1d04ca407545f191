//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, not asserted, so the workspace test run
//! stays green. Set `PAMAC_ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

use std::time::{Duration, Instant};

use pamac::experiment::verify::{self, CheckReport};
use pamac::experiment::{run_sweep, ExperimentConfig, Scheme, SweepResult};

const SEED: u64 = 20_240_601;
const TRIALS: usize = 500;
const GRID: [usize; 3] = [1_000, 10_000, 100_000];
const EPSILON: f64 = 0.05;
/// Largest admissible timeshare error rate at the longest blocklength.
const TIMESHARE_FINAL_MAX: f64 = 0.1;
/// Smallest admissible error rate at the longest blocklength outside the region.
const OUTSIDE_FINAL_MIN: f64 = 0.5;

fn config(scheme: Scheme, rate: f64) -> ExperimentConfig {
    ExperimentConfig {
        scheme,
        d: 2,
        p: 2,
        rates: vec![rate, rate],
        blocklengths: GRID.to_vec(),
        epsilon: Some(EPSILON),
        matrix: None,
        trials: TRIALS,
        seed: SEED,
        output: None,
        workers: None,
        skip_permutation: false,
        exhaustive: false,
    }
}

fn summary(r: &SweepResult) -> String {
    r.rows
        .iter()
        .map(|row| format!("n={} err={}/{}", row.n, row.errors, row.trials))
        .collect::<Vec<_>>()
        .join(", ")
}

fn report(name: &'static str, budget: u64, start: Instant, correct: bool, detail: String) -> CheckReport {
    CheckReport {
        name,
        correct,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget),
    }
}

fn main() {
    let mut reports: Vec<CheckReport> = Vec::new();
    let emit = |r: CheckReport, reports: &mut Vec<CheckReport>| {
        println!("{}", r.line());
        reports.push(r);
    };

    emit(verify::check_pgf_factorization(1000, 1), &mut reports);
    emit(verify::check_mixed_radix(4, 10_000), &mut reports);
    emit(verify::check_lattice_cardinality(4, 12), &mut reports);
    emit(verify::check_subsegment_proportions(500, 4), &mut reports);
    emit(verify::check_y_marginal(5, 3, 3, 5), &mut reports);
    emit(verify::check_matrix_lemmas(5, 1000, 6), &mut reports);
    emit(verify::check_exact_statistics(500), &mut reports);

    let start = Instant::now();
    let ts = run_sweep(&config(Scheme::Timeshare, 0.4), None).expect("timeshare sweep");
    let root = run_sweep(&config(Scheme::Root, 0.45), None).expect("root sweep");
    let ts_final = ts.rows.last().map(|r| r.error_rate).unwrap_or(1.0);
    let ok = ts.monotone_decreasing && ts_final < TIMESHARE_FINAL_MAX && root.monotone_decreasing;
    emit(
        report(
            "error-decay-inside-region",
            600,
            start,
            ok,
            format!(
                "timeshare [{}] decreasing={}; root [{}] decreasing={}",
                summary(&ts),
                ts.monotone_decreasing,
                summary(&root),
                root.monotone_decreasing
            ),
        ),
        &mut reports,
    );

    let start = Instant::now();
    let out = run_sweep(&config(Scheme::Timeshare, 0.8), None).expect("outside sweep");
    let out_final = out.rows.last().map(|r| r.error_rate).unwrap_or(0.0);
    emit(
        report(
            "no-decay-outside-region",
            300,
            start,
            out_final > OUTSIDE_FINAL_MIN,
            format!("timeshare R=(0.8,0.8) [{}]", summary(&out)),
        ),
        &mut reports,
    );

    emit(verify::check_root_stability(3, 0.5, 1e-6, 1000, 10), &mut reports);

    let start = Instant::now();
    let reference = format!("{}{}", ts.to_csv(), root.to_csv());
    let mut mismatches = Vec::new();
    for workers in [1usize, 2, 8] {
        let a = run_sweep(&config(Scheme::Timeshare, 0.4), Some(workers)).expect("rerun");
        let b = run_sweep(&config(Scheme::Root, 0.45), Some(workers)).expect("rerun");
        if format!("{}{}", a.to_csv(), b.to_csv()) != reference {
            mismatches.push(workers);
        }
    }
    emit(
        report(
            "sweep-reproducibility",
            600,
            start,
            mismatches.is_empty(),
            format!("CSV reruns with 1, 2, 8 workers; differing: {mismatches:?}"),
        ),
        &mut reports,
    );

    let wrong: Vec<&str> = reports.iter().filter(|r| !r.correct).map(|r| r.name).collect();
    let slow: Vec<&str> = reports
        .iter()
        .filter(|r| r.correct && !r.within_budget())
        .map(|r| r.name)
        .collect();
    println!(
        "{} of {} criteria passed; incorrect: {wrong:?}; over runtime budget: {slow:?}",
        reports.iter().filter(|r| r.passed()).count(),
        reports.len()
    );
    let strict = std::env::var("PAMAC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && reports.iter().any(|r| !r.passed()) {
        std::process::exit(1);
    }
}
