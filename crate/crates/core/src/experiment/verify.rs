//! Property and oracle checks over the codecs, each timed against a runtime
//! budget. Used by the `verify` subcommand and the acceptance target.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::marginal_y_exact;
use crate::codec_root::{
    bernoulli_sum_pmf, build_root_codebook, monic_from_roots, poly_roots, recover_params,
    root_stability_bound, RootDecoder,
};
use crate::error::Result;
use crate::linalg::{self, DenseMatrix};
use crate::model::{default_channel, Distribution, DistributionKind};
use crate::timeshare::{
    build_binary_decoder_matrices, build_decoder_matrices, build_lattice, h_forward, h_inverse,
    ideal_output_distribution, lattice_size, on_lattice, subsegment_proportions,
    BinaryTimeShareDecoder, MixedRadix, TimeShareDecoder, TimeShareLayout, TsMessage,
};

/// Result of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    /// Every assertion of the check held.
    pub correct: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CheckReport {
    pub fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    pub fn passed(&self) -> bool {
        self.correct && self.within_budget()
    }

    /// `PASS`/`FAIL` line with timing.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{verdict} {} ({:.2} s of {:.0} s): {}",
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64(),
            self.detail
        );
        if self.correct && !self.within_budget() {
            s.push_str(" [results correct, runtime over budget]");
        }
        s
    }
}

fn timed(name: &'static str, budget_secs: u64, f: impl FnOnce() -> Result<(bool, String)>) -> CheckReport {
    let start = Instant::now();
    let (correct, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckReport {
        name,
        correct,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    }
}

/// Sorted parameters recovered from the exact sum distribution of random
/// Bernoulli tuples match the truth within `1e-8`.
pub fn check_pgf_factorization(trials: usize, seed: u64) -> CheckReport {
    timed("pgf-factorization", 5, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut failures = 0;
        for _ in 0..trials {
            let d = rng.random_range(2..=6);
            let mut theta: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
            let pmf = bernoulli_sum_pmf(&theta);
            let est = poly_roots(&pmf.probs)?;
            let got = recover_params(&est.roots, d);
            theta.sort_by(f64::total_cmp);
            let err = got
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(err);
            failures += usize::from(!(err <= 1e-8));
        }
        Ok((
            failures == 0,
            format!("{trials} tuples, worst error {worst:.2e}, {failures} above 1e-8"),
        ))
    })
}

fn for_each_radix_tuple(d: usize, limit: u64, prefix: &mut Vec<u64>, prod: u64, f: &mut impl FnMut(&[u64])) {
    if prefix.len() == d {
        f(prefix);
        return;
    }
    let mut m = 2;
    while prod * m <= limit {
        prefix.push(m);
        for_each_radix_tuple(d, limit, prefix, prod * m, f);
        prefix.pop();
        m += 1;
    }
}

/// Round trip of the mixed-radix map on every cell of every granularity
/// tuple with `2 <= d <= max_d` and `∏ m_i <= limit`, checked against an
/// odometer, plus the `m = (3, 4)` table through the rational form.
pub fn check_mixed_radix(max_d: usize, limit: u64) -> CheckReport {
    timed("mixed-radix-bijection", 5, || {
        let mut tuples = 0u64;
        let mut cells = 0u64;
        let mut bad = 0u64;
        for d in 2..=max_d {
            let mut prefix = Vec::with_capacity(d);
            for_each_radix_tuple(d, limit, &mut prefix, 1, &mut |m: &[u64]| {
                let radix = MixedRadix::new(m).expect("granularities >= 2");
                let mut odo = vec![0u64; d];
                let mut inv = vec![0u64; d];
                for l in 0..radix.total() {
                    radix.inverse_into(l, &mut inv).expect("index in range");
                    if inv != odo || radix.forward(&odo).ok() != Some(l) {
                        bad += 1;
                    }
                    for b in (0..d).rev() {
                        odo[b] += 1;
                        if odo[b] < m[b] {
                            break;
                        }
                        odo[b] = 0;
                    }
                }
                // The odometer wrapped exactly once: forward hit every index.
                bad += u64::from(odo.iter().any(|&x| x != 0));
                tuples += 1;
                cells += radix.total();
            });
        }

        let r = |n: u64, d: u64| Ratio::new(n, d);
        let mut table_ok = true;
        for l1 in 0..3u64 {
            for l2 in 0..4u64 {
                let th = [r(l1, 2), r(l2, 4)];
                let phi = h_forward(&th, &[3, 4])?;
                table_ok &= phi == r(4 * l1 + l2, 12);
                table_ok &= h_inverse(phi, &[3, 4])? == th;
            }
        }
        table_ok &= h_forward(&[r(1, 2), r(2, 4)], &[3, 4])? == r(6, 12);
        table_ok &= h_forward(&[r(2, 2), r(3, 4)], &[3, 4])? == r(11, 12);
        Ok((
            bad == 0 && table_ok,
            format!(
                "{tuples} tuples, {cells} cells, {bad} mismatches; (3,4) table {}",
                if table_ok { "matches" } else { "MISMATCH" }
            ),
        ))
    })
}

/// Enumerated lattice sizes equal the closed form and a brute-force count.
pub fn check_lattice_cardinality(max_p: usize, max_m: u64) -> CheckReport {
    timed("lattice-cardinality", 10, || {
        let mut cases = 0;
        let mut bad = Vec::new();
        for p in 2..=max_p {
            for m in 2..=max_m {
                for last in [false, true] {
                    let lat = build_lattice(p, m, last)?;
                    let closed = lattice_size(p, m, last);
                    let mut brute = 0u128;
                    let mut pt = vec![0u32; p];
                    loop {
                        brute += u128::from(on_lattice(&pt, p, m, last));
                        let mut k = 0;
                        while k < p {
                            pt[k] += 1;
                            if (pt[k] as u64) < m {
                                break;
                            }
                            pt[k] = 0;
                            k += 1;
                        }
                        if k == p {
                            break;
                        }
                    }
                    if lat.len() as u128 != closed || closed != brute {
                        bad.push((p, m, last));
                    }
                    cases += 1;
                }
            }
        }
        Ok((bad.is_empty(), format!("{cases} cases, mismatches {bad:?}")))
    })
}

/// `Σ ρ_b = 1` exactly for random granularity tuples.
pub fn check_subsegment_proportions(trials: usize, seed: u64) -> CheckReport {
    timed("subsegment-proportions", 1, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        for _ in 0..trials {
            let d = rng.random_range(2..=6);
            let m: Vec<u64> = (0..d).map(|_| rng.random_range(2..=40)).collect();
            let sum: Ratio<i128> = subsegment_proportions(&m).into_iter().sum();
            bad += usize::from(!sum.is_one());
        }
        Ok((bad == 0, format!("{trials} tuples, {bad} sums differ from 1")))
    })
}

/// Random law with masses in multiples of `1/64`, so that products of up to
/// eight masses and their sums are exact in `f64`.
fn random_dyadic_distribution<R: Rng>(q: usize, rng: &mut R) -> Vec<f64> {
    let mut cuts: Vec<u32> = (0..q - 1).map(|_| rng.random_range(1..64)).collect();
    cuts.push(0);
    cuts.push(64);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| f64::from(w[1] - w[0]) / 64.0).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Marginal of each permuted output position, by enumerating every
/// `(z, π)`, equals the uniform mixture of the per-position laws.
///
/// The enumeration accumulates exact dyadic products times integer
/// permutation counts and divides by `n!` once at the end.
pub fn check_y_marginal(max_n: usize, max_q: usize, instances: usize, seed: u64) -> CheckReport {
    timed("y-marginal", 30, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut cases = 0;
        for n in 1..=max_n {
            let perms = permutations(n);
            let n_fact = perms.len() as f64;
            for q in 2..=max_q {
                for _ in 0..instances {
                    let laws: Vec<Vec<f64>> =
                        (0..n).map(|_| random_dyadic_distribution(q, &mut rng)).collect();
                    let mut brute = vec![vec![0.0; q]; n];
                    let mut z = vec![0usize; n];
                    loop {
                        let pz: f64 = z.iter().enumerate().map(|(j, &s)| laws[j][s]).product();
                        for (k, row) in brute.iter_mut().enumerate() {
                            let mut counts = vec![0u32; q];
                            for perm in &perms {
                                counts[z[perm[k]]] += 1;
                            }
                            for (r, c) in row.iter_mut().zip(counts) {
                                *r += pz * f64::from(c);
                            }
                        }
                        let mut k = 0;
                        while k < n {
                            z[k] += 1;
                            if z[k] < q {
                                break;
                            }
                            z[k] = 0;
                            k += 1;
                        }
                        if k == n {
                            break;
                        }
                    }
                    let dists: Vec<Distribution> = laws
                        .iter()
                        .map(|l| Distribution::new(DistributionKind::Exact, l.clone()))
                        .collect();
                    let exact = marginal_y_exact(&dists, &vec![1.0 / n as f64; n])?;
                    for row in &brute {
                        for (a, b) in row.iter().zip(&exact.probs) {
                            worst = worst.max((a / n_fact - b).abs());
                        }
                    }
                    cases += 1;
                }
            }
        }
        Ok((
            worst <= 1e-14,
            format!("{cases} instances, worst deviation {worst:.2e} (tolerance 1e-14)"),
        ))
    })
}

type Q = Ratio<i128>;

/// Inverse by Gauss-Jordan elimination over the rationals.
pub fn exact_inverse(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn to_exact(m: &DenseMatrix) -> Vec<Vec<Q>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|&x| Q::from_integer(x.round() as i128)).collect())
        .collect()
}

fn unit_entries(inv: &[Vec<Q>]) -> bool {
    inv.iter()
        .flatten()
        .all(|x| x.is_zero() || (x.is_integer() && x.abs().is_one()))
}

/// Exact inverses of the augmented decoder matrices have entries in
/// `{-1, 0, 1}`, and appending a column to a tall matrix never raises its
/// smallest singular value.
pub fn check_matrix_lemmas(max_dp: usize, trials: usize, seed: u64) -> CheckReport {
    timed("matrix-lemmas", 10, || {
        let mut bad = Vec::new();
        let mut cases = 0;
        for d in 2..=max_dp {
            for p in 2..=max_dp {
                let spec = default_channel(d, p, 0.1)?;
                let m = vec![2u64; d];
                let lay = TimeShareLayout::with_granularities(d * (1 << d), d, p, &m)?;
                let c_tilde = &build_decoder_matrices(&spec, &lay)?.c_tilde;
                match exact_inverse(&to_exact(c_tilde)) {
                    Some(inv) if unit_entries(&inv) => {}
                    _ => bad.push(format!("general d={d} p={p}")),
                }
                cases += 1;
            }
            let spec = default_channel(d, 2, 0.1)?;
            let lay = TimeShareLayout::with_granularities(d * (1 << d), d, 2, &vec![2; d])?;
            let ct = &build_binary_decoder_matrices(&spec, &lay)?.c_tilde;
            match exact_inverse(&to_exact(ct)) {
                Some(inv) if unit_entries(&inv) => {}
                _ => bad.push(format!("binary d={d}")),
            }
            cases += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0;
        for _ in 0..trials {
            let rows = rng.random_range(3..=12);
            let cols = rng.random_range(1..rows);
            let a = DenseMatrix::from_row_major(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )?;
            let v = DenseMatrix::from_row_major(
                rows,
                1,
                (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )?;
            let before = linalg::min_singular_value(&a);
            let after = linalg::min_singular_value(&a.hstack(&v)?);
            violations += usize::from(after > before + 1e-12 * (1.0 + before));
        }
        Ok((
            bad.is_empty() && violations == 0,
            format!(
                "{cases} exact inverses, failing {bad:?}; {trials} column appends, {violations} raised σ_min"
            ),
        ))
    })
}

fn lattice_messages(lats: &[Vec<Vec<u32>>], d: usize, mut index: usize) -> Vec<TsMessage> {
    lats.iter()
        .map(|points| {
            let segs = (0..d)
                .map(|_| {
                    let pt = points[index % points.len()].clone();
                    index /= points.len();
                    pt
                })
                .collect();
            TsMessage::new(segs)
        })
        .collect()
}

fn for_each_granularity(d: usize, size: &dyn Fn(usize, u64) -> u128, cap: u128, f: &mut dyn FnMut(&[u64])) {
    fn rec(
        d: usize,
        size: &dyn Fn(usize, u64) -> u128,
        cap: u128,
        m: &mut Vec<u64>,
        prod: u128,
        f: &mut dyn FnMut(&[u64]),
    ) {
        let i = m.len();
        if i == d {
            f(m);
            return;
        }
        let mut mi = 2;
        loop {
            let s = size(i, mi);
            if s == 0 || prod * s > cap {
                break;
            }
            m.push(mi);
            rec(d, size, cap, m, prod * s, f);
            m.pop();
            mi += 1;
        }
    }
    rec(d, size, cap, &mut Vec::new(), 1, f)
}

/// Decoders fed the exact output law of every admissible message tuple
/// return the transmitted messages.
pub fn check_exact_statistics(cap: u128) -> CheckReport {
    timed("exact-statistics-decoding", 60, || {
        let eps = 0.1;
        let mut decoded = 0u64;
        let mut wrong = Vec::new();
        let mut configs = 0;

        for d in [2usize, 3] {
            for p in [2usize, 3] {
                let spec = default_channel(d, p, eps)?;
                let size = |i: usize, m: u64| lattice_size(p, m, i + 1 == d).pow(d as u32);
                let mut runs: Vec<Vec<u64>> = Vec::new();
                for_each_granularity(d, &size, cap, &mut |m| runs.push(m.to_vec()));
                for m in runs {
                    configs += 1;
                    let n = d * m.iter().product::<u64>() as usize;
                    let lay = TimeShareLayout::with_granularities(n, d, p, &m)?;
                    let dec = TimeShareDecoder::new(&spec, &lay)?;
                    let lats: Vec<Vec<Vec<u32>>> = (0..d)
                        .map(|i| build_lattice(p, m[i], lay.is_last(i)).map(|l| l.points().to_vec()))
                        .collect::<Result<_>>()?;
                    let total: usize = lats.iter().map(|l| l.len().pow(d as u32)).product();
                    for idx in 0..total {
                        let msgs = lattice_messages(&lats, d, idx);
                        let p_y = ideal_output_distribution(&msgs, &spec, &lay)?;
                        let out = dec.decode_distribution(&p_y)?;
                        decoded += 1;
                        if out.messages.as_deref() != Some(&msgs[..]) {
                            wrong.push(format!("lattice d={d} p={p} m={m:?} #{idx}"));
                        }
                    }
                }
            }

            let spec = default_channel(d, 2, eps)?;
            let size = |_: usize, m: u64| (m as u128).pow(d as u32);
            let mut runs: Vec<Vec<u64>> = Vec::new();
            for_each_granularity(d, &size, cap, &mut |m| runs.push(m.to_vec()));
            for m in runs {
                configs += 1;
                let n = d * m.iter().product::<u64>() as usize;
                let lay = TimeShareLayout::with_granularities(n, d, 2, &m)?;
                let dec = BinaryTimeShareDecoder::new(&spec, &lay)?;
                let total: u64 = m.iter().map(|&x| x.pow(d as u32)).product();
                for idx in 0..total {
                    let mut rest = idx;
                    let msgs: Vec<TsMessage> = (0..d)
                        .map(|i| {
                            let ones: Vec<u32> = (0..d)
                                .map(|_| {
                                    let v = rest % m[i];
                                    rest /= m[i];
                                    v as u32
                                })
                                .collect();
                            TsMessage::from_binary(&ones, lay.denominator(i))
                        })
                        .collect();
                    let p_y = ideal_output_distribution(&msgs, &spec, &lay)?;
                    let out = dec.decode_distribution(&p_y)?;
                    decoded += 1;
                    if out.messages.as_deref() != Some(&msgs[..]) {
                        wrong.push(format!("binary d={d} m={m:?} #{idx}"));
                    }
                }
            }
        }

        let spec = default_channel(2, 2, eps)?;
        for s1 in 2..=4usize {
            for s2 in 2..=4usize {
                configs += 1;
                let cb = build_root_codebook(2, &[s1, s2])?;
                let dec = RootDecoder::new(&spec, cb.clone())?;
                for l1 in 0..s1 {
                    for l2 in 0..s2 {
                        let p_w = bernoulli_sum_pmf(&[cb.theta(0, l1), cb.theta(1, l2)]);
                        let p_z = Distribution::new(
                            DistributionKind::Exact,
                            spec.matrix().tr_mul_vec(&p_w.probs)?,
                        );
                        decoded += 1;
                        if dec.decode_distribution(&p_z)?.messages != [l1, l2] {
                            wrong.push(format!("root sizes=({s1},{s2}) ({l1},{l2})"));
                        }
                    }
                }
            }
        }
        wrong.truncate(5);
        Ok((
            wrong.is_empty(),
            format!("{configs} configurations, {decoded} message tuples, failures {wrong:?}"),
        ))
    })
}

fn matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    fn rec(a: &[Complex64], b: &[Complex64], used: &mut Vec<bool>, i: usize, cur: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(cur);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                rec(a, b, used, i + 1, cur.max((a[i] - b[j]).norm()), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best
}

/// The analytic root-perturbation bound dominates the brute-force matching
/// distance for random coefficient perturbations of `∏(ξ + 1 + kδ)`.
pub fn check_root_stability(d: usize, delta: f64, coeff_error: f64, trials: usize, seed: u64) -> CheckReport {
    timed("root-stability-bound", 10, || {
        let roots: Vec<f64> = (0..d).map(|k| -1.0 - k as f64 * delta).collect();
        let coeffs = monic_from_roots(&roots);
        let bound = root_stability_bound(&coeffs, delta, coeff_error)?;
        let truth: Vec<Complex64> = roots.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut violations = 0;
        for _ in 0..trials {
            let mut pert = coeffs.clone();
            for c in pert.iter_mut().take(d) {
                *c += rng.random_range(-coeff_error..=coeff_error);
            }
            let got = linalg::companion_eigenvalues(&pert)?;
            let dist = matching_distance(&truth, &got);
            worst = worst.max(dist);
            violations += usize::from(!(dist <= bound));
        }
        Ok((
            violations == 0,
            format!("{trials} perturbations, worst distance {worst:.2e}, bound {bound:.3e}"),
        ))
    })
}

/// The full property suite with its standard parameters.
pub fn run_all() -> Vec<CheckReport> {
    vec![
        check_pgf_factorization(1000, 1),
        check_mixed_radix(4, 10_000),
        check_lattice_cardinality(4, 12),
        check_subsegment_proportions(500, 4),
        check_y_marginal(5, 3, 3, 5),
        check_matrix_lemmas(5, 1000, 6),
        check_exact_statistics(500),
        check_root_stability(3, 0.5, 1e-6, 1000, 10),
    ]
}
