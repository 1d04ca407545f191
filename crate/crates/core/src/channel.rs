//! The transmission pipeline: adder, memoryless channel, random permutation.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, Codeword, Distribution, DistributionKind, Symbol};

/// Adds the sender codewords letter by letter.
///
/// Every input symbol must lie in `0..p`; all codewords must share a length.
pub fn adder(x: &[Codeword], p: usize) -> Result<Codeword> {
    let n = x.first().map_or(0, |c| c.len());
    if x.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch(
            "sender codewords have different lengths".into(),
        ));
    }
    let mut w = vec![0 as Symbol; n];
    for row in x {
        for (j, (&s, out)) in row.iter().zip(w.iter_mut()).enumerate() {
            if s as usize >= p {
                return Err(Error::SymbolOutOfRange {
                    position: j,
                    symbol: s,
                    bound: p as u32 - 1,
                });
            }
            *out += s;
        }
    }
    Ok(w)
}

/// Inverse-CDF sampler for the rows of a channel matrix.
#[derive(Debug, Clone)]
pub struct DmcSampler {
    q: usize,
    cdf: Vec<f64>,
}

impl DmcSampler {
    pub fn new(spec: &ChannelSpec) -> Self {
        let q = spec.q();
        let mut cdf = Vec::with_capacity(q * q);
        for w in 0..q {
            let mut acc = 0.0;
            for &v in spec.row(w) {
                acc += v;
                cdf.push(acc);
            }
            // Guard the top of each row against round-off below 1.
            let last = cdf.len() - 1;
            cdf[last] = f64::INFINITY;
        }
        DmcSampler { q, cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, w: Symbol, rng: &mut R) -> Symbol {
        let row = &self.cdf[w as usize * self.q..(w as usize + 1) * self.q];
        let u: f64 = rng.random();
        row.partition_point(|&c| c <= u) as Symbol
    }
}

/// Passes each letter independently through the channel.
pub fn apply_dmc<R: Rng + ?Sized>(w: &[Symbol], spec: &ChannelSpec, rng: &mut R) -> Result<Codeword> {
    apply_dmc_with(w, &DmcSampler::new(spec), rng)
}

/// Same as [`apply_dmc`] with a prebuilt sampler.
pub fn apply_dmc_with<R: Rng + ?Sized>(
    w: &[Symbol],
    sampler: &DmcSampler,
    rng: &mut R,
) -> Result<Codeword> {
    if let Some((j, &s)) = w.iter().enumerate().find(|(_, &s)| s as usize >= sampler.q) {
        return Err(Error::SymbolOutOfRange {
            position: j,
            symbol: s,
            bound: sampler.q as u32 - 1,
        });
    }
    Ok(w.iter().map(|&s| sampler.sample(s, rng)).collect())
}

/// Uniform random permutation of `0..n` by Fisher-Yates.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..n).collect();
    fisher_yates(&mut sigma, rng);
    sigma
}

fn fisher_yates<T, R: Rng + ?Sized>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Reorders `z` by a uniformly random permutation.
pub fn permute<R: Rng + ?Sized>(z: &[Symbol], rng: &mut R) -> Codeword {
    let mut y = z.to_vec();
    fisher_yates(&mut y, rng);
    y
}

/// Every intermediate of one transmission.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionRecord {
    pub x: Vec<Codeword>,
    pub w: Codeword,
    pub z: Codeword,
    pub y: Codeword,
    /// `y[j] = z[sigma[j]]`; absent when the permutation stage was skipped.
    pub sigma: Option<Vec<usize>>,
}

/// Switches for [`transmit`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransmitOptions {
    pub record: bool,
    pub skip_permutation: bool,
}

/// Channel output and, on request, the full record.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub y: Codeword,
    pub record: Option<TransmissionRecord>,
}

/// Runs the adder, the channel and the permutation in sequence.
pub fn transmit<R: Rng + ?Sized>(
    x: &[Codeword],
    spec: &ChannelSpec,
    rng: &mut R,
    opts: TransmitOptions,
) -> Result<Transmission> {
    transmit_with(x, spec.p(), &DmcSampler::new(spec), rng, opts)
}

/// Same as [`transmit`] with a prebuilt sampler.
pub fn transmit_with<R: Rng + ?Sized>(
    x: &[Codeword],
    p: usize,
    sampler: &DmcSampler,
    rng: &mut R,
    opts: TransmitOptions,
) -> Result<Transmission> {
    let w = adder(x, p)?;
    let z = apply_dmc_with(&w, sampler, rng)?;
    // Shuffling an index vector consumes the same draws as shuffling `z`,
    // so recording does not change the output.
    let (y, sigma) = match (opts.skip_permutation, opts.record) {
        (true, _) => (z.clone(), None),
        (false, false) => (permute(&z, rng), None),
        (false, true) => {
            let sigma = random_permutation(z.len(), rng);
            (sigma.iter().map(|&j| z[j]).collect(), Some(sigma))
        }
    };
    let record = opts.record.then(|| TransmissionRecord {
        x: x.to_vec(),
        w,
        z,
        y: y.clone(),
        sigma,
    });
    Ok(Transmission { y, record })
}

/// Writes records as line-delimited JSON.
pub fn write_trace<W: Write>(out: &mut W, records: &[TransmissionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Symbol counts over `0..alphabet_size`.
pub fn histogram(y: &[Symbol], alphabet_size: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; alphabet_size];
    for (j, &s) in y.iter().enumerate() {
        match counts.get_mut(s as usize) {
            Some(c) => *c += 1,
            None => {
                return Err(Error::SymbolOutOfRange {
                    position: j,
                    symbol: s,
                    bound: alphabet_size as u32 - 1,
                })
            }
        }
    }
    Ok(counts)
}

/// Relative symbol frequencies.
pub fn empirical_distribution(y: &[Symbol], alphabet_size: usize) -> Result<Distribution> {
    if y.is_empty() {
        return Err(Error::EmptyCodeword);
    }
    let n = y.len() as f64;
    let probs = histogram(y, alphabet_size)?
        .into_iter()
        .map(|c| c as f64 / n)
        .collect();
    Ok(Distribution::new(DistributionKind::Empirical, probs))
}

/// Per-letter marginal of the permuted output: the weighted mixture of the
/// letter distributions of the unpermuted sequence.
pub fn marginal_y_exact(distributions: &[Distribution], weights: &[f64]) -> Result<Distribution> {
    if distributions.len() != weights.len() || distributions.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} distributions against {} weights",
            distributions.len(),
            weights.len()
        )));
    }
    let q = distributions[0].len();
    if distributions.iter().any(|d| d.len() != q) {
        return Err(Error::DimensionMismatch(
            "distributions over different alphabets".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "weights sum to {total}, not 1"
        )));
    }
    let mut out = vec![0.0; q];
    for (dist, &w) in distributions.iter().zip(weights) {
        for (o, &v) in out.iter_mut().zip(&dist.probs) {
            *o += w * v;
        }
    }
    Ok(Distribution::new(DistributionKind::Exact, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn adder_examples() {
        assert_eq!(adder(&[vec![0, 1], vec![0, 1]], 2).unwrap(), vec![0, 2]);
        assert_eq!(adder(&[vec![1, 1], vec![1, 1], vec![1, 1]], 2).unwrap(), vec![3, 3]);
        assert_eq!(adder(&[vec![2, 0], vec![1, 2]], 3).unwrap(), vec![3, 2]);
        assert!(matches!(
            adder(&[vec![0, 2], vec![0, 1]], 2),
            Err(Error::SymbolOutOfRange { position: 1, .. })
        ));
    }

    #[test]
    fn near_identity_channel_is_transparent() {
        let spec = default_channel(2, 2, 1e-9).unwrap();
        let w: Codeword = (0..1000).map(|j| (j % 3) as Symbol).collect();
        let z = apply_dmc(&w, &spec, &mut rng(1)).unwrap();
        assert_eq!(z, w);
        assert!(apply_dmc(&[], &spec, &mut rng(1)).unwrap().is_empty());
        assert!(apply_dmc(&[3], &spec, &mut rng(1)).is_err());
    }

    #[test]
    fn dmc_is_deterministic_given_seed() {
        let spec = default_channel(2, 3, 0.4).unwrap();
        let w: Codeword = (0..500).map(|j| (j % 5) as Symbol).collect();
        assert_eq!(
            apply_dmc(&w, &spec, &mut rng(9)).unwrap(),
            apply_dmc(&w, &spec, &mut rng(9)).unwrap()
        );
    }

    #[test]
    fn dmc_frequencies_follow_rows() {
        let spec = default_channel(2, 2, 0.6).unwrap();
        let w = vec![1 as Symbol; 200_000];
        let z = apply_dmc(&w, &spec, &mut rng(3)).unwrap();
        let emp = empirical_distribution(&z, 3).unwrap();
        for t in 0..3 {
            assert!((emp[t] - spec.prob(1, t)).abs() < 0.005);
        }
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permute(&[5], &mut rng(0)), vec![5]);
        let z: Codeword = vec![3, 1, 4, 1, 5, 9, 2, 6];
        let mut y = permute(&z, &mut rng(2));
        let mut zs = z.clone();
        y.sort();
        zs.sort();
        assert_eq!(y, zs);
    }

    #[test]
    fn permutations_of_three_are_uniform() {
        let mut r = rng(42);
        let mut counts = std::collections::HashMap::new();
        let trials = 60_000;
        for _ in 0..trials {
            *counts.entry(random_permutation(3, &mut r)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            assert!((*c as f64 / trials as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn transmit_records_consistent_intermediates() {
        let spec = default_channel(2, 2, 0.2).unwrap();
        let x = vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1]];
        let opts = TransmitOptions {
            record: true,
            skip_permutation: false,
        };
        let t = transmit(&x, &spec, &mut rng(5), opts).unwrap();
        let rec = t.record.unwrap();
        let mut w = rec.w.clone();
        w.sort();
        assert_eq!(w, vec![0, 1, 1, 2]);
        let sigma = rec.sigma.unwrap();
        for (j, &s) in sigma.iter().enumerate() {
            assert_eq!(rec.y[j], rec.z[s]);
        }
        let plain = transmit(&x, &spec, &mut rng(5), TransmitOptions::default()).unwrap();
        assert_eq!(plain.y, t.y);
    }

    #[test]
    fn trace_is_line_delimited() {
        let spec = default_channel(2, 2, 0.2).unwrap();
        let x = vec![vec![0, 1], vec![1, 1]];
        let opts = TransmitOptions {
            record: true,
            skip_permutation: true,
        };
        let rec = transmit(&x, &spec, &mut rng(1), opts).unwrap().record.unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &[rec.clone(), rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(v["sigma"].is_null());
    }

    #[test]
    fn empirical_examples() {
        let e = empirical_distribution(&[0, 0, 1, 2], 3).unwrap();
        assert_eq!(e.probs, vec![0.5, 0.25, 0.25]);
        let e = empirical_distribution(&[2, 2, 2], 4).unwrap();
        assert_eq!(e.probs, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(empirical_distribution(&[], 3), Err(Error::EmptyCodeword));
    }

    #[test]
    fn marginal_examples() {
        let a = Distribution::new(DistributionKind::Exact, vec![0.2, 0.3, 0.5]);
        assert_eq!(marginal_y_exact(&[a.clone()], &[1.0]).unwrap().probs, a.probs);
        let m = marginal_y_exact(
            &[
                Distribution::new(DistributionKind::Exact, vec![1.0, 0.0]),
                Distribution::new(DistributionKind::Exact, vec![0.0, 1.0]),
            ],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(m.probs, vec![0.5, 0.5]);
        assert!(marginal_y_exact(&[a], &[0.5, 0.5]).is_err());
    }
}
