use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{transmit_with, DmcSampler, TransmissionRecord, TransmitOptions};
use crate::codec_root::{build_root_codebook, encode_root, RootDecoder};
use crate::error::{Error, Result};
use crate::model::{ChannelSpec, Codeword};
use crate::timeshare::{
    build_lattice, build_layout_any_region, encode_timeshare, encode_timeshare_binary, sample_message,
    BinaryTimeShareDecoder, MessageSpace, SimplexLattice, TimeShareDecoder, TimeShareLayout, TsMessage,
};

use super::config::{ExperimentConfig, Scheme};

/// Largest message-tuple count accepted in exhaustive mode.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the child stream for one trial, mixed from the master seed, the
/// blocklength and the trial index.
pub fn trial_seed(master: u64, n: usize, trial: u64) -> [u8; 32] {
    let mut state = master;
    let a = splitmix64(&mut state);
    state ^= (n as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let b = splitmix64(&mut state);
    state ^= trial.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        let word = splitmix64(&mut state) ^ if i == 0 { a } else { b.rotate_left(i as u32 * 17) };
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    seed
}

pub fn trial_rng(master: u64, n: usize, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(trial_seed(master, n, trial))
}

/// `max(2, ⌊n^R⌋)`, snapping values within `1e-9` relative of an integer.
pub fn root_codebook_size(n: usize, rate: f64) -> usize {
    let x = (n as f64).powf(rate);
    let r = x.round();
    let f = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.floor() };
    if f.is_finite() && f >= 2.0 {
        f as usize
    } else {
        2
    }
}

#[derive(Debug, Clone)]
enum Codec {
    Root(RootDecoder),
    Timeshare {
        layout: TimeShareLayout,
        decoder: TimeShareDecoder,
    },
    Binary {
        layout: TimeShareLayout,
        decoder: BinaryTimeShareDecoder,
    },
}

/// A sender message in either family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Message {
    /// Zero-based grid index of the root scheme.
    Root(usize),
    TimeShare(TsMessage),
}

/// Verdict of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub correct: bool,
    pub sender_correct: Vec<bool>,
    /// Set when the decoder reported that its output left the message set.
    pub erasure: bool,
}

/// Full account of one trial, for verbose runs.
#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub outcome: TrialOutcome,
    pub sent: Vec<Message>,
    pub decoded: Option<Vec<Message>>,
    pub record: TransmissionRecord,
}

/// Everything fixed for a given blocklength: codebooks, layout, decoders.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    scheme: Scheme,
    n: usize,
    d: usize,
    p: usize,
    codec: Codec,
    sampler: DmcSampler,
    skip_permutation: bool,
    exhaustive: bool,
    /// Per-sender lattices, filled only for exhaustive lattice runs.
    lattices: Vec<SimplexLattice>,
    effective_rates: Vec<f64>,
}

impl TrialSetup {
    pub fn new(cfg: &ExperimentConfig, spec: &ChannelSpec, n: usize) -> Result<Self> {
        let rates = cfg.rate_tuple()?;
        let (d, p) = (spec.d(), spec.p());
        if rates.len() != d {
            return Err(Error::Config(format!("{} rates for {d} senders", rates.len())));
        }
        let (codec, effective_rates) = match cfg.scheme {
            Scheme::Root => {
                let sizes: Vec<usize> = rates
                    .as_slice()
                    .iter()
                    .map(|&r| root_codebook_size(n, r))
                    .collect();
                let eff = sizes
                    .iter()
                    .map(|&s| (s as f64).ln() / (n as f64).ln())
                    .collect();
                let cb = build_root_codebook(d, &sizes)?;
                (Codec::Root(RootDecoder::new(spec, cb)?), eff)
            }
            Scheme::Timeshare => {
                let layout = build_layout_any_region(n, d, p, &rates)?;
                let decoder = TimeShareDecoder::new(spec, &layout)?;
                let eff = layout.effective_rates();
                (Codec::Timeshare { layout, decoder }, eff)
            }
            Scheme::TimeshareBinary => {
                let layout = build_layout_any_region(n, d, p, &rates)?;
                let decoder = BinaryTimeShareDecoder::new(spec, &layout)?;
                let eff = layout.effective_rates();
                (Codec::Binary { layout, decoder }, eff)
            }
        };
        let mut setup = TrialSetup {
            scheme: cfg.scheme,
            n,
            d,
            p,
            codec,
            sampler: DmcSampler::new(spec),
            skip_permutation: cfg.skip_permutation,
            exhaustive: false,
            lattices: Vec::new(),
            effective_rates,
        };
        if cfg.exhaustive {
            setup.prepare_exhaustive()?;
        }
        Ok(setup)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn effective_rates(&self) -> &[f64] {
        &self.effective_rates
    }

    /// Layout of the time-sharing schemes.
    pub fn layout(&self) -> Option<&TimeShareLayout> {
        match &self.codec {
            Codec::Root(_) => None,
            Codec::Timeshare { layout, .. } | Codec::Binary { layout, .. } => Some(layout),
        }
    }

    /// Root-scheme codebook sizes.
    pub fn root_sizes(&self) -> Option<Vec<usize>> {
        match &self.codec {
            Codec::Root(dec) => Some(dec.codebook().sizes()),
            _ => None,
        }
    }

    fn prepare_exhaustive(&mut self) -> Result<()> {
        let d = self.d as u32;
        let total: u128 = match &self.codec {
            Codec::Root(dec) => dec.codebook().sizes().iter().map(|&s| s as u128).product(),
            Codec::Timeshare { layout, .. } => {
                self.lattices = (0..self.d)
                    .map(|i| build_lattice(self.p, layout.m()[i], layout.is_last(i)))
                    .collect::<Result<_>>()?;
                self.lattices.iter().map(|l| (l.len() as u128).pow(d)).product()
            }
            Codec::Binary { layout, .. } => layout.m().iter().map(|&m| (m as u128).pow(d)).product(),
        };
        if total > EXHAUSTIVE_LIMIT {
            return Err(Error::Config(format!(
                "exhaustive mode needs at most {EXHAUSTIVE_LIMIT} message tuples, got {total}"
            )));
        }
        self.exhaustive = true;
        Ok(())
    }

    /// Message tuple number `index` (mod the total) in a fixed mixed-radix order.
    fn enumerated_messages(&self, index: u64) -> Vec<Message> {
        let mut rest = index as u128;
        let mut take = |base: u128| {
            let v = rest % base;
            rest /= base;
            v as usize
        };
        match &self.codec {
            Codec::Root(dec) => dec
                .codebook()
                .sizes()
                .iter()
                .map(|&s| Message::Root(take(s as u128)))
                .collect(),
            Codec::Timeshare { .. } => self
                .lattices
                .iter()
                .map(|lat| {
                        let segs = (0..self.d)
                            .map(|_| lat.points()[take(lat.len() as u128)].clone())
                            .collect();
                        Message::TimeShare(TsMessage::new(segs))
                })
                .collect(),
            Codec::Binary { layout, .. } => (0..self.d)
                .map(|i| {
                    let m = layout.m()[i];
                    let ones: Vec<u32> = (0..self.d).map(|_| take(m as u128) as u32).collect();
                    Message::TimeShare(TsMessage::from_binary(&ones, layout.denominator(i)))
                })
                .collect(),
        }
    }

    fn sample_messages<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Message> {
        match &self.codec {
            Codec::Root(dec) => dec
                .codebook()
                .sizes()
                .iter()
                .map(|&s| Message::Root(rng.random_range(0..s)))
                .collect(),
            Codec::Timeshare { layout, .. } => (0..self.d)
                .map(|i| Message::TimeShare(sample_message(layout, i, MessageSpace::Lattice, rng)))
                .collect(),
            Codec::Binary { layout, .. } => (0..self.d)
                .map(|i| Message::TimeShare(sample_message(layout, i, MessageSpace::Binary, rng)))
                .collect(),
        }
    }

    fn encode<R: Rng + ?Sized>(&self, messages: &[Message], rng: &mut R) -> Result<Vec<Codeword>> {
        messages
            .iter()
            .enumerate()
            .map(|(i, msg)| match (&self.codec, msg) {
                (Codec::Root(dec), Message::Root(l)) => {
                    Ok(encode_root(dec.codebook().theta(i, *l), self.n, rng))
                }
                (Codec::Timeshare { layout, .. }, Message::TimeShare(m)) => {
                    encode_timeshare(m, i, layout, rng)
                }
                (Codec::Binary { layout, .. }, Message::TimeShare(m)) => {
                    encode_timeshare_binary(m, i, layout, rng)
                }
                _ => unreachable!("message family matches the codec"),
            })
            .collect()
    }

    fn decode(&self, y: &[u32]) -> Result<Option<Vec<Message>>> {
        Ok(match &self.codec {
            Codec::Root(dec) => Some(dec.decode(y)?.messages.into_iter().map(Message::Root).collect()),
            Codec::Timeshare { decoder, .. } => decoder
                .decode(y)?
                .messages
                .map(|ms| ms.into_iter().map(Message::TimeShare).collect()),
            Codec::Binary { decoder, .. } => decoder
                .decode(y)?
                .messages
                .map(|ms| ms.into_iter().map(Message::TimeShare).collect()),
        })
    }

    fn execute(&self, master: u64, trial: u64, record: bool) -> Result<TrialReport> {
        let mut rng = trial_rng(master, self.n, trial);
        let sent = if self.exhaustive {
            self.enumerated_messages(trial)
        } else {
            self.sample_messages(&mut rng)
        };
        let x = self.encode(&sent, &mut rng)?;
        let opts = TransmitOptions {
            record,
            skip_permutation: self.skip_permutation,
        };
        let out = transmit_with(&x, self.p, &self.sampler, &mut rng, opts)?;
        let decoded = self.decode(&out.y)?;
        let sender_correct: Vec<bool> = match &decoded {
            Some(ms) => ms.iter().zip(&sent).map(|(a, b)| a == b).collect(),
            None => vec![false; self.d],
        };
        let outcome = TrialOutcome {
            correct: sender_correct.iter().all(|&c| c),
            sender_correct,
            erasure: decoded.is_none(),
        };
        let record = out.record.unwrap_or_else(|| TransmissionRecord {
            x: Vec::new(),
            w: Vec::new(),
            z: Vec::new(),
            y: Vec::new(),
            sigma: None,
        });
        Ok(TrialReport {
            outcome,
            sent,
            decoded,
            record,
        })
    }

    /// Runs trial `trial` on its own random stream.
    pub fn run(&self, master: u64, trial: u64) -> Result<TrialOutcome> {
        Ok(self.execute(master, trial, false)?.outcome)
    }

    /// Same as [`TrialSetup::run`] but keeps every intermediate.
    pub fn run_recorded(&self, master: u64, trial: u64) -> Result<TrialReport> {
        self.execute(master, trial, true)
    }
}

/// Builds the setup for `n` and runs one trial.
pub fn run_trial(cfg: &ExperimentConfig, n: usize, trial_index: u64) -> Result<TrialOutcome> {
    let v = cfg.validate()?;
    TrialSetup::new(cfg, &v.spec, n)?.run(cfg.seed, trial_index)
}
