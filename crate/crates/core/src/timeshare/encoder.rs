use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Codeword, Symbol};

use super::lattice::{on_lattice, sample_lattice_point, LatticePoint};
use super::layout::TimeShareLayout;
use super::MessageSpace;

/// One sender's message: a probability vector per segment, stored as
/// numerators over the sender's grid denominator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TsMessage {
    pub segments: Vec<LatticePoint>,
}

impl TsMessage {
    pub fn new(segments: Vec<LatticePoint>) -> Self {
        TsMessage { segments }
    }

    /// Binary message from the numerators of `P(X = 1)` in each segment.
    pub fn from_binary(ones: &[u32], denominator: u64) -> Self {
        TsMessage {
            segments: ones
                .iter()
                .map(|&l| vec![denominator as u32 - l.min(denominator as u32), l])
                .collect(),
        }
    }

    /// Whether the message belongs to the message set of `sender`.
    pub fn is_member(&self, layout: &TimeShareLayout, sender: usize, space: MessageSpace) -> bool {
        if self.segments.len() != layout.d() {
            return false;
        }
        let m = layout.m()[sender];
        let last = layout.is_last(sender);
        match space {
            MessageSpace::Lattice => self
                .segments
                .iter()
                .all(|pt| on_lattice(pt, layout.p(), m, last)),
            MessageSpace::Binary => {
                let denom = layout.denominator(sender);
                layout.p() == 2
                    && self.segments.iter().all(|pt| {
                        pt.len() == 2 && (pt[1] as u64) < m && pt[0] as u64 + pt[1] as u64 == denom
                    })
            }
        }
    }
}

/// Uniformly random message for `sender`.
pub fn sample_message<R: Rng + ?Sized>(
    layout: &TimeShareLayout,
    sender: usize,
    space: MessageSpace,
    rng: &mut R,
) -> TsMessage {
    let m = layout.m()[sender];
    let last = layout.is_last(sender);
    let segments = (0..layout.d())
        .map(|_| match space {
            MessageSpace::Lattice => sample_lattice_point(layout.p(), m, last, rng),
            MessageSpace::Binary => {
                let l = rng.random_range(0..m) as u32;
                vec![layout.denominator(sender) as u32 - l, l]
            }
        })
        .collect();
    TsMessage { segments }
}

/// Encodes a lattice message.
pub fn encode_timeshare<R: Rng + ?Sized>(
    message: &TsMessage,
    sender: usize,
    layout: &TimeShareLayout,
    rng: &mut R,
) -> Result<Codeword> {
    check_sender(sender, layout)?;
    if !message.is_member(layout, sender, MessageSpace::Lattice) {
        return Err(Error::OffGrid(format!(
            "message {:?} is not in the lattice message set of sender {}",
            message.segments,
            sender + 1
        )));
    }
    Ok(encode_unchecked(message, sender, layout, rng))
}

/// Encodes a binary grid message (one probability of a one per segment).
pub fn encode_timeshare_binary<R: Rng + ?Sized>(
    message: &TsMessage,
    sender: usize,
    layout: &TimeShareLayout,
    rng: &mut R,
) -> Result<Codeword> {
    check_sender(sender, layout)?;
    if layout.p() != 2 {
        return Err(Error::InvalidParameter("binary encoder needs p = 2".into()));
    }
    if !message.is_member(layout, sender, MessageSpace::Binary) {
        return Err(Error::OffGrid(format!(
            "message {:?} is not in the binary message set of sender {}",
            message.segments,
            sender + 1
        )));
    }
    Ok(encode_unchecked(message, sender, layout, rng))
}

fn check_sender(sender: usize, layout: &TimeShareLayout) -> Result<()> {
    if sender >= layout.d() {
        return Err(Error::InvalidParameter(format!(
            "sender index {sender} out of range for d = {}",
            layout.d()
        )));
    }
    Ok(())
}

/// Constant sent by a passive sender. Indices are zero-based, so the
/// conditions read `i < c` and `i <= c` rather than `i ≤ c-1` and `i ≤ c`.
fn passive_symbol(sender: usize, segment: usize, active: usize, p: usize) -> Symbol {
    let high = if sender < active {
        sender < segment
    } else {
        sender <= segment
    };
    if high {
        (p - 1) as Symbol
    } else {
        0
    }
}

fn encode_unchecked<R: Rng + ?Sized>(
    message: &TsMessage,
    sender: usize,
    layout: &TimeShareLayout,
    rng: &mut R,
) -> Codeword {
    let d = layout.d();
    let p = layout.p();
    let denom = layout.denominator(sender) as u32;
    let mut x = vec![0 as Symbol; layout.n()];
    for c in 0..d {
        for b in 0..d {
            let range = layout.subsegment_range(c, b);
            if b != sender {
                x[range].fill(passive_symbol(sender, c, b, p));
                continue;
            }
            let point = &message.segments[c];
            for v in &mut x[range] {
                // Exact categorical draw: a uniform integer below the
                // denominator against the running numerator sums.
                let u = rng.random_range(0..denom);
                let mut acc = 0;
                let mut k = 0;
                loop {
                    acc += point[k];
                    if u < acc || k + 1 == p {
                        break;
                    }
                    k += 1;
                }
                *v = k as Symbol;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::adder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_three_sender_passive_pattern() {
        // d=3, p=2, m=(2,2,2): each subsegment has at least one letter when n/d = 8.
        let lay = TimeShareLayout::with_granularities(24, 3, 2, &[2, 2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let msg = sample_message(&lay, 1, MessageSpace::Lattice, &mut rng);
        let x = encode_timeshare(&msg, 1, &lay, &mut rng).unwrap();
        for b in [0, 2] {
            assert!(x[lay.subsegment_range(0, b)].iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn sender_one_high_in_late_subsegments_of_segment_three() {
        let p = 4;
        let lay = TimeShareLayout::with_granularities(30, 3, p, &[2, 2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msg = sample_message(&lay, 0, MessageSpace::Lattice, &mut rng);
        let x = encode_timeshare(&msg, 0, &lay, &mut rng).unwrap();
        for b in [1, 2] {
            assert!(x[lay.subsegment_range(2, b)].iter().all(|&s| s as usize == p - 1));
        }
    }

    #[test]
    fn passive_senders_realise_domain_shift() {
        for d in 2..=5 {
            for p in 2..=4 {
                for c in 0..d {
                    for b in 0..d {
                        let shift: usize = (0..d)
                            .filter(|&i| i != b)
                            .map(|i| passive_symbol(i, c, b, p) as usize)
                            .sum();
                        assert_eq!(shift, c * (p - 1));
                    }
                }
            }
        }
    }

    #[test]
    fn adder_output_stays_in_segment_window() {
        let (d, p) = (3, 3);
        let lay = TimeShareLayout::with_granularities(60, d, p, &[3, 2, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Codeword> = (0..d)
            .map(|i| {
                let msg = sample_message(&lay, i, MessageSpace::Lattice, &mut rng);
                encode_timeshare(&msg, i, &lay, &mut rng).unwrap()
            })
            .collect();
        let w = adder(&x, p).unwrap();
        for (j, &s) in w.iter().enumerate() {
            let (c, _) = lay.locate(j);
            let lo = (c * (p - 1)) as Symbol;
            assert!(s >= lo && s <= lo + (p - 1) as Symbol);
        }
    }

    #[test]
    fn rejects_off_lattice_message() {
        let lay = TimeShareLayout::with_granularities(4, 2, 2, &[2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = TsMessage::new(vec![vec![2, 0], vec![1, 1]]);
        assert!(encode_timeshare(&bad, 1, &lay, &mut rng).is_err());
        // The same message is a valid binary grid message (θ = 0 in segment 1).
        assert!(encode_timeshare_binary(&bad, 1, &lay, &mut rng).is_ok());
    }

    #[test]
    fn categorical_frequencies() {
        let lay = TimeShareLayout::with_granularities(120_000, 2, 3, &[5, 2]).unwrap();
        let msg = TsMessage::new(vec![vec![1, 0, 3], vec![2, 2, 0]]);
        let x = encode_timeshare(&msg, 0, &lay, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let r = lay.subsegment_range(0, 0);
        let len = r.len() as f64;
        let mut counts = [0usize; 3];
        for &s in &x[r] {
            counts[s as usize] += 1;
        }
        assert!((counts[0] as f64 / len - 0.25).abs() < 0.01);
        assert_eq!(counts[1], 0);
        assert!((counts[2] as f64 / len - 0.75).abs() < 0.01);
    }
}
