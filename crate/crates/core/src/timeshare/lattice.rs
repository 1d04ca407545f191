//! Simplex lattices: probability vectors whose entries lie on a sender's grid.

use rand::Rng;

use crate::error::{Error, Result};

/// Numerators of one lattice point over the sender's common denominator.
pub type LatticePoint = Vec<u32>;

/// All `p`-vectors over a sender's grid that sum to 1.
///
/// Non-final senders use the grid `{l/(m-1)}`; the final sender uses
/// `{l/m : l < m}`, so its numerators sum to `m` with each at most `m-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLattice {
    p: usize,
    m: u64,
    is_last: bool,
    points: Vec<LatticePoint>,
}

impl SimplexLattice {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn is_last(&self) -> bool {
        self.is_last
    }

    pub fn denominator(&self) -> u64 {
        denominator(self.m, self.is_last)
    }

    /// Points in lexicographic order of their numerators.
    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lexicographic rank of a point, if it belongs to the lattice.
    pub fn index_of(&self, point: &[u32]) -> Option<usize> {
        self.points
            .binary_search_by(|probe| probe.as_slice().cmp(point))
            .ok()
    }
}

/// Common denominator of a sender's grid.
pub fn denominator(m: u64, is_last: bool) -> u64 {
    if is_last {
        m
    } else {
        m - 1
    }
}

/// Whether `point` is a lattice point for the given granularity.
pub fn on_lattice(point: &[u32], p: usize, m: u64, is_last: bool) -> bool {
    point.len() == p
        && point.iter().all(|&l| (l as u64) < m)
        && point.iter().map(|&l| l as u64).sum::<u64>() == denominator(m, is_last)
}

/// Enumerates the lattice by walking weak compositions of the denominator
/// into `p` parts bounded by `m-1`.
pub fn build_lattice(p: usize, m: u64, is_last: bool) -> Result<SimplexLattice> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
    }
    if m > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!("granularity {m} is too large")));
    }
    let mut points = Vec::new();
    let mut cur = Vec::with_capacity(p);
    compositions(p, denominator(m, is_last), m - 1, &mut cur, &mut points);
    Ok(SimplexLattice {
        p,
        m,
        is_last,
        points,
    })
}

fn compositions(parts: usize, total: u64, cap: u64, cur: &mut Vec<u32>, out: &mut Vec<LatticePoint>) {
    if parts == 1 {
        if total <= cap {
            cur.push(total as u32);
            out.push(cur.clone());
            cur.pop();
        }
        return;
    }
    for first in 0..=total.min(cap) {
        // Remaining parts can absorb at most (parts-1)*cap.
        if total - first > (parts as u64 - 1) * cap {
            continue;
        }
        cur.push(first as u32);
        compositions(parts - 1, total - first, cap, cur, out);
        cur.pop();
    }
}

/// `C(n+k-1, k)`, the number of size-k multisets from n kinds.
pub fn multichoose(n: u64, k: u64) -> u128 {
    if k == 0 {
        return 1;
    }
    if n == 0 {
        return 0;
    }
    binomial(n + k - 1, k)
}

/// Binomial coefficient in exact integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        // acc * (n-i) is divisible by (i+1) after the multiplication.
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc
}

/// Closed-form lattice cardinality.
pub fn lattice_size(p: usize, m: u64, is_last: bool) -> u128 {
    let k = p as u64 - 1;
    if is_last {
        multichoose(m + 1, k) - p as u128
    } else {
        multichoose(m, k)
    }
}

/// Draws a lattice point uniformly at random without enumerating the lattice.
///
/// Stars and bars: choose `p-1` bar positions among `denominator + p - 1`
/// slots. The final-sender lattice excludes the `p` points with a part equal
/// to `m`; those draws are rejected.
pub fn sample_lattice_point<R: Rng + ?Sized>(p: usize, m: u64, is_last: bool, rng: &mut R) -> LatticePoint {
    let denom = denominator(m, is_last);
    let slots = (denom + p as u64 - 1) as usize;
    loop {
        let mut bars: Vec<usize> = rand::seq::index::sample(rng, slots, p - 1).into_vec();
        bars.sort_unstable();
        let mut point = Vec::with_capacity(p);
        let mut prev = 0usize;
        for &b in &bars {
            point.push((b - prev) as u32);
            prev = b + 1;
        }
        point.push((slots - prev) as u32);
        if point.iter().all(|&l| (l as u64) < m) {
            return point;
        }
    }
}
