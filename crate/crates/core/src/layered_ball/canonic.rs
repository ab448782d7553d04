use super::SparseInstance;
use crate::ceil_log2;
use crate::error::{Error, Result};

/// Default cap on the number of radius vectors for one guess.
pub const DEFAULT_RADIUS_CAP: u64 = 10_000_000;

/// Geometric radius grid below `delta` and the sorted radius vectors over it
/// whose ball cost stays within `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRadii {
    pub delta: f64,
    pub gamma: f64,
    /// Grid values, largest first.
    pub singles: Vec<f64>,
    /// Non-increasing vectors in ascending lexicographic order.
    pub vectors: Vec<Vec<f64>>,
}

impl CandidateRadii {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `2^m n^4`.
    pub fn count_bound(n: usize, m: usize) -> f64 {
        2f64.powi(m as i32) * (n as f64).powi(4)
    }
}

/// All `(delta, gamma)` guesses: `delta` ranges over point-facility distances and zero,
/// `gamma = delta * 2^j * sum(rho)` for `j = 1..=ceil(log2 n)`.
pub fn guess_pairs(sparse: &SparseInstance) -> Vec<(f64, f64)> {
    let inst = &sparse.instance;
    let base = inst.base();
    let mut deltas: Vec<f64> = vec![0.0];
    for p in 0..base.n() {
        for x in 0..base.num_facilities() {
            deltas.push(base.pf(p, x));
        }
    }
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let rho_sum: f64 = inst.rho().iter().sum();
    let levels = ceil_log2(base.n() as u128).max(1);
    let mut out = Vec::new();
    for d in deltas {
        if d == 0.0 {
            out.push((0.0, 0.0));
            continue;
        }
        for j in 1..=levels {
            out.push((d, d * 2f64.powi(j as i32) * rho_sum));
        }
    }
    out
}

/// Grid `{delta / 2^i : i = 0..=ceil(3 log2 n)}` and every non-increasing
/// `m`-vector over it with `mu . r <= gamma`.
pub fn enumerate_radii(n: usize, m: usize, mu: &[f64], delta: f64, gamma: f64, cap: u64) -> Result<CandidateRadii> {
    if !(delta >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::domain("delta and gamma must be nonnegative"));
    }
    if mu.len() != m {
        return Err(Error::domain("mu must have m entries"));
    }
    let singles: Vec<f64> = if delta == 0.0 {
        vec![0.0]
    } else {
        let steps = ceil_log2((n as u128).pow(3));
        (0..=steps).map(|i| delta / 2f64.powi(i as i32)).collect()
    };
    let budget = gamma * (1.0 + 1e-12) + 1e-12;
    // cheapest completion of the remaining layers with the smallest grid value
    let smallest = *singles.last().expect("grid is nonempty");
    let mut tail = vec![0.0; m + 1];
    for i in (0..m).rev() {
        tail[i] = tail[i + 1] + mu[i] * smallest;
    }

    let mut walk = Walk { singles: &singles, mu, tail: &tail, budget, cap, cur: vec![0.0; m], out: Vec::new() };
    walk.descend(0, 0, 0.0)?;
    let mut vectors = walk.out;
    vectors.reverse();
    Ok(CandidateRadii { delta, gamma, singles, vectors })
}

struct Walk<'a> {
    singles: &'a [f64],
    mu: &'a [f64],
    tail: &'a [f64],
    budget: f64,
    cap: u64,
    cur: Vec<f64>,
    out: Vec<Vec<f64>>,
}

impl Walk<'_> {
    fn descend(&mut self, layer: usize, from: usize, spent: f64) -> Result<()> {
        if layer == self.mu.len() {
            if self.out.len() as u64 >= self.cap {
                return Err(Error::sizing("candidate radius vectors", self.out.len() as f64 + 1.0, self.cap));
            }
            self.out.push(self.cur.clone());
            return Ok(());
        }
        for s in from..self.singles.len() {
            let cost = spent + self.mu[layer] * self.singles[s];
            if cost + self.tail[layer + 1] > self.budget {
                continue;
            }
            self.cur[layer] = self.singles[s];
            self.descend(layer + 1, s, cost)?;
        }
        Ok(())
    }
}
