use log::warn;

use super::{LayeredBallInstance, LayeredBallSolution};
use crate::ceil_log2;
use crate::error::{Error, Result};

/// Layered instance with `1 <= mu_i / rho_i <= n`, layers sorted by that ratio,
/// and at most `ceil(log2 n)` layers, plus what is needed to map solutions back.
#[derive(Clone, Debug)]
pub struct SparseInstance {
    pub instance: LayeredBallInstance,
    pub original: LayeredBallInstance,
    pub clamped_rho: Vec<f64>,
    pub clamped_mu: Vec<f64>,
    /// Original layers with ratio below one.
    pub small: Vec<usize>,
    /// Original layers with ratio above `n`.
    pub large: Vec<usize>,
    /// Original layers with no connection weight after clamping.
    pub dropped: Vec<usize>,
    /// Original layer indices grouped per sparse layer, ordered by ratio.
    pub buckets: Vec<Vec<usize>>,
}

/// Clamps ratios into `[1, n]`, sorts layers by ratio and merges them into power-of-two buckets.
pub fn sparsify(inst: &LayeredBallInstance) -> Result<SparseInstance> {
    let n = inst.n();
    if n < 2 {
        return Err(Error::domain("sparsification needs at least two points"));
    }
    if inst.m() == 0 {
        return Err(Error::domain("sparsification needs at least one layer"));
    }
    let nf = n as f64;
    let m = inst.m();
    let (rho, mu) = (inst.rho(), inst.mu());
    let mut clamped_rho = rho.to_vec();
    let mut clamped_mu = mu.to_vec();
    let (mut small, mut large, mut dropped) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        if rho[i] == 0.0 {
            if mu[i] > 0.0 {
                warn!("layer {i} has rho = 0 and mu > 0; dropped");
                large.push(i);
            }
            dropped.push(i);
            clamped_mu[i] = 0.0;
            continue;
        }
        if mu[i] < rho[i] {
            small.push(i);
            clamped_rho[i] = mu[i];
        } else if mu[i] > nf * rho[i] {
            large.push(i);
            clamped_mu[i] = nf * rho[i];
        }
        if clamped_rho[i] == 0.0 {
            dropped.push(i);
        }
    }

    let mut kept: Vec<(usize, f64)> = (0..m)
        .filter(|i| clamped_rho[*i] > 0.0)
        .map(|i| (i, clamped_mu[i] / clamped_rho[i]))
        .collect();
    kept.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let levels = ceil_log2(n as u128).max(1) as usize;
    let mut grouped: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for &(i, ratio) in &kept {
        let j = if ratio <= 1.0 { 0 } else { (ratio.log2().floor() as usize).min(levels - 1) };
        grouped[j].push(i);
    }
    let buckets: Vec<Vec<usize>> = grouped.into_iter().filter(|b| !b.is_empty()).collect();
    let sparse_rho = buckets.iter().map(|b| b.iter().map(|&i| clamped_rho[i]).sum()).collect();
    let sparse_mu = buckets.iter().map(|b| b.iter().map(|&i| clamped_mu[i]).sum()).collect();
    let instance = LayeredBallInstance::new(inst.base().clone(), sparse_rho, sparse_mu)?;
    Ok(SparseInstance {
        instance,
        original: inst.clone(),
        clamped_rho,
        clamped_mu,
        small,
        large,
        dropped,
        buckets,
    })
}

impl SparseInstance {
    /// Radii for the clamped instance: bucket radii broadcast to member layers.
    fn clamped_radii(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.original.m()];
        for (j, bucket) in self.buckets.iter().enumerate() {
            for &i in bucket {
                out[i] = r[j];
            }
        }
        out
    }

    /// Maps a sparse solution to the original instance.
    pub fn unsparsify(&self, sol: &LayeredBallSolution) -> Result<LayeredBallSolution> {
        let m_sparse = self.instance.m();
        if sol.is_empty() {
            return Err(Error::domain("layered solution has no centers"));
        }
        if sol.iter().any(|(_, r)| r.len() != m_sparse) {
            return Err(Error::domain("radius vectors must match the sparse layer count"));
        }
        let base = self.original.base();
        let clamped: Vec<(usize, Vec<f64>)> = sol.iter().map(|(x, r)| (x, self.clamped_radii(r))).collect();

        // farthest point whose cheapest clamped ball is at x
        let mut reach = vec![0.0f64; clamped.len()];
        for p in 0..base.n() {
            let mut best = (0usize, f64::INFINITY);
            for (slot, (x, r)) in clamped.iter().enumerate() {
                let mut c = 0.0;
                let d = base.pf(p, *x);
                for i in 0..r.len() {
                    c += self.clamped_rho[i] * (d - r[i]).max(0.0);
                }
                if c < best.1 {
                    best = (slot, c);
                }
            }
            let slot = best.0;
            reach[slot] = reach[slot].max(base.pf(p, clamped[slot].0));
        }

        let mut out = LayeredBallSolution::new();
        for (slot, (x, mut r)) in clamped.into_iter().enumerate() {
            for &i in &self.small {
                r[i] = reach[slot];
            }
            for &i in &self.large {
                r[i] = 0.0;
            }
            out.insert_max(x, r);
        }
        Ok(out)
    }
}

pub fn unsparsify_solution(sparse: &SparseInstance, sol: &LayeredBallSolution) -> Result<LayeredBallSolution> {
    sparse.unsparsify(sol)
}
