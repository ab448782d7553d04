//! Layered Ball k-Median: every center carries `m` nested radii.
//!
//! A point pays `sum_i rho_i (d(p,x) - r_i)^+` to its cheapest ball and each
//! opened ball pays `mu . r`.

mod canonic;
mod sparse;

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::instance::{Clustering, MetricInstance};
use crate::sorted_desc;

pub use canonic::{enumerate_radii, guess_pairs, CandidateRadii, DEFAULT_RADIUS_CAP};
pub use sparse::{sparsify, unsparsify_solution, SparseInstance};

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredBallInstance {
    base: MetricInstance,
    rho: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Deserialize)]
struct LayerJson {
    m: usize,
    rho: Vec<f64>,
    mu: Vec<f64>,
}

impl LayeredBallInstance {
    pub fn new(base: MetricInstance, rho: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        if rho.len() != mu.len() {
            return Err(Error::domain("rho and mu must have the same length"));
        }
        if rho.iter().chain(&mu).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("rho and mu must be finite and nonnegative"));
        }
        Ok(LayeredBallInstance { base, rho, mu })
    }

    /// Base instance fields plus `m`, `rho`, `mu`.
    pub fn from_json_value(v: &Value) -> Result<Self> {
        let base = MetricInstance::from_json_value(v)?;
        let layers: LayerJson = serde_json::from_value(v.clone())?;
        if layers.rho.len() != layers.m || layers.mu.len() != layers.m {
            return Err(Error::InvalidInput("rho and mu must have m entries".into()));
        }
        Self::new(base, layers.rho, layers.mu)
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = self.base.to_json_value();
        let obj = v.as_object_mut().expect("instance json is an object");
        obj.insert("m".into(), self.m().into());
        obj.insert("rho".into(), self.rho.clone().into());
        obj.insert("mu".into(), self.mu.clone().into());
        v
    }

    pub fn base(&self) -> &MetricInstance {
        &self.base
    }

    pub fn m(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    /// Connection cost without argument checks.
    #[inline]
    pub fn connection(&self, d: f64, r: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rho.len() {
            let gap = d - r[i];
            if gap > 0.0 {
                s += self.rho[i] * gap;
            }
        }
        s
    }

    /// `mu . r`.
    #[inline]
    pub fn ball_cost(&self, r: &[f64]) -> f64 {
        self.mu.iter().zip(r).map(|(a, b)| a * b).sum()
    }
}

/// Open centers with their radius vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayeredBallSolution {
    radii: BTreeMap<usize, Vec<f64>>,
}

impl LayeredBallSolution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Vec<f64>)>) -> Self {
        let mut s = Self::new();
        for (x, r) in pairs {
            s.insert_max(x, r);
        }
        s
    }

    /// Opens `x` with `r`, or raises its radii coordinate-wise if already open.
    pub fn insert_max(&mut self, x: usize, r: Vec<f64>) {
        match self.radii.get_mut(&x) {
            Some(cur) => {
                for (c, v) in cur.iter_mut().zip(r) {
                    *c = c.max(v);
                }
            }
            None => {
                self.radii.insert(x, r);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn centers(&self) -> Vec<usize> {
        self.radii.keys().copied().collect()
    }

    pub fn radius(&self, x: usize) -> Option<&[f64]> {
        self.radii.get(&x).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.radii.iter().map(|(x, r)| (*x, r.as_slice()))
    }

    fn check(&self, inst: &LayeredBallInstance) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::domain("layered solution has no centers"));
        }
        for (&x, r) in &self.radii {
            if x >= inst.base.num_facilities() {
                return Err(Error::domain(format!("unknown facility index {x}")));
            }
            if r.len() != inst.m() || r.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::domain(format!("radius vector at {x} must be nonnegative of length m")));
            }
        }
        Ok(())
    }

    /// Cheapest ball of `p`, ties to the smaller facility index.
    pub fn closest(&self, inst: &LayeredBallInstance, p: usize) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (&x, r) in &self.radii {
            let c = inst.connection(inst.base.pf(p, x), r);
            if c < best.1 {
                best = (x, c);
            }
        }
        best
    }
}

/// `sum_i rho_i (d(p,x) - r_i)^+`.
pub fn lb_connection_cost(inst: &LayeredBallInstance, p: usize, x: usize, r: &[f64]) -> Result<f64> {
    if r.len() != inst.m() {
        return Err(Error::domain(format!("radius vector length {} != m = {}", r.len(), inst.m())));
    }
    if p >= inst.n() || x >= inst.base.num_facilities() {
        return Err(Error::domain("point or facility index out of range"));
    }
    Ok(inst.connection(inst.base.pf(p, x), r))
}

/// Sum of per-point cheapest connections plus all ball costs.
pub fn lb_cost(inst: &LayeredBallInstance, sol: &LayeredBallSolution) -> Result<f64> {
    sol.check(inst)?;
    let connections: f64 = (0..inst.n()).map(|p| sol.closest(inst, p).1).sum();
    let balls: f64 = sol.radii.values().map(|r| inst.ball_cost(r)).sum();
    Ok(connections + balls)
}

/// Layered instance whose optimum matches the ordered-weights objective with L1 outer norm.
pub fn reduce_ord_l1(inst: &MetricInstance, w: &[f64]) -> Result<LayeredBallInstance> {
    let n = inst.n();
    if w.len() != n {
        return Err(Error::domain(format!("weight vector has length {} but n = {n}", w.len())));
    }
    if w.iter().any(|&v| !(v >= 0.0)) || w.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::domain("weights must be nonnegative and non-increasing"));
    }
    let rho: Vec<f64> = (0..n).map(|i| w[i] - if i + 1 < n { w[i + 1] } else { 0.0 }).collect();
    let mu = rho.iter().enumerate().map(|(i, r)| r * (i + 1) as f64).collect();
    LayeredBallInstance::new(inst.clone(), rho, mu)
}

/// Assigns each point to its cheapest ball.
pub fn lb_solution_to_clustering(lb: &LayeredBallInstance, sol: &LayeredBallSolution) -> Result<Clustering> {
    sol.check(lb)?;
    let assignment = (0..lb.n()).map(|p| sol.closest(lb, p).0).collect();
    Clustering::new(&lb.base, sol.centers(), assignment)
}

/// Radii are the sorted cluster distance vectors; needs `m = n`.
pub fn clustering_to_lb_solution(lb: &LayeredBallInstance, cl: &Clustering) -> Result<LayeredBallSolution> {
    if lb.m() != lb.n() {
        return Err(Error::domain("clustering conversion needs one layer per point"));
    }
    let mut sol = LayeredBallSolution::new();
    for &x in cl.centers() {
        let v = crate::instance::cluster_distance_vector(&lb.base, cl, x)?;
        sol.insert_max(x, sorted_desc(&v));
    }
    Ok(sol)
}
