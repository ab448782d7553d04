//! Exhaustive solvers for small instances, used as ground truth.

use crate::error::{Error, Result};
use crate::instance::{nearest_assignment, Clustering, MetricInstance};
use crate::layered_ball::{CandidateRadii, LayeredBallInstance, LayeredBallSolution};
use crate::norms::NormSpec;

/// Enumeration caps; exceeding one aborts with a sizing error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_center_subsets: u64,
    pub max_assignments: u64,
    pub max_radius_vectors: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_center_subsets: 1_000_000, max_assignments: 10_000_000, max_radius_vectors: 1_000_000 }
    }
}

impl OracleBudget {
    fn check_assignments(&self, inst: &MetricInstance) -> Result<()> {
        let needed = (inst.num_facilities() as f64).powi(inst.n() as i32);
        if needed > self.max_assignments as f64 {
            return Err(Error::sizing("assignments", needed, self.max_assignments));
        }
        if inst.n() > 24 {
            return Err(Error::sizing("points for subset masks", inst.n() as f64, 24));
        }
        Ok(())
    }

    fn check_subsets(&self, inst: &MetricInstance) -> Result<()> {
        let needed = subset_count(inst.num_facilities(), inst.k());
        if needed > self.max_center_subsets as f64 {
            return Err(Error::sizing("center subsets", needed, self.max_center_subsets));
        }
        Ok(())
    }
}

fn subset_count(nf: usize, k: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0;
    for j in 1..=k.min(nf) {
        c = c * (nf - j + 1) as f64 / j as f64;
        total += c;
    }
    total
}

/// Calls `visit` with every nonempty subset of `0..nf` of size at most `k`, in lexicographic order.
fn for_each_subset(nf: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(start: usize, nf: usize, k: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        for x in start..nf {
            cur.push(x);
            visit(cur);
            if cur.len() < k {
                rec(x + 1, nf, k, cur, visit);
            }
            cur.pop();
        }
    }
    rec(0, nf, k, &mut Vec::new(), &mut visit);
}

/// Walks all maps `P -> F` with at most `k` distinct images in lexicographic order,
/// passing the assignment and the point mask of each facility.
fn for_each_assignment(n: usize, nf: usize, k: usize, mut visit: impl FnMut(&[usize], &[u32])) {
    let mut sigma = vec![0usize; n];
    let mut masks = vec![0u32; nf];
    loop {
        masks.iter_mut().for_each(|m| *m = 0);
        for (p, &x) in sigma.iter().enumerate() {
            masks[x] |= 1 << p;
        }
        if masks.iter().filter(|&&m| m != 0).count() <= k {
            visit(&sigma, &masks);
        }
        // odometer, last point fastest
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            sigma[i] += 1;
            if sigma[i] < nf {
                break;
            }
            sigma[i] = 0;
        }
    }
}

/// Inner-norm cost of every (point subset, facility) cluster.
fn cluster_costs(inst: &MetricInstance, f: &NormSpec) -> Vec<f64> {
    let (n, nf) = (inst.n(), inst.num_facilities());
    let mut out = vec![0.0; (1 << n) * nf];
    let mut v = vec![0.0; n];
    for mask in 1..(1usize << n) {
        for x in 0..nf {
            for p in 0..n {
                v[p] = if mask >> p & 1 == 1 { inst.pf(p, x) } else { 0.0 };
            }
            out[mask * nf + x] = f.eval_unchecked(&v);
        }
    }
    out
}

fn check_norms(inst: &MetricInstance, f: &NormSpec, g: &NormSpec) -> Result<()> {
    if f.arity() != inst.n() || g.arity() != inst.k() {
        return Err(Error::domain("norm arities must be n (inner) and k (outer)"));
    }
    Ok(())
}

/// Minimum of the nested objective over all center sets and all assignments.
pub fn exact_ncc(inst: &MetricInstance, f: &NormSpec, g: &NormSpec, budget: &OracleBudget) -> Result<(f64, Clustering)> {
    check_norms(inst, f, g)?;
    budget.check_assignments(inst)?;
    let (n, nf, k) = (inst.n(), inst.num_facilities(), inst.k());
    let costs = cluster_costs(inst, f);
    let mut outer = vec![0.0; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_assignment(n, nf, k, |sigma, masks| {
        let mut slot = 0;
        outer.iter_mut().for_each(|c| *c = 0.0);
        for (x, &m) in masks.iter().enumerate() {
            if m != 0 {
                outer[slot] = costs[m as usize * nf + x];
                slot += 1;
            }
        }
        let c = g.eval_unchecked(&outer);
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, sigma.to_vec()));
        }
    });
    let (cost, sigma) = best.ok_or_else(|| Error::domain("instance has no feasible assignment"))?;
    let centers = sigma.clone();
    Ok((cost, Clustering::new(inst, centers, sigma)?))
}

/// Like [`exact_ncc`] but every point must go to its nearest chosen center.
pub fn exact_ncc_nearest(
    inst: &MetricInstance,
    f: &NormSpec,
    g: &NormSpec,
    budget: &OracleBudget,
) -> Result<(f64, Clustering)> {
    check_norms(inst, f, g)?;
    budget.check_subsets(inst)?;
    let mut best: Option<(f64, Clustering)> = None;
    let mut err = None;
    for_each_subset(inst.num_facilities(), inst.k(), |set| {
        let run = nearest_assignment(inst, set).and_then(|c| Ok((crate::instance::solution_cost(inst, &c, f, g)?, c)));
        match run {
            Ok((c, cl)) => {
                if best.as_ref().is_none_or(|b| c < b.0) {
                    best = Some((c, cl));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    best.ok_or_else(|| Error::domain("instance has no facilities"))
}

/// `min_X f((d(p, X))_p)` over center sets of size at most `k`.
pub fn exact_mnkc(inst: &MetricInstance, f: &NormSpec, budget: &OracleBudget) -> Result<(f64, Vec<usize>)> {
    if f.arity() != inst.n() {
        return Err(Error::domain("inner norm arity must be n"));
    }
    budget.check_subsets(inst)?;
    let n = inst.n();
    let mut v = vec![0.0; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_subset(inst.num_facilities(), inst.k(), |set| {
        for p in 0..n {
            v[p] = set.iter().map(|&x| inst.pf(p, x)).fold(f64::INFINITY, f64::min);
        }
        let c = f.eval_unchecked(&v);
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, set.to_vec()));
        }
    });
    best.ok_or_else(|| Error::domain("instance has no facilities"))
}

/// Exact layered-ball optimum; restricted to the given radius vectors when supplied.
///
/// Without candidates each layer's radius ranges over zero and the distances of
/// the ball's own points, which contains an optimal choice because the per-layer
/// cost is piecewise linear with breakpoints there.
pub fn exact_lbkm(
    lb: &LayeredBallInstance,
    budget: &OracleBudget,
    candidates: Option<&CandidateRadii>,
) -> Result<(f64, LayeredBallSolution)> {
    let inst = lb.base();
    budget.check_assignments(inst)?;
    let (n, nf, m) = (inst.n(), inst.num_facilities(), lb.m());
    if let Some(c) = candidates {
        if c.len() as u64 > budget.max_radius_vectors {
            return Err(Error::sizing("radius vectors", c.len() as f64, budget.max_radius_vectors));
        }
        if c.vectors.iter().any(|r| r.len() != m) {
            return Err(Error::domain("candidate radii do not match the layer count"));
        }
        if c.is_empty() {
            return Err(Error::domain("candidate radius set is empty"));
        }
    }

    // best (cost, radius vector) per (mask, facility)
    let mut table: Vec<(f64, Vec<f64>)> = vec![(0.0, Vec::new()); (1 << n) * nf];
    for mask in 1..(1usize << n) {
        let members: Vec<usize> = (0..n).filter(|p| mask >> p & 1 == 1).collect();
        for x in 0..nf {
            let ds: Vec<f64> = members.iter().map(|&p| inst.pf(p, x)).collect();
            let entry = match candidates {
                Some(c) => {
                    let mut best = (f64::INFINITY, Vec::new());
                    for r in &c.vectors {
                        let cost = lb.ball_cost(r) + ds.iter().map(|&d| lb.connection(d, r)).sum::<f64>();
                        if cost < best.0 {
                            best = (cost, r.clone());
                        }
                    }
                    best
                }
                None => {
                    let mut total = 0.0;
                    let mut r = vec![0.0; m];
                    for i in 0..m {
                        let layer = |t: f64| lb.mu()[i] * t + lb.rho()[i] * ds.iter().map(|&d| (d - t).max(0.0)).sum::<f64>();
                        let mut best = (layer(0.0), 0.0);
                        for &t in &ds {
                            let c = layer(t);
                            if c < best.0 {
                                best = (c, t);
                            }
                        }
                        total += best.0;
                        r[i] = best.1;
                    }
                    (total, r)
                }
            };
            table[mask * nf + x] = entry;
        }
    }

    let mut best: Option<(f64, Vec<u32>)> = None;
    for_each_assignment(n, nf, lb.k(), |_, masks| {
        let mut c = 0.0;
        for (x, &msk) in masks.iter().enumerate() {
            if msk != 0 {
                c += table[msk as usize * nf + x].0;
            }
        }
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, masks.to_vec()));
        }
    });
    let (cost, masks) = best.ok_or_else(|| Error::domain("instance has no feasible assignment"))?;
    let mut sol = LayeredBallSolution::new();
    for (x, &msk) in masks.iter().enumerate() {
        if msk != 0 {
            sol.insert_max(x, table[msk as usize * nf + x].1.clone());
        }
    }
    Ok((cost, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layered_ball::lb_cost;

    #[test]
    fn ncc_examples() {
        let inst = MetricInstance::on_line(&[0.0, 1.0, 5.0], &[0.0, 5.0], 1).unwrap();
        let (c, cl) = exact_ncc(&inst, &NormSpec::l1(3), &NormSpec::l1(1), &OracleBudget::default()).unwrap();
        assert_eq!(c, 6.0);
        assert_eq!(cl.centers(), &[0]);

        let inst = MetricInstance::on_line(&[0.0, 2.0, 10.0], &[0.0, 10.0], 2).unwrap();
        let top1 = NormSpec::top(1, 3).unwrap();
        let (c, _) = exact_ncc(&inst, &top1, &NormSpec::l1(2), &OracleBudget::default()).unwrap();
        assert_eq!(c, 2.0);
    }

    #[test]
    fn nearest_forced_can_lose() {
        let inst = MetricInstance::on_line(&[0.0, 4.0, 6.0, 10.0], &[0.0, 10.0], 2).unwrap();
        let (f, g) = (NormSpec::linf(4), NormSpec::l1(2));
        let b = OracleBudget::default();
        assert_eq!(exact_ncc(&inst, &f, &g, &b).unwrap().0, 6.0);
        assert_eq!(exact_ncc_nearest(&inst, &f, &g, &b).unwrap().0, 8.0);
    }

    #[test]
    fn mnkc_example() {
        let inst = MetricInstance::on_line(&[0.0, 1.0, 5.0], &[0.0, 5.0], 1).unwrap();
        assert_eq!(exact_mnkc(&inst, &NormSpec::l1(3), &OracleBudget::default()).unwrap(), (6.0, vec![0]));
    }

    #[test]
    fn lbkm_examples() {
        let base = MetricInstance::on_line(&[0.0, 3.0], &[0.0], 1).unwrap();
        let lb = LayeredBallInstance::new(base.clone(), vec![1.0], vec![1.0]).unwrap();
        let (c, sol) = exact_lbkm(&lb, &OracleBudget::default(), None).unwrap();
        assert_eq!(c, 3.0);
        assert_eq!(lb_cost(&lb, &sol).unwrap(), 3.0);

        let free = LayeredBallInstance::new(base, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(exact_lbkm(&free, &OracleBudget::default(), None).unwrap().0, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let inst = MetricInstance::random_uniform(6, 5, 2, 2, 1).unwrap();
        let tight = OracleBudget { max_assignments: 10, ..OracleBudget::default() };
        let err = exact_ncc(&inst, &NormSpec::l1(6), &NormSpec::l1(2), &tight).unwrap_err();
        assert!(err.is_sizing());
    }
}
