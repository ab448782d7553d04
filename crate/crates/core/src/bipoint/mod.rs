//! Lagrangean binary search over the opening cost, bi-point rounding, and the
//! full layered-ball pipeline built on top of them.

mod rounding;

pub use rounding::{
    build_groups, round_bipoint, round_bipoint_with, solve_knapsack_lp, special_extra, GroupStructure, KnapsackItem,
    KnapsackLpSolution, Rounding, RoundingBranch, SpecialSelection,
};

use log::{debug, warn};
use rayon::prelude::*;

use crate::ceil_log2;
use crate::error::{Error, Result};
use crate::layered_ball::{
    enumerate_radii, guess_pairs, lb_cost, sparsify, CandidateRadii, LayeredBallInstance, LayeredBallSolution,
    DEFAULT_RADIUS_CAP,
};
use crate::primal_dual::{LmpSolver, TraceEvent};

/// Iteration cap of the bisection.
pub const MAX_PROBES: usize = 200;

/// Two solutions around `k` with convex weights `a`, `b` such that `a |X1| + b |X2| = k`.
#[derive(Clone, Debug)]
pub struct BiPoint {
    pub sol1: LayeredBallSolution,
    /// `None` when a probe hit `k` exactly.
    pub sol2: Option<LayeredBallSolution>,
    pub a: f64,
    pub b: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub probes: usize,
    pub trace: Vec<TraceEvent>,
}

impl BiPoint {
    fn single(sol: LayeredBallSolution, lambda: f64, probes: usize, trace: Vec<TraceEvent>) -> Self {
        BiPoint { sol1: sol, sol2: None, a: 1.0, b: 0.0, lambda1: lambda, lambda2: lambda, probes, trace }
    }

    /// `a cost(sol1) + b cost(sol2)`.
    pub fn combined_cost(&self, inst: &LayeredBallInstance) -> Result<f64> {
        let c1 = lb_cost(inst, &self.sol1)?;
        match &self.sol2 {
            Some(s) => Ok(self.a * c1 + self.b * lb_cost(inst, s)?),
            None => Ok(c1),
        }
    }
}

/// Convex weights for sizes `n1 <= k < n2`.
pub fn coefficients(n1: usize, n2: usize, k: usize) -> (f64, f64) {
    let a = (n2 - k) as f64 / (n2 - n1) as f64;
    (a, 1.0 - a)
}

pub fn binary_search(inst: &LayeredBallInstance, radii: &CandidateRadii) -> Result<BiPoint> {
    binary_search_with(&LmpSolver::new(inst, radii)?, false)
}

/// Zero-radius balls at the lowest unused facilities until `k` are open.
fn pad(sol: &mut LayeredBallSolution, inst: &LayeredBallInstance) {
    let (k, m) = (inst.k(), inst.m());
    for x in 0..inst.base().num_facilities() {
        if sol.len() >= k {
            break;
        }
        if sol.radius(x).is_none() {
            sol.insert_max(x, vec![0.0; m]);
        }
    }
}

/// Cheapest single ball of a solution.
fn best_single(sol: &LayeredBallSolution, inst: &LayeredBallInstance) -> Result<LayeredBallSolution> {
    let mut best: Option<(f64, LayeredBallSolution)> = None;
    for (x, r) in sol.iter() {
        let one = LayeredBallSolution::from_pairs([(x, r.to_vec())]);
        let c = lb_cost(inst, &one)?;
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, one));
        }
    }
    best.map(|b| b.1).ok_or_else(|| Error::Invariant("relaxation returned no balls".into()))
}

/// Bisects the opening cost until the two sides differ by the resolution threshold.
pub fn binary_search_with(solver: &LmpSolver<'_>, want_trace: bool) -> Result<BiPoint> {
    let inst = solver.instance();
    let base = inst.base();
    let k = inst.k();
    let mut trace = Vec::new();
    let mut probes = 0usize;
    let mut probe = |lambda: f64, trace: &mut Vec<TraceEvent>| -> Result<LayeredBallSolution> {
        probes += 1;
        let out = solver.solve(lambda, want_trace)?;
        trace.extend(out.trace);
        if out.solution.is_empty() {
            return Err(Error::Invariant(format!("relaxation at lambda = {lambda} opened nothing")));
        }
        Ok(out.solution)
    };

    let Some(dmin) = base.min_positive_pf() else {
        let sol = LayeredBallSolution::from_pairs([(0, vec![0.0; inst.m()])]);
        return Ok(BiPoint::single(sol, 0.0, 0, trace));
    };

    let mut low = probe(0.0, &mut trace)?;
    if low.len() <= k {
        pad(&mut low, inst);
        return Ok(BiPoint::single(low, 0.0, probes, trace));
    }

    let rho_sum: f64 = inst.rho().iter().sum();
    let mut hi = base.n() as f64 * rho_sum * base.max_pf();
    let mut high = probe(hi, &mut trace)?;
    if high.len() == k {
        return Ok(BiPoint::single(high, hi, probes, trace));
    }
    if high.len() > k {
        high = best_single(&high, inst)?;
    }

    let lower_bound = solver
        .radii()
        .vectors
        .iter()
        .map(|r| inst.ball_cost(r))
        .fold(f64::INFINITY, f64::min);
    let lower_bound = if lower_bound > 0.0 { lower_bound } else { rho_sum * dmin };
    let levels = 2.0 * ceil_log2(base.n() as u128) as f64 + 3.0;
    let threshold = lower_bound / (levels * base.num_facilities() as f64);

    let mut lo = 0.0;
    let mut steps = 0;
    while hi - lo > threshold {
        steps += 1;
        if steps > MAX_PROBES {
            return Err(Error::Invariant(format!("binary search did not converge in {MAX_PROBES} probes")));
        }
        let mid = 0.5 * (lo + hi);
        let sol = probe(mid, &mut trace)?;
        debug!("lambda {mid}: {} balls", sol.len());
        match sol.len().cmp(&k) {
            std::cmp::Ordering::Equal => return Ok(BiPoint::single(sol, mid, probes, trace)),
            std::cmp::Ordering::Less => {
                hi = mid;
                high = sol;
            }
            std::cmp::Ordering::Greater => {
                lo = mid;
                low = sol;
            }
        }
    }
    let (a, b) = coefficients(high.len(), low.len(), k);
    Ok(BiPoint { sol1: high, sol2: Some(low), a, b, lambda1: hi, lambda2: lo, probes, trace })
}

#[derive(Clone, Debug)]
pub struct LbkmOptions {
    pub radius_cap: u64,
    pub trace: bool,
    pub selection: SpecialSelection,
}

impl Default for LbkmOptions {
    fn default() -> Self {
        LbkmOptions { radius_cap: DEFAULT_RADIUS_CAP, trace: false, selection: SpecialSelection::Greedy }
    }
}

#[derive(Clone, Debug)]
pub struct LbkmOutcome {
    pub solution: LayeredBallSolution,
    pub cost: f64,
    /// Winning guess, if the guess loop ran.
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub pairs_tried: usize,
    /// Guesses skipped for exceeding the radius cap or repeating an earlier candidate set.
    pub pairs_skipped: usize,
    /// Relaxation events of the winning guess, when requested.
    pub trace: Vec<TraceEvent>,
}

impl LbkmOutcome {
    fn direct(inst: &LayeredBallInstance, solution: LayeredBallSolution) -> Result<Self> {
        let cost = lb_cost(inst, &solution)?;
        Ok(LbkmOutcome {
            solution,
            cost,
            delta: None,
            gamma: None,
            pairs_tried: 0,
            pairs_skipped: 0,
            trace: Vec::new(),
        })
    }
}

/// Exact answer for a single point: one ball, each layer at radius zero or the distance.
fn solve_single_point(inst: &LayeredBallInstance) -> Result<LayeredBallSolution> {
    let base = inst.base();
    let mut best: Option<(f64, LayeredBallSolution)> = None;
    for x in 0..base.num_facilities() {
        let d = base.pf(0, x);
        let r: Vec<f64> = inst.rho().iter().zip(inst.mu()).map(|(&rho, &mu)| if mu < rho { d } else { 0.0 }).collect();
        let sol = LayeredBallSolution::from_pairs([(x, r)]);
        let c = lb_cost(inst, &sol)?;
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, sol));
        }
    }
    best.map(|b| b.1).ok_or_else(|| Error::domain("instance has no facilities"))
}

pub fn solve_lbkm(inst: &LayeredBallInstance) -> Result<LbkmOutcome> {
    solve_lbkm_with(inst, &LbkmOptions::default())
}

/// Sparsify, run every guess through binary search and rounding, map back, keep the cheapest.
pub fn solve_lbkm_with(inst: &LayeredBallInstance, opts: &LbkmOptions) -> Result<LbkmOutcome> {
    if inst.n() == 1 {
        return LbkmOutcome::direct(inst, solve_single_point(inst)?);
    }
    let sparse = sparsify(inst)?;
    let si = &sparse.instance;
    if si.m() == 0 {
        let sol = sparse.unsparsify(&LayeredBallSolution::from_pairs([(0, Vec::new())]))?;
        return LbkmOutcome::direct(inst, sol);
    }

    let mut skipped = 0;
    let mut capped = 0;
    let mut jobs: Vec<CandidateRadii> = Vec::new();
    let mut prev: Option<(f64, usize)> = None;
    for (delta, gamma) in guess_pairs(&sparse) {
        match enumerate_radii(si.n(), si.m(), si.mu(), delta, gamma, opts.radius_cap) {
            Ok(c) => {
                // candidate sets for one delta are nested in gamma, so equal counts mean equal sets
                if prev == Some((delta, c.len())) || c.is_empty() {
                    skipped += 1;
                    continue;
                }
                prev = Some((delta, c.len()));
                jobs.push(c);
            }
            Err(e) if e.is_sizing() => {
                warn!("guess delta={delta} gamma={gamma} skipped: {e}");
                skipped += 1;
                capped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if jobs.is_empty() {
        if capped > 0 {
            return Err(Error::Sizing {
                what: "candidate radius vectors of every guess".into(),
                needed: opts.radius_cap as f64 + 1.0,
                cap: opts.radius_cap,
            });
        }
        return Err(Error::Invariant("no guess produced candidate radii".into()));
    }

    let runs: Vec<(f64, LayeredBallSolution, Vec<TraceEvent>)> = jobs
        .par_iter()
        .map(|radii| -> Result<_> {
            let solver = LmpSolver::new(si, radii)?;
            let bi = binary_search_with(&solver, opts.trace)?;
            let rounded = round_bipoint_with(&bi, si, opts.selection)?;
            let back = sparse.unsparsify(&rounded.solution)?;
            if back.len() > inst.k() {
                return Err(Error::Invariant(format!("solution opens {} > k balls", back.len())));
            }
            let cost = lb_cost(inst, &back)?;
            debug!("guess delta={} gamma={}: cost {cost} after {} probes", radii.delta, radii.gamma, bi.probes);
            Ok((cost, back, bi.trace))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0 < runs[best].0 {
            best = i;
        }
    }
    let tried = runs.len();
    let (cost, solution, trace) = runs.into_iter().nth(best).expect("nonempty");
    Ok(LbkmOutcome {
        solution,
        cost,
        delta: Some(jobs[best].delta),
        gamma: Some(jobs[best].gamma),
        pairs_tried: tried,
        pairs_skipped: skipped,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MetricInstance;

    #[test]
    fn coefficient_example() {
        let (a, b) = coefficients(1, 4, 2);
        assert!((a - 2.0 / 3.0).abs() < 1e-12);
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_cover_costs_zero() {
        let base = MetricInstance::on_line(&[0.0, 3.0, 7.0], &[0.0, 3.0, 7.0], 3).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        let out = solve_lbkm(&inst).unwrap();
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn all_zero_distances() {
        let base = MetricInstance::on_line(&[1.0, 1.0], &[1.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let out = solve_lbkm(&inst).unwrap();
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn bipoint_identities() {
        let base = MetricInstance::random_uniform(6, 5, 2, 2, 11).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0, 0.5], vec![1.0, 2.0]).unwrap();
        let s = sparsify(&inst).unwrap();
        for (d, g) in guess_pairs(&s) {
            let c = enumerate_radii(6, s.instance.m(), s.instance.mu(), d, g, DEFAULT_RADIUS_CAP).unwrap();
            if c.is_empty() {
                continue;
            }
            let bi = binary_search(&s.instance, &c).unwrap();
            assert!((bi.a + bi.b - 1.0).abs() < 1e-12);
            let n2 = bi.sol2.as_ref().map_or(0, |s| s.len());
            assert!((bi.a * bi.sol1.len() as f64 + bi.b * n2 as f64 - 2.0).abs() < 1e-12);
            assert!(bi.sol1.len() <= 2);
            if bi.sol2.is_some() {
                assert!(n2 > 2);
            }
        }
    }

    #[test]
    fn single_point_is_exact() {
        let base = MetricInstance::on_line(&[5.0], &[0.0, 4.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![2.0, 1.0], vec![1.0, 3.0]).unwrap();
        // facility at 4: layer 0 radius 1 costs 1, layer 1 connects at 1
        assert_eq!(solve_lbkm(&inst).unwrap().cost, 2.0);
    }
}
