//! Top-level solvers for the nested objective and the combiner that picks the best of them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::bipoint::{solve_lbkm_with, LbkmOptions};
use crate::error::{Error, Result};
use crate::instance::{nearest_assignment, solution_cost, Clustering, MetricInstance};
use crate::layered_ball::{lb_solution_to_clustering, reduce_ord_l1};
use crate::norms::{attenuation, ordered_surrogate, NormSpec};
use crate::oracle::{exact_mnkc, OracleBudget};
use crate::primal_dual::TraceEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Auto,
    OrdL1,
    SymL1,
    Chig,
    Chif,
    KApx,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Auto,
        Algorithm::OrdL1,
        Algorithm::SymL1,
        Algorithm::Chig,
        Algorithm::Chif,
        Algorithm::KApx,
        Algorithm::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Auto => "auto",
            Algorithm::OrdL1 => "ord-l1",
            Algorithm::SymL1 => "sym-l1",
            Algorithm::Chig => "chig",
            Algorithm::Chif => "chif",
            Algorithm::KApx => "k-apx",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    pub solution: Clustering,
    pub cost: f64,
    pub algorithm: Algorithm,
    /// Instantiated approximation factor; `None` when a heuristic subroutine was used.
    pub proven_factor: Option<f64>,
    pub notes: Vec<String>,
    /// Relaxation events of the layered-ball pipeline, when requested.
    pub trace: Vec<TraceEvent>,
}

impl SolverReport {
    fn scored(
        inst: &MetricInstance,
        solution: Clustering,
        f: &NormSpec,
        g: &NormSpec,
        algorithm: Algorithm,
        proven_factor: Option<f64>,
        notes: Vec<String>,
    ) -> Result<Self> {
        let cost = solution_cost(inst, &solution, f, g)?;
        Ok(SolverReport { solution, cost, algorithm, proven_factor, notes, trace: Vec::new() })
    }
}

/// Cluster-oblivious k-clustering under an inner norm.
pub trait MnkcSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, inst: &MetricInstance, f: &NormSpec) -> Result<Vec<usize>>;
    /// Approximation factor this solver guarantees on `inst`, if any.
    fn factor(&self, inst: &MetricInstance) -> Option<f64>;
}

/// Solver for max-distance inner norm with a symmetric outer norm.
pub trait LinfSymSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, inst: &MetricInstance, g: &NormSpec) -> Result<Clustering>;
    fn factor(&self, inst: &MetricInstance) -> Option<f64>;
}

/// Exhaustive search when small enough, else single-swap local search.
#[derive(Clone, Copy, Debug)]
pub struct DefaultMnkc {
    pub max_points: usize,
    pub max_subsets: u64,
}

impl Default for DefaultMnkc {
    fn default() -> Self {
        DefaultMnkc { max_points: 12, max_subsets: 100_000 }
    }
}

impl DefaultMnkc {
    fn exhaustive(&self, inst: &MetricInstance) -> bool {
        let (nf, k) = (inst.num_facilities(), inst.k());
        let mut total = 0.0;
        let mut c = 1.0;
        for j in 1..=k.min(nf) {
            c = c * (nf - j + 1) as f64 / j as f64;
            total += c;
        }
        inst.n() <= self.max_points && total <= self.max_subsets as f64
    }
}

fn mnkc_value(inst: &MetricInstance, f: &NormSpec, set: &[usize]) -> f64 {
    let v: Vec<f64> = (0..inst.n()).map(|p| set.iter().map(|&x| inst.pf(p, x)).fold(f64::INFINITY, f64::min)).collect();
    f.eval(&v).unwrap_or(f64::INFINITY)
}

impl MnkcSolver for DefaultMnkc {
    fn name(&self) -> &str {
        "mnkc-default"
    }

    fn solve(&self, inst: &MetricInstance, f: &NormSpec) -> Result<Vec<usize>> {
        if self.exhaustive(inst) {
            let budget = OracleBudget { max_center_subsets: self.max_subsets, ..OracleBudget::default() };
            return Ok(exact_mnkc(inst, f, &budget)?.1);
        }
        let nf = inst.num_facilities();
        let mut set: Vec<usize> = (0..inst.k().min(nf)).collect();
        let mut value = mnkc_value(inst, f, &set);
        loop {
            let mut improved = false;
            'swap: for slot in 0..set.len() {
                for y in 0..nf {
                    if set.contains(&y) {
                        continue;
                    }
                    let old = set[slot];
                    set[slot] = y;
                    let v = mnkc_value(inst, f, &set);
                    if v < value * (1.0 - 1e-12) {
                        value = v;
                        improved = true;
                        break 'swap;
                    }
                    set[slot] = old;
                }
            }
            if !improved {
                break;
            }
        }
        set.sort_unstable();
        Ok(set)
    }

    fn factor(&self, inst: &MetricInstance) -> Option<f64> {
        self.exhaustive(inst).then_some(1.0)
    }
}

/// Farthest-point greedy on facilities with nearest assignment; no proven factor here.
#[derive(Clone, Copy, Debug, Default)]
pub struct Gonzalez;

impl LinfSymSolver for Gonzalez {
    fn name(&self) -> &str {
        "gonzalez"
    }

    fn solve(&self, inst: &MetricInstance, _g: &NormSpec) -> Result<Clustering> {
        let nf = inst.num_facilities();
        if nf == 0 || inst.n() == 0 {
            return Err(Error::domain("instance needs points and facilities"));
        }
        let nearest_facility = |p: usize| (0..nf).fold(0, |b, x| if inst.pf(p, x) < inst.pf(p, b) { x } else { b });
        let mut centers = vec![nearest_facility(0)];
        while centers.len() < inst.k() {
            let (far, d) = (0..inst.n())
                .map(|p| (p, centers.iter().map(|&x| inst.pf(p, x)).fold(f64::INFINITY, f64::min)))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let x = nearest_facility(far);
            if d <= 0.0 || centers.contains(&x) {
                break;
            }
            centers.push(x);
        }
        nearest_assignment(inst, &centers)
    }

    fn factor(&self, _inst: &MetricInstance) -> Option<f64> {
        None
    }
}

/// Pluggable external subroutines.
#[derive(Clone)]
pub struct SubroutineRegistry {
    pub mnkc: Option<Arc<dyn MnkcSolver>>,
    pub linf_sym: Option<Arc<dyn LinfSymSolver>>,
}

impl Default for SubroutineRegistry {
    fn default() -> Self {
        SubroutineRegistry { mnkc: Some(Arc::new(DefaultMnkc::default())), linf_sym: Some(Arc::new(Gonzalez)) }
    }
}

impl SubroutineRegistry {
    pub fn empty() -> Self {
        SubroutineRegistry { mnkc: None, linf_sym: None }
    }
}

fn log2n(n: usize) -> f64 {
    (n as f64).log2()
}

/// `216 log2 n + 360`.
pub fn ord_l1_factor(n: usize) -> f64 {
    216.0 * log2n(n) + 360.0
}

/// `k^(1 - chi_g)`, one when `k = 1`.
fn outer_multiplier(g: &NormSpec) -> Result<f64> {
    let k = g.arity();
    if k < 2 {
        return Ok(1.0);
    }
    Ok((k as f64).powf(1.0 - attenuation(g)?))
}

fn check_arities(inst: &MetricInstance, f: &NormSpec, g: &NormSpec) -> Result<()> {
    if f.arity() != inst.n() {
        return Err(Error::domain(format!("inner norm arity {} != n = {}", f.arity(), inst.n())));
    }
    if g.arity() != inst.k() {
        return Err(Error::domain(format!("outer norm arity {} != k = {}", g.arity(), inst.k())));
    }
    Ok(())
}

pub fn solve_ord_l1(inst: &MetricInstance, w: &[f64]) -> Result<SolverReport> {
    solve_ord_l1_with(inst, w, &LbkmOptions::default())
}

/// Ordered inner norm, sum outer norm, through the layered-ball pipeline.
pub fn solve_ord_l1_with(inst: &MetricInstance, w: &[f64], opts: &LbkmOptions) -> Result<SolverReport> {
    let f = NormSpec::ordered(w.to_vec(), inst.n())?;
    let lb = reduce_ord_l1(inst, &f.ordered_weights().expect("ordered"))?;
    let out = solve_lbkm_with(&lb, opts)?;
    let cl = lb_solution_to_clustering(&lb, &out.solution)?;
    let notes = vec![format!("guesses tried {}, skipped {}", out.pairs_tried, out.pairs_skipped)];
    let mut report =
        SolverReport::scored(inst, cl, &f, &NormSpec::l1(inst.k()), Algorithm::OrdL1, Some(ord_l1_factor(inst.n())), notes)?;
    report.trace = out.trace;
    Ok(report)
}

pub fn solve_sym_l1(inst: &MetricInstance, f: &NormSpec) -> Result<SolverReport> {
    solve_sym_l1_with(inst, f, &LbkmOptions::default())
}

/// Symmetric inner norm, sum outer norm: solve its ordered surrogate and score under `f`.
pub fn solve_sym_l1_with(inst: &MetricInstance, f: &NormSpec, opts: &LbkmOptions) -> Result<SolverReport> {
    if f.arity() != inst.n() {
        return Err(Error::domain(format!("inner norm arity {} != n = {}", f.arity(), inst.n())));
    }
    let s = ordered_surrogate(f)?;
    let ord = solve_ord_l1_with(inst, &s.weights, opts)?;
    let d = s.distortion_bound;
    let mut notes = ord.notes;
    if d > 1.0 {
        notes.push(format!("surrogate distortion {d:.6} (empirical)"));
    }
    let mut report = SolverReport::scored(
        inst,
        ord.solution,
        f,
        &NormSpec::l1(inst.k()),
        Algorithm::SymL1,
        ord.proven_factor.map(|p| p * d * d),
        notes,
    )?;
    report.trace = ord.trace;
    Ok(report)
}

pub fn solve_chig(inst: &MetricInstance, f: &NormSpec, g: &NormSpec) -> Result<SolverReport> {
    solve_chig_with(inst, f, g, &LbkmOptions::default())
}

pub fn solve_chig_with(inst: &MetricInstance, f: &NormSpec, g: &NormSpec, opts: &LbkmOptions) -> Result<SolverReport> {
    check_arities(inst, f, g)?;
    chig_from_sym(inst, &solve_sym_l1_with(inst, f, opts)?, f, g)
}

/// Rescores a sum-outer solution under `g` with the `k^(1 - chi_g)` factor.
pub fn chig_from_sym(inst: &MetricInstance, sym: &SolverReport, f: &NormSpec, g: &NormSpec) -> Result<SolverReport> {
    check_arities(inst, f, g)?;
    let mult = outer_multiplier(g)?;
    let mut report = SolverReport::scored(
        inst,
        sym.solution.clone(),
        f,
        g,
        Algorithm::Chig,
        sym.proven_factor.map(|p| p * mult),
        sym.notes.clone(),
    )?;
    report.trace = sym.trace.clone();
    Ok(report)
}

/// Solves the max-distance inner problem on `g` with the registered subroutine, scores under `(f, g)`.
pub fn solve_chif(inst: &MetricInstance, f: &NormSpec, g: &NormSpec, registry: &SubroutineRegistry) -> Result<SolverReport> {
    check_arities(inst, f, g)?;
    let solver = registry.linf_sym.as_ref().ok_or_else(|| Error::Config("no max-distance subroutine registered".into()))?;
    let cl = solver.solve(inst, g)?;
    let factor = match solver.factor(inst) {
        Some(gamma) if inst.n() >= 2 => Some(gamma * (inst.n() as f64).powf(attenuation(f)?)),
        Some(gamma) => Some(gamma),
        None => None,
    };
    let mut notes = vec![format!("subroutine {}", solver.name())];
    if factor.is_none() {
        notes.push("heuristic stand-in, no proven factor".into());
    }
    SolverReport::scored(inst, cl, f, g, Algorithm::Chif, factor, notes)
}

/// Centers from the registered cluster-oblivious solver, nearest assignment.
pub fn solve_k_apx(inst: &MetricInstance, f: &NormSpec, g: &NormSpec, registry: &SubroutineRegistry) -> Result<SolverReport> {
    check_arities(inst, f, g)?;
    let solver = registry.mnkc.as_ref().ok_or_else(|| Error::Config("no cluster-oblivious subroutine registered".into()))?;
    let centers = solver.solve(inst, f)?;
    if centers.len() > inst.k() {
        return Err(Error::Invariant(format!("subroutine {} returned {} > k centers", solver.name(), centers.len())));
    }
    let cl = nearest_assignment(inst, &centers)?;
    let factor = solver.factor(inst).map(|c| c * inst.k() as f64);
    let mut notes = vec![format!("subroutine {}", solver.name())];
    if factor.is_none() {
        notes.push("heuristic subroutine, no proven factor".into());
    }
    SolverReport::scored(inst, cl, f, g, Algorithm::KApx, factor, notes)
}

pub fn solve_auto(inst: &MetricInstance, f: &NormSpec, g: &NormSpec, registry: &SubroutineRegistry) -> Result<SolverReport> {
    solve_auto_with(inst, f, g, registry, &LbkmOptions::default())
}

/// Runs the three regime solvers and keeps the cheapest; the factor is the best available one.
pub fn solve_auto_with(
    inst: &MetricInstance,
    f: &NormSpec,
    g: &NormSpec,
    registry: &SubroutineRegistry,
    opts: &LbkmOptions,
) -> Result<SolverReport> {
    check_arities(inst, f, g)?;
    let (chig, (chif, kapx)) = rayon::join(
        || solve_chig_with(inst, f, g, opts),
        || rayon::join(|| solve_chif(inst, f, g, registry), || solve_k_apx(inst, f, g, registry)),
    );
    let mut errors = Vec::new();
    let mut reports = Vec::new();
    for r in [chig, chif, kapx] {
        match r {
            Ok(r) => reports.push(r),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if reports.is_empty() {
        return Err(Error::Config(format!("every solver failed: {}", errors.join("; "))));
    }
    let factor = reports.iter().filter_map(|r| r.proven_factor).reduce(f64::min);
    let mut best = 0;
    for i in 1..reports.len() {
        if reports[i].cost < reports[best].cost {
            best = i;
        }
    }
    let mut report = reports.swap_remove(best);
    report.notes.insert(0, format!("selected {}", report.algorithm));
    report.notes.extend(errors.into_iter().map(|e| format!("failed: {e}")));
    report.proven_factor = factor;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_ncc;

    #[test]
    fn k_median_example() {
        let inst = MetricInstance::on_line(&[0.0, 1.0, 5.0], &[0.0, 5.0], 1).unwrap();
        let r = solve_ord_l1(&inst, &[1.0, 1.0, 1.0]).unwrap();
        assert!(r.cost <= r.proven_factor.unwrap() * 6.0);
        assert_eq!(r.cost, solution_cost(&inst, &r.solution, &NormSpec::l1(3), &NormSpec::l1(1)).unwrap());
    }

    #[test]
    fn co_located_points_cost_zero() {
        let inst = MetricInstance::on_line(&[2.0, 2.0, 2.0], &[2.0, 7.0], 1).unwrap();
        assert_eq!(solve_ord_l1(&inst, &[1.0, 0.0, 0.0]).unwrap().cost, 0.0);
        let (f, g) = (NormSpec::l1(3), NormSpec::linf(1));
        assert_eq!(solve_chif(&inst, &f, &g, &SubroutineRegistry::default()).unwrap().cost, 0.0);
    }

    #[test]
    fn factors_by_regime() {
        let inst = MetricInstance::random_uniform(4, 4, 4, 2, 3).unwrap();
        let f = NormSpec::l1(4);
        let sym = solve_sym_l1(&inst, &f).unwrap();
        let l1 = chig_from_sym(&inst, &sym, &f, &NormSpec::l1(4)).unwrap();
        assert!((l1.proven_factor.unwrap() - sym.proven_factor.unwrap()).abs() < 1e-9);
        let linf = chig_from_sym(&inst, &sym, &f, &NormSpec::linf(4)).unwrap();
        assert!((linf.proven_factor.unwrap() - 4.0 * sym.proven_factor.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn top2_matches_ordered() {
        let inst = MetricInstance::random_uniform(4, 3, 2, 2, 5).unwrap();
        let a = solve_sym_l1(&inst, &NormSpec::top(2, 4).unwrap()).unwrap();
        let b = solve_ord_l1(&inst, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn missing_subroutines() {
        let inst = MetricInstance::random_uniform(3, 2, 1, 2, 1).unwrap();
        let (f, g) = (NormSpec::l1(3), NormSpec::l1(1));
        let e = SubroutineRegistry::empty();
        assert!(matches!(solve_chif(&inst, &f, &g, &e), Err(Error::Config(_))));
        assert!(matches!(solve_k_apx(&inst, &f, &g, &e), Err(Error::Config(_))));
    }

    #[test]
    fn k_apx_opens_everything_when_k_is_full() {
        let inst = MetricInstance::random_uniform(5, 3, 3, 2, 9).unwrap();
        let (f, g) = (NormSpec::l1(5), NormSpec::linf(3));
        let r = solve_k_apx(&inst, &f, &g, &SubroutineRegistry::default()).unwrap();
        for p in 0..5 {
            let x = r.solution.center_of(p);
            assert_eq!(inst.pf(p, x), inst.pf(p, inst.nearest_in(p, &[0, 1, 2])));
        }
    }

    #[test]
    fn auto_is_no_worse_than_parts() {
        let inst = MetricInstance::random_uniform(5, 4, 2, 2, 17).unwrap();
        let (f, g) = (NormSpec::l1(5), NormSpec::linf(2));
        let reg = SubroutineRegistry::default();
        let auto = solve_auto(&inst, &f, &g, &reg).unwrap();
        for r in [solve_chig(&inst, &f, &g).unwrap(), solve_chif(&inst, &f, &g, &reg).unwrap(), solve_k_apx(&inst, &f, &g, &reg).unwrap()] {
            assert!(auto.cost <= r.cost);
        }
        let (opt, _) = exact_ncc(&inst, &f, &g, &OracleBudget::default()).unwrap();
        assert!(auto.cost <= auto.proven_factor.unwrap() * opt + 1e-9);
    }
}
