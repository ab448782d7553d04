//! Lagrangean facility-location relaxation solved by continuous dual ascent.
//!
//! Every point raises its dual at unit rate. Once a point reaches the
//! connection cost of a candidate ball it starts paying toward the ball's
//! opening cost `lambda + mu . r`. A fully paid ball opens and freezes its
//! payers. Afterwards opened balls with disjoint payers are kept greedily by
//! cost and their radii are expanded.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::layered_ball::{CandidateRadii, LayeredBallInstance, LayeredBallSolution};
use crate::TOL;

/// One run of the relaxation: instance, opening cost and candidate radii.
#[derive(Clone, Copy, Debug)]
pub struct FacilityLocationInput<'a> {
    pub instance: &'a LayeredBallInstance,
    pub lambda: f64,
    pub radii: &'a CandidateRadii,
}

/// Dual value of a (ball, point) pair that became tight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaEntry {
    pub ball: usize,
    pub point: usize,
    pub value: f64,
}

/// Final duals. Ball `b` is facility `b / radius_count` with radius vector `b % radius_count`.
#[derive(Clone, Debug)]
pub struct DualState {
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<BetaEntry>,
    /// Paid-for balls in opening order.
    pub opened: Vec<usize>,
    pub open_times: Vec<f64>,
    pub time: f64,
    pub radius_count: usize,
    /// `mu . r` per radius vector.
    pub radius_cost: Vec<f64>,
}

impl DualState {
    pub fn facility(&self, ball: usize) -> usize {
        ball / self.radius_count
    }

    pub fn radius_index(&self, ball: usize) -> usize {
        ball % self.radius_count
    }

    pub fn ball_cost(&self, ball: usize) -> f64 {
        self.lambda + self.radius_cost[self.radius_index(ball)]
    }

    pub fn beta(&self, ball: usize, point: usize) -> f64 {
        self.beta
            .iter()
            .find(|e| e.ball == ball && e.point == point)
            .map_or(0.0, |e| e.value)
    }

    /// Points with positive dual toward `ball`, ascending.
    pub fn contributors(&self, ball: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .beta
            .iter()
            .filter(|e| e.ball == ball && e.value > TOL)
            .map(|e| e.point)
            .collect();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub lambda: f64,
    pub time: f64,
    pub kind: &'static str,
    pub point: Option<usize>,
    pub facility: Option<usize>,
    pub radius: Option<usize>,
}

/// Writes events as `lambda,time,kind,point,facility,radius`.
pub fn write_trace_csv<W: Write>(events: &[TraceEvent], mut w: W) -> io::Result<()> {
    writeln!(w, "lambda,time,kind,point,facility,radius")?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in events {
        writeln!(
            w,
            "{:e},{:e},{},{},{},{}",
            e.lambda,
            e.time,
            e.kind,
            opt(e.point),
            opt(e.facility),
            opt(e.radius)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LmpOutput {
    pub solution: LayeredBallSolution,
    /// Kept balls, as ball indices into the dual state.
    pub z: Vec<usize>,
    /// Positive-dual points of each kept ball.
    pub contributors: Vec<Vec<usize>>,
    pub duals: DualState,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Copy)]
struct Triple {
    d: f64,
    ball: u32,
    point: u32,
}

/// Precomputed connection costs for one instance and radius set, reusable across `lambda`.
pub struct LmpSolver<'a> {
    inst: &'a LayeredBallInstance,
    radii: &'a CandidateRadii,
    radius_cost: Vec<f64>,
    triples: Vec<Triple>,
}

impl<'a> LmpSolver<'a> {
    pub fn new(inst: &'a LayeredBallInstance, radii: &'a CandidateRadii) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::domain("candidate radius set is empty"));
        }
        if radii.vectors.iter().any(|r| r.len() != inst.m()) {
            return Err(Error::domain("candidate radii do not match the layer count"));
        }
        let base = inst.base();
        let rc = radii.len();
        let radius_cost: Vec<f64> = radii.vectors.iter().map(|r| inst.ball_cost(r)).collect();
        let mut triples = Vec::with_capacity(base.n() * base.num_facilities() * rc);
        for x in 0..base.num_facilities() {
            for (ri, r) in radii.vectors.iter().enumerate() {
                let ball = (x * rc + ri) as u32;
                for p in 0..base.n() {
                    let d = inst.connection(base.pf(p, x), r);
                    triples.push(Triple { d, ball, point: p as u32 });
                }
            }
        }
        triples.sort_by(|a, b| a.d.total_cmp(&b.d).then(a.ball.cmp(&b.ball)).then(a.point.cmp(&b.point)));
        Ok(LmpSolver { inst, radii, radius_cost, triples })
    }

    pub fn instance(&self) -> &LayeredBallInstance {
        self.inst
    }

    pub fn radii(&self) -> &CandidateRadii {
        self.radii
    }

    /// Connection cost of a (ball, point) pair.
    pub fn connection(&self, ball: usize, point: usize) -> f64 {
        let rc = self.radii.len();
        self.inst.connection(self.inst.base().pf(point, ball / rc), &self.radii.vectors[ball % rc])
    }

    pub fn dual_ascent(&self, lambda: f64, trace: Option<&mut Vec<TraceEvent>>) -> Result<DualState> {
        if !(lambda >= 0.0) {
            return Err(Error::domain("opening cost must be nonnegative"));
        }
        Ascent::new(self, lambda, trace).run()
    }

    /// Ascent, pruning and expansion.
    pub fn solve(&self, lambda: f64, want_trace: bool) -> Result<LmpOutput> {
        let mut trace = Vec::new();
        let duals = self.dual_ascent(lambda, want_trace.then_some(&mut trace))?;
        let z = prune(&duals);
        let mu = self.inst.mu();
        let mut solution = LayeredBallSolution::new();
        let mut contributors = Vec::with_capacity(z.len());
        for &b in &z {
            let r = &self.radii.vectors[duals.radius_index(b)];
            solution.insert_max(duals.facility(b), expand(r, mu));
            contributors.push(duals.contributors(b));
        }
        Ok(LmpOutput { solution, z, contributors, duals, trace })
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Pending {
    t: f64,
    ball: u32,
    version: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.total_cmp(&other.t).then(self.ball.cmp(&other.ball))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Ascent<'s, 'a> {
    solver: &'s LmpSolver<'a>,
    lambda: f64,
    trace: Option<&'s mut Vec<TraceEvent>>,
    now: f64,
    cost: Vec<f64>,
    open_time: Vec<f64>,
    paid: Vec<f64>,
    ref_t: Vec<f64>,
    rate: Vec<u32>,
    version: Vec<u32>,
    payers: Vec<Vec<u32>>,
    tight_of: Vec<Vec<u32>>,
    tight_log: Vec<(u32, u32, f64)>,
    active: Vec<bool>,
    alpha: Vec<f64>,
    n_active: usize,
    heap: BinaryHeap<Reverse<Pending>>,
    opened: Vec<usize>,
    open_times: Vec<f64>,
}

impl<'s, 'a> Ascent<'s, 'a> {
    fn new(solver: &'s LmpSolver<'a>, lambda: f64, trace: Option<&'s mut Vec<TraceEvent>>) -> Self {
        let n = solver.inst.n();
        let rc = solver.radii.len();
        let nb = solver.inst.base().num_facilities() * rc;
        let cost: Vec<f64> = (0..nb).map(|b| lambda + solver.radius_cost[b % rc]).collect();
        let mut heap = BinaryHeap::new();
        for (b, &c) in cost.iter().enumerate() {
            if c <= TOL {
                heap.push(Reverse(Pending { t: 0.0, ball: b as u32, version: 0 }));
            }
        }
        Ascent {
            solver,
            lambda,
            trace,
            now: 0.0,
            cost,
            open_time: vec![f64::INFINITY; nb],
            paid: vec![0.0; nb],
            ref_t: vec![0.0; nb],
            rate: vec![0; nb],
            version: vec![0; nb],
            payers: vec![Vec::new(); nb],
            tight_of: vec![Vec::new(); n],
            tight_log: Vec::new(),
            active: vec![true; n],
            alpha: vec![0.0; n],
            n_active: n,
            heap,
            opened: Vec::new(),
            open_times: Vec::new(),
        }
    }

    fn log(&mut self, kind: &'static str, point: Option<usize>, ball: Option<usize>) {
        if let Some(tr) = self.trace.as_deref_mut() {
            let rc = self.solver.radii.len();
            tr.push(TraceEvent {
                lambda: self.lambda,
                time: self.now,
                kind,
                point,
                facility: ball.map(|b| b / rc),
                radius: ball.map(|b| b % rc),
            });
        }
    }

    fn settle(&mut self, b: usize) {
        self.paid[b] += self.rate[b] as f64 * (self.now - self.ref_t[b]);
        self.ref_t[b] = self.now;
    }

    fn schedule(&mut self, b: usize) {
        self.version[b] = self.version[b].wrapping_add(1);
        let remaining = self.cost[b] - self.paid[b];
        let t = if remaining <= TOL {
            self.now
        } else if self.rate[b] > 0 {
            self.now + remaining / self.rate[b] as f64
        } else {
            return;
        };
        self.heap.push(Reverse(Pending { t, ball: b as u32, version: self.version[b] }));
    }

    fn freeze(&mut self, p: usize) {
        self.active[p] = false;
        self.alpha[p] = self.now;
        self.n_active -= 1;
        self.log("freeze", Some(p), None);
        let tight = std::mem::take(&mut self.tight_of[p]);
        for &b in &tight {
            let b = b as usize;
            if self.open_time[b].is_finite() {
                continue;
            }
            self.settle(b);
            self.rate[b] -= 1;
            self.schedule(b);
        }
    }

    fn open(&mut self, b: usize) {
        self.settle(b);
        self.open_time[b] = self.now;
        self.opened.push(b);
        self.open_times.push(self.now);
        self.log("open", None, Some(b));
        let payers = std::mem::take(&mut self.payers[b]);
        for &p in &payers {
            if self.active[p as usize] {
                self.freeze(p as usize);
            }
        }
    }

    fn next_payment(&mut self) -> Option<Pending> {
        while let Some(Reverse(top)) = self.heap.peek().copied() {
            let b = top.ball as usize;
            if top.version != self.version[b] || self.open_time[b].is_finite() {
                self.heap.pop();
                continue;
            }
            return Some(top);
        }
        None
    }

    fn run(mut self) -> Result<DualState> {
        let triples = &self.solver.triples;
        let mut ptr = 0usize;
        while self.n_active > 0 {
            while ptr < triples.len() && !self.active[triples[ptr].point as usize] {
                ptr += 1;
            }
            let t_tight = triples.get(ptr).map_or(f64::INFINITY, |t| t.d);
            let pay = self.next_payment();
            let t_pay = pay.map_or(f64::INFINITY, |p| p.t);
            if t_pay.is_infinite() && t_tight.is_infinite() {
                return Err(Error::Invariant("dual ascent stalled with active points".into()));
            }
            if t_pay <= t_tight + TOL {
                let pay = pay.expect("finite payment time");
                self.heap.pop();
                self.now = self.now.max(pay.t);
                self.open(pay.ball as usize);
            } else {
                let tr = triples[ptr];
                ptr += 1;
                self.now = self.now.max(tr.d);
                let (b, p) = (tr.ball as usize, tr.point as usize);
                self.log("tight", Some(p), Some(b));
                if self.open_time[b].is_finite() {
                    self.freeze(p);
                } else {
                    self.settle(b);
                    self.rate[b] += 1;
                    self.payers[b].push(tr.point);
                    self.tight_of[p].push(tr.ball);
                    self.tight_log.push((tr.ball, tr.point, tr.d));
                    self.schedule(b);
                }
            }
        }
        let mut beta: Vec<BetaEntry> = self
            .tight_log
            .iter()
            .map(|&(b, p, d)| {
                let end = self.alpha[p as usize].min(self.open_time[b as usize]);
                BetaEntry { ball: b as usize, point: p as usize, value: (end - d).max(0.0) }
            })
            .collect();
        beta.sort_by_key(|a| (a.ball, a.point));
        Ok(DualState {
            lambda: self.lambda,
            alpha: self.alpha,
            beta,
            opened: self.opened,
            open_times: self.open_times,
            time: self.now,
            radius_count: self.solver.radii.len(),
            radius_cost: self.solver.radius_cost.clone(),
        })
    }
}

/// Runs the continuous ascent to completion.
pub fn dual_ascent(input: &FacilityLocationInput<'_>) -> Result<DualState> {
    LmpSolver::new(input.instance, input.radii)?.dual_ascent(input.lambda, None)
}

/// Keeps opened balls greedily by `mu . r`, dropping any that share a positive-dual point with a kept one.
pub fn prune(duals: &DualState) -> Vec<usize> {
    let mut contributors: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &duals.beta {
        if e.value > TOL {
            contributors.entry(e.ball).or_default().push(e.point);
        }
    }
    let mut order: Vec<usize> = (0..duals.opened.len()).collect();
    order.sort_by(|&a, &b| {
        let ca = duals.radius_cost[duals.radius_index(duals.opened[a])];
        let cb = duals.radius_cost[duals.radius_index(duals.opened[b])];
        cb.total_cmp(&ca).then(a.cmp(&b))
    });
    let mut used = vec![false; duals.alpha.len()];
    let mut kept = Vec::new();
    for i in order {
        let b = duals.opened[i];
        let cs = contributors.get(&b).map(|v| v.as_slice()).unwrap_or(&[]);
        if cs.iter().any(|&p| used[p]) {
            continue;
        }
        cs.iter().for_each(|&p| used[p] = true);
        kept.push(b);
    }
    kept
}

/// `r_i + 2 (mu . r) / mu_i`; layers with `mu_i = 0` keep their radius.
pub fn expand(r: &[f64], mu: &[f64]) -> Vec<f64> {
    let c: f64 = mu.iter().zip(r).map(|(a, b)| a * b).sum();
    r.iter()
        .zip(mu)
        .map(|(&ri, &mi)| if mi > 0.0 { ri + 2.0 * c / mi } else { ri })
        .collect()
}

/// Full relaxation solve: ascent, pruning, expansion and per-facility maximum.
pub fn lmp_solve(input: &FacilityLocationInput<'_>) -> Result<LmpOutput> {
    LmpSolver::new(input.instance, input.radii)?.solve(input.lambda, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::MetricInstance;

    fn radii(vectors: Vec<Vec<f64>>) -> CandidateRadii {
        CandidateRadii { delta: 0.0, gamma: 0.0, singles: vec![0.0], vectors }
    }

    #[test]
    fn lone_payer() {
        let base = MetricInstance::on_line(&[0.0], &[0.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![vec![0.0]]);
        let d = dual_ascent(&FacilityLocationInput { instance: &inst, lambda: 5.0, radii: &r }).unwrap();
        assert!((d.alpha[0] - 5.0).abs() < 1e-12);
        assert_eq!(d.opened, vec![0]);
    }

    #[test]
    fn two_payers_split() {
        let base = MetricInstance::on_line(&[0.0, 0.0], &[0.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![vec![0.0]]);
        let d = dual_ascent(&FacilityLocationInput { instance: &inst, lambda: 5.0, radii: &r }).unwrap();
        assert!((d.alpha[0] - 2.5).abs() < 1e-12 && (d.alpha[1] - 2.5).abs() < 1e-12);
        assert!((d.beta(0, 0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn late_point_freezes_on_open_ball() {
        let base = MetricInstance::on_line(&[0.0, 0.0, 9.0], &[0.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![vec![0.0]]);
        let d = dual_ascent(&FacilityLocationInput { instance: &inst, lambda: 2.0, radii: &r }).unwrap();
        assert!((d.alpha[0] - 1.0).abs() < 1e-12);
        assert!((d.alpha[2] - 9.0).abs() < 1e-12);
        assert_eq!(d.beta(0, 2), 0.0);
    }

    #[test]
    fn free_balls_open_everywhere() {
        let base = MetricInstance::on_line(&[0.0, 3.0, 7.0], &[0.0, 4.0], 2).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![vec![0.0]]);
        let out = lmp_solve(&FacilityLocationInput { instance: &inst, lambda: 0.0, radii: &r }).unwrap();
        assert_eq!(out.solution.centers(), vec![0, 1]);
        assert_eq!(crate::layered_ball::lb_cost(&inst, &out.solution).unwrap(), 4.0);
    }

    #[test]
    fn prune_keeps_expensive_ball() {
        let duals = DualState {
            lambda: 0.0,
            alpha: vec![1.0, 1.0],
            beta: vec![
                BetaEntry { ball: 0, point: 0, value: 1.0 },
                BetaEntry { ball: 1, point: 0, value: 1.0 },
                BetaEntry { ball: 1, point: 1, value: 1.0 },
            ],
            opened: vec![0, 1],
            open_times: vec![1.0, 1.0],
            time: 1.0,
            radius_count: 2,
            radius_cost: vec![3.0, 5.0],
        };
        assert_eq!(prune(&duals), vec![1]);
        let mut disjoint = duals.clone();
        disjoint.beta.remove(1);
        disjoint.beta[1].point = 1;
        disjoint.beta.truncate(2);
        assert_eq!(prune(&disjoint), vec![1, 0]);
        let mut single = duals;
        single.opened = vec![0];
        assert_eq!(prune(&single), vec![0]);
    }

    #[test]
    fn expand_examples() {
        assert_eq!(expand(&[1.0, 1.0], &[2.0, 1.0]), vec![4.0, 7.0]);
        assert_eq!(expand(&[0.0, 0.0], &[2.0, 1.0]), vec![0.0, 0.0]);
        assert_eq!(expand(&[2.0], &[1.0]), vec![6.0]);
        assert_eq!(expand(&[2.0, 1.0], &[1.0, 0.0]), vec![6.0, 1.0]);
    }

    #[test]
    fn empty_candidates_rejected() {
        let base = MetricInstance::on_line(&[0.0], &[0.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![]);
        assert!(lmp_solve(&FacilityLocationInput { instance: &inst, lambda: 1.0, radii: &r }).is_err());
    }

    #[test]
    fn trace_records_events() {
        let base = MetricInstance::on_line(&[0.0, 1.0], &[0.0], 1).unwrap();
        let inst = LayeredBallInstance::new(base, vec![1.0], vec![1.0]).unwrap();
        let r = radii(vec![vec![0.0]]);
        let out = LmpSolver::new(&inst, &r).unwrap().solve(1.0, true).unwrap();
        let kinds: Vec<&str> = out.trace.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec!["tight", "open", "freeze", "tight", "freeze"]);
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }
}
