use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BiPoint;
use crate::error::{Error, Result};
use crate::layered_ball::{lb_cost, LayeredBallInstance, LayeredBallSolution};

/// Grouping of the larger solution's facilities around the smaller one's.
///
/// Facilities are stored as positions into `x1` / `x2`.
#[derive(Clone, Debug)]
pub struct GroupStructure {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
    /// Closest `x1` position for each `x2` position.
    pub cl1_of_x2: Vec<usize>,
    /// Closest `x1` position for each point.
    pub cl1_of_point: Vec<usize>,
    /// Closest `x2` position for each point.
    pub cl2_of_point: Vec<usize>,
    /// `x2` positions per `x1` position.
    pub groups: Vec<Vec<usize>>,
    pub sum: Vec<Vec<f64>>,
    pub max: Vec<Vec<f64>>,
    /// `r1 + 2 * max` per `x1` position.
    pub inflated: Vec<Vec<f64>>,
    /// Points per `x2` position.
    pub clients: Vec<Vec<usize>>,
    r1: Vec<Vec<f64>>,
    r2: Vec<Vec<f64>>,
}

impl GroupStructure {
    pub fn r1(&self, i: usize) -> &[f64] {
        &self.r1[i]
    }

    pub fn r2(&self, j: usize) -> &[f64] {
        &self.r2[j]
    }

    /// Ball-to-ball cost between `x1[i]` and `x2[j]`.
    pub fn ball_ball(&self, inst: &LayeredBallInstance, i: usize, j: usize) -> f64 {
        let d = inst.base().ff(self.x1[i], self.x2[j]);
        let sum: Vec<f64> = self.r1[i].iter().zip(&self.r2[j]).map(|(a, b)| a + b).collect();
        inst.connection(d, &sum)
    }

    /// Connection of point `p` to `x1[i]`.
    pub fn to_first(&self, inst: &LayeredBallInstance, i: usize, p: usize) -> f64 {
        inst.connection(inst.base().pf(p, self.x1[i]), &self.r1[i])
    }

    /// Connection of point `p` to `x2[j]`.
    pub fn to_second(&self, inst: &LayeredBallInstance, j: usize, p: usize) -> f64 {
        inst.connection(inst.base().pf(p, self.x2[j]), &self.r2[j])
    }

    /// Connection of point `p` to `x1[i]` with inflated radii.
    pub fn to_inflated(&self, inst: &LayeredBallInstance, i: usize, p: usize) -> f64 {
        inst.connection(inst.base().pf(p, self.x1[i]), &self.inflated[i])
    }

    /// Knapsack item per `x1` position: saving and weight `|G| - 1`.
    pub fn knapsack_items(&self, inst: &LayeredBallInstance) -> Vec<KnapsackItem> {
        (0..self.x1.len())
            .map(|i| {
                let mut value = inst.ball_cost(&self.r1[i]) + inst.ball_cost(&self.sum[i]);
                for &j in &self.groups[i] {
                    for &p in &self.clients[j] {
                        value += self.to_first(inst, self.cl1_of_point[p], p) + self.to_second(inst, j, p);
                    }
                }
                KnapsackItem { value, weight: self.groups[i].len() as i64 - 1 }
            })
            .collect()
    }
}

fn argmin_by(len: usize, mut key: impl FnMut(usize) -> (f64, f64, usize)) -> usize {
    let mut best = 0;
    let mut best_key = key(0);
    for i in 1..len {
        let k = key(i);
        if k.0 < best_key.0 || (k.0 == best_key.0 && (k.1 < best_key.1 || (k.1 == best_key.1 && k.2 < best_key.2))) {
            best = i;
            best_key = k;
        }
    }
    best
}

/// Groups `X2` around `X1` by ball-to-ball cost, ties by distance then index.
pub fn build_groups(bi: &BiPoint, inst: &LayeredBallInstance) -> Result<GroupStructure> {
    let sol2 = bi.sol2.as_ref().ok_or_else(|| Error::domain("bi-point has no second solution"))?;
    let base = inst.base();
    let m = inst.m();
    let x1 = bi.sol1.centers();
    let x2 = sol2.centers();
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::domain("bi-point solutions must be nonempty"));
    }
    let r1: Vec<Vec<f64>> = x1.iter().map(|&x| bi.sol1.radius(x).expect("center").to_vec()).collect();
    let r2: Vec<Vec<f64>> = x2.iter().map(|&x| sol2.radius(x).expect("center").to_vec()).collect();
    let mut gs = GroupStructure {
        cl1_of_x2: Vec::new(),
        cl1_of_point: Vec::new(),
        cl2_of_point: Vec::new(),
        groups: vec![Vec::new(); x1.len()],
        sum: vec![vec![0.0; m]; x1.len()],
        max: vec![vec![0.0; m]; x1.len()],
        inflated: Vec::new(),
        clients: vec![Vec::new(); x2.len()],
        x1,
        x2,
        r1,
        r2,
    };
    for j in 0..gs.x2.len() {
        let i = argmin_by(gs.x1.len(), |i| (gs.ball_ball(inst, i, j), base.ff(gs.x1[i], gs.x2[j]), gs.x1[i]));
        gs.cl1_of_x2.push(i);
        gs.groups[i].push(j);
        for l in 0..m {
            gs.sum[i][l] += gs.r2[j][l];
            gs.max[i][l] = gs.max[i][l].max(gs.r2[j][l]);
        }
    }
    for p in 0..base.n() {
        let i = argmin_by(gs.x1.len(), |i| (gs.to_first(inst, i, p), base.pf(p, gs.x1[i]), gs.x1[i]));
        let j = argmin_by(gs.x2.len(), |j| (gs.to_second(inst, j, p), base.pf(p, gs.x2[j]), gs.x2[j]));
        gs.cl1_of_point.push(i);
        gs.cl2_of_point.push(j);
        gs.clients[j].push(p);
    }
    gs.inflated = (0..gs.x1.len())
        .map(|i| gs.r1[i].iter().zip(&gs.max[i]).map(|(r, mx)| r + 2.0 * mx).collect())
        .collect();
    Ok(gs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnapsackItem {
    pub value: f64,
    pub weight: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnapsackLpSolution {
    pub u: Vec<f64>,
    pub value: f64,
    /// The single fractional item, if any.
    pub special: Option<usize>,
    /// Budget units given to the fractional item.
    pub filled: i64,
}

/// Fractional knapsack: items of weight `<= 0` are taken for free, the rest greedily by value per weight.
pub fn solve_knapsack_lp(items: &[KnapsackItem], budget: i64) -> Result<KnapsackLpSolution> {
    if budget < 0 {
        return Err(Error::Domain(format!("knapsack budget {budget} is negative")));
    }
    let mut u = vec![0.0; items.len()];
    let mut left = budget;
    let mut value = 0.0;
    for (i, it) in items.iter().enumerate() {
        if it.weight <= 0 {
            u[i] = 1.0;
            left -= it.weight;
            value += it.value;
        }
    }
    let mut order: Vec<usize> = (0..items.len()).filter(|&i| items[i].weight > 0 && items[i].value > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = items[a].value / items[a].weight as f64;
        let rb = items[b].value / items[b].weight as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut special = None;
    let mut filled = 0;
    for i in order {
        if left == 0 {
            break;
        }
        let w = items[i].weight;
        if w <= left {
            u[i] = 1.0;
            left -= w;
            value += items[i].value;
        } else {
            u[i] = left as f64 / w as f64;
            value += items[i].value * u[i];
            special = Some(i);
            filled = left;
            break;
        }
    }
    Ok(KnapsackLpSolution { u, value, special, filled })
}

/// Number of extra group members opened next to the special facility:
/// `max(0, ceil(u |G|) - 2)` with `u = filled / (|G| - 1)`.
pub fn special_extra(filled: i64, group_size: i64) -> usize {
    let denom = group_size - 1;
    let ceil = (filled * group_size + denom - 1) / denom;
    (ceil - 2).max(0) as usize
}

/// How the special group's extra members are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SpecialSelection {
    #[default]
    Greedy,
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundingBranch {
    /// The smaller solution is returned as is.
    First,
    Grouped,
}

#[derive(Clone, Debug)]
pub struct Rounding {
    pub solution: LayeredBallSolution,
    pub branch: RoundingBranch,
    pub groups: Option<GroupStructure>,
    pub knapsack: Option<KnapsackLpSolution>,
}

pub fn round_bipoint(bi: &BiPoint, inst: &LayeredBallInstance) -> Result<Rounding> {
    round_bipoint_with(bi, inst, SpecialSelection::Greedy)
}

/// Turns a bi-point solution into one with at most `k` balls.
pub fn round_bipoint_with(bi: &BiPoint, inst: &LayeredBallInstance, selection: SpecialSelection) -> Result<Rounding> {
    let k = inst.k();
    let first = |bi: &BiPoint| Rounding { solution: bi.sol1.clone(), branch: RoundingBranch::First, groups: None, knapsack: None };
    let Some(sol2) = bi.sol2.as_ref() else {
        return Ok(first(bi));
    };
    if bi.a > 0.5 || bi.b == 0.0 || lb_cost(inst, &bi.sol1)? <= lb_cost(inst, sol2)? {
        return Ok(first(bi));
    }
    let gs = build_groups(bi, inst)?;
    let items = gs.knapsack_items(inst);
    let budget = k as i64 - gs.x1.len() as i64;
    let ks = solve_knapsack_lp(&items, budget)?;

    let mut out = LayeredBallSolution::new();
    for i in 0..gs.x1.len() {
        if Some(i) == ks.special {
            continue;
        }
        if ks.u[i] == 1.0 {
            for &j in &gs.groups[i] {
                out.insert_max(gs.x2[j], gs.r2[j].clone());
            }
        } else {
            out.insert_max(gs.x1[i], gs.inflated[i].clone());
        }
    }
    if let Some(i) = ks.special {
        out.insert_max(gs.x1[i], gs.inflated[i].clone());
        let group = &gs.groups[i];
        let extra = special_extra(ks.filled, group.len() as i64);
        let mut members = group.clone();
        match selection {
            SpecialSelection::Greedy => {
                let saving = |j: usize| {
                    let connect: f64 = gs.clients[j]
                        .iter()
                        .map(|&p| gs.to_inflated(inst, i, p) - gs.to_second(inst, j, p))
                        .sum();
                    connect - inst.ball_cost(&gs.r2[j])
                };
                let mut scored: Vec<(f64, usize)> = members.iter().map(|&j| (saving(j), j)).collect();
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(gs.x2[a.1].cmp(&gs.x2[b.1])));
                members = scored.into_iter().map(|(_, j)| j).collect();
            }
            SpecialSelection::Random(seed) => {
                members.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            }
        }
        for &j in members.iter().take(extra) {
            out.insert_max(gs.x2[j], gs.r2[j].clone());
        }
    }
    if out.len() > k {
        return Err(Error::Invariant(format!("rounded solution opens {} > k = {k} balls", out.len())));
    }
    if out.is_empty() {
        return Err(Error::Invariant("rounded solution is empty".into()));
    }
    Ok(Rounding { solution: out, branch: RoundingBranch::Grouped, groups: Some(gs), knapsack: Some(ks) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(v: &[(f64, i64)]) -> Vec<KnapsackItem> {
        v.iter().map(|&(value, weight)| KnapsackItem { value, weight }).collect()
    }

    #[test]
    fn knapsack_example() {
        let s = solve_knapsack_lp(&items(&[(10.0, 2), (6.0, 1), (4.0, 2)]), 2).unwrap();
        assert_eq!(s.u, vec![0.5, 1.0, 0.0]);
        assert_eq!(s.value, 11.0);
        assert_eq!((s.special, s.filled), (Some(0), 1));
    }

    #[test]
    fn knapsack_unconstrained_and_free() {
        let s = solve_knapsack_lp(&items(&[(1.0, 2), (2.0, 1)]), 5).unwrap();
        assert_eq!(s.u, vec![1.0, 1.0]);
        let s = solve_knapsack_lp(&items(&[(1.0, 0), (2.0, -1), (3.0, 0)]), 0).unwrap();
        assert_eq!(s.u, vec![1.0; 3]);
        assert!(solve_knapsack_lp(&items(&[(1.0, 1)]), -1).is_err());
    }

    #[test]
    fn empty_group_adds_budget() {
        let s = solve_knapsack_lp(&items(&[(0.0, -1), (5.0, 1)]), 0).unwrap();
        assert_eq!(s.u, vec![1.0, 1.0]);
    }

    #[test]
    fn special_extra_counts() {
        // u = 1/2, |G| = 3: ceil(1.5) - 2 = 0
        assert_eq!(special_extra(1, 3), 0);
        // u = 3/4, |G| = 5: ceil(3.75) - 2 = 2
        assert_eq!(special_extra(3, 5), 2);
        // u = 2/4, |G| = 5: ceil(2.5) - 2 = 1
        assert_eq!(special_extra(2, 5), 1);
    }
}
