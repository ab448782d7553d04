mod common;

use common::{log2, random_guess, random_sparse, rng};
use ncc_core::bipoint::{binary_search_with, build_groups, round_bipoint, solve_knapsack_lp, special_extra, KnapsackItem};
use ncc_core::{exact_lbkm, lb_cost, LmpSolver, OracleBudget};
use proptest::prelude::*;
use rand::Rng;

/// LP optimum by enumerating the vertices of the box cut by one halfspace.
fn knapsack_vertices(items: &[KnapsackItem], budget: i64) -> f64 {
    let n = items.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        let used: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| items[i].weight).sum();
        let value: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| items[i].value).sum();
        if used <= budget {
            best = best.max(value);
        }
        for j in (0..n).filter(|j| mask >> j & 1 == 0 && items[*j].weight != 0) {
            let u = (budget - used) as f64 / items[j].weight as f64;
            if u > 0.0 && u < 1.0 {
                best = best.max(value + u * items[j].value);
            }
        }
    }
    best
}

fn arb_items() -> impl Strategy<Value = (Vec<KnapsackItem>, i64)> {
    (prop::collection::vec((0.0..20.0f64, -1i64..6), 0..=6), 0i64..12)
        .prop_map(|(v, b)| (v.into_iter().map(|(value, weight)| KnapsackItem { value, weight }).collect(), b))
}

proptest! {
    #[test]
    fn knapsack_greedy_is_lp_optimal((items, budget) in arb_items()) {
        let s = solve_knapsack_lp(&items, budget).unwrap();
        let fractional = s.u.iter().filter(|&&u| u > 0.0 && u < 1.0).count();
        prop_assert!(fractional <= 1);
        let used: f64 = items.iter().zip(&s.u).map(|(it, u)| it.weight as f64 * u).sum();
        prop_assert!(used <= budget as f64 + 1e-9);
        prop_assert!((s.value - knapsack_vertices(&items, budget)).abs() <= 1e-9);
    }
}

#[test]
fn special_group_ratio_at_most_three() {
    for g in 2..=50i64 {
        for xi in 1..g - 1 {
            let u = xi as f64 / (g - 1) as f64;
            let p = special_extra(xi, g) as f64 / g as f64;
            assert!((1.0 - p) / (1.0 - u) <= 3.0 + 1e-12, "|G| = {g}, xi = {xi}");
        }
    }
}

#[test]
fn bipoint_and_rounding_contracts() {
    let budget = OracleBudget::default();
    let mut checked = 0;
    for seed in 0..30u64 {
        let n = 3 + (seed % 2) as usize;
        let sp = random_sparse(seed, n, 4, 2);
        let inst = &sp.instance;
        let radii = random_guess(&sp, seed + 7);
        let (opt, _) = exact_lbkm(inst, &budget, Some(&radii)).unwrap();
        let solver = LmpSolver::new(inst, &radii).unwrap();
        let bi = binary_search_with(&solver, false).unwrap();
        let k = inst.k() as f64;
        assert!((bi.a + bi.b - 1.0).abs() <= 1e-12);
        let n2 = bi.sol2.as_ref().map_or(0, |s| s.len()) as f64;
        assert!((bi.a * bi.sol1.len() as f64 + bi.b * n2 - k).abs() <= 1e-12);
        let combined = bi.combined_cost(inst).unwrap();
        assert!(combined <= (2.0 * log2(n) + 4.0) * opt + 1e-9, "seed {seed}: {combined} vs opt {opt}");
        for sol in std::iter::once(&bi.sol1).chain(bi.sol2.as_ref()) {
            for (_, r) in sol.iter() {
                for i in 0..inst.m() {
                    assert!(inst.mu()[i] * r[i] <= 3.0 * radii.gamma + 1e-9);
                }
            }
        }

        let rounded = round_bipoint(&bi, inst).unwrap();
        assert!(rounded.solution.len() <= inst.k());
        let cost = lb_cost(inst, &rounded.solution).unwrap();
        let bound = (12.0 * log2(n) + 24.0) * opt + 9.0 * inst.m() as f64 * radii.gamma;
        assert!(cost <= bound + 1e-9, "seed {seed}: {cost} > {bound}");

        if let Some(sol2) = &bi.sol2 {
            checked += 1;
            let gs = build_groups(&bi, inst).unwrap();
            let total: usize = gs.groups.iter().map(|g| g.len()).sum();
            assert_eq!(total, sol2.len());
            for i in 0..gs.x1.len() {
                assert!(gs.max[i].iter().zip(&gs.sum[i]).all(|(m, s)| m <= s));
            }
            // uniform u = b meets the budget with equality
            let lhs: f64 = gs.groups.iter().map(|g| bi.b * (g.len() as f64 - 1.0)).sum();
            assert!((lhs - (k - gs.x1.len() as f64)).abs() <= 1e-9);
            // generalized triangle inequality
            for p in 0..inst.n() {
                let j = gs.cl2_of_point[p];
                let far = gs.cl1_of_x2[j];
                let lhs = gs.to_inflated(inst, far, p);
                let rhs = 2.0 * gs.to_second(inst, j, p) + gs.to_first(inst, gs.cl1_of_point[p], p);
                assert!(lhs <= rhs + 1e-9, "seed {seed} point {p}");
            }
        }
    }
    assert!(checked > 0, "no run produced a two-sided bi-point");
}

#[test]
fn groups_degenerate_cases() {
    // one center in the first solution collects every facility of the second
    let mut r = rng(3);
    for seed in 0..20u64 {
        let sp = random_sparse(seed, 4, 4, 1);
        let radii = random_guess(&sp, r.gen());
        let bi = binary_search_with(&LmpSolver::new(&sp.instance, &radii).unwrap(), false).unwrap();
        if let Some(sol2) = &bi.sol2 {
            let gs = build_groups(&bi, &sp.instance).unwrap();
            assert_eq!(gs.x1.len(), 1);
            assert_eq!(gs.groups[0].len(), sol2.len());
        }
    }
}
