mod common;

use common::rng;
use ncc_core::meta::{chig_from_sym, solve_chif, solve_k_apx};
use ncc_core::oracle::exact_ncc_nearest;
use ncc_core::{
    exact_mnkc, exact_ncc, solution_cost, solve_auto, solve_ord_l1, solve_sym_l1, MetricInstance, NormSpec,
    OracleBudget, SubroutineRegistry,
};
use rand::Rng;

fn inners(n: usize) -> Vec<NormSpec> {
    vec![
        NormSpec::l1(n),
        NormSpec::linf(n),
        NormSpec::top(2.min(n), n).unwrap(),
        NormSpec::ordered((0..n).map(|i| (n - i) as f64).collect(), n).unwrap(),
        NormSpec::lp(2.0, n).unwrap(),
    ]
}

#[test]
fn solvers_stay_within_their_factors() {
    let budget = OracleBudget::default();
    let reg = SubroutineRegistry::default();
    for seed in 0..12u64 {
        let mut r = rng(seed);
        let n = r.gen_range(2..=5);
        let nf = r.gen_range(1..=4);
        let k = r.gen_range(1..=nf.min(3));
        let inst = MetricInstance::random_uniform(n, nf, k, 2, seed).unwrap();
        for f in inners(n) {
            let sym = solve_sym_l1(&inst, &f).unwrap();
            let (opt_l1, _) = exact_ncc(&inst, &f, &NormSpec::l1(k), &budget).unwrap();
            assert!(sym.cost <= sym.proven_factor.unwrap() * opt_l1 + 1e-9);
            for g in [NormSpec::l1(k), NormSpec::linf(k)] {
                let (opt, _) = exact_ncc(&inst, &f, &g, &budget).unwrap();
                let chig = chig_from_sym(&inst, &sym, &f, &g).unwrap();
                assert!(chig.cost <= chig.proven_factor.unwrap() * opt + 1e-9, "seed {seed} chig {}", f.label());
                let kapx = solve_k_apx(&inst, &f, &g, &reg).unwrap();
                assert!(kapx.cost <= kapx.proven_factor.unwrap() * opt + 1e-9, "seed {seed} k-apx {}", f.label());

                // outer-norm sandwich around the summed distance vector
                let mut sum = vec![0.0; n];
                for p in 0..n {
                    sum[p] = inst.pf(p, kapx.solution.center_of(p));
                }
                let mid = g.at_ones() * f.eval(&sum).unwrap();
                assert!(kapx.cost <= mid + 1e-9 && mid <= k as f64 * kapx.cost + 1e-9);

                for rep in [&chig, &kapx] {
                    assert_eq!(rep.cost, solution_cost(&inst, &rep.solution, &f, &g).unwrap());
                    assert!(rep.solution.centers().len() <= k);
                }
            }
        }
    }
}

#[test]
fn ordered_pipeline_matches_weights() {
    let inst = MetricInstance::random_uniform(5, 3, 2, 2, 4).unwrap();
    let w = [3.0, 2.0, 2.0, 1.0, 0.0];
    let ord = solve_ord_l1(&inst, &w).unwrap();
    let sym = solve_sym_l1(&inst, &NormSpec::ordered(w.to_vec(), 5).unwrap()).unwrap();
    assert_eq!(ord.cost, sym.cost);
    assert_eq!(ord.proven_factor, sym.proven_factor);
}

#[test]
fn auto_picks_the_cheapest() {
    let reg = SubroutineRegistry::default();
    for seed in 0..5u64 {
        let inst = MetricInstance::random_uniform(5, 4, 3, 2, seed).unwrap();
        let (f, g) = (NormSpec::l1(5), NormSpec::linf(3));
        let auto = solve_auto(&inst, &f, &g, &reg).unwrap();
        let chif = solve_chif(&inst, &f, &g, &reg).unwrap();
        let kapx = solve_k_apx(&inst, &f, &g, &reg).unwrap();
        assert!(auto.cost <= chif.cost && auto.cost <= kapx.cost);
        assert_eq!(auto.cost, solution_cost(&inst, &auto.solution, &f, &g).unwrap());
    }
}

#[test]
fn oracle_relations() {
    let budget = OracleBudget::default();
    for seed in 0..10u64 {
        let inst = MetricInstance::random_uniform(5, 3, 2, 2, seed).unwrap();
        for f in inners(5) {
            for g in [NormSpec::l1(2), NormSpec::linf(2)] {
                let free = exact_ncc(&inst, &f, &g, &budget).unwrap().0;
                let near = exact_ncc_nearest(&inst, &f, &g, &budget).unwrap().0;
                assert!(near >= free - 1e-9);
            }
            // with one cluster the nested and oblivious problems agree
            let one = inst.with_k(1).unwrap();
            let a = exact_mnkc(&one, &f, &budget).unwrap().0;
            let b = exact_ncc(&one, &f, &NormSpec::l1(1), &budget).unwrap().0;
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn results_are_deterministic() {
    let inst = MetricInstance::random_uniform(6, 4, 2, 2, 99).unwrap();
    let f = NormSpec::lp(2.0, 6).unwrap();
    let a = solve_sym_l1(&inst, &f).unwrap();
    let b = solve_sym_l1(&inst, &f).unwrap();
    assert_eq!(a.solution, b.solution);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
}
