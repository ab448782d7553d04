//! Approximation algorithms for clustering with cluster-aware norm objectives.
//!
//! An instance asks for at most `k` centers and an assignment of points to
//! them. Each cluster is scored by an inner norm `f` applied to its distance
//! vector, and the per-cluster scores are aggregated by an outer norm `g`.
//!
//! The main pipeline reduces ordered inner norms to Layered Ball k-Median,
//! sparsifies the layers, solves a Lagrangean facility-location relaxation by
//! primal-dual ascent, and rounds the resulting bi-point solution.

pub mod bipoint;
pub mod error;
pub mod instance;
pub mod layered_ball;
pub mod meta;
pub mod norms;
pub mod oracle;
pub mod primal_dual;

pub use bipoint::{
    binary_search, build_groups, round_bipoint, solve_knapsack_lp, solve_lbkm, BiPoint,
    GroupStructure, KnapsackItem, KnapsackLpSolution, LbkmOptions, LbkmOutcome,
};
pub use error::{Error, Result};
pub use instance::{
    cluster_distance_vector, nearest_assignment, solution_cost, validate_metric, Clustering,
    MetricInstance, MetricReport,
};
pub use layered_ball::{
    clustering_to_lb_solution, enumerate_radii, guess_pairs, lb_connection_cost, lb_cost,
    lb_solution_to_clustering, reduce_ord_l1, sparsify, unsparsify_solution, CandidateRadii,
    LayeredBallInstance, LayeredBallSolution, SparseInstance,
};
pub use meta::{
    solve_auto, solve_chif, solve_chig, solve_k_apx, solve_ord_l1, solve_sym_l1, Algorithm,
    SolverReport, SubroutineRegistry,
};
pub use norms::{NormKind, NormSpec, OrderedSurrogate};
pub use oracle::{exact_lbkm, exact_mnkc, exact_ncc, OracleBudget};
pub use primal_dual::{
    dual_ascent, expand, lmp_solve, prune, DualState, FacilityLocationInput, LmpOutput, LmpSolver,
    TraceEvent,
};

/// Absolute tolerance used for every tightness and feasibility comparison.
pub const TOL: f64 = 1e-9;

/// Smallest `j` with `2^j >= n` (zero for `n <= 1`).
pub fn ceil_log2(n: u128) -> u32 {
    if n <= 1 {
        0
    } else {
        128 - (n - 1).leading_zeros()
    }
}

pub(crate) fn sorted_desc(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
