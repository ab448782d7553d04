#![allow(dead_code)]

use ncc_core::{guess_pairs, sparsify, CandidateRadii, LayeredBallInstance, MetricInstance, SparseInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random layered instance with `m` layers and weights in `[0, 3)`.
pub fn random_layered(seed: u64, n: usize, nf: usize, k: usize, m: usize) -> LayeredBallInstance {
    let mut r = rng(seed ^ 0xa5a5);
    let base = MetricInstance::random_uniform(n, nf, k, 2, seed).unwrap();
    let rho = (0..m).map(|_| r.gen_range(0.0..3.0)).collect();
    let mu = (0..m).map(|_| r.gen_range(0.0..3.0)).collect();
    LayeredBallInstance::new(base, rho, mu).unwrap()
}

/// Random sparse instance with at least one layer.
pub fn random_sparse(seed: u64, n: usize, nf: usize, k: usize) -> SparseInstance {
    let mut s = seed;
    loop {
        let lb = random_layered(s, n, nf, k, 3);
        let sp = sparsify(&lb).unwrap();
        if sp.instance.m() > 0 {
            return sp;
        }
        s += 1000;
    }
}

/// Candidate radii of a pseudo-random nonzero guess.
pub fn random_guess(sp: &SparseInstance, seed: u64) -> CandidateRadii {
    let pairs: Vec<(f64, f64)> = guess_pairs(sp).into_iter().filter(|p| p.0 > 0.0).collect();
    let (d, g) = pairs[rng(seed).gen_range(0..pairs.len())];
    let si = &sp.instance;
    ncc_core::enumerate_radii(si.n(), si.m(), si.mu(), d, g, 1_000_000).unwrap()
}

pub fn log2(n: usize) -> f64 {
    (n as f64).log2()
}
