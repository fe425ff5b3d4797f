#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use subgauss::linalg::{symmetric_eigen, LinearMap};
use subgauss::SymmetricOperator;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> LinearMap {
    let entries = (0..rows * cols)
        .map(|_| {
            // Box–Muller, first variate only
            let u: f64 = 1.0 - rng.random::<f64>();
            let v: f64 = rng.random();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    LinearMap::new(rows, cols, entries).unwrap()
}

/// Random symmetric matrix, not necessarily positive.
pub fn symmetric(rng: &mut StdRng, dim: usize) -> LinearMap {
    gaussian_matrix(rng, dim, dim).symmetrized().unwrap()
}

/// `G Gᵀ / cols` with a random rank between 1 and `dim`.
pub fn positive(rng: &mut StdRng, dim: usize) -> SymmetricOperator {
    let rank = rng.random_range(1..=dim);
    let g = gaussian_matrix(rng, dim, rank);
    let m = g.matmul(&g.transpose()).unwrap().scaled(1.0 / rank as f64);
    SymmetricOperator::dense(m.symmetrized().unwrap()).unwrap()
}

/// Random positive eigenvalue list, sorted nonincreasing, largest in `(0, 5]`.
pub fn spectrum(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    let scale = 5.0 * (1.0 - rng.random::<f64>());
    let mut v: Vec<f64> = (0..dim)
        .map(|_| scale * rng.random::<f64>().powi(3))
        .collect();
    v[0] = scale;
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Largest singular value.
pub fn op_norm(a: &LinearMap) -> f64 {
    symmetric_eigen(&a.gram()).unwrap().values[0].max(0.0).sqrt()
}

/// Random `K` with `‖K‖ < 1`.
pub fn contraction(rng: &mut StdRng, dim: usize) -> LinearMap {
    let k = gaussian_matrix(rng, dim, dim);
    let shrink = 1.0 - 0.5 * rng.random::<f64>();
    k.scaled(shrink / op_norm(&k))
}

pub fn dim(rng: &mut StdRng) -> usize {
    rng.random_range(2..=20)
}
