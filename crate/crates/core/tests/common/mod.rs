#![allow(dead_code)]

use gaussrd::model::{AuxRates, MultiterminalProblem, RemoteProblem};
use gaussrd::symcore::{Matrix, SymMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// `G Gᵀ + c I` with `G` uniform in `[-1, 1]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> SymMatrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    SymMatrix::symmetrized(&g * g.transpose() + Matrix::identity(n, n) * ridge)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Weights close to the identity, kept well conditioned.
pub fn random_gamma(rng: &mut ChaCha8Rng, k: usize) -> Matrix {
    Matrix::identity(k, k) + random_matrix(rng, k, k) * 0.3
}

/// `A` rows are pushed away from zero so every encoder is informative.
pub fn random_remote(rng: &mut ChaCha8Rng, k: usize, l: usize) -> RemoteProblem {
    let sx = random_spd(rng, k, 0.3);
    let mut a = random_matrix(rng, l, k);
    for i in 0..l {
        a[(i, i % k)] += if a[(i, i % k)] >= 0.0 { 0.5 } else { -0.5 };
    }
    let noise = (0..l).map(|_| rng.random_range(0.2..2.0)).collect();
    let gamma = random_gamma(rng, k);
    RemoteProblem::new(sx, a, noise, gamma).expect("valid random instance")
}

pub fn random_rates(rng: &mut ChaCha8Rng, l: usize, max: f64) -> AuxRates {
    AuxRates::new((0..l).map(|_| rng.random_range(0.0..max)).collect()).unwrap()
}

/// Split at random fractions of `λ_min(Σ_Y)`, which keeps `Σ_X` positive definite.
pub fn random_multiterminal(rng: &mut ChaCha8Rng, l: usize) -> MultiterminalProblem {
    let sy = random_spd(rng, l, 0.3);
    let lmin = sy.min_eigenvalue();
    let split = (0..l).map(|_| rng.random_range(0.1..0.9) * lmin).collect();
    MultiterminalProblem::new(sy, split, Matrix::identity(l, l)).expect("valid split")
}

pub fn two_terminal(s1: f64, s2: f64, rho: f64, ratio: f64) -> MultiterminalProblem {
    let c = rho * s1 * s2;
    let sy = SymMatrix::from_row_major(2, &[s1 * s1, c, c, s2 * s2]).unwrap();
    let split = vec![ratio * sy.min_eigenvalue(); 2];
    MultiterminalProblem::new(sy, split, Matrix::identity(2, 2)).unwrap()
}

/// Random point of the two-terminal set `𝒟` as `(D₁, D₂)`.
pub fn random_d_set(rng: &mut ChaCha8Rng, s1: f64, s2: f64, rho: f64) -> (f64, f64) {
    let rho2 = rho * rho;
    let lo = rng.random_range(0.02..0.95);
    let hi_cap = 1.0f64.min(rho2 * lo + 1.0 - rho2);
    let hi = lo + (hi_cap - lo) * rng.random::<f64>();
    if rng.random::<bool>() {
        (lo * s1 * s1, hi * s2 * s2)
    } else {
        (hi * s1 * s1, lo * s2 * s2)
    }
}

/// Symmetric circulant with first row `c`, `c_k = c_{L-k}`.
pub fn circulant(c: &[f64]) -> SymMatrix {
    let l = c.len();
    SymMatrix::symmetrized(Matrix::from_fn(l, l, |i, j| {
        let k = (j + l - i) % l;
        0.5 * (c[k] + c[(l - k) % l])
    }))
}

pub fn random_circulant(rng: &mut ChaCha8Rng, l: usize) -> SymMatrix {
    let mut c: Vec<f64> = (0..l).map(|_| rng.random_range(-0.4..0.4)).collect();
    c[0] = 0.0;
    let base = circulant(&c);
    let shift = 0.5 - base.min_eigenvalue();
    base.add_diagonal(&vec![shift + rng.random_range(0.0..1.5); l])
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
