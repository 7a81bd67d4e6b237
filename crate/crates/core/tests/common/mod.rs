#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvph::dynamics::TangentPair;

pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

/// Exact 2x2 propagator of `x'' = -λ x` written out per sign of λ.
pub fn exact_block(lambda: f64, t: f64) -> [[f64; 2]; 2] {
    if lambda < 0.0 {
        let k = (-lambda).sqrt();
        [[(k * t).cosh(), (k * t).sinh() / k], [k * (k * t).sinh(), (k * t).cosh()]]
    } else if lambda > 0.0 {
        let k = lambda.sqrt();
        [[(k * t).cos(), (k * t).sin() / k], [-k * (k * t).sin(), (k * t).cos()]]
    } else {
        [[1.0, t], [0.0, 1.0]]
    }
}

pub fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> TangentPair {
    let eta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sigma: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = TangentPair::from_slices(&eta, &sigma);
    let n = p.norm();
    p.scaled(1.0 / n)
}

/// Brute-force minimum of the form over unit vectors of `C₀` for the rank-one
/// model with `dim A = 2`, `dim B = 1`, `K_A = -4a²`, `K_B = -a²`.
///
/// Aligned family: `η_A = p e₁`, `ς_A = q e₁ + s e₂`, `η_B = u`, `ς_B = v`
/// with `p q = c² u² + v²` and `p² + q² + s² + u² + v² = 1`. On this family
/// the form is `(-K_A - 1) p² + 1 - u² - v² + 2 (K_B - c²) u v`, increasing in
/// `p²`, so `p²` takes the smallest feasible value
/// `(R - sqrt(R² - 4m²)) / 2` with `R = 1 - u² - v²`, `m = c² u² + v²`.
/// The remaining `(u, v)` are searched on a grid and refined.
pub fn aligned_family_minimum(a: f64, c: f64) -> f64 {
    let (ka, kb) = (-4.0 * a * a, -a * a);
    let c2 = c * c;
    let eval = |u: f64, v: f64| -> Option<f64> {
        let rest = 1.0 - u * u - v * v;
        let m = c2 * u * u + v * v;
        let disc = rest * rest - 4.0 * m * m;
        if rest < 0.0 || disc < 0.0 {
            return None;
        }
        let p2 = 0.5 * (rest - disc.sqrt());
        Some((-ka - 1.0) * p2 + rest + 2.0 * (kb - c2) * u * v)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let n = 400;
    for j in 0..=2 * n {
        let u = -1.0 + j as f64 / n as f64;
        for l in 0..=2 * n {
            let v = -1.0 + l as f64 / n as f64;
            if let Some(f) = eval(u, v) {
                if f < best.0 {
                    best = (f, u, v);
                }
            }
        }
    }
    let mut h = 1.0 / n as f64;
    for _ in 0..60 {
        let (_, u0, v0) = best;
        for du in -8..=8 {
            for dv in -8..=8 {
                let (u, v) = (u0 + du as f64 * h / 8.0, v0 + dv as f64 * h / 8.0);
                if let Some(f) = eval(u, v) {
                    if f < best.0 {
                        best = (f, u, v);
                    }
                }
            }
        }
        h *= 0.7;
    }
    best.0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
