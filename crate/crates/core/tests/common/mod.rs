#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use obstacle_ocp::cli::ScenarioConfig;
use obstacle_ocp::fem::{assemble_operator, build_structured_mesh, OperatorSpec, SparseOperator};

/// State bound active, obstacle inactive.
pub const S1: &str = "\
nsub = 32
y_a = -0.3
y_b = 0.1
y_d = 1
alpha = 1e-2
";

/// Obstacle strictly active, state bound inactive, no control box.
pub const S2: &str = "\
nsub = 16
y_a = -0.05
y_b = 1
y_d = -1
alpha = 1e-2
u_hat = construct
";

pub fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text).expect("scenario parses")
}

pub fn laplace(n_sub: usize) -> SparseOperator {
    let mesh = Arc::new(build_structured_mesh(n_sub).unwrap());
    assemble_operator(&mesh, &OperatorSpec::laplacian()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            scale * g
        })
        .collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}
