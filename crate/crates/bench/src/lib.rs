//! Shared fixtures for the benchmarks.

use remle_core::{
    builtin_model, compute_suff_stats, simulate_ensemble, Design, ModelSpec, Path, SuffStats, Theta,
};

pub fn theta0() -> Theta {
    Theta::new(1.0, 0.5).unwrap()
}

/// `n` subjects on a converging design with `steps` Euler steps each.
pub fn ensemble(model: &str, n: usize, steps: usize) -> (ModelSpec, Vec<Path>) {
    let model = builtin_model(model).unwrap();
    let design = Design::converging(n, 0.0, 1.0, 1.0, 0.0, 1.0 / steps as f64, 1).unwrap();
    let paths = simulate_ensemble(&model, theta0(), &design, 0).unwrap();
    (model, paths)
}

pub fn stats(model: &ModelSpec, paths: &[Path]) -> Vec<SuffStats> {
    paths
        .iter()
        .map(|p| compute_suff_stats(p, model).unwrap())
        .collect()
}
