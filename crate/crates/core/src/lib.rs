//! Exact-likelihood inference for mixed-effects SDEs
//! `dX_i = phi_i b(X_i) dt + sigma(X_i) dW_i` with `phi_i ~ N(mu, omega2)`.
//!
//! The pipeline is: simulate paths ([`simulate`]), reduce each to its
//! sufficient statistics `(U, V)` ([`suffstats`]), evaluate the closed-form
//! likelihood ([`likelihood`]) and maximize it over a compact parameter
//! rectangle ([`mle`]). The [`lab`] module runs the Monte Carlo checks of
//! the estimator's large-sample behaviour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod lab;
pub mod likelihood;
pub mod mle;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod suffstats;
pub mod sum;

pub use error::{Error, Result};
pub use likelihood::{
    log_density_ratio, log_lambda, score_hess, total_derivatives, total_loglik, ScoreHess,
    TotalDerivatives,
};
pub use mle::{fit_mle, profile_mu, BoundaryFlags, FitOptions, MleFit, ProfileMu};
pub use model::{
    builtin_model, validate_theta, Design, ModelSpec, ParamSpace, RandomEffect, Subject, Theta,
};
pub use rng::{NormalSource, RngStream};
pub use simulate::{
    draw_random_effects, euler_maruyama, euler_maruyama_with, simulate_ensemble, simulate_subject,
    Path,
};
pub use suffstats::{compute_suff_stats, decompose, SuffStats, SuffStatsDecomposition};
