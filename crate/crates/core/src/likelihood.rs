//! Closed-form per-subject likelihood and its derivatives in `(mu, omega2)`.
//!
//! With `a = 1 + omega2 V`, the integrated likelihood of one subject is
//!
//! ```text
//! log lambda = -1/2 log a + (2 mu U - mu^2 V + omega2 U^2) / (2 a)
//! ```
//!
//! which is the usual Gaussian-mixture form with the `U^2 / (2V)` and
//! `(mu - U/V)^2` terms combined, so it stays finite at `V = 0`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::Theta;
use crate::suffstats::SuffStats;
use crate::sum::CompensatedSum;

/// Score and Hessian of one subject's log-likelihood.
///
/// `gamma = (U - mu V) / a` and `cap_i = V / a`; the score is
/// `(gamma, (gamma^2 - cap_i) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreHess {
    pub gamma: f64,
    pub cap_i: f64,
    pub score: Vector2<f64>,
    pub hess: Matrix2<f64>,
}

pub fn log_lambda(stats: &SuffStats, theta: &Theta) -> f64 {
    let (u, v) = (stats.u, stats.v);
    let (mu, w) = (theta.mu, theta.omega2);
    let a = 1.0 + w * v;
    -0.5 * a.ln() + (2.0 * mu * u - mu * mu * v + w * u * u) / (2.0 * a)
}

pub fn score_hess(stats: &SuffStats, theta: &Theta) -> ScoreHess {
    let a = 1.0 + theta.omega2 * stats.v;
    let gamma = (stats.u - theta.mu * stats.v) / a;
    let cap_i = stats.v / a;
    let score = Vector2::new(gamma, 0.5 * (gamma * gamma - cap_i));
    let cross = -gamma * cap_i;
    let hess = Matrix2::new(
        -cap_i,
        cross,
        cross,
        -0.5 * (2.0 * gamma * gamma * cap_i - cap_i * cap_i),
    );
    ScoreHess {
        gamma,
        cap_i,
        score,
        hess,
    }
}

/// `log lambda(theta0) - log lambda(theta)` evaluated term by term.
pub fn log_density_ratio(stats: &SuffStats, theta0: &Theta, theta: &Theta) -> f64 {
    let (u, v) = (stats.u, stats.v);
    let a = 1.0 + theta.omega2 * v;
    let a0 = 1.0 + theta0.omega2 * v;
    let (mu, mu0) = (theta.mu, theta0.mu);
    0.5 * (a / a0).ln()
        + 0.5 * (theta0.omega2 - theta.omega2) * u * u / (a * a0)
        + mu * mu * v / (2.0 * a)
        - mu * u / a
        - (mu0 * mu0 * v / (2.0 * a0) - mu0 * u / a0)
}

/// Ensemble log-likelihood with its score and Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalDerivatives {
    pub loglik: f64,
    pub score: Vector2<f64>,
    pub hess: Matrix2<f64>,
}

pub fn total_loglik(all_stats: &[SuffStats], theta: &Theta) -> Result<f64> {
    if all_stats.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut sum = CompensatedSum::new();
    sum.extend(all_stats.iter().map(|s| log_lambda(s, theta)));
    Ok(sum.value())
}

pub fn total_derivatives(all_stats: &[SuffStats], theta: &Theta) -> Result<TotalDerivatives> {
    if all_stats.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut ll = CompensatedSum::new();
    let mut parts = [CompensatedSum::new(); 5];
    for s in all_stats {
        ll.add(log_lambda(s, theta));
        let sh = score_hess(s, theta);
        parts[0].add(sh.score[0]);
        parts[1].add(sh.score[1]);
        parts[2].add(sh.hess[(0, 0)]);
        parts[3].add(sh.hess[(0, 1)]);
        parts[4].add(sh.hess[(1, 1)]);
    }
    let p: Vec<f64> = parts.iter().map(|c| c.value()).collect();
    Ok(TotalDerivatives {
        loglik: ll.value(),
        score: Vector2::new(p[0], p[1]),
        hess: Matrix2::new(p[2], p[3], p[3], p[4]),
    })
}
