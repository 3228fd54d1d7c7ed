//! Monte Carlo Fisher information and Kullback–Leibler divergence at a
//! single design point `(x0, T)`.

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::{log_density_ratio, score_hess};
use crate::model::{ModelSpec, Subject, Theta};
use crate::rng::RngStream;
use crate::simulate::simulate_subject;
use crate::suffstats::{compute_suff_stats, SuffStats};

use super::stat::jackknife;

/// Fewest replicates accepted by the estimators.
pub const MIN_REPLICATES: usize = 100;

/// Sufficient statistics of `R` independent subjects at one design point.
#[derive(Debug, Clone)]
pub struct PointSample {
    pub point: Subject,
    pub stats: Vec<SuffStats>,
    /// `(replicate, message)` for replicates that failed to simulate.
    pub failures: Vec<(usize, String)>,
}

/// Simulates `replicates` subjects under `theta` at `point`; replicate `r`
/// uses `RngStream(seed, stream_id, r)`.
pub fn sample_point(
    model: &ModelSpec,
    theta: Theta,
    point: Subject,
    dt: f64,
    replicates: usize,
    seed: u64,
    stream_id: u64,
) -> PointSample {
    let base = RngStream::new(seed, stream_id, 0);
    let results: Vec<Result<SuffStats>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let path = simulate_subject(
                model,
                theta,
                point.x0,
                point.t_end,
                dt,
                &base.with_replicate(r as u64),
            )?;
            compute_suff_stats(&path, model).map(|s| SuffStats {
                subject_index: r,
                ..s
            })
        })
        .collect();
    let mut stats = Vec::with_capacity(replicates);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => stats.push(s),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    PointSample {
        point,
        stats,
        failures,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoEstimate {
    /// Sample covariance of the score vector.
    pub matrix: Matrix2<f64>,
    pub mc_se: Matrix2<f64>,
    /// Minus the sample mean of the Hessian; equals `matrix` in expectation.
    pub neg_mean_hessian: Matrix2<f64>,
    /// `matrix - neg_mean_hessian` and its jackknife standard error.
    pub identity_gap: Matrix2<f64>,
    pub identity_se: Matrix2<f64>,
    pub replicates: usize,
    pub failures: usize,
    pub design_point: Subject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    pub mc_se: f64,
    pub theta0: Theta,
    pub theta: Theta,
    pub replicates: usize,
    pub failures: usize,
    pub design_point: Subject,
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    Ok(())
}

fn check_failures(sample: &PointSample) -> Result<()> {
    if sample.stats.len() < 2 {
        let first = sample
            .failures
            .first()
            .map(|(r, m)| format!("replicate {r}: {m}"))
            .unwrap_or_default();
        return Err(Error::ExperimentFailed {
            failed: sample.failures.len(),
            total: sample.failures.len() + sample.stats.len(),
            first,
        });
    }
    Ok(())
}

/// Score covariance at `theta` estimated from subjects simulated under `theta`.
pub fn fisher_info_mc(
    model: &ModelSpec,
    theta: Theta,
    x0: f64,
    t_end: f64,
    dt: f64,
    replicates: usize,
    seed: u64,
) -> Result<InfoEstimate> {
    check_replicates(replicates)?;
    let sample = sample_point(model, theta, Subject { x0, t_end }, dt, replicates, seed, 0);
    info_from_sample(&sample, &theta)
}

// Feature layout per replicate: s0, s1, s0^2, s0 s1, s1^2, h00, h01, h11.
const INFO_FEATURES: usize = 8;

pub fn info_from_sample(sample: &PointSample, theta: &Theta) -> Result<InfoEstimate> {
    check_failures(sample)?;
    let mut rows = Vec::with_capacity(sample.stats.len() * INFO_FEATURES);
    for s in &sample.stats {
        let sh = score_hess(s, theta);
        let (a, b) = (sh.score[0], sh.score[1]);
        rows.extend_from_slice(&[
            a,
            b,
            a * a,
            a * b,
            b * b,
            sh.hess[(0, 0)],
            sh.hess[(0, 1)],
            sh.hess[(1, 1)],
        ]);
    }
    // outputs: cov00, cov01, cov11, -h00, -h01, -h11, gap00, gap01, gap11
    let (est, se) = jackknife(&rows, INFO_FEATURES, |m, n| {
        let bessel = n as f64 / (n as f64 - 1.0);
        let c00 = (m[2] - m[0] * m[0]) * bessel;
        let c01 = (m[3] - m[0] * m[1]) * bessel;
        let c11 = (m[4] - m[1] * m[1]) * bessel;
        vec![
            c00,
            c01,
            c11,
            -m[5],
            -m[6],
            -m[7],
            c00 + m[5],
            c01 + m[6],
            c11 + m[7],
        ]
    });
    let sym = |v: &[f64], o: usize| Matrix2::new(v[o], v[o + 1], v[o + 1], v[o + 2]);
    Ok(InfoEstimate {
        matrix: sym(&est, 0),
        mc_se: sym(&se, 0),
        neg_mean_hessian: sym(&est, 3),
        identity_gap: sym(&est, 6),
        identity_se: sym(&se, 6),
        replicates: sample.stats.len(),
        failures: sample.failures.len(),
        design_point: sample.point,
    })
}

/// Mean log density ratio `log f(X | theta0) - log f(X | theta)` over
/// subjects simulated under `theta0`.
#[allow(clippy::too_many_arguments)]
pub fn kl_mc(
    model: &ModelSpec,
    theta0: Theta,
    theta: Theta,
    x0: f64,
    t_end: f64,
    dt: f64,
    replicates: usize,
    seed: u64,
) -> Result<KlEstimate> {
    check_replicates(replicates)?;
    let sample = sample_point(
        model,
        theta0,
        Subject { x0, t_end },
        dt,
        replicates,
        seed,
        0,
    );
    kl_from_sample(&sample, &theta0, &theta)
}

pub fn kl_from_sample(sample: &PointSample, theta0: &Theta, theta: &Theta) -> Result<KlEstimate> {
    check_failures(sample)?;
    let ratios: Vec<f64> = sample
        .stats
        .iter()
        .map(|s| log_density_ratio(s, theta0, theta))
        .collect();
    let (est, se) = jackknife(&ratios, 1, |m, _| vec![m[0]]);
    Ok(KlEstimate {
        value: est[0],
        mc_se: se[0],
        theta0: *theta0,
        theta: *theta,
        replicates: sample.stats.len(),
        failures: sample.failures.len(),
        design_point: sample.point,
    })
}
