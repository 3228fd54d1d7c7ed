//! Replicated fit experiments (consistency and asymptotic normality) and the
//! moment-continuity probe.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mle::{fit_mle, BoundaryFlags, FitOptions};
use crate::model::{converging_points, Design, ModelSpec, ParamSpace, Subject, Theta};
use crate::simulate::simulate_ensemble;
use crate::suffstats::compute_suff_stats;

use super::info::{fisher_info_mc, sample_point};
use super::limits::{averaged_limits, doubling_schedule, LimitsConfig, LimitsTable};
use super::stat::{jackknife, ks_standard_normal, quantile, KsResult};

/// Seeds for auxiliary estimates are offset from the experiment seed so
/// their streams never coincide with the fits' streams.
const INFO_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Largest tolerated fraction of failed replicates per sample size.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignFamily {
    Iid {
        x0: f64,
        t_end: f64,
    },
    /// Subject `i` at `(x_inf + a / i, t_inf + b / i)`.
    Converging {
        x_inf: f64,
        a: f64,
        t_inf: f64,
        b: f64,
    },
}

impl DesignFamily {
    pub fn design(&self, n: usize, dt: f64, seed: u64) -> Result<Design> {
        match *self {
            DesignFamily::Iid { x0, t_end } => Design::iid(n, x0, t_end, dt, seed),
            DesignFamily::Converging { x_inf, a, t_inf, b } => {
                Design::converging(n, x_inf, a, t_inf, b, dt, seed)
            }
        }
    }

    pub fn limit_point(&self) -> Subject {
        match *self {
            DesignFamily::Iid { x0, t_end } => Subject { x0, t_end },
            DesignFamily::Converging { x_inf, t_inf, .. } => Subject {
                x0: x_inf,
                t_end: t_inf,
            },
        }
    }

    pub fn points(&self, n: usize) -> Vec<Subject> {
        match *self {
            DesignFamily::Iid { x0, t_end } => vec![Subject { x0, t_end }; n],
            DesignFamily::Converging { x_inf, a, t_inf, b } => {
                converging_points(n, x_inf, a, t_inf, b)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub theta0: Theta,
    pub space: ParamSpace,
    pub design: DesignFamily,
    pub dt: f64,
    pub n_schedule: Vec<usize>,
    pub replicates: usize,
    /// Replicates per design point for the information plug-in.
    pub info_replicates: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub n: usize,
    pub theta_hat: Theta,
    /// `sqrt(n) L (theta_hat - theta0)` with `L` the symmetric square root
    /// of the information plug-in.
    pub z: [f64; 2],
    pub wald_se: Option<[f64; 2]>,
    pub boundary: BoundaryFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub n: usize,
    pub fits: usize,
    pub failures: usize,
    pub med_err: f64,
    pub p90_err: f64,
    pub ks_mu: KsResult,
    pub ks_omega2: KsResult,
    /// Fraction of fits whose 95% Wald interval covers the truth; fits
    /// without an interval count as misses.
    pub cov_mu: f64,
    pub cov_omega2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: &'static str,
    pub seed: u64,
    pub theta0: Theta,
    /// Information plug-in used for the z-scores.
    pub info: Matrix2<f64>,
    pub records: Vec<ReplicateRecord>,
    pub summaries: Vec<LevelSummary>,
    /// `(n, rep, message)` of failed replicates.
    pub failures: Vec<(usize, usize, String)>,
    /// Averaged-limit table, present for converging designs.
    pub limits: Option<LimitsTable>,
}

impl ExperimentReport {
    pub fn records_for(&self, n: usize) -> impl Iterator<Item = &ReplicateRecord> {
        self.records.iter().filter(move |r| r.n == n)
    }

    pub fn summary_for(&self, n: usize) -> Option<&LevelSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }
}

/// Symmetric square root of a positive-definite 2x2 matrix.
pub fn sqrt_spd(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let eig = SymmetricEigen::new(*m);
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "information matrix is not positive definite: eigenvalues {:?}",
            eig.eigenvalues.as_slice()
        )));
    }
    let root = eig.eigenvalues.map(f64::sqrt);
    Ok(eig.eigenvectors * Matrix2::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Standardized errors `sqrt(n) L (theta_hat - center)`.
pub fn z_scores(theta_hat: &Theta, center: &Theta, n: usize, info_sqrt: &Matrix2<f64>) -> [f64; 2] {
    let d = Vector2::new(theta_hat.mu - center.mu, theta_hat.omega2 - center.omega2);
    let z = info_sqrt * d * (n as f64).sqrt();
    [z[0], z[1]]
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.replicates == 0 {
        return Err(Error::EmptyExperiment);
    }
    if cfg.n_schedule.is_empty() || cfg.n_schedule.contains(&0) {
        return Err(Error::InvalidArgument(
            "n schedule must be non-empty and positive".into(),
        ));
    }
    if !cfg.space.interior(&cfg.theta0) {
        return Err(Error::ThetaNotInterior(format!(
            "({}, {}) not inside [{}, {}] x [{}, {}]",
            cfg.theta0.mu,
            cfg.theta0.omega2,
            cfg.space.mu_lo,
            cfg.space.mu_hi,
            cfg.space.omega2_lo,
            cfg.space.omega2_hi
        )));
    }
    // surfaces design errors before any simulation
    let n_max = *cfg.n_schedule.iter().max().expect("non-empty");
    cfg.design.design(n_max, cfg.dt, cfg.seed)?;
    Ok(())
}

/// Information plug-in at `theta0`: single-point MC for iid designs, the
/// design average at the largest `n` for converging designs.
fn information(cfg: &ExperimentConfig) -> Result<(Matrix2<f64>, Option<LimitsTable>)> {
    let seed = cfg.seed.wrapping_add(INFO_SEED_OFFSET);
    match cfg.design {
        DesignFamily::Iid { x0, t_end } => {
            let est = fisher_info_mc(
                &cfg.model,
                cfg.theta0,
                x0,
                t_end,
                cfg.dt,
                cfg.info_replicates,
                seed,
            )?;
            Ok((est.matrix, None))
        }
        DesignFamily::Converging { .. } => {
            let n_max = *cfg.n_schedule.iter().max().expect("non-empty");
            let table = averaged_limits(&LimitsConfig {
                model: cfg.model.clone(),
                theta0: cfg.theta0,
                theta: cfg.theta0,
                points: cfg.design.points(n_max),
                limit: cfg.design.limit_point(),
                dt: cfg.dt,
                replicates: cfg.info_replicates,
                limit_replicates: cfg.info_replicates,
                n_schedule: doubling_schedule(n_max),
                seed,
            })?;
            let info = table.row(n_max).expect("schedule ends at n_max").avg_info;
            Ok((info, Some(table)))
        }
    }
}

type RepOutcome = std::result::Result<(Theta, Option<[f64; 2]>, BoundaryFlags), String>;

fn run_fits(cfg: &ExperimentConfig, kind: &'static str) -> Result<ExperimentReport> {
    validate(cfg)?;
    let (info, limits) = information(cfg)?;
    let root = sqrt_spd(&info)?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (level, &n) in cfg.n_schedule.iter().enumerate() {
        let design = cfg.design.design(n, cfg.dt, cfg.seed)?;
        let outcomes: Vec<RepOutcome> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let replicate_id = ((level as u64) << 32) | r as u64;
                let paths = simulate_ensemble(&cfg.model, cfg.theta0, &design, replicate_id)
                    .map_err(|e| e.to_string())?;
                let stats = paths
                    .iter()
                    .map(|p| compute_suff_stats(p, &cfg.model))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.to_string())?;
                let fit = fit_mle(&stats, &cfg.space, &cfg.fit).map_err(|e| e.to_string())?;
                Ok((fit.theta_hat, fit.wald_se, fit.boundary))
            })
            .collect();

        let mut level_records = Vec::with_capacity(cfg.replicates);
        let mut level_failures = 0;
        for (rep, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok((theta_hat, wald_se, boundary)) => level_records.push(ReplicateRecord {
                    rep,
                    n,
                    theta_hat,
                    z: z_scores(&theta_hat, &cfg.theta0, n, &root),
                    wald_se,
                    boundary,
                }),
                Err(msg) => {
                    level_failures += 1;
                    failures.push((n, rep, msg));
                }
            }
        }
        if level_failures as f64 > MAX_FAILURE_RATE * cfg.replicates as f64
            || level_records.is_empty()
        {
            let first = failures
                .iter()
                .find(|f| f.0 == n)
                .map(|f| format!("n = {}, rep {}: {}", f.0, f.1, f.2))
                .unwrap_or_default();
            return Err(Error::ExperimentFailed {
                failed: level_failures,
                total: cfg.replicates,
                first,
            });
        }
        summaries.push(summarize(n, &level_records, level_failures, &cfg.theta0));
        records.extend(level_records);
    }
    Ok(ExperimentReport {
        kind,
        seed: cfg.seed,
        theta0: cfg.theta0,
        info,
        records,
        summaries,
        failures,
        limits,
    })
}

fn summarize(n: usize, recs: &[ReplicateRecord], failures: usize, theta0: &Theta) -> LevelSummary {
    let errs: Vec<f64> = recs.iter().map(|r| r.theta_hat.distance(theta0)).collect();
    let z_mu: Vec<f64> = recs.iter().map(|r| r.z[0]).collect();
    let z_w: Vec<f64> = recs.iter().map(|r| r.z[1]).collect();
    let covers = |coord: usize| {
        let hits = recs
            .iter()
            .filter(|r| {
                r.wald_se.is_some_and(|se| {
                    let (est, truth) = match coord {
                        0 => (r.theta_hat.mu, theta0.mu),
                        _ => (r.theta_hat.omega2, theta0.omega2),
                    };
                    (est - truth).abs() <= Z_975 * se[coord]
                })
            })
            .count();
        hits as f64 / recs.len() as f64
    };
    LevelSummary {
        n,
        fits: recs.len(),
        failures,
        med_err: quantile(&errs, 0.5),
        p90_err: quantile(&errs, 0.9),
        ks_mu: ks_standard_normal(&z_mu),
        ks_omega2: ks_standard_normal(&z_w),
        cov_mu: covers(0),
        cov_omega2: covers(1),
    }
}

/// `R` independent fits at every `n` of the schedule; summaries report error
/// quantiles of `|theta_hat - theta0|`.
pub fn run_consistency_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_fits(cfg, "consistency")
}

/// `R` independent fits; summaries report KS tests of the standardized
/// errors against N(0, 1) and Wald coverage.
pub fn run_normality_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_fits(cfg, "normality")
}

#[derive(Debug, Clone)]
pub struct ContinuityConfig {
    pub model: ModelSpec,
    pub theta0: Theta,
    pub x_tilde: f64,
    pub t_tilde: f64,
    /// The sequence is `(x_tilde + a / m, t_tilde + b / m)`.
    pub a: f64,
    pub b: f64,
    pub psi: f64,
    pub xi: f64,
    pub powers: Vec<u32>,
    pub m_schedule: Vec<usize>,
    pub replicates: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityRow {
    /// `None` for the limit point.
    pub m: Option<usize>,
    pub k: u32,
    pub x0: f64,
    pub t_end: f64,
    pub estimate: f64,
    pub mc_se: f64,
    pub gap: f64,
    pub gap_se: f64,
}

/// `h(u, v) = exp(psi u / (1 + xi v))`.
pub fn moment_h(u: f64, v: f64, psi: f64, xi: f64) -> f64 {
    (psi * u / (1.0 + xi * v)).exp()
}

/// Monte Carlo `E[h(U, V)^k]` along `(x_m, T_m)` and at the limit point.
pub fn run_moment_continuity_probe(cfg: &ContinuityConfig) -> Result<Vec<ContinuityRow>> {
    if cfg.replicates < 2 {
        return Err(Error::EmptyExperiment);
    }
    if !(cfg.xi > 0.0) || !cfg.psi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite psi and xi > 0, got psi = {}, xi = {}",
            cfg.psi, cfg.xi
        )));
    }
    if cfg.powers.is_empty() || cfg.powers.contains(&0) || cfg.m_schedule.contains(&0) {
        return Err(Error::InvalidArgument(
            "powers and m schedule must be positive".into(),
        ));
    }
    let moments = |point: Subject, stream: u64| -> Result<Vec<(f64, f64)>> {
        let sample = sample_point(
            &cfg.model,
            cfg.theta0,
            point,
            cfg.dt,
            cfg.replicates,
            cfg.seed,
            stream,
        );
        if let Some((r, msg)) = sample.failures.first() {
            return Err(Error::ExperimentFailed {
                failed: sample.failures.len(),
                total: cfg.replicates,
                first: format!("replicate {r}: {msg}"),
            });
        }
        let width = cfg.powers.len();
        let mut rows = Vec::with_capacity(sample.stats.len() * width);
        for s in &sample.stats {
            let h = moment_h(s.u, s.v, cfg.psi, cfg.xi);
            rows.extend(cfg.powers.iter().map(|&k| h.powi(k as i32)));
        }
        let (est, se) = jackknife(&rows, width, |m, _| m.to_vec());
        Ok(est.into_iter().zip(se).collect())
    };

    let limit = Subject {
        x0: cfg.x_tilde,
        t_end: cfg.t_tilde,
    };
    let at_limit = moments(limit, 0)?;
    let mut rows: Vec<ContinuityRow> = cfg
        .powers
        .iter()
        .zip(&at_limit)
        .map(|(&k, &(estimate, mc_se))| ContinuityRow {
            m: None,
            k,
            x0: limit.x0,
            t_end: limit.t_end,
            estimate,
            mc_se,
            gap: 0.0,
            gap_se: 0.0,
        })
        .collect();
    for &m in &cfg.m_schedule {
        let point = Subject {
            x0: cfg.x_tilde + cfg.a / m as f64,
            t_end: cfg.t_tilde + cfg.b / m as f64,
        };
        let est = moments(point, m as u64)?;
        for ((&k, &(estimate, mc_se)), &(lim, lim_se)) in cfg.powers.iter().zip(&est).zip(&at_limit)
        {
            rows.push(ContinuityRow {
                m: Some(m),
                k,
                x0: point.x0,
                t_end: point.t_end,
                estimate,
                mc_se,
                gap: (estimate - lim).abs(),
                gap_se: mc_se.hypot(lim_se),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_model;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            model: builtin_model("unit").unwrap(),
            theta0: Theta::new(1.0, 0.5).unwrap(),
            space: ParamSpace::new(-5.0, 5.0, 0.0, 5.0).unwrap(),
            design: DesignFamily::Iid {
                x0: 0.0,
                t_end: 1.0,
            },
            dt: 0.05,
            n_schedule: vec![20, 80],
            replicates: 40,
            info_replicates: 500,
            seed: 9,
            fit: FitOptions::default(),
        }
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = sqrt_spd(&Matrix2::new(4.0, 0.0, 0.0, 9.0)).unwrap();
        assert!((r - Matrix2::new(2.0, 0.0, 0.0, 3.0)).abs().max() < 1e-12);
        let m = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let r = sqrt_spd(&m).unwrap();
        assert!((r * r - m).abs().max() < 1e-12);
        assert!(sqrt_spd(&Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn refuses_boundary_truth() {
        let mut cfg = small_cfg();
        cfg.theta0 = Theta::new(1.0, 0.0).unwrap();
        assert!(matches!(
            run_consistency_experiment(&cfg),
            Err(Error::ThetaNotInterior(_))
        ));
    }

    #[test]
    fn refuses_empty_experiment() {
        let mut cfg = small_cfg();
        cfg.replicates = 0;
        assert_eq!(
            run_normality_experiment(&cfg).unwrap_err(),
            Error::EmptyExperiment
        );
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = small_cfg();
        let a = run_consistency_experiment(&cfg).unwrap();
        let b = run_consistency_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 80);
        assert_eq!(a.summaries.len(), 2);
    }

    #[test]
    fn constant_sequence_gap_is_noise() {
        let cfg = ContinuityConfig {
            model: builtin_model("unit").unwrap(),
            theta0: Theta::new(1.0, 0.5).unwrap(),
            x_tilde: 0.0,
            t_tilde: 1.0,
            a: 0.0,
            b: 0.0,
            psi: 1.0,
            xi: 1.0,
            powers: vec![1, 2],
            m_schedule: vec![1, 2, 4],
            replicates: 4000,
            dt: 0.05,
            seed: 1,
        };
        let rows = run_moment_continuity_probe(&cfg).unwrap();
        assert_eq!(rows.len(), 8);
        for r in rows.iter().filter(|r| r.m.is_some()) {
            assert!(r.gap <= 4.0 * r.gap_se, "{r:?}");
        }
    }
}
