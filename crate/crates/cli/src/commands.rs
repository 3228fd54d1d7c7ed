use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use remle_core::io::{
    read_paths, write_continuity, write_fit, write_limits, write_paths, write_replicates,
    write_stats, write_summary,
};
use remle_core::lab::{
    averaged_limits, doubling_schedule, run_consistency_experiment, run_moment_continuity_probe,
    run_normality_experiment, ContinuityConfig, DesignFamily, ExperimentConfig, ExperimentReport,
    LimitsConfig,
};
use remle_core::{
    builtin_model, compute_suff_stats, fit_mle, simulate_ensemble, Design, Error, FitOptions,
    ModelSpec, ParamSpace, SuffStats, Theta,
};
use thiserror::Error as ThisError;

use crate::config::{resolve_seed, ConfigError, RunConfig, Value, SEED_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Consistency,
    Normality,
    Noniid,
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Experiment(ExperimentKind),
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Core(e) => core_exit_code(e),
            CliError::Io { .. } => 2,
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Subject { source, .. } => core_exit_code(source),
        Error::SimulationDiverged { .. }
        | Error::DegenerateDiffusion { .. }
        | Error::AllDegenerate
        | Error::NonFiniteObjective(_)
        | Error::ExperimentFailed { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Runs one subcommand; returns the one-line summary.
pub fn run(cmd: Command, mut cfg: RunConfig, ov: &Overrides) -> Result<String, CliError> {
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(ov.seed, &cfg, env.as_deref())?;
    cfg.set("seed", Value::Seed(seed))?;
    let out = match &ov.out {
        Some(p) => p.clone(),
        None => PathBuf::from(cfg.text("output_dir")?),
    };
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    match cmd {
        Command::Simulate => cmd_simulate(&cfg, seed, &out),
        Command::Fit => cmd_fit(&cfg, seed, &out),
        Command::Experiment(kind) => cmd_experiment(kind, &cfg, seed, &out),
    }
}

fn io_error(path: &FsPath, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file<F>(dir: &FsPath, name: &str, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> remle_core::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| CliError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    w.flush().map_err(|e| io_error(&path, e))
}

fn model(cfg: &RunConfig) -> Result<ModelSpec, CliError> {
    Ok(builtin_model(cfg.text("model")?)?)
}

fn theta0(cfg: &RunConfig) -> Result<Theta, CliError> {
    Ok(Theta::new(cfg.real("mu0")?, cfg.real("omega2_0")?)?)
}

fn space(cfg: &RunConfig) -> Result<ParamSpace, CliError> {
    Ok(ParamSpace::new(
        cfg.real("mu_lo")?,
        cfg.real("mu_hi")?,
        cfg.real("omega2_lo")?,
        cfg.real("omega2_hi")?,
    )?)
}

fn design_family(cfg: &RunConfig) -> Result<DesignFamily, CliError> {
    match cfg.text("design")? {
        "iid" => Ok(DesignFamily::Iid {
            x0: cfg.real("x0")?,
            t_end: cfg.real("t_end")?,
        }),
        _ => converging_family(cfg),
    }
}

fn converging_family(cfg: &RunConfig) -> Result<DesignFamily, CliError> {
    Ok(DesignFamily::Converging {
        x_inf: cfg.real("x_inf")?,
        a: cfg.real("a")?,
        t_inf: cfg.real("t_inf")?,
        b: cfg.real("b")?,
    })
}

fn simulated_stats(
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Vec<remle_core::Path>, Vec<SuffStats>), CliError> {
    let model = model(cfg)?;
    let theta0 = theta0(cfg)?;
    let design: Design = design_family(cfg)?.design(cfg.count("n")?, cfg.real("dt")?, seed)?;
    let paths = simulate_ensemble(&model, theta0, &design, 0)?;
    let stats = stats_of(&paths, &model)?;
    Ok((paths, stats))
}

fn stats_of(paths: &[remle_core::Path], model: &ModelSpec) -> Result<Vec<SuffStats>, CliError> {
    Ok(paths
        .iter()
        .map(|p| compute_suff_stats(p, model))
        .collect::<remle_core::Result<Vec<_>>>()?)
}

pub fn cmd_simulate(cfg: &RunConfig, seed: u64, out: &FsPath) -> Result<String, CliError> {
    let (paths, stats) = simulated_stats(cfg, seed)?;
    write_file(out, "paths.csv", |w| write_paths(w, &paths))?;
    write_file(out, "stats.csv", |w| write_stats(w, &stats))?;
    let points: usize = paths.iter().map(|p| p.times().len()).sum();
    Ok(format!(
        "simulate: {} subjects, {} observations, seed {seed} -> {}",
        paths.len(),
        points,
        out.display()
    ))
}

/// Fits ingested paths when `input` is set, otherwise a fresh simulation.
pub fn cmd_fit(cfg: &RunConfig, seed: u64, out: &FsPath) -> Result<String, CliError> {
    let space = space(cfg)?;
    let stats = if cfg.contains("input") {
        let input = PathBuf::from(cfg.text("input")?);
        let file =
            File::open(&input).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
        let paths = read_paths(std::io::BufReader::new(file))?;
        stats_of(&paths, &model(cfg)?)?
    } else {
        simulated_stats(cfg, seed)?.1
    };
    let fit = fit_mle(&stats, &space, &FitOptions::default())?;
    write_file(out, "stats.csv", |w| write_stats(w, &stats))?;
    write_file(out, "fit.csv", |w| write_fit(w, &fit))?;
    Ok(format!(
        "fit: n = {}, mu_hat = {}, omega2_hat = {}, loglik = {}, boundary = {}",
        fit.n, fit.theta_hat.mu, fit.theta_hat.omega2, fit.loglik, fit.boundary
    ))
}

fn experiment_config(
    cfg: &RunConfig,
    seed: u64,
    design: DesignFamily,
) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig {
        model: model(cfg)?,
        theta0: theta0(cfg)?,
        space: space(cfg)?,
        design,
        dt: cfg.real("dt")?,
        n_schedule: cfg.counts("n_schedule")?,
        replicates: cfg.count("replicates")?,
        info_replicates: cfg.count("info_replicates")?,
        seed,
        fit: FitOptions::default(),
    })
}

fn write_echo(cfg: &RunConfig, out: &FsPath) -> Result<(), CliError> {
    let mut echo = cfg.clone();
    echo.remove("output_dir");
    let text = echo.emit();
    write_file(out, "config.txt", |w| Ok(w.write_all(text.as_bytes())?))
}

fn write_report(report: &ExperimentReport, out: &FsPath) -> Result<(), CliError> {
    write_file(out, "replicates.csv", |w| write_replicates(w, report))?;
    write_file(out, "summary.csv", |w| write_summary(w, report))
}

fn report_line(report: &ExperimentReport, out: &FsPath) -> String {
    let last = report.summaries.last().expect("non-empty schedule");
    format!(
        "experiment {}: {} fits, {} failed; n = {}: med_err = {}, ks p = ({}, {}), coverage = ({}, {}) -> {}",
        report.kind,
        report.records.len(),
        report.failures.len(),
        last.n,
        last.med_err,
        last.ks_mu.p_value,
        last.ks_omega2.p_value,
        last.cov_mu,
        last.cov_omega2,
        out.display()
    )
}

pub fn cmd_experiment(
    kind: ExperimentKind,
    cfg: &RunConfig,
    seed: u64,
    out: &FsPath,
) -> Result<String, CliError> {
    let line = match kind {
        ExperimentKind::Consistency | ExperimentKind::Normality => {
            let ecfg = experiment_config(cfg, seed, design_family(cfg)?)?;
            let report = if kind == ExperimentKind::Consistency {
                run_consistency_experiment(&ecfg)?
            } else {
                run_normality_experiment(&ecfg)?
            };
            write_report(&report, out)?;
            report_line(&report, out)
        }
        ExperimentKind::Noniid => {
            if cfg.contains("design") && cfg.text("design")? != "converging" {
                return Err(CliError::Config(ConfigError::ParseError {
                    line: cfg.line_of("design").unwrap_or(0),
                    message: "the noniid experiment needs `design = converging`".into(),
                }));
            }
            let family = converging_family(cfg)?;
            let ecfg = experiment_config(cfg, seed, family)?;
            let n_max = ecfg.n_schedule.iter().copied().max().unwrap_or(0);
            let info_reps = ecfg.info_replicates;
            let table = averaged_limits(&LimitsConfig {
                model: ecfg.model.clone(),
                theta0: ecfg.theta0,
                theta: Theta::new(cfg.real("mu1")?, cfg.real("omega2_1")?)?,
                points: family.points(n_max),
                limit: family.limit_point(),
                dt: ecfg.dt,
                replicates: info_reps,
                limit_replicates: cfg.count_or("limit_replicates", info_reps)?,
                n_schedule: doubling_schedule(n_max),
                seed,
            })?;
            let report = run_normality_experiment(&ecfg)?;
            write_file(out, "limits.csv", |w| write_limits(w, &table))?;
            write_report(&report, out)?;
            report_line(&report, out)
        }
        ExperimentKind::Continuity => {
            let ccfg = ContinuityConfig {
                model: model(cfg)?,
                theta0: theta0(cfg)?,
                x_tilde: cfg.real("x_inf")?,
                t_tilde: cfg.real("t_inf")?,
                a: cfg.real("a")?,
                b: cfg.real("b")?,
                psi: cfg.real("psi")?,
                xi: cfg.real("xi")?,
                powers: cfg
                    .counts("powers")?
                    .into_iter()
                    .map(|k| u32::try_from(k).unwrap_or(u32::MAX))
                    .collect(),
                m_schedule: cfg.counts("m_schedule")?,
                replicates: cfg.count("replicates")?,
                dt: cfg.real("dt")?,
                seed,
            };
            let rows = run_moment_continuity_probe(&ccfg)?;
            write_file(out, "continuity.csv", |w| write_continuity(w, &rows))?;
            let worst = rows
                .iter()
                .filter(|r| r.m.is_some())
                .map(|r| r.gap / r.gap_se.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            format!(
                "experiment continuity: {} rows, largest gap/se = {worst} -> {}",
                rows.len(),
                out.display()
            )
        }
    };
    write_echo(cfg, out)?;
    Ok(line)
}
