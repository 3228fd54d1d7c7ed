//! Design-averaged information and divergence for converging non-iid designs.
//!
//! For design points `(x^k, T_k) -> (x_inf, T_inf)` the Cesàro averages
//! `n^-1 sum_k I_k(theta0)` and `n^-1 sum_k K_k(theta0, theta)` tend to the
//! limit-point values. Each distinct design point is estimated once from its
//! own stream, so the averages are linear combinations of independent
//! estimates and their standard errors follow directly.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Subject, Theta};

use super::info::MIN_REPLICATES;
use super::info::{info_from_sample, kl_from_sample, sample_point, InfoEstimate, KlEstimate};

#[derive(Debug, Clone)]
pub struct LimitsConfig {
    pub model: ModelSpec,
    pub theta0: Theta,
    /// Alternative parameter for the divergence `K(theta0, theta)`.
    pub theta: Theta,
    pub points: Vec<Subject>,
    pub limit: Subject,
    pub dt: f64,
    pub replicates: usize,
    pub limit_replicates: usize,
    pub n_schedule: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsRow {
    pub n: usize,
    pub avg_info: Matrix2<f64>,
    pub avg_info_se: Matrix2<f64>,
    pub avg_kl: f64,
    pub avg_kl_se: f64,
    /// Entrywise `|avg_info - limit_info|`.
    pub info_gap: Matrix2<f64>,
    pub info_gap_se: Matrix2<f64>,
    pub kl_gap: f64,
    pub kl_gap_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsTable {
    pub rows: Vec<LimitsRow>,
    pub limit_info: InfoEstimate,
    pub limit_kl: KlEstimate,
}

impl LimitsTable {
    pub fn row(&self, n: usize) -> Option<&LimitsRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

struct PointEstimate {
    point: Subject,
    info: InfoEstimate,
    kl: KlEstimate,
}

fn same_point(a: &Subject, b: &Subject) -> bool {
    a.x0.to_bits() == b.x0.to_bits() && a.t_end.to_bits() == b.t_end.to_bits()
}

pub fn averaged_limits(cfg: &LimitsConfig) -> Result<LimitsTable> {
    let n_max = cfg.n_schedule.iter().copied().max().unwrap_or(0);
    if n_max == 0 || cfg.n_schedule.contains(&0) {
        return Err(Error::InvalidArgument(
            "n schedule must be non-empty and positive".into(),
        ));
    }
    if n_max > cfg.points.len() {
        return Err(Error::InvalidArgument(format!(
            "schedule reaches n = {n_max} but only {} design points given",
            cfg.points.len()
        )));
    }
    if cfg.replicates < MIN_REPLICATES || cfg.limit_replicates < MIN_REPLICATES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATES} replicates per point"
        )));
    }

    // Distinct points in order of first appearance; index 0 is the limit.
    let mut unique: Vec<PointEstimate> = Vec::new();
    let mut assign = Vec::with_capacity(n_max);
    let estimate = |point: Subject, replicates: usize, stream: u64| -> Result<PointEstimate> {
        let sample = sample_point(
            &cfg.model, cfg.theta0, point, cfg.dt, replicates, cfg.seed, stream,
        );
        Ok(PointEstimate {
            point,
            info: info_from_sample(&sample, &cfg.theta0)?,
            kl: kl_from_sample(&sample, &cfg.theta0, &cfg.theta)?,
        })
    };
    unique.push(estimate(cfg.limit, cfg.limit_replicates, 0)?);
    for (k, p) in cfg.points[..n_max].iter().enumerate() {
        match unique.iter().position(|u| same_point(&u.point, p)) {
            Some(j) => assign.push(j),
            None => {
                unique.push(estimate(*p, cfg.replicates, k as u64 + 1)?);
                assign.push(unique.len() - 1);
            }
        }
    }

    let mut schedule = cfg.n_schedule.clone();
    schedule.sort_unstable();
    schedule.dedup();
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in &schedule {
        let mut counts = vec![0usize; unique.len()];
        for &j in &assign[..n] {
            counts[j] += 1;
        }
        let avg_w: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let gap_w: Vec<f64> = avg_w
            .iter()
            .enumerate()
            .map(|(j, w)| if j == 0 { w - 1.0 } else { *w })
            .collect();

        let combine = |w: &[f64], f: &dyn Fn(&PointEstimate) -> (f64, f64)| -> (f64, f64) {
            let mut value = 0.0;
            let mut var = 0.0;
            for (wj, u) in w.iter().zip(&unique) {
                if *wj != 0.0 {
                    let (v, se) = f(u);
                    value += wj * v;
                    var += wj * wj * se * se;
                }
            }
            (value, var.sqrt())
        };
        let entry = |i: usize, j: usize| {
            move |u: &PointEstimate| (u.info.matrix[(i, j)], u.info.mc_se[(i, j)])
        };
        let kl = |u: &PointEstimate| (u.kl.value, u.kl.mc_se);

        let mut avg_info = Matrix2::zeros();
        let mut avg_info_se = Matrix2::zeros();
        let mut info_gap = Matrix2::zeros();
        let mut info_gap_se = Matrix2::zeros();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let (v, se) = combine(&avg_w, &entry(i, j));
            let (g, gse) = combine(&gap_w, &entry(i, j));
            for (a, b) in [(i, j), (j, i)] {
                avg_info[(a, b)] = v;
                avg_info_se[(a, b)] = se;
                info_gap[(a, b)] = g.abs();
                info_gap_se[(a, b)] = gse;
            }
        }
        let (avg_kl, avg_kl_se) = combine(&avg_w, &kl);
        let (kl_gap, kl_gap_se) = combine(&gap_w, &kl);
        rows.push(LimitsRow {
            n,
            avg_info,
            avg_info_se,
            avg_kl,
            avg_kl_se,
            info_gap,
            info_gap_se,
            kl_gap: kl_gap.abs(),
            kl_gap_se,
        });
    }
    let limit = unique.swap_remove(0);
    Ok(LimitsTable {
        rows,
        limit_info: limit.info,
        limit_kl: limit.kl,
    })
}

/// Doubling schedule `1, 2, 4, ...` up to and including `n_max`.
pub fn doubling_schedule(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1;
    while n < n_max {
        out.push(n);
        n *= 2;
    }
    if n_max > 0 {
        out.push(n_max);
    }
    out
}
