//! Sufficient statistics of a path.
//!
//! `U = sum b(X_k)/sigma^2(X_k) (X_{k+1} - X_k)` and
//! `V = sum b(X_k)^2/sigma^2(X_k) D_k`, both with left-endpoint (Ito)
//! evaluation.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::simulate::Path;
use crate::sum::CompensatedSum;

/// Floor on `sigma^2` below which a grid point is rejected.
pub const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuffStats {
    pub u: f64,
    pub v: f64,
    pub subject_index: usize,
}

impl SuffStats {
    /// Validated constructor for externally supplied statistics.
    pub fn new(u: f64, v: f64, subject_index: usize) -> Result<Self> {
        if !u.is_finite() || !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need finite U and V >= 0, got U = {u}, V = {v}"
            )));
        }
        Ok(Self {
            u,
            v,
            subject_index,
        })
    }
}

/// `U = phi U1 + U2` with `U1 = V` and `U2` the residual martingale part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuffStatsDecomposition {
    pub u1: f64,
    pub u2: f64,
    pub phi: f64,
}

pub fn compute_suff_stats(path: &Path, model: &ModelSpec) -> Result<SuffStats> {
    let (t, x) = (path.times(), path.values());
    let mut u = CompensatedSum::new();
    let mut v = CompensatedSum::new();
    for k in 0..path.steps() {
        let (b, s2) = coefficients(model, x[k])?;
        u.add(b / s2 * (x[k + 1] - x[k]));
        v.add(b * b / s2 * (t[k + 1] - t[k]));
    }
    let (u, v) = (u.value(), v.value());
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::NonFiniteObjective(format!(
            "subject {}: U = {u}, V = {v}",
            path.subject_index
        )));
    }
    Ok(SuffStats {
        u,
        v,
        subject_index: path.subject_index,
    })
}

pub fn decompose(
    path: &Path,
    model: &ModelSpec,
    stats: &SuffStats,
) -> Result<SuffStatsDecomposition> {
    let phi = path.phi.ok_or(Error::MissingPhi)?;
    let (t, x) = (path.times(), path.values());
    let mut u1 = CompensatedSum::new();
    for k in 0..path.steps() {
        let (b, s2) = coefficients(model, x[k])?;
        u1.add(b * b / s2 * (t[k + 1] - t[k]));
    }
    let u1 = u1.value();
    Ok(SuffStatsDecomposition {
        u1,
        u2: stats.u - phi * u1,
        phi,
    })
}

#[inline]
fn coefficients(model: &ModelSpec, x: f64) -> Result<(f64, f64)> {
    let sigma = model.sigma(x);
    let s2 = sigma * sigma;
    if !(s2 >= SIGMA2_FLOOR) {
        return Err(Error::DegenerateDiffusion { x, sigma });
    }
    Ok((model.b(x), s2))
}
