//! Maximum-likelihood fit over a compact rectangle.
//!
//! For fixed `omega2` the log-likelihood is a concave quadratic in `mu`, so
//! `mu` is profiled out in closed form. The profile is scanned on a coarse
//! grid, refined by golden-section search, and an interior optimum is then
//! polished with Newton steps on the full two-parameter objective.

use std::fmt;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::likelihood::{total_derivatives, total_loglik};
use crate::model::{ParamSpace, Theta};
use crate::suffstats::SuffStats;
use crate::sum::CompensatedSum;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Final golden-section bracket width relative to `omega2_hi - omega2_lo`.
    pub bracket_rel_tol: f64,
    /// Intervals in the coarse scan of the profile before golden section.
    pub scan_intervals: usize,
    pub max_newton_steps: usize,
    /// Profile differences below this are treated as ties, resolved toward
    /// the smaller `omega2`.
    pub flat_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bracket_rel_tol: 1e-6,
            scan_intervals: 64,
            max_newton_steps: 20,
            flat_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundaryFlags {
    pub mu_lo: bool,
    pub mu_hi: bool,
    pub omega2_lo: bool,
    pub omega2_hi: bool,
}

impl BoundaryFlags {
    pub fn any(&self) -> bool {
        self.mu_lo || self.mu_hi || self.omega2_lo || self.omega2_hi
    }

    fn at(theta: &Theta, space: &ParamSpace) -> Self {
        Self {
            mu_lo: theta.mu <= space.mu_lo,
            mu_hi: theta.mu >= space.mu_hi,
            omega2_lo: theta.omega2 <= space.omega2_lo,
            omega2_hi: theta.omega2 >= space.omega2_hi,
        }
    }
}

/// `none`, or the active bounds joined by `|`.
impl fmt::Display for BoundaryFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.mu_lo, "mu_lo"),
            (self.mu_hi, "mu_hi"),
            (self.omega2_lo, "omega2_lo"),
            (self.omega2_hi, "omega2_hi"),
        ]
        .iter()
        .filter_map(|&(on, name)| on.then_some(name))
        .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("|"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub n: usize,
    pub theta_hat: Theta,
    pub loglik: f64,
    /// Sup-norm of the total score at `theta_hat`.
    pub score_norm: f64,
    pub hess: Matrix2<f64>,
    pub boundary: BoundaryFlags,
    /// Standard errors from the inverse observed information; absent on
    /// the boundary or when the Hessian is not negative definite.
    pub wald_se: Option<[f64; 2]>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMu {
    pub mu: f64,
    pub clamped: bool,
}

/// `argmax_mu` of the ensemble log-likelihood at fixed `omega2`, clamped into
/// `[mu_lo, mu_hi]`.
pub fn profile_mu(omega2: f64, all_stats: &[SuffStats], space: &ParamSpace) -> Result<ProfileMu> {
    if all_stats.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for s in all_stats {
        let a = 1.0 + omega2 * s.v;
        num.add(s.u / a);
        den.add(s.v / a);
    }
    let den = den.value();
    if !(den > 0.0) {
        return Err(Error::AllDegenerate);
    }
    let raw = num.value() / den;
    let mu = raw.clamp(space.mu_lo, space.mu_hi);
    Ok(ProfileMu {
        mu,
        clamped: mu != raw,
    })
}

pub fn fit_mle(all_stats: &[SuffStats], space: &ParamSpace, opts: &FitOptions) -> Result<MleFit> {
    if all_stats.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if all_stats.iter().all(|s| s.v == 0.0) {
        return Err(Error::AllDegenerate);
    }
    let profile = |w: f64| -> Result<(f64, f64)> {
        let mu = profile_mu(w, all_stats, space)?.mu;
        let ll = total_loglik(all_stats, &Theta { mu, omega2: w })?;
        if !ll.is_finite() {
            return Err(Error::NonFiniteObjective(format!(
                "log-likelihood {ll} at (mu, omega2) = ({mu}, {w})"
            )));
        }
        Ok((mu, ll))
    };

    let (lo, hi) = (space.omega2_lo, space.omega2_hi);
    let width = hi - lo;
    let mut iterations = 0;

    // Coarse scan, keeping the first maximum.
    let m = opts.scan_intervals.max(2);
    let grid = |j: usize| {
        if j == m {
            hi
        } else {
            lo + width * j as f64 / m as f64
        }
    };
    let mut evaluated = Vec::with_capacity(m + 64);
    let mut best_j = 0;
    for j in 0..=m {
        let w = grid(j);
        evaluated.push(Candidate::new(w, profile(w)?.1));
        if evaluated[j].g > evaluated[best_j].g {
            best_j = j;
        }
    }

    // Golden section inside the neighbouring scan cells.
    let mut a = grid(best_j.saturating_sub(1));
    let mut b = grid((best_j + 1).min(m));
    let target = opts.bracket_rel_tol * width;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = profile(c)?.1;
    let mut gd = profile(d)?.1;
    evaluated.push(Candidate::new(c, gc));
    evaluated.push(Candidate::new(d, gd));
    while b - a > target {
        iterations += 1;
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = profile(c)?.1;
            evaluated.push(Candidate::new(c, gc));
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = profile(d)?.1;
            evaluated.push(Candidate::new(d, gd));
        }
    }
    for w in [a, b] {
        evaluated.push(Candidate::new(w, profile(w)?.1));
    }
    let best = select(&evaluated, opts.flat_tol);

    let mut theta = Theta {
        mu: profile(best.w)?.0,
        omega2: best.w,
    };
    let mut loglik = best.g;

    if !BoundaryFlags::at(&theta, space).any() {
        for _ in 0..opts.max_newton_steps {
            let d = total_derivatives(all_stats, &theta)?;
            let neg = -d.hess;
            if !(neg[(0, 0)] > 0.0 && neg.determinant() > 0.0) {
                break;
            }
            let Some(inv) = neg.try_inverse() else { break };
            let step = inv * d.score;
            let cand = space.project(Theta {
                mu: theta.mu + step[0],
                omega2: theta.omega2 + step[1],
            });
            if cand == theta {
                break;
            }
            let ll = total_loglik(all_stats, &cand)?;
            if !(ll >= loglik) {
                break;
            }
            iterations += 1;
            theta = cand;
            loglik = ll;
        }
    }

    let d = total_derivatives(all_stats, &theta)?;
    let boundary = BoundaryFlags::at(&theta, space);
    let wald_se = if boundary.any() {
        None
    } else {
        (-d.hess).try_inverse().and_then(|cov| {
            (cov[(0, 0)] > 0.0 && cov[(1, 1)] > 0.0 && cov.determinant() > 0.0)
                .then(|| [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()])
        })
    };
    Ok(MleFit {
        n: all_stats.len(),
        theta_hat: theta,
        loglik,
        score_norm: d.score[0].abs().max(d.score[1].abs()),
        hess: d.hess,
        boundary,
        wald_se,
        iterations,
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    w: f64,
    g: f64,
}

impl Candidate {
    fn new(w: f64, g: f64) -> Self {
        Self { w, g }
    }
}

/// Smallest `omega2` whose profile value is within `flat_tol` of the best.
fn select(evaluated: &[Candidate], flat_tol: f64) -> Candidate {
    let top = evaluated
        .iter()
        .map(|c| c.g)
        .fold(f64::NEG_INFINITY, f64::max);
    *evaluated
        .iter()
        .filter(|c| c.g >= top - flat_tol)
        .min_by(|x, y| x.w.total_cmp(&y.w))
        .expect("at least one candidate")
}
