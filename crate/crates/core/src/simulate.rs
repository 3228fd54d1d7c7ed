//! Euler–Maruyama paths for `dX = phi b(X) dt + sigma(X) dW`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Design, ModelSpec, RandomEffect, Theta};
use crate::rng::{NormalSource, RngStream};

/// One discretized trajectory.
///
/// `phi` and `seed` are present only for simulator output; ingested paths
/// carry neither.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    values: Vec<f64>,
    pub phi: Option<f64>,
    pub seed: Option<u64>,
    pub subject_index: usize,
}

impl Path {
    /// Builds a path from observed data. Times must start at 0 and be
    /// strictly increasing; at least two points are required.
    pub fn from_observations(
        times: Vec<f64>,
        values: Vec<f64>,
        subject_index: usize,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidArgument(
                "a path needs at least two grid points".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time grid starts at {}, expected 0",
                times[0]
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "time grid not strictly increasing at k = {}",
                k + 1
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at k = {k}"
            )));
        }
        Ok(Self {
            times,
            values,
            phi: None,
            seed: None,
            subject_index,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x0(&self) -> f64 {
        self.values[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("path has at least two points")
    }

    pub fn x_end(&self) -> f64 {
        *self.values.last().expect("path has at least two points")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Uniform grid of step `dt` on `[0, T]`; the last step takes the remainder.
///
/// A remainder below `1e-9 dt` is absorbed into the previous step so that
/// `T = M dt` up to rounding produces exactly `M` steps.
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let ratio = t_end / dt;
    let rounded = ratio.round();
    let full = if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize - 1
    } else {
        ratio.floor() as usize
    };
    let mut times = Vec::with_capacity(full + 2);
    times.extend((0..=full).map(|k| k as f64 * dt));
    times.push(t_end);
    times
}

/// Draws `n` random effects from a single stream.
pub fn draw_random_effects(theta0: Theta, n: usize, rng: &RngStream) -> Vec<RandomEffect> {
    let mut normals = rng.normals();
    let sd = theta0.omega2.sqrt();
    (0..n)
        .map(|_| RandomEffect {
            phi: theta0.mu + sd * normals.next_normal(),
        })
        .collect()
}

/// Simulates one path with normals from `rng`.
pub fn euler_maruyama(
    model: &ModelSpec,
    phi: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
    rng: &RngStream,
) -> Result<Path> {
    let mut normals = rng.normals();
    let mut path = euler_maruyama_with(model, phi, x0, t_end, dt, &mut normals)?;
    path.seed = Some(rng.seed);
    path.subject_index = rng.stream_id as usize;
    Ok(path)
}

/// Simulates one path driven by an arbitrary normal source.
///
/// `X(t_{k+1}) = X(t_k) + phi b(X(t_k)) D_k + sigma(X(t_k)) sqrt(D_k) Z_k`.
pub fn euler_maruyama_with<S: NormalSource>(
    model: &ModelSpec,
    phi: f64,
    x0: f64,
    t_end: f64,
    dt: f64,
    normals: &mut S,
) -> Result<Path> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step dt = {dt} must be positive"
        )));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon T = {t_end} must be positive"
        )));
    }
    if !x0.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidArgument("x0 and phi must be finite".into()));
    }
    let times = time_grid(t_end, dt);
    let mut values = Vec::with_capacity(times.len());
    let mut x = x0;
    values.push(x);
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        let sigma = model.sigma(x);
        if !(sigma > 0.0) {
            return Err(Error::DegenerateDiffusion { x, sigma });
        }
        let z = normals.next_normal();
        x += phi * model.b(x) * step + sigma * step.sqrt() * z;
        if !x.is_finite() {
            return Err(Error::SimulationDiverged { step: k, value: x });
        }
        values.push(x);
    }
    Ok(Path {
        times,
        values,
        phi: Some(phi),
        seed: None,
        subject_index: 0,
    })
}

/// Draws `phi ~ N(mu0, omega2_0)` and then the Brownian increments from the
/// same stream.
pub fn simulate_subject(
    model: &ModelSpec,
    theta0: Theta,
    x0: f64,
    t_end: f64,
    dt: f64,
    rng: &RngStream,
) -> Result<Path> {
    let mut normals = rng.normals();
    let phi = theta0.mu + theta0.omega2.sqrt() * normals.next_normal();
    let mut path = euler_maruyama_with(model, phi, x0, t_end, dt, &mut normals)?;
    path.seed = Some(rng.seed);
    path.subject_index = rng.stream_id as usize;
    Ok(path)
}

/// One path per subject of `design`; subject `i` uses stream `i`.
pub fn simulate_ensemble(
    model: &ModelSpec,
    theta0: Theta,
    design: &Design,
    replicate_id: u64,
) -> Result<Vec<Path>> {
    let base = RngStream::new(design.seed(), 0, replicate_id);
    let results: Vec<Result<Path>> = design
        .subjects()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            simulate_subject(
                model,
                theta0,
                s.x0,
                s.t_end,
                design.dt(),
                &base.with_stream(i as u64),
            )
            .map_err(|e| e.for_subject(i))
        })
        .collect();
    results.into_iter().collect()
}
