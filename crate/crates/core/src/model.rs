//! Model vocabulary: drift and diffusion factors, the parameter space of the
//! random-effects law, and experimental designs.
//!
//! The SDE family is `dX(t) = phi * b(X(t)) dt + sigma(X(t)) dW(t)` with
//! `phi ~ N(mu, omega2)` drawn once per subject.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar coefficient function shared between workers.
pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Names accepted by [`builtin_model`].
pub const BUILTIN_MODELS: [&str; 3] = ["unit", "linear-drift", "bounded-ratio"];

/// A named drift factor / diffusion coefficient pair.
///
/// `growth_k` and `tau` record the constants for which
/// `b^2 <= K(1 + x^2)`, `sigma^2 <= K(1 + x^2)` and
/// `b^2 / sigma^2 <= K(1 + |x|^tau)` hold. For user-supplied models they
/// are trusted, and only probed at evaluation time.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    drift: Coefficient,
    diffusion: Coefficient,
    tau: f64,
    growth_k: f64,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        drift: Coefficient,
        diffusion: Coefficient,
        tau: f64,
        growth_k: f64,
    ) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "growth exponent tau must be >= 1, got {tau}"
            )));
        }
        if !(growth_k > 0.0 && growth_k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "growth constant K must be positive, got {growth_k}"
            )));
        }
        Ok(Self {
            name: name.into(),
            drift,
            diffusion,
            tau,
            growth_k,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn growth_k(&self) -> f64 {
        self.growth_k
    }

    /// Drift factor `b(x)`.
    #[inline]
    pub fn b(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    /// Diffusion coefficient `sigma(x)`.
    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }

    /// Checks the growth bounds at a single point.
    pub fn satisfies_growth_at(&self, x: f64) -> bool {
        let b = self.b(x);
        let s = self.sigma(x);
        let b2 = b * b;
        let s2 = s * s;
        // Slack for rounding in coefficients like hypot(x, 1)^2.
        let k = self.growth_k * (1.0 + 1e-12);
        s > 0.0
            && b2 <= k * (1.0 + x * x)
            && s2 <= k * (1.0 + x * x)
            && b2 / s2 <= k * (1.0 + x.abs().powf(self.tau))
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("tau", &self.tau)
            .field("growth_k", &self.growth_k)
            .finish_non_exhaustive()
    }
}

/// Looks up one of the shipped models.
///
/// * `unit`: `b = 1`, `sigma = 1`, `tau = 1`
/// * `linear-drift`: `b(x) = x`, `sigma = 1`, `tau = 2`
/// * `bounded-ratio`: `b(x) = x`, `sigma(x) = sqrt(1 + x^2)`, `tau = 1`
///
/// All three satisfy their growth bounds with `K = 1`.
pub fn builtin_model(name: &str) -> Result<ModelSpec> {
    let (drift, diffusion, tau): (Coefficient, Coefficient, f64) = match name {
        "unit" => (Arc::new(|_| 1.0), Arc::new(|_| 1.0), 1.0),
        "linear-drift" => (Arc::new(|x| x), Arc::new(|_| 1.0), 2.0),
        "bounded-ratio" => (Arc::new(|x| x), Arc::new(|x: f64| x.hypot(1.0)), 1.0),
        other => return Err(Error::NotFound(other.to_string())),
    };
    ModelSpec::new(name, drift, diffusion, tau, 1.0)
}

/// Parameter of the random-effects law `N(mu, omega2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub mu: f64,
    pub omega2: f64,
}

impl Theta {
    pub fn new(mu: f64, omega2: f64) -> Result<Self> {
        if !mu.is_finite() || !omega2.is_finite() || omega2 < 0.0 {
            return Err(Error::InvalidTheta(format!(
                "need finite mu and omega2 >= 0, got ({mu}, {omega2})"
            )));
        }
        Ok(Self { mu, omega2 })
    }

    pub fn distance(&self, other: &Theta) -> f64 {
        (self.mu - other.mu).hypot(self.omega2 - other.omega2)
    }
}

/// Compact rectangle `[mu_lo, mu_hi] x [omega2_lo, omega2_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpace {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub omega2_lo: f64,
    pub omega2_hi: f64,
}

impl ParamSpace {
    pub fn new(mu_lo: f64, mu_hi: f64, omega2_lo: f64, omega2_hi: f64) -> Result<Self> {
        let finite = [mu_lo, mu_hi, omega2_lo, omega2_hi]
            .iter()
            .all(|v| v.is_finite());
        if !finite || mu_lo >= mu_hi || omega2_lo < 0.0 || omega2_lo >= omega2_hi {
            return Err(Error::InvalidSpace(format!(
                "need mu_lo < mu_hi and 0 <= omega2_lo < omega2_hi, got \
                 [{mu_lo}, {mu_hi}] x [{omega2_lo}, {omega2_hi}]"
            )));
        }
        Ok(Self {
            mu_lo,
            mu_hi,
            omega2_lo,
            omega2_hi,
        })
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        validate_theta(theta, self)
    }

    /// Strict interior membership.
    pub fn interior(&self, theta: &Theta) -> bool {
        theta.mu > self.mu_lo
            && theta.mu < self.mu_hi
            && theta.omega2 > self.omega2_lo
            && theta.omega2 < self.omega2_hi
    }

    pub fn project(&self, theta: Theta) -> Theta {
        Theta {
            mu: theta.mu.clamp(self.mu_lo, self.mu_hi),
            omega2: theta.omega2.clamp(self.omega2_lo, self.omega2_hi),
        }
    }
}

/// True iff `theta` lies in the closed rectangle.
pub fn validate_theta(theta: &Theta, space: &ParamSpace) -> bool {
    theta.mu >= space.mu_lo
        && theta.mu <= space.mu_hi
        && theta.omega2 >= space.omega2_lo
        && theta.omega2 <= space.omega2_hi
}

/// One subject's design point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subject {
    pub x0: f64,
    pub t_end: f64,
}

/// Subject design points plus Euler step and seed.
///
/// Every `x0` lies in `x_range` and every `T` in `t_range`, both compact,
/// and `dt <= min T / 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    subjects: Vec<Subject>,
    dt: f64,
    seed: u64,
    x_range: (f64, f64),
    t_range: (f64, f64),
}

impl Design {
    pub fn new(
        subjects: Vec<Subject>,
        dt: f64,
        seed: u64,
        x_range: (f64, f64),
        t_range: (f64, f64),
    ) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidDesign("no subjects".into()));
        }
        if !(x_range.0 <= x_range.1) || !x_range.0.is_finite() || !x_range.1.is_finite() {
            return Err(Error::InvalidDesign(format!(
                "initial-value set [{}, {}] is not a compact interval",
                x_range.0, x_range.1
            )));
        }
        if !(t_range.0 > 0.0 && t_range.0 <= t_range.1 && t_range.1.is_finite()) {
            return Err(Error::InvalidDesign(format!(
                "horizon set [{}, {}] is not a compact interval of positive times",
                t_range.0, t_range.1
            )));
        }
        for (i, s) in subjects.iter().enumerate() {
            if !(s.x0 >= x_range.0 && s.x0 <= x_range.1) {
                return Err(Error::InvalidDesign(format!(
                    "subject {i}: x0 = {} outside [{}, {}]",
                    s.x0, x_range.0, x_range.1
                )));
            }
            if !(s.t_end >= t_range.0 && s.t_end <= t_range.1) {
                return Err(Error::InvalidDesign(format!(
                    "subject {i}: T = {} outside [{}, {}]",
                    s.t_end, t_range.0, t_range.1
                )));
            }
        }
        let t_min = subjects
            .iter()
            .map(|s| s.t_end)
            .fold(f64::INFINITY, f64::min);
        if !(dt > 0.0 && dt <= t_min / 10.0) {
            return Err(Error::InvalidDesign(format!(
                "step dt = {dt} must be positive and at most min T / 10 = {}",
                t_min / 10.0
            )));
        }
        Ok(Self {
            subjects,
            dt,
            seed,
            x_range,
            t_range,
        })
    }

    /// All `n` subjects share `(x0, T)`.
    pub fn iid(n: usize, x0: f64, t_end: f64, dt: f64, seed: u64) -> Result<Self> {
        Self::new(
            vec![Subject { x0, t_end }; n],
            dt,
            seed,
            (x0, x0),
            (t_end, t_end),
        )
    }

    /// Subject `i = 1..=n` starts at `x_inf + a / i` and runs to `t_inf + b / i`.
    pub fn converging(
        n: usize,
        x_inf: f64,
        a: f64,
        t_inf: f64,
        b: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        let subjects = converging_points(n, x_inf, a, t_inf, b);
        let span = |lim: f64, c: f64| (lim.min(lim + c), lim.max(lim + c));
        Self::new(subjects, dt, seed, span(x_inf, a), span(t_inf, b))
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }
}

/// Design points `(x_inf + a/i, t_inf + b/i)` for `i = 1..=n`.
pub fn converging_points(n: usize, x_inf: f64, a: f64, t_inf: f64, b: f64) -> Vec<Subject> {
    (1..=n)
        .map(|i| Subject {
            x0: x_inf + a / i as f64,
            t_end: t_inf + b / i as f64,
        })
        .collect()
}

/// A realized random effect `phi_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomEffect {
    pub phi: f64,
}
