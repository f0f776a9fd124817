//! The Lorenz equations and the flow-level experiments built on them.
//!
//! Integration is classical fixed-step RK4 (default `h = 5e-4`); a fixed step
//! keeps every trajectory bit-identical no matter how samples are scheduled.

mod experiments;
mod leafwise;
mod section;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use experiments::{
    escape_volume, estimate_flow_average, flow_deviation_volume, occupation_fraction,
    trap_violations, FlowAveragePlan,
};
pub use leafwise::{leafwise_average_gap, leafwise_gap_bound};
pub use section::{
    locate_stable_trace, poincare_return, return_time_profile, ReturnTimeFit, SectionCrossing,
    SectionLine, SECTION_Z,
};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzParams {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_beta", rename = "beta_", alias = "beta")]
    pub beta: f64,
}

fn default_sigma() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    28.0
}
fn default_beta() -> f64 {
    8.0 / 3.0
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: default_sigma(),
            rho: default_rho(),
            beta: default_beta(),
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.rho > 0.0 && self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition("Lorenz parameters must be positive".into()))
        }
    }

    /// The two non-trivial equilibria `C±`.
    pub fn equilibria(&self) -> [[f64; 3]; 2] {
        let c = (self.beta * (self.rho - 1.0)).sqrt();
        let z = self.rho - 1.0;
        [[c, c, z], [-c, -c, z]]
    }
}

/// A point of the flow with its elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl OdeState {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, t: 0.0 }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn with_position(p: [f64; 3], t: f64) -> Self {
        Self {
            x: p[0],
            y: p[1],
            z: p[2],
            t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[inline]
pub fn vector_field(p: &LorenzParams, s: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = s;
    [p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z]
}

#[inline]
fn axpy(a: f64, k: [f64; 3], s: [f64; 3]) -> [f64; 3] {
    [s[0] + a * k[0], s[1] + a * k[1], s[2] + a * k[2]]
}

/// One classical RK4 step.
#[inline]
pub fn rk4_step(p: &LorenzParams, s: [f64; 3], h: f64) -> [f64; 3] {
    let k1 = vector_field(p, s);
    let k2 = vector_field(p, axpy(0.5 * h, k1, s));
    let k3 = vector_field(p, axpy(0.5 * h, k2, s));
    let k4 = vector_field(p, axpy(h, k3, s));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// Number of full steps and the leftover partial step covering `t`.
pub(crate) fn step_plan(t: f64, h: f64) -> (u64, f64) {
    let full = (t / h).floor();
    let rest = t - full * h;
    // absorb a remainder lost to rounding
    if rest < 1e-12 * h {
        (full as u64, 0.0)
    } else {
        (full as u64, rest)
    }
}

/// Integrates for `t` time units with step `h`.
pub fn integrate_with_step(p: &LorenzParams, state: OdeState, t: f64, h: f64) -> Result<OdeState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("duration {t} must be finite and >= 0")));
    }
    if !(h > 0.0) {
        return Err(Error::Precondition("step must be positive".into()));
    }
    let (steps, rest) = step_plan(t, h);
    let mut s = state.position();
    for i in 0..steps {
        s = rk4_step(p, s, h);
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: state.t + (i + 1) as f64 * h,
            });
        }
    }
    if rest > 0.0 {
        s = rk4_step(p, s, rest);
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: state.t + t });
        }
    }
    Ok(OdeState::with_position(s, state.t + t))
}

pub fn integrate(p: &LorenzParams, state: OdeState, t: f64) -> Result<OdeState> {
    integrate_with_step(p, state, t, DEFAULT_STEP)
}

/// Trapping region `U` for flow experiments, and the compact sets `K` of
/// escape experiments. An optional cut `x <= x_max` is applied on top of
/// either shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrapBox {
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
        #[serde(default)]
        x_max: Option<f64>,
    },
    Ball {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        x_max: Option<f64>,
    },
}

impl Default for TrapBox {
    fn default() -> Self {
        Self::absorbing_ball(&LorenzParams::default())
    }
}

impl TrapBox {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        let b = Self::Box { lo, hi, x_max: None };
        b.validate()?;
        Ok(b)
    }

    /// Ball around `(0, 0, sigma + rho)` that the flow maps into itself.
    ///
    /// With `V = x^2 + y^2 + (z - c)^2`, `c = sigma + rho`, `dV/dt < 0` off the
    /// ellipsoid `sigma x^2 + y^2 + beta (z - c/2)^2 <= beta c^2 / 4`, so any
    /// sublevel set of `V` containing that ellipsoid is forward-invariant.
    /// The radius adds one unit of slack to cover integrator error.
    pub fn absorbing_ball(p: &LorenzParams) -> Self {
        let c = p.sigma + p.rho;
        let k = (1.0 / p.sigma).max(1.0);
        let half = 0.5 * c;
        let v = |w: f64| k * p.beta * (half * half - w * w) + (w - half).powi(2);
        let mut best = v(-half).max(v(half));
        let curvature = 1.0 - k * p.beta;
        if curvature != 0.0 {
            let w = (half / curvature).clamp(-half, half);
            best = best.max(v(w));
        }
        Self::Ball {
            center: [0.0, 0.0, c],
            radius: best.sqrt() + 1.0,
            x_max: None,
        }
    }

    /// The classical box `[-30, 30]^2 x [-5, 60]`. Not forward-invariant.
    pub fn classic_box() -> Self {
        Self::Box {
            lo: [-30.0, -30.0, -5.0],
            hi: [30.0, 30.0, 60.0],
            x_max: None,
        }
    }

    fn x_max(&self) -> Option<f64> {
        match *self {
            Self::Box { x_max, .. } | Self::Ball { x_max, .. } => x_max,
        }
    }

    /// Axis-aligned bounding box, including the `x_max` cut.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let (lo, mut hi) = match *self {
            Self::Box { lo, hi, .. } => (lo, hi),
            Self::Ball { center, radius, .. } => (center.map(|c| c - radius), center.map(|c| c + radius)),
        };
        if let Some(m) = self.x_max() {
            hi[0] = hi[0].min(m);
        }
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        let shape_ok = match *self {
            Self::Box { lo, hi, .. } => (0..3).all(|i| lo[i] < hi[i]),
            Self::Ball { center, radius, .. } => center.iter().all(|c| c.is_finite()) && radius > 0.0,
        };
        if !shape_ok {
            return Err(Error::Precondition("region needs lo < hi on every axis or a positive radius".into()));
        }
        let (lo, hi) = self.bounds();
        if lo[0] < hi[0] {
            Ok(())
        } else {
            Err(Error::Precondition("x_max cut leaves an empty region".into()))
        }
    }

    #[inline]
    pub fn contains(&self, s: [f64; 3]) -> bool {
        if self.x_max().is_some_and(|m| s[0] > m) {
            return false;
        }
        match *self {
            Self::Box { lo, hi, .. } => (0..3).all(|i| s[i] >= lo[i] && s[i] <= hi[i]),
            Self::Ball { center, radius, .. } => {
                let d2: f64 = (0..3).map(|i| (s[i] - center[i]).powi(2)).sum();
                d2 <= radius * radius
            }
        }
    }

    /// `self ∩ {x <= x_max}`.
    pub fn cut_x_above(&self, x_max: f64) -> Result<TrapBox> {
        let m = self.x_max().map_or(x_max, |old| old.min(x_max));
        let cut = match *self {
            Self::Box { lo, hi, .. } => Self::Box { lo, hi, x_max: Some(m) },
            Self::Ball { center, radius, .. } => Self::Ball {
                center,
                radius,
                x_max: Some(m),
            },
        };
        cut.validate()?;
        Ok(cut)
    }

    /// Uniform sample by rejection from the bounding box.
    pub(crate) fn sample(&self, rng: &mut impl rand::Rng) -> [f64; 3] {
        let (lo, hi) = self.bounds();
        loop {
            let s = [0, 1, 2].map(|i| {
                let u: f64 = rng.random();
                lo[i] + (hi[i] - lo[i]) * u
            });
            if self.contains(s) {
                return s;
            }
        }
    }
}
