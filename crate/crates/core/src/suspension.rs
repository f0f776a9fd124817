//! The suspension space `M_r = {(x, s) : 0 <= s < r(x)}`, the logarithmic
//! roof, lap numbers and the semiflow `X^t`.
//!
//! Flow time averages are computed through the lap decomposition
//!
//! ```text
//! int_0^T psi(X^t(x, s)) dt = S_n phi(x) - int_0^s psi(x, t) dt
//!                           + int_0^{T + s - S_n r(x)} psi(f^n x, t) dt
//! ```
//!
//! with `phi(x) = int_0^{r(x)} psi(x, t) dt`, rather than by stepping along
//! the orbit. The identity also covers `n = 0`, where both boundary terms sit
//! on the fiber over `x`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base_dynamics::{MapModel, SINGULARITY_GUARD};
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, CompensatedSum};

/// Roof `r(x) = r0 + K |log d_delta(x, S)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoofSpec {
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_k", rename = "K", alias = "k")]
    pub k: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_r0() -> f64 {
    1.0
}
fn default_k() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.1
}

impl Default for RoofSpec {
    fn default() -> Self {
        Self {
            r0: default_r0(),
            k: default_k(),
            delta: default_delta(),
        }
    }
}

impl RoofSpec {
    pub fn new(r0: f64, k: f64, delta: f64) -> Result<Self> {
        let roof = Self { r0, k, delta };
        roof.validate()?;
        Ok(roof)
    }

    pub fn constant(r0: f64) -> Result<Self> {
        Self::new(r0, 0.0, default_delta())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Precondition(format!("roof r0 = {} must be > 0", self.r0)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Precondition(format!("roof K = {} must be >= 0", self.k)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Precondition(format!(
                "roof delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }

    /// Constant `C` in the growth condition `r 1_{B(S, delta)} <= C |log d_delta|`.
    pub fn growth_constant(&self) -> f64 {
        self.k + self.r0 / self.delta.ln().abs()
    }

    pub fn eval(&self, model: &MapModel, x: f64) -> Result<f64> {
        roof_eval(self, model, x)
    }
}

pub fn roof_eval(roof: &RoofSpec, model: &MapModel, x: f64) -> Result<f64> {
    if model.dist_to_singular(x) <= SINGULARITY_GUARD {
        return Err(Error::SingularInput { x });
    }
    if roof.k == 0.0 {
        return Ok(roof.r0);
    }
    let d = model.dist_delta(x, roof.delta)?;
    Ok(roof.r0 + roof.k * d.ln().abs())
}

/// A point `(x, s)` of `M_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionPoint {
    pub x: f64,
    pub s: f64,
}

impl SuspensionPoint {
    /// Checked constructor enforcing `0 <= s < r(x)`.
    pub fn new(model: &MapModel, roof: &RoofSpec, x: f64, s: f64) -> Result<Self> {
        let (lo, hi) = model.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let r = roof_eval(roof, model, x)?;
        if !(s >= 0.0 && s < r) {
            return Err(Error::Precondition(format!(
                "fiber coordinate {s} outside [0, r(x) = {r})"
            )));
        }
        Ok(Self { x, s })
    }
}

/// Outcome of locating `n(x, s, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapResult {
    pub n: usize,
    /// `S_n r(x)`.
    pub sum_n: f64,
    /// `S_{n+1} r(x)`.
    pub sum_next: f64,
    /// `s + T - S_n r(x)`, in `[0, r(f^n x))`.
    pub residual: f64,
    /// `f^n(x)`.
    pub base_point: f64,
}

/// Walks the base orbit of `x` until the lap bracket
/// `S_n r(x) <= s + T < S_{n+1} r(x)` is found, calling `visit` on every base
/// point whose full fiber is crossed (`x_0, ..., x_{n-1}`).
fn walk_laps<F>(
    model: &MapModel,
    roof: &RoofSpec,
    z: SuspensionPoint,
    t: f64,
    mut visit: F,
) -> Result<LapResult>
where
    F: FnMut(f64, f64) -> Result<()>,
{
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("duration {t} must be finite and >= 0")));
    }
    let target = z.s + t;
    let mut sum = CompensatedSum::new();
    let mut cur = z.x;
    let mut r_cur = roof_eval(roof, model, cur).map_err(|_| Error::HitSingularity { index: 0 })?;
    let mut n = 0usize;
    loop {
        let residual = target - sum.value();
        if residual < r_cur {
            let sum_n = sum.value();
            sum.add(r_cur);
            return Ok(LapResult {
                n,
                sum_n,
                sum_next: sum.value(),
                residual: residual.max(0.0),
                base_point: cur,
            });
        }
        visit(cur, r_cur)?;
        sum.add(r_cur);
        n += 1;
        cur = model.eval_map(cur)?;
        if model.dist_to_singular(cur) <= SINGULARITY_GUARD {
            return Err(Error::HitSingularity { index: n });
        }
        r_cur = roof_eval(roof, model, cur)?;
    }
}

pub fn lap_number(
    model: &MapModel,
    roof: &RoofSpec,
    x: f64,
    s: f64,
    t: f64,
) -> Result<LapResult> {
    walk_laps(model, roof, SuspensionPoint { x, s }, t, |_, _| Ok(()))
}

/// `X^t(x, s) = (f^n x, s + t - S_n r(x))`.
pub fn semiflow_evolve(
    model: &MapModel,
    roof: &RoofSpec,
    z: SuspensionPoint,
    t: f64,
) -> Result<SuspensionPoint> {
    let lap = walk_laps(model, roof, z, t, |_, _| Ok(()))?;
    Ok(SuspensionPoint {
        x: lap.base_point,
        s: lap.residual,
    })
}

type FlowFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A bounded continuous observable `psi(x, s)` on `M_r` together with the
/// settings used for fiber integrals.
#[derive(Clone)]
pub struct FlowObservable {
    f: Arc<FlowFn>,
    /// Caller-declared bound on `|psi|`.
    pub bound: f64,
    /// Target Gauss-Legendre panel width along the fiber.
    pub panel_width: f64,
    pub min_panels: usize,
}

impl fmt::Debug for FlowObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowObservable")
            .field("bound", &self.bound)
            .field("panel_width", &self.panel_width)
            .field("min_panels", &self.min_panels)
            .finish_non_exhaustive()
    }
}

impl FlowObservable {
    pub fn new<F>(bound: f64, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            bound,
            panel_width: 0.1,
            min_panels: 8,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c.abs(), move |_, _| c)
    }

    #[inline]
    pub fn eval(&self, x: f64, s: f64) -> f64 {
        (self.f)(x, s)
    }

    fn panels(&self, len: f64) -> usize {
        self.min_panels.max((len / self.panel_width).ceil() as usize)
    }

    /// `int_a^b psi(x, t) dt` along the fiber over `x`.
    pub fn fiber_integral(&self, x: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        gauss_legendre(|t| self.eval(x, t), a, b, self.panels(b - a))
    }
}

/// `phi(x) = int_0^{r(x)} psi(x, t) dt`.
pub fn induced_observable(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    x: f64,
) -> Result<f64> {
    let r = roof_eval(roof, model, x)?;
    Ok(psi.fiber_integral(x, 0.0, r))
}

/// `(1/T) int_0^T psi(X^t z) dt` via the lap decomposition.
pub fn flow_time_average(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    z: SuspensionPoint,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("horizon {t} must be > 0")));
    }
    let mut s_n_phi = CompensatedSum::new();
    let lap = walk_laps(model, roof, z, t, |x, r| {
        s_n_phi.add(psi.fiber_integral(x, 0.0, r));
        Ok(())
    })?;
    let head = psi.fiber_integral(z.x, 0.0, z.s);
    let tail = psi.fiber_integral(lap.base_point, 0.0, lap.residual);
    Ok((s_n_phi.value() - head + tail) / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lq() -> MapModel {
        MapModel::lorenz_quotient(0.75).unwrap()
    }

    #[test]
    fn roof_eval_examples() {
        let m = lq();
        let roof = RoofSpec::default();
        assert_eq!(roof_eval(&roof, &m, 0.5).unwrap(), 1.0);
        assert!((roof_eval(&roof, &m, 0.01).unwrap() - 5.605170).abs() < 1e-6);
        let flat = RoofSpec::constant(1.0).unwrap();
        assert_eq!(roof_eval(&flat, &m, 0.01).unwrap(), 1.0);
        assert!(roof_eval(&roof, &m, 0.0).is_err());
        assert!(RoofSpec::new(0.0, 1.0, 0.1).is_err());
        assert!(RoofSpec::new(1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn lap_number_examples() {
        let d = MapModel::doubling();
        let flat = RoofSpec::constant(1.0).unwrap();
        let lap = lap_number(&d, &flat, 0.1, 0.3, 2.0).unwrap();
        assert_eq!(lap.n, 2);
        assert!((lap.residual - 0.3).abs() < 1e-15);

        let lap = lap_number(&lq(), &RoofSpec::default(), 0.3, 0.7, 0.0).unwrap();
        assert_eq!(lap.n, 0);
        assert_eq!(lap.residual, 0.7);
    }

    #[test]
    fn lap_number_matches_cumulative_scan() {
        let m = lq();
        let roof = RoofSpec::default();
        // Independent scan: accumulate r(f^j x) directly from the formula.
        let r = |x: f64| {
            let d = x.abs();
            if d < 0.1 {
                1.0 + d.ln().abs()
            } else {
                1.0
            }
        };
        let f = |x: f64| {
            let v = 2.0 * x.abs().powf(0.75) - 1.0;
            if x < 0.0 {
                -v
            } else {
                v
            }
        };
        let (mut x, mut acc, mut n) = (0.3f64, 0.0f64, 0usize);
        while acc + r(x) <= 50.0 {
            acc += r(x);
            x = f(x);
            n += 1;
        }
        let lap = lap_number(&m, &roof, 0.3, 0.0, 50.0).unwrap();
        assert_eq!(lap.n, n);
        assert!((lap.sum_n - acc).abs() < 1e-10);
        assert!(lap.sum_n <= 50.0 && 50.0 < lap.sum_next);
    }

    #[test]
    fn semiflow_examples() {
        let d = MapModel::doubling();
        let flat = RoofSpec::constant(1.0).unwrap();
        let z = SuspensionPoint { x: 0.1, s: 0.5 };
        assert_eq!(semiflow_evolve(&d, &flat, z, 0.0).unwrap(), z);
        let w = semiflow_evolve(&d, &flat, z, 0.7).unwrap();
        assert!((w.x - 0.2).abs() < 1e-15 && (w.s - 0.2).abs() < 1e-15);
    }

    #[test]
    fn semiflow_rejects_negative_time() {
        let z = SuspensionPoint { x: 0.3, s: 0.0 };
        assert!(semiflow_evolve(&lq(), &RoofSpec::default(), z, -1.0).is_err());
    }

    #[test]
    fn induced_observable_examples() {
        let m = lq();
        let roof = RoofSpec::default();
        let one = FlowObservable::constant(1.0);
        for x in [0.5, 0.01, -0.03] {
            let r = roof_eval(&roof, &m, x).unwrap();
            assert!((induced_observable(&one, &m, &roof, x).unwrap() - r).abs() < 1e-13);
        }
        let flat = RoofSpec::constant(1.0).unwrap();
        let lin = FlowObservable::new(1.0, |_, s| s);
        assert!((induced_observable(&lin, &m, &flat, 0.4).unwrap() - 0.5).abs() < 1e-15);

        let cos = FlowObservable::new(1.0, |_, s| s.cos());
        let r = roof_eval(&roof, &m, 0.01).unwrap();
        let v = induced_observable(&cos, &m, &roof, 0.01).unwrap();
        assert!((v - r.sin()).abs() < 1e-10);
        assert!((v + 0.627248).abs() < 1e-6);
    }

    #[test]
    fn flow_average_of_constant_is_exact() {
        let m = lq();
        let roof = RoofSpec::default();
        let one = FlowObservable::constant(1.0);
        for (x, s, t) in [(0.3, 0.1, 5.0), (-0.02, 2.0, 0.4), (0.7, 0.0, 123.4)] {
            let v = flow_time_average(&one, &m, &roof, SuspensionPoint { x, s }, t).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn flow_average_fiber_uniform_observable() {
        let d = MapModel::doubling();
        let flat = RoofSpec::constant(1.0).unwrap();
        let lin = FlowObservable::new(1.0, |_, s| s);
        let v = flow_time_average(&lin, &d, &flat, SuspensionPoint { x: 0.3, s: 0.0 }, 1000.0)
            .unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lap_bracket_holds(x in -1.0f64..=1.0, u in 0.0f64..1.0, t in 0.0f64..2000.0) {
            prop_assume!(x != 0.0);
            let m = lq();
            let roof = RoofSpec::default();
            let s = u * roof_eval(&roof, &m, x).unwrap();
            if let Ok(lap) = lap_number(&m, &roof, x, s, t) {
                let target = s + t;
                prop_assert!(lap.sum_n <= target * (1.0 + 1e-12));
                prop_assert!(target < lap.sum_next * (1.0 + 1e-12));
                let r_n = roof_eval(&roof, &m, lap.base_point).unwrap();
                prop_assert!(lap.residual >= 0.0 && lap.residual < r_n);
            }
        }

        #[test]
        fn lap_number_monotone_in_time(x in -1.0f64..=1.0, t in 0.0f64..300.0, dt in 0.0f64..50.0) {
            prop_assume!(x != 0.0);
            let m = lq();
            let roof = RoofSpec::default();
            let a = lap_number(&m, &roof, x, 0.0, t);
            let b = lap_number(&m, &roof, x, 0.0, t + dt);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(a.n <= b.n);
            }
        }
    }
}
