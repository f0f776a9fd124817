//! Base transformations `f: M \ S -> M` on an interval, distances to the
//! singular set, Birkhoff sums and the two hypothesis checkers (non-uniform
//! expansion and slow recurrence to `S`).
//!
//! Three models are shipped:
//!
//! * `LorenzQuotient`: `f(x) = sign(x) (2|x|^alpha - 1)` on `[-1, 1]` with
//!   `S = {0}`. Both branches are full, `|f'(x)| = 2 alpha |x|^(alpha - 1)`
//!   blows up like `dist(x, S)^-(1 - alpha)`, and `min |f'| = 2 alpha`.
//! * `Doubling`: `x -> 2x mod 1` on `[0, 1]` with no singular set; it is the
//!   exactly solvable oracle.
//! * `GeometricLorenz2d`: the skew product
//!   `(x, y) -> (f(x), lambda_s y + b sign(x))` whose quotient along vertical
//!   leaves is the Lorenz quotient map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Orbits landing within this distance of `S` abort instead of producing
/// infinities.
pub const SINGULARITY_GUARD: f64 = 1e-300;

/// Floating-point excursions past the domain edge smaller than this are clamped.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzQuotientParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for LorenzQuotientParams {
    fn default() -> Self {
        Self { alpha: default_alpha() }
    }
}

impl LorenzQuotientParams {
    /// Non-flatness exponent: `|f'(x)| ~ dist(x, S)^-beta`.
    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricLorenz2DParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda_s")]
    pub lambda_s: f64,
    /// Vertical offset `b` added with the sign of the branch.
    #[serde(default = "default_offset")]
    pub offset: f64,
}

impl Default for GeometricLorenz2DParams {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            lambda_s: default_lambda_s(),
            offset: default_offset(),
        }
    }
}

fn default_alpha() -> f64 {
    0.75
}
fn default_lambda_s() -> f64 {
    0.2
}
fn default_offset() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapKind {
    LorenzQuotient(LorenzQuotientParams),
    Doubling,
    GeometricLorenz2d(GeometricLorenz2DParams),
}

/// A one-dimensional piecewise-smooth expanding map with its singular set.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MapModel {
    domain: (f64, f64),
    singular_set: Vec<f64>,
    kind: MapKind,
}

fn check_alpha(alpha: f64) -> Result<()> {
    let lo = std::f64::consts::FRAC_1_SQRT_2;
    if alpha > lo && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "alpha = {alpha} must lie in (sqrt(2)/2, 1)"
        )))
    }
}

impl MapModel {
    pub fn lorenz_quotient(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            domain: (-1.0, 1.0),
            singular_set: vec![0.0],
            kind: MapKind::LorenzQuotient(LorenzQuotientParams { alpha }),
        })
    }

    pub fn doubling() -> Self {
        Self {
            domain: (0.0, 1.0),
            singular_set: Vec::new(),
            kind: MapKind::Doubling,
        }
    }

    pub fn geometric_lorenz_2d(params: GeometricLorenz2DParams) -> Result<Self> {
        check_alpha(params.alpha)?;
        if !(params.lambda_s > 0.0 && params.lambda_s < 1.0) {
            return Err(Error::Precondition(format!(
                "lambda_s = {} must lie in (0, 1)",
                params.lambda_s
            )));
        }
        if params.lambda_s + params.offset.abs() > 1.0 {
            return Err(Error::Precondition(
                "lambda_s + |offset| must not exceed 1 so the square is invariant".into(),
            ));
        }
        Ok(Self {
            domain: (-1.0, 1.0),
            singular_set: vec![0.0],
            kind: MapKind::GeometricLorenz2d(params),
        })
    }

    pub fn from_kind(kind: MapKind) -> Result<Self> {
        match kind {
            MapKind::LorenzQuotient(p) => Self::lorenz_quotient(p.alpha),
            MapKind::Doubling => Ok(Self::doubling()),
            MapKind::GeometricLorenz2d(p) => Self::geometric_lorenz_2d(p),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn domain_length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn singular_set(&self) -> &[f64] {
        &self.singular_set
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// Exponent of the quotient map, if the model has one.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            MapKind::LorenzQuotient(p) => Some(p.alpha),
            MapKind::GeometricLorenz2d(p) => Some(p.alpha),
            MapKind::Doubling => None,
        }
    }

    /// Lower bound of `|f'|` over the domain.
    pub fn min_expansion(&self) -> f64 {
        match self.alpha() {
            Some(a) => 2.0 * a,
            None => 2.0,
        }
    }

    /// Unsigned distance to `S`, `+inf` when `S` is empty.
    pub fn dist_to_singular(&self, x: f64) -> f64 {
        self.singular_set
            .iter()
            .map(|s| (x - s).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_input(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        if self.dist_to_singular(x) <= SINGULARITY_GUARD {
            return Err(Error::SingularInput { x });
        }
        Ok(())
    }

    fn clamp_output(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.domain;
        if y < lo {
            if lo - y < DOMAIN_SLACK {
                Ok(lo)
            } else {
                Err(Error::OutOfDomain { x: y, lo, hi })
            }
        } else if y > hi {
            if y - hi < DOMAIN_SLACK {
                Ok(hi)
            } else {
                Err(Error::OutOfDomain { x: y, lo, hi })
            }
        } else {
            Ok(y)
        }
    }

    pub fn eval_map(&self, x: f64) -> Result<f64> {
        self.check_input(x)?;
        let y = match self.kind {
            MapKind::Doubling => (2.0 * x).fract(),
            MapKind::LorenzQuotient(LorenzQuotientParams { alpha })
            | MapKind::GeometricLorenz2d(GeometricLorenz2DParams { alpha, .. }) => {
                lorenz_branch(x, alpha)
            }
        };
        self.clamp_output(y)
    }

    /// `log |f'(x)|`. The non-uniform expansion potential is its negative.
    pub fn log_deriv(&self, x: f64) -> Result<f64> {
        self.check_input(x)?;
        Ok(match self.kind {
            MapKind::Doubling => std::f64::consts::LN_2,
            MapKind::LorenzQuotient(LorenzQuotientParams { alpha })
            | MapKind::GeometricLorenz2d(GeometricLorenz2DParams { alpha, .. }) => {
                (2.0 * alpha).ln() + (alpha - 1.0) * x.abs().ln()
            }
        })
    }

    /// Truncated distance `d_delta(x, S)` for this model's singular set.
    pub fn dist_delta(&self, x: f64, delta: f64) -> Result<f64> {
        dist_delta(x, &self.singular_set, delta)
    }

    /// Records the orbit of `x0` for `n` points (`x0` included), stopping early
    /// when an iterate enters the singularity guard.
    pub fn orbit(&self, x0: f64, n: usize) -> OrbitSegment {
        let mut iterates = Vec::with_capacity(n);
        let mut hit = None;
        let mut x = x0;
        for j in 0..n {
            if self.dist_to_singular(x) <= SINGULARITY_GUARD {
                hit = Some(j);
                break;
            }
            iterates.push(x);
            if j + 1 < n {
                match self.eval_map(x) {
                    Ok(y) => x = y,
                    Err(_) => {
                        hit = Some(j + 1);
                        break;
                    }
                }
            }
        }
        OrbitSegment {
            initial: x0,
            length: n,
            iterates,
            hit_singularity: hit,
        }
    }

    /// `S_n phi(x) = sum_{j<n} phi(f^j x)`.
    pub fn birkhoff_sum<F: Fn(f64) -> f64>(&self, phi: F, x: f64, n: usize) -> Result<f64> {
        self.try_birkhoff_sum(|y| Ok(phi(y)), x, n)
    }

    /// Birkhoff sum of a fallible observable; the observable's own errors
    /// propagate unchanged.
    pub fn try_birkhoff_sum<F>(&self, phi: F, x: f64, n: usize) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        if n == 0 {
            return Err(Error::Precondition("Birkhoff sum needs n >= 1".into()));
        }
        let mut acc = CompensatedSum::new();
        let mut cur = x;
        for j in 0..n {
            if self.dist_to_singular(cur) <= SINGULARITY_GUARD {
                return Err(Error::HitSingularity { index: j });
            }
            acc.add(phi(cur)?);
            if j + 1 < n {
                cur = self.eval_map(cur)?;
            }
        }
        Ok(acc.value())
    }

    /// `(1/n) S_n psi(x)` with `psi = -log|f'|`.
    pub fn expansion_average(&self, x: f64, n: usize) -> Result<f64> {
        let s = self.try_birkhoff_sum(|y| self.log_deriv(y), x, n)?;
        Ok(-s / n as f64)
    }

    /// `(1/n) S_n |log d_delta(., S)|`.
    pub fn recurrence_average(&self, x: f64, n: usize, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::Precondition("delta must be positive".into()));
        }
        let s = self.try_birkhoff_sum(|y| Ok(self.dist_delta(y, delta)?.ln().abs()), x, n)?;
        Ok(s / n as f64)
    }

    /// The planar skew product of the geometric Lorenz model.
    pub fn eval_2d(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        let MapKind::GeometricLorenz2d(params) = self.kind else {
            return Err(Error::Precondition(
                "eval_2d requires a geometric_lorenz_2d model".into(),
            ));
        };
        let (x, y) = p;
        let fx = self.eval_map(x)?;
        let branch = if x < 0.0 { -1.0 } else { 1.0 };
        Ok((fx, params.lambda_s * y + params.offset * branch))
    }

    /// Stable contraction factor of the 2D model.
    pub fn lambda_s(&self) -> Option<f64> {
        match self.kind {
            MapKind::GeometricLorenz2d(p) => Some(p.lambda_s),
            _ => None,
        }
    }
}

#[inline]
fn lorenz_branch(x: f64, alpha: f64) -> f64 {
    let v = 2.0 * x.abs().powf(alpha) - 1.0;
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `d_delta(x, S)`: the distance to `S` when it is below `delta`, else 1.
/// An empty `S` gives 1 everywhere.
pub fn dist_delta(x: f64, singular_set: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    let d = singular_set
        .iter()
        .map(|s| (x - s).abs())
        .fold(f64::INFINITY, f64::min);
    if d == 0.0 {
        return Err(Error::SingularInput { x });
    }
    Ok(if d < delta { d } else { 1.0 })
}

/// A recorded orbit `x_0, f(x_0), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub initial: f64,
    /// Requested number of points.
    pub length: usize,
    pub iterates: Vec<f64>,
    /// Index of the first iterate that entered the singularity guard.
    pub hit_singularity: Option<usize>,
}

impl OrbitSegment {
    pub fn completed(&self) -> bool {
        self.hit_singularity.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lq() -> MapModel {
        MapModel::lorenz_quotient(0.75).unwrap()
    }

    #[test]
    fn eval_map_examples() {
        assert!((MapModel::doubling().eval_map(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(lq().eval_map(1.0).unwrap(), 1.0);
        assert_eq!(lq().eval_map(-1.0).unwrap(), -1.0);
    }

    #[test]
    fn eval_map_errors() {
        assert!(matches!(lq().eval_map(0.0), Err(Error::SingularInput { .. })));
        assert!(matches!(lq().eval_map(1e-301), Err(Error::SingularInput { .. })));
        assert!(matches!(lq().eval_map(1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(lq().eval_map(f64::NAN), Err(Error::OutOfDomain { .. })));
        assert!(MapModel::lorenz_quotient(0.7).is_err());
        assert!(MapModel::lorenz_quotient(1.0).is_err());
    }

    #[test]
    fn log_deriv_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(MapModel::doubling().log_deriv(0.123).unwrap(), ln2);
        assert!((lq().log_deriv(1.0).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        let v = lq().log_deriv(0.01).unwrap();
        assert!((v - 1.556758).abs() < 1e-6);
    }

    #[test]
    fn log_deriv_matches_finite_difference() {
        let m = lq();
        let h = 1e-8;
        for &x in &[0.01, 0.2, -0.4, 0.9] {
            let fd = (m.eval_map(x + h).unwrap() - m.eval_map(x - h).unwrap()) / (2.0 * h);
            let exact = m.log_deriv(x).unwrap();
            assert!((fd.abs().ln() - exact).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn dist_delta_examples() {
        assert_eq!(dist_delta(0.05, &[0.0], 0.1).unwrap(), 0.05);
        assert_eq!(dist_delta(0.5, &[0.0], 0.1).unwrap(), 1.0);
        assert_eq!(dist_delta(0.05, &[0.0], 0.05).unwrap(), 1.0);
        assert!(matches!(dist_delta(0.0, &[0.0], 0.1), Err(Error::SingularInput { .. })));
        assert_eq!(dist_delta(0.3, &[], 0.1).unwrap(), 1.0);
    }

    #[test]
    fn birkhoff_sum_examples() {
        let d = MapModel::doubling();
        assert!((d.birkhoff_sum(|x| x, 0.1, 3).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(lq().birkhoff_sum(|_| 1.0, 0.37, 17).unwrap(), 17.0);
        assert_eq!(d.birkhoff_sum(|_| 1.0, 0.37, 17).unwrap(), 17.0);
    }

    #[test]
    fn birkhoff_sum_step_by_step_oracle() {
        // Independent iteration of the closed-form branch.
        let mut x: f64 = 0.3;
        let mut sum = 0.0;
        for _ in 0..5 {
            sum += x;
            let v = 2.0 * x.abs().powf(0.75) - 1.0;
            x = if x < 0.0 { -v } else { v };
        }
        let got = lq().birkhoff_sum(|y| y, 0.3, 5).unwrap();
        assert!((got - sum).abs() < 1e-14, "{got} vs {sum}");
    }

    #[test]
    fn birkhoff_sum_reports_singularity_index() {
        // f(x) = 0 at |x| = 2^(-1/alpha).
        let x = 0.5f64.powf(1.0 / 0.75);
        let m = lq();
        let fx = m.eval_map(x).unwrap();
        if fx == 0.0 {
            assert_eq!(
                m.birkhoff_sum(|y| y, x, 3),
                Err(Error::HitSingularity { index: 1 })
            );
        }
        assert_eq!(
            m.birkhoff_sum(|y| y, 0.0, 3),
            Err(Error::HitSingularity { index: 0 })
        );
    }

    #[test]
    fn expansion_average_examples() {
        let ln2 = std::f64::consts::LN_2;
        let v = MapModel::doubling().expansion_average(0.123, 100).unwrap();
        assert!((v + ln2).abs() < 1e-15);
        for n in [1, 7, 50] {
            let v = lq().expansion_average(1.0, n).unwrap();
            assert!((v + 1.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn recurrence_average_examples() {
        assert_eq!(lq().recurrence_average(1.0, 25, 0.1).unwrap(), 0.0);
        let v = lq().recurrence_average(0.05, 1, 0.1).unwrap();
        assert!((v - 2.995732).abs() < 1e-6);
        assert_eq!(MapModel::doubling().recurrence_average(0.3, 10, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn orbit_segment_records_iterates() {
        let m = lq();
        let seg = m.orbit(0.3, 10);
        assert!(seg.completed());
        assert_eq!(seg.iterates.len(), 10);
        for w in seg.iterates.windows(2) {
            assert_eq!(w[1], m.eval_map(w[0]).unwrap());
        }
        let seg = m.orbit(0.0, 4);
        assert_eq!(seg.hit_singularity, Some(0));
    }

    #[test]
    fn eval_2d_examples() {
        let m = MapModel::geometric_lorenz_2d(GeometricLorenz2DParams::default()).unwrap();
        let a = m.eval_2d((0.4, 0.9)).unwrap();
        let b = m.eval_2d((0.4, -0.1)).unwrap();
        assert_eq!(a.0, b.0);
        assert!(((a.1 - b.1) - 0.2).abs() < 1e-15);

        let (mut p, mut q) = ((0.4, 0.5), (0.4, -0.5));
        for _ in 0..10 {
            p = m.eval_2d(p).unwrap();
            q = m.eval_2d(q).unwrap();
        }
        // measured against the initial gap of 1
        let gap = (p.1 - q.1).abs();
        assert!((gap - 1.024e-7).abs() < 1e-10);
        assert!(lq().eval_2d((0.4, 0.0)).is_err());
        assert!(matches!(m.eval_2d((0.0, 0.0)), Err(Error::SingularInput { .. })));
    }

    proptest! {
        #[test]
        fn lorenz_quotient_maps_into_domain(x in -1.0f64..=1.0) {
            prop_assume!(x != 0.0);
            let y = lq().eval_map(x).unwrap();
            prop_assert!((-1.0..=1.0).contains(&y));
        }

        #[test]
        fn doubling_maps_into_domain(x in 0.0f64..=1.0) {
            let y = MapModel::doubling().eval_map(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&y));
        }

        #[test]
        fn lorenz_quotient_is_odd(x in 1e-12f64..=1.0) {
            let m = lq();
            prop_assert_eq!(m.eval_map(-x).unwrap(), -m.eval_map(x).unwrap());
        }

        #[test]
        fn birkhoff_cocycle(x in -1.0f64..=1.0, n in 1usize..200, k in 1usize..200) {
            prop_assume!(x != 0.0);
            let m = lq();
            let phi = |y: f64| y.sin() + 0.3;
            let seg = m.orbit(x, n + 1);
            prop_assume!(seg.completed());
            let fnx = seg.iterates[n];
            let whole = m.birkhoff_sum(phi, x, n + k);
            let (a, b) = (m.birkhoff_sum(phi, x, n), m.birkhoff_sum(phi, fnx, k));
            prop_assume!(whole.is_ok() && b.is_ok());
            let (whole, a, b) = (whole.unwrap(), a.unwrap(), b.unwrap());
            let scale = whole.abs().max(1.0);
            prop_assert!((whole - (a + b)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn expansion_average_bounded_by_min_derivative(x in -1.0f64..=1.0, n in 1usize..500) {
            prop_assume!(x != 0.0);
            if let Ok(v) = lq().expansion_average(x, n) {
                prop_assert!(v <= -(1.5f64.ln()) + 1e-15);
            }
        }

        #[test]
        fn dist_delta_is_truncated_distance(x in -1.0f64..=1.0, delta in 1e-6f64..1.0) {
            prop_assume!(x != 0.0);
            let d = dist_delta(x, &[0.0], delta).unwrap();
            prop_assert!(d > 0.0 && d <= 1.0);
            if x.abs() >= delta {
                prop_assert_eq!(d, 1.0);
            } else {
                prop_assert_eq!(d, x.abs());
            }
        }
    }
}
