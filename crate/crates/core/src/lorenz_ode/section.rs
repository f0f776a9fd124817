//! Poincaré returns to the plane `z = rho - 1` and the logarithmic profile of
//! the return time near the trace of the origin's stable manifold.

use serde::{Deserialize, Serialize};

use super::{rk4_step, vector_field, LorenzParams, TrapBox, DEFAULT_STEP};
use crate::error::{Error, Result};

/// Section height for the classical parameters (`rho - 1`).
pub const SECTION_Z: f64 = 27.0;

const CROSSING_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-12;

pub(crate) fn section_height(p: &LorenzParams) -> f64 {
    p.rho - 1.0
}

/// A refined downward crossing of the section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCrossing {
    pub x: f64,
    pub y: f64,
    /// Height at the refined crossing, within 1e-10 of the section.
    pub z: f64,
    pub return_time: f64,
    /// `dz/dt` at the crossing; negative for downward crossings.
    pub z_dot: f64,
}

impl SectionCrossing {
    pub fn point(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Cubic Hermite interpolant of `z` over one step, `theta` in `[0, 1]`.
fn hermite_z(z0: f64, dz0: f64, z1: f64, dz1: f64, h: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0) * z0
        + (t3 - 2.0 * t2 + theta) * h * dz0
        + (-2.0 * t3 + 3.0 * t2) * z1
        + (t3 - t2) * h * dz1
}

/// Follows the orbit of `(x, y, rho - 1)` to its next downward crossing of
/// the section. The start must itself be a downward point (`dz/dt < 0`).
pub fn poincare_return(
    p: &LorenzParams,
    start: (f64, f64),
    max_time: f64,
    trap: &TrapBox,
) -> Result<SectionCrossing> {
    poincare_return_with_step(p, start, max_time, trap, DEFAULT_STEP)
}

pub fn poincare_return_with_step(
    p: &LorenzParams,
    start: (f64, f64),
    max_time: f64,
    trap: &TrapBox,
    h: f64,
) -> Result<SectionCrossing> {
    let zc = section_height(p);
    let mut s = [start.0, start.1, zc];
    if !trap.contains(s) {
        return Err(Error::LeftTrap { t: 0.0 });
    }
    if vector_field(p, s)[2] >= 0.0 {
        return Err(Error::Precondition(format!(
            "start ({}, {}) is not a downward point of the section",
            start.0, start.1
        )));
    }
    let max_steps = (max_time / h).ceil() as u64;
    for i in 0..max_steps {
        let next = rk4_step(p, s, h);
        let t_next = (i + 1) as f64 * h;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        if !trap.contains(next) {
            return Err(Error::LeftTrap { t: t_next });
        }
        if s[2] > zc && next[2] <= zc {
            return Ok(refine_crossing(p, s, next, i as f64 * h, h, zc));
        }
        s = next;
    }
    Err(Error::NoReturn { max_time })
}

fn refine_crossing(
    p: &LorenzParams,
    s0: [f64; 3],
    s1: [f64; 3],
    t0: f64,
    h: f64,
    zc: f64,
) -> SectionCrossing {
    let dz0 = vector_field(p, s0)[2];
    let dz1 = vector_field(p, s1)[2];
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hermite_z(s0[2], dz0, s1[2], dz1, h, mid) > zc {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut t = t0 + theta * h;
    let mut s = rk4_step(p, s0, theta * h);
    // Newton polish on the integrated trajectory itself
    for _ in 0..8 {
        let err = s[2] - zc;
        if err.abs() <= CROSSING_TOL {
            break;
        }
        let dz = vector_field(p, s)[2];
        let dt = -err / dz;
        s = rk4_step(p, s, dt);
        t += dt;
    }
    SectionCrossing {
        x: s[0],
        y: s[1],
        z: s[2],
        return_time: t,
        z_dot: vector_field(p, s)[2],
    }
}

/// A line `origin + u * direction` in section coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionLine {
    pub origin: (f64, f64),
    pub direction: (f64, f64),
}

impl SectionLine {
    /// Line through the z-axis along the unstable eigendirection of the origin,
    /// which is transverse to the stable-manifold trace.
    pub fn unstable_direction(p: &LorenzParams) -> Self {
        let (s, r) = (p.sigma, p.rho);
        let lambda_u = (-(s + 1.0) + ((s - 1.0) * (s - 1.0) + 4.0 * s * r).sqrt()) / 2.0;
        let (dx, dy) = (s, lambda_u + s);
        let norm = (dx * dx + dy * dy).sqrt();
        Self {
            origin: (0.0, 0.0),
            direction: (dx / norm, dy / norm),
        }
    }

    pub fn at(&self, u: f64) -> (f64, f64) {
        (
            self.origin.0 + u * self.direction.0,
            self.origin.1 + u * self.direction.1,
        )
    }
}

/// `+1` / `-1` for the wing (sign of `x`) of the next return, `0` if the orbit
/// falls into the origin without returning.
fn wing(p: &LorenzParams, start: (f64, f64), trap: &TrapBox) -> Result<i8> {
    match poincare_return(p, start, 50.0, trap) {
        Ok(c) => Ok(if c.x >= 0.0 { 1 } else { -1 }),
        Err(Error::NoReturn { .. }) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Bisects along `line` between `bracket.0` and `bracket.1` for the point
/// separating left-wing from right-wing returns, to within 1e-12.
pub fn locate_stable_trace(
    p: &LorenzParams,
    line: &SectionLine,
    bracket: (f64, f64),
    trap: &TrapBox,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let w_lo = wing(p, line.at(lo), trap)?;
    let w_hi = wing(p, line.at(hi), trap)?;
    if w_lo == 0 || w_hi == 0 || w_lo == w_hi {
        return Err(Error::TraceNotFound(format!(
            "bracket ends return to wings {w_lo} and {w_hi}"
        )));
    }
    while (hi - lo).abs() > TRACE_TOL {
        let mid = 0.5 * (lo + hi);
        match wing(p, line.at(mid), trap)? {
            0 => return Ok(mid),
            w if w == w_lo => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fit of `return_time = a - b ln(d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    /// Line parameter of the located trace.
    pub trace_u: f64,
    /// `(d, return_time)` pairs.
    pub samples: Vec<(f64, f64)>,
}

/// Samples return times at `n_points` log-spaced distances from the
/// stable-manifold trace and fits the logarithmic profile.
pub fn return_time_profile(
    p: &LorenzParams,
    n_points: usize,
    distance_range: (f64, f64),
    trap: &TrapBox,
) -> Result<ReturnTimeFit> {
    let (dmin, dmax) = distance_range;
    if !(1e-6..=1e-2).contains(&dmin) || !(1e-6..=1e-2).contains(&dmax) || dmin >= dmax {
        return Err(Error::Precondition(format!(
            "distance range ({dmin}, {dmax}) must be increasing within [1e-6, 1e-2]"
        )));
    }
    if n_points < 3 {
        return Err(Error::Precondition("need at least 3 points".into()));
    }
    let line = SectionLine::unstable_direction(p);
    // asymmetric so no bisection midpoint lands on the z-axis exactly
    let u_star = locate_stable_trace(p, &line, (-0.0137, 0.0119), trap)?;
    let (lmin, lmax) = (dmin.ln(), dmax.ln());
    let samples: Result<Vec<(f64, f64)>> = (0..n_points)
        .map(|i| {
            let ld = lmin + (lmax - lmin) * i as f64 / (n_points - 1) as f64;
            let d = ld.exp();
            let c = poincare_return(p, line.at(u_star + d), 1e3, trap)?;
            Ok((d, c.return_time))
        })
        .collect();
    let samples = samples?;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    Ok(ReturnTimeFit {
        a: intercept,
        b: -slope,
        r_squared,
        trace_u: u_star,
        samples,
    })
}
