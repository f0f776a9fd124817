//! Flow-level Monte Carlo experiments: physical-measure averages, deviation
//! volumes of time averages, and survival (escape) volumes of compact sets.

use serde::{Deserialize, Serialize};

use super::{rk4_step, step_plan, LorenzParams, TrapBox, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::estimation::{par_indexed, summarize_orbits, AverageEstimate, VolumeEstimate};
use crate::numeric::{mean_and_sd, CompensatedSum};
use crate::rng::stream;

const BATCHES: usize = 32;

/// Long-orbit averaging plan for the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowAveragePlan {
    #[serde(default = "default_n_orbits")]
    pub n_orbits: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_n_orbits() -> usize {
    16
}
fn default_burn_in() -> f64 {
    100.0
}
fn default_horizon() -> f64 {
    1e4
}
fn default_step() -> f64 {
    DEFAULT_STEP
}

impl Default for FlowAveragePlan {
    fn default() -> Self {
        Self {
            n_orbits: default_n_orbits(),
            burn_in: default_burn_in(),
            horizon: default_horizon(),
            step: default_step(),
        }
    }
}

/// Integrates from `start` up to the last horizon, returning
/// `(1/T) int_0^T psi` for each horizon (trapezoid rule on the RK4 grid).
/// Leaving `trap` aborts the orbit.
fn time_averages<F>(
    p: &LorenzParams,
    start: [f64; 3],
    horizons: &[f64],
    psi: &F,
    trap: &TrapBox,
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn([f64; 3]) -> f64,
{
    let mut out = Vec::with_capacity(horizons.len());
    let mut s = start;
    let mut f_prev = psi(s);
    let mut integral = CompensatedSum::new();
    let mut t = 0.0;
    for &horizon in horizons {
        let (steps, rest) = step_plan(horizon - t, h);
        for (i, dt) in (0..steps).map(|i| (i, h)).chain((rest > 0.0).then_some((steps, rest))) {
            let next = rk4_step(p, s, dt);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { t: t + (i + 1) as f64 * h });
            }
            if !trap.contains(next) {
                return Err(Error::LeftTrap { t: t + (i + 1) as f64 * h });
            }
            let f_next = psi(next);
            integral.add(0.5 * dt * (f_prev + f_next));
            f_prev = f_next;
            s = next;
        }
        t = horizon;
        out.push(integral.value() / horizon);
    }
    Ok(out)
}

/// Pooled long-orbit estimate of `mu(psi)` on the attractor. Orbits start
/// uniformly in `trap`; the first `burn_in` time units are discarded.
pub fn estimate_flow_average<F>(
    p: &LorenzParams,
    psi: F,
    plan: &FlowAveragePlan,
    trap: &TrapBox,
    seed: u64,
) -> Result<AverageEstimate>
where
    F: Fn([f64; 3]) -> f64 + Sync + Send,
{
    if plan.n_orbits < 2 || !(plan.horizon > 0.0) || !(plan.burn_in >= 0.0) {
        return Err(Error::Precondition("flow average needs >= 2 orbits and a positive horizon".into()));
    }
    let h = plan.step;
    let batch = plan.horizon / BATCHES as f64;
    let horizons: Vec<f64> = (1..=BATCHES).map(|k| k as f64 * batch).collect();
    let results = par_indexed(plan.n_orbits, |i| -> Result<(f64, f64)> {
        let mut rng = stream(seed, i as u64);
        let start = trap.sample(&mut rng);
        let warm = super::integrate_with_step(p, super::OdeState::new(start[0], start[1], start[2]), plan.burn_in, h)?;
        let averages = time_averages(p, warm.position(), &horizons, &psi, trap, h)?;
        // cumulative averages -> per-batch means
        let mut prev = 0.0;
        let batch_means: Vec<f64> = averages
            .iter()
            .zip(&horizons)
            .map(|(a, t)| {
                let total = a * t;
                let m = (total - prev) / batch;
                prev = total;
                m
            })
            .collect();
        let within = mean_and_sd(&batch_means).map_or(0.0, |(_, sd)| sd / (BATCHES as f64).sqrt());
        Ok((*averages.last().expect("non-empty"), within))
    });
    let mut means = Vec::new();
    let mut within = Vec::new();
    let mut aborted = 0;
    for r in results {
        match r {
            Ok((m, w)) => {
                means.push(m);
                within.push(w);
            }
            Err(Error::LeftTrap { .. }) | Err(Error::NonFinite { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if means.len() < 2 || aborted as f64 > 0.01 * plan.n_orbits as f64 {
        return Err(Error::TooManyAborted {
            aborted,
            total: plan.n_orbits,
        });
    }
    let (value, sd) = mean_and_sd(&means).expect("two orbits");
    let steps = (plan.horizon / h).round() as usize;
    let burn = (plan.burn_in / h).round() as usize;
    Ok(summarize_orbits(
        &means,
        within.into_iter(),
        steps,
        burn,
        aborted,
        value,
        sd / (means.len() as f64).sqrt(),
    ))
}

/// Normalized Lebesgue volume of `{ z in U : |(1/T) int_0^T psi(X^t z) dt - mu_hat| > eps }`
/// with `U = trap`. Orbits that leave `trap` or blow up count as hits.
#[allow(clippy::too_many_arguments)]
pub fn flow_deviation_volume<F>(
    p: &LorenzParams,
    psi: F,
    mu_hat: f64,
    epsilon: f64,
    t: f64,
    n_samples: usize,
    seed: u64,
    trap: &TrapBox,
) -> Result<VolumeEstimate>
where
    F: Fn([f64; 3]) -> f64 + Sync + Send,
{
    if !(t > 0.0) || n_samples == 0 {
        return Err(Error::Precondition("need T > 0 and at least one sample".into()));
    }
    let flags: Vec<(bool, bool)> = par_indexed(n_samples, |i| {
        let mut rng = stream(seed, i as u64);
        let start = trap.sample(&mut rng);
        match time_averages(p, start, &[t], &psi, trap, DEFAULT_STEP) {
            Ok(v) => ((v[0] - mu_hat).abs() > epsilon, false),
            Err(_) => (true, true),
        }
    });
    Ok(VolumeEstimate::from_flags(&flags))
}

/// Normalized Lebesgue volume of `{ x in K : X^t(x) in K for 0 < t < T }`,
/// with membership checked at every integrator step.
pub fn escape_volume(
    p: &LorenzParams,
    k: &TrapBox,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if !(t >= 0.0) || n_samples == 0 {
        return Err(Error::Precondition("need T >= 0 and at least one sample".into()));
    }
    let (steps, rest) = step_plan(t, DEFAULT_STEP);
    let flags: Vec<(bool, bool)> = par_indexed(n_samples, |i| {
        let mut rng = stream(seed, i as u64);
        let mut s = k.sample(&mut rng);
        for dt in (0..steps).map(|_| DEFAULT_STEP).chain((rest > 0.0).then_some(rest)) {
            s = rk4_step(p, s, dt);
            if !s.iter().all(|v| v.is_finite()) {
                return (false, true);
            }
            if !k.contains(s) {
                return (false, false);
            }
        }
        (true, false)
    });
    Ok(VolumeEstimate::from_flags(&flags))
}

/// Fraction of integrator steps a long orbit spends in `k`, after a burn-in
/// of 100 time units from a uniform start in `trap`. Estimates `mu(K)`.
pub fn occupation_fraction(
    p: &LorenzParams,
    k: &TrapBox,
    horizon: f64,
    trap: &TrapBox,
    seed: u64,
) -> Result<f64> {
    let mut rng = stream(seed, 0);
    let start = trap.sample(&mut rng);
    let warm = super::integrate(p, super::OdeState::new(start[0], start[1], start[2]), 100.0)?;
    let mut s = warm.position();
    let steps = (horizon / DEFAULT_STEP).round() as u64;
    let mut inside = 0u64;
    for _ in 0..steps {
        s = rk4_step(p, s, DEFAULT_STEP);
        if k.contains(s) {
            inside += 1;
        }
    }
    Ok(inside as f64 / steps as f64)
}

/// Number of orbits, started uniformly in `trap`, that leave it before `horizon`.
pub fn trap_violations(
    p: &LorenzParams,
    trap: &TrapBox,
    n_orbits: usize,
    horizon: f64,
    seed: u64,
) -> Result<usize> {
    let v = escape_volume(p, trap, horizon, n_orbits, seed)?;
    Ok(n_orbits - v.hits)
}
