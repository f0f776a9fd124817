//! Monte Carlo measurement layer: physical-measure averages, lambda-sampling
//! of `M_r`, deviation-set volumes for the base map and the semiflow, and
//! log-linear rate fits.
//!
//! Every estimator is a deterministic function of its arguments and seed.
//! Sample `i` draws from [`rng::stream`](crate::rng::stream)`(seed, i)`,
//! samples are evaluated on the current rayon pool, and reductions run in
//! index order, so the thread count never changes a result bit.

mod fit;
mod orbit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_dynamics::MapModel;
use crate::error::{Error, Result};
use crate::numeric::{mean_and_sd, CompensatedSum};
use crate::rng::{derive_seed, stream};
use crate::suspension::{
    flow_time_average, induced_observable, roof_eval, FlowObservable, RoofSpec, SuspensionPoint,
};

pub use fit::{fit_exponential_rate, HorizonPoint, RateFit, MIN_HITS, MIN_POINTS};
pub use orbit::{uniform_base_point, BaseOrbit};

/// Abort tolerance for long-orbit averages.
pub const MAX_ABORTED_FRACTION: f64 = 0.01;

/// Cross-orbit spread above this multiple of the within-orbit standard error
/// flags a possibly non-unique physical measure.
pub const NON_UNIQUE_SPREAD_FACTOR: f64 = 5.0;

const BATCHES: usize = 32;

pub(crate) fn par_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// A pooled long-orbit average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageEstimate {
    pub value: f64,
    /// Standard error from the spread of per-orbit means.
    pub stderr: f64,
    pub n_orbits: usize,
    pub orbit_length: usize,
    pub burn_in: usize,
    /// Orbits discarded after hitting the singularity guard.
    pub aborted: usize,
    /// Sample standard deviation of the per-orbit means.
    pub orbit_spread: f64,
    /// Root-mean-square batch-means standard error within single orbits.
    pub within_orbit_stderr: f64,
    /// Set when `orbit_spread > 5 * within_orbit_stderr`.
    pub non_unique_warning: bool,
}

/// Orbit-averaging parameters shared by the long-orbit estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitPlan {
    #[serde(default = "default_n_orbits")]
    pub n_orbits: usize,
    #[serde(default = "default_orbit_length")]
    pub orbit_length: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_n_orbits() -> usize {
    16
}
fn default_orbit_length() -> usize {
    1_000_000
}
fn default_burn_in() -> usize {
    1_000
}

impl Default for OrbitPlan {
    fn default() -> Self {
        Self {
            n_orbits: default_n_orbits(),
            orbit_length: default_orbit_length(),
            burn_in: default_burn_in(),
        }
    }
}

impl OrbitPlan {
    pub fn new(n_orbits: usize, orbit_length: usize, burn_in: usize) -> Self {
        Self {
            n_orbits,
            orbit_length,
            burn_in,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_orbits < 2 {
            return Err(Error::Precondition("need at least 2 orbits".into()));
        }
        if self.orbit_length < 10 * self.burn_in || self.orbit_length < BATCHES {
            return Err(Error::Precondition(format!(
                "orbit length {} must be >= 10 * burn-in ({}) and >= {BATCHES}",
                self.orbit_length, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Per-orbit means of several observables plus their batch-mean errors.
struct OrbitMeans {
    means: Vec<f64>,
    batch_stderr: Vec<f64>,
}

fn orbit_means<F>(
    model: &MapModel,
    plan: &OrbitPlan,
    seed: u64,
    index: usize,
    observables: &F,
    width: usize,
) -> Result<OrbitMeans>
where
    F: Fn(f64, &mut [f64]) -> Result<()>,
{
    let mut orbit = BaseOrbit::start(model, stream(seed, index as u64));
    for _ in 0..plan.burn_in {
        orbit.advance()?;
    }
    let batch_len = plan.orbit_length / BATCHES;
    let mut vals = vec![0.0; width];
    let mut batch = vec![CompensatedSum::new(); width];
    let mut batch_means: Vec<Vec<f64>> = vec![Vec::with_capacity(BATCHES); width];
    let mut total = vec![CompensatedSum::new(); width];
    for j in 0..plan.orbit_length {
        observables(orbit.current(), &mut vals)?;
        for k in 0..width {
            batch[k].add(vals[k]);
            total[k].add(vals[k]);
        }
        if (j + 1) % batch_len == 0 && batch_means[0].len() < BATCHES {
            for k in 0..width {
                batch_means[k].push(batch[k].value() / batch_len as f64);
                batch[k] = CompensatedSum::new();
            }
        }
        if j + 1 < plan.orbit_length {
            orbit.advance()?;
        }
    }
    let n = plan.orbit_length as f64;
    Ok(OrbitMeans {
        means: total.iter().map(|t| t.value() / n).collect(),
        batch_stderr: batch_means
            .iter()
            .map(|b| mean_and_sd(b).map_or(0.0, |(_, sd)| sd / (b.len() as f64).sqrt()))
            .collect(),
    })
}

fn collect_orbits<F>(
    model: &MapModel,
    plan: &OrbitPlan,
    seed: u64,
    observables: F,
    width: usize,
) -> Result<(Vec<OrbitMeans>, usize)>
where
    F: Fn(f64, &mut [f64]) -> Result<()> + Sync + Send,
{
    plan.validate()?;
    let results = par_indexed(plan.n_orbits, |i| {
        orbit_means(model, plan, seed, i, &observables, width)
    });
    let mut kept = Vec::with_capacity(results.len());
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(m) => kept.push(m),
            Err(Error::HitSingularity { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if aborted as f64 > MAX_ABORTED_FRACTION * plan.n_orbits as f64 || kept.len() < 2 {
        return Err(Error::TooManyAborted {
            aborted,
            total: plan.n_orbits,
        });
    }
    Ok((kept, aborted))
}

pub(crate) fn summarize_orbits(
    per_orbit: &[f64],
    within: impl Iterator<Item = f64>,
    orbit_length: usize,
    burn_in: usize,
    aborted: usize,
    value: f64,
    stderr: f64,
) -> AverageEstimate {
    let spread = mean_and_sd(per_orbit).map_or(0.0, |(_, sd)| sd);
    let within: Vec<f64> = within.collect();
    let within_rms = (within.iter().map(|v| v * v).sum::<f64>() / within.len() as f64).sqrt();
    let non_unique = spread > NON_UNIQUE_SPREAD_FACTOR * within_rms;
    if non_unique {
        log::warn!(
            "NonUniqueMeasure: cross-orbit spread {spread:.3e} exceeds {NON_UNIQUE_SPREAD_FACTOR} x within-orbit stderr {within_rms:.3e}"
        );
    }
    AverageEstimate {
        value,
        stderr,
        n_orbits: per_orbit.len(),
        orbit_length,
        burn_in,
        aborted,
        orbit_spread: spread,
        within_orbit_stderr: within_rms,
        non_unique_warning: non_unique,
    }
}

/// Pooled Birkhoff average `mu(phi)` over orbits started uniformly in the
/// domain, after discarding `burn_in` iterates.
pub fn estimate_base_average<F>(
    model: &MapModel,
    phi: F,
    plan: &OrbitPlan,
    seed: u64,
) -> Result<AverageEstimate>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let (orbits, aborted) = collect_orbits(
        model,
        plan,
        seed,
        |x, out| {
            out[0] = phi(x);
            Ok(())
        },
        1,
    )?;
    let means: Vec<f64> = orbits.iter().map(|o| o.means[0]).collect();
    let (value, sd) = mean_and_sd(&means).expect("at least two orbits");
    Ok(summarize_orbits(
        &means,
        orbits.iter().map(|o| o.batch_stderr[0]),
        plan.orbit_length,
        plan.burn_in,
        aborted,
        value,
        sd / (means.len() as f64).sqrt(),
    ))
}

/// `nu(psi) = mu(phi) / mu(r)` with `phi` the induced observable. The standard
/// error comes from the delta method applied to the per-orbit ratio.
pub fn nu_average(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    plan: &OrbitPlan,
    seed: u64,
) -> Result<AverageEstimate> {
    let (orbits, aborted) = collect_orbits(
        model,
        plan,
        seed,
        |x, out| {
            out[0] = induced_observable(psi, model, roof, x)?;
            out[1] = roof_eval(roof, model, x)?;
            Ok(())
        },
        2,
    )?;
    let k = orbits.len() as f64;
    let phi_bar = orbits.iter().map(|o| o.means[0]).sum::<f64>() / k;
    let r_bar = orbits.iter().map(|o| o.means[1]).sum::<f64>() / k;
    if r_bar <= roof.r0 / 2.0 {
        return Err(Error::DegenerateRoof {
            mean: r_bar,
            half_r0: roof.r0 / 2.0,
        });
    }
    let ratio = phi_bar / r_bar;
    let linearized: Vec<f64> = orbits
        .iter()
        .map(|o| (o.means[0] - ratio * o.means[1]) / r_bar)
        .collect();
    let sd = mean_and_sd(&linearized).map_or(0.0, |(_, sd)| sd);
    let per_orbit: Vec<f64> = orbits.iter().map(|o| o.means[0] / o.means[1]).collect();
    Ok(summarize_orbits(
        &per_orbit,
        orbits
            .iter()
            .map(|o| (o.batch_stderr[0] + ratio.abs() * o.batch_stderr[1]) / r_bar),
        plan.orbit_length,
        plan.burn_in,
        aborted,
        ratio,
        sd / k.sqrt(),
    ))
}

/// A point of `M_r` drawn from `lambda` via importance weight `r(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub point: SuspensionPoint,
    pub weight: f64,
}

/// `x ~ U(domain)`, `s ~ U[0, r(x))`, weight `r(x)`. Then
/// `(|M| / N) sum w_i 1_A(z_i)` is an unbiased estimator of `lambda(A)`.
pub fn sample_lambda(
    model: &MapModel,
    roof: &RoofSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<WeightedSample>> {
    if n == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    par_indexed(n, |i| {
        use rand::Rng;
        let mut rng = stream(seed, i as u64);
        let (x, _) = uniform_base_point(model, &mut rng);
        let r = roof_eval(roof, model, x)?;
        let u: f64 = rng.random();
        // u * r < r for u < 1 except when rounding lands exactly on r
        let s = (u * r).min(r.next_down());
        Ok(WeightedSample {
            point: SuspensionPoint { x, s },
            weight: r,
        })
    })
    .into_iter()
    .collect()
}

/// Volume estimate for a deviation or survival set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub stderr: f64,
    /// Samples counted inside the set (aborted samples included).
    pub hits: usize,
    pub samples: usize,
    pub aborted: usize,
}

impl VolumeEstimate {
    /// Estimate from per-sample contributions `c_i = scale * w_i * 1_A(z_i)`.
    pub(crate) fn from_contributions(contrib: &[f64], hits: usize, aborted: usize) -> Self {
        let n = contrib.len();
        let mean = contrib.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = contrib.iter().map(|c| (c - mean) * (c - mean)).sum();
            (ss / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            volume: mean,
            stderr,
            hits,
            samples: n,
            aborted,
        }
    }

    /// Fraction estimate for unweighted indicator samples.
    pub(crate) fn from_flags(flags: &[(bool, bool)]) -> Self {
        let contrib: Vec<f64> = flags.iter().map(|&(hit, _)| if hit { 1.0 } else { 0.0 }).collect();
        let hits = flags.iter().filter(|f| f.0).count();
        let aborted = flags.iter().filter(|f| f.1).count();
        Self::from_contributions(&contrib, hits, aborted)
    }

    pub fn horizon_point(&self, t: f64) -> HorizonPoint {
        HorizonPoint {
            t,
            volume: self.volume,
            stderr: self.stderr,
            hits: Some(self.hits),
        }
    }
}

/// `lambda{ z : |(1/T) int_0^T psi(X^t z) dt - nu_hat| > eps }` over the given
/// lambda-samples. Samples whose orbit aborts count as hits.
pub fn deviation_volume(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    nu_hat: f64,
    epsilon: f64,
    t: f64,
    samples: &[WeightedSample],
) -> Result<VolumeEstimate> {
    let averages = flow_averages(psi, model, roof, t, samples)?;
    Ok(threshold_averages(model, &averages, samples, nu_hat, epsilon))
}

/// Time averages for every sample at horizon `t`; `None` marks an abort.
pub fn flow_averages(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    t: f64,
    samples: &[WeightedSample],
) -> Result<Vec<Option<f64>>> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("horizon {t} must be > 0")));
    }
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    samples
        .par_iter()
        .map(|w| match flow_time_average(psi, model, roof, w.point, t) {
            Ok(v) => Ok(Some(v)),
            Err(Error::HitSingularity { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Turns precomputed time averages into a deviation-volume estimate. Sharing
/// the averages across several `epsilon` values keeps the estimates nested.
pub fn threshold_averages(
    model: &MapModel,
    averages: &[Option<f64>],
    samples: &[WeightedSample],
    nu_hat: f64,
    epsilon: f64,
) -> VolumeEstimate {
    let scale = model.domain_length();
    let mut hits = 0;
    let mut aborted = 0;
    let contrib: Vec<f64> = averages
        .iter()
        .zip(samples)
        .map(|(a, w)| {
            let hit = match a {
                Some(v) => (v - nu_hat).abs() > epsilon,
                None => {
                    aborted += 1;
                    true
                }
            };
            if hit {
                hits += 1;
                scale * w.weight
            } else {
                0.0
            }
        })
        .collect();
    VolumeEstimate::from_contributions(&contrib, hits, aborted)
}

/// Deviation volumes over a horizon grid, each horizon with its own
/// independent lambda-sample.
pub fn deviation_curve(
    psi: &FlowObservable,
    model: &MapModel,
    roof: &RoofSpec,
    nu_hat: f64,
    config: &DeviationConfig,
) -> Result<Vec<VolumeEstimate>> {
    config.validate()?;
    config
        .t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let samples = sample_lambda(model, roof, config.n_samples, derive_seed(config.seed, k as u64))?;
            deviation_volume(psi, model, roof, nu_hat, config.epsilon, t, &samples)
        })
        .collect()
}

/// Settings of a deviation-volume experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationConfig {
    pub epsilon: f64,
    #[serde(rename = "T_grid", alias = "t_grid")]
    pub t_grid: Vec<f64>,
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DeviationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Precondition("epsilon must be > 0".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Precondition("T_grid must hold positive horizons".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("T_grid must be strictly increasing".into()));
        }
        if self.n_samples < 1000 {
            return Err(Error::Precondition("n_samples must be >= 1000".into()));
        }
        Ok(())
    }
}

/// Lebesgue fraction of `x` with `|(1/n) S_n phi(x) - mu_hat| > eps`.
pub fn base_deviation_volume<F>(
    model: &MapModel,
    phi: F,
    mu_hat: f64,
    epsilon: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    base_indicator_volume(model, n, n_samples, seed, |orbit| {
        let mut acc = CompensatedSum::new();
        for j in 0..n {
            acc.add(phi(orbit.current()));
            if j + 1 < n {
                orbit.advance()?;
            }
        }
        Ok((acc.value() / n as f64 - mu_hat).abs() > epsilon)
    })
}

/// Lebesgue fraction of `x` whose recurrence average
/// `(1/n) S_n |log d_delta(., S)|` exceeds `eps`.
pub fn recurrence_deviation_volume(
    model: &MapModel,
    epsilon: f64,
    delta: f64,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    base_indicator_volume(model, n, n_samples, seed, |orbit| {
        let mut acc = CompensatedSum::new();
        for j in 0..n {
            acc.add(model.dist_delta(orbit.current(), delta)?.ln().abs());
            if j + 1 < n {
                orbit.advance()?;
            }
        }
        Ok(acc.value() / n as f64 > epsilon)
    })
}

fn base_indicator_volume<F>(
    model: &MapModel,
    n: usize,
    n_samples: usize,
    seed: u64,
    indicator: F,
) -> Result<VolumeEstimate>
where
    F: Fn(&mut BaseOrbit<'_>) -> Result<bool> + Sync + Send,
{
    if n == 0 || n_samples == 0 {
        return Err(Error::Precondition("n and n_samples must be >= 1".into()));
    }
    let flags: Result<Vec<(bool, bool)>> = par_indexed(n_samples, |i| {
        let mut orbit = BaseOrbit::start(model, stream(seed, i as u64));
        match indicator(&mut orbit) {
            Ok(hit) => Ok((hit, false)),
            Err(Error::HitSingularity { .. }) | Err(Error::SingularInput { .. }) => Ok((true, true)),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect();
    Ok(VolumeEstimate::from_flags(&flags?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn lq() -> MapModel {
        MapModel::lorenz_quotient(0.75).unwrap()
    }

    fn small_plan() -> OrbitPlan {
        OrbitPlan::new(8, 100_000, 1_000)
    }

    #[test]
    fn base_average_doubling_identity() {
        let est = estimate_base_average(&MapModel::doubling(), |x| x, &small_plan(), 1).unwrap();
        assert!((est.value - 0.5).abs() < 4.0 * est.stderr.max(1e-4), "{est:?}");
        assert_eq!(est.aborted, 0);
        assert!(!est.non_unique_warning);
    }

    #[test]
    fn base_average_doubling_cosine() {
        let est =
            estimate_base_average(&MapModel::doubling(), |x| (2.0 * PI * x).cos(), &small_plan(), 2)
                .unwrap();
        assert!(est.value.abs() < 4.0 * est.stderr.max(1e-4), "{est:?}");
    }

    #[test]
    fn base_average_lorenz_is_symmetric() {
        let est = estimate_base_average(&lq(), |x| x, &small_plan(), 3).unwrap();
        assert!(est.value.abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn base_average_rejects_short_orbits() {
        let plan = OrbitPlan::new(4, 5_000, 1_000);
        assert!(estimate_base_average(&lq(), |x| x, &plan, 1).is_err());
    }

    #[test]
    fn nu_average_examples() {
        let m = lq();
        let roof = RoofSpec::default();
        let one = nu_average(&FlowObservable::constant(1.0), &m, &roof, &small_plan(), 4).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);

        let flat = RoofSpec::constant(1.0).unwrap();
        let lin = FlowObservable::new(1.0, |_, s| s);
        let half = nu_average(&lin, &m, &flat, &small_plan(), 5).unwrap();
        assert!((half.value - 0.5).abs() < 1e-12);

        let px = FlowObservable::new(1.0, |x, _| x);
        let sym = nu_average(&px, &m, &roof, &small_plan(), 6).unwrap();
        assert!(sym.value.abs() < 3.0 * sym.stderr, "{sym:?}");
    }

    #[test]
    fn sample_lambda_constant_roof_weights() {
        let flat = RoofSpec::constant(2.5).unwrap();
        let samples = sample_lambda(&lq(), &flat, 500, 9).unwrap();
        assert!(samples.iter().all(|w| w.weight == 2.5 && w.point.s < 2.5));
    }

    #[test]
    fn sample_lambda_total_mass() {
        let d = MapModel::doubling();
        let flat = RoofSpec::constant(1.0).unwrap();
        let samples = sample_lambda(&d, &flat, 1000, 1).unwrap();
        let est: f64 = samples.iter().map(|w| w.weight).sum::<f64>() / 1000.0;
        assert_eq!(est, 1.0);
    }

    #[test]
    fn sample_lambda_mean_weight_matches_roof_integral() {
        let m = lq();
        let roof = RoofSpec::default();
        // oracle: int_{-1}^{1} r(x) dx = 2 r0 + 2 K int_0^delta -ln x dx
        //       = 2 + 2 delta (1 - ln delta)
        let delta: f64 = 0.1;
        let exact_mean = (2.0 + 2.0 * delta * (1.0 - delta.ln())) / 2.0;
        let samples = sample_lambda(&m, &roof, 200_000, 11).unwrap();
        let w: Vec<f64> = samples.iter().map(|s| s.weight).collect();
        let (mean, sd) = mean_and_sd(&w).unwrap();
        let se = sd / (w.len() as f64).sqrt();
        assert!((mean - exact_mean).abs() < 3.0 * se, "{mean} vs {exact_mean} (se {se})");
    }

    #[test]
    fn sample_lambda_half_fiber_unbiased() {
        let m = lq();
        let roof = RoofSpec::default();
        let samples = sample_lambda(&m, &roof, 200_000, 12).unwrap();
        let contrib: Vec<f64> = samples
            .iter()
            .map(|w| {
                let r = roof_eval(&roof, &m, w.point.x).unwrap();
                if w.point.s < r / 2.0 {
                    2.0 * w.weight
                } else {
                    0.0
                }
            })
            .collect();
        let est = VolumeEstimate::from_contributions(&contrib, 0, 0);
        let delta: f64 = 0.1;
        let exact = 0.5 * (2.0 + 2.0 * delta * (1.0 - delta.ln()));
        assert!((est.volume - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn deviation_volume_trivial_cases() {
        let m = lq();
        let roof = RoofSpec::default();
        let samples = sample_lambda(&m, &roof, 2000, 3).unwrap();
        let c = FlowObservable::constant(0.7);
        let v = deviation_volume(&c, &m, &roof, 0.7, 1e-6, 20.0, &samples).unwrap();
        assert_eq!(v.volume, 0.0);
        let px = FlowObservable::new(1.0, |x, _| x);
        let v = deviation_volume(&px, &m, &roof, 0.0, 2.5, 20.0, &samples).unwrap();
        assert_eq!(v.volume, 0.0);
    }

    #[test]
    fn deviation_volume_monotone_in_epsilon() {
        let m = lq();
        let roof = RoofSpec::default();
        let samples = sample_lambda(&m, &roof, 3000, 5).unwrap();
        let px = FlowObservable::new(1.0, |x, _| x);
        let avgs = flow_averages(&px, &m, &roof, 30.0, &samples).unwrap();
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.2, 0.4] {
            let v = threshold_averages(&m, &avgs, &samples, 0.0, eps).volume;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn doubling_flow_deviation_decreases_and_matches_grid() {
        let d = MapModel::doubling();
        let flat = RoofSpec::constant(1.0).unwrap();
        let psi = FlowObservable::new(1.0, |x, _| (2.0 * PI * x).cos());
        let cfg = DeviationConfig {
            epsilon: 0.2,
            t_grid: vec![8.0, 16.0, 32.0],
            n_samples: 40_000,
            seed: 17,
        };
        let curve = deviation_curve(&psi, &d, &flat, 0.0, &cfg).unwrap();
        assert!(curve[0].volume > curve[1].volume && curve[1].volume > curve[2].volume);

        // Deterministic grid over (x, s) at T = 8 with the same decomposition-free
        // evaluation: with r = 1, (1/T) int psi = sum over fibers of exact pieces.
        let grid = 1000usize;
        let mut inside = 0usize;
        for i in 0..grid {
            let x0 = (i as f64 + 0.5) / grid as f64;
            for k in 0..grid {
                let s = (k as f64 + 0.5) / grid as f64;
                // time s..s+8 covers: (1-s) on fiber 0, full fibers 1..7, s on fiber 8
                let mut x = x0;
                let mut acc = (1.0 - s) * (2.0 * PI * x).cos();
                for _ in 1..8 {
                    x = (2.0 * x) % 1.0;
                    acc += (2.0 * PI * x).cos();
                }
                x = (2.0 * x) % 1.0;
                acc += s * (2.0 * PI * x).cos();
                if (acc / 8.0).abs() > 0.2 {
                    inside += 1;
                }
            }
        }
        let grid_volume = inside as f64 / (grid * grid) as f64;
        let mc = curve[0];
        assert!(
            (mc.volume - grid_volume).abs() < 4.0 * mc.stderr + 2e-3,
            "MC {mc:?} vs grid {grid_volume}"
        );
    }

    #[test]
    fn base_deviation_volume_constant_observable() {
        let v = base_deviation_volume(&lq(), |_| 0.3, 0.3, 0.01, 20, 1000, 1).unwrap();
        assert_eq!(v.volume, 0.0);
    }

    #[test]
    fn base_deviation_volume_decreases_for_doubling() {
        let d = MapModel::doubling();
        let vols: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| base_deviation_volume(&d, |x| x, 0.5, 0.1, n, 100_000, 7).unwrap().volume)
            .collect();
        assert!(vols[0] > vols[1] && vols[1] > vols[2], "{vols:?}");
    }

    #[test]
    fn recurrence_volume_single_step_closed_form() {
        let m = lq();
        // For n = 1 and e^-eps < delta the set is B(0, e^-eps), of length 2 e^-eps
        // inside a domain of length 2.
        let eps: f64 = 3.0;
        let exact = (2.0 * (-eps).exp()) / 2.0;
        let v = recurrence_deviation_volume(&m, eps, 0.1, 1, 400_000, 8).unwrap();
        assert!((v.volume - exact).abs() / exact < 0.05, "{v:?} vs {exact}");
        let none = recurrence_deviation_volume(&m, 50.0, 1e-9, 1, 10_000, 8).unwrap();
        assert_eq!(none.volume, 0.0);
    }

    #[test]
    fn recurrence_volume_decays_when_delta_matches_epsilon() {
        // eps = 0.5 sits well above the recurrence mean for delta = 0.01 (~0.07)
        let m = lq();
        let pts: Vec<HorizonPoint> = [10usize, 20, 40, 80]
            .iter()
            .map(|&n| {
                recurrence_deviation_volume(&m, 0.5, 0.01, n, 100_000, 21)
                    .unwrap()
                    .horizon_point(n as f64)
            })
            .collect();
        let fit = fit_exponential_rate(&pts).unwrap();
        assert!(fit.decays_with_margin(), "{fit:?} from {pts:?}");
    }

    #[test]
    fn doubling_has_no_recurrence_volume() {
        let v = recurrence_deviation_volume(&MapModel::doubling(), 0.01, 0.1, 10, 1000, 1).unwrap();
        assert_eq!(v.volume, 0.0);
    }

    #[test]
    fn expansion_average_from_estimator() {
        let est = estimate_base_average(
            &MapModel::doubling(),
            |_| -LN_2,
            &OrbitPlan::new(2, 1000, 10),
            1,
        )
        .unwrap();
        assert_eq!(est.value, -LN_2);
    }

    #[test]
    fn estimators_are_seed_deterministic() {
        let m = lq();
        let a = base_deviation_volume(&m, |x| x, 0.0, 0.1, 30, 5000, 99).unwrap();
        let b = base_deviation_volume(&m, |x| x, 0.0, 0.1, 30, 5000, 99).unwrap();
        assert_eq!(a, b);
        let pa = estimate_base_average(&m, |x| x * x, &small_plan(), 7).unwrap();
        let pb = estimate_base_average(&m, |x| x * x, &small_plan(), 7).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn deviation_config_validation() {
        let mut cfg = DeviationConfig {
            epsilon: 0.1,
            t_grid: vec![1.0, 2.0],
            n_samples: 1000,
            seed: 0,
        };
        assert!(cfg.validate().is_ok());
        cfg.t_grid = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.t_grid = vec![1.0, 2.0];
        cfg.n_samples = 10;
        assert!(cfg.validate().is_err());
        cfg.n_samples = 1000;
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }
}
