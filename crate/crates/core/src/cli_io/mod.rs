//! Command-line plumbing: JSON configs in, CSV rows, a JSON summary and an
//! optional SVG plot out.
//!
//! Every output is a pure function of the config; the rayon pool size only
//! changes how fast it is produced.

mod config;
mod plot;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base_dynamics::MapModel;
use crate::error::{Error, Result};
use crate::estimation::{
    base_deviation_volume, deviation_curve, estimate_base_average, fit_exponential_rate, nu_average,
    recurrence_deviation_volume, uniform_base_point, DeviationConfig, HorizonPoint, RateFit, VolumeEstimate,
};
use crate::lorenz_ode::{
    escape_volume, estimate_flow_average, flow_deviation_volume, occupation_fraction, return_time_profile,
    TrapBox,
};
use crate::numeric::mean_and_sd;
use crate::rng::{derive_seed, stream};
use crate::suspension::{flow_time_average, lap_number, semiflow_evolve, SuspensionPoint};

pub use config::{
    BaseObservable, DeviationSystem, Experiment, FlowCoordinate, OutputPaths, RunConfig, SuspensionObservable,
};
pub use plot::{emit_plot, render_plot};

/// Column order of every results CSV.
pub const CSV_COLUMNS: [&str; 8] = [
    "experiment",
    "quantity",
    "horizon",
    "estimate",
    "stderr",
    "hits",
    "samples",
    "aborted",
];

// sub-seed labels
const SEED_AVERAGE: u64 = 1;
const SEED_CURVE: u64 = 2;
const SEED_CHECK: u64 = 3;

/// One emitted number with its provenance. `horizon` is `T`, an orbit length
/// `n`, or a distance `d`, depending on the quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub quantity: String,
    pub horizon: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub hits: usize,
    pub samples: usize,
    pub aborted: usize,
}

impl ResultRow {
    fn volume(experiment: &str, quantity: &str, horizon: f64, v: &VolumeEstimate) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            horizon,
            estimate: v.volume,
            stderr: v.stderr,
            hits: v.hits,
            samples: v.samples,
            aborted: v.aborted,
        }
    }

    fn value(experiment: &str, quantity: &str, horizon: f64, estimate: f64) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            horizon,
            estimate,
            stderr: 0.0,
            hits: 0,
            samples: 1,
            aborted: 0,
        }
    }

    fn csv_record(&self) -> [String; 8] {
        [
            self.experiment.clone(),
            self.quantity.clone(),
            format!("{:.16e}", self.horizon),
            format!("{:.16e}", self.estimate),
            format!("{:.16e}", self.stderr),
            self.hits.to_string(),
            self.samples.to_string(),
            self.aborted.to_string(),
        ]
    }
}

/// A rate fit, or the reason none was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOutcome {
    Fit(RateFit),
    Refused(String),
}

impl FitOutcome {
    fn from_points(points: &[HorizonPoint]) -> Self {
        match fit_exponential_rate(points) {
            Ok(f) => Self::Fit(f),
            Err(e) => Self::Refused(e.to_string()),
        }
    }

    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            Self::Fit(f) => Some(f),
            Self::Refused(_) => None,
        }
    }
}

/// Everything a run reports; written as the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config: RunConfig,
    pub rows: Vec<ResultRow>,
    pub fits: BTreeMap<String, FitOutcome>,
    pub scalars: BTreeMap<String, f64>,
    /// Plot file name, or why no plot was written.
    #[serde(default)]
    pub plot: Option<String>,
}

struct Outcome {
    rows: Vec<ResultRow>,
    fits: BTreeMap<String, FitOutcome>,
    scalars: BTreeMap<String, f64>,
    /// Curve to plot: quantity name and x-axis label.
    plot_series: Option<(String, &'static str)>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            fits: BTreeMap::new(),
            scalars: BTreeMap::new(),
            plot_series: None,
        }
    }

    fn curve(&mut self, id: &str, quantity: &str, axis: &'static str, curve: &[(f64, VolumeEstimate)]) {
        let points: Vec<HorizonPoint> = curve.iter().map(|(t, v)| v.horizon_point(*t)).collect();
        self.rows.extend(curve.iter().map(|(t, v)| ResultRow::volume(id, quantity, *t, v)));
        self.fits.insert(quantity.into(), FitOutcome::from_points(&points));
        self.plot_series = Some((quantity.into(), axis));
    }
}

/// Runs `config`, writing the CSV, the JSON summary and (with `plot`) an SVG
/// into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path, plot: bool) -> Result<Summary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let outcome = execute(config)?;

    let csv_path = out_dir.join(&config.output.csv);
    write_csv(&csv_path, &outcome.rows)?;

    let mut plot_note = None;
    if plot {
        plot_note = Some(match &outcome.plot_series {
            Some((quantity, axis)) => {
                let series: Vec<(f64, f64, f64)> = outcome
                    .rows
                    .iter()
                    .filter(|r| &r.quantity == quantity)
                    .map(|r| (r.horizon, r.estimate, r.stderr))
                    .collect();
                let fit = outcome.fits.get(quantity).and_then(FitOutcome::fit);
                match emit_plot(&series, fit, axis, &out_dir.join(&config.output.plot)) {
                    Ok(()) => config.output.plot.clone(),
                    Err(Error::InsufficientData(msg)) => {
                        log::warn!("no plot written: {msg}");
                        format!("skipped: {msg}")
                    }
                    Err(e) => return Err(e),
                }
            }
            None => "skipped: this experiment has no volume curve".into(),
        });
    }

    let summary = Summary {
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: config.experiment.id().into(),
        seed: config.seed,
        config: config.clone(),
        rows: outcome.rows,
        fits: outcome.fits,
        scalars: outcome.scalars,
        plot: plot_note,
    };
    let summary_path = out_dir.join(&config.output.summary);
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(|e| Error::Io(format!("{}: {e}", summary_path.display())))?;
    Ok(summary)
}

/// Writes rows under the fixed [`CSV_COLUMNS`] header.
pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record(r.csv_record()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn execute(config: &RunConfig) -> Result<Outcome> {
    let seed = config.seed;
    let id = config.experiment.id();
    let mut out = Outcome::new();
    match &config.experiment {
        Experiment::BaseCheck {
            model,
            delta,
            epsilon,
            n_grid,
            n_samples,
            check_orbits,
            check_length,
        } => {
            let m = MapModel::from_kind(*model)?;
            let bound = -m.min_expansion().ln();
            let check_seed = derive_seed(seed, SEED_CHECK);
            let results = crate::estimation::par_indexed(*check_orbits, |i| {
                let (x, _) = uniform_base_point(&m, &mut stream(check_seed, i as u64));
                m.expansion_average(x, *check_length)
            });
            let mut completed = Vec::new();
            let mut aborted = 0;
            for r in results {
                match r {
                    Ok(v) => completed.push(v),
                    Err(Error::HitSingularity { .. }) | Err(Error::SingularInput { .. }) => aborted += 1,
                    Err(e) => return Err(e),
                }
            }
            let violations = completed.iter().filter(|&&v| v > bound + 1e-12).count();
            let worst = completed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (mean, sd) = match completed.len() {
                0 => (f64::NAN, 0.0),
                1 => (completed[0], 0.0),
                _ => mean_and_sd(&completed).expect("two values"),
            };
            out.rows.push(ResultRow {
                experiment: id.into(),
                quantity: "expansion_average".into(),
                horizon: *check_length as f64,
                estimate: mean,
                stderr: sd / (completed.len().max(1) as f64).sqrt(),
                hits: violations,
                samples: completed.len(),
                aborted,
            });
            out.scalars.insert("expansion_bound".into(), bound);
            out.scalars.insert("expansion_max".into(), worst);
            out.scalars.insert("expansion_violations".into(), violations as f64);

            let curve_seed = derive_seed(seed, SEED_CURVE);
            let curve: Result<Vec<(f64, VolumeEstimate)>> = n_grid
                .iter()
                .enumerate()
                .map(|(k, &n)| {
                    let v = recurrence_deviation_volume(&m, *epsilon, *delta, n, *n_samples, derive_seed(curve_seed, k as u64))?;
                    Ok((n as f64, v))
                })
                .collect();
            out.curve(id, "recurrence_volume", "n", &curve?);
            if m.singular_set().is_empty() {
                out.fits
                    .insert("recurrence_volume".into(), FitOutcome::Refused("no singular set".into()));
            }
        }
        Experiment::Deviation { system, deviation } => {
            let dev = DeviationConfig {
                seed: derive_seed(seed, SEED_CURVE),
                ..deviation.clone()
            };
            let avg_seed = derive_seed(seed, SEED_AVERAGE);
            let (mu, curve) = match system {
                DeviationSystem::BaseMap {
                    model,
                    observable,
                    plan,
                    mu,
                } => {
                    let m = MapModel::from_kind(*model)?;
                    let phi = |x: f64| observable.eval(x);
                    let mu = match mu {
                        Some(v) => *v,
                        None => record_average(&mut out, estimate_base_average(&m, phi, plan, avg_seed)?),
                    };
                    let curve: Result<Vec<_>> = dev
                        .t_grid
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| {
                            let v = base_deviation_volume(
                                &m,
                                phi,
                                mu,
                                dev.epsilon,
                                t as usize,
                                dev.n_samples,
                                derive_seed(dev.seed, k as u64),
                            )?;
                            Ok((t, v))
                        })
                        .collect();
                    (mu, curve?)
                }
                DeviationSystem::Suspension {
                    model,
                    roof,
                    observable,
                    plan,
                    mu,
                } => {
                    let m = MapModel::from_kind(*model)?;
                    let psi = observable.build();
                    let mu = match mu {
                        Some(v) => *v,
                        None => record_average(&mut out, nu_average(&psi, &m, roof, plan, avg_seed)?),
                    };
                    let vols = deviation_curve(&psi, &m, roof, mu, &dev)?;
                    (mu, dev.t_grid.iter().copied().zip(vols).collect())
                }
                DeviationSystem::LorenzFlow {
                    lorenz,
                    trap,
                    observable,
                    plan,
                    mu,
                } => {
                    let trap = trap.unwrap_or_else(|| TrapBox::absorbing_ball(lorenz));
                    let c = observable.index();
                    let psi = move |s: [f64; 3]| s[c];
                    let mu = match mu {
                        Some(v) => *v,
                        None => record_average(&mut out, estimate_flow_average(lorenz, psi, plan, &trap, avg_seed)?),
                    };
                    let curve: Result<Vec<_>> = dev
                        .t_grid
                        .iter()
                        .enumerate()
                        .map(|(k, &t)| {
                            let v = flow_deviation_volume(
                                lorenz,
                                psi,
                                mu,
                                dev.epsilon,
                                t,
                                dev.n_samples,
                                derive_seed(dev.seed, k as u64),
                                &trap,
                            )?;
                            Ok((t, v))
                        })
                        .collect();
                    (mu, curve?)
                }
            };
            out.scalars.insert("mu".into(), mu);
            out.curve(id, "deviation_volume", "T", &curve);
        }
        Experiment::Escape {
            lorenz,
            trap,
            x_max,
            t_grid,
            n_samples,
            occupation_horizon,
        } => {
            let trap = trap.unwrap_or_else(|| TrapBox::absorbing_ball(lorenz));
            let k = trap.cut_x_above(*x_max)?;
            let occ = occupation_fraction(lorenz, &k, *occupation_horizon, &trap, derive_seed(seed, SEED_AVERAGE))?;
            if occ >= 1.0 {
                log::warn!("K holds the whole sampled orbit (occupation {occ}); survival need not decay");
            }
            out.scalars.insert("occupation_fraction".into(), occ);
            let curve_seed = derive_seed(seed, SEED_CURVE);
            let curve: Result<Vec<_>> = t_grid
                .iter()
                .enumerate()
                .map(|(i, &t)| Ok((t, escape_volume(lorenz, &k, t, *n_samples, derive_seed(curve_seed, i as u64))?)))
                .collect();
            out.curve(id, "survival_volume", "T", &curve?);
        }
        Experiment::LorenzSection {
            lorenz,
            trap,
            n_points,
            d_min,
            d_max,
        } => {
            let trap = trap.unwrap_or_else(|| TrapBox::absorbing_ball(lorenz));
            let fit = return_time_profile(lorenz, *n_points, (*d_min, *d_max), &trap)?;
            out.rows.extend(
                fit.samples
                    .iter()
                    .map(|&(d, t)| ResultRow::value(id, "return_time", d, t)),
            );
            out.scalars.insert("a".into(), fit.a);
            out.scalars.insert("b".into(), fit.b);
            out.scalars.insert("r_squared".into(), fit.r_squared);
            out.scalars.insert("trace_u".into(), fit.trace_u);
        }
        Experiment::Simulate {
            model,
            roof,
            x,
            s,
            times,
            observable,
        } => {
            let m = MapModel::from_kind(*model)?;
            let z = SuspensionPoint::new(&m, roof, *x, *s)?;
            let psi = observable.build();
            for &t in times {
                let p = semiflow_evolve(&m, roof, z, t)?;
                let laps = lap_number(&m, roof, z.x, z.s, t)?.n;
                let avg = if t > 0.0 {
                    flow_time_average(&psi, &m, roof, z, t)?
                } else {
                    psi.eval(z.x, z.s)
                };
                out.rows.push(ResultRow::value(id, "x", t, p.x));
                out.rows.push(ResultRow::value(id, "s", t, p.s));
                out.rows.push(ResultRow::value(id, "laps", t, laps as f64));
                out.rows.push(ResultRow::value(id, "time_average", t, avg));
            }
        }
    }
    Ok(out)
}

fn record_average(out: &mut Outcome, est: crate::estimation::AverageEstimate) -> f64 {
    out.scalars.insert("mu_stderr".into(), est.stderr);
    out.scalars.insert("mu_orbit_spread".into(), est.orbit_spread);
    est.value
}

/// Machine-readable error object printed by the binary on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}
