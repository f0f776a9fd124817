//! JSON run configuration.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base_dynamics::MapKind;
use crate::error::{Error, Result};
use crate::estimation::{DeviationConfig, OrbitPlan};
use crate::lorenz_ode::{FlowAveragePlan, LorenzParams, TrapBox};
use crate::suspension::{FlowObservable, RoofSpec};

/// A complete, validated description of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every sub-seed is derived from it.
    pub seed: u64,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputPaths,
}

/// File names written inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_plot")]
    pub plot: String,
}

fn default_csv() -> String {
    "results.csv".into()
}
fn default_summary() -> String {
    "summary.json".into()
}
fn default_plot() -> String {
    "plot.svg".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            csv: default_csv(),
            summary: default_summary(),
            plot: default_plot(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Expansion and slow-recurrence checks on a base map.
    BaseCheck {
        model: MapKind,
        #[serde(default = "default_delta")]
        delta: f64,
        epsilon: f64,
        n_grid: Vec<usize>,
        n_samples: usize,
        /// Orbits whose expansion averages are checked against the bound.
        #[serde(default = "default_check_orbits")]
        check_orbits: usize,
        #[serde(default = "default_check_length")]
        check_length: usize,
    },
    /// Deviation volumes over a horizon grid, with a rate fit.
    Deviation {
        system: DeviationSystem,
        deviation: DeviationConfig,
    },
    /// Survival volumes of `K = trap ∩ {x <= x_max}` under the Lorenz flow.
    Escape {
        #[serde(default)]
        lorenz: LorenzParams,
        #[serde(default)]
        trap: Option<TrapBox>,
        x_max: f64,
        t_grid: Vec<f64>,
        n_samples: usize,
        /// Length of the orbit used to estimate `mu(K)`.
        #[serde(default = "default_occupation_horizon")]
        occupation_horizon: f64,
    },
    /// Logarithmic return-time profile near the stable-manifold trace.
    LorenzSection {
        #[serde(default)]
        lorenz: LorenzParams,
        #[serde(default)]
        trap: Option<TrapBox>,
        n_points: usize,
        d_min: f64,
        d_max: f64,
    },
    /// One semiflow trajectory sampled at the given times.
    Simulate {
        model: MapKind,
        #[serde(default)]
        roof: RoofSpec,
        x: f64,
        #[serde(default)]
        s: f64,
        times: Vec<f64>,
        observable: SuspensionObservable,
    },
}

fn default_delta() -> f64 {
    0.1
}
fn default_check_orbits() -> usize {
    1000
}
fn default_check_length() -> usize {
    1000
}
fn default_occupation_horizon() -> f64 {
    1e3
}

/// The dynamical system a deviation experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeviationSystem {
    /// Birkhoff averages of the base map; horizons are orbit lengths.
    BaseMap {
        model: MapKind,
        observable: BaseObservable,
        #[serde(default)]
        plan: OrbitPlan,
        /// Known value of `mu(phi)`; estimated when absent.
        #[serde(default)]
        mu: Option<f64>,
    },
    Suspension {
        model: MapKind,
        #[serde(default)]
        roof: RoofSpec,
        observable: SuspensionObservable,
        #[serde(default)]
        plan: OrbitPlan,
        #[serde(default)]
        mu: Option<f64>,
    },
    LorenzFlow {
        #[serde(default)]
        lorenz: LorenzParams,
        #[serde(default)]
        trap: Option<TrapBox>,
        observable: FlowCoordinate,
        #[serde(default)]
        plan: FlowAveragePlan,
        #[serde(default)]
        mu: Option<f64>,
    },
}

/// Observables `phi(x)` on the base interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseObservable {
    X,
    AbsX,
    Cos2piX,
}

impl BaseObservable {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::X => x,
            Self::AbsX => x.abs(),
            Self::Cos2piX => (TAU * x).cos(),
        }
    }
}

/// Observables `psi(x, s)` on the suspension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspensionObservable {
    X,
    Cos2piX,
    CosS,
    XCosS,
}

impl SuspensionObservable {
    pub fn build(self) -> FlowObservable {
        match self {
            Self::X => FlowObservable::new(1.0, |x, _| x),
            Self::Cos2piX => FlowObservable::new(1.0, |x, _| (TAU * x).cos()),
            Self::CosS => FlowObservable::new(1.0, |_, s| s.cos()),
            Self::XCosS => FlowObservable::new(1.0, |x, s| x * s.cos()),
        }
    }
}

/// Coordinate observables of the Lorenz flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowCoordinate {
    X,
    Y,
    Z,
}

impl FlowCoordinate {
    pub fn index(self) -> usize {
        match self {
            Self::X => 0,
            Self::Y => 1,
            Self::Z => 2,
        }
    }
}

impl Experiment {
    /// Identifier used in CSV rows and the summary.
    pub fn id(&self) -> &'static str {
        match self {
            Self::BaseCheck { .. } => "base-check",
            Self::Deviation { .. } => "deviation",
            Self::Escape { .. } => "escape",
            Self::LorenzSection { .. } => "lorenz-section",
            Self::Simulate { .. } => "simulate",
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

fn check_model(model: &MapKind) -> Result<()> {
    crate::MapModel::from_kind(*model)
        .map(|_| ())
        .map_err(|e| invalid(format!("model: {e}")))
}

fn check_trap(trap: &Option<TrapBox>) -> Result<()> {
    match trap {
        Some(t) => t.validate().map_err(|e| invalid(format!("trap: {e}"))),
        None => Ok(()),
    }
}

fn check_positive_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid(format!("{name} must hold finite positive values")));
    }
    Ok(())
}

impl RunConfig {
    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Semantic checks that the JSON shape cannot express.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("output.csv", &self.output.csv),
            ("output.summary", &self.output.summary),
            ("output.plot", &self.output.plot),
        ] {
            if v.is_empty() || v.contains(['/', '\\']) {
                return Err(invalid(format!("{name} must be a plain file name")));
            }
        }
        match &self.experiment {
            Experiment::BaseCheck {
                model,
                delta,
                epsilon,
                n_grid,
                n_samples,
                check_orbits,
                check_length,
            } => {
                check_model(model)?;
                if !(*delta > 0.0) || !(*epsilon > 0.0) {
                    return Err(invalid("delta and epsilon must be > 0"));
                }
                if n_grid.is_empty() || n_grid.contains(&0) {
                    return Err(invalid("n_grid must hold orbit lengths >= 1"));
                }
                if *n_samples == 0 || *check_orbits == 0 || *check_length == 0 {
                    return Err(invalid("sample and orbit counts must be >= 1"));
                }
            }
            Experiment::Deviation { system, deviation } => {
                deviation.validate().map_err(|e| invalid(format!("deviation: {e}")))?;
                match system {
                    DeviationSystem::BaseMap { model, plan, .. } => {
                        check_model(model)?;
                        if deviation.t_grid.iter().any(|t| t.fract() != 0.0) {
                            return Err(invalid("base_map horizons must be whole orbit lengths"));
                        }
                        plan.validate().map_err(|e| invalid(format!("plan: {e}")))?;
                    }
                    DeviationSystem::Suspension { model, roof, plan, .. } => {
                        check_model(model)?;
                        roof.validate().map_err(|e| invalid(format!("roof: {e}")))?;
                        plan.validate().map_err(|e| invalid(format!("plan: {e}")))?;
                    }
                    DeviationSystem::LorenzFlow { lorenz, trap, plan, .. } => {
                        lorenz.validate().map_err(|e| invalid(format!("lorenz: {e}")))?;
                        check_trap(trap)?;
                        if plan.n_orbits < 2 || !(plan.horizon > 0.0) || !(plan.step > 0.0) {
                            return Err(invalid("plan needs >= 2 orbits, positive horizon and step"));
                        }
                    }
                }
            }
            Experiment::Escape {
                lorenz,
                trap,
                x_max,
                t_grid,
                n_samples,
                occupation_horizon,
            } => {
                lorenz.validate().map_err(|e| invalid(format!("lorenz: {e}")))?;
                check_trap(trap)?;
                trap.unwrap_or_default()
                    .cut_x_above(*x_max)
                    .map_err(|e| invalid(format!("x_max: {e}")))?;
                check_positive_grid("t_grid", t_grid)?;
                if *n_samples == 0 || !(*occupation_horizon > 0.0) {
                    return Err(invalid("n_samples and occupation_horizon must be positive"));
                }
            }
            Experiment::LorenzSection {
                lorenz,
                trap,
                n_points,
                d_min,
                d_max,
            } => {
                lorenz.validate().map_err(|e| invalid(format!("lorenz: {e}")))?;
                check_trap(trap)?;
                if *n_points < 3 {
                    return Err(invalid("n_points must be >= 3"));
                }
                if !(1e-6..=1e-2).contains(d_min) || !(1e-6..=1e-2).contains(d_max) || d_min >= d_max {
                    return Err(invalid("need 1e-6 <= d_min < d_max <= 1e-2"));
                }
            }
            Experiment::Simulate {
                model,
                roof,
                x,
                s,
                times,
                ..
            } => {
                check_model(model)?;
                roof.validate().map_err(|e| invalid(format!("roof: {e}")))?;
                let m = crate::MapModel::from_kind(*model)?;
                crate::SuspensionPoint::new(&m, roof, *x, *s)
                    .map_err(|e| invalid(format!("start point: {e}")))?;
                if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    return Err(invalid("times must hold finite values >= 0"));
                }
            }
        }
        Ok(())
    }
}
