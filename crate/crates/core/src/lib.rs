//! Suspension semiflows over non-uniformly expanding interval maps with
//! logarithmic roof functions, plus the Monte Carlo machinery to measure how
//! fast the volume of large-deviation sets decays.
//!
//! The crate is organised bottom-up:
//!
//! * [`base_dynamics`]: base maps, Birkhoff sums, expansion and recurrence checks.
//! * [`suspension`]: roof, lap numbers, the semiflow and flow time averages.
//! * [`estimation`]: physical-measure averages, deviation volumes, rate fits.
//! * [`lorenz_ode`]: the Lorenz equations, Poincaré returns, flow-level
//!   deviation and escape experiments, and the leafwise-average check.
//! * [`cli_io`]: JSON run configs, CSV/JSON/SVG outputs and the `run` driver.

pub mod base_dynamics;
pub mod cli_io;
pub mod error;
pub mod estimation;
pub mod lorenz_ode;
pub mod numeric;
pub mod rng;
pub mod suspension;

pub use base_dynamics::{MapKind, MapModel, OrbitSegment};
pub use error::{Error, Result};
pub use estimation::{AverageEstimate, DeviationConfig, RateFit, VolumeEstimate, WeightedSample};
pub use suspension::{FlowObservable, LapResult, RoofSpec, SuspensionPoint};
