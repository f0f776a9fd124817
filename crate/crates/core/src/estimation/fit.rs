//! Log-linear rate fits of deviation volumes against the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizons with fewer positive hits are left out of a fit.
pub const MIN_HITS: usize = 5;
/// A fit needs at least this many usable horizons.
pub const MIN_POINTS: usize = 3;

/// One point of a volume-vs-horizon curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonPoint {
    /// Horizon `T` (or orbit length `n` for base-map curves).
    pub t: f64,
    pub volume: f64,
    pub stderr: f64,
    /// Number of samples that fell in the set; `None` when unknown.
    pub hits: Option<usize>,
}

impl HorizonPoint {
    pub fn new(t: f64, volume: f64, stderr: f64) -> Self {
        Self {
            t,
            volume,
            stderr,
            hits: None,
        }
    }

    fn usable(&self) -> bool {
        self.volume > 0.0 && self.hits.is_none_or(|h| h >= MIN_HITS)
    }
}

/// Result of fitting `log(volume) = intercept + slope * T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points_used: usize,
    /// Horizons dropped for zero volume or too few hits.
    pub excluded: Vec<f64>,
}

impl RateFit {
    /// The empirical form of a negative limsup: `slope + 2 stderr < 0`.
    pub fn decays_with_margin(&self) -> bool {
        self.slope + 2.0 * self.slope_stderr < 0.0
    }

    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t).exp()
    }
}

/// Weighted least squares of `log(volume)` on `T`.
///
/// Weights are `volume^2 / stderr^2`, the inverse delta-method variance of
/// `log(volume)`; when any usable point lacks a positive stderr every point is
/// weighted equally. The slope stderr takes the larger of the propagated and
/// the residual-scaled estimate.
pub fn fit_exponential_rate(points: &[HorizonPoint]) -> Result<RateFit> {
    let (used, dropped): (Vec<&HorizonPoint>, Vec<&HorizonPoint>) =
        points.iter().partition(|p| p.usable());
    let excluded = dropped.iter().map(|p| p.t).collect();
    if used.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable horizons (need {MIN_POINTS}; zero-volume or < {MIN_HITS}-hit horizons are dropped)",
            used.len()
        )));
    }
    let weighted = used.iter().all(|p| p.stderr > 0.0);
    let xs: Vec<f64> = used.iter().map(|p| p.t).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.volume.ln()).collect();
    let ws: Vec<f64> = used
        .iter()
        .map(|p| {
            if weighted {
                (p.volume / p.stderr).powi(2)
            } else {
                1.0
            }
        })
        .collect();

    let sw: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((x, y), w) in xs.iter().zip(&ys).zip(&ws) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
        syy += w * (y - ybar) * (y - ybar);
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all horizons coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| {
            let e = y - (intercept + slope * x);
            w * e * e
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dof = (used.len() - 2) as f64;
    let residual_var = ss_res / dof;
    let slope_stderr = if weighted {
        (residual_var.max(1.0) / sxx).sqrt()
    } else {
        (residual_var / sxx).sqrt()
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        points_used: used.len(),
        excluded,
    })
}
