//! Collapse of Birkhoff averages along stable leaves of the geometric Lorenz
//! return map.

use crate::base_dynamics::MapModel;
use crate::error::{Error, Result};

/// `|(1/n) S_n phi(x, y1) - (1/n) S_n phi(x, y2)|` under the 2D model.
pub fn leafwise_average_gap<F>(
    model: &MapModel,
    phi: F,
    x: f64,
    y1: f64,
    y2: f64,
    n: usize,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if n == 0 {
        return Err(Error::Precondition("need n >= 1".into()));
    }
    let mut a = (x, y1);
    let mut b = (x, y2);
    let mut gap = 0.0;
    for j in 0..n {
        gap += phi(a.0, a.1) - phi(b.0, b.1);
        if j + 1 < n {
            a = model.eval_2d(a).map_err(|e| hit(e, j + 1))?;
            b = model.eval_2d(b).map_err(|e| hit(e, j + 1))?;
        }
    }
    Ok((gap / n as f64).abs())
}

fn hit(e: Error, index: usize) -> Error {
    match e {
        Error::SingularInput { .. } => Error::HitSingularity { index: index - 1 },
        other => other,
    }
}

/// `L |y1 - y2| (1 - lambda^n) / (n (1 - lambda))`, which never exceeds
/// `L |y1 - y2| / (n (1 - lambda))`.
pub fn leafwise_gap_bound(lipschitz: f64, y_gap: f64, n: usize, lambda_s: f64) -> f64 {
    let n_f = n as f64;
    lipschitz * y_gap.abs() * (1.0 - lambda_s.powi(n as i32)) / (n_f * (1.0 - lambda_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_dynamics::GeometricLorenz2DParams;

    fn model() -> MapModel {
        MapModel::geometric_lorenz_2d(GeometricLorenz2DParams::default()).unwrap()
    }

    #[test]
    fn same_point_has_zero_gap() {
        let g = leafwise_average_gap(&model(), |x, y| x * y, 0.3, 0.4, 0.4, 50).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn y_independent_observable_has_zero_gap() {
        let g = leafwise_average_gap(&model(), |x, _| x.sin(), 0.3, 0.9, -0.9, 50).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn gap_below_geometric_bound() {
        let g = leafwise_average_gap(&model(), |_, y| y, 0.37, 0.5, -0.5, 100).unwrap();
        assert!(g <= 1.0 / (100.0 * 0.8));
        assert!(g <= leafwise_gap_bound(1.0, 1.0, 100, 0.2) * (1.0 + 1e-12));
        // phi = y is the extremal case: the bound is attained
        assert!((g - leafwise_gap_bound(1.0, 1.0, 100, 0.2)).abs() < 1e-15);
    }

    #[test]
    fn requires_2d_model() {
        let m = MapModel::lorenz_quotient(0.75).unwrap();
        assert!(leafwise_average_gap(&m, |_, y| y, 0.3, 0.1, 0.2, 5).is_err());
    }
}
