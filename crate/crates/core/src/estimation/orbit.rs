//! Lebesgue-random base orbits for Monte Carlo estimators.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;

use crate::base_dynamics::{MapKind, MapModel, SINGULARITY_GUARD};
use crate::error::{Error, Result};

/// Draws `x` uniformly from the model's domain, redrawing points inside the
/// singularity guard. Returns the point and the number of redraws.
pub fn uniform_base_point(model: &MapModel, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let (lo, hi) = model.domain();
    let mut redraws = 0;
    loop {
        let u: f64 = rng.random();
        let x = lo + (hi - lo) * u;
        if model.dist_to_singular(x) > SINGULARITY_GUARD {
            return (x, redraws);
        }
        redraws += 1;
    }
}

/// The orbit of a uniformly random base point.
///
/// For the doubling map a binary64 orbit collapses onto 0 after 53 steps, so
/// the orbit is carried as a 64-bit window onto the binary expansion of `x_0`
/// whose lower bits are drawn lazily from the sample's own stream. Because the
/// digits of a Lebesgue-random point are i.i.d. fair bits, this is an exact
/// orbit of a uniform start, not an approximation of one. Other models iterate
/// `eval_map` directly.
pub struct BaseOrbit<'a> {
    model: &'a MapModel,
    rng: ChaCha8Rng,
    x: f64,
    window: u64,
    spare: u64,
    spare_left: u32,
    index: usize,
    dyadic: bool,
    /// Points redrawn because they started inside the singularity guard.
    pub redraws: usize,
}

impl<'a> BaseOrbit<'a> {
    pub fn start(model: &'a MapModel, mut rng: ChaCha8Rng) -> Self {
        let dyadic = matches!(model.kind(), MapKind::Doubling);
        let (x, window, redraws) = if dyadic {
            let w = rng.next_u64();
            (window_to_point(w), w, 0)
        } else {
            let (x, r) = uniform_base_point(model, &mut rng);
            (x, 0, r)
        };
        Self {
            model,
            rng,
            x,
            window,
            spare: 0,
            spare_left: 0,
            index: 0,
            dyadic,
            redraws,
        }
    }

    #[inline]
    pub fn current(&self) -> f64 {
        self.x
    }

    /// Index of the current iterate.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn advance(&mut self) -> Result<()> {
        self.index += 1;
        if self.dyadic {
            if self.spare_left == 0 {
                self.spare = self.rng.next_u64();
                self.spare_left = 64;
            }
            let bit = self.spare & 1;
            self.spare >>= 1;
            self.spare_left -= 1;
            self.window = (self.window << 1) | bit;
            self.x = window_to_point(self.window);
            return Ok(());
        }
        let y = self.model.eval_map(self.x).map_err(|e| match e {
            Error::SingularInput { .. } => Error::HitSingularity {
                index: self.index - 1,
            },
            other => other,
        })?;
        if self.model.dist_to_singular(y) <= SINGULARITY_GUARD {
            return Err(Error::HitSingularity { index: self.index });
        }
        self.x = y;
        Ok(())
    }
}

#[inline]
fn window_to_point(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn doubling_orbit_does_not_collapse() {
        let m = MapModel::doubling();
        let mut orbit = BaseOrbit::start(&m, stream(1, 0));
        let mut sum = 0.0;
        for _ in 0..100_000 {
            sum += orbit.current();
            orbit.advance().unwrap();
        }
        assert!((sum / 100_000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn doubling_orbit_follows_the_map() {
        let m = MapModel::doubling();
        let mut orbit = BaseOrbit::start(&m, stream(3, 9));
        for _ in 0..200 {
            let x = orbit.current();
            orbit.advance().unwrap();
            let y = orbit.current();
            // exact up to the freshly appended low bit
            assert!((m.eval_map(x).unwrap() - y).abs() <= 2.0f64.powi(-53));
        }
    }

    #[test]
    fn lorenz_orbit_matches_eval_map() {
        let m = MapModel::lorenz_quotient(0.75).unwrap();
        let mut orbit = BaseOrbit::start(&m, stream(5, 2));
        for _ in 0..100 {
            let x = orbit.current();
            orbit.advance().unwrap();
            assert_eq!(orbit.current(), m.eval_map(x).unwrap());
        }
    }
}
