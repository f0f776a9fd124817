//! Small numerical helpers shared by the simulation and estimation layers.

/// Neumaier (improved Kahan) compensated accumulator.
///
/// Lap numbers reach the tens of thousands over long horizons; the compensation
/// term keeps `S_n r` accurate enough that the lap bracket holds to ~1e-15
/// relative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Composite three-point Gauss-Legendre rule on `[a, b]` with `panels`
/// equal panels. Exact for polynomials up to degree five on each panel.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    const NODE: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
    const W_OUTER: f64 = 5.0 / 9.0;
    const W_MID: f64 = 8.0 / 9.0;
    let m = panels.max(1);
    let h = (b - a) / m as f64;
    let half = 0.5 * h;
    let mut acc = 0.0;
    for i in 0..m {
        let mid = a + (i as f64 + 0.5) * h;
        acc += W_OUTER * (f(mid - NODE * half) + f(mid + NODE * half)) + W_MID * f(mid);
    }
    acc * half
}

/// Mean and sample standard deviation; `None` for fewer than two values.
pub fn mean_and_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}
