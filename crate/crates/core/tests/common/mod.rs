//! Oracles written independently of the library code they check.

#![allow(dead_code)]

/// Lorenz quotient map written out from its formula.
pub fn quotient_map(alpha: f64, x: f64) -> f64 {
    x.signum() * (2.0 * x.abs().powf(alpha) - 1.0)
}

/// `r0 + K |log d|` with `d = |x|` below `delta` and 1 otherwise.
pub fn log_roof(r0: f64, k: f64, delta: f64, x: f64) -> f64 {
    let d = if x.abs() < delta { x.abs() } else { 1.0 };
    r0 + k * d.ln().abs()
}

/// `(1/T) int_0^T psi(X^t(x, s)) dt` by walking the flow and applying the
/// composite trapezoid rule with step at most `h` on each fiber segment.
pub fn stepwise_time_average<F>(
    map: impl Fn(f64) -> f64,
    roof: impl Fn(f64) -> f64,
    psi: F,
    x: f64,
    s: f64,
    t: f64,
    h: f64,
) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let mut x = x;
    let mut from = s;
    let mut left = t;
    let mut total = 0.0;
    loop {
        let r = roof(x);
        let to = (from + left).min(r);
        let len = to - from;
        let steps = ((len / h).ceil() as usize).max(1);
        let dt = len / steps as f64;
        let mut seg = 0.5 * (psi(x, from) + psi(x, to));
        for i in 1..steps {
            seg += psi(x, from + i as f64 * dt);
        }
        total += seg * dt;
        left -= len;
        if left <= 0.0 || to < r {
            break;
        }
        x = map(x);
        from = 0.0;
    }
    total / t
}

/// Exact Lebesgue measure of `{x in [0,1) : |(1/n) S_n x - mu| > eps}` for the
/// doubling map. On each dyadic interval `[k, k+1) / 2^n` the Birkhoff sum is
/// affine in the position `u` inside the interval.
pub fn doubling_identity_deviation(n: u32, mu: f64, eps: f64) -> f64 {
    let cells = 1u64 << n;
    let slope = 1.0 - 0.5f64.powi(n as i32);
    let nf = n as f64;
    let mut outside = 0.0;
    for k in 0..cells {
        let mut a = 0.0;
        for j in 0..n {
            let m = 1u64 << (n - j);
            a += (k % m) as f64 / m as f64;
        }
        let lo = ((mu - eps) * nf - a) / slope;
        let hi = ((mu + eps) * nf - a) / slope;
        let inside = (hi.min(1.0) - lo.max(0.0)).clamp(0.0, 1.0);
        outside += 1.0 - inside;
    }
    outside / cells as f64
}

/// Plain left-to-right sum of the roof along an orbit, `j < n`.
pub fn roof_birkhoff(map: impl Fn(f64) -> f64, roof: impl Fn(f64) -> f64, x: f64, n: usize) -> f64 {
    let mut cur = x;
    let mut acc = 0.0;
    let mut c = 0.0;
    for _ in 0..n {
        // Kahan
        let y = roof(cur) - c;
        let t = acc + y;
        c = (t - acc) - y;
        acc = t;
        cur = map(cur);
    }
    acc
}
