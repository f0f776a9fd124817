//! Non-uniform expansion and slow recurrence on the Lorenz quotient map,
//! with the doubling map as a reference.

use semiflow::estimation::{estimate_base_average, fit_exponential_rate, recurrence_deviation_volume, OrbitPlan};
use semiflow::MapModel;

fn main() -> semiflow::Result<()> {
    let quotient = MapModel::lorenz_quotient(0.75)?;
    let doubling = MapModel::doubling();

    for (name, m) in [("lorenz quotient", &quotient), ("doubling", &doubling)] {
        let plan = OrbitPlan::new(8, 200_000, 1000);
        let psi = estimate_base_average(m, |x| -m.log_deriv(x).unwrap_or(0.0), &plan, 1)?;
        println!(
            "{name}: mean of -log|f'| = {:.4} +- {:.1e}  (bound -log(min |f'|) = {:.4})",
            psi.value,
            psi.stderr,
            -m.min_expansion().ln()
        );
    }

    let x = 0.3;
    let seg = quotient.orbit(x, 10);
    println!("orbit of {x}: {:?}", seg.iterates.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());

    let (eps, delta) = (0.5, 0.01);
    let pts: Vec<_> = [10, 20, 40, 80]
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let v = recurrence_deviation_volume(&quotient, eps, delta, n, 100_000, 10 + k as u64).unwrap();
            println!("n = {n:>3}: Leb{{recurrence average > {eps}}} = {:.3e} ({} hits)", v.volume, v.hits);
            v.horizon_point(n as f64)
        })
        .collect();
    let fit = fit_exponential_rate(&pts)?;
    println!("slope {:.4} +- {:.4}, decays: {}", fit.slope, fit.slope_stderr, fit.decays_with_margin());
    Ok(())
}
