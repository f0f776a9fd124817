//! Volume of the deviation set of the suspension flow over a horizon grid,
//! and its exponential decay rate.

use semiflow::estimation::{deviation_curve, fit_exponential_rate, nu_average, OrbitPlan};
use semiflow::{DeviationConfig, FlowObservable, MapModel, RoofSpec};

fn main() -> semiflow::Result<()> {
    let m = MapModel::lorenz_quotient(0.75)?;
    let roof = RoofSpec::default();
    let psi = FlowObservable::new(1.0, |x, _| x);

    let nu = nu_average(&psi, &m, &roof, &OrbitPlan::new(8, 200_000, 1000), 1)?;
    println!("physical average of psi = {:.5} +- {:.1e}", nu.value, nu.stderr);

    let cfg = DeviationConfig {
        epsilon: 0.1,
        t_grid: vec![25.0, 50.0, 100.0, 200.0, 400.0],
        n_samples: 20_000,
        seed: 2,
    };
    let vols = deviation_curve(&psi, &m, &roof, nu.value, &cfg)?;
    for (t, v) in cfg.t_grid.iter().zip(&vols) {
        println!("T = {t:>5}: volume {:.4e} +- {:.1e} ({} hits)", v.volume, v.stderr, v.hits);
    }
    let pts: Vec<_> = vols.iter().zip(&cfg.t_grid).map(|(v, t)| v.horizon_point(*t)).collect();
    let fit = fit_exponential_rate(&pts)?;
    println!(
        "log-volume slope {:.4e} +- {:.1e}, R2 {:.3}, excluded {:?}",
        fit.slope, fit.slope_stderr, fit.r_squared, fit.excluded
    );
    Ok(())
}
