//! Survival in a compact set that misses one wing of the attractor, and
//! deviation volumes of time averages of z.

use semiflow::estimation::fit_exponential_rate;
use semiflow::lorenz_ode::{
    escape_volume, estimate_flow_average, flow_deviation_volume, occupation_fraction, FlowAveragePlan, LorenzParams,
    TrapBox,
};

fn main() -> semiflow::Result<()> {
    let p = LorenzParams::default();
    let trap = TrapBox::absorbing_ball(&p);
    let k = trap.cut_x_above(5.0)?;

    println!("mu(K) ~ {:.3}", occupation_fraction(&p, &k, 500.0, &trap, 1)?);
    let pts: Vec<_> = [1.0, 2.0, 3.0, 4.0]
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let v = escape_volume(&p, &k, t, 5000, 10 + i as u64).unwrap();
            println!("T = {t}: survival {:.4} ({} of {})", v.volume, v.hits, v.samples);
            v.horizon_point(t)
        })
        .collect();
    let fit = fit_exponential_rate(&pts)?;
    println!("escape rate {:.3} +- {:.3}", -fit.slope, fit.slope_stderr);

    let plan = FlowAveragePlan {
        n_orbits: 4,
        horizon: 1000.0,
        ..Default::default()
    };
    let mu = estimate_flow_average(&p, |s| s[2], &plan, &trap, 2)?;
    println!("time average of z = {:.3} +- {:.3}", mu.value, mu.stderr);
    for (i, t) in [5.0, 10.0, 20.0].into_iter().enumerate() {
        let v = flow_deviation_volume(&p, |s| s[2], mu.value, 3.0, t, 1000, 20 + i as u64, &trap)?;
        println!("T = {t}: Leb{{|avg z - mu| > 3}} = {:.4}", v.volume);
    }
    Ok(())
}
