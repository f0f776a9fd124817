//! Poincaré returns of the Lorenz flow to z = 27 and the logarithmic return
//! time near the stable-manifold trace.

use semiflow::lorenz_ode::{poincare_return, return_time_profile, LorenzParams, TrapBox};

fn main() -> semiflow::Result<()> {
    let p = LorenzParams::default();
    let trap = TrapBox::absorbing_ball(&p);

    let mut start = (-2.0, 1.0);
    for i in 0..5 {
        let c = poincare_return(&p, start, 1e3, &trap)?;
        println!("return {i}: ({:>9.5}, {:>9.5}) after {:.4}", c.x, c.y, c.return_time);
        start = c.point();
    }

    let fit = return_time_profile(&p, 13, (1e-6, 1e-2), &trap)?;
    println!("trace at u = {:.3e}", fit.trace_u);
    for (d, t) in &fit.samples {
        println!("d = {d:.1e}: return time {t:.5}");
    }
    println!("fit t = {:.4} - {:.4} ln d, R2 = {:.5}", fit.a, fit.b, fit.r_squared);
    Ok(())
}
