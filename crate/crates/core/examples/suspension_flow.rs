//! A semiflow orbit over the Lorenz quotient map: positions, lap numbers and
//! running time averages.

use semiflow::suspension::{flow_time_average, lap_number, roof_eval, semiflow_evolve};
use semiflow::{FlowObservable, MapModel, RoofSpec, SuspensionPoint};

fn main() -> semiflow::Result<()> {
    let m = MapModel::lorenz_quotient(0.75)?;
    let roof = RoofSpec::new(1.0, 1.0, 0.1)?;
    let z = SuspensionPoint::new(&m, &roof, 0.3, 0.25)?;
    let psi = FlowObservable::new(1.0, |x, s| x * s.cos());

    println!("r(0.3) = {:.6}, r(0.01) = {:.6}", roof_eval(&roof, &m, 0.3)?, roof_eval(&roof, &m, 0.01)?);
    println!("{:>8} {:>12} {:>12} {:>6} {:>12}", "T", "x", "s", "laps", "avg psi");
    for t in [1.0, 2.0, 5.0, 10.0, 50.0, 200.0, 1000.0] {
        let p = semiflow_evolve(&m, &roof, z, t)?;
        let lap = lap_number(&m, &roof, z.x, z.s, t)?;
        let avg = flow_time_average(&psi, &m, &roof, z, t)?;
        println!("{t:>8} {:>12.6} {:>12.6} {:>6} {avg:>12.6}", p.x, p.s, lap.n);
    }
    Ok(())
}
