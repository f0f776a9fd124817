//! Birkhoff averages of two points on one stable leaf of the geometric Lorenz
//! return map draw together like 1/n.

use semiflow::base_dynamics::GeometricLorenz2DParams;
use semiflow::lorenz_ode::{leafwise_average_gap, leafwise_gap_bound};
use semiflow::MapModel;

fn main() -> semiflow::Result<()> {
    let m = MapModel::geometric_lorenz_2d(GeometricLorenz2DParams::default())?;
    let lambda = m.lambda_s().expect("2D model");
    let phi = |x: f64, y: f64| x + (3.0 * y).sin();
    let (x, y1, y2) = (0.4, -0.8, 0.9);

    let mut p = (x, y1);
    let mut q = (x, y2);
    for _ in 0..10 {
        p = m.eval_2d(p)?;
        q = m.eval_2d(q)?;
    }
    println!("after 10 returns the leaf gap is {:.3e}", (p.1 - q.1).abs());

    for n in [1, 10, 100, 1000] {
        let gap = leafwise_average_gap(&m, phi, x, y1, y2, n)?;
        let bound = leafwise_gap_bound(3.0, y1 - y2, n, lambda);
        println!("n = {n:>4}: gap {gap:.3e} <= bound {bound:.3e}");
    }
    Ok(())
}
