//! Runs a JSON experiment config through the same driver as the binary.
//!
//! `cargo run --example run_config -- examples/configs/simulate_quick.json out/`

use std::path::PathBuf;

use semiflow::cli_io::{run, FitOutcome, RunConfig};

fn main() -> semiflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| here.join("examples/configs/deviation_doubling_quick.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("semiflow-example"));

    let cfg = RunConfig::from_path(&config)?;
    let summary = run(&cfg, &out, true)?;
    println!("{} rows written to {}", summary.rows.len(), out.display());
    for row in summary.rows.iter().take(12) {
        println!("{:>18} {:>10.4} {:>12.4e} +- {:.1e}", row.quantity, row.horizon, row.estimate, row.stderr);
    }
    for (name, f) in &summary.fits {
        match f {
            FitOutcome::Fit(f) => println!("{name}: slope {:.4e} +- {:.1e}", f.slope, f.slope_stderr),
            FitOutcome::Refused(why) => println!("{name}: no fit ({why})"),
        }
    }
    for (name, v) in &summary.scalars {
        println!("{name} = {v}");
    }
    Ok(())
}
