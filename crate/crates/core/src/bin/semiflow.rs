use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use semiflow::cli_io::{error_json, run, RunConfig};
use semiflow::Error;

/// Run a suspension-flow or Lorenz-flow experiment from a JSON config.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV, the JSON summary and the plot.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write an SVG plot of the volume curve.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}

fn execute(args: &Args) -> Result<(), Error> {
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::ConfigInvalid("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
    let summary = pool.install(|| run(&config, &args.out, args.plot))?;
    println!(
        "{}: {} rows -> {}",
        summary.experiment,
        summary.rows.len(),
        args.out.join(&config.output.csv).display()
    );
    Ok(())
}
