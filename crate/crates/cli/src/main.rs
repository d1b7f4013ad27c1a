use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qmr_cli::{run_experiment, CliError, ExperimentConfig, Solver};

/// Classify color images with quaternion matrix regression.
#[derive(Parser, Debug)]
#[command(name = "qmr", version)]
struct Args {
    /// Flat TOML file with every experiment setting.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: Option<Solver>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        // The synthetic benchmark needs no files.
        None => ExperimentConfig {
            synth_classes: Some(5),
            ..Default::default()
        },
    };
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    let results = run_experiment(&cfg)?;
    println!(
        "rate {:.4} ({}/{}) written to {}",
        results.rate(),
        results.correct(),
        results.total(),
        cfg.out.display()
    );
    if let Some(p) = results.best {
        println!("params omega={} alpha={} beta={}", p.omega, p.alpha, p.beta);
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
