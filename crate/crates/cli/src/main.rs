use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gw2i_cli::{parse_config, run, Mode};
use gw2i_core::asymptotics::ImmigrationVariant;

/// Simulate second-order Galton-Watson processes with immigration and
/// check tail predictions against the simulation.
#[derive(Debug, Parser)]
#[command(name = "gw2i", version)]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured mode.
    #[arg(long, value_parser = ["simulate", "predict", "verify", "check-appendix"])]
    mode: Option<String>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; affects speed only.
    #[arg(long, env = "GW2_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Overrides the immigration-clan convention of heavy-offspring predictions.
    #[arg(long, value_parser = ["consistent", "verbatim"])]
    rveps_variant: Option<String>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(m) = args.mode.as_deref() {
        config.mode = Mode::parse(m).expect("clap restricts values");
    }
    if let Some(seed) = args.seed {
        config.scenario.master_seed = seed;
    }
    if let Some(v) = args.rveps_variant.as_deref() {
        config.rveps_variant = match v {
            "verbatim" => ImmigrationVariant::Verbatim,
            _ => ImmigrationVariant::Consistent,
        };
    }
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(&config, args.workers.map(|w| w as usize)) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
