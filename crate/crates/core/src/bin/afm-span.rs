use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use afm_span::config::RunConfig;
use afm_span::experiment::{run_experiment, Artifacts, Experiment};
use afm_span::Error;

/// Output directory override; takes precedence over the config, not over `--out`.
const OUT_ENV: &str = "AFM_SPAN_OUT";

#[derive(Parser)]
#[command(name = "afm-span", version, about = "AFM spiking-neuron simulation and SPAN training")]
struct Cli {
    /// TOML run configuration (must set `seed`)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed; required when no config file is given
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Symbol to train / evaluate / export
    #[arg(long, global = true, value_name = "LABEL")]
    symbol: Option<String>,
    /// Training epochs
    #[arg(long, global = true, value_name = "N")]
    epochs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fit the neuron to the chain latencies and export both chain traces
    Calibrate,
    /// Train one SPAN on the configured symbol
    Train,
    /// Evaluate a trained SPAN over its whole library
    Eval,
    /// Build the clock-gated multi-SPAN readout and classify its symbols
    Classify,
    /// Chain latency versus coupling
    Sweep,
    /// Write the glyphs, the library and the resolved config
    Export,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Calibrate => Experiment::Calibrate,
            Command::Train => Experiment::Train,
            Command::Eval => Experiment::Eval,
            Command::Classify => Experiment::Multispan,
            Command::Sweep => Experiment::Sweep,
            Command::Export => Experiment::Export,
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match (&cli.config, cli.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::with_seed(seed),
        (None, None) => {
            return Err(Error::Config(
                "a seed is required: pass --config with `seed = N` or --seed N".into(),
            ))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &cli.symbol {
        cfg.library.symbol = s.clone();
    }
    if let Some(e) = cli.epochs {
        cfg.trainer.epochs = e;
    }
    if let Some(dir) = cli.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
        cfg.output.dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Io { .. } => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut out = Artifacts::new(cfg.output.dir.clone());
    match run_experiment(cli.command.experiment(), &cfg, &mut out) {
        Ok(()) => {
            for p in &out.written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
