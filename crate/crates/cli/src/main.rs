//! `ebb84`: command-line front end for the finite-key BB84 engine.
//!
//! Exit codes: 0 on success (a zero key length is a valid answer),
//! 2 on configuration errors, 3 on numeric failures.

mod config;
mod error;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ebb84_core::{
    key_length, max_loss, optimize, sifting_equivalence, sweep, worst_case_key_length, IntensityUncertaintyModel,
    LossBudgetQuery, OptimizationSpec, Regime, SweepSpec,
};

use config::RawConfig;
use error::CliError;
use output::Table;

#[derive(Parser)]
#[command(name = "ebb84", version, about = "Finite-key secure key length for efficient decoy-state BB84")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (dotted key-value text or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output format; sweeps default to CSV, everything else to JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Optimiser seed, overriding `optimize.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Key length for the configured protocol parameters.
    Keylength,
    /// Optimise protocol parameters under the configured regime.
    Optimize,
    /// Key length over a grid of channel conditions.
    Sweep,
    /// Largest loss still meeting the target key length.
    Budget,
    /// Minimum key length under intensity uncertainty.
    Worstcase,
    /// Sifting equivalence for the configured basis biases.
    SiftEquiv,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn load(cli: &Cli) -> Result<RawConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.set("optimize.seed", seed.to_string())?;
    }
    Ok(cfg)
}

fn execute(command: Command, cfg: &RawConfig) -> Result<Table, CliError> {
    let sec = cfg.security()?;
    match command {
        Command::Keylength => {
            let channel = cfg.channel()?;
            let params = cfg.protocol()?;
            let result = key_length(&params, &channel, &sec)?;
            Ok(output::keylength(&channel, &params, &result))
        }
        Command::Optimize => {
            let channel = cfg.channel()?;
            let r = optimize(&cfg.optimization()?, &channel, &sec)?;
            Ok(output::optimized(&channel, &r))
        }
        Command::Sweep => {
            let base = cfg.channel()?;
            let spec = SweepSpec { axes: cfg.sweep_axes(&base)?, base, evaluation: cfg.evaluation()?, sec };
            Ok(output::sweep_rows(&sweep(&spec)?))
        }
        Command::Budget => {
            let (lo, hi) = cfg.budget_bracket()?;
            let query = LossBudgetQuery::new(cfg.budget_target()?, cfg.channel()?, cfg.evaluation()?, sec)
                .with_resolution(cfg.budget_resolution()?)
                .with_bracket(lo, hi);
            Ok(output::budget(&query, &max_loss(&query)?))
        }
        Command::Worstcase => {
            let channel = cfg.channel()?;
            let mut nominal = cfg.protocol()?;
            if cfg.worstcase_optimized_nominal()? {
                let base = cfg.optimization()?;
                let spec = OptimizationSpec {
                    regime: Regime::FixedPbxAndMu { pbx: nominal.pbx, mu: nominal.mu },
                    ..base
                };
                nominal = optimize(&spec, &channel, &sec)?.best_params;
            }
            let model = IntensityUncertaintyModel::new(cfg.worstcase_f()?, nominal)?
                .with_grid_points(cfg.worstcase_grid_points()?)?;
            Ok(output::worst_case(&model, &worst_case_key_length(&model, &channel, &sec)?))
        }
        Command::SiftEquiv => {
            let p = cfg.protocol()?;
            Ok(output::sifting(p.pax, p.pbx, &sifting_equivalence(p.pax, p.pbx)?))
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set up thread pool: {e}")))?;
    }
    let table = execute(cli.command, &cfg)?;
    let format = cli.format.unwrap_or(match cli.command {
        Command::Sweep => Format::Csv,
        _ => Format::Json,
    });
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json()?,
    };
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ebb84: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
