use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use floquet_cli::config::{parse_config, parse_lambda_grid, Mode, RunSpec};
use floquet_cli::experiment::{run_evolve, run_sweep, run_symmetry_check, run_vanvleck_verify, Bundle};
use floquet_cli::output::{emit_results, to_json};
use floquet_cli::CliError;

#[derive(Parser)]
#[command(name = "floquet", version, about = "Dual-drive spin ladder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one trajectory and write the CSV and report.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to `run.output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the exact and projective symmetry relations.
    SymmetryCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the effective Hamiltonian and kick residuals.
    VanvleckVerify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
        order: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve over a grid of (lambda_a, lambda_b).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Points as `a,b;a,b;...` (defaults to `run.lambda_grid`).
        #[arg(long)]
        lambda_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, mode: Mode) -> Result<RunSpec, CliError> {
    parse_config(&std::fs::read_to_string(path)?)?.with_mode(mode)
}

fn report(bundle: &Bundle, out: Option<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = out {
        for f in emit_results(bundle, &dir)? {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Evolve { config, out } => {
            let spec = load(&config, Mode::Evolve)?;
            let bundle = Bundle::Evolve(Box::new(run_evolve(&spec)?));
            report(&bundle, Some(out.unwrap_or(spec.output_path)))?;
            Ok(true)
        }
        Command::SymmetryCheck { config, out } => {
            let spec = load(&config, Mode::SymmetryCheck)?;
            let r = run_symmetry_check(&spec)?;
            print!("{}", to_json(&r)?);
            let passed = r.all_passed();
            report(&Bundle::SymmetryCheck(r), out)?;
            Ok(passed)
        }
        Command::VanvleckVerify { config, order, out } => {
            let mut spec = load(&config, Mode::VanvleckVerify)?;
            if let Some(o) = order {
                spec.order = o as usize;
            }
            let r = run_vanvleck_verify(&spec)?;
            print!("{}", to_json(&r)?);
            report(&Bundle::VanvleckVerify(r), out)?;
            Ok(true)
        }
        Command::Sweep { config, lambda_grid, out } => {
            let spec = load(&config, Mode::Sweep)?;
            let grid = match lambda_grid {
                Some(text) => parse_lambda_grid(&text)?,
                None => spec.lambda_grid.clone(),
            };
            let points = run_sweep(&spec, &grid)?;
            report(&Bundle::Sweep(points), Some(out.unwrap_or(spec.output_path)))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more relations failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
