use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use espsim::cli::{self, CliError, Report, Scenario, SweepParam};
use espsim::PowerParams;

#[derive(Parser)]
#[command(name = "espsim", version, about = "Energy-efficient speed scaling simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every section of a scenario and report ratios.
    Run {
        file: PathBuf,
        /// Output path; `-` for stdout. Overrides the scenario's `output`.
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Repeat `run` over a list of values for one parameter.
    Sweep {
        file: PathBuf,
        /// One of alpha, P, n_jobs.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Print lower bounds only.
    Bounds {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Play the speed-vector game with the robust vector.
    Game {
        #[arg(long = "P")]
        processors: u32,
        #[arg(long)]
        alpha: f64,
        /// Total power of the speed vector; defaults to 1/(alpha-1).
        #[arg(long)]
        budget: Option<f64>,
        #[arg(short, long)]
        output: Option<String>,
    },
}

fn execute(command: Command) -> Result<Report, CliError> {
    let seed = cli::seed_from_env()?;
    let (report, output, fallback) = match command {
        Command::Run { file, output } => {
            let s = Scenario::load(&file)?;
            (cli::run(&s, seed)?, output, s.output)
        }
        Command::Sweep { file, param, values, output } => {
            let s = Scenario::load(&file)?;
            let param: SweepParam = param.parse()?;
            let values = cli::parse_sweep_values(param, &values)?;
            (cli::sweep(&s, param, &values, seed)?, output, s.output)
        }
        Command::Bounds { file, output } => {
            let s = Scenario::load(&file)?;
            (cli::bounds(&s, seed)?, output, s.output)
        }
        Command::Game { processors, alpha, budget, output } => {
            let params = PowerParams::new(alpha, processors).map_err(|e| CliError::Usage(e.to_string()))?;
            if budget.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
                return Err(CliError::Usage("budget must be positive and finite".into()));
            }
            (cli::game(&params, budget)?, output, None)
        }
    };
    let path = output.or(fallback).unwrap_or_else(|| "-".to_string());
    cli::write_output(&path, &report.csv)?;
    Ok(report)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(report) => {
            if !report.all_ok {
                eprintln!("espsim: bound violated");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("espsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
