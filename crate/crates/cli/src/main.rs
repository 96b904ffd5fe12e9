use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geospread::accept::run_acceptance;
use geospread::svg::emit_svg;
use geospread::{parse_config, run_experiment, CliError};

#[derive(Debug, Parser)]
#[command(name = "geospread", version, about = "Tangent dynamics versus geodesic spread experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Draw CSV columns as an SVG line chart.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Accept {
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Comma-separated criterion ids (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(config.display(), e))?;
            let mut spec = parse_config(&text)?;
            spec.apply_seed_override(std::env::var("GEOSPREAD_SEED").ok().as_deref())?;
            let report = run_experiment(&spec)?;
            print!("{}", report.summary.render());
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Numerical("one or more thresholds failed".into()))
            }
        }
        Command::Plot { csv, x, y, output } => {
            let out = emit_svg(&csv, &x, &y, output.as_deref())?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Accept { workers, only } => {
            let outcomes = run_acceptance(workers, &only)?;
            for o in &outcomes {
                println!("{o}");
            }
            let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
            if failed.is_empty() {
                println!("acceptance: all criteria passed");
                Ok(())
            } else {
                Err(CliError::Numerical(format!("acceptance: failed {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
