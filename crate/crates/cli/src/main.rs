use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdkl_cli::{
    execute, execute_str, exit_code, figure_config, FigureSpec, RunError, RunOptions, Summary,
};

#[derive(Parser)]
#[command(
    name = "sdkl",
    version,
    about = "Numerical checks of score-driven update divergences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, env = "SDKL_OUT")]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Record per-scenario wall time in the CSVs (breaks byte-identical output).
    #[arg(long)]
    timings: bool,
}

impl Common {
    fn options(self) -> RunOptions {
        RunOptions {
            out_dir: self.out,
            seed: self.seed,
            jobs: self.jobs,
            timings: self.timings,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a JSON configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the four-panel illustration tables.
    Figure1 {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long = "y", default_value_t = 1.0)]
        y_t: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta_pred: f64,
        #[arg(long, env = "SDKL_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the bundled configuration covering every check.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
}

fn report(result: Result<Summary, RunError>) -> ExitCode {
    match result {
        Ok(s) => {
            println!(
                "checks_run={} agreed={} disagreed={} boundary={} inconclusive={} failed={}",
                s.checks_run, s.agreed, s.disagreed, s.boundary, s.inconclusive, s.failed
            );
            for e in &s.errors {
                eprintln!("failed {} {}: {}", e.check_id, e.scenario_id, e.error);
            }
            ExitCode::from(exit_code(&s))
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common } => match fs::read_to_string(&config) {
            Ok(text) => report(execute_str(&text, &common.options())),
            Err(e) => {
                eprintln!("error: reading {}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Figure1 {
            alpha,
            delta,
            y_t,
            theta_pred,
            out,
        } => {
            let spec = FigureSpec {
                alpha,
                delta,
                y_t,
                theta_pred,
            };
            let opts = RunOptions {
                out_dir: out,
                ..RunOptions::default()
            };
            report(execute(figure_config(spec), &opts))
        }
        Command::VerifyAll { common } => {
            report(execute_str(sdkl_cli::VERIFY_ALL_CONFIG, &common.options()))
        }
    }
}
