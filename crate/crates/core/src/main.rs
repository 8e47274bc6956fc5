use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiabat::scenario::{run, sweep, RunOptions, Scenario, FAMILIES};
use adiabat::{Error, Result};

/// Adiabaticity criteria, exact bounds and unitary propagation for time-dependent Hamiltonians.
#[derive(Parser, Debug)]
#[command(name = "adiabat", version)]
struct Cli {
    /// root directory for per-scenario outputs
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// seed for random-matrix scenarios
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one or more scenario files
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Rerun a scenario for each value of one parameter
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// comma-separated values
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// List the model families a scenario may use
    ListFamilies,
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let options = RunOptions { output_dir: cli.output_dir, seed: cli.seed };
    match cli.command {
        Command::ListFamilies => {
            for (name, params) in FAMILIES {
                println!("{name:<14} {params}");
            }
        }
        Command::Run { configs } => {
            let scenarios = configs.iter().map(|p| Scenario::from_path(p)).collect::<Result<Vec<_>>>()?;
            for scenario in &scenarios {
                let report = run(scenario, &options)?;
                print!("{}", report.render_text());
                println!();
            }
        }
        Command::Sweep { config, param, values } => {
            let scenario = Scenario::from_path(&config)?;
            let reports = sweep(&scenario, &param, &values, &options)?;
            for (v, r) in values.iter().zip(&reports) {
                println!("{param} = {v}");
                print!("{}", r.render_text());
                println!();
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
