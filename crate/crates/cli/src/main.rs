use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use baco_core::harness::{
    aggregate_dir, emit_plots, read_aggregate_dir, run_experiment, ExperimentConfig, ProblemId,
    SolverId,
};

#[derive(Debug, Parser)]
#[command(
    name = "baco",
    version,
    about = "Run and summarize CO/MCO/ICO/BACO experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a solver over several seeds and write one trace CSV per run.
    Solve {
        #[arg(long, default_value = "scalable")]
        problem: String,
        /// One of co, mco, ico, baco.
        #[arg(long)]
        solver: String,
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// DoE multipliers for BACO, comma separated.
        #[arg(long = "doe-mult", value_delimiter = ',', default_value = "1,2,3,4,5")]
        doe_mult: Vec<usize>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Run r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median and 95% band per run group, written as `<group>_agg.csv`.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One SVG per metric from the aggregated tables.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            problem,
            solver,
            budget,
            runs,
            doe_mult,
            eps,
            seed,
            out,
        } => {
            let mut config = ExperimentConfig::new(
                problem.parse::<ProblemId>()?,
                solver.parse::<SolverId>()?,
                out,
            );
            config.budget = budget;
            config.runs = runs;
            config.doe_multipliers = doe_mult;
            config.eps = eps;
            config.base_seed = seed;
            let outputs = run_experiment(&config)?;
            let mut failed = 0;
            for o in &outputs {
                match &o.result {
                    Ok(r) => println!(
                        "{} run {:02} seed {}: f {:.6e} htot {:.3e} jtot {:.3e} evals {}",
                        o.group, o.run, o.seed, r.best.f, r.best.htot, r.best.jtot, r.evals_used
                    ),
                    Err(e) => {
                        failed += 1;
                        println!("{} run {:02} seed {}: failed: {e}", o.group, o.run, o.seed);
                    }
                }
            }
            if failed == outputs.len() {
                bail!("every run failed");
            }
        }
        Command::Aggregate { input, out } => {
            for (group, path) in aggregate_dir(&input, &out)? {
                println!("{group}: {}", path.display());
            }
        }
        Command::Plot { input, out } => {
            let tables = read_aggregate_dir(&input)?;
            if tables.is_empty() {
                bail!("no aggregated tables in {}", input.display());
            }
            for p in emit_plots(&tables, &out).context("writing plots")? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
