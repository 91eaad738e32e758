//! Thin command-line front end over the library's experiment runner.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O problems, 2 when a
//! run aborted mid-training (the diagnostic is also in that run's manifest).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use advsampler::exp::{self, ExperimentConfig};
use advsampler::Error;

#[derive(Parser)]
#[command(name = "advsampler", version, about = "Adversarial samplers for unnormalized densities and sample sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (JSON object).
        config: PathBuf,
        /// Dotted-key overrides, e.g. --set learning_rate=1e-3 or
        /// --set schedule.hold=5000. Values parse as JSON when possible.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an existing samples.csv against a named target.
    Eval {
        /// Target id (see list-targets).
        #[arg(long)]
        target: String,
        /// Path to a samples.csv produced by a run (or hand-made, same schema).
        #[arg(long)]
        samples: PathBuf,
        /// Output directory for metrics.csv / grid_pmf.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the density targets addressable by id.
    ListTargets,
}

fn split_overrides(raw: &[String]) -> Result<Vec<(String, String)>, Error> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got {kv:?}")))
        })
        .collect()
}

fn eval_config(target: &str, samples: PathBuf, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    exp::config_from_value(
        serde_json::json!({
            "mode": "eval",
            "target": target,
            "samples_path": samples,
        }),
        &[],
        None,
        out,
    )
}

fn execute() -> Result<(), (u8, Error)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, set, seed, out } => {
            let overrides = split_overrides(&set).map_err(|e| (1, e))?;
            let cfg =
                exp::parse_config(&config, &overrides, seed, out).map_err(|e| (1, e))?;
            exp::run(&cfg).map_err(|e| (2, e))?;
            Ok(())
        }
        Command::Eval { target, samples, out } => {
            let cfg = eval_config(&target, samples, out).map_err(|e| (1, e))?;
            exp::run(&cfg).map_err(|e| (2, e))?;
            Ok(())
        }
        Command::ListTargets => {
            for id in advsampler::dist::target_ids() {
                let spec = advsampler::dist::target_by_id(id).expect("catalog is consistent");
                let domain = match spec.bounds() {
                    Some((lo, hi)) => format!("[{lo}, {hi}]^{}", spec.dim()),
                    None => format!("R^{}", spec.dim()),
                };
                println!("{id}\tdim {}\tdomain {domain}", spec.dim());
            }
            println!("pointmass\t(environment for mode \"sql\")");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
