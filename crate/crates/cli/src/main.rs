use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedwarm_cli::{compare, gradcheck, run_experiment, CliResult, ExperimentConfig};

/// Federated learning simulator for one-label-per-client data.
#[derive(Parser)]
#[command(name = "fedwarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset name.
    Run {
        /// Path to a TOML config, or `preset:<name>` for a built-in preset.
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Threads for within-round client training (results do not change).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the number of rounds.
        #[arg(long)]
        rounds: Option<usize>,
        /// Suppress per-round progress on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Print round-aligned global accuracies of several CSV logs.
    Compare {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Verify backpropagation of a model preset against finite differences.
    Gradcheck {
        model: String,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = 4)]
        batch_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Fail when the error reaches this bound.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// List the built-in experiment and model presets.
    Presets,
}

fn load(config: &str) -> CliResult<ExperimentConfig> {
    match config.strip_prefix("preset:") {
        Some(name) => ExperimentConfig::parse(&format!("preset = \"{name}\"\n"), name.as_ref()),
        None => ExperimentConfig::load(config.as_ref()),
    }
}

fn execute(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run { config, seed, workers, output_dir, rounds, quiet } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(r) = rounds {
                cfg.hyperparams.rounds = r.max(1);
            }
            let outcome = if quiet {
                run_experiment(&cfg, &mut std::io::sink())?
            } else {
                run_experiment(&cfg, &mut std::io::stderr())?
            };
            print!("{}", outcome.summary);
            println!("wrote {}", outcome.csv_path.display());
            Ok(true)
        }
        Command::Compare { csv } => {
            let paths: Vec<&std::path::Path> = csv.iter().map(PathBuf::as_path).collect();
            print!("{}", compare(&paths)?);
            Ok(true)
        }
        Command::Gradcheck { model, epsilon, batch_size, seed, tolerance } => {
            let r = gradcheck(&model, epsilon, batch_size, seed)?;
            let ok = r.max_relative_error < tolerance;
            println!(
                "{}: {} params ({} skipped at ReLU kinks), max relative error {:.3e} ({}), {:.2} s",
                r.model,
                r.params,
                r.kinked,
                r.max_relative_error,
                if ok { "ok" } else { "FAILED" },
                r.elapsed.as_secs_f64()
            );
            Ok(ok)
        }
        Command::Presets => {
            println!("experiments: {}", fedwarm_cli::presets::EXPERIMENT_PRESETS.join(", "));
            println!("models: {}", fedwarm_cli::presets::MODEL_PRESETS.join(", "));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
