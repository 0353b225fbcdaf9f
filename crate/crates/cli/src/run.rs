use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use fedwarm_core::data::partition_unique_label;
use fedwarm_core::engine::{run_centralized_with, run_federated_with, RunEvent, RunOptions};
use fedwarm_core::metrics::write_round_logs;
use fedwarm_core::RoundLog;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};

pub const RESOLVED_FILE: &str = "config.resolved";
pub const SUMMARY_FILE: &str = "summary.txt";

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub logs: Vec<RoundLog>,
    pub csv_path: PathBuf,
    pub summary: String,
}

fn write(path: PathBuf, contents: &str) -> CliResult<()> {
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

/// Run one experiment and write `config.resolved`, `<mode>.csv` and
/// `summary.txt` into the output directory.
///
/// `progress` receives one line per round.
pub fn run_experiment(cfg: &ExperimentConfig, progress: &mut (dyn Write + Send)) -> CliResult<RunOutcome> {
    let started = Instant::now();
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.clone(), source })?;
    write(out.join(RESOLVED_FILE), &cfg.to_toml())?;

    let dataset = cfg.load_dataset()?;
    let spec = cfg.model_spec(&dataset)?;
    let partitions = partition_unique_label(&dataset, &cfg.partition_spec())?;
    let hp = cfg.hyperparams();
    let rounds = hp.rounds;
    let mut report = |e: RunEvent<'_>| {
        if let RunEvent::Round { log, .. } = e {
            // Progress output is best effort.
            let _ = writeln!(
                progress,
                "round {:>4}/{rounds}  global {:.4}  avg {:.4}  divergence {:.4}  {} ms",
                log.round,
                log.global_accuracy,
                log.avg_accuracy,
                log.mean_divergence(),
                log.wallclock_ms
            );
        }
    };
    let logs = match cfg.mode {
        Mode::Centralized => run_centralized_with(&dataset, &partitions, &spec, &hp, &mut report)?,
        _ => run_federated_with(
            &dataset,
            &partitions,
            &spec,
            &cfg.transfer(),
            &hp,
            RunOptions { workers: cfg.workers },
            &mut report,
        )?,
    };

    let csv_path = out.join(format!("{}.csv", cfg.mode.name()));
    write_round_logs(&logs, cfg.mode.name(), &csv_path)?;
    let last = logs.last().expect("at least one round");
    let summary = format!(
        "mode={} rounds={} final_global_accuracy={:.6} final_avg_accuracy={:.6} runtime_s={:.3}\n",
        cfg.mode.name(),
        logs.len(),
        last.global_accuracy,
        last.avg_accuracy,
        started.elapsed().as_secs_f64()
    );
    write(out.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutcome { logs, csv_path, summary })
}
