use std::fmt::Write;
use std::path::Path;

use fedwarm_core::metrics::{read_round_records, RoundRecord};

use crate::error::{CliError, CliResult};

/// Side-by-side global accuracy of several runs, aligned on round number.
///
/// Rows cover the rounds every file has. The final rows give each run's
/// accuracy at the last common round and its delta against the first file.
pub fn compare(paths: &[&Path]) -> CliResult<String> {
    if paths.is_empty() {
        return Err(CliError::Usage("compare needs at least one CSV file".into()));
    }
    let runs: Vec<Vec<RoundRecord>> = paths.iter().map(|p| read_round_records(p)).collect::<Result<_, _>>()?;
    let names: Vec<String> = paths
        .iter()
        .zip(&runs)
        .map(|(p, recs)| match recs.first() {
            Some(r) => format!("{} ({})", r.mode, p.file_name().unwrap_or_default().to_string_lossy()),
            None => p.display().to_string(),
        })
        .collect();
    let common = runs.iter().map(Vec::len).min().unwrap_or(0);
    let width = names.iter().map(String::len).max().unwrap_or(0).max(10);

    let mut out = String::new();
    let _ = write!(out, "{:>6}", "round");
    for n in &names {
        let _ = write!(out, "  {n:>width$}");
    }
    out.push('\n');
    for i in 0..common {
        let _ = write!(out, "{:>6}", runs[0][i].round);
        for r in &runs {
            let _ = write!(out, "  {:>width$.6}", r[i].global_accuracy);
        }
        out.push('\n');
    }

    if common > 0 {
        let base = runs[0][common - 1].global_accuracy;
        out.push('\n');
        let _ = writeln!(out, "final (round {}):", runs[0][common - 1].round);
        for (n, r) in names.iter().zip(&runs) {
            let acc = r[common - 1].global_accuracy;
            let _ = writeln!(out, "  {n:<width$}  {acc:.6}  delta {:+.6}", acc - base);
        }
    }
    let lengths: Vec<usize> = runs.iter().map(Vec::len).collect();
    if lengths.iter().any(|&l| l != common) {
        let _ = writeln!(
            out,
            "\nnote: runs have {} rounds; aligned on the first {common}",
            lengths.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        );
    }
    Ok(out)
}
