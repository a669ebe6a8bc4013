use std::fs;
use std::path::{Path, PathBuf};

use super::{ControllerError, IterationRecord, METRICS_FILE};

pub const BEST_SCORE_FILE: &str = "best_score.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub best_score: PathBuf,
    pub candidates: PathBuf,
}

pub fn read_metrics(path: &Path) -> Result<Vec<IterationRecord>, ControllerError> {
    let text = fs::read_to_string(path).map_err(|e| ControllerError::MissingMetrics(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| ControllerError::MissingMetrics(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Writes the best-so-far curve (one row per iteration) and the per-candidate
/// table next to the run's metrics.
pub fn report(run_dir: &Path) -> Result<ReportFiles, ControllerError> {
    let records = read_metrics(&run_dir.join(METRICS_FILE))?;
    if records.is_empty() {
        return Err(ControllerError::MissingMetrics(format!("{}: no records", run_dir.display())));
    }

    let mut best = String::from("iteration,best_score,cumulative_tokens\n");
    for (i, r) in records.iter().enumerate() {
        let last_of_iteration = records.get(i + 1).is_none_or(|n| n.iteration != r.iteration);
        if last_of_iteration {
            best.push_str(&format!("{},{},{}\n", r.iteration, r.best_score, r.cumulative_tokens));
        }
    }

    let mut candidates = String::from("iteration,candidate_score,outcome\n");
    for r in &records {
        let score = r.child_score.map(|s| s.to_string()).unwrap_or_default();
        candidates.push_str(&format!("{},{},{}\n", r.iteration, score, r.outcome.as_str()));
    }

    let files = ReportFiles { best_score: run_dir.join(BEST_SCORE_FILE), candidates: run_dir.join(CANDIDATES_FILE) };
    for (path, text) in [(&files.best_score, best), (&files.candidates, candidates)] {
        fs::write(path, text).map_err(|e| ControllerError::io(path, e))?;
    }
    Ok(files)
}
