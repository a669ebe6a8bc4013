//! Candidate evaluation: built-in benchmark and packing tasks, and a
//! subprocess protocol for external evaluators.

pub mod bbob;
pub mod builtin;
pub mod hexagon;
pub mod oracle;
pub mod process;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use bbob::{score_case, BbobCase};
use hexagon::{validate_packing, HexLayout};
use oracle::{oracle_serve, OracleError};
use process::{excerpt, run_with_timeout, ProcessError};

/// Score, per-case metrics and textual feedback for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub combined_score: f64,
    pub per_case: BTreeMap<String, f64>,
    pub valid: bool,
    pub feedback: String,
    pub evals_used: BTreeMap<String, u64>,
    /// Seconds spent evaluating. Informational only; never scored.
    pub wall_time: f64,
}

impl EvaluationReport {
    pub fn invalid(feedback: impl Into<String>) -> Self {
        Self {
            combined_score: 0.0,
            per_case: BTreeMap::new(),
            valid: false,
            feedback: feedback.into(),
            evals_used: BTreeMap::new(),
            wall_time: 0.0,
        }
    }

    pub fn valid(combined_score: f64, per_case: BTreeMap<String, f64>, feedback: String) -> Self {
        let report = Self {
            combined_score,
            per_case,
            valid: true,
            feedback,
            evals_used: BTreeMap::new(),
            wall_time: 0.0,
        };
        report.enforce_finite()
    }

    /// Downgrades a report whose numbers are not finite to an invalid one.
    fn enforce_finite(self) -> Self {
        if !self.valid {
            return Self { combined_score: 0.0, ..self };
        }
        let finite =
            self.combined_score.is_finite() && self.per_case.values().all(|v| v.is_finite());
        if finite {
            self
        } else {
            Self::invalid(format!("non-finite score reported; {}", self.feedback))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Candidate text is the solution document itself.
    DirectSolution,
    /// Candidate text is a program, run under the task's runner.
    ProgramOracle,
    /// Candidate text is handed to an external evaluator command.
    ExternalEvaluator,
}

fn default_bbob_seed() -> u64 {
    42
}

fn default_count() -> usize {
    11
}

fn default_rho_ref() -> f64 {
    0.2544
}

fn default_tolerance() -> f64 {
    hexagon::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Problem {
    Bbob {
        cases: Vec<BbobCase>,
        #[serde(default = "default_bbob_seed")]
        seed: u64,
    },
    Hexagon {
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_rho_ref")]
        rho_ref: f64,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    External {
        command: Vec<String>,
    },
}

fn default_timeout() -> f64 {
    300.0
}

fn default_program_file() -> String {
    "candidate.py".into()
}

fn default_parallel() -> usize {
    4
}

/// A problem plus how its candidates are interpreted and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub problem: Problem,
    #[serde(default)]
    pub description: String,
    /// The seed program or solution, evaluated at iteration 0.
    pub initial_program: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Interpreter prefix for program candidates, e.g. `["python3"]`.
    #[serde(default)]
    pub runner: Vec<String>,
    #[serde(default = "default_program_file")]
    pub program_file: String,
    #[serde(default = "default_parallel")]
    pub parallel_evaluations: usize,
}

impl TaskSpec {
    pub fn check(&self) -> Result<(), String> {
        if !(self.timeout_secs > 0.0) {
            return Err("timeout_secs must be positive".into());
        }
        match (&self.problem, self.kind) {
            (Problem::Bbob { cases, .. }, TaskKind::DirectSolution | TaskKind::ProgramOracle) => {
                if cases.is_empty() {
                    return Err("bbob task needs at least one case".into());
                }
                cases.iter().try_for_each(|c| c.check().map_err(|e| e.to_string()))?;
            }
            (Problem::Hexagon { rho_ref, .. }, TaskKind::DirectSolution | TaskKind::ProgramOracle) => {
                if !(*rho_ref > 0.0) {
                    return Err("rho_ref must be positive".into());
                }
            }
            (Problem::External { command }, TaskKind::ExternalEvaluator) => {
                if command.is_empty() {
                    return Err("external evaluator command is empty".into());
                }
            }
            (_, kind) => return Err(format!("task kind {kind:?} does not fit the problem type")),
        }
        if self.kind == TaskKind::ProgramOracle && self.runner.is_empty() {
            return Err("program-oracle tasks need a runner".into());
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Evaluates one candidate. Failures of any kind come back as invalid
/// reports with feedback; this never panics on candidate input.
pub fn evaluate(task: &TaskSpec, candidate: &str) -> EvaluationReport {
    let start = Instant::now();
    let mut report = match &task.problem {
        Problem::Bbob { cases, seed } => evaluate_bbob(task, cases, *seed, candidate),
        Problem::Hexagon { count, rho_ref, tolerance } => {
            evaluate_packing(task, *count, *rho_ref, *tolerance, candidate)
        }
        Problem::External { command } => {
            external_evaluate(command, candidate, &task.program_file, task.timeout())
        }
    };
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

fn write_candidate(dir: &Path, file: &str, candidate: &str) -> Result<std::path::PathBuf, String> {
    let path = dir.join(file);
    std::fs::write(&path, candidate).map_err(|e| format!("cannot write candidate: {e}"))?;
    Ok(path)
}

#[derive(Debug, Clone)]
struct CaseRun {
    v_best: f64,
    n_used: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectBbobSolution {
    cases: BTreeMap<String, Vec<f64>>,
}

fn run_direct_case(case: &BbobCase, doc: &DirectBbobSolution) -> Result<CaseRun, String> {
    let x = doc.cases.get(&case.name()).ok_or_else(|| format!("no solution for {}", case.name()))?;
    if let Some(v) = case.bound_violation(x) {
        return Err(format!("bound violation: {v}"));
    }
    let v_best = bbob::bbob_value(case, x).map_err(|e| e.to_string())?;
    Ok(CaseRun { v_best, n_used: 0 })
}

fn run_program_case(task: &TaskSpec, case: &BbobCase, seed: u64, candidate: &str) -> Result<CaseRun, String> {
    let dir = tempfile::tempdir().map_err(|e| format!("cannot create workspace: {e}"))?;
    let path = write_candidate(dir.path(), &task.program_file, candidate)?;
    let mut argv = task.runner.clone();
    argv.push(path.to_string_lossy().into_owned());
    oracle_serve(&argv, dir.path(), case, seed, task.timeout())
        .map(|o| CaseRun { v_best: o.v_best, n_used: o.n_used })
        .map_err(|e: OracleError| e.to_string())
}

/// Formats per-case scores as `{ stage1_cases: {...} | stage2_cases: {...} }`.
pub fn format_stage_map(stage1: &[(String, f64)], stage2: &[(String, f64)]) -> String {
    let block = |items: &[(String, f64)]| {
        items
            .iter()
            .map(|(k, v)| format!("   \"{k}\": {v:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "{{ stage1_cases: {{{} }} | stage2_cases: {{{} }} }}",
        block(stage1),
        block(stage2)
    )
}

/// Two-stage protocol: the first case gates the rest. The combined score is
/// the mean per-case score over all cases; failed stage-2 cases score 0.
fn evaluate_bbob(task: &TaskSpec, cases: &[BbobCase], seed: u64, candidate: &str) -> EvaluationReport {
    let direct = match task.kind {
        TaskKind::DirectSolution => match serde_json::from_str::<DirectBbobSolution>(candidate) {
            Ok(doc) => Some(doc),
            Err(e) => return EvaluationReport::invalid(format!("malformed solution document: {e}")),
        },
        _ => None,
    };
    let run = |case: &BbobCase| -> Result<(f64, u64), String> {
        let r = match &direct {
            Some(doc) => run_direct_case(case, doc)?,
            None => run_program_case(task, case, seed, candidate)?,
        };
        let s = score_case(r.v_best, case.v_ref, r.n_used, case.budget).map_err(|e| e.to_string())?;
        Ok((s, r.n_used))
    };

    let Some((first, rest)) = cases.split_first() else {
        return EvaluationReport::invalid("task has no cases");
    };
    let (s1, n1) = match run(first) {
        Ok(v) => v,
        Err(e) => {
            return EvaluationReport::invalid(format!("stage 1 failed on {}: {e}", first.name()))
        }
    };

    let width = task.parallel_evaluations.max(1);
    let mut stage2: Vec<Result<(f64, u64), String>> = Vec::with_capacity(rest.len());
    for chunk in rest.chunks(width) {
        let results: Vec<_> = thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|c| scope.spawn(|| run(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("evaluation panicked".into())))
                .collect()
        });
        stage2.extend(results);
    }

    let mut per_case = BTreeMap::new();
    let mut evals_used = BTreeMap::new();
    per_case.insert(first.name(), s1);
    evals_used.insert(first.name(), n1);
    let mut stage2_scores = Vec::new();
    let mut failures = String::new();
    for (case, res) in rest.iter().zip(stage2) {
        let (s, n) = res.unwrap_or_else(|e| {
            let _ = write!(failures, "\n{} failed: {e}", case.name());
            (0.0, 0)
        });
        per_case.insert(case.name(), s);
        evals_used.insert(case.name(), n);
        stage2_scores.push((case.name(), s));
    }
    let combined = per_case.values().sum::<f64>() / cases.len() as f64;
    let feedback = format!("{}{failures}", format_stage_map(&[(first.name(), s1)], &stage2_scores));
    let mut report = EvaluationReport::valid(combined, per_case, feedback);
    report.evals_used = evals_used;
    report
}

fn parse_layout(text: &str) -> Result<HexLayout, String> {
    let trimmed = text.trim();
    serde_json::from_str(trimmed)
        .or_else(|first| {
            // Programs may print logs before the document; try from the first brace.
            match trimmed.find('{') {
                Some(i) if i > 0 => serde_json::from_str(&trimmed[i..]),
                _ => Err(first),
            }
        })
        .map_err(|e| format!("malformed layout document: {e}"))
}

fn evaluate_packing(task: &TaskSpec, count: usize, rho_ref: f64, tol: f64, candidate: &str) -> EvaluationReport {
    let layout_text = match task.kind {
        TaskKind::ProgramOracle => {
            let dir = match tempfile::tempdir() {
                Ok(d) => d,
                Err(e) => return EvaluationReport::invalid(format!("cannot create workspace: {e}")),
            };
            let path = match write_candidate(dir.path(), &task.program_file, candidate) {
                Ok(p) => p,
                Err(e) => return EvaluationReport::invalid(e),
            };
            let arg = path.to_string_lossy().into_owned();
            match run_with_timeout(&task.runner, &[&arg], dir.path(), task.timeout()) {
                Ok(out) if out.status.success() => out.stdout,
                Ok(out) => {
                    return EvaluationReport::invalid(format!(
                        "program exited with {:?}: {}",
                        out.status.code(),
                        excerpt(&out.stderr)
                    ))
                }
                Err(e) => return EvaluationReport::invalid(e.to_string()),
            }
        }
        _ => candidate.to_string(),
    };
    let layout = match parse_layout(&layout_text) {
        Ok(l) => l,
        Err(e) => return EvaluationReport::invalid(e),
    };
    if layout.hexagons.len() != count {
        return EvaluationReport::invalid(format!(
            "expected {count} hexagons, got {}",
            layout.hexagons.len()
        ));
    }
    match validate_packing(&layout, tol) {
        Err(e) => EvaluationReport::invalid(e.to_string()),
        Ok(check) if !check.valid => {
            let listed: Vec<String> = check.violations.iter().take(10).map(|v| v.to_string()).collect();
            let more = check.violations.len().saturating_sub(listed.len());
            let mut fb = format!("invalid packing: {}", listed.join("; "));
            if more > 0 {
                let _ = write!(fb, "; and {more} more");
            }
            EvaluationReport::invalid(fb)
        }
        Ok(check) => {
            let score = check.rho / rho_ref;
            let per_case = BTreeMap::from([("rho".to_string(), check.rho)]);
            let feedback = format!(
                "valid packing of {count} hexagons; outer_side = {}, rho = {:.6}",
                layout.outer_side, check.rho
            );
            EvaluationReport::valid(score, per_case, feedback)
        }
    }
}

#[derive(Deserialize)]
struct ExternalReport {
    #[serde(alias = "score")]
    combined_score: f64,
    #[serde(default)]
    per_case: BTreeMap<String, f64>,
    #[serde(default)]
    feedback: String,
    #[serde(default)]
    valid: Option<bool>,
}

fn parse_external(stdout: &str) -> Result<ExternalReport, String> {
    let trimmed = stdout.trim();
    serde_json::from_str(trimmed)
        .or_else(|e| {
            trimmed
                .lines()
                .rev()
                .find(|l| !l.trim().is_empty())
                .ok_or(e)
                .and_then(|l| serde_json::from_str(l.trim()))
        })
        .map_err(|e| format!("MalformedReport: {e}; output: {:?}", excerpt(trimmed)))
}

/// Writes the candidate to a fresh workspace, runs `command <path>` and
/// reads a JSON report (`combined_score`, `per_case`, `feedback`) from stdout.
pub fn external_evaluate(command: &[String], candidate: &str, file_name: &str, timeout: Duration) -> EvaluationReport {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return EvaluationReport::invalid(format!("cannot create workspace: {e}")),
    };
    let path = match write_candidate(dir.path(), file_name, candidate) {
        Ok(p) => p,
        Err(e) => return EvaluationReport::invalid(e),
    };
    let arg = path.to_string_lossy().into_owned();
    let out = match run_with_timeout(command, &[&arg], dir.path(), timeout) {
        Ok(o) => o,
        Err(e @ ProcessError::Timeout(_)) => return EvaluationReport::invalid(e.to_string()),
        Err(e) => return EvaluationReport::invalid(e.to_string()),
    };
    if !out.status.success() {
        return EvaluationReport::invalid(format!(
            "evaluator exited with {:?}: {}",
            out.status.code(),
            excerpt(&out.stderr)
        ));
    }
    match parse_external(&out.stdout) {
        Err(e) => EvaluationReport::invalid(e),
        Ok(r) if r.valid == Some(false) => EvaluationReport::invalid(r.feedback),
        Ok(r) => EvaluationReport::valid(r.combined_score, r.per_case, r.feedback),
    }
}
