//! Line-delimited JSON dialogue between the harness and a candidate
//! optimizer that treats the objective as a black box.
//!
//! ```text
//! harness   -> {"problem": {"dimension": d, "bounds": [lo, hi], "budget": n, "seed": s}}
//! candidate -> {"eval": [x...]}
//! harness   -> {"value": f}            (or {"error": "..."} when refused)
//! candidate -> {"final": [x...]}
//! ```
//!
//! The harness counts one evaluation per `value` reply, refuses requests
//! past the budget, rejects out-of-bounds points and kills the process at
//! the deadline. The final point is verified with one uncounted evaluation.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::Stdio;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::bbob::{evaluate_with_shift, BbobCase};
use super::process::{build_command, excerpt, wait_until, ProcessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Eval { index: u64, value: f64 },
    /// A request past the budget; refused and not counted.
    BudgetExceeded { request: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub v_best: f64,
    pub n_used: u64,
    pub final_point: Vec<f64>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("LaunchFailure: {0}")]
    Launch(String),
    #[error("Timeout after {seconds:.1}s ({n_used} evaluations used)")]
    Timeout { seconds: f64, n_used: u64 },
    #[error("ProtocolViolation: {0}")]
    ProtocolViolation(String),
    #[error("BoundViolation: {0}")]
    BoundViolation(String),
    #[error("NonZeroExit: status {code:?}; stderr: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("NonFiniteValue: final point evaluates to {0}")]
    NonFinite(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
enum CandidateMessage {
    #[serde(rename = "eval")]
    Eval(Vec<f64>),
    #[serde(rename = "final")]
    Final(Vec<f64>),
}

fn kill(child: &mut std::process::Child) {
    let _ = child.kill();
    let _ = child.wait();
}

enum Incoming {
    Line(String),
    Eof,
}

/// Runs one case against a launched candidate. `argv` is the full command
/// line; the process runs with `workdir` as its working directory.
pub fn oracle_serve(
    argv: &[String],
    workdir: &Path,
    case: &BbobCase,
    seed: u64,
    timeout: Duration,
) -> Result<OracleOutcome, OracleError> {
    let deadline = Instant::now() + timeout;
    let shift = case.shift();
    let mut cmd = build_command(argv, &[], workdir).map_err(|e| OracleError::Launch(e.to_string()))?;
    let mut child = cmd
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| OracleError::Launch(format!("{}: {e}", argv[0])))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            match line {
                Ok(l) => {
                    if tx.send(Incoming::Line(l)).is_err() {
                        return;
                    }
                }
                Err(_) => break,
            }
        }
        let _ = tx.send(Incoming::Eof);
    });
    let err_handle = thread::spawn(move || {
        let mut s = String::new();
        let _ = std::io::Read::read_to_string(&mut BufReader::new(stderr), &mut s);
        s
    });

    let timed_out = |n_used| OracleError::Timeout { seconds: timeout.as_secs_f64(), n_used };

    let problem = json!({
        "problem": {
            "dimension": case.dimension,
            "bounds": [case.lower, case.upper],
            "budget": case.budget,
            "seed": seed,
        }
    });
    // A candidate that exits before reading is reported through the EOF path.
    let _ = writeln!(stdin, "{problem}").and_then(|_| stdin.flush());

    let mut n_used = 0u64;
    let mut requests = 0u64;
    let mut trace = Vec::new();
    let final_point = loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        let msg = match rx.recv_timeout(remaining) {
            Ok(Incoming::Line(l)) => l,
            Ok(Incoming::Eof) | Err(mpsc::RecvTimeoutError::Disconnected) => {
                drop(stdin);
                let status = wait_until(&mut child, deadline).map_err(|_| timed_out(n_used))?;
                let stderr = excerpt(&err_handle.join().unwrap_or_default());
                return Err(if status.success() {
                    OracleError::ProtocolViolation("candidate exited without sending final".into())
                } else {
                    OracleError::NonZeroExit { code: status.code(), stderr }
                });
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {
                kill(&mut child);
                return Err(timed_out(n_used));
            }
        };
        if msg.trim().is_empty() {
            continue;
        }
        let parsed: CandidateMessage = match serde_json::from_str(&msg) {
            Ok(m) => m,
            Err(e) => {
                kill(&mut child);
                return Err(OracleError::ProtocolViolation(format!(
                    "unparseable message {:?}: {e}",
                    excerpt(&msg)
                )));
            }
        };
        let point = match &parsed {
            CandidateMessage::Eval(x) | CandidateMessage::Final(x) => x,
        };
        if point.len() != case.dimension {
            kill(&mut child);
            return Err(OracleError::ProtocolViolation(format!(
                "point has {} coordinates, expected {}",
                point.len(),
                case.dimension
            )));
        }
        if let Some(v) = case.bound_violation(point) {
            kill(&mut child);
            return Err(OracleError::BoundViolation(v));
        }
        match parsed {
            CandidateMessage::Eval(x) => {
                requests += 1;
                let reply = if n_used >= case.budget {
                    trace.push(TraceEvent::BudgetExceeded { request: requests });
                    json!({ "error": format!("budget of {} evaluations exhausted", case.budget) })
                } else {
                    let value = evaluate_with_shift(case.function, &shift, &x)
                        .map_err(|e| OracleError::ProtocolViolation(e.to_string()))?;
                    n_used += 1;
                    trace.push(TraceEvent::Eval { index: n_used, value });
                    json!({ "value": value })
                };
                // A broken pipe means the candidate went away; the EOF branch reports it.
                let _ = writeln!(stdin, "{reply}").and_then(|_| stdin.flush());
            }
            CandidateMessage::Final(x) => break x,
        }
    };

    drop(stdin);
    let status = match wait_until(&mut child, deadline) {
        Ok(s) => s,
        Err(ProcessError::Timeout(_)) => return Err(timed_out(n_used)),
        Err(e) => return Err(OracleError::Launch(e.to_string())),
    };
    if !status.success() {
        return Err(OracleError::NonZeroExit {
            code: status.code(),
            stderr: excerpt(&err_handle.join().unwrap_or_default()),
        });
    }
    let v_best = evaluate_with_shift(case.function, &shift, &final_point)
        .map_err(|e| OracleError::ProtocolViolation(e.to_string()))?;
    if !v_best.is_finite() {
        return Err(OracleError::NonFinite(v_best));
    }
    Ok(OracleOutcome { v_best, n_used, final_point, trace })
}
