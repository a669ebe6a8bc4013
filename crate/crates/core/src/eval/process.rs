//! Launching candidate and evaluator subprocesses with a wall-clock limit.

use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

/// Cap on captured stderr kept for feedback.
pub const STDERR_EXCERPT: usize = 2000;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("LaunchFailure: {0}")]
    Launch(String),
    #[error("Timeout after {0:.1}s")]
    Timeout(f64),
}

#[derive(Debug)]
pub struct ProcessOutput {
    pub status: ExitStatus,
    pub stdout: String,
    pub stderr: String,
}

pub(crate) fn build_command(argv: &[String], extra: &[&str], cwd: &Path) -> Result<Command, ProcessError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| ProcessError::Launch("empty command".into()))?;
    let mut cmd = Command::new(program);
    cmd.args(args).args(extra).current_dir(cwd);
    Ok(cmd)
}

pub(crate) fn excerpt(text: &str) -> String {
    let trimmed = text.trim();
    match trimmed.char_indices().nth(STDERR_EXCERPT) {
        Some((cut, _)) => format!("{}...", &trimmed[..cut]),
        None => trimmed.to_string(),
    }
}

/// Polls `child` until it exits or `deadline` passes, killing it on timeout.
pub(crate) fn wait_until(child: &mut Child, deadline: Instant) -> Result<ExitStatus, ProcessError> {
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Ok(status),
            Ok(None) => {}
            Err(e) => return Err(ProcessError::Launch(e.to_string())),
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ProcessError::Timeout(0.0));
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn drain<R: Read + Send + 'static>(reader: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = reader {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs `argv` plus `extra` arguments in `cwd` with stdin closed, capturing
/// both output streams.
pub fn run_with_timeout(
    argv: &[String],
    extra: &[&str],
    cwd: &Path,
    timeout: Duration,
) -> Result<ProcessOutput, ProcessError> {
    let mut cmd = build_command(argv, extra, cwd)?;
    let mut child = cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ProcessError::Launch(format!("{}: {e}", argv[0])))?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let status = wait_until(&mut child, Instant::now() + timeout)
        .map_err(|e| match e {
            ProcessError::Timeout(_) => ProcessError::Timeout(timeout.as_secs_f64()),
            other => other,
        })?;
    Ok(ProcessOutput {
        status,
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
    })
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    #[test]
    fn captures_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_with_timeout(&sh("echo hi; echo err >&2"), &[], dir.path(), Duration::from_secs(5))
            .unwrap();
        assert!(out.status.success());
        assert_eq!(out.stdout, "hi\n");
        assert_eq!(out.stderr, "err\n");
    }

    #[test]
    fn kills_on_timeout() {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let res = run_with_timeout(&sh("sleep 5"), &[], dir.path(), Duration::from_millis(200));
        assert!(matches!(res, Err(ProcessError::Timeout(_))));
        assert!(start.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn missing_program_is_launch_failure() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_with_timeout(
            &["/nonexistent/evaluator".to_string()],
            &[],
            dir.path(),
            Duration::from_secs(1),
        );
        assert!(matches!(res, Err(ProcessError::Launch(_))));
    }
}
