#![allow(dead_code)]

use std::path::Path;

use deltaevolve::database::Database;
use deltaevolve::delta::{render_response, DeltaModification, DeltaPlan, DeltaSummary, DiffBlock};
use deltaevolve::eval::{Problem, TaskKind, TaskSpec};

pub const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/context_fixture.json");

pub fn fixture_db() -> Database {
    Database::load(Path::new(FIXTURE)).expect("fixture loads")
}

const COUNTER_EVALUATOR: &str = r#"if grep -q poison "$1"; then
  echo '{"score": 0, "valid": false, "feedback": "poisoned"}'
else
  n=$(grep -c step "$1")
  echo "{\"score\": $n, \"feedback\": \"steps = $n\"}"
fi"#;

/// Scores a program by its number of `step` lines; any `poison` line makes
/// it invalid.
pub fn counter_task() -> TaskSpec {
    TaskSpec {
        name: "counter".into(),
        kind: TaskKind::ExternalEvaluator,
        problem: Problem::External {
            command: vec!["sh".into(), "-c".into(), COUNTER_EVALUATOR.into(), "evaluator".into()],
        },
        description: "Add step lines.".into(),
        initial_program: "# marker\n".into(),
        timeout_secs: 20.0,
        runner: vec![],
        program_file: "program.txt".into(),
        parallel_evaluations: 2,
    }
}

pub fn delta(i: usize) -> (DeltaSummary, DeltaPlan) {
    (
        DeltaSummary { from_strategy: format!("program with {i} steps"), to_strategy: format!("one more step, {i}") },
        DeltaPlan {
            modifications: vec![DeltaModification {
                component: "body".into(),
                old_logic: "fewer steps".into(),
                new_logic: format!("step {i} appended"),
                hypothesis: "more steps score higher".into(),
            }],
        },
    )
}

fn add_line(i: usize, line: &str) -> String {
    let (s, p) = delta(i);
    render_response(&[DiffBlock { search: "# marker".into(), replace: format!("# marker\n{line}") }], &s, &p)
}

/// Mostly improving responses, with one of each failure kind mixed in.
pub fn counter_script(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match i % 7 {
            3 => "I forgot the delta sections.\n".to_string(),
            4 => {
                let (mut s, p) = delta(i);
                s.from_strategy.clear();
                render_response(&[DiffBlock { search: "# marker".into(), replace: "# marker\nstep".into() }], &s, &p)
            }
            5 => {
                let (s, p) = delta(i);
                render_response(&[DiffBlock { search: "no such line".into(), replace: "x".into() }], &s, &p)
            }
            6 => add_line(i, "poison"),
            _ => add_line(i, &format!("step {i}")),
        })
        .collect()
}
