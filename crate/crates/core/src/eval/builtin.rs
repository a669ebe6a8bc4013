//! Built-in tasks: the five-case black-box benchmark and 11-hexagon packing.

use super::bbob::{BbobCase, BbobFunction};
use super::hexagon::baseline_layout;
use super::{Problem, TaskKind, TaskSpec};
use crate::llm::ConstantRule;

/// Seed given to candidate programs in the `problem` message.
pub const BBOB_SEED: u64 = 42;
/// Seed and start count behind [`REFERENCE_VALUES`].
pub const REFERENCE_SEED: u64 = 42;
pub const REFERENCE_STARTS: usize = 5;

/// Best values of `reference_pattern_search(case, REFERENCE_SEED,
/// REFERENCE_STARTS)` at each case's budget.
pub const REFERENCE_VALUES: [f64; 5] = [
    0.000744940805969418,
    1.6775835713905103,
    31.36859967133381,
    4291.088005495171,
    1.3424453764799473,
];

const CASES: [(BbobFunction, usize, u32); 5] = [
    (BbobFunction::Sphere, 3, 1),
    (BbobFunction::Rosenbrock, 5, 2),
    (BbobFunction::Rastrigin, 10, 5),
    (BbobFunction::Ellipsoid, 20, 1),
    (BbobFunction::Schaffers, 40, 5),
];

pub fn bbob_cases() -> Vec<BbobCase> {
    CASES
        .iter()
        .zip(REFERENCE_VALUES)
        .map(|(&(f, d, i), v_ref)| BbobCase::new(f, d, i, 100 * d as u64, v_ref))
        .collect()
}

pub const RANDOM_SEARCH_PY: &str = r#"import json
import random
import sys


def main():
    problem = json.loads(sys.stdin.readline())["problem"]
    dim = problem["dimension"]
    lower, upper = problem["bounds"]
    budget = problem["budget"]
    rng = random.Random(problem["seed"])

    best_x, best_f = None, float("inf")
    for _ in range(budget):
        x = [rng.uniform(lower, upper) for _ in range(dim)]
        print(json.dumps({"eval": x}), flush=True)
        reply = json.loads(sys.stdin.readline())
        if "value" not in reply:
            break
        if reply["value"] < best_f:
            best_x, best_f = x, reply["value"]

    if best_x is None:
        best_x = [0.5 * (lower + upper)] * dim
    print(json.dumps({"final": best_x}), flush=True)


if __name__ == "__main__":
    main()
"#;

pub fn bbob_task() -> TaskSpec {
    TaskSpec {
        name: "bbob".into(),
        kind: TaskKind::ProgramOracle,
        problem: Problem::Bbob { cases: bbob_cases(), seed: BBOB_SEED },
        description: "Write a Python optimizer that minimises an unknown function over the box \
[-5, 5]^d. The program reads one JSON line {\"problem\": {dimension, bounds, budget, seed}} \
from stdin, asks for values by printing {\"eval\": [x...]} and reading {\"value\": f}, and \
finishes by printing {\"final\": [x...]}. Requests past the budget are refused; points outside \
the bounds end the run. Each case scores 0.7 times the value ratio against a reference plus \
0.3 times the unused budget fraction."
            .into(),
        initial_program: RANDOM_SEARCH_PY.into(),
        timeout_secs: 300.0,
        runner: vec!["python3".into()],
        program_file: "optimizer.py".into(),
        parallel_evaluations: 4,
    }
}

pub fn hexagon_task() -> TaskSpec {
    TaskSpec {
        name: "hexagon".into(),
        kind: TaskKind::DirectSolution,
        problem: Problem::Hexagon { count: 11, rho_ref: 0.2544, tolerance: 1e-6 },
        description: "Place 11 disjoint unit regular hexagons inside one outer regular hexagon \
of side outer_side, as small as possible. The candidate is a JSON document with outer_side and \
a list of 11 hexagons {x, y, theta}. Score is (1 / outer_side) / 0.2544 for valid layouts and \
0 otherwise."
            .into(),
        initial_program: baseline_layout().to_document(),
        timeout_secs: 300.0,
        runner: vec![],
        program_file: "layout.json".into(),
        parallel_evaluations: 4,
    }
}

/// Constants the offline mutator may perturb in a layout document.
pub fn hexagon_mutator_rules() -> Vec<ConstantRule> {
    const NUM: &str = r"(-?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?)";
    vec![
        ConstantRule { min: Some(1.0), ..ConstantRule::new("outer_side", &format!(r#""outer_side":\s*{NUM}"#), 0.1) },
        ConstantRule::new("x", &format!(r#""x":\s*{NUM}"#), 0.1),
        ConstantRule::new("y", &format!(r#""y":\s*{NUM}"#), 0.1),
        ConstantRule::new("theta", &format!(r#""theta":\s*{NUM}"#), 0.05),
    ]
}

/// Constants in the Python random-search baseline.
pub fn bbob_mutator_rules() -> Vec<ConstantRule> {
    vec![ConstantRule::new("numeric literal", r"[^\w.](\d+\.\d+)", 0.1)]
}

pub fn by_name(name: &str) -> Option<TaskSpec> {
    match name {
        "bbob" => Some(bbob_task()),
        "hexagon" => Some(hexagon_task()),
        _ => None,
    }
}

pub fn default_mutator_rules(task: &str) -> Option<Vec<ConstantRule>> {
    match task {
        "bbob" => Some(bbob_mutator_rules()),
        "hexagon" => Some(hexagon_mutator_rules()),
        _ => None,
    }
}
