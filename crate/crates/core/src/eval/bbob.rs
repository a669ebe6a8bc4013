//! Shifted black-box benchmark functions, the per-case score and the
//! reference optimizer used to pin reference values.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{fnv1a64, rng_from_seed};

/// Guards the relative-improvement denominator when the reference value is 0.
pub const REF_EPSILON: f64 = 1e-12;
/// Instance shifts are drawn uniformly from this symmetric interval.
pub const SHIFT_RANGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BbobFunction {
    Sphere,
    Rosenbrock,
    Rastrigin,
    Ellipsoid,
    /// Schaffers F7.
    Schaffers,
}

impl BbobFunction {
    pub fn name(self) -> &'static str {
        match self {
            BbobFunction::Sphere => "sphere",
            BbobFunction::Rosenbrock => "rosenbrock",
            BbobFunction::Rastrigin => "rastrigin",
            BbobFunction::Ellipsoid => "ellipsoid",
            BbobFunction::Schaffers => "schaffers",
        }
    }

    /// The unshifted base function.
    pub fn base(self, z: &[f64]) -> f64 {
        let d = z.len();
        match self {
            BbobFunction::Sphere => z.iter().map(|v| v * v).sum(),
            BbobFunction::Rosenbrock => z
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            BbobFunction::Rastrigin => {
                10.0 * d as f64
                    + z.iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
            BbobFunction::Ellipsoid => z
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let exp = if d > 1 { 6.0 * i as f64 / (d - 1) as f64 } else { 0.0 };
                    10f64.powf(exp) * v * v
                })
                .sum(),
            BbobFunction::Schaffers => {
                if d < 2 {
                    return 0.0;
                }
                let mean = z
                    .windows(2)
                    .map(|w| {
                        let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
                        let root = s.sqrt();
                        root + root * (50.0 * s.powf(0.2)).sin().powi(2)
                    })
                    .sum::<f64>()
                    / (d - 1) as f64;
                mean * mean
            }
        }
    }
}

impl fmt::Display for BbobFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_lower() -> f64 {
    -5.0
}

fn default_upper() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbobCase {
    pub function: BbobFunction,
    pub dimension: usize,
    pub instance: u32,
    pub budget: u64,
    pub v_ref: f64,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BbobError {
    #[error("DimensionMismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NonFiniteInput: coordinate {index} is {value}")]
    NonFiniteInput { index: usize, value: f64 },
    #[error("invalid case {0}")]
    InvalidCase(String),
}

impl BbobCase {
    pub fn new(function: BbobFunction, dimension: usize, instance: u32, budget: u64, v_ref: f64) -> Self {
        Self {
            function,
            dimension,
            instance,
            budget,
            v_ref,
            lower: default_lower(),
            upper: default_upper(),
        }
    }

    /// `<function>_d<dimension>_i<instance>`, e.g. `sphere_d3_i1`.
    pub fn name(&self) -> String {
        format!("{}_d{}_i{}", self.function, self.dimension, self.instance)
    }

    pub fn check(&self) -> Result<(), BbobError> {
        let bad = |why: &str| Err(BbobError::InvalidCase(format!("{}: {why}", self.name())));
        if self.dimension == 0 {
            return bad("dimension must be at least 1");
        }
        if self.function == BbobFunction::Schaffers && self.dimension < 2 {
            return bad("schaffers needs dimension of at least 2");
        }
        if self.budget == 0 {
            return bad("budget must be at least 1");
        }
        if !(self.lower < self.upper) {
            return bad("lower bound must be below upper bound");
        }
        if !self.v_ref.is_finite() {
            return bad("reference value must be finite");
        }
        Ok(())
    }

    /// Seed-derived instance shift in `[-4, 4]^d`, keyed by the case name.
    pub fn shift(&self) -> Vec<f64> {
        let mut rng = rng_from_seed(fnv1a64(self.name().as_bytes()));
        (0..self.dimension)
            .map(|_| rng.random_range(-SHIFT_RANGE..SHIFT_RANGE))
            .collect()
    }

    /// Returns the first violated bound, if any.
    pub fn bound_violation(&self, x: &[f64]) -> Option<String> {
        x.iter().enumerate().find_map(|(i, &v)| {
            if v < self.lower {
                Some(format!("x[{i}] = {v} below lower bound {}", self.lower))
            } else if v > self.upper {
                Some(format!("x[{i}] = {v} above upper bound {}", self.upper))
            } else {
                None
            }
        })
    }
}

/// Evaluates the shifted function `base(x - shift)`.
pub fn bbob_value(case: &BbobCase, x: &[f64]) -> Result<f64, BbobError> {
    evaluate_with_shift(case.function, &case.shift(), x)
}

pub(crate) fn evaluate_with_shift(
    function: BbobFunction,
    shift: &[f64],
    x: &[f64],
) -> Result<f64, BbobError> {
    if x.len() != shift.len() {
        return Err(BbobError::DimensionMismatch { expected: shift.len(), got: x.len() });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(BbobError::NonFiniteInput { index, value });
    }
    let z: Vec<f64> = x.iter().zip(shift).map(|(a, s)| a - s).collect();
    Ok(function.base(&z))
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("NonFiniteBest: best value {0} is not finite")]
pub struct NonFiniteBest(pub f64);

/// Per-case score: 0.7 * value score + 0.3 * unused-budget fraction.
///
/// The value score is `1 + d` when `v_best <= v_ref` and `1 / (1 + |d|)`
/// otherwise, with `d = (v_ref - v_best) / max(|v_ref|, REF_EPSILON)`.
pub fn score_case(v_best: f64, v_ref: f64, n_used: u64, n_budget: u64) -> Result<f64, NonFiniteBest> {
    if !v_best.is_finite() {
        return Err(NonFiniteBest(v_best));
    }
    let delta = (v_ref - v_best) / v_ref.abs().max(REF_EPSILON);
    let value_score = if v_best <= v_ref { 1.0 + delta } else { 1.0 / (1.0 + delta.abs()) };
    let efficiency = (1.0 - n_used as f64 / n_budget.max(1) as f64).max(0.0);
    Ok(0.7 * value_score + 0.3 * efficiency)
}

/// Multi-start coordinate pattern search. Used offline to produce the
/// committed reference values; never called during evaluation.
pub fn reference_pattern_search(case: &BbobCase, seed: u64, starts: usize) -> f64 {
    let shift = case.shift();
    let f = |x: &[f64]| evaluate_with_shift(case.function, &shift, x).expect("in-range point");
    let mut rng = rng_from_seed(seed);
    let span = case.upper - case.lower;
    let starts = starts.max(1) as u64;
    let per_start = (case.budget / starts).max(1);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..case.dimension)
            .map(|_| rng.random_range(case.lower..case.upper))
            .collect();
        let mut fx = f(&x);
        let mut used = 1;
        let mut step = 0.25 * span;
        'search: while used < per_start && step > 1e-15 {
            let mut improved = false;
            for i in 0..case.dimension {
                for dir in [1.0, -1.0] {
                    if used >= per_start {
                        break 'search;
                    }
                    let old = x[i];
                    x[i] = (old + dir * step).clamp(case.lower, case.upper);
                    let fy = f(&x);
                    used += 1;
                    if fy < fx {
                        fx = fy;
                        improved = true;
                        break;
                    }
                    x[i] = old;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(fx);
    }
    best
}

/// Extracts the `"case": value` pairs from an evaluator feedback map, either
/// the flat `{"a": 0.7, ...}` form or the staged
/// `{ stage1_cases: {...} | stage2_cases: {...} }` form.
pub fn parse_case_map(text: &str) -> Option<Vec<(String, f64)>> {
    use std::sync::LazyLock;
    static PAIR: LazyLock<regex::Regex> = LazyLock::new(|| {
        regex::Regex::new(r#""([A-Za-z0-9_]+)"\s*:\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"#)
            .expect("static regex")
    });
    let open = text.matches('{').count();
    if open == 0 || open != text.matches('}').count() {
        return None;
    }
    let pairs: Vec<(String, f64)> = PAIR
        .captures_iter(text)
        .filter_map(|c| Some((c[1].to_string(), c[2].parse().ok()?)))
        .collect();
    (!pairs.is_empty()).then_some(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unshifted(function: BbobFunction, x: &[f64]) -> f64 {
        evaluate_with_shift(function, &vec![0.0; x.len()], x).unwrap()
    }

    #[test]
    fn sphere_is_zero_at_shift() {
        for d in [1, 3, 7] {
            let case = BbobCase::new(BbobFunction::Sphere, d, 4, 10, 1.0);
            assert_eq!(bbob_value(&case, &case.shift()).unwrap(), 0.0);
        }
    }

    #[test]
    fn rosenbrock_optimum() {
        assert_eq!(unshifted(BbobFunction::Rosenbrock, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn rastrigin_half_point_matches_fixture() {
        // 60.75 from an independent 50-digit evaluation of the formula.
        let v = unshifted(BbobFunction::Rastrigin, &[0.5, 0.5, 0.5]);
        assert!((v - 60.75).abs() < 1e-12, "{v}");
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let case = BbobCase::new(BbobFunction::Sphere, 3, 1, 10, 1.0);
        assert_eq!(
            bbob_value(&case, &[0.0, 0.0]),
            Err(BbobError::DimensionMismatch { expected: 3, got: 2 })
        );
        assert!(matches!(
            bbob_value(&case, &[0.0, f64::NAN, 0.0]),
            Err(BbobError::NonFiniteInput { index: 1, .. })
        ));
    }

    #[test]
    fn shifts_are_stable_and_in_range() {
        let case = BbobCase::new(BbobFunction::Rastrigin, 10, 5, 10, 1.0);
        let a = case.shift();
        assert_eq!(a, case.shift());
        assert!(a.iter().all(|v| v.abs() <= SHIFT_RANGE));
        let other = BbobCase::new(BbobFunction::Rastrigin, 10, 6, 10, 1.0);
        assert_ne!(a, other.shift());
    }

    #[test]
    fn score_case_examples() {
        assert!((score_case(3.0, 3.0, 50, 50).unwrap() - 0.7).abs() < 1e-12);
        assert!((score_case(5.0, 10.0, 0, 100).unwrap() - 1.35).abs() < 1e-12);
        assert!((score_case(20.0, 10.0, 50, 100).unwrap() - 0.5).abs() < 1e-12);
        assert!(score_case(f64::NAN, 1.0, 0, 1).is_err());
    }

    #[test]
    fn zero_reference_is_guarded() {
        let s = score_case(1e-3, 0.0, 0, 10).unwrap();
        assert!(s.is_finite() && s > 0.3);
    }

    #[test]
    fn case_map_parses_both_layouts() {
        let staged = r#"{ stage1_cases: {   "sphere_d3_i1": 0.699 } | stage2_cases: {   "rosenbrock_d5_i2": 0.703,   "rastrigin_d10_i5": 4.354 } }"#;
        let pairs = parse_case_map(staged).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[2], ("rastrigin_d10_i5".to_string(), 4.354));
        assert!(parse_case_map("no map here").is_none());
        assert!(parse_case_map(r#"{"a": 1.0"#).is_none());
    }
}
