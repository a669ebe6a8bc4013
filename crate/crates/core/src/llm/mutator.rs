use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{LlmError, Provider, ProviderReply, Request};
use crate::delta::{apply_diffs, render_response, DeltaModification, DeltaPlan, DeltaSummary, DiffBlock};
use crate::util::rng_from_seed;

/// Heading under which the parent program is fenced in the user prompt.
pub const PARENT_HEADING: &str = "Parent Program";

/// A numeric constant the mutator may perturb: the first capture group of
/// `pattern` must match a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantRule {
    #[serde(default)]
    pub name: String,
    pub pattern: String,
    pub sigma: f64,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl ConstantRule {
    pub fn new(name: &str, pattern: &str, sigma: f64) -> Self {
        Self { name: name.into(), pattern: pattern.into(), sigma, min: None, max: None }
    }

    fn label(&self) -> &str {
        if self.name.is_empty() {
            "constant"
        } else {
            &self.name
        }
    }
}

/// Offline generator: perturbs one to three matched constants of the
/// parent with seeded Gaussian noise and describes the edit as a delta.
#[derive(Debug, Clone)]
pub struct MutatorProvider {
    rules: Vec<(ConstantRule, Regex)>,
    max_changes: usize,
}

impl MutatorProvider {
    pub fn new(rules: Vec<ConstantRule>) -> Result<Self, String> {
        if rules.is_empty() {
            return Err("mutator needs at least one constant rule".into());
        }
        let compiled = rules
            .into_iter()
            .map(|r| {
                let re = Regex::new(&r.pattern).map_err(|e| format!("rule {:?}: {e}", r.pattern))?;
                if re.captures_len() < 2 {
                    return Err(format!("rule {:?} has no capture group", r.pattern));
                }
                if !(r.sigma > 0.0 && r.sigma.is_finite()) {
                    return Err(format!("rule {:?} needs a positive sigma", r.pattern));
                }
                Ok((r, re))
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Self { rules: compiled, max_changes: 3 })
    }

    /// Produces a full response for `code` using `seed`.
    pub fn mutate(&self, code: &str, seed: u64) -> Result<String, LlmError> {
        let mut rng = rng_from_seed(seed);
        let found: Vec<(usize, Vec<(usize, usize, f64)>)> = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, (_, re))| {
                let spans = re
                    .captures_iter(code)
                    .filter_map(|c| c.get(1))
                    .filter_map(|m| m.as_str().parse::<f64>().ok().map(|v| (m.start(), m.end(), v)))
                    .filter(|(_, _, v)| v.is_finite())
                    .collect();
                (i, spans)
            })
            .filter(|(_, spans): &(usize, Vec<_>)| !spans.is_empty())
            .collect();
        if found.is_empty() {
            return Err(LlmError::MutationFailed("no tunable constants in parent".into()));
        }

        let n = rng.random_range(1..=self.max_changes);
        let mut changes: BTreeMap<usize, Change> = BTreeMap::new();
        for _ in 0..n {
            let (rule_idx, spans) = &found[rng.random_range(0..found.len())];
            let (start, end, old) = spans[rng.random_range(0..spans.len())];
            let rule = &self.rules[*rule_idx].0;
            let noise: f64 = rng.sample(StandardNormal);
            let mut new = old + rule.sigma * noise;
            if let Some(lo) = rule.min {
                new = new.max(lo);
            }
            if let Some(hi) = rule.max {
                new = new.min(hi);
            }
            changes.entry(start).or_insert(Change {
                end,
                old_text: code[start..end].to_string(),
                new_text: format_constant(new),
                rule: *rule_idx,
            });
        }

        let mut new_code = String::with_capacity(code.len() + 16);
        let mut cursor = 0;
        for (start, c) in &changes {
            new_code.push_str(&code[cursor..*start]);
            new_code.push_str(&c.new_text);
            cursor = c.end;
        }
        new_code.push_str(&code[cursor..]);

        let diffs = line_diffs(code, &changes)
            .filter(|d| apply_diffs(code, d).as_deref() == Ok(new_code.as_str()))
            .unwrap_or_else(|| vec![DiffBlock { search: code.to_string(), replace: new_code.clone() }]);

        let describe = |pick: fn(&Change) -> &str| {
            changes
                .iter()
                .map(|(start, c)| {
                    format!("{} = {} (line {})", self.rules[c.rule].0.label(), pick(c), line_of(code, *start))
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        let summary = DeltaSummary {
            from_strategy: format!("Previous constants: {}.", describe(|c| &c.old_text)),
            to_strategy: format!("Perturbed constants: {}.", describe(|c| &c.new_text)),
        };
        let plan = DeltaPlan {
            modifications: changes
                .iter()
                .map(|(start, c)| {
                    let rule = &self.rules[c.rule].0;
                    DeltaModification {
                        component: format!("Constant {} on line {}", rule.label(), line_of(code, *start)),
                        old_logic: format!("{} = {}", rule.label(), c.old_text),
                        new_logic: format!(
                            "{} = {}, a Gaussian step with sigma {}",
                            rule.label(),
                            c.new_text,
                            rule.sigma
                        ),
                        hypothesis: "A nearby value of this constant may raise the score.".into(),
                    }
                })
                .collect(),
        };
        Ok(render_response(&diffs, &summary, &plan))
    }
}

struct Change {
    end: usize,
    old_text: String,
    new_text: String,
    rule: usize,
}

fn line_of(code: &str, offset: usize) -> usize {
    code[..offset].matches('\n').count() + 1
}

/// Shortest decimal form with up to six fractional digits.
fn format_constant(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0');
    let s = if s.ends_with('.') { format!("{s}0") } else { s.to_string() };
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// One block per touched line, searching the whole original line.
fn line_diffs(code: &str, changes: &BTreeMap<usize, Change>) -> Option<Vec<DiffBlock>> {
    let mut by_line: BTreeMap<usize, Vec<(usize, &Change)>> = BTreeMap::new();
    for (start, c) in changes {
        let line_start = code[..*start].rfind('\n').map_or(0, |i| i + 1);
        by_line.entry(line_start).or_default().push((*start, c));
    }
    let mut diffs = Vec::new();
    for (line_start, items) in by_line {
        let line_end = code[line_start..].find('\n').map_or(code.len(), |i| line_start + i);
        let line = &code[line_start..line_end];
        if code.matches(line).count() != 1 {
            return None;
        }
        let mut replaced = String::new();
        let mut cursor = line_start;
        for (start, c) in items {
            if c.end > line_end {
                return None;
            }
            replaced.push_str(&code[cursor..start]);
            replaced.push_str(&c.new_text);
            cursor = c.end;
        }
        replaced.push_str(&code[cursor..line_end]);
        diffs.push(DiffBlock { search: line.to_string(), replace: replaced });
    }
    Some(diffs)
}

/// Returns the fenced block following the parent heading in a user prompt.
pub fn extract_parent_code(user: &str) -> Option<String> {
    let after = &user[user.find(PARENT_HEADING)?..];
    let mut lines = after.lines().skip(1).skip_while(|l| !l.starts_with("```"));
    lines.next()?;
    let mut body = Vec::new();
    for line in lines {
        if line.trim_end() == "```" {
            return Some(body.join("\n"));
        }
        body.push(line);
    }
    None
}

impl Provider for MutatorProvider {
    fn name(&self) -> &str {
        "mutator"
    }

    fn complete(&self, request: &Request<'_>) -> Result<ProviderReply, LlmError> {
        let code = extract_parent_code(request.user)
            .ok_or_else(|| LlmError::MutationFailed("no parent program in prompt".into()))?;
        self.mutate(&code, request.seed).map(ProviderReply::text_only)
    }
}
