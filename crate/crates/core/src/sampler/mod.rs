//! Builds the prompt context from the database and renders the prompts.

pub mod templates;

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::LazyLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::database::{Database, DbError, Node, NodeId, SelectionConfig};
use crate::delta::{render_delta, DeltaLevel};
use crate::eval::TaskSpec;
use crate::util::format_score;
use templates::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextPolicy {
    /// Inspirations as deltas, detail chosen by recency.
    DeltaEvolve,
    /// Inspirations as full programs with scores.
    FullCode,
    /// Full programs with every number in scores and feedback masked.
    BlindElite,
    /// Full programs chosen uniformly at random.
    RandomContext,
}

impl ContextPolicy {
    pub const ALL: [ContextPolicy; 4] =
        [Self::DeltaEvolve, Self::FullCode, Self::BlindElite, Self::RandomContext];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DeltaEvolve => "delta-evolve",
            Self::FullCode => "full-code",
            Self::BlindElite => "blind-elite",
            Self::RandomContext => "random-context",
        }
    }
}

impl fmt::Display for ContextPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().replace('-', "") == key)
            .ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualitativeShift {
    Improved,
    Degraded,
    Unchanged,
}

impl QualitativeShift {
    pub fn label(self) -> &'static str {
        match self {
            Self::Improved => "improved",
            Self::Degraded => "degraded",
            Self::Unchanged => "unchanged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("NonFiniteScore: {0}")]
pub struct NonFiniteScore(pub f64);

pub fn qualitative_shift(child: f64, parent: f64, epsilon: f64) -> Result<QualitativeShift, NonFiniteScore> {
    for v in [child, parent] {
        if !v.is_finite() {
            return Err(NonFiniteScore(v));
        }
    }
    Ok(if child - parent > epsilon {
        QualitativeShift::Improved
    } else if parent - child > epsilon {
        QualitativeShift::Degraded
    } else {
        QualitativeShift::Unchanged
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub k: usize,
    pub m: usize,
    /// Nodes newer than `t - w` are shown at plan level.
    pub w: u64,
    pub epsilon_shift: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { k: 3, m: 2, w: 10, epsilon_shift: 1e-9 }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.w < 1 {
            return Err("sampler window w must be at least 1".into());
        }
        if !(self.epsilon_shift >= 0.0) {
            return Err("epsilon_shift must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryLevel {
    Summary,
    Plan,
    FullCode,
}

impl EntryLevel {
    /// Detail rank: summary 1, plan 2, full code 3.
    pub fn rank(self) -> u8 {
        match self {
            Self::Summary => 1,
            Self::Plan => 2,
            Self::FullCode => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryRole {
    Top,
    Diverse,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspirationEntry {
    pub node_id: NodeId,
    pub iteration: u64,
    pub role: EntryRole,
    pub level: EntryLevel,
    pub body: String,
    /// Relative to the node's own parent; absent for the seed and when masked.
    pub shift: Option<QualitativeShift>,
    pub score: Option<f64>,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub policy: ContextPolicy,
    pub island: usize,
    pub parent_id: NodeId,
    pub parent_code: String,
    pub parent_score: Option<f64>,
    pub parent_feedback: String,
    pub entries: Vec<InspirationEntry>,
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("EmptyDatabase")]
    EmptyDatabase,
    #[error(transparent)]
    Database(#[from] DbError),
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|[-+]?\.\d+(?:[eE][-+]?\d+)?").unwrap());

/// Replaces every numeric literal with `#`.
pub fn mask_numbers(text: &str) -> String {
    NUMBER.replace_all(text, "#").into_owned()
}

/// First island, scanning the ring from `t mod islands`, that has members.
pub fn island_for(db: &Database, t: u64) -> Option<usize> {
    let n = db.island_count();
    (0..n).map(|i| (t as usize + i) % n).find(|i| !db.island_members(*i).is_empty())
}

pub const EXPLORATION_ONLY: SelectionConfig =
    SelectionConfig { exploitation_ratio: 0.0, exploration_ratio: 1.0, elite_ratio: 0.0 };

/// Parent selection followed by inspiration selection and rendering.
pub fn build_context<R: Rng + ?Sized>(
    db: &Database,
    t: u64,
    cfg: &SamplerConfig,
    selection: &SelectionConfig,
    policy: ContextPolicy,
    rng: &mut R,
) -> Result<PromptContext, SamplerError> {
    let island = island_for(db, t).ok_or(SamplerError::EmptyDatabase)?;
    let selected: Vec<(&Node, EntryRole)>;
    let parent = match policy {
        ContextPolicy::RandomContext => {
            let parent = db.select_parent(rng, island, &EXPLORATION_ONLY)?;
            let pool: Vec<&Node> = db.nodes().filter(|n| n.id != parent.id).collect();
            let amount = (cfg.k + cfg.m).min(pool.len());
            selected = rand::seq::index::sample(rng, pool.len(), amount)
                .into_iter()
                .map(|i| (pool[i], EntryRole::Random))
                .collect();
            parent
        }
        _ => {
            let parent = db.select_parent(rng, island, selection)?;
            let top: Vec<&Node> =
                db.top_k(cfg.k + 1).into_iter().filter(|n| n.id != parent.id).take(cfg.k).collect();
            let diverse: Vec<&Node> = db
                .sample_diverse(cfg.m + top.len(), parent, rng)
                .into_iter()
                .filter(|n| top.iter().all(|t| t.id != n.id))
                .take(cfg.m)
                .collect();
            selected = top
                .into_iter()
                .map(|n| (n, EntryRole::Top))
                .chain(diverse.into_iter().map(|n| (n, EntryRole::Diverse)))
                .collect();
            parent
        }
    };

    let entries = selected
        .into_iter()
        .map(|(node, role)| render_entry(db, node, role, t, cfg, policy))
        .collect();
    let masked = policy == ContextPolicy::BlindElite;
    Ok(PromptContext {
        policy,
        island,
        parent_id: parent.id,
        parent_code: parent.code.clone(),
        parent_score: (!masked).then(|| parent.score()),
        parent_feedback: if masked { mask_numbers(&parent.report.feedback) } else { parent.report.feedback.clone() },
        entries,
    })
}

fn render_entry(
    db: &Database,
    node: &Node,
    role: EntryRole,
    t: u64,
    cfg: &SamplerConfig,
    policy: ContextPolicy,
) -> InspirationEntry {
    let shift = node
        .parent_id
        .and_then(|p| db.get(p))
        .and_then(|p| qualitative_shift(node.score(), p.score(), cfg.epsilon_shift).ok());
    let (level, body, shift, score, feedback) = match policy {
        ContextPolicy::DeltaEvolve => {
            let recent = node.iteration as i128 > t as i128 - cfg.w as i128;
            let level = if recent { EntryLevel::Plan } else { EntryLevel::Summary };
            let body = match (&node.summary, &node.plan) {
                (Some(s), Some(p)) => {
                    let dl = if recent { DeltaLevel::Plan } else { DeltaLevel::Summary };
                    render_delta(s, p, dl)
                }
                _ => "Initial program; no delta recorded.\n".to_string(),
            };
            (level, body, shift, None, node.report.feedback.clone())
        }
        ContextPolicy::BlindElite => {
            (EntryLevel::FullCode, node.code.clone(), None, None, mask_numbers(&node.report.feedback))
        }
        ContextPolicy::FullCode | ContextPolicy::RandomContext => (
            EntryLevel::FullCode,
            node.code.clone(),
            shift,
            Some(node.score()),
            node.report.feedback.clone(),
        ),
    };
    InspirationEntry { node_id: node.id, iteration: node.iteration, role, level, body, shift, score, feedback }
}

fn entry_title(policy: ContextPolicy, role: EntryRole) -> &'static str {
    match (policy, role) {
        (ContextPolicy::DeltaEvolve, EntryRole::Top) => "Top Delta Plan",
        (ContextPolicy::DeltaEvolve, EntryRole::Diverse) => "Diverse Delta Plan",
        (_, EntryRole::Top) => "Top Program",
        (_, EntryRole::Diverse) => "Diverse Program",
        (_, EntryRole::Random) => "Random Program",
    }
}

fn fence(out: &mut String, code: &str) {
    out.push_str("```\n");
    out.push_str(code);
    if !code.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
}

/// Renders (system, user) prompts. Section order: current program,
/// inspirations, parent program, diff instructions.
pub fn render_prompts(task: &TaskSpec, ctx: &PromptContext) -> (String, String) {
    let system = format!(
        "{PROBLEM_HEADING}\n\n{}\n\n{DELTA_INSTRUCTIONS_HEADING}\n\n{DELTA_INSTRUCTIONS}\n",
        task.description.trim_end()
    );

    let mut user = String::new();
    let _ = writeln!(user, "{CURRENT_HEADING}\n");
    if let Some(score) = ctx.parent_score.filter(|_| ctx.policy != ContextPolicy::DeltaEvolve) {
        let _ = writeln!(user, "- Score: {}", format_score(score));
    }
    let _ = writeln!(user, "- Focus areas: {FOCUS_AREAS}");
    let _ = writeln!(user, "- Feedback: {}\n", one_line(&ctx.parent_feedback));

    let (heading, intro) = if ctx.policy == ContextPolicy::DeltaEvolve {
        (DELTA_INSPIRATIONS_HEADING, DELTA_INSPIRATIONS_INTRO)
    } else {
        (PROGRAM_INSPIRATIONS_HEADING, PROGRAM_INSPIRATIONS_INTRO)
    };
    let _ = writeln!(user, "{heading}\n\n{intro}\n");
    let mut counters = [0usize; 3];
    for e in &ctx.entries {
        let slot = match e.role {
            EntryRole::Top => 0,
            EntryRole::Diverse => 1,
            EntryRole::Random => 2,
        };
        counters[slot] += 1;
        let _ = writeln!(user, "### {} {}\n", entry_title(ctx.policy, e.role), counters[slot]);
        let mut tag = format!("iter: {:03}", e.iteration);
        if let Some(s) = e.shift {
            let _ = write!(tag, " | {}", s.label());
        }
        if let Some(score) = e.score {
            let _ = write!(tag, " | score: {}", format_score(score));
        }
        let _ = writeln!(user, "[{tag}]");
        match e.level {
            EntryLevel::FullCode => fence(&mut user, &e.body),
            EntryLevel::Plan => {
                user.push_str("[Delta plan details]:\n");
                user.push_str(&e.body);
            }
            EntryLevel::Summary => user.push_str(&e.body),
        }
        let _ = writeln!(user, "- Feedback: {}\n", one_line(&e.feedback));
    }

    let _ = writeln!(user, "{PARENT_SECTION_HEADING}\n");
    fence(&mut user, &ctx.parent_code);
    let _ = writeln!(user, "\n{DIFF_INSTRUCTIONS}");
    (system, user)
}

fn one_line(text: &str) -> String {
    let t = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if t.is_empty() {
        "none".into()
    } else {
        t
    }
}
