//! Semantic deltas: the structured record a model writes next to its code
//! edits, describing what changed relative to the parent program and why.
//!
//! Two levels of detail are carried:
//! * a summary ([`DeltaSummary`]): one FROM/TO pair of strategy sentences;
//! * a plan ([`DeltaPlan`]): one [`DeltaModification`] per changed component.
//!
//! Both are parsed out of raw model output by [`parse_response`], rendered
//! back with [`render_delta`] and checked with [`validate_delta`].

mod parse;
mod patch;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_plan_section, parse_response, parse_summary_section, ParseError};
pub use patch::{apply_diffs, PatchError};

pub const SUMMARY_START: &str = "#DELTA-SUMMARY-START";
pub const SUMMARY_END: &str = "#DELTA-SUMMARY-END";
pub const PLAN_START: &str = "#DELTA-PLAN-DETAILS-START";
pub const PLAN_END: &str = "#DELTA-PLAN-DETAILS-END";

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub from_strategy: String,
    pub to_strategy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaModification {
    pub component: String,
    pub old_logic: String,
    pub new_logic: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaPlan {
    pub modifications: Vec<DeltaModification>,
}

/// One SEARCH/REPLACE edit. An empty `replace` deletes the matched text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffBlock {
    pub search: String,
    pub replace: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub diffs: Vec<DiffBlock>,
    pub summary: DeltaSummary,
    pub plan: DeltaPlan,
    pub raw_text: String,
}

/// How much of a delta is disclosed when it is rendered into a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaLevel {
    /// FROM/TO summary only.
    Summary,
    /// Every modification with old/new logic and hypothesis.
    Plan,
}

impl DeltaLevel {
    pub fn number(self) -> u8 {
        match self {
            DeltaLevel::Summary => 1,
            DeltaLevel::Plan => 2,
        }
    }
}

/// Renders a delta at the requested level. The output is accepted by
/// [`parse_summary_section`] (level 1) or [`parse_plan_section`] (level 2).
pub fn render_delta(summary: &DeltaSummary, plan: &DeltaPlan, level: DeltaLevel) -> String {
    match level {
        DeltaLevel::Summary => format!(
            "FROM: {}\nTO: {}\n",
            summary.from_strategy, summary.to_strategy
        ),
        DeltaLevel::Plan => {
            let mut out = String::new();
            for (i, m) in plan.modifications.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!(
                    "[Modification {}]\nCOMPONENT: {}\nOLD_LOGIC: {}\nNEW_LOGIC: {}\nHYPOTHESIS: {}\n",
                    i + 1,
                    m.component,
                    m.old_logic,
                    m.new_logic,
                    m.hypothesis
                ));
            }
            out
        }
    }
}

/// Renders a complete model response: diff blocks followed by both delimited
/// delta sections, in the layout the system prompt asks for.
pub fn render_response(diffs: &[DiffBlock], summary: &DeltaSummary, plan: &DeltaPlan) -> String {
    let mut out = String::new();
    for d in diffs {
        out.push_str(SEARCH_MARKER);
        out.push('\n');
        out.push_str(&d.search);
        out.push('\n');
        out.push_str(DIVIDER_MARKER);
        out.push('\n');
        if !d.replace.is_empty() {
            out.push_str(&d.replace);
            out.push('\n');
        }
        out.push_str(REPLACE_MARKER);
        out.push_str("\n\n");
    }
    out.push_str(SUMMARY_START);
    out.push('\n');
    out.push_str(&render_delta(summary, plan, DeltaLevel::Summary));
    out.push_str(SUMMARY_END);
    out.push_str("\n\n");
    out.push_str(PLAN_START);
    out.push('\n');
    out.push_str(&render_delta(summary, plan, DeltaLevel::Plan));
    out.push_str(PLAN_END);
    out.push('\n');
    out
}

/// A field of a delta, used to locate validation findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaField {
    From,
    To,
    /// Modification index is 1-based.
    Component(usize),
    OldLogic(usize),
    NewLogic(usize),
    Hypothesis(usize),
}

impl fmt::Display for DeltaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaField::From => write!(f, "summary FROM"),
            DeltaField::To => write!(f, "summary TO"),
            DeltaField::Component(i) => write!(f, "modification {i} COMPONENT"),
            DeltaField::OldLogic(i) => write!(f, "modification {i} OLD_LOGIC"),
            DeltaField::NewLogic(i) => write!(f, "modification {i} NEW_LOGIC"),
            DeltaField::Hypothesis(i) => write!(f, "modification {i} HYPOTHESIS"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Field still holds template text (contains both `<` and `>`).
    PlaceholderText(DeltaField),
    EmptyField(DeltaField),
    /// The plan has no modifications.
    EmptyPlan,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PlaceholderText(field) => write!(f, "placeholder text in {field}"),
            Violation::EmptyField(field) => write!(f, "empty {field}"),
            Violation::EmptyPlan => write!(f, "delta plan has no modifications"),
        }
    }
}

/// Checks the syntactic delta rules. Rules that need semantic judgement
/// (meta-talk, algorithmic-only wording) are not checked here.
pub fn validate_delta(summary: &DeltaSummary, plan: &DeltaPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |field: DeltaField, value: &str| {
        if value.trim().is_empty() {
            out.push(Violation::EmptyField(field));
        } else if value.contains('<') && value.contains('>') {
            out.push(Violation::PlaceholderText(field));
        }
    };
    check(DeltaField::From, &summary.from_strategy);
    check(DeltaField::To, &summary.to_strategy);
    for (i, m) in plan.modifications.iter().enumerate() {
        let k = i + 1;
        check(DeltaField::Component(k), &m.component);
        check(DeltaField::OldLogic(k), &m.old_logic);
        check(DeltaField::NewLogic(k), &m.new_logic);
        check(DeltaField::Hypothesis(k), &m.hypothesis);
    }
    if plan.modifications.is_empty() {
        out.push(Violation::EmptyPlan);
    }
    out
}
