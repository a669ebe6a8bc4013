//! Model ensemble, providers, retries and token accounting.

mod http;
mod mutator;
mod scripted;

use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpConfig, HttpProvider};
pub use mutator::{extract_parent_code, ConstantRule, MutatorProvider, PARENT_HEADING};
pub use scripted::{ScriptedProvider, SCRIPT_SEPARATOR};

/// Characters per token when a provider does not report usage.
pub const CHARS_PER_TOKEN: usize = 4;

pub fn estimate_tokens(text: &str) -> u64 {
    text.chars().count().div_ceil(CHARS_PER_TOKEN) as u64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Counts were estimated from text length rather than reported.
    #[serde(default)]
    pub estimated: bool,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

fn default_weight() -> f64 {
    1.0
}
fn default_temperature() -> f64 {
    0.7
}
fn default_top_p() -> f64 {
    0.95
}
fn default_max_tokens() -> u32 {
    8192
}
fn default_model_timeout() -> f64 {
    600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_model_timeout")]
    pub timeout_secs: f64,
}

impl ModelSpec {
    pub fn named(name: &str, weight: f64) -> Self {
        Self {
            name: name.into(),
            weight,
            temperature: default_temperature(),
            top_p: default_top_p(),
            max_tokens: default_max_tokens(),
            timeout_secs: default_model_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("EmptyEnsemble")]
    EmptyEnsemble,
    #[error("UnnormalizedWeights: weights sum to {0}")]
    UnnormalizedWeights(f64),
    #[error("Timeout after {0:.1}s")]
    Timeout(f64),
    #[error("ProviderError: status {status:?}: {body}")]
    ProviderError { status: Option<u16>, body: String },
    #[error("RetriesExhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("ScriptExhausted: no response {0}")]
    ScriptExhausted(u64),
    #[error("MutationFailed: {0}")]
    MutationFailed(String),
}

impl LlmError {
    /// Whether another attempt could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Timeout(_) => true,
            LlmError::ProviderError { status, .. } => {
                matches!(status, None | Some(408) | Some(429) | Some(500..=599))
            }
            _ => false,
        }
    }
}

/// Categorical draw over the ensemble weights.
pub fn choose_model<'a, R: Rng + ?Sized>(ensemble: &'a [ModelSpec], rng: &mut R) -> Result<&'a ModelSpec, LlmError> {
    check_ensemble(ensemble)?;
    let mut u: f64 = rng.random();
    for m in ensemble {
        if u < m.weight {
            return Ok(m);
        }
        u -= m.weight;
    }
    Ok(ensemble.iter().rev().find(|m| m.weight > 0.0).unwrap_or(&ensemble[ensemble.len() - 1]))
}

pub fn check_ensemble(ensemble: &[ModelSpec]) -> Result<(), LlmError> {
    if ensemble.is_empty() {
        return Err(LlmError::EmptyEnsemble);
    }
    let sum: f64 = ensemble.iter().map(|m| m.weight).sum();
    if ensemble.iter().any(|m| !(m.weight >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(LlmError::UnnormalizedWeights(sum));
    }
    Ok(())
}

/// One model call. `seed` is the candidate's substream seed and `ordinal`
/// its position in the run (0-based, in commit order).
#[derive(Debug, Clone, Copy)]
pub struct Request<'a> {
    pub system: &'a str,
    pub user: &'a str,
    pub model: &'a ModelSpec,
    pub seed: u64,
    pub ordinal: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ProviderReply {
    pub fn text_only(text: String) -> Self {
        Self { text, prompt_tokens: None, completion_tokens: None }
    }
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &Request<'_>) -> Result<ProviderReply, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub model: String,
    pub latency: f64,
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// First backoff; doubles on each retry.
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_backoff: Duration::from_secs(1) }
    }
}

/// A failed call still spent its prompt.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct GenerateFailure {
    pub error: LlmError,
    pub usage: TokenUsage,
    pub retries: u32,
}

pub fn generate(provider: &dyn Provider, request: &Request<'_>, policy: RetryPolicy) -> Result<Completion, GenerateFailure> {
    let start = Instant::now();
    let prompt_estimate = estimate_tokens(request.system) + estimate_tokens(request.user);
    let mut retries = 0;
    loop {
        match provider.complete(request) {
            Ok(reply) => {
                let estimated = reply.prompt_tokens.is_none() || reply.completion_tokens.is_none();
                let usage = TokenUsage {
                    prompt_tokens: reply.prompt_tokens.unwrap_or(prompt_estimate),
                    completion_tokens: reply.completion_tokens.unwrap_or_else(|| estimate_tokens(&reply.text)),
                    estimated,
                };
                return Ok(Completion {
                    text: reply.text,
                    usage,
                    model: request.model.name.clone(),
                    latency: start.elapsed().as_secs_f64(),
                    retries,
                });
            }
            Err(e) => {
                let failure = |error| GenerateFailure {
                    error,
                    usage: TokenUsage { prompt_tokens: prompt_estimate, completion_tokens: 0, estimated: true },
                    retries,
                };
                if !e.is_transient() {
                    return Err(failure(e));
                }
                if retries >= policy.max_retries {
                    return Err(failure(LlmError::RetriesExhausted { attempts: retries + 1, last: e.to_string() }));
                }
                thread::sleep(policy.base_backoff * 2u32.pow(retries));
                retries += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub iteration: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model: String,
    pub estimated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub records: Vec<TokenRecord>,
    prompt_total: u64,
    completion_total: u64,
}

impl TokenLedger {
    pub fn record(&mut self, iteration: u64, model: &str, usage: TokenUsage) {
        self.prompt_total += usage.prompt_tokens;
        self.completion_total += usage.completion_tokens;
        self.records.push(TokenRecord {
            iteration,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            model: model.to_string(),
            estimated: usage.estimated,
        });
    }

    /// (prompt, completion, prompt + completion)
    pub fn total(&self) -> (u64, u64, u64) {
        (self.prompt_total, self.completion_total, self.prompt_total + self.completion_total)
    }

    /// Recomputes the totals from the records.
    pub fn is_consistent(&self) -> bool {
        let p: u64 = self.records.iter().map(|r| r.prompt_tokens).sum();
        let c: u64 = self.records.iter().map(|r| r.completion_tokens).sum();
        (p, c) == (self.prompt_total, self.completion_total)
    }

    /// Drops records after `iteration`.
    pub fn truncate_after(&mut self, iteration: u64) {
        self.records.retain(|r| r.iteration <= iteration);
        self.prompt_total = self.records.iter().map(|r| r.prompt_tokens).sum();
        self.completion_total = self.records.iter().map(|r| r.completion_tokens).sum();
    }
}
