//! The evolution loop: build context, generate, parse, patch, evaluate,
//! insert. Also checkpoints, the metrics stream, ablations and exports.

mod config;
mod report;

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use config::{ProviderConfig, ProviderKind, RunConfig, TaskRef};
pub use report::{read_metrics, report, ReportFiles, BEST_SCORE_FILE, CANDIDATES_FILE};

use crate::database::{
    read_versioned, write_json_atomic, Checkpoint, Database, DbError, DescriptorFn, Node, NodeId, Placement,
    TrigramDescriptor, SCHEMA_VERSION,
};
use crate::delta::{apply_diffs, parse_response, validate_delta, DeltaPlan, DeltaSummary};
use crate::eval::{builtin, evaluate, EvaluationReport, TaskSpec};
use crate::llm::{
    choose_model, generate, HttpProvider, ModelSpec, MutatorProvider, Provider, Request, RetryPolicy,
    ScriptedProvider, TokenLedger, TokenUsage,
};
use crate::sampler::{build_context, render_prompts, ContextPolicy};
use crate::util::{derive_seed, mix64, rng_from_seed};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Label of the context-building substream; candidate substreams use
/// `1 + candidate index`.
const CONTEXT_STREAM: u64 = 0;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("CheckpointError: {0}")]
    Checkpoint(String),
    #[error("IoError: {0}")]
    Io(String),
    #[error("MissingMetrics: {0}")]
    MissingMetrics(String),
}

impl ControllerError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        ControllerError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<DbError> for ControllerError {
    fn from(e: DbError) -> Self {
        ControllerError::Checkpoint(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Seed,
    /// Evaluated valid and stored.
    Inserted,
    /// Evaluated, found invalid, not stored.
    Rejected,
    /// Generation, parsing, delta validation or patching failed.
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Seed => "seed",
            Outcome::Inserted => "inserted",
            Outcome::Rejected => "rejected",
            Outcome::Failed => "failed",
        }
    }
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub candidate: usize,
    pub policy: ContextPolicy,
    pub parent_id: Option<NodeId>,
    pub child_id: Option<NodeId>,
    pub outcome: Outcome,
    pub reason: Option<String>,
    pub placement: Option<Placement>,
    pub child_score: Option<f64>,
    pub best_score: f64,
    pub best_id: NodeId,
    pub model: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cumulative_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub iteration: u64,
    /// Model calls made so far; the next call's ordinal.
    pub calls: u64,
    pub db: Database,
    pub ledger: TokenLedger,
    pub best_id: NodeId,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunCheckpoint {
    schema_version: u32,
    iteration: u64,
    calls: u64,
    policy: ContextPolicy,
    seed: u64,
    best_id: NodeId,
    best_score: f64,
    ledger: TokenLedger,
    database: Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: ContextPolicy,
    pub iterations: u64,
    pub best_score: f64,
    pub best_id: NodeId,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
    /// Seconds spent in this process; not reproducible.
    pub wall_time: f64,
}

/// Builds the provider named by the config.
pub fn build_provider(config: &RunConfig, task: &TaskSpec) -> Result<Box<dyn Provider>, ControllerError> {
    let p = &config.provider;
    Ok(match p.kind {
        config::ProviderKind::Mutator => {
            let rules = p
                .rules
                .clone()
                .or_else(|| builtin::default_mutator_rules(&task.name))
                .ok_or_else(|| ControllerError::Config(format!("no mutator rules for task {:?}", task.name)))?;
            Box::new(MutatorProvider::new(rules).map_err(ControllerError::Config)?)
        }
        config::ProviderKind::Scripted => {
            let path = p
                .script
                .as_ref()
                .ok_or_else(|| ControllerError::Config("scripted provider needs a script path".into()))?;
            Box::new(
                ScriptedProvider::from_file(path)
                    .map_err(|e| ControllerError::Config(format!("{}: {e}", path.display())))?,
            )
        }
        config::ProviderKind::Http => {
            let http = p
                .http
                .clone()
                .ok_or_else(|| ControllerError::Config("http provider needs [provider.http]".into()))?;
            Box::new(HttpProvider::new(http))
        }
    })
}

struct Candidate {
    code: String,
    summary: DeltaSummary,
    plan: DeltaPlan,
    report: EvaluationReport,
}

struct Attempt {
    model: String,
    usage: TokenUsage,
    result: Result<Candidate, String>,
}

struct Job {
    candidate: usize,
    seed: u64,
    ordinal: u64,
    model: ModelSpec,
}

fn attempt(
    provider: &dyn Provider,
    task: &TaskSpec,
    retry: RetryPolicy,
    system: &str,
    user: &str,
    parent_code: &str,
    job: &Job,
) -> Attempt {
    let request = Request { system, user, model: &job.model, seed: job.seed, ordinal: job.ordinal };
    let completion = match generate(provider, &request, retry) {
        Ok(c) => c,
        Err(f) => return Attempt { model: job.model.name.clone(), usage: f.usage, result: Err(f.error.to_string()) },
    };
    let result = (|| {
        let parsed = parse_response(&completion.text).map_err(|e| e.to_string())?;
        let violations = validate_delta(&parsed.summary, &parsed.plan);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(format!("InvalidDelta: {}", list.join("; ")));
        }
        let code = apply_diffs(parent_code, &parsed.diffs).map_err(|e| e.to_string())?;
        let report = evaluate(task, &code);
        Ok(Candidate { code, summary: parsed.summary, plan: parsed.plan, report })
    })();
    Attempt { model: completion.model, usage: completion.usage, result }
}

fn append_line(path: &Path, line: &str) -> Result<(), ControllerError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| ControllerError::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| ControllerError::io(path, e))
}

pub struct Controller<'a> {
    config: RunConfig,
    task: TaskSpec,
    provider: &'a dyn Provider,
    descriptor: TrigramDescriptor,
    retry: RetryPolicy,
    out: Option<PathBuf>,
    started: Instant,
    pub state: RunState,
    pub records: Vec<IterationRecord>,
}

impl<'a> Controller<'a> {
    /// Evaluates the task's initial program as the seed node. With `out`,
    /// the directory is created and a fresh metrics stream started.
    pub fn start(config: RunConfig, provider: &'a dyn Provider, out: Option<&Path>) -> Result<Self, ControllerError> {
        config.check()?;
        let task = config.task.resolve()?;
        let descriptor = TrigramDescriptor { length_scale: config.complexity_scale };
        let mut db = Database::new(config.database_config());
        let report = evaluate(&task, &task.initial_program);
        let seed = Node {
            id: db.allocate_id(),
            parent_id: None,
            island: 0,
            iteration: 0,
            code: task.initial_program.clone(),
            summary: None,
            plan: None,
            descriptor: descriptor.describe(&task.initial_program),
            report,
            tokens: TokenUsage::default(),
        };
        let (seed_id, seed_score) = (seed.id, seed.score());
        let placement = db.insert(seed).map_err(|e| ControllerError::Config(e.to_string()))?;
        for island in 1..db.island_count() {
            db.add_member(seed_id, island);
        }
        let record = IterationRecord {
            iteration: 0,
            candidate: 0,
            policy: config.policy,
            parent_id: None,
            child_id: Some(seed_id),
            outcome: Outcome::Seed,
            reason: None,
            placement: Some(placement),
            child_score: Some(seed_score),
            best_score: seed_score,
            best_id: seed_id,
            model: None,
            prompt_tokens: 0,
            completion_tokens: 0,
            cumulative_tokens: 0,
        };
        let mut ctl = Self {
            retry: retry_policy(&config),
            config,
            task,
            provider,
            descriptor,
            out: out.map(Path::to_path_buf),
            started: Instant::now(),
            state: RunState {
                iteration: 0,
                calls: 0,
                db,
                ledger: TokenLedger::default(),
                best_id: seed_id,
                best_score: seed_score,
            },
            records: Vec::new(),
        };
        if let Some(dir) = &ctl.out {
            fs::create_dir_all(dir).map_err(|e| ControllerError::io(dir, e))?;
            for file in [METRICS_FILE, PROMPTS_FILE] {
                let path = dir.join(file);
                if path.exists() {
                    fs::remove_file(&path).map_err(|e| ControllerError::io(&path, e))?;
                }
            }
        }
        ctl.emit(vec![record])?;
        Ok(ctl)
    }

    /// Restores the state saved in `out`, dropping metrics written after it.
    pub fn resume(config: RunConfig, provider: &'a dyn Provider, out: &Path) -> Result<Self, ControllerError> {
        config.check()?;
        let task = config.task.resolve()?;
        let path = out.join(CHECKPOINT_FILE);
        let value = read_versioned(&path)?;
        let cp: RunCheckpoint =
            serde_json::from_value(value).map_err(|e| ControllerError::Checkpoint(format!("{}: {e}", path.display())))?;
        if cp.seed != config.seed || cp.policy != config.policy {
            return Err(ControllerError::Checkpoint(format!(
                "checkpoint was written with seed {} and policy {}, config has seed {} and policy {}",
                cp.seed, cp.policy, config.seed, config.policy
            )));
        }
        let db = Database::from_checkpoint(cp.database)?;

        let metrics = out.join(METRICS_FILE);
        let records: Vec<IterationRecord> = if metrics.exists() {
            read_metrics(&metrics)?.into_iter().filter(|r| r.iteration <= cp.iteration).collect()
        } else {
            Vec::new()
        };
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).map_err(|e| ControllerError::io(&metrics, e))?);
            text.push('\n');
        }
        fs::write(&metrics, text).map_err(|e| ControllerError::io(&metrics, e))?;

        Ok(Self {
            retry: retry_policy(&config),
            descriptor: TrigramDescriptor { length_scale: config.complexity_scale },
            config,
            task,
            provider,
            out: Some(out.to_path_buf()),
            started: Instant::now(),
            state: RunState {
                iteration: cp.iteration,
                calls: cp.calls,
                db,
                ledger: cp.ledger,
                best_id: cp.best_id,
                best_score: cp.best_score,
            },
            records,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    fn emit(&mut self, records: Vec<IterationRecord>) -> Result<(), ControllerError> {
        if let Some(dir) = &self.out {
            let path = dir.join(METRICS_FILE);
            let mut text = String::new();
            for r in &records {
                text.push_str(&serde_json::to_string(r).map_err(|e| ControllerError::io(&path, e))?);
                text.push('\n');
            }
            append_line(&path, text.trim_end_matches('\n'))?;
        }
        self.records.extend(records);
        Ok(())
    }

    /// One iteration. Candidate failures become records, not errors.
    pub fn step(&mut self) -> Result<Vec<IterationRecord>, ControllerError> {
        let t = self.state.iteration + 1;
        let cfg = &self.config;
        let mut ctx_rng = rng_from_seed(derive_seed(cfg.seed, &[t, CONTEXT_STREAM]));
        let ctx = build_context(&self.state.db, t, &cfg.sampler, &cfg.selection, cfg.policy, &mut ctx_rng)
            .map_err(|e| ControllerError::Checkpoint(format!("database cannot supply a context: {e}")))?;
        let (system, user) = render_prompts(&self.task, &ctx);

        let jobs: Vec<Job> = (0..cfg.candidates_per_iteration)
            .map(|c| {
                let seed = derive_seed(cfg.seed, &[t, 1 + c as u64]);
                let mut rng = rng_from_seed(seed);
                let model = choose_model(&cfg.ensemble, &mut rng).expect("ensemble checked at startup").clone();
                Job { candidate: c, seed: mix64(seed), ordinal: self.state.calls + c as u64, model }
            })
            .collect();

        if cfg.log_prompts {
            if let Some(dir) = &self.out {
                let line = json!({"iteration": t, "policy": cfg.policy, "parent_id": ctx.parent_id, "system": system, "user": user});
                append_line(&dir.join(PROMPTS_FILE), &line.to_string())?;
            }
        }

        let run = |job: &Job| attempt(self.provider, &self.task, self.retry, &system, &user, &ctx.parent_code, job);
        let attempts: Vec<Attempt> = if jobs.len() == 1 {
            vec![run(&jobs[0])]
        } else {
            let mut out = Vec::with_capacity(jobs.len());
            for chunk in jobs.chunks(cfg.parallel_evaluations) {
                thread::scope(|s| {
                    let handles: Vec<_> = chunk.iter().map(|j| s.spawn(|| run(j))).collect();
                    for h in handles {
                        out.push(h.join().unwrap_or_else(|_| Attempt {
                            model: String::new(),
                            usage: TokenUsage::default(),
                            result: Err("worker panicked".into()),
                        }));
                    }
                });
            }
            out
        };

        let mut records = Vec::with_capacity(attempts.len());
        for (job, a) in jobs.iter().zip(attempts) {
            self.state.ledger.record(t, &a.model, a.usage);
            let mut rec = IterationRecord {
                iteration: t,
                candidate: job.candidate,
                policy: self.config.policy,
                parent_id: Some(ctx.parent_id),
                child_id: None,
                outcome: Outcome::Failed,
                reason: None,
                placement: None,
                child_score: None,
                best_score: 0.0,
                best_id: self.state.best_id,
                model: Some(a.model.clone()),
                prompt_tokens: a.usage.prompt_tokens,
                completion_tokens: a.usage.completion_tokens,
                cumulative_tokens: 0,
            };
            match a.result {
                Err(reason) => rec.reason = Some(reason),
                Ok(c) if !c.report.valid => {
                    rec.outcome = Outcome::Rejected;
                    rec.child_score = Some(c.report.combined_score);
                    rec.reason = Some(format!("InvalidCandidate: {}", c.report.feedback));
                }
                Ok(c) => {
                    let node = Node {
                        id: self.state.db.allocate_id(),
                        parent_id: Some(ctx.parent_id),
                        island: ctx.island,
                        iteration: t,
                        descriptor: self.descriptor.describe(&c.code),
                        code: c.code,
                        summary: Some(c.summary),
                        plan: Some(c.plan),
                        report: c.report,
                        tokens: a.usage,
                    };
                    let (id, score) = (node.id, node.score());
                    match self.state.db.insert(node) {
                        Ok(p) => {
                            rec.outcome = Outcome::Inserted;
                            rec.child_id = Some(id);
                            rec.child_score = Some(score);
                            rec.placement = Some(p);
                            if score > self.state.best_score {
                                self.state.best_score = score;
                                self.state.best_id = id;
                            }
                        }
                        Err(e) => rec.reason = Some(e.to_string()),
                    }
                }
            }
            rec.best_score = self.state.best_score;
            rec.best_id = self.state.best_id;
            rec.cumulative_tokens = self.state.ledger.total().2;
            records.push(rec);
        }

        self.state.db.migrate(t);
        self.state.iteration = t;
        self.state.calls += jobs.len() as u64;
        self.emit(records.clone())?;
        if t.is_multiple_of(self.config.checkpoint_interval) {
            self.save_checkpoint()?;
        }
        Ok(records)
    }

    pub fn save_checkpoint(&self) -> Result<(), ControllerError> {
        let Some(dir) = &self.out else { return Ok(()) };
        let cp = RunCheckpoint {
            schema_version: SCHEMA_VERSION,
            iteration: self.state.iteration,
            calls: self.state.calls,
            policy: self.config.policy,
            seed: self.config.seed,
            best_id: self.state.best_id,
            best_score: self.state.best_score,
            ledger: self.state.ledger.clone(),
            database: self.state.db.to_checkpoint(),
        };
        write_json_atomic(&dir.join(CHECKPOINT_FILE), &cp)?;
        Ok(())
    }

    pub fn summary(&self) -> RunSummary {
        let (p, c, total) = self.state.ledger.total();
        RunSummary {
            policy: self.config.policy,
            iterations: self.state.iteration,
            best_score: self.state.best_score,
            best_id: self.state.best_id,
            prompt_tokens: p,
            completion_tokens: c,
            total_tokens: total,
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Steps until `max_iterations`, then writes the final checkpoint and summary.
    pub fn run_to(&mut self, max_iterations: u64) -> Result<RunSummary, ControllerError> {
        while self.state.iteration < max_iterations {
            self.step()?;
        }
        self.save_checkpoint()?;
        let summary = self.summary();
        if let Some(dir) = &self.out {
            let path = dir.join(SUMMARY_FILE);
            let text = serde_json::to_string_pretty(&summary).map_err(|e| ControllerError::io(&path, e))?;
            fs::write(&path, text).map_err(|e| ControllerError::io(&path, e))?;
        }
        Ok(summary)
    }
}

fn retry_policy(config: &RunConfig) -> RetryPolicy {
    RetryPolicy {
        max_retries: config.max_retries,
        base_backoff: Duration::from_secs_f64(config.retry_backoff_secs),
    }
}

/// Fresh run of `config.max_iterations` iterations.
pub fn run(config: RunConfig, provider: &dyn Provider, out: Option<&Path>) -> Result<RunSummary, ControllerError> {
    let max = config.max_iterations;
    Controller::start(config, provider, out)?.run_to(max)
}

/// Continues the run saved in `out` up to `config.max_iterations`.
pub fn resume(config: RunConfig, provider: &dyn Provider, out: &Path) -> Result<RunSummary, ControllerError> {
    let max = config.max_iterations;
    Controller::resume(config, provider, out)?.run_to(max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub policy: ContextPolicy,
    pub best_score: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

/// Runs each policy with the same seed and provider, one subdirectory per
/// policy, and writes `ablation.csv`.
pub fn ablate(
    config: &RunConfig,
    policies: &[ContextPolicy],
    provider: &dyn Provider,
    out: &Path,
) -> Result<Vec<AblationRow>, ControllerError> {
    if policies.len() < 2 {
        return Err(ControllerError::Config("ablation needs at least two policies".into()));
    }
    let mut seen = policies.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != policies.len() {
        return Err(ControllerError::Config("ablation policies must be distinct".into()));
    }
    let mut rows = Vec::new();
    for &policy in policies {
        let cfg = RunConfig { policy, log_prompts: true, ..config.clone() };
        let s = run(cfg, provider, Some(&out.join(policy.as_str())))?;
        rows.push(AblationRow {
            policy,
            best_score: s.best_score,
            prompt_tokens: s.prompt_tokens,
            completion_tokens: s.completion_tokens,
            total_tokens: s.total_tokens,
        });
    }
    let mut csv = String::from("policy,best_score,prompt_tokens,completion_tokens,total_tokens\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.policy, r.best_score, r.prompt_tokens, r.completion_tokens, r.total_tokens
        ));
    }
    let path = out.join(ABLATION_FILE);
    fs::write(&path, csv).map_err(|e| ControllerError::io(&path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provider_construction_errors_are_config_errors() {
        let task = builtin::hexagon_task();
        let mut cfg = RunConfig::default();
        cfg.provider.kind = ProviderKind::Scripted;
        assert!(matches!(build_provider(&cfg, &task), Err(ControllerError::Config(_))));
        cfg.provider.kind = ProviderKind::Http;
        assert!(matches!(build_provider(&cfg, &task), Err(ControllerError::Config(_))));
        cfg.provider.kind = ProviderKind::Mutator;
        assert!(build_provider(&cfg, &task).is_ok());
        let mut unknown = task.clone();
        unknown.name = "other".into();
        assert!(matches!(build_provider(&cfg, &unknown), Err(ControllerError::Config(_))));
    }

    #[test]
    fn seed_record_opens_the_stream() {
        let cfg = RunConfig::default();
        let task = cfg.task.resolve().unwrap();
        let provider = build_provider(&cfg, &task).unwrap();
        let ctl = Controller::start(cfg, provider.as_ref(), None).unwrap();
        let seed = &ctl.records[0];
        assert_eq!((seed.iteration, seed.outcome, seed.cumulative_tokens), (0, Outcome::Seed, 0));
        assert!(ctl.state.db.island_count() > 1);
        for island in 0..ctl.state.db.island_count() {
            assert_eq!(ctl.state.db.island_members(island), &[seed.child_id.unwrap()]);
        }
    }

    #[test]
    fn outcome_names_match_serde() {
        for o in [Outcome::Seed, Outcome::Inserted, Outcome::Rejected, Outcome::Failed] {
            assert_eq!(serde_json::to_value(o).unwrap(), o.as_str());
        }
    }
}
