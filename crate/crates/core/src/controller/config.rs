use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::database::{DatabaseConfig, SelectionConfig};
use crate::eval::{builtin, TaskSpec};
use crate::llm::{check_ensemble, ConstantRule, HttpConfig, ModelSpec};
use crate::sampler::{ContextPolicy, SamplerConfig};

use super::ControllerError;

/// A built-in task by name, or a full inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskRef {
    Builtin(String),
    Inline(Box<TaskSpec>),
}

impl TaskRef {
    pub fn resolve(&self) -> Result<TaskSpec, ControllerError> {
        let task = match self {
            TaskRef::Builtin(name) => builtin::by_name(name)
                .ok_or_else(|| ControllerError::Config(format!("unknown built-in task {name:?}")))?,
            TaskRef::Inline(spec) => (**spec).clone(),
        };
        task.check().map_err(ControllerError::Config)?;
        Ok(task)
    }

    pub fn name(&self) -> &str {
        match self {
            TaskRef::Builtin(name) => name,
            TaskRef::Inline(spec) => &spec.name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Http,
    Scripted,
    #[default]
    Mutator,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    /// Response script for the scripted provider.
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<HttpConfig>,
    /// Mutator rules; built-in tasks supply defaults.
    #[serde(default)]
    pub rules: Option<Vec<ConstantRule>>,
}

fn d_task() -> TaskRef {
    TaskRef::Builtin("hexagon".into())
}
fn d_policy() -> ContextPolicy {
    ContextPolicy::DeltaEvolve
}
fn d_ensemble() -> Vec<ModelSpec> {
    vec![ModelSpec::named("default", 1.0)]
}
fn d_max_iterations() -> u64 {
    100
}
fn d_seed() -> u64 {
    42
}
fn d_population() -> usize {
    40
}
fn d_archive() -> usize {
    20
}
fn d_islands() -> usize {
    3
}
fn d_migration_interval() -> u64 {
    10
}
fn d_migration_rate() -> f64 {
    0.1
}
fn d_parallel() -> usize {
    4
}
fn d_candidates() -> usize {
    1
}
fn d_grid_bins() -> usize {
    10
}
fn d_complexity_scale() -> usize {
    8000
}
fn d_checkpoint_interval() -> u64 {
    10
}
fn d_max_retries() -> u32 {
    3
}
fn d_backoff() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_task")]
    pub task: TaskRef,
    #[serde(default = "d_policy")]
    pub policy: ContextPolicy,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default = "d_ensemble")]
    pub ensemble: Vec<ModelSpec>,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: u64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_population")]
    pub population_size: usize,
    #[serde(default = "d_archive")]
    pub archive_size: usize,
    #[serde(default = "d_islands")]
    pub islands: usize,
    #[serde(default = "d_migration_interval")]
    pub migration_interval: u64,
    #[serde(default = "d_migration_rate")]
    pub migration_rate: f64,
    #[serde(default = "d_parallel")]
    pub parallel_evaluations: usize,
    #[serde(default = "d_candidates")]
    pub candidates_per_iteration: usize,
    #[serde(default = "d_grid_bins")]
    pub grid_bins: usize,
    /// Code length at which the complexity coordinate saturates.
    #[serde(default = "d_complexity_scale")]
    pub complexity_scale: usize,
    #[serde(default = "d_checkpoint_interval")]
    pub checkpoint_interval: u64,
    #[serde(default = "d_max_retries")]
    pub max_retries: u32,
    #[serde(default = "d_backoff")]
    pub retry_backoff_secs: f64,
    /// Write every rendered prompt to `prompts.jsonl`.
    #[serde(default)]
    pub log_prompts: bool,
    /// Reserved; must stay false.
    #[serde(default)]
    pub cascade_evaluation: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ControllerError> {
        toml::from_str(text).map_err(|e| ControllerError::Config(e.to_string()))
    }

    /// Reads a config file; relative script paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ControllerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ControllerError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(script), Some(dir)) = (&cfg.provider.script, path.parent()) {
            if script.is_relative() {
                cfg.provider.script = Some(dir.join(script));
            }
        }
        Ok(cfg)
    }

    pub fn database_config(&self) -> DatabaseConfig {
        DatabaseConfig {
            islands: self.islands,
            population_size: self.population_size,
            archive_size: self.archive_size,
            grid_bins: self.grid_bins,
            migration_interval: self.migration_interval,
            migration_rate: self.migration_rate,
        }
    }

    pub fn check(&self) -> Result<(), ControllerError> {
        let err = |m: String| Err(ControllerError::Config(m));
        if self.cascade_evaluation {
            return err("cascade_evaluation is reserved and not implemented".into());
        }
        if self.candidates_per_iteration == 0 || self.parallel_evaluations == 0 {
            return err("candidates_per_iteration and parallel_evaluations must be positive".into());
        }
        if self.checkpoint_interval == 0 {
            return err("checkpoint_interval must be positive".into());
        }
        if !(self.retry_backoff_secs >= 0.0 && self.retry_backoff_secs.is_finite()) {
            return err("retry_backoff_secs must be a nonnegative number".into());
        }
        self.sampler.check().map_err(ControllerError::Config)?;
        self.selection.check().map_err(ControllerError::Config)?;
        self.database_config().check().map_err(ControllerError::Config)?;
        check_ensemble(&self.ensemble).map_err(|e| ControllerError::Config(e.to_string()))?;
        Ok(())
    }
}
