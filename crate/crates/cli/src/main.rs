use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use deltaevolve::controller::{self, build_provider, ControllerError, ProviderKind, RunConfig, TaskRef};
use deltaevolve::sampler::ContextPolicy;

#[derive(Parser)]
#[command(name = "deltaevolve", version, about = "Evolutionary program search with semantic-delta context")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a fresh run.
    Run(RunArgs),
    /// Continue a run from its last checkpoint.
    Resume(RunArgs),
    /// Run several context policies under the same seed and provider.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', default_values_t = ContextPolicy::ALL.to_vec())]
        policies: Vec<ContextPolicy>,
    },
    /// Export CSV tables from a run directory's metrics.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file and print the resolved settings.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    policy: Option<ContextPolicy>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Built-in task name.
    #[arg(long)]
    task: Option<String>,
    /// `http`, `mutator` or `scripted:<path>`.
    #[arg(long)]
    provider: Option<String>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, ControllerError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, ControllerError> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(policy) = self.policy {
            cfg.policy = policy;
        }
        if let Some(n) = self.iterations {
            cfg.max_iterations = n;
        }
        if let Some(task) = &self.task {
            cfg.task = TaskRef::Builtin(task.clone());
        }
        if let Some(spec) = &self.provider {
            match spec.split_once(':') {
                Some(("scripted", path)) => {
                    cfg.provider.kind = ProviderKind::Scripted;
                    cfg.provider.script = Some(PathBuf::from(path));
                }
                None if spec == "http" => cfg.provider.kind = ProviderKind::Http,
                None if spec == "mutator" => cfg.provider.kind = ProviderKind::Mutator,
                None if spec == "scripted" => cfg.provider.kind = ProviderKind::Scripted,
                _ => return Err(ControllerError::Config(format!("unknown provider {spec:?}"))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value).context("serialising output")?);
    Ok(())
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let provider = build_provider(&cfg, &cfg.task.resolve()?)?;
            print_json(&controller::run(cfg, provider.as_ref(), Some(&args.out))?)
        }
        Command::Resume(args) => {
            let cfg = args.config()?;
            let provider = build_provider(&cfg, &cfg.task.resolve()?)?;
            print_json(&controller::resume(cfg, provider.as_ref(), &args.out)?)
        }
        Command::Ablate { run, policies } => {
            let cfg = run.config()?;
            let provider = build_provider(&cfg, &cfg.task.resolve()?)?;
            print_json(&controller::ablate(&cfg, &policies, provider.as_ref(), &run.out)?)
        }
        Command::Report { out } => {
            let files = controller::report(&out)?;
            println!("{}\n{}", files.best_score.display(), files.candidates.display());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(config.as_deref())?;
            cfg.check()?;
            cfg.task.resolve()?;
            println!("{}", toml::to_string(&cfg).context("serialising config")?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ControllerError>() {
                Some(ControllerError::Config(_)) => ExitCode::from(2),
                Some(ControllerError::Checkpoint(_)) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
