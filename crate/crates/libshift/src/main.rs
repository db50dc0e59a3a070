use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use libshift::cli::{self, CliError};
use libshift::config::{BackendKind, RunConfig};
use libshift::rulegraph::ExecutionLimits;
use libshift::tokentree::LanguageProfile;

/// Synthesize reusable library-migration scripts from model-distilled
/// examples and apply them with a structural rewrite engine.
#[derive(Parser)]
#[command(name = "libshift", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Chat backend; overrides the config file.
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Fixture file for the replay / scripted backends.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Output directory; overrides the config file's paths.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-pool width for sandbox runs.
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    /// Rewrite budget per engine execution.
    #[arg(long)]
    max_rewrites: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and validate migration examples, writing a dataset.
    Distill {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Infer the initial ruleset from one migration triple.
    Infer {
        /// Path to a triple pointer file (triple-NN.json).
        #[arg(long)]
        triple: PathBuf,
        /// Where to write the ruleset.
        #[arg(long, default_value = "r0.json")]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Synthesize a migration script for one triple via the agent loop.
    Synthesize {
        #[arg(long)]
        triple: PathBuf,
        /// Initial ruleset file, e.g. from `infer`.
        #[arg(long)]
        r0: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Apply a migration script to a file or directory.
    Apply {
        #[arg(long)]
        script: PathBuf,
        /// File or directory to migrate; never modified in place.
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Apply a script to each sibling implementation of a use case and
    /// report per-sibling pass/fail.
    EvalSiblings {
        #[arg(long)]
        script: PathBuf,
        /// Dataset use-case directory holding triple pointer files.
        #[arg(long)]
        use_case_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn load_config(common: &CommonOpts) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Other("--config is required for this command".to_string()))?;
    let mut config = RunConfig::load(path)?;
    apply_overrides(&mut config, common);
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, common: &CommonOpts) {
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(backend) = common.backend {
        config.client.backend = backend;
    }
    if let Some(fixtures) = &common.fixtures {
        config.client.fixtures = Some(fixtures.clone());
    }
    if let Some(out) = &common.out {
        config.paths.dataset_dir = out.join("dataset");
        config.paths.scripts_dir = out.join("scripts");
        config.paths.transcripts_dir = out.join("transcripts");
    }
    if let Some(max) = common.max_rewrites {
        config.limits.max_rewrites = max;
    }
}

/// Profile for commands that can run without a config file.
fn standalone_profile(common: &CommonOpts) -> Result<LanguageProfile, CliError> {
    match &common.config {
        Some(path) => {
            let config = RunConfig::load(path)?;
            Ok(config.language_profile()?)
        }
        None => Ok(LanguageProfile::python()),
    }
}

fn run() -> Result<i32, CliError> {
    match Cli::parse().command {
        Command::Distill { common } => {
            let config = load_config(&common)?;
            cli::cmd_distill(&config, common.parallelism)
        }
        Command::Infer { triple, out, common } => {
            let profile = standalone_profile(&common)?;
            cli::cmd_infer(&triple, &out, &profile)
        }
        Command::Synthesize { triple, r0, common } => {
            let config = load_config(&common)?;
            cli::cmd_synthesize(&triple, &r0, &config)
        }
        Command::Apply { script, target, common } => {
            let profile = standalone_profile(&common)?;
            let limits = ExecutionLimits {
                max_rewrites: common.max_rewrites.unwrap_or(10_000),
            };
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("migrated"));
            cli::cmd_apply(&script, &target, &out, &profile, &limits)
        }
        Command::EvalSiblings { script, use_case_dir, common } => {
            let config = load_config(&common)?;
            cli::cmd_eval_siblings(&script, &use_case_dir, &config)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::EXIT_ERROR as u8)
        }
    }
}
