//! Run configuration: one TOML file shared by every command, with
//! per-command flag overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{
    ChatClient, ChatError, LiveClient, RecordingClient, ReplayClient, ScriptedClient,
};
use crate::distill::{DistillConfig, LibraryPair};
use crate::rulegraph::ExecutionLimits;
use crate::sandbox::SandboxConfig;
use crate::tokentree::{LanguageProfile, ProfileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    /// Replay: fixture file to serve from. Scripted: JSON array of
    /// completions. Live: ignored.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    /// Record live traffic into this fixture file.
    #[serde(default)]
    pub record: Option<PathBuf>,
    #[serde(default = "default_api_base")]
    pub api_base: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_synthesis_model")]
    pub synthesis_model: String,
    #[serde(default = "default_synthesis_temperature")]
    pub synthesis_temperature: f64,
    /// Concurrent in-flight requests for batch sampling.
    #[serde(default = "default_request_parallelism")]
    pub request_parallelism: usize,
}

fn default_backend() -> BackendKind {
    BackendKind::Replay
}
fn default_api_base() -> String {
    "https://api.openai.com/v1".to_string()
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}
fn default_synthesis_model() -> String {
    "gpt-4.1".to_string()
}
fn default_synthesis_temperature() -> f64 {
    0.2
}
fn default_request_parallelism() -> usize {
    1
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            backend: default_backend(),
            fixtures: None,
            record: None,
            api_base: default_api_base(),
            api_key_env: default_api_key_env(),
            synthesis_model: default_synthesis_model(),
            synthesis_temperature: default_synthesis_temperature(),
            request_parallelism: default_request_parallelism(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    #[serde(default = "default_dataset_dir")]
    pub dataset_dir: PathBuf,
    #[serde(default = "default_scripts_dir")]
    pub scripts_dir: PathBuf,
    #[serde(default = "default_transcripts_dir")]
    pub transcripts_dir: PathBuf,
}

fn default_dataset_dir() -> PathBuf {
    PathBuf::from("out/dataset")
}
fn default_scripts_dir() -> PathBuf {
    PathBuf::from("out/scripts")
}
fn default_transcripts_dir() -> PathBuf {
    PathBuf::from("out/transcripts")
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dataset_dir: default_dataset_dir(),
            scripts_dir: default_scripts_dir(),
            transcripts_dir: default_transcripts_dir(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LimitsConfig {
    #[serde(default = "default_max_rewrites")]
    pub max_rewrites: usize,
    #[serde(default = "default_agent_iterations")]
    pub agent_iterations: usize,
}

fn default_max_rewrites() -> usize {
    10_000
}
fn default_agent_iterations() -> usize {
    10
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig {
            max_rewrites: default_max_rewrites(),
            agent_iterations: default_agent_iterations(),
        }
    }
}

impl LimitsConfig {
    pub fn execution(&self) -> ExecutionLimits {
        ExecutionLimits {
            max_rewrites: self.max_rewrites,
        }
    }
}

/// The full run configuration. The RNG seed is mandatory: commands fail
/// fast rather than fall back to wall-clock entropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub pair: LibraryPair,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub sandbox: SandboxConfig,
    #[serde(default)]
    pub client: ClientConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    /// Path to a custom language profile; the built-in python profile is
    /// used when absent.
    #[serde(default)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no RNG seed: set `seed` in the config or pass --seed")]
    MissingSeed,
    #[error("backend `{0}` requires --fixtures or `client.fixtures`")]
    MissingFixtures(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Client(#[from] ChatError),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::MissingSeed)
    }

    pub fn language_profile(&self) -> Result<LanguageProfile, ConfigError> {
        match &self.profile {
            Some(path) => Ok(LanguageProfile::load(path)?),
            None => Ok(LanguageProfile::python()),
        }
    }

    /// Build the chat backend the config names. When `client.record` is set
    /// the backend is wrapped so its traffic becomes replay fixtures; this
    /// works for any backend, so scripted runs can mint fixtures too.
    pub fn make_client(&self) -> Result<Box<dyn ChatClient>, ConfigError> {
        let inner: Box<dyn ChatClient> = match self.client.backend {
            BackendKind::Live => Box::new(LiveClient::new(
                &self.client.api_base,
                &self.client.api_key_env,
            )?),
            BackendKind::Replay => {
                let path = self
                    .client
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| ConfigError::MissingFixtures("replay".to_string()))?;
                Box::new(ReplayClient::from_file(path)?)
            }
            BackendKind::Scripted => {
                let path = self
                    .client
                    .fixtures
                    .as_ref()
                    .ok_or_else(|| ConfigError::MissingFixtures("scripted".to_string()))?;
                Box::new(ScriptedClient::from_file(path)?)
            }
        };
        match &self.client.record {
            Some(path) => Ok(Box::new(RecordingClient::create(inner, path)?)),
            None => Ok(inner),
        }
    }
}
