//! Application configuration, loaded from TOML.
//!
//! Precedence is flags over file over defaults. Relative paths in a file are
//! resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{ScriptMode, DEFAULT_TEMPERATURE};
use crate::executor::{SandboxConfig, DEFAULT_MAX_OUTPUT_BYTES};
use crate::pipeline::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Http,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SandboxKind {
    #[default]
    Process,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub max_attempts: u32,
    pub requests_per_minute: Option<u32>,
    pub script: Option<PathBuf>,
    pub script_mode: ScriptMode,
    /// Directory whose `*.txt` files replace built-in prompt templates.
    pub templates_dir: Option<PathBuf>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            base_url: "http://localhost:8000/v1".into(),
            model: "meta-llama/Llama-3.1-8B-Instruct".into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            max_attempts: 3,
            requests_per_minute: None,
            script: None,
            script_mode: ScriptMode::FirstMatch,
            templates_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxSettings {
    pub kind: SandboxKind,
    pub worker_command: Vec<String>,
    pub max_output_bytes: usize,
    /// Concurrent workers; defaults to the round parallelism.
    pub pool_size: Option<usize>,
    pub stub_script: Option<PathBuf>,
}

impl Default for SandboxSettings {
    fn default() -> Self {
        Self {
            kind: SandboxKind::Process,
            worker_command: SandboxConfig::default().worker_command,
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
            pool_size: None,
            stub_script: None,
        }
    }
}

impl SandboxSettings {
    pub fn sandbox_config(&self, timeout_ms: u64) -> SandboxConfig {
        SandboxConfig {
            timeout_ms,
            worker_command: self.worker_command.clone(),
            max_output_bytes: self.max_output_bytes,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub store: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Recorded for provenance; the pipeline itself makes no random choices.
    pub seed: u64,
    pub backend: BackendSettings,
    pub sandbox: SandboxSettings,
    pub pipeline: RunConfig,
    pub paths: Paths,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: AppConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.backend.script);
        fix(&mut self.backend.templates_dir);
        fix(&mut self.sandbox.stub_script);
        fix(&mut self.paths.store);
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.out);
    }

    /// Hash of everything that can change results: the config minus output
    /// locations, plus the bytes of the corpus and script files it names.
    pub fn config_hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.paths = Paths::default();
        hashed.backend.script = None;
        hashed.backend.templates_dir = None;
        hashed.sandbox.stub_script = None;
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&hashed).expect("config serializes"));
        let files = [&self.paths.corpus, &self.backend.script, &self.sandbox.stub_script];
        for file in files {
            match file.as_ref().and_then(|p| fs::read(p).ok()) {
                Some(bytes) => {
                    hasher.update(b"file");
                    hasher.update(Sha256::digest(&bytes));
                }
                None => hasher.update(b"none"),
            }
        }
        if let Some(dir) = &self.backend.templates_dir {
            let mut names: Vec<PathBuf> = fs::read_dir(dir)
                .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
                .unwrap_or_default();
            names.sort();
            for name in names {
                if let Ok(bytes) = fs::read(&name) {
                    hasher.update(name.file_name().unwrap_or_default().as_encoded_bytes());
                    hasher.update(Sha256::digest(&bytes));
                }
            }
        }
        hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
