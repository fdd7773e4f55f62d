//! Campaign configuration (TOML).
//!
//! ```toml
//! out_dir = "out"
//! canonicals = ["proteins/P14679.fasta"]
//! variants = "variants.tsv"
//! ontology = "go/go-subset.obo"
//! namespaces = ["MF", "BP"]
//!
//! [[tools]]
//! id = "blind"
//! mode = "mock"
//! behavior = "variant-blind"
//! base = "mock/base_annotations.tsv"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::mockbench::{mock_as_adapter, MockBehavior, MockLaunch};
use crate::mr::DEFAULT_NAMESPACES;
use crate::ontology::Namespace;
use crate::predictions::PredictionFormat;
use crate::runner::{AdapterMode, RunOptions, ToolAdapter};

pub const DEFAULT_TIMEOUT_SECS: f64 = 600.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    canonicals: Vec<PathBuf>,
    variants: PathBuf,
    ontology: PathBuf,
    out_dir: PathBuf,
    #[serde(default)]
    threshold: f64,
    #[serde(default)]
    namespaces: Option<Vec<String>>,
    #[serde(default)]
    max_parallel: Option<usize>,
    #[serde(default = "yes")]
    cache: bool,
    #[serde(default = "yes")]
    synthetic_overlay: bool,
    #[serde(default)]
    tools: Vec<ToolConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ToolConfig {
    Subprocess {
        id: String,
        command: String,
        #[serde(default)]
        timeout: Option<f64>,
        #[serde(default)]
        working_dir: Option<PathBuf>,
        #[serde(default)]
        format: PredictionFormat,
        #[serde(default)]
        env: Vec<String>,
    },
    Offline {
        id: String,
        manifest: PathBuf,
        #[serde(default)]
        format: PredictionFormat,
    },
    Mock {
        id: String,
        behavior: MockBehavior,
        #[serde(default)]
        base: Option<PathBuf>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        timeout: Option<f64>,
    },
}

impl ToolConfig {
    pub fn id(&self) -> &str {
        match self {
            Self::Subprocess { id, .. } | Self::Offline { id, .. } | Self::Mock { id, .. } => id,
        }
    }

    pub fn format(&self) -> PredictionFormat {
        match self {
            Self::Subprocess { format, .. } | Self::Offline { format, .. } => *format,
            Self::Mock { .. } => PredictionFormat::PlainTsv,
        }
    }
}

/// A loaded configuration with every path made absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub canonicals: Vec<PathBuf>,
    pub variants: PathBuf,
    pub ontology: PathBuf,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub namespaces: Vec<Namespace>,
    pub max_parallel: Option<usize>,
    pub cache: bool,
    pub synthetic_overlay: bool,
    pub tools: Vec<ToolConfig>,
}

/// Lexically removes `.` and `..` components.
fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push(c);
                }
            }
            other => out.push(other),
        }
    }
    out
}

fn timeout_from(secs: Option<f64>) -> Result<Duration, ConfigError> {
    let secs = secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
    Duration::try_from_secs_f64(secs)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| ConfigError::Invalid(format!("timeout must be positive, got {secs}")))
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Toml { source, .. } => ConfigError::Toml { path: path.to_path_buf(), source },
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|source| ConfigError::Toml { path: PathBuf::from("<config>"), source })?;
        let base_dir = std::path::absolute(base_dir).unwrap_or_else(|_| base_dir.to_path_buf());
        let abs = |p: &Path| normalize(&base_dir.join(p));

        let namespaces = match raw.namespaces {
            None => DEFAULT_NAMESPACES.to_vec(),
            Some(list) => {
                let mut out = Vec::new();
                for s in &list {
                    let ns: Namespace = s.parse().map_err(|_| ConfigError::Invalid(format!("unknown namespace {s:?}")))?;
                    if !out.contains(&ns) {
                        out.push(ns);
                    }
                }
                out.sort();
                out
            }
        };
        if namespaces.is_empty() {
            return Err(ConfigError::Invalid("namespaces must not be empty".into()));
        }
        if !raw.threshold.is_finite() || raw.threshold < 0.0 {
            return Err(ConfigError::Invalid(format!("threshold must be a non-negative number, got {}", raw.threshold)));
        }
        if raw.canonicals.is_empty() {
            return Err(ConfigError::Invalid("at least one canonical FASTA is required".into()));
        }
        if raw.max_parallel == Some(0) {
            return Err(ConfigError::Invalid("max_parallel must be at least 1".into()));
        }

        let mut ids = std::collections::BTreeSet::new();
        let mut tools = Vec::with_capacity(raw.tools.len());
        for tool in raw.tools {
            if !ids.insert(tool.id().to_string()) {
                return Err(ConfigError::Invalid(format!("duplicate tool id {:?}", tool.id())));
            }
            tools.push(match tool {
                ToolConfig::Subprocess { id, command, timeout, working_dir, format, env } => {
                    timeout_from(timeout)?;
                    ToolConfig::Subprocess {
                        id,
                        command,
                        timeout,
                        working_dir: Some(abs(working_dir.as_deref().unwrap_or(Path::new(".")))),
                        format,
                        env,
                    }
                }
                ToolConfig::Offline { id, manifest, format } => ToolConfig::Offline { id, manifest: abs(&manifest), format },
                ToolConfig::Mock { id, behavior, base, seed, timeout } => {
                    timeout_from(timeout)?;
                    if behavior != MockBehavior::Empty && base.is_none() {
                        return Err(ConfigError::Invalid(format!("mock tool {id:?} needs `base` annotations")));
                    }
                    ToolConfig::Mock { id, behavior, base: base.map(|b| abs(&b)), seed, timeout }
                }
            });
        }

        Ok(Self {
            canonicals: raw.canonicals.iter().map(|p| abs(p)).collect(),
            variants: abs(&raw.variants),
            ontology: abs(&raw.ontology),
            out_dir: abs(&raw.out_dir),
            threshold: raw.threshold,
            namespaces,
            max_parallel: raw.max_parallel,
            cache: raw.cache,
            synthetic_overlay: raw.synthetic_overlay,
            tools,
        })
    }

    pub fn tool_ids(&self) -> Vec<String> {
        self.tools.iter().map(|t| t.id().to_string()).collect()
    }

    pub fn run_options(&self) -> RunOptions {
        let mut opts = RunOptions::new(&self.out_dir);
        if let Some(n) = self.max_parallel {
            opts.max_parallel = n;
        }
        opts.use_cache = self.cache;
        opts
    }

    /// Runner adapters in config order. Mock tools re-invoke `harness_exe`.
    pub fn adapters(&self, harness_exe: &Path) -> Result<Vec<ToolAdapter>, ConfigError> {
        let mut out = Vec::with_capacity(self.tools.len());
        for tool in &self.tools {
            let adapter = match tool {
                ToolConfig::Subprocess { id, command, timeout, working_dir, format, env } => ToolAdapter {
                    tool_id: id.clone(),
                    mode: AdapterMode::Subprocess {
                        command_template: command.clone(),
                        timeout: timeout_from(*timeout)?,
                        working_dir: working_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
                    },
                    prediction_format: *format,
                    env_allowlist: env.clone(),
                },
                ToolConfig::Offline { id, manifest, format } => ToolAdapter::offline(id.clone(), manifest.clone(), *format),
                ToolConfig::Mock { id, behavior, base, seed, timeout } => mock_as_adapter(
                    id,
                    &MockLaunch {
                        harness_exe,
                        behavior: *behavior,
                        base: base.as_deref(),
                        ontology: &self.ontology,
                        canonicals: &self.canonicals,
                        seed: *seed,
                        timeout: timeout_from(*timeout)?,
                    },
                ),
            };
            adapter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            out.push(adapter);
        }
        Ok(out)
    }
}
