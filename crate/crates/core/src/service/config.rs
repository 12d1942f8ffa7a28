use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BpType;
use crate::vis::{default_legend, FoldConfig};
use crate::wrangler::{
    LiveProvider, LlmProvider, MockProvider, ProviderError, ProviderMode, RecordingProvider, ReplayProvider,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LlmConfig {
    pub mode: ProviderMode,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_key_var")]
    pub api_key_env_var: String,
    /// Extra mock fixtures, or the replay cassettes.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_rounds")]
    pub max_repair_rounds: usize,
}

fn default_key_var() -> String {
    "COHORTSCOPE_LLM_API_KEY".into()
}

fn default_timeout() -> u64 {
    60
}

fn default_rounds() -> usize {
    crate::wrangler::DEFAULT_REPAIR_ROUNDS
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            mode: ProviderMode::Mock,
            base_url: None,
            model: None,
            api_key_env_var: default_key_var(),
            fixture_dir: None,
            timeout_secs: default_timeout(),
            temperature: 0.0,
            max_repair_rounds: default_rounds(),
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.mode {
            ProviderMode::Live => {
                if self.base_url.is_none() || self.model.is_none() {
                    return Err(ConfigError::Invalid("live mode needs llm.baseUrl and llm.model".into()));
                }
                if std::env::var(&self.api_key_env_var).map_or(true, |k| k.is_empty()) {
                    return Err(ConfigError::Invalid(format!(
                        "live mode needs an API key in ${}",
                        self.api_key_env_var
                    )));
                }
            }
            ProviderMode::Replay if self.fixture_dir.is_none() => {
                return Err(ConfigError::Invalid("replay mode needs llm.fixtureDir".into()));
            }
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Invalid("llm.temperature must be in [0, 2]".into()));
        }
        Ok(())
    }

    /// Builds the provider; every exchange is appended to `audit_log` when
    /// given.
    pub fn provider(&self, audit_log: Option<&Path>) -> Result<Box<dyn LlmProvider>, ConfigError> {
        self.validate()?;
        let inner: Box<dyn LlmProvider> = match self.mode {
            ProviderMode::Mock => Box::new(match &self.fixture_dir {
                Some(dir) => MockProvider::with_dir(dir)?,
                None => MockProvider::embedded(),
            }),
            ProviderMode::Replay => {
                Box::new(ReplayProvider::from_dir(self.fixture_dir.as_deref().expect("validated"))?)
            }
            ProviderMode::Live => {
                let key = std::env::var(&self.api_key_env_var).expect("validated");
                Box::new(LiveProvider::new(
                    self.base_url.as_deref().expect("validated"),
                    self.model.as_deref().expect("validated"),
                    &key,
                    Duration::from_secs(self.timeout_secs),
                ))
            }
        };
        Ok(match audit_log {
            Some(path) => Box::new(RecordingProvider::with_log(inner, path)),
            None => inner,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    #[serde(default = "default_listen")]
    pub listen_address: String,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default = "default_session_dir")]
    pub session_dir: PathBuf,
    /// JSONL log of every prompt sent to the provider.
    #[serde(default)]
    pub audit_log: Option<PathBuf>,
    #[serde(default)]
    pub defaults: FoldConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_session_dir() -> PathBuf {
    "sessions".into()
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            listen_address: default_listen(),
            llm: LlmConfig::default(),
            session_dir: default_session_dir(),
            audit_log: None,
            defaults: FoldConfig::default(),
        }
    }

    /// Parses TOML; relative paths resolve against the config file's
    /// directory.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.data_dir);
        resolve(&mut cfg.session_dir);
        if let Some(p) = cfg.audit_log.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.llm.fixture_dir.as_mut() {
            resolve(p);
        }
        // an omitted legend deserializes as the SBP one
        if cfg.defaults.category_legend == default_legend(BpType::Sbp) {
            cfg.defaults.category_legend = default_legend(cfg.defaults.bp_type);
        }
        cfg.defaults.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_owned(), reason: e.to_string() })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full() {
        let cfg = ServiceConfig::from_toml("dataDir = \"data\"\n", Path::new("/srv")).unwrap();
        assert_eq!(cfg.data_dir, Path::new("/srv/data"));
        assert_eq!(cfg.llm.mode, ProviderMode::Mock);
        let text = r#"
dataDir = "/d"
listenAddress = "0.0.0.0:9000"
sessionDir = "s"
[llm]
mode = "replay"
fixtureDir = "cassettes"
[defaults]
cycleHours = 12
bpType = "map"
"#;
        let cfg = ServiceConfig::from_toml(text, Path::new("/srv")).unwrap();
        assert_eq!(cfg.llm.fixture_dir.as_deref(), Some(Path::new("/srv/cassettes")));
        assert_eq!(cfg.defaults.cycle_hours, 12.0);
        assert_eq!(cfg.defaults.category_legend, default_legend(BpType::Map));
        cfg.llm.validate().unwrap();
    }

    #[test]
    fn rejects_bad_mode_and_incomplete_live() {
        assert!(ServiceConfig::from_toml("dataDir = \"d\"\n[llm]\nmode = \"magic\"\n", Path::new(".")).is_err());
        let live = LlmConfig { mode: ProviderMode::Live, ..LlmConfig::default() };
        assert!(live.validate().is_err());
        let replay = LlmConfig { mode: ProviderMode::Replay, ..LlmConfig::default() };
        assert!(replay.validate().is_err());
    }
}
