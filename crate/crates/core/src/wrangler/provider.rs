//! LLM backends. Mock and replay are deterministic functions of the prompt.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompt::{extract_request, repair_round};

const EMBEDDED_FIXTURES: &str = include_str!("../../fixtures/mock_llm.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    Mock,
    Replay,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderMode::Live => "live",
            ProviderMode::Mock => "mock",
            ProviderMode::Replay => "replay",
        }
    }
}

impl FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(ProviderMode::Live),
            "mock" => Ok(ProviderMode::Mock),
            "replay" => Ok(ProviderMode::Replay),
            other => Err(format!("unknown llm mode `{other}` (expected live, mock or replay)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no mock fixture for request `{0}`")]
    NoFixture(String),
    #[error("no recorded response for prompt {0}")]
    NotRecorded(String),
    #[error("provider request timed out")]
    Timeout,
    #[error("provider returned HTTP {0}")]
    Status(u16),
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("fixture or log i/o failed for {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError>;
    fn mode(&self) -> ProviderMode;
}

pub fn prompt_sha256(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Lowercase, single-spaced, without trailing sentence punctuation.
pub fn normalize_request(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    joined.trim_end_matches(['.', '!', '?', ' ']).to_owned()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockFixture {
    pub request: String,
    /// Response per round; the last one repeats for further repair rounds.
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureFile {
    fixtures: Vec<MockFixture>,
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    fixtures: HashMap<String, Vec<String>>,
}

impl MockProvider {
    /// Fixtures compiled into the binary.
    pub fn embedded() -> Self {
        let file: FixtureFile = serde_json::from_str(EMBEDDED_FIXTURES).expect("embedded fixtures are valid");
        Self::from_fixtures(file.fixtures)
    }

    pub fn from_fixtures(fixtures: impl IntoIterator<Item = MockFixture>) -> Self {
        let fixtures = fixtures
            .into_iter()
            .filter(|f| !f.responses.is_empty())
            .map(|f| (normalize_request(&f.request), f.responses))
            .collect();
        MockProvider { fixtures }
    }

    /// Embedded fixtures overlaid with every `*.json` fixture file in `dir`.
    pub fn with_dir(dir: &Path) -> Result<Self, ProviderError> {
        let io = |e: std::io::Error| ProviderError::Io { path: dir.to_owned(), reason: e.to_string() };
        let mut mock = Self::embedded();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io)?;
            let file: FixtureFile = serde_json::from_str(&text)
                .map_err(|e| ProviderError::Io { path: path.clone(), reason: e.to_string() })?;
            mock.fixtures.extend(Self::from_fixtures(file.fixtures).fixtures);
        }
        Ok(mock)
    }

    pub fn requests(&self) -> impl Iterator<Item = &str> {
        self.fixtures.keys().map(String::as_str)
    }
}

impl LlmProvider for MockProvider {
    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, ProviderError> {
        let request =
            extract_request(prompt).ok_or_else(|| ProviderError::Malformed("prompt has no request".into()))?;
        let key = normalize_request(request);
        let responses = self.fixtures.get(&key).ok_or(ProviderError::NoFixture(key))?;
        let round = repair_round(prompt).min(responses.len() - 1);
        Ok(responses[round].clone())
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Mock
    }
}

/// One prompt/response exchange as written to the audit log and read back by
/// the replay provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PromptRecord {
    pub timestamp: String,
    pub mode: ProviderMode,
    pub prompt_sha256: String,
    pub prompt: String,
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn read_prompt_log(path: &Path) -> Result<Vec<PromptRecord>, ProviderError> {
    let io = |e: String| ProviderError::Io { path: path.to_owned(), reason: e };
    let file = File::open(path).map_err(|e| io(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Serves byte-exact responses previously recorded by a [`RecordingProvider`].
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    responses: HashMap<String, String>,
}

impl ReplayProvider {
    pub fn from_records(records: impl IntoIterator<Item = PromptRecord>) -> Self {
        let responses = records.into_iter().filter_map(|r| r.response.map(|resp| (r.prompt_sha256, resp))).collect();
        ReplayProvider { responses }
    }

    pub fn from_log(path: &Path) -> Result<Self, ProviderError> {
        Ok(Self::from_records(read_prompt_log(path)?))
    }

    /// Every `*.jsonl` log in `dir`, in file-name order; later records win.
    pub fn from_dir(dir: &Path) -> Result<Self, ProviderError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| ProviderError::Io { path: dir.to_owned(), reason: e.to_string() })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut records = Vec::new();
        for p in paths {
            records.extend(read_prompt_log(&p)?);
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl LlmProvider for ReplayProvider {
    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, ProviderError> {
        let sha = prompt_sha256(prompt);
        self.responses.get(&sha).cloned().ok_or(ProviderError::NotRecorded(sha))
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Replay
    }
}

/// OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone)]
pub struct LiveProvider {
    pub base_url: String,
    pub model: String,
    api_key: String,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(base_url: &str, model: &str, api_key: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        LiveProvider {
            base_url: base_url.trim_end_matches('/').to_owned(),
            model: model.to_owned(),
            api_key: api_key.to_owned(),
            agent,
        }
    }
}

impl LlmProvider for LiveProvider {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut resp = self
            .agent
            .post(&format!("{}/chat/completions", self.base_url))
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => ProviderError::Status(code),
                ureq::Error::Timeout(_) => ProviderError::Timeout,
                other => ProviderError::Transport(other.to_string()),
            })?;
        let value: serde_json::Value =
            resp.body_mut().read_json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Live
    }
}

/// Wraps a provider and keeps every exchange in memory, optionally appending
/// it to a JSONL log as well. The log doubles as a replay cassette.
pub struct RecordingProvider<P> {
    inner: P,
    log_path: Option<PathBuf>,
    records: Mutex<Vec<PromptRecord>>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider { inner, log_path: None, records: Mutex::new(Vec::new()) }
    }

    pub fn with_log(inner: P, path: impl Into<PathBuf>) -> Self {
        RecordingProvider { inner, log_path: Some(path.into()), records: Mutex::new(Vec::new()) }
    }

    pub fn records(&self) -> Vec<PromptRecord> {
        self.records.lock().expect("record lock").clone()
    }

    pub fn prompts(&self) -> Vec<String> {
        self.records.lock().expect("record lock").iter().map(|r| r.prompt.clone()).collect()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn append(&self, record: &PromptRecord) -> Result<(), ProviderError> {
        let Some(path) = &self.log_path else { return Ok(()) };
        let io = |e: std::io::Error| ProviderError::Io { path: path.clone(), reason: e.to_string() };
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(io)
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
        let result = self.inner.complete(prompt, temperature);
        let record = PromptRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            mode: self.inner.mode(),
            prompt_sha256: prompt_sha256(prompt),
            prompt: prompt.to_owned(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        self.append(&record)?;
        self.records.lock().expect("record lock").push(record);
        result
    }

    fn mode(&self) -> ProviderMode {
        self.inner.mode()
    }
}

impl LlmProvider for Box<dyn LlmProvider> {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
        (**self).complete(prompt, temperature)
    }

    fn mode(&self) -> ProviderMode {
        (**self).mode()
    }
}
