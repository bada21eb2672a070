//! Completion backends: an OpenAI-compatible chat endpoint and an offline
//! stub that serves fixture files keyed by prompt content.

use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::PromptPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub k: usize,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: u64,
    /// Total attempts per request.
    pub retries: u32,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            k: 10,
            temperature: 0.6,
            max_output_tokens: 4096,
            request_timeout_secs: 120,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.k == 0 {
            return Err(LlmError::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.retries == 0 {
            return Err(LlmError::Config("retries must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CompletionBackend {
    RemoteChat {
        /// Base URL; `/chat/completions` is appended.
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token.
        api_key_env: String,
    },
    Stub {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("no stub fixture {key} (expected file {path})")]
    MissingFixture { key: String, path: String },
    #[error("authentication failed (HTTP {0})")]
    Auth(u16),
    #[error("request failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("unexpected HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// Stub fixture key: sha256 over system prompt, a NUL byte, and user prompt.
pub fn prompt_hash(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update([0u8]);
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

pub fn stub_file_name(prompt: &PromptPair, sample_index: usize) -> String {
    format!(
        "{}.{sample_index}.txt",
        prompt_hash(&prompt.system, &prompt.user)
    )
}

pub fn stub_path(dir: &Path, prompt: &PromptPair, sample_index: usize) -> PathBuf {
    dir.join(stub_file_name(prompt, sample_index))
}

/// One completion for one sample index.
pub fn complete(
    backend: &CompletionBackend,
    prompt: &PromptPair,
    temperature: f64,
    sample_index: usize,
    cfg: &GenerationConfig,
) -> Result<String, LlmError> {
    match backend {
        CompletionBackend::Stub { dir } => {
            let path = stub_path(dir, prompt, sample_index);
            std::fs::read_to_string(&path).map_err(|_| LlmError::MissingFixture {
                key: format!(
                    "{}#{sample_index}",
                    prompt_hash(&prompt.system, &prompt.user)
                ),
                path: path.display().to_string(),
            })
        }
        CompletionBackend::RemoteChat {
            endpoint,
            model,
            api_key_env,
        } => {
            let key = std::env::var(api_key_env).unwrap_or_default();
            remote_complete(endpoint, model, &key, prompt, temperature, cfg)
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

fn remote_complete(
    endpoint: &str,
    model: &str,
    api_key: &str,
    prompt: &PromptPair,
    temperature: f64,
    cfg: &GenerationConfig,
) -> Result<String, LlmError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.request_timeout_secs))
        .build()
        .map_err(|e| LlmError::Config(e.to_string()))?;
    let url = format!("{}/chat/completions", endpoint.trim_end_matches('/'));
    let body = ChatRequest {
        model,
        messages: [
            ChatMessage {
                role: "system",
                content: &prompt.system,
            },
            ChatMessage {
                role: "user",
                content: &prompt.user,
            },
        ],
        temperature,
        max_tokens: cfg.max_output_tokens,
    };
    let mut last = String::new();
    for attempt in 0..cfg.retries {
        if attempt > 0 {
            thread::sleep(Duration::from_millis(cfg.backoff_ms << (attempt - 1)));
        }
        let mut req = client.post(&url).json(&body);
        if !api_key.is_empty() {
            req = req.bearer_auth(api_key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                log::warn!("chat request attempt {} failed: {e}", attempt + 1);
                last = e.to_string();
                continue;
            }
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {
                let parsed: ChatResponse = resp
                    .json()
                    .map_err(|e| LlmError::Malformed(e.to_string()))?;
                return parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.message.content)
                    .ok_or_else(|| LlmError::Malformed("no choices".into()));
            }
            401 | 403 => return Err(LlmError::Auth(status)),
            429 | 500..=599 => {
                log::warn!("chat request attempt {} got HTTP {status}", attempt + 1);
                last = format!("HTTP {status}");
            }
            _ => {
                return Err(LlmError::Http {
                    status,
                    body: resp.text().unwrap_or_default(),
                })
            }
        }
    }
    Err(LlmError::Transport {
        attempts: cfg.retries,
        last,
    })
}

/// Successful completions in index order, plus the indices that failed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub completions: Vec<(usize, String)>,
    pub errors: Vec<(usize, LlmError)>,
}

impl SampleSet {
    pub fn get(&self, index: usize) -> Option<&str> {
        self.completions
            .iter()
            .find(|(i, _)| *i == index)
            .map(|(_, s)| s.as_str())
    }
}

/// Requests `cfg.k` samples concurrently, indices `0..k`.
pub fn sample_k(
    backend: &CompletionBackend,
    prompt: &PromptPair,
    cfg: &GenerationConfig,
) -> Result<SampleSet, LlmError> {
    sample_range(backend, prompt, cfg, 0)
}

/// Like [`sample_k`] with indices `offset..offset + k`.
pub fn sample_range(
    backend: &CompletionBackend,
    prompt: &PromptPair,
    cfg: &GenerationConfig,
    offset: usize,
) -> Result<SampleSet, LlmError> {
    cfg.validate()?;
    let results: Vec<(usize, Result<String, LlmError>)> = thread::scope(|s| {
        let handles: Vec<_> = (offset..offset + cfg.k)
            .map(|i| s.spawn(move || (i, complete(backend, prompt, cfg.temperature, i, cfg))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("completion thread panicked"))
            .collect()
    });
    let mut set = SampleSet::default();
    for (i, r) in results {
        match r {
            Ok(text) => set.completions.push((i, text)),
            Err(e) => set.errors.push((i, e)),
        }
    }
    Ok(set)
}
