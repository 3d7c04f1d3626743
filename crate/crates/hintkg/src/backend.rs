//! Recommender backends: a remote completion endpoint and deterministic
//! mocks.

use std::thread;
use std::time::Duration;

use hintkg_core::choice::mock_oracle_recommend;
use hintkg_core::discovery::{instance_rng, HintSet};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_ENDPOINT: &str = "HINTKG_ENDPOINT";
pub const ENV_TOKEN: &str = "HINTKG_API_TOKEN";
pub const ENV_MODEL: &str = "HINTKG_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub id: u64,
    pub instance: u32,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
}

/// What a backend may know about the instance beyond the prompt. Remote
/// backends ignore it; mocks use it in place of a language model.
pub struct InstanceContext<'a> {
    pub titles: &'a [&'a str],
    pub gold: usize,
    pub hints: &'a HintSet,
}

pub trait Backend: Sync {
    fn name(&self) -> &str;

    /// Upper bound on concurrent in-flight requests.
    fn concurrency(&self) -> usize {
        1
    }

    fn complete(&self, request: &CompletionRequest, context: &InstanceContext<'_>) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockBackend {
    /// Answers with the candidate whose item hints overlap the user hints
    /// most.
    Oracle,
    /// Uniformly random title, seeded per instance.
    RandomTitle { seed: u64 },
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        match self {
            MockBackend::Oracle => "mock-oracle",
            MockBackend::RandomTitle { .. } => "mock-random",
        }
    }

    fn concurrency(&self) -> usize {
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }

    fn complete(&self, request: &CompletionRequest, ctx: &InstanceContext<'_>) -> Result<String> {
        let pick = match self {
            MockBackend::Oracle => mock_oracle_recommend(ctx.hints, ctx.titles)?,
            MockBackend::RandomTitle { seed } => {
                if ctx.titles.is_empty() {
                    return Err(hintkg_core::Error::Contract("no candidates".into()).into());
                }
                instance_rng(*seed, request.instance).random_range(0..ctx.titles.len())
            }
        };
        Ok(ctx.titles[pick].to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL the completion request is POSTed to.
    pub endpoint: String,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Retries after the first attempt.
    pub retries: u32,
    /// Wait before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub concurrency: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/completions".into(),
            token: None,
            model: "default".into(),
            max_tokens: 64,
            temperature: 0.0,
            retries: 3,
            backoff_ms: 1000,
            timeout_secs: 60,
            concurrency: 4,
        }
    }
}

impl RemoteConfig {
    /// Overrides endpoint, token and model from the environment when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_TOKEN) {
            self.token = Some(v);
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        self
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    completion: String,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(String),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.temperature < 0.0 {
            return Err(Error::Config("backend.temperature must be >= 0".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &str) -> Result<Attempt> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &self.config.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading body: {e}"))),
        };
        if status == 429 || status >= 500 {
            return Ok(Attempt::Retry(format!("status {status}: {}", excerpt(&text))));
        }
        if !(200..300).contains(&status) {
            return Err(Error::Protocol {
                status,
                excerpt: excerpt(&text),
            });
        }
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| Error::Protocol {
            status,
            excerpt: format!("unparseable body ({e}): {}", excerpt(&text)),
        })?;
        Ok(Attempt::Done(parsed.completion))
    }
}

fn excerpt(s: &str) -> String {
    const MAX: usize = 200;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_owned(),
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn concurrency(&self) -> usize {
        self.config.concurrency.max(1)
    }

    fn complete(&self, request: &CompletionRequest, _ctx: &InstanceContext<'_>) -> Result<String> {
        let body = serde_json::to_string(&WireRequest {
            model: &self.config.model,
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
        })?;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(&body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(why) => last = why,
            }
        }
        Err(Error::Transport {
            attempts: self.config.retries + 1,
            message: last,
        })
    }
}
