use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const URL_ENV: &str = "CI_PORTER_LLM_URL";
pub const KEY_ENV: &str = "CI_PORTER_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// The wire request. `case_id` and `iteration` route scripted responses and
/// are not sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
    #[serde(skip)]
    pub case_id: String,
    #[serde(skip)]
    pub iteration: usize,
}

impl ProviderRequest {
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: 0.0,
            messages: vec![Message::user(prompt)],
            case_id: String::new(),
            iteration: 0,
        }
    }

    /// Text of the last message, which carries the prompt.
    pub fn prompt(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// The request did not complete; retrying may help.
    #[error("case {case_id}: provider request failed: {message}")]
    Transport { case_id: String, message: String },
    #[error("case {case_id}: no scripted response for iteration {iteration}")]
    NoScript { case_id: String, iteration: usize },
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ProviderError::Transport { .. })
    }
}

/// A model endpoint. Called concurrently from worker threads.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

/// Adapts a closure into a provider.
pub struct FnProvider<F>(pub F);

impl<F> Provider for FnProvider<F>
where
    F: Fn(&ProviderRequest) -> Result<ProviderResponse, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (self.0)(request)
    }
}

/// Canned responses keyed by case and iteration. An iteration without its
/// own response reuses the latest earlier one, so a script that stops early
/// models a provider repeating itself.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    responses: BTreeMap<String, BTreeMap<usize, String>>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, case_id: &str, iteration: usize, content: impl Into<String>) -> Self {
        self.insert(case_id, iteration, content);
        self
    }

    pub fn insert(&mut self, case_id: &str, iteration: usize, content: impl Into<String>) {
        self.responses
            .entry(case_id.to_string())
            .or_default()
            .insert(iteration, content.into());
    }

    /// Loads `<case_id>.<iteration>.txt` files from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, ProviderError> {
        let entries = fs::read_dir(dir)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", dir.display())))?;
        let mut provider = Self::new();
        for entry in entries {
            let path = entry.map_err(|e| ProviderError::Config(e.to_string()))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(stem) = name.strip_suffix(".txt") else { continue };
            let Some((case_id, iteration)) = stem.rsplit_once('.') else { continue };
            let Ok(iteration) = iteration.parse::<usize>() else { continue };
            let content = fs::read_to_string(&path)
                .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
            provider.insert(case_id, iteration, content);
        }
        Ok(provider)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .get(&request.case_id)
            .and_then(|by_iter| by_iter.range(..=request.iteration).next_back())
            .map(|(_, content)| ProviderResponse { content: content.clone() })
            .ok_or_else(|| ProviderError::NoScript {
                case_id: request.case_id.clone(),
                iteration: request.iteration,
            })
    }
}

/// JSON-over-HTTP endpoint: POST `{model, temperature, messages}`, reply
/// `{content}`.
#[derive(Debug)]
pub struct HttpProvider {
    url: String,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            key,
            agent,
        }
    }

    /// Reads the endpoint and key from `CI_PORTER_LLM_URL` / `CI_PORTER_LLM_KEY`.
    pub fn from_env(timeout: Duration) -> Result<Self, ProviderError> {
        let url = std::env::var(URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| ProviderError::Config(format!("{URL_ENV} is not set")))?;
        let key = std::env::var(KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(Self::new(url, key, timeout))
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let transport = |message: String| ProviderError::Transport {
            case_id: request.case_id.clone(),
            message,
        };
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(|e| transport(e.to_string()))?;
        response
            .body_mut()
            .read_json::<ProviderResponse>()
            .map_err(|e| transport(format!("malformed response: {e}")))
    }
}
