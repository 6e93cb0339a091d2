//! Optional query rewriting through a chat-completions provider.
//!
//! The default mode passes the query through untouched. In `LlmExtract` mode
//! the query is substituted into a prompt template, sent to the provider, and
//! the provider's reply (opaque text) replaces the query for embedding.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retry::{with_retries, Attempt, RetryPolicy};

pub const QUERY_PLACEHOLDER: &str = "{query}";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("chat provider failed for query {query:?}: {message}")]
    Provider { query: String, message: String },
    #[error("template {name:?}: {message}")]
    Template { name: String, message: String },
    #[error("query is empty")]
    EmptyQuery,
}

impl TransformError {
    /// The untransformed query, for callers that fall back to it.
    pub fn original_query(&self) -> Option<&str> {
        match self {
            TransformError::Provider { query, .. } => Some(query),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Result<Self, TransformError> {
        let t = Self {
            name: name.into(),
            body: body.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let count = self.body.matches(QUERY_PLACEHOLDER).count();
        if count != 1 {
            return Err(TransformError::Template {
                name: self.name.clone(),
                message: format!(
                    "expected exactly one {QUERY_PLACEHOLDER} placeholder, found {count}"
                ),
            });
        }
        Ok(())
    }

    pub fn render(&self, query: &str) -> Result<String, TransformError> {
        self.validate()?;
        Ok(self.body.replacen(QUERY_PLACEHOLDER, query, 1))
    }

    /// Structured fact/issue extraction; forbids adding inferred content.
    pub fn query_extraction() -> Self {
        Self {
            name: "query-extraction".into(),
            body: include_str!("../templates/query_extraction.txt").into(),
        }
    }

    /// Answer-generation template; also has a `{context}` slot.
    pub fn task_oriented() -> Self {
        Self {
            name: "task-oriented".into(),
            body: include_str!("../templates/task_oriented.txt").into(),
        }
    }

    /// Answer-generation template; also has a `{context}` slot.
    pub fn chain_of_thought() -> Self {
        Self {
            name: "chain-of-thought".into(),
            body: include_str!("../templates/chain_of_thought.txt").into(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "query-extraction" => Some(Self::query_extraction()),
            "task-oriented" => Some(Self::task_oriented()),
            "chain-of-thought" => Some(Self::chain_of_thought()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    #[default]
    Identity,
    LlmExtract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    pub mode: TransformMode,
    pub template: PromptTemplate,
    pub endpoint_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            mode: TransformMode::Identity,
            template: PromptTemplate::query_extraction(),
            endpoint_url: String::new(),
            model: String::new(),
            api_key_env: None,
            timeout_ms: 60_000,
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, String>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
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
    content: String,
}

/// `POST {"model", "messages": [{"role": "user", "content"}]}`; returns the
/// first choice's message content.
pub struct HttpChatProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    policy: RetryPolicy,
}

impl HttpChatProvider {
    pub fn new(cfg: &TransformConfig) -> Result<Self, String> {
        if cfg.endpoint_url.is_empty() {
            return Err("no chat endpoint configured".into());
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint_url.clone(),
            model: cfg.model.clone(),
            api_key: cfg
                .api_key_env
                .as_deref()
                .and_then(|k| std::env::var(k).ok()),
            policy: RetryPolicy::default(),
        })
    }

    pub fn with_retry_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    fn post_once(&self, prompt: &str) -> Attempt<String> {
        let body = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        if status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Fail(format!("HTTP {status}"));
        }
        match resp.json::<ChatResponse>() {
            Ok(r) => match r.choices.into_iter().next() {
                Some(c) => Attempt::Done(c.message.content),
                None => Attempt::Fail("response has no choices".into()),
            },
            Err(e) => Attempt::Fail(format!("bad response body: {e}")),
        }
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, prompt: &str) -> Result<String, String> {
        with_retries(&self.policy, || self.post_once(prompt))
            .map_err(|(n, msg)| format!("{msg} (after {n} attempt(s))"))
    }
}

/// Rewrites `query` according to `cfg`. `provider` is only consulted in
/// `LlmExtract` mode.
pub fn transform(
    query: &str,
    cfg: &TransformConfig,
    provider: Option<&dyn ChatProvider>,
) -> Result<String, TransformError> {
    if query.is_empty() {
        return Err(TransformError::EmptyQuery);
    }
    match cfg.mode {
        TransformMode::Identity => Ok(query.to_owned()),
        TransformMode::LlmExtract => {
            let prompt = cfg.template.render(query)?;
            let provider = provider.ok_or_else(|| TransformError::Provider {
                query: query.to_owned(),
                message: "no chat provider configured".into(),
            })?;
            provider
                .complete(&prompt)
                .map_err(|message| TransformError::Provider {
                    query: query.to_owned(),
                    message,
                })
        }
    }
}

/// Builds the HTTP provider from `cfg` when the mode needs one.
pub fn transform_with_config(query: &str, cfg: &TransformConfig) -> Result<String, TransformError> {
    match cfg.mode {
        TransformMode::Identity => transform(query, cfg, None),
        TransformMode::LlmExtract => {
            let provider =
                HttpChatProvider::new(cfg).map_err(|message| TransformError::Provider {
                    query: query.to_owned(),
                    message,
                })?;
            transform(query, cfg, Some(&provider))
        }
    }
}
