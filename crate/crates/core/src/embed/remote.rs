//! HTTP embeddings provider speaking the common `{"model","input"}` ->
//! `{"data":[{"index","embedding"}]}` JSON shape.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbedderConfig, EmbeddingProvider};
use crate::retry::{with_retries, Attempt, RetryPolicy};

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

pub struct RemoteProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    policy: RetryPolicy,
}

impl RemoteProvider {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self, EmbedError> {
        if cfg.endpoint_url.is_empty() {
            return Err(EmbedError::Provider {
                attempts: 0,
                message: "no embeddings endpoint configured".into(),
            });
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| EmbedError::Provider {
                attempts: 0,
                message: e.to_string(),
            })?;
        let api_key = cfg
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        Ok(Self {
            client,
            endpoint: cfg.endpoint_url.clone(),
            model: cfg.model_id.clone(),
            api_key,
            policy: RetryPolicy {
                attempts: cfg.retries,
                backoff: Duration::from_millis(cfg.retry_backoff_ms),
            },
        })
    }

    fn post_once(&self, inputs: &[String]) -> Attempt<Vec<Vec<f64>>> {
        let mut req = self.client.post(&self.endpoint).json(&EmbeddingRequest {
            model: &self.model,
            input: inputs,
        });
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
        let mut body: EmbeddingResponse = match resp.json() {
            Ok(b) => b,
            Err(e) => return Attempt::Fail(format!("bad response body: {e}")),
        };
        if body.data.len() != inputs.len() {
            return Attempt::Fail(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                body.data.len()
            ));
        }
        body.data.sort_by_key(|d| d.index);
        if body.data.iter().enumerate().any(|(i, d)| d.index != i) {
            return Attempt::Fail("response indices are not 0..n".into());
        }
        Attempt::Done(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        with_retries(&self.policy, || self.post_once(inputs))
            .map_err(|(attempts, message)| EmbedError::Provider { attempts, message })
    }
}
