//! Text-generation client over HTTP.
//!
//! Sends `{"prompt": ...}` as JSON and expects `{"text": ...}` back.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use salesopt_core::explain::narrative::{DeterministicMock, TextGenClient, TextGenError};

use crate::config::{TextGenProvider, TextGenSection};

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

#[derive(Debug, Clone)]
pub struct ExternalHttp {
    url: String,
    agent: ureq::Agent,
}

impl ExternalHttp {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url: url.to_string(), agent }
    }
}

impl TextGenClient for ExternalHttp {
    fn name(&self) -> &str {
        "external-http"
    }

    fn generate(&self, prompt: &str) -> Result<String, TextGenError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(Request { prompt })
            .map_err(|e| TextGenError::Transport(e.to_string()))?;
        let reply: Reply = resp.body_mut().read_json().map_err(|e| TextGenError::BadResponse(e.to_string()))?;
        if reply.text.trim().is_empty() {
            return Err(TextGenError::BadResponse("empty text".into()));
        }
        Ok(reply.text)
    }
}

pub fn client(cfg: &TextGenSection) -> Box<dyn TextGenClient + Send + Sync> {
    match cfg.provider {
        TextGenProvider::Mock => Box::new(DeterministicMock),
        TextGenProvider::Http => Box::new(ExternalHttp::new(&cfg.url, Duration::from_millis(cfg.timeout_ms))),
    }
}
