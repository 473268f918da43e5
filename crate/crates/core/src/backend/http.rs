//! Remote completion endpoint.
//!
//! Wire format: `POST {url}` with `{"prompt", "temperature", "max_output_tokens"}`,
//! answered by `{"text"}`. Transport failures are retried with exponential
//! backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, PromptBundle};

pub const URL_VAR: &str = "AGENT_LLM_URL";
pub const TOKEN_VAR: &str = "AGENT_LLM_TOKEN";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub url: String,
    pub token: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        HttpConfig {
            url: url.into(),
            token: None,
            temperature: 0.0,
            max_output_tokens: 512,
            retries: 2,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the endpoint from `AGENT_LLM_URL` and the optional bearer token
    /// from `AGENT_LLM_TOKEN`.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(URL_VAR).map_err(|_| BackendError::Config(format!("{URL_VAR} is not set")))?;
        let mut cfg = HttpConfig::new(url);
        cfg.token = std::env::var(TOKEN_VAR).ok().filter(|t| !t.is_empty());
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: &'a str,
    temperature: f64,
    max_output_tokens: u32,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

#[derive(Clone)]
pub struct HttpBackend {
    cfg: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).build().into();
        HttpBackend { cfg, agent }
    }

    fn attempt(&self, prompt: &str) -> Result<String, ureq::Error> {
        let body = Request { prompt, temperature: self.cfg.temperature, max_output_tokens: self.cfg.max_output_tokens };
        let mut req = self.agent.post(&self.cfg.url);
        if let Some(token) = &self.cfg.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let reply: Reply = req.send_json(&body)?.body_mut().read_json()?;
        Ok(reply.text)
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let mut delay = self.cfg.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(&prompt.text) {
                Ok(text) => return Ok(text),
                Err(e) if tries >= self.cfg.retries => return Err(BackendError::Transport(e.to_string())),
                Err(_) => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
            }
        }
    }

    fn identity(&self) -> String {
        format!("http:{}", self.cfg.url)
    }
}
