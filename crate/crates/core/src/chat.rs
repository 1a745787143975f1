//! Minimal blocking client for chat-completions endpoints.
//!
//! Credentials are read from an environment variable at call time; the
//! variable's name travels in config, its value never does.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("credential variable {env} is not set")]
    MissingCredential { env: String },
    #[error("endpoint returned HTTP {status}: {snippet}")]
    Http { status: u16, snippet: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl ChatError {
    /// Transient failures worth another attempt: transport errors, rate
    /// limits, server-side errors.
    pub fn is_retryable(&self) -> bool {
        match self {
            ChatError::Transport(_) => true,
            ChatError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    pub url: String,
    pub model: String,
    pub credential_env: String,
    pub timeout: Duration,
    /// Decoding parameters merged into every request body. Keys here win
    /// over the defaults, so callers can override temperature.
    pub extra_params: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl ChatClient {
    pub fn new(url: String, model: String, credential_env: String) -> Self {
        ChatClient {
            url,
            model,
            credential_env,
            timeout: Duration::from_secs(60),
            extra_params: BTreeMap::new(),
        }
    }

    pub fn with_params(mut self, params: BTreeMap<String, Value>) -> Self {
        self.extra_params = params;
        self
    }

    /// The exact JSON body sent for a (system, user) exchange.
    pub fn request_body(&self, system: &str, user: &str) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": user },
            ],
            "temperature": 0,
        });
        let map = body.as_object_mut().expect("body is an object");
        for (key, value) in &self.extra_params {
            map.insert(key.clone(), value.clone());
        }
        body
    }

    /// One round trip. Returns the assistant message text.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, ChatError> {
        let token = std::env::var(&self.credential_env)
            .map_err(|_| ChatError::MissingCredential { env: self.credential_env.clone() })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let response = client
            .post(&self.url)
            .bearer_auth(token)
            .json(&self.request_body(system, user))
            .send()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let snippet: String = body.chars().take(200).collect();
            return Err(ChatError::Http { status, snippet });
        }
        let parsed: Completion = serde_json::from_str(&body).map_err(|e| {
            ChatError::MalformedResponse(format!(
                "{e}; body starts {:?}",
                body.chars().take(80).collect::<String>()
            ))
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ChatError::MalformedResponse("empty choices array".into()))?;
        Ok(choice.message.content)
    }

    /// Retries retryable failures with exponential backoff plus jitter.
    /// Returns the final outcome and how many attempts were made.
    pub fn complete_with_retries(
        &self,
        system: &str,
        user: &str,
        max_attempts: u32,
    ) -> (Result<String, ChatError>, u32) {
        let max_attempts = max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.complete(system, user) {
                Ok(text) => return (Ok(text), attempt),
                Err(err) if err.is_retryable() && attempt < max_attempts => {
                    let base = 250u64.saturating_mul(1 << (attempt - 1).min(6));
                    let jitter = rand::random_range(0..=base / 2);
                    std::thread::sleep(Duration::from_millis(base + jitter));
                }
                Err(err) => return (Err(err), attempt),
            }
        }
    }
}
