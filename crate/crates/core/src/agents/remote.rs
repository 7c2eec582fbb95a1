use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_agent_output, Agent, AgentDecision, AgentError};
use crate::prompt::PromptBundle;

pub const ENV_API_BASE: &str = "VERIOS_API_BASE";
pub const ENV_API_KEY: &str = "VERIOS_API_KEY";
pub const ENV_MODEL: &str = "VERIOS_MODEL";

const EXCERPT_CHARS: usize = 200;

/// Connection settings for a chat-completions endpoint. The key itself is
/// never stored here, only the name of the variable holding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Extra attempts after a transport failure. HTTP errors and bad
    /// replies are never retried.
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: String::new(),
            model: String::new(),
            api_key_env: ENV_API_KEY.into(),
            timeout_secs: 60,
            retries: 0,
            max_in_flight: 4,
        }
    }
}

impl RemoteConfig {
    /// Fills `base_url` and `model` from the environment where unset.
    pub fn resolve_env(mut self) -> RemoteConfig {
        if self.base_url.is_empty() {
            self.base_url = std::env::var(ENV_API_BASE).unwrap_or_default();
        }
        if self.model.is_empty() {
            self.model = std::env::var(ENV_MODEL).unwrap_or_default();
        }
        self
    }
}

/// Counting gate bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    released: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(slots: usize) -> Gate {
        Gate { free: Mutex::new(slots.max(1)), released: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

pub struct RemoteAgent {
    cfg: RemoteConfig,
    api_key: Option<String>,
    asset_root: PathBuf,
    http: ureq::Agent,
    gate: Gate,
}

impl RemoteAgent {
    /// `asset_root` is the directory screenshot paths resolve against.
    pub fn new(cfg: RemoteConfig, asset_root: impl Into<PathBuf>) -> Result<RemoteAgent, AgentError> {
        let cfg = cfg.resolve_env();
        if cfg.base_url.trim().is_empty() {
            return Err(AgentError::BadBackendSpec(format!("no endpoint: set base_url or {ENV_API_BASE}")));
        }
        if cfg.model.trim().is_empty() {
            return Err(AgentError::BadBackendSpec(format!("no model: set model or {ENV_MODEL}")));
        }
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(cfg.max_in_flight);
        Ok(RemoteAgent { cfg, api_key, asset_root: asset_root.into(), http, gate })
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> RemoteAgent {
        self.api_key = Some(key.into());
        self
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    /// The request body sent for `bundle`.
    pub fn request_body(&self, bundle: &PromptBundle) -> Result<Value, AgentError> {
        let path = self.asset_root.join(&bundle.image);
        let bytes = fs::read(&path).map_err(|e| AgentError::Asset { path: path.clone(), message: e.to_string() })?;
        let url = format!("data:{};base64,{}", mime_for(&path), STANDARD.encode(bytes));
        Ok(json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": [
                    {"type": "image_url", "image_url": {"url": url}},
                    {"type": "text", "text": bundle.user_text},
                ]},
            ],
        }))
    }

    fn post(&self, body: &Value) -> Result<(u16, String), AgentError> {
        let _permit = self.gate.acquire();
        let mut last = String::new();
        for _ in 0..=self.cfg.retries {
            let mut request = self.http.post(self.endpoint());
            if let Some(key) = &self.api_key {
                request = request.header("Authorization", format!("Bearer {key}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let text = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| AgentError::EndpointError { status, body_excerpt: e.to_string() })?;
                    return Ok((status, text));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(AgentError::EndpointUnreachable(last))
    }
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "image/png",
    }
}

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_CHARS).collect()
}

/// Text of the first choice; content may be a string or a list of parts.
fn reply_text(body: &str) -> Option<String> {
    let value: Value = serde_json::from_str(body).ok()?;
    match &value["choices"][0]["message"]["content"] {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            Some(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join(""))
        }
        _ => None,
    }
}

impl Agent for RemoteAgent {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        let body = self.request_body(bundle)?;
        let (status, text) = self.post(&body)?;
        if !(200..300).contains(&status) {
            return Err(AgentError::EndpointError { status, body_excerpt: excerpt(&text) });
        }
        let reply = reply_text(&text).ok_or_else(|| AgentError::EndpointError { status, body_excerpt: excerpt(&text) })?;
        parse_agent_output(&reply)
    }

    fn name(&self) -> String {
        format!("remote({})", self.cfg.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_shapes() {
        assert_eq!(reply_text(r#"{"choices":[{"message":{"content":"hi"}}]}"#).as_deref(), Some("hi"));
        assert_eq!(
            reply_text(r#"{"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}"#)
                .as_deref(),
            Some("ab")
        );
        assert_eq!(reply_text(r#"{"choices":[]}"#), None);
        assert_eq!(reply_text("not json"), None);
    }

    #[test]
    fn config_requires_endpoint_and_model() {
        let cfg = RemoteConfig { base_url: "http://127.0.0.1:9".into(), model: String::new(), ..RemoteConfig::default() };
        if std::env::var(ENV_MODEL).is_err() {
            assert!(matches!(RemoteAgent::new(cfg, "."), Err(AgentError::BadBackendSpec(_))));
        }
        let cfg = RemoteConfig { base_url: "http://127.0.0.1:9/".into(), model: "m".into(), ..RemoteConfig::default() };
        let agent = RemoteAgent::new(cfg, ".").unwrap();
        assert_eq!(agent.endpoint(), "http://127.0.0.1:9/chat/completions");
        assert_eq!(agent.name(), "remote(m)");
    }

    #[test]
    fn mime_types() {
        assert_eq!(mime_for(Path::new("a/b.JPG")), "image/jpeg");
        assert_eq!(mime_for(Path::new("a/b.png")), "image/png");
    }

    #[test]
    fn gate_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let gate = Gate::new(2);
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = gate.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
