//! Completion transports: an HTTP client for a chat-completion endpoint and
//! a replay transport that reads scripted replies from a directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use nanoop_core::llm::{Request, Transport, TransportError};
use serde_json::json;

/// Endpoint URL of the HTTP transport.
pub const ENDPOINT_VAR: &str = "NANOOP_LLM_ENDPOINT";
/// Bearer token of the HTTP transport.
pub const KEY_VAR: &str = "NANOOP_LLM_KEY";

/// Posts `{model, temperature, messages: [{role, content}]}` as JSON and
/// reads the reply from `choices[0].message.content` or `content`.
#[derive(Debug)]
pub struct HttpTransport {
    pub endpoint: String,
    pub key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(300))).build().into();
        HttpTransport { endpoint: endpoint.into(), key, agent }
    }

    pub fn from_env() -> Result<Self, String> {
        let endpoint = std::env::var(ENDPOINT_VAR).map_err(|_| format!("{ENDPOINT_VAR} is not set"))?;
        Ok(Self::new(endpoint, std::env::var(KEY_VAR).ok()))
    }
}

/// The JSON body sent for `req`.
pub fn request_body(req: &Request<'_>) -> serde_json::Value {
    let messages: Vec<_> = req.messages.iter().map(|m| json!({"role": m.role.name(), "content": m.content})).collect();
    json!({"model": req.model, "temperature": req.temperature, "messages": messages})
}

/// Reply text from a response body.
pub fn reply_text(body: &serde_json::Value) -> Option<String> {
    body.pointer("/choices/0/message/content").or_else(|| body.get("content")).and_then(|v| v.as_str()).map(String::from)
}

impl Transport for HttpTransport {
    fn complete(&self, req: &Request<'_>) -> Result<String, TransportError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(k) = &self.key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call.send_json(request_body(req)).map_err(|e| TransportError(e.to_string()))?;
        let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| TransportError(e.to_string()))?;
        reply_text(&body).ok_or_else(|| TransportError("response has no reply text".into()))
    }
}

/// Replays `<dir>/<sample>-<attempt>.txt`. When the exact attempt has no
/// file, the latest earlier attempt of the same sample is used. A file
/// `<sample>-<attempt>.err` makes the first call for that pair fail with
/// its contents, so retries can be exercised.
#[derive(Debug)]
pub struct MockTransport {
    dir: PathBuf,
    calls: Mutex<BTreeMap<(usize, usize), usize>>,
}

impl MockTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, String> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(format!("mock script directory {} does not exist", dir.display()));
        }
        Ok(MockTransport { dir, calls: Mutex::new(BTreeMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl Transport for MockTransport {
    fn complete(&self, req: &Request<'_>) -> Result<String, TransportError> {
        let key = (req.sample, req.attempt);
        let n = {
            let mut calls = self.calls.lock().expect("mock call log");
            let n = calls.entry(key).or_insert(0);
            *n += 1;
            *n
        };
        let err = self.dir.join(format!("{}-{}.err", req.sample, req.attempt));
        if n == 1 && err.exists() {
            let msg = std::fs::read_to_string(&err).unwrap_or_default();
            return Err(TransportError(msg.trim().to_string()));
        }
        for a in (0..=req.attempt).rev() {
            let p = self.dir.join(format!("{}-{a}.txt", req.sample));
            if p.exists() {
                return std::fs::read_to_string(&p).map_err(|e| TransportError(format!("{}: {e}", p.display())));
            }
        }
        Err(TransportError(format!("no scripted reply for sample {} attempt {}", req.sample, req.attempt)))
    }
}

/// Either transport, chosen by a `--transport` value: `http` (endpoint from
/// the environment), `http:<url>` or `mock:<dir>`.
#[derive(Debug)]
pub enum AnyTransport {
    Http(HttpTransport),
    Mock(MockTransport),
}

impl AnyTransport {
    pub fn parse(spec: &str, base: &Path) -> Result<Self, String> {
        if let Some(dir) = spec.strip_prefix("mock:") {
            return MockTransport::new(base.join(dir)).map(AnyTransport::Mock);
        }
        if spec == "http" {
            return HttpTransport::from_env().map(AnyTransport::Http);
        }
        if let Some(url) = spec.strip_prefix("http:").filter(|u| u.starts_with("//")) {
            return Ok(AnyTransport::Http(HttpTransport::new(format!("http:{url}"), std::env::var(KEY_VAR).ok())));
        }
        if spec.starts_with("https://") {
            return Ok(AnyTransport::Http(HttpTransport::new(spec, std::env::var(KEY_VAR).ok())));
        }
        Err(format!("unknown transport `{spec}` (expected http, http://..., https://... or mock:<dir>)"))
    }
}

impl Transport for AnyTransport {
    fn complete(&self, req: &Request<'_>) -> Result<String, TransportError> {
        match self {
            AnyTransport::Http(t) => t.complete(req),
            AnyTransport::Mock(t) => t.complete(req),
        }
    }
}
