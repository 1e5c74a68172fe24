//! Chat-completion access behind one interface.
//!
//! A [`Gateway`] owns per-session bookkeeping (occurrence counters, the
//! exchange log, optional recording) and forwards each request to a
//! [`Transport`]: a live OpenAI-compatible HTTP endpoint, a recorded replay
//! store, or a scripted policy.
//!
//! Exchanges are keyed by component tag, the SHA-256 of the canonicalized
//! messages, and an occurrence index, so identical prompts issued at
//! different points of a run replay to their own recorded answers.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_KEY_ENV: &str = "L3GO_API_KEY";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("backend error{}: {reason}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Backend { status: Option<u16>, reason: String },
    #[error("no recorded exchange for tag '{tag}' (hash {hash}, occurrence {occurrence})")]
    ReplayMiss { tag: String, hash: String, occurrence: u32 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("io error: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn backend(reason: impl Into<String>) -> Self {
        GatewayError::Backend { status: None, reason: reason.into() }
    }
}

impl From<std::io::Error> for GatewayError {
    fn from(e: std::io::Error) -> Self {
        GatewayError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// PNG-encoded image attachments.
    pub images: Vec<Vec<u8>>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into(), images: Vec::new() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into(), images: Vec::new() }
    }

    pub fn with_images(mut self, images: Vec<Vec<u8>>) -> Self {
        self.images = images;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Component id, used for keying and logs.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest { messages, temperature: 0.0, max_tokens: 1024, tag: tag.into() }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("at least one message is required".into()));
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return Err(GatewayError::InvalidRequest("only the first message may be a system message".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest(format!("bad temperature {}", self.temperature)));
        }
        Ok(())
    }

    /// Canonical content form: roles, texts, and image digests only.
    pub fn canonical(&self) -> Value {
        Value::Array(
            self.messages
                .iter()
                .map(|m| {
                    json!({
                        "role": m.role,
                        "content": m.content,
                        "images": m.images.iter().map(|i| sha256_hex(i)).collect::<Vec<_>>(),
                    })
                })
                .collect(),
        )
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.canonical().to_string().as_bytes())
    }

    /// Text of the final user message.
    pub fn prompt(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identity of one exchange within a session.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExchangeKey {
    pub tag: String,
    pub hash: String,
    /// How many earlier exchanges in this session had the same tag and hash.
    pub occurrence: u32,
    /// Slot index within a `complete_n` batch (0 for single completions).
    pub sample: usize,
}

impl ExchangeKey {
    pub fn id(&self) -> String {
        format!("{}__{}__{}", self.tag, self.hash, self.occurrence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tag: String,
    pub request_hash: String,
    pub occurrence: u32,
    pub sample: usize,
    pub attempt: u32,
    pub ok: bool,
    pub status: Option<u16>,
    pub detail: String,
}

/// Append-only record of every attempt, optionally mirrored to a JSONL file.
#[derive(Default)]
pub struct ExchangeLog {
    entries: Mutex<Vec<LogEntry>>,
    file: Mutex<Option<fs::File>>,
}

impl ExchangeLog {
    pub fn to_file(path: &Path) -> Result<Self, GatewayError> {
        let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ExchangeLog { entries: Mutex::default(), file: Mutex::new(Some(file)) })
    }

    pub fn append(&self, entry: LogEntry) {
        if let Some(f) = self.file.lock().unwrap().as_mut() {
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            // Logging must not abort a build; a failed write only loses the log line.
            let _ = writeln!(f, "{line}");
        }
        self.entries.lock().unwrap().push(entry);
    }

    pub fn entries(&self) -> Vec<LogEntry> {
        self.entries.lock().unwrap().clone()
    }
}

/// Something that turns a chat request into a reply.
pub trait Transport: Send + Sync {
    fn send(&self, req: &ChatRequest, key: &ExchangeKey, log: &ExchangeLog) -> Result<String, GatewayError>;
}

// ---------------------------------------------------------------- HTTP

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 1000, factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` starts at 1.
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.factor.powi(attempt as i32 - 1);
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    config: HttpConfig,
    api_key: Option<String>,
}

enum Attempt {
    Ok(String),
    Retryable(Option<u16>, String),
    Fatal(Option<u16>, String),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::backend(e.to_string()))?;
        let api_key = std::env::var(&config.key_env).ok().filter(|k| !k.is_empty());
        Ok(HttpBackend { client, config, api_key })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| {
                if m.images.is_empty() {
                    json!({"role": m.role, "content": m.content})
                } else {
                    let mut parts = vec![json!({"type": "text", "text": m.content})];
                    for img in &m.images {
                        let b64 = base64::engine::general_purpose::STANDARD.encode(img);
                        parts.push(json!({
                            "type": "image_url",
                            "image_url": {"url": format!("data:image/png;base64,{b64}")}
                        }));
                    }
                    json!({"role": m.role, "content": parts})
                }
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut rb = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = match rb.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retryable(None, format!("timeout: {e}")),
            Err(e) => return Attempt::Fatal(None, e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retryable(Some(status), format!("timeout: {e}")),
            Err(e) => return Attempt::Fatal(Some(status), e.to_string()),
        };
        if status == 429 || (500..600).contains(&status) {
            return Attempt::Retryable(Some(status), text);
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(Some(status), text);
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(Some(status), format!("malformed response: {e}")),
        };
        match parsed.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(content) => Attempt::Ok(content.to_string()),
            None => Attempt::Fatal(Some(status), "response has no choices[0].message.content".into()),
        }
    }
}

impl Transport for HttpBackend {
    fn send(&self, req: &ChatRequest, key: &ExchangeKey, log: &ExchangeLog) -> Result<String, GatewayError> {
        let body = self.request_body(req);
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            let entry = |ok: bool, status: Option<u16>, detail: String| LogEntry {
                tag: key.tag.clone(),
                request_hash: key.hash.clone(),
                occurrence: key.occurrence,
                sample: key.sample,
                attempt,
                ok,
                status,
                detail,
            };
            match self.attempt(&body) {
                Attempt::Ok(text) => {
                    log.append(entry(true, Some(200), text.clone()));
                    return Ok(text);
                }
                Attempt::Retryable(status, reason) if attempt < max => {
                    log.append(entry(false, status, reason));
                    thread::sleep(self.config.retry.delay(attempt));
                    attempt += 1;
                }
                Attempt::Retryable(status, reason) | Attempt::Fatal(status, reason) => {
                    log.append(entry(false, status, reason.clone()));
                    return Err(GatewayError::Backend { status, reason });
                }
            }
        }
    }
}

// ---------------------------------------------------------------- replay

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExchange {
    pub tag: String,
    pub hash: String,
    pub occurrence: u32,
    pub request: Value,
    pub response: String,
}

/// Recorded exchanges, persisted as one JSON file per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayStore {
    entries: HashMap<String, StoredExchange>,
}

impl ReplayStore {
    pub fn load(dir: &Path) -> Result<Self, GatewayError> {
        let mut entries = HashMap::new();
        let rd = fs::read_dir(dir).map_err(|e| GatewayError::Io(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let text = fs::read_to_string(&path)?;
            let ex: StoredExchange = serde_json::from_str(&text)
                .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
            let id = ExchangeKey { tag: ex.tag.clone(), hash: ex.hash.clone(), occurrence: ex.occurrence, sample: 0 }.id();
            entries.insert(id, ex);
        }
        Ok(ReplayStore { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &StoredExchange> + '_ {
        self.entries.values()
    }

    pub fn get(&self, key: &ExchangeKey) -> Option<&StoredExchange> {
        self.entries.get(&key.id())
    }

    pub fn insert(&mut self, ex: StoredExchange) {
        let id = ExchangeKey { tag: ex.tag.clone(), hash: ex.hash.clone(), occurrence: ex.occurrence, sample: 0 }.id();
        self.entries.insert(id, ex);
    }

    pub fn write_entry(dir: &Path, ex: &StoredExchange) -> Result<(), GatewayError> {
        fs::create_dir_all(dir)?;
        let id = ExchangeKey { tag: ex.tag.clone(), hash: ex.hash.clone(), occurrence: ex.occurrence, sample: 0 }.id();
        let text = serde_json::to_string_pretty(ex).expect("exchange serializes");
        fs::write(dir.join(format!("{id}.json")), text + "\n")?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), GatewayError> {
        fs::create_dir_all(dir)?;
        for ex in self.entries.values() {
            Self::write_entry(dir, ex)?;
        }
        Ok(())
    }
}

pub struct ReplayBackend {
    store: Arc<ReplayStore>,
}

impl ReplayBackend {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        ReplayBackend { store }
    }

    pub fn open(dir: &Path) -> Result<Self, GatewayError> {
        Ok(ReplayBackend { store: Arc::new(ReplayStore::load(dir)?) })
    }
}

impl Transport for ReplayBackend {
    fn send(&self, _req: &ChatRequest, key: &ExchangeKey, log: &ExchangeLog) -> Result<String, GatewayError> {
        let found = self.store.get(key).map(|ex| ex.response.clone());
        log.append(LogEntry {
            tag: key.tag.clone(),
            request_hash: key.hash.clone(),
            occurrence: key.occurrence,
            sample: key.sample,
            attempt: 1,
            ok: found.is_some(),
            status: None,
            detail: found.clone().unwrap_or_else(|| "replay miss".into()),
        });
        found.ok_or_else(|| GatewayError::ReplayMiss {
            tag: key.tag.clone(),
            hash: key.hash.clone(),
            occurrence: key.occurrence,
        })
    }
}

// ---------------------------------------------------------------- scripted

type Policy = dyn Fn(&ChatRequest, &ExchangeKey) -> Result<String, GatewayError> + Send + Sync;

/// A transport answering from a Rust function of the request.
pub struct ScriptedBackend {
    policy: Box<Policy>,
}

impl ScriptedBackend {
    pub fn new(policy: impl Fn(&ChatRequest, &ExchangeKey) -> Result<String, GatewayError> + Send + Sync + 'static) -> Self {
        ScriptedBackend { policy: Box::new(policy) }
    }
}

impl Transport for ScriptedBackend {
    fn send(&self, req: &ChatRequest, key: &ExchangeKey, log: &ExchangeLog) -> Result<String, GatewayError> {
        let out = (self.policy)(req, key);
        log.append(LogEntry {
            tag: key.tag.clone(),
            request_hash: key.hash.clone(),
            occurrence: key.occurrence,
            sample: key.sample,
            attempt: 1,
            ok: out.is_ok(),
            status: None,
            detail: match &out {
                Ok(t) => t.clone(),
                Err(e) => e.to_string(),
            },
        });
        out
    }
}

// ---------------------------------------------------------------- backend spec

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Http(HttpConfig),
    Replay { path: PathBuf },
    Scripted { policy: String },
}

impl BackendSpec {
    /// Parses `replay:<dir>`, `scripted:<name>`, or `http:<base-url>` / a bare
    /// `http(s)://` URL (model taken from `model`).
    pub fn parse(s: &str, model: &str) -> Result<Self, GatewayError> {
        if let Some(path) = s.strip_prefix("replay:") {
            return Ok(BackendSpec::Replay { path: PathBuf::from(path) });
        }
        if let Some(policy) = s.strip_prefix("scripted:") {
            return Ok(BackendSpec::Scripted { policy: policy.to_string() });
        }
        let url = s.strip_prefix("http:").filter(|u| !u.starts_with("//")).unwrap_or(s);
        if url.starts_with("http://") || url.starts_with("https://") {
            return Ok(BackendSpec::Http(HttpConfig {
                base_url: url.to_string(),
                model: model.to_string(),
                key_env: default_key_env(),
                timeout_secs: default_timeout(),
                retry: RetryPolicy::default(),
            }));
        }
        Err(GatewayError::InvalidRequest(format!(
            "unrecognized backend '{s}' (expected replay:<dir>, scripted:<name>, or an http(s) URL)"
        )))
    }

    pub fn connect(&self) -> Result<Arc<dyn Transport>, GatewayError> {
        Ok(match self {
            BackendSpec::Http(cfg) => Arc::new(HttpBackend::new(cfg.clone())?),
            BackendSpec::Replay { path } => Arc::new(ReplayBackend::open(path)?),
            BackendSpec::Scripted { policy } => crate::scripted::named_policy(policy)
                .ok_or_else(|| GatewayError::InvalidRequest(format!("unknown scripted policy '{policy}'")))?,
        })
    }
}

// ---------------------------------------------------------------- gateway

struct Recorder {
    dir: Option<PathBuf>,
    store: ReplayStore,
}

/// Per-session front end over a transport.
pub struct Gateway {
    transport: Arc<dyn Transport>,
    counters: Mutex<HashMap<(String, String), u32>>,
    log: ExchangeLog,
    recorder: Option<Mutex<Recorder>>,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Gateway { transport, counters: Mutex::default(), log: ExchangeLog::default(), recorder: None }
    }

    pub fn with_log(mut self, log: ExchangeLog) -> Self {
        self.log = log;
        self
    }

    /// Records every successful exchange, persisting to `dir` when given.
    pub fn recording(mut self, dir: Option<PathBuf>) -> Self {
        self.recorder = Some(Mutex::new(Recorder { dir, store: ReplayStore::default() }));
        self
    }

    pub fn log(&self) -> &ExchangeLog {
        &self.log
    }

    /// Everything recorded so far; sufficient to replay this session.
    pub fn recorded_store(&self) -> Option<ReplayStore> {
        self.recorder.as_ref().map(|r| r.lock().unwrap().store.clone())
    }

    fn reserve(&self, req: &ChatRequest, n: usize) -> (String, u32) {
        let hash = req.content_hash();
        let mut counters = self.counters.lock().unwrap();
        let c = counters.entry((req.tag.clone(), hash.clone())).or_insert(0);
        let first = *c;
        *c += n as u32;
        (hash, first)
    }

    fn send(&self, req: &ChatRequest, key: ExchangeKey) -> Result<String, GatewayError> {
        let out = self.transport.send(req, &key, &self.log)?;
        if let Some(rec) = &self.recorder {
            let ex = StoredExchange {
                tag: key.tag.clone(),
                hash: key.hash.clone(),
                occurrence: key.occurrence,
                request: req.canonical(),
                response: out.clone(),
            };
            let mut rec = rec.lock().unwrap();
            if let Some(dir) = &rec.dir {
                ReplayStore::write_entry(dir, &ex)?;
            }
            rec.store.insert(ex);
        }
        Ok(out)
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let (hash, occurrence) = self.reserve(req, 1);
        self.send(req, ExchangeKey { tag: req.tag.clone(), hash, occurrence, sample: 0 })
    }

    /// `n` independent completions, concurrently, returned in slot order.
    pub fn complete_n(&self, req: &ChatRequest, n: usize) -> Vec<Result<String, GatewayError>> {
        if let Err(e) = req.validate() {
            return vec![Err(e); n];
        }
        if n == 0 {
            return Vec::new();
        }
        let (hash, first) = self.reserve(req, n);
        let keys: Vec<ExchangeKey> = (0..n)
            .map(|i| ExchangeKey { tag: req.tag.clone(), hash: hash.clone(), occurrence: first + i as u32, sample: i })
            .collect();
        if n == 1 {
            return vec![self.send(req, keys.into_iter().next().unwrap())];
        }
        thread::scope(|s| {
            let handles: Vec<_> = keys.into_iter().map(|k| s.spawn(move || self.send(req, k))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(GatewayError::backend("completion thread panicked"))))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read};
    use std::net::TcpListener;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("t", vec![ChatMessage::system("sys"), ChatMessage::user(text)])
    }

    fn echo() -> Arc<dyn Transport> {
        Arc::new(ScriptedBackend::new(|r, k| Ok(format!("{}#{}", r.prompt(), k.occurrence))))
    }

    #[test]
    fn request_validation() {
        assert!(ChatRequest::new("t", vec![]).validate().is_err());
        let bad = ChatRequest::new("t", vec![ChatMessage::user("a"), ChatMessage::system("b")]);
        assert!(bad.validate().is_err());
        assert!(req("a").temperature(-1.0).validate().is_err());
        assert!(req("a").validate().is_ok());
    }

    #[test]
    fn hash_ignores_non_content_fields() {
        let a = req("hello");
        let mut b = a.clone().temperature(0.7);
        b.max_tokens = 10;
        b.tag = "other".into();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), req("hello ").content_hash());
        let img = req("hello");
        let mut img2 = img.clone();
        img2.messages[1].images.push(vec![1, 2, 3]);
        assert_ne!(img.content_hash(), img2.content_hash());
    }

    #[test]
    fn occurrences_disambiguate_repeated_prompts() {
        let gw = Gateway::new(echo());
        assert_eq!(gw.complete(&req("p")).unwrap(), "p#0");
        assert_eq!(gw.complete(&req("p")).unwrap(), "p#1");
        assert_eq!(gw.complete(&req("q")).unwrap(), "q#0");
    }

    #[test]
    fn complete_n_keeps_slot_order() {
        let gw = Gateway::new(echo());
        let out: Vec<String> = gw.complete_n(&req("p"), 3).into_iter().map(Result::unwrap).collect();
        assert_eq!(out, vec!["p#0", "p#1", "p#2"]);
        let one = Gateway::new(echo());
        assert_eq!(one.complete_n(&req("p"), 1)[0], one_shot());
        fn one_shot() -> Result<String, GatewayError> {
            Gateway::new(Arc::new(ScriptedBackend::new(|r, k| Ok(format!("{}#{}", r.prompt(), k.occurrence)))))
                .complete(&ChatRequest::new("t", vec![ChatMessage::system("sys"), ChatMessage::user("p")]))
        }
    }

    #[test]
    fn complete_n_reports_per_slot_errors() {
        let flaky = Arc::new(ScriptedBackend::new(|_, k| {
            if k.sample == 1 {
                Err(GatewayError::backend("boom"))
            } else {
                Ok(format!("ok{}", k.sample))
            }
        }));
        let out = Gateway::new(flaky).complete_n(&req("p"), 3);
        assert_eq!(out[0].as_deref(), Ok("ok0"));
        assert!(out[1].is_err());
        assert_eq!(out[2].as_deref(), Ok("ok2"));
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let live = Gateway::new(echo()).recording(Some(dir.path().to_path_buf()));
        let a = live.complete(&req("p")).unwrap();
        let b: Vec<_> = live.complete_n(&req("p"), 3).into_iter().map(Result::unwrap).collect();

        let store = ReplayStore::load(dir.path()).unwrap();
        assert_eq!(store.len(), 4);
        assert_eq!(Some(store.clone()), live.recorded_store());

        let replay = Gateway::new(Arc::new(ReplayBackend::new(Arc::new(store))));
        assert_eq!(replay.complete(&req("p")).unwrap(), a);
        let b2: Vec<_> = replay.complete_n(&req("p"), 3).into_iter().map(Result::unwrap).collect();
        assert_eq!(b, b2);
        match replay.complete(&req("never")) {
            Err(GatewayError::ReplayMiss { tag, .. }) => assert_eq!(tag, "t"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_recording_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(echo()).recording(Some(dir.path().join("store")));
        let store = gw.recorded_store().unwrap();
        assert!(store.is_empty());
        store.save(&dir.path().join("store")).unwrap();
        assert!(ReplayStore::load(&dir.path().join("store")).unwrap().is_empty());
    }

    #[test]
    fn backend_spec_parsing() {
        assert_eq!(
            BackendSpec::parse("replay:fixtures/chair", "m").unwrap(),
            BackendSpec::Replay { path: "fixtures/chair".into() }
        );
        assert_eq!(
            BackendSpec::parse("scripted:builder", "m").unwrap(),
            BackendSpec::Scripted { policy: "builder".into() }
        );
        match BackendSpec::parse("http:https://api.example.com/v1", "gpt").unwrap() {
            BackendSpec::Http(c) => {
                assert_eq!(c.base_url, "https://api.example.com/v1");
                assert_eq!(c.model, "gpt");
                assert_eq!(c.key_env, DEFAULT_KEY_ENV);
            }
            other => panic!("{other:?}"),
        }
        assert!(BackendSpec::parse("carrier-pigeon", "m").is_err());
        assert!(BackendSpec::Scripted { policy: "nope".into() }.connect().is_err());
    }

    /// Serves the given (status, body) pairs to consecutive connections.
    fn mock_server(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (format!("http://{addr}"), handle)
    }

    fn http(base_url: String) -> HttpBackend {
        HttpBackend::new(HttpConfig {
            base_url,
            model: "test-model".into(),
            key_env: "L3GO_TEST_UNSET_KEY".into(),
            timeout_secs: 5,
            retry: RetryPolicy { max_attempts: 3, base_delay_ms: 10, factor: 2.0 },
        })
        .unwrap()
    }

    const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"seat"}}]}"#;

    #[test]
    fn http_retries_429_then_succeeds() {
        let (url, server) = mock_server(vec![(429, "{}".into()), (200, OK_BODY.into())]);
        let gw = Gateway::new(Arc::new(http(url)));
        assert_eq!(gw.complete(&req("name the part").temperature(0.7)).unwrap(), "seat");
        let log = gw.log().entries();
        assert_eq!(log.len(), 2);
        assert_eq!((log[0].ok, log[0].status, log[0].attempt), (false, Some(429), 1));
        assert_eq!((log[1].ok, log[1].attempt), (true, 2));
        let bodies = server.join().unwrap();
        let sent: Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["messages"][1]["content"], "name the part");
        assert_eq!(sent["temperature"], 0.7);
    }

    #[test]
    fn http_gives_up_after_three_attempts() {
        let (url, server) = mock_server(vec![(503, "a".into()), (500, "b".into()), (502, "c".into())]);
        let gw = Gateway::new(Arc::new(http(url)));
        match gw.complete(&req("x")) {
            Err(GatewayError::Backend { status: Some(502), .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(gw.log().entries().len(), 3);
        server.join().unwrap();
    }

    #[test]
    fn http_client_errors_are_not_retried() {
        let (url, server) = mock_server(vec![(400, "bad".into())]);
        let gw = Gateway::new(Arc::new(http(url)));
        assert!(matches!(gw.complete(&req("x")), Err(GatewayError::Backend { status: Some(400), .. })));
        assert_eq!(gw.log().entries().len(), 1);
        server.join().unwrap();
    }

    #[test]
    fn image_attachments_become_data_urls() {
        let b = http("http://localhost:1".into());
        let r = ChatRequest::new("judge", vec![ChatMessage::user("what?").with_images(vec![vec![137, 80]])]);
        let body = b.request_body(&r);
        assert_eq!(body["messages"][0]["content"][0]["text"], "what?");
        let url = body["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
    }

    #[test]
    fn retry_delays_double() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(2), Duration::from_secs(2));
    }
}
