//! Judge client: prompt templates, HTTP transport with retry, and a
//! line-delimited JSON cassette for record and replay.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use crate::error::{Error, Result};

pub const ENDPOINT_VAR: &str = "AUTOCUT_JUDGE_ENDPOINT";
pub const TOKEN_VAR: &str = "AUTOCUT_JUDGE_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Vsc,
    Sq,
    Relevance,
    Mss,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [TemplateId::Vsc, TemplateId::Sq, TemplateId::Relevance, TemplateId::Mss];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Vsc => "vsc",
            TemplateId::Sq => "sq",
            TemplateId::Relevance => "relevance",
            TemplateId::Mss => "mss",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}_prompt.txt", self.as_str())
    }

    /// Inclusive score range.
    pub fn range(self) -> (f64, f64) {
        match self {
            TemplateId::Vsc => (0.0, 2.0),
            TemplateId::Sq => (0.0, 100.0),
            TemplateId::Relevance => (0.0, 5.0),
            TemplateId::Mss => (0.0, 1.0),
        }
    }
}

/// Prompt templates with `{{field}}` placeholders filled from the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    texts: HashMap<TemplateId, String>,
}

impl Templates {
    /// Copies compiled into the binary, used when no template directory is
    /// configured.
    pub fn bundled() -> Self {
        let texts = [
            (TemplateId::Vsc, include_str!("../../assets/prompts/vsc_prompt.txt")),
            (TemplateId::Sq, include_str!("../../assets/prompts/sq_prompt.txt")),
            (TemplateId::Relevance, include_str!("../../assets/prompts/relevance_prompt.txt")),
            (TemplateId::Mss, include_str!("../../assets/prompts/mss_prompt.txt")),
        ];
        Templates {
            texts: texts.into_iter().map(|(id, t)| (id, t.to_string())).collect(),
        }
    }

    /// Reads `<id>_prompt.txt` for every template from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut texts = HashMap::new();
        for id in TemplateId::ALL {
            let path = dir.join(id.file_name());
            if !path.exists() {
                return Err(Error::MissingFile(path));
            }
            texts.insert(id, std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
        }
        Ok(Templates { texts })
    }

    pub fn render(&self, id: TemplateId, payload: &Value) -> Result<String> {
        let template = &self.texts[&id];
        let fields = payload
            .as_object()
            .ok_or_else(|| Error::InvalidInput("judge payload must be a JSON object".into()))?;
        let mut out = String::with_capacity(template.len());
        let mut rest = template.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| Error::Format(format!("unclosed placeholder in {} template", id.as_str())))?;
            let name = after[..close].trim();
            let value = fields.get(name).ok_or_else(|| {
                Error::InvalidInput(format!("{} payload lacks field `{name}`", id.as_str()))
            })?;
            match value {
                Value::String(s) => out.push_str(s),
                Value::Array(items) if items.iter().all(Value::is_string) => {
                    let lines: Vec<&str> = items.iter().filter_map(Value::as_str).collect();
                    out.push_str(&lines.join("\n"));
                }
                other => out.push_str(&other.to_string()),
            }
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template_id: TemplateId,
    pub payload: Value,
}

impl JudgeRequest {
    pub fn new(template_id: TemplateId, payload: Value) -> Self {
        JudgeRequest { template_id, payload }
    }

    /// SHA-256 of the canonical `{template_id, payload}` JSON; object keys
    /// serialize sorted, so equal requests share a key.
    pub fn idempotency_key(&self) -> String {
        let canonical = json!({"template_id": self.template_id, "payload": self.payload}).to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum ParseStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub key: String,
    pub text: String,
    pub score: Option<f64>,
    pub status: ParseStatus,
}

/// Category scores of a script-quality verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqVerdict {
    pub language: f64,
    pub selling_points: f64,
    pub timing: f64,
    pub total: f64,
    #[serde(default)]
    pub justification: String,
}

fn parse_number(text: &str, id: TemplateId, integral: bool) -> std::result::Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("{} reply `{}` is not a number", id.as_str(), text.trim()))?;
    if !v.is_finite() {
        return Err(format!("{} reply is not finite", id.as_str()));
    }
    if integral && v.fract() != 0.0 {
        return Err(format!("{} reply {v} is not an integer", id.as_str()));
    }
    let (lo, hi) = id.range();
    if v < lo || v > hi {
        return Err(format!("{} score {v} outside [{lo}, {hi}]", id.as_str()));
    }
    Ok(v)
}

pub fn parse_sq(text: &str) -> std::result::Result<SqVerdict, String> {
    let (Some(open), Some(close)) = (text.find('{'), text.rfind('}')) else {
        return Err("sq reply holds no JSON object".into());
    };
    if close < open {
        return Err("sq reply holds no JSON object".into());
    }
    let v: SqVerdict =
        serde_json::from_str(&text[open..=close]).map_err(|e| format!("sq reply is not a verdict: {e}"))?;
    let parts = [("language", v.language, 30.0), ("selling_points", v.selling_points, 40.0), ("timing", v.timing, 30.0)];
    for (name, value, cap) in parts {
        if !(0.0..=cap).contains(&value) {
            return Err(format!("sq {name} score {value} outside [0, {cap}]"));
        }
    }
    let sum = v.language + v.selling_points + v.timing;
    if (sum - v.total).abs() > 1e-9 {
        return Err(format!("sq sub-scores sum to {sum} but total is {}", v.total));
    }
    if !(0.0..=100.0).contains(&v.total) {
        return Err(format!("sq total {} outside [0, 100]", v.total));
    }
    Ok(v)
}

/// Score from a raw judge reply, range-checked for the template.
pub fn parse_score(id: TemplateId, text: &str) -> std::result::Result<f64, String> {
    match id {
        TemplateId::Vsc | TemplateId::Relevance => parse_number(text, id, true),
        TemplateId::Mss => {
            let last = text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
            parse_number(last, id, false)
        }
        TemplateId::Sq => parse_sq(text).map(|v| v.total),
    }
}

/// One recorded exchange, stored one per cassette line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub template_id: TemplateId,
    pub payload: Value,
    pub text: String,
}

/// Recorded exchanges keyed by idempotency key. Appends go through one
/// lock so concurrent callers never interleave lines.
#[derive(Debug)]
pub struct Cassette {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, String>>,
}

impl Cassette {
    pub fn in_memory() -> Self {
        Cassette {
            path: None,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// Loads `path`, or starts empty when it does not exist yet.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CassetteEntry = serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
                entries.insert(entry.key, entry.text);
            }
        }
        Ok(Cassette {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cassette lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().expect("cassette lock").get(key).cloned()
    }

    pub fn record(&self, request: &JudgeRequest, text: &str) -> Result<()> {
        let key = request.idempotency_key();
        let mut entries = self.entries.lock().expect("cassette lock");
        if entries.contains_key(&key) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let entry = CassetteEntry {
                key: key.clone(),
                template_id: request.template_id,
                payload: request.payload.clone(),
                text: text.to_string(),
            };
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writeln!(file, "{}", serde_json::to_string(&entry)?).map_err(|e| Error::io(path, e))?;
        }
        entries.insert(key, text.to_string());
        Ok(())
    }
}

/// Body sent to a live judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub template_id: TemplateId,
    pub payload: Value,
    pub prompt: String,
    pub idempotency_key: String,
}

pub trait Transport: Send + Sync {
    /// Reply text for one request; errors are transport failures.
    fn send(&self, request: &WireRequest) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpTransport {
    pub endpoint: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub attempts: u32,
    pub backoff: Duration,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Self {
        HttpTransport {
            endpoint: endpoint.into(),
            token,
            timeout: Duration::from_secs(60),
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Endpoint and token from the environment; the endpoint is required.
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| Error::Config(format!("live judging needs {ENDPOINT_VAR}")))?;
        Ok(HttpTransport::new(endpoint, std::env::var(TOKEN_VAR).ok()))
    }

    fn attempt(&self, agent: &ureq::Agent, request: &WireRequest) -> std::result::Result<String, String> {
        let mut call = agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call.send_json(request).map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("judge answered HTTP {status}"));
        }
        let body: Value = response.body_mut().read_json().map_err(|e| e.to_string())?;
        body.get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "judge response lacks a `text` string".to_string())
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &WireRequest) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut last = String::new();
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&agent, request) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    warn!(attempt = attempt + 1, error = %e, "judge request failed");
                    last = e;
                }
            }
        }
        Err(Error::JudgeTransport(format!(
            "{} after {} attempts: {last}",
            self.endpoint,
            self.attempts.max(1)
        )))
    }
}

enum Mode {
    Replay,
    Live(Box<dyn Transport>),
}

/// Answers requests from the cassette, falling back to the live transport
/// (and recording its reply) when one is configured.
pub struct Judge {
    templates: Templates,
    cassette: Cassette,
    mode: Mode,
}

impl Judge {
    pub fn replay(templates: Templates, cassette: Cassette) -> Self {
        Judge {
            templates,
            cassette,
            mode: Mode::Replay,
        }
    }

    pub fn live(templates: Templates, cassette: Cassette, transport: Box<dyn Transport>) -> Self {
        Judge {
            templates,
            cassette,
            mode: Mode::Live(transport),
        }
    }

    pub fn is_replay(&self) -> bool {
        matches!(self.mode, Mode::Replay)
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// Transport failures and replay misses are errors; unparseable replies
    /// come back with a failed parse status.
    pub fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse> {
        let key = request.idempotency_key();
        let prompt = self.templates.render(request.template_id, &request.payload)?;
        let text = match (self.cassette.get(&key), &self.mode) {
            (Some(text), _) => text,
            (None, Mode::Replay) => return Err(Error::CassetteMiss(key)),
            (None, Mode::Live(transport)) => {
                let wire = WireRequest {
                    template_id: request.template_id,
                    payload: request.payload.clone(),
                    prompt,
                    idempotency_key: key.clone(),
                };
                let text = transport.send(&wire)?;
                self.cassette.record(request, &text)?;
                text
            }
        };
        let (score, status) = match parse_score(request.template_id, &text) {
            Ok(s) => (Some(s), ParseStatus::Ok),
            Err(reason) => {
                debug!(key = %key, reason = %reason, "judge reply rejected");
                (None, ParseStatus::Failed(reason))
            }
        };
        Ok(JudgeResponse { key, text, score, status })
    }
}

/// Builds a JSON object payload from string pairs.
pub fn payload<'a>(fields: impl IntoIterator<Item = (&'a str, Value)>) -> Value {
    Value::Object(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vsc(line: &str) -> JudgeRequest {
        JudgeRequest::new(
            TemplateId::Vsc,
            payload([("frame", json!("frame:100000004000000000007")), ("script_line", json!(line))]),
        )
    }

    #[test]
    fn score_ranges() {
        assert_eq!(parse_score(TemplateId::Vsc, " 2\n"), Ok(2.0));
        assert!(parse_score(TemplateId::Vsc, "5").is_err());
        assert!(parse_score(TemplateId::Vsc, "1.5").is_err());
        assert!(parse_score(TemplateId::Vsc, "two").is_err());
        assert_eq!(parse_score(TemplateId::Relevance, "4"), Ok(4.0));
        assert!(parse_score(TemplateId::Relevance, "6").is_err());
        assert_eq!(parse_score(TemplateId::Mss, "genre: pop\n0.35\n"), Ok(0.35));
        assert!(parse_score(TemplateId::Mss, "1.2").is_err());
    }

    #[test]
    fn sq_sub_scores_must_sum() {
        let ok = r#"{"language": 25, "selling_points": 35, "timing": 25, "total": 85, "justification": "fine"}"#;
        assert_eq!(parse_score(TemplateId::Sq, ok), Ok(85.0));
        let bad_sum = r#"{"language": 25, "selling_points": 35, "timing": 25, "total": 90}"#;
        assert!(parse_score(TemplateId::Sq, bad_sum).is_err());
        let over = r#"{"language": 31, "selling_points": 35, "timing": 20, "total": 86}"#;
        assert!(parse_score(TemplateId::Sq, over).is_err());
        assert!(parse_score(TemplateId::Sq, "85").is_err());
    }

    #[test]
    fn key_ignores_field_order() {
        let a = JudgeRequest::new(TemplateId::Mss, json!({"predicted": "x", "reference": "y"}));
        let b = JudgeRequest::new(TemplateId::Mss, json!({"reference": "y", "predicted": "x"}));
        assert_eq!(a.idempotency_key(), b.idempotency_key());
        assert_ne!(a.idempotency_key(), vsc("x").idempotency_key());
    }

    #[test]
    fn replay_echoes_the_cassette() {
        let cassette = Cassette::in_memory();
        cassette.record(&vsc("a bright red lipstick"), "2").unwrap();
        let judge = Judge::replay(Templates::bundled(), cassette);
        let r = judge.judge(&vsc("a bright red lipstick")).unwrap();
        assert_eq!((r.score, r.status), (Some(2.0), ParseStatus::Ok));
        assert!(matches!(judge.judge(&vsc("other")), Err(Error::CassetteMiss(_))));
    }

    #[test]
    fn templates_fill_every_placeholder() {
        let t = Templates::bundled();
        let text = t.render(TemplateId::Vsc, &vsc("hello").payload).unwrap();
        assert!(text.contains("Script line: hello") && !text.contains("{{"));
        assert!(t.render(TemplateId::Vsc, &json!({"frame": "f"})).is_err());
    }
}
