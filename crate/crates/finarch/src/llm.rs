//! Chat-completion client for a local model server, with record/replay
//! transcripts so every test can run offline.
//!
//! Wire protocol: `POST {endpoint}/api/generate` with
//! `{"model", "prompt", "options": {"temperature"}, "stream": false}`;
//! the response carries `response` (text) and optionally
//! `prompt_eval_count` (server-side token count) and `done_reason`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::hex;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;

/// Judge prompt. The wording is frozen; it is part of the transcript key
/// via the rendered prompt and part of the run template hash.
pub const JUDGE_TEMPLATE: &str = "You are a strict evaluator of numeric question answering.\n\
Question: {question}\n\
Gold answer: {gold}\n\
Predicted answer: {predicted}\n\
Decide whether the predicted answer matches the gold answer. Treat numeric format \
variations as matches: percent versus fraction (12% equals 0.12), comma formatting \
(1,234 equals 1234), and currency symbols ($5 equals 5). Small rounding differences at \
the gold answer's precision also count as matches.\n\
Reply with a single word: CORRECT or INCORRECT.";

pub fn render_judge_prompt(question: &str, gold: &str, predicted: &str) -> String {
    JUDGE_TEMPLATE
        .replace("{question}", question)
        .replace("{gold}", gold)
        .replace("{predicted}", predicted)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub model_id: String,
    pub endpoint: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

impl GenParams {
    pub fn new(model_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        GenParams {
            model_id: model_id.into(),
            endpoint: endpoint.into(),
            temperature: 0.0,
            max_output_tokens: Some(DEFAULT_MAX_OUTPUT_TOKENS),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    /// Server-reported prompt token count, when present.
    pub prompt_tokens: Option<u64>,
    pub replayed: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "CORRECT")]
    Correct,
    #[serde(rename = "INCORRECT")]
    Incorrect,
    #[serde(rename = "UNPARSEABLE")]
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub verdict: Verdict,
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Live calls only; nothing recorded.
    Off,
    /// Replay on hit, live call + record on miss.
    Record,
    /// Replay only; a miss is an error.
    Strict,
}

impl std::str::FromStr for ReplayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(ReplayMode::Off),
            "record" => Ok(ReplayMode::Record),
            "strict" => Ok(ReplayMode::Strict),
            other => Err(Error::InvalidArgument(format!(
                "unknown replay mode `{other}` (expected off, record, or strict)"
            ))),
        }
    }
}

/// Transcript key: sha256 over model id, temperature, and the full prompt,
/// NUL-separated. Temperature uses Rust's shortest float formatting.
pub fn transcript_key(model_id: &str, temperature: f64, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(format!("{temperature:?}").as_bytes());
    hasher.update([0u8]);
    hasher.update(prompt.as_bytes());
    hex(&hasher.finalize())
}

pub fn prompt_sha(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hex(&hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TranscriptEntry {
    pub key: String,
    pub model_id: String,
    pub temperature: f64,
    pub prompt_sha: String,
    pub response_text: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
}

/// JSONL-backed prompt/response cache. Readers share the in-memory map;
/// writes are serialized and appended to the backing file.
pub struct Transcript {
    path: Option<PathBuf>,
    inner: Mutex<HashMap<String, TranscriptEntry>>,
}

impl Transcript {
    pub fn in_memory() -> Self {
        Transcript {
            path: None,
            inner: Mutex::new(HashMap::new()),
        }
    }

    /// Open (or create) a JSONL transcript. Two different responses under
    /// one key are rejected at load time.
    pub fn open(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        if path.exists() {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: TranscriptEntry = serde_json::from_str(&line)?;
                if let Some(prev) = map.get(&entry.key) {
                    let prev: &TranscriptEntry = prev;
                    if prev.response_text != entry.response_text {
                        return Err(Error::TranscriptCollision {
                            key: entry.key.clone(),
                        });
                    }
                }
                map.insert(entry.key.clone(), entry);
            }
        } else if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(Transcript {
            path: Some(path.to_owned()),
            inner: Mutex::new(map),
        })
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<TranscriptEntry> {
        self.inner.lock().expect("transcript lock").get(key).cloned()
    }

    pub fn insert(&self, entry: TranscriptEntry) -> Result<()> {
        let mut map = self.inner.lock().expect("transcript lock");
        if let Some(prev) = map.get(&entry.key) {
            if prev.response_text != entry.response_text {
                return Err(Error::TranscriptCollision {
                    key: entry.key.clone(),
                });
            }
            return Ok(());
        }
        if let Some(path) = &self.path {
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            serde_json::to_writer(&mut file, &entry)?;
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        map.insert(entry.key.clone(), entry);
        Ok(())
    }
}

pub struct LlmClient {
    params: GenParams,
    judge_params: GenParams,
    mode: ReplayMode,
    transcript: Option<Transcript>,
    http: reqwest::blocking::Client,
}

impl LlmClient {
    pub fn new(params: GenParams, mode: ReplayMode, transcript: Option<Transcript>) -> Result<Self> {
        if matches!(mode, ReplayMode::Record | ReplayMode::Strict) && transcript.is_none() {
            return Err(Error::InvalidArgument(
                "record/strict replay modes require a transcript".into(),
            ));
        }
        Ok(LlmClient {
            judge_params: params.clone(),
            params,
            mode,
            transcript,
            http: reqwest::blocking::Client::builder()
                .connect_timeout(std::time::Duration::from_secs(10))
                .timeout(std::time::Duration::from_secs(600))
                .build()
                .expect("http client"),
        })
    }

    /// The judge model defaults to the inference model.
    pub fn with_judge_model(mut self, model_id: impl Into<String>) -> Self {
        self.judge_params.model_id = model_id.into();
        self
    }

    pub fn params(&self) -> &GenParams {
        &self.params
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn complete(&self, prompt: &str) -> Result<Completion> {
        self.complete_with(&self.params, prompt)
    }

    /// Ask the judge model whether the prediction matches gold; the
    /// verdict is parsed with [`crate::scoring::judge_parse`].
    pub fn judge(&self, question: &str, gold: &str, predicted: &str) -> Result<JudgeVerdict> {
        let prompt = render_judge_prompt(question, gold, predicted);
        let completion = self.complete_with(&self.judge_params, &prompt)?;
        Ok(crate::scoring::judge_parse(&completion.text))
    }

    fn complete_with(&self, params: &GenParams, prompt: &str) -> Result<Completion> {
        let key = transcript_key(&params.model_id, params.temperature, prompt);
        if matches!(self.mode, ReplayMode::Record | ReplayMode::Strict) {
            let transcript = self.transcript.as_ref().expect("checked in new");
            if let Some(entry) = transcript.get(&key) {
                return Ok(Completion {
                    text: entry.response_text,
                    latency_ms: entry.latency_ms,
                    prompt_tokens: entry.prompt_tokens,
                    replayed: true,
                    truncated: false,
                });
            }
            if self.mode == ReplayMode::Strict {
                return Err(Error::TranscriptMiss { key });
            }
        }
        let completion = self.call_generate(params, prompt)?;
        if self.mode == ReplayMode::Record {
            self.transcript.as_ref().expect("checked in new").insert(TranscriptEntry {
                key,
                model_id: params.model_id.clone(),
                temperature: params.temperature,
                prompt_sha: prompt_sha(prompt),
                response_text: completion.text.clone(),
                latency_ms: completion.latency_ms,
                prompt_tokens: completion.prompt_tokens,
            })?;
        }
        Ok(completion)
    }

    fn call_generate(&self, params: &GenParams, prompt: &str) -> Result<Completion> {
        #[derive(Serialize)]
        struct Options {
            temperature: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            num_predict: Option<u32>,
        }
        #[derive(Serialize)]
        struct Req<'a> {
            model: &'a str,
            prompt: &'a str,
            options: Options,
            stream: bool,
        }
        #[derive(Deserialize)]
        struct Resp {
            response: String,
            #[serde(default)]
            prompt_eval_count: Option<u64>,
            #[serde(default)]
            done_reason: Option<String>,
        }
        let url = format!("{}/api/generate", params.endpoint.trim_end_matches('/'));
        let started = Instant::now();
        let resp = self
            .http
            .post(&url)
            .json(&Req {
                model: &params.model_id,
                prompt,
                options: Options {
                    temperature: params.temperature,
                    num_predict: params.max_output_tokens,
                },
                stream: false,
            })
            .send()
            .map_err(|e| Error::EndpointUnreachable {
                endpoint: params.endpoint.clone(),
                msg: e.to_string(),
            })?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Error::EndpointUnreachable {
                endpoint: params.endpoint.clone(),
                msg: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(Error::MalformedResponse {
                endpoint: params.endpoint.clone(),
                msg: format!("status {status}"),
            });
        }
        let body: Resp = resp.json().map_err(|e| Error::MalformedResponse {
            endpoint: params.endpoint.clone(),
            msg: e.to_string(),
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        Ok(Completion {
            truncated: body.done_reason.as_deref() == Some("length"),
            text: body.response,
            latency_ms,
            prompt_tokens: body.prompt_eval_count,
            replayed: false,
        })
    }
}
