//! JSONL run logs: a header line with run metadata followed by one record
//! per turn. Scored logs reuse the same header plus a scoring block and
//! carry verdict columns on every record.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Benchmark;
use crate::error::{Error, Result};
use crate::llm::Verdict;
use crate::pipelines::ArchitectureId;
use crate::scoring::ScoringConfig;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringMeta {
    pub config: ScoringConfig,
    pub judged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: u32,
    pub benchmark: Benchmark,
    pub architecture: ArchitectureId,
    pub model_id: String,
    pub embed_model_id: String,
    pub k: usize,
    pub seed: u64,
    pub temperature: f64,
    pub template_hash: String,
    /// Hash of the architecture-independent run environment; `report`
    /// refuses to bundle artifacts whose hashes differ.
    pub config_hash: String,
    pub created_unix_ms: u64,
    /// Fully resolved configuration echoed for reproducibility.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scoring: Option<ScoringMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub dialog_id: String,
    pub turn_index: usize,
    pub benchmark: Benchmark,
    pub architecture: ArchitectureId,
    pub question: String,
    pub gold_answer: String,
    /// Length in characters of the exact prompt string sent.
    pub prompt_chars: usize,
    /// Server-reported when available, else ceil(chars/4).
    pub prompt_tokens: u64,
    pub tokens_estimated: bool,
    pub raw_text: String,
    pub latency_ms: u64,
    pub retrieved_fact_count: usize,
    pub replayed: bool,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    #[serde(flatten)]
    pub turn: TurnRecord,
    pub parse_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_value: Option<f64>,
    pub exact: bool,
    pub corrected_exact: bool,
    pub corrected_close: bool,
    pub applied_scale: f64,
    pub numeric_gold: bool,
    pub format_violation: bool,
    pub multi_number: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_raw: Option<String>,
}

/// Incremental writer: header first, then records appended one per line.
pub struct RunLogWriter {
    path: PathBuf,
    file: fs::File,
}

impl RunLogWriter {
    /// Create a fresh log with its header line.
    pub fn create(path: &Path, header: &RunHeader) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(&mut file, header)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        Ok(RunLogWriter {
            path: path.to_owned(),
            file,
        })
    }

    /// Reopen an existing log for appending records after its header.
    pub fn append(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RunLogWriter {
            path: path.to_owned(),
            file,
        })
    }

    pub fn write_record(&mut self, record: &TurnRecord) -> Result<()> {
        serde_json::to_writer(&mut self.file, record)?;
        self.file
            .write_all(b"\n")
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }
}

fn read_header_line(path: &Path, line: Option<std::io::Result<String>>) -> Result<RunHeader> {
    let line = line
        .ok_or_else(|| Error::LogFormat {
            path: path.to_owned(),
            msg: "empty log (missing header line)".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let header: RunHeader = serde_json::from_str(&line)?;
    if header.version != LOG_VERSION {
        return Err(Error::LogFormat {
            path: path.to_owned(),
            msg: format!(
                "schema version {} does not match supported version {LOG_VERSION}",
                header.version
            ),
        });
    }
    Ok(header)
}

pub fn read_run_log(path: &Path) -> Result<(RunHeader, Vec<TurnRecord>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = read_header_line(path, lines.next())?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}

pub fn write_scored_log(path: &Path, header: &RunHeader, records: &[ScoredRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer(&mut file, header)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for record in records {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_scored_log(path: &Path) -> Result<(RunHeader, Vec<ScoredRecord>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = read_header_line(path, lines.next())?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}

/// Completed records grouped by dialog, sorted by turn index: the resume
/// index for `run`.
pub fn group_by_dialog(records: Vec<TurnRecord>) -> HashMap<String, Vec<TurnRecord>> {
    let mut map: HashMap<String, Vec<TurnRecord>> = HashMap::new();
    for record in records {
        map.entry(record.dialog_id.clone()).or_default().push(record);
    }
    for recs in map.values_mut() {
        recs.sort_by_key(|r| r.turn_index);
    }
    map
}
