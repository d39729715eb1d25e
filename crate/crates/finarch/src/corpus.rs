//! Dataset loading and the canonical dialogue-oriented data model.
//!
//! Both benchmarks are canonicalized to the same shape: a
//! [`DialogueExample`] holds one source document plus an ordered list of
//! turns. FinQA items become 1-turn dialogs so downstream code handles
//! exactly one shape.
//!
//! Upstream field mapping (the one place it is defined):
//!
//! | canonical            | FinQA source        | ConvFinQA source             |
//! |----------------------|---------------------|------------------------------|
//! | `dialog_id`          | `id`                | `id`                         |
//! | `document.pre_text`  | `pre_text`          | `pre_text`                   |
//! | `document.post_text` | `post_text`         | `post_text`                  |
//! | `document.table`     | `table` (row 0 = header, column 0 = entity label; the header's corner cell is dropped) | same |
//! | `turn.question`      | `qa.question`       | `annotation.dialogue_break[i]` |
//! | `turn.gold_answer`   | `qa.answer`         | `annotation.exe_ans_list[i]` |
//! | `turn.gold_program`  | `qa.program`        | `annotation.turn_program[i]` |
//!
//! Unconsumed source keys are ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    FinQA,
    ConvFinQA,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Benchmark::FinQA => write!(f, "finqa"),
            Benchmark::ConvFinQA => write!(f, "convfinqa"),
        }
    }
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "finqa" => Ok(Benchmark::FinQA),
            "convfinqa" => Ok(Benchmark::ConvFinQA),
            other => Err(Error::InvalidArgument(format!(
                "unknown benchmark `{other}` (expected finqa or convfinqa)"
            ))),
        }
    }
}

/// One table row: an entity label plus the cell values under each header
/// column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub entity: String,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A source financial report: pre-text sentences, one table, post-text lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub pre_text: Vec<String>,
    pub table: Table,
    pub post_text: Vec<String>,
}

/// One question/answer pair. `gold_program` is carried verbatim but never
/// executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub question: String,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueExample {
    pub dialog_id: String,
    pub benchmark: Benchmark,
    pub document: Document,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

/// Issue list produced by [`validate_example`]; empty iff all invariants
/// hold.
pub type ValidationReport = Vec<Issue>;

/// Example count and total turn count of a loaded corpus.
pub fn corpus_stats(corpus: &[DialogueExample]) -> (usize, usize) {
    let turns = corpus.iter().map(|ex| ex.turns.len()).sum();
    (corpus.len(), turns)
}

pub fn load_finqa(path: &Path) -> Result<Vec<DialogueExample>> {
    let items = read_json_array(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let id = get_str(path, i, item, "id")?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateDialog(id));
        }
        let document = parse_document(path, i, item, id.clone())?;
        let qa = item
            .get("qa")
            .and_then(Value::as_object)
            .ok_or_else(|| field_err(path, i, "qa"))?;
        let question = qa
            .get("question")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| field_err(path, i, "qa.question"))?;
        let gold_answer = qa
            .get("answer")
            .map(render_answer)
            .transpose()?
            .filter(|s| !s.is_empty())
            .ok_or_else(|| field_err(path, i, "qa.answer"))?;
        let gold_program = qa
            .get("program")
            .and_then(Value::as_str)
            .map(str::to_owned);
        out.push(DialogueExample {
            dialog_id: id,
            benchmark: Benchmark::FinQA,
            document,
            turns: vec![Turn {
                index: 0,
                question: question.to_owned(),
                gold_answer,
                gold_program,
            }],
        });
    }
    Ok(out)
}

pub fn load_convfinqa(path: &Path) -> Result<Vec<DialogueExample>> {
    let items = read_json_array(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let id = get_str(path, i, item, "id")?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateDialog(id));
        }
        let document = parse_document(path, i, item, id.clone())?;
        let ann = item
            .get("annotation")
            .and_then(Value::as_object)
            .ok_or_else(|| field_err(path, i, "annotation"))?;
        let questions = ann
            .get("dialogue_break")
            .and_then(Value::as_array)
            .ok_or_else(|| field_err(path, i, "annotation.dialogue_break"))?;
        if questions.is_empty() {
            return Err(Error::Dataset {
                path: path.to_owned(),
                msg: format!("item {i} ({id}): dialog has zero turns"),
            });
        }
        let answers = ann
            .get("exe_ans_list")
            .and_then(Value::as_array)
            .ok_or_else(|| field_err(path, i, "annotation.exe_ans_list"))?;
        if answers.len() != questions.len() {
            return Err(Error::Dataset {
                path: path.to_owned(),
                msg: format!(
                    "item {i} ({id}): {} questions but {} gold answers",
                    questions.len(),
                    answers.len()
                ),
            });
        }
        let programs = ann.get("turn_program").and_then(Value::as_array);
        let mut turns = Vec::with_capacity(questions.len());
        for (t, q) in questions.iter().enumerate() {
            let question = q
                .as_str()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| field_err(path, i, &format!("annotation.dialogue_break[{t}]")))?;
            let gold_answer = render_answer(&answers[t])?;
            if gold_answer.is_empty() {
                return Err(field_err(path, i, &format!("annotation.exe_ans_list[{t}]")));
            }
            let gold_program = programs
                .and_then(|p| p.get(t))
                .and_then(Value::as_str)
                .map(str::to_owned);
            turns.push(Turn {
                index: t,
                question: question.to_owned(),
                gold_answer,
                gold_program,
            });
        }
        out.push(DialogueExample {
            dialog_id: id,
            benchmark: Benchmark::ConvFinQA,
            document,
            turns,
        });
    }
    Ok(out)
}

/// Check every type invariant; ragged table rows are warnings, the rest are
/// errors.
pub fn validate_example(ex: &DialogueExample) -> ValidationReport {
    let mut report = Vec::new();
    let width = ex.document.table.header.len();
    for (r, row) in ex.document.table.rows.iter().enumerate() {
        if row.cells.len() != width {
            report.push(Issue {
                severity: Severity::Warning,
                message: format!(
                    "{}: table row {r} is ragged: header has {width} columns, row has {} cells",
                    ex.dialog_id,
                    row.cells.len()
                ),
            });
        }
    }
    if ex.benchmark == Benchmark::FinQA && ex.turns.len() != 1 {
        report.push(Issue {
            severity: Severity::Error,
            message: format!(
                "{}: finqa examples must have exactly 1 turn, found {}",
                ex.dialog_id,
                ex.turns.len()
            ),
        });
    }
    if ex.turns.is_empty() {
        report.push(Issue {
            severity: Severity::Error,
            message: format!("{}: dialog has zero turns", ex.dialog_id),
        });
    }
    for (t, turn) in ex.turns.iter().enumerate() {
        if turn.index != t {
            report.push(Issue {
                severity: Severity::Error,
                message: format!(
                    "{}: turn indices not contiguous: position {t} holds index {}",
                    ex.dialog_id, turn.index
                ),
            });
        }
        if turn.gold_answer.is_empty() {
            report.push(Issue {
                severity: Severity::Error,
                message: format!("{}: turn {t} has an empty gold answer", ex.dialog_id),
            });
        }
    }
    report
}

/// Canonical corpus dump: one JSON [`DialogueExample`] per line.
pub fn write_corpus_jsonl(path: &Path, corpus: &[DialogueExample]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for ex in corpus {
        serde_json::to_writer(&mut file, ex)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_corpus_jsonl(path: &Path) -> Result<Vec<DialogueExample>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn read_json_array(path: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text)?;
    match value {
        Value::Array(items) => Ok(items),
        _ => Err(Error::Dataset {
            path: path.to_owned(),
            msg: "expected a top-level JSON array".into(),
        }),
    }
}

fn field_err(path: &Path, item: usize, field: &str) -> Error {
    Error::DatasetField {
        path: path.to_owned(),
        item,
        field: field.to_owned(),
    }
}

fn get_str(path: &Path, item: usize, v: &Value, field: &str) -> Result<String> {
    v.get(field)
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .ok_or_else(|| field_err(path, item, field))
}

/// Gold answers appear as strings, numbers, or yes/no booleans upstream;
/// all are carried as verbatim strings.
fn render_answer(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.trim().to_owned()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(if *b { "yes" } else { "no" }.to_owned()),
        other => Err(Error::InvalidArgument(format!(
            "unsupported gold answer value: {other}"
        ))),
    }
}

fn string_list(path: &Path, item: usize, v: &Value, field: &str) -> Result<Vec<String>> {
    let arr = v
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| field_err(path, item, field))?;
    arr.iter()
        .map(|s| match s {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(field_err(path, item, field)),
        })
        .collect()
}

fn parse_document(path: &Path, item: usize, v: &Value, id: String) -> Result<Document> {
    let pre_text = string_list(path, item, v, "pre_text")?;
    let post_text = string_list(path, item, v, "post_text")?;
    let raw_table = v
        .get("table")
        .and_then(Value::as_array)
        .ok_or_else(|| field_err(path, item, "table"))?;
    let mut raw_rows = Vec::with_capacity(raw_table.len());
    for row in raw_table {
        let cells = row
            .as_array()
            .ok_or_else(|| field_err(path, item, "table"))?;
        let cells: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(field_err(path, item, "table")),
            })
            .collect::<Result<_>>()?;
        if cells.is_empty() {
            return Err(field_err(path, item, "table"));
        }
        raw_rows.push(cells);
    }
    let table = match raw_rows.split_first() {
        None => Table::default(),
        Some((header_row, body)) => Table {
            header: header_row[1..].to_vec(),
            rows: body
                .iter()
                .map(|r| TableRow {
                    entity: r[0].clone(),
                    cells: r[1..].to_vec(),
                })
                .collect(),
        },
    };
    Ok(Document {
        id,
        pre_text,
        table,
        post_text,
    })
}
