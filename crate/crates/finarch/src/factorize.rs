//! Document decomposition into granular prefixed facts.
//!
//! Pre-text is split into sentences (`PRE:`), table rows are serialized as
//! attribute-value pairs (`TABLE:`), and post-text is kept per line
//! (`POST:`). Cell-granular facts use the `entity | column = value` schema.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TableRow};
use crate::error::{Error, Result};

pub const PRE_PREFIX: &str = "PRE: ";
pub const TABLE_PREFIX: &str = "TABLE: ";
pub const POST_PREFIX: &str = "POST: ";

/// Attribute-value delimiter counted by composite detection.
pub const ATTR_DELIM: &str = " = ";

/// Composite classification fires at this many attribute-value delimiters.
pub const DEFAULT_COMPOSITE_THRESHOLD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    Pre,
    TableRow,
    TableCell,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Pre,
    Table,
    Post,
}

/// (section, index) locator back into the source document. For table facts
/// the index is the row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub section: SectionKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub kind: FactKind,
    pub text: String,
    pub source: SourceRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub atomic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Row,
    Cell,
    Both,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "row" => Ok(Granularity::Row),
            "cell" => Ok(Granularity::Cell),
            "both" => Ok(Granularity::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown granularity `{other}` (expected row, cell, or both)"
            ))),
        }
    }
}

/// Tokens that end in '.' without ending a sentence. Compared lowercase,
/// with any trailing dot already consumed by the scanner.
const ABBREVIATIONS: &[&str] = &[
    "approx", "no", "inc", "corp", "ltd", "co", "etc", "e.g", "i.e", "vs", "dept", "fig", "figs",
    "mr", "mrs", "ms", "dr", "jr", "sr", "st", "u.s", "u.k", "est", "al", "sec", "nos",
];

/// Split text on terminal punctuation (. ! ?) followed by whitespace and an
/// uppercase letter or digit. Dots after known abbreviations or single
/// letters (initials) do not split. All non-whitespace characters of the
/// input are preserved across the output sentences.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c != '.' && c != '!' && c != '?' {
            continue;
        }
        // require whitespace, then an uppercase/digit to begin the next sentence
        let mut j = i + 1;
        let mut saw_space = false;
        while j < chars.len() && chars[j].is_whitespace() {
            saw_space = true;
            j += 1;
        }
        if !saw_space || j >= chars.len() {
            continue;
        }
        let next = chars[j];
        if !(next.is_uppercase() || next.is_ascii_digit()) {
            continue;
        }
        if c == '.' && is_abbreviation(&chars[start..i]) {
            continue;
        }
        let sentence: String = chars[start..=i].iter().collect();
        let sentence = sentence.trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_owned());
        }
        start = j;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_owned());
    }
    sentences
}

/// The word immediately before a '.' — the trailing run of
/// letters/digits/dots.
fn is_abbreviation(before: &[char]) -> bool {
    let mut word: Vec<char> = before
        .iter()
        .rev()
        .take_while(|c| c.is_alphanumeric() || **c == '.')
        .cloned()
        .collect();
    word.reverse();
    let word: String = word.into_iter().collect::<String>().to_lowercase();
    let word = word.trim_matches('.');
    if word.is_empty() {
        return false;
    }
    // single letters are initials ("J. Smith")
    if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
        return true;
    }
    ABBREVIATIONS.contains(&word)
}

/// `TABLE: <entity> | <col1> = <v1> ; <col2> = <v2> ; ...`
pub fn serialize_row_fact(header: &[String], row: &TableRow, row_index: usize) -> Result<Fact> {
    check_row(header, row, row_index)?;
    let pairs: Vec<String> = header
        .iter()
        .zip(&row.cells)
        .map(|(col, val)| format!("{col}{ATTR_DELIM}{val}"))
        .collect();
    let text = format!("{TABLE_PREFIX}{} | {}", row.entity, pairs.join(" ; "));
    let atomic = count_delims(&text) < DEFAULT_COMPOSITE_THRESHOLD;
    Ok(Fact {
        kind: FactKind::TableRow,
        text,
        source: SourceRef {
            section: SectionKind::Table,
            index: row_index,
        },
        entity: Some(row.entity.clone()),
        column: None,
        value: None,
        atomic,
    })
}

/// One `TABLE: <entity> | <column> = <value>` fact per non-empty cell.
pub fn serialize_cell_facts(header: &[String], row: &TableRow, row_index: usize) -> Result<Vec<Fact>> {
    check_row(header, row, row_index)?;
    Ok(header
        .iter()
        .zip(&row.cells)
        .filter(|(_, val)| !val.trim().is_empty())
        .map(|(col, val)| Fact {
            kind: FactKind::TableCell,
            text: format!("{TABLE_PREFIX}{} | {col}{ATTR_DELIM}{val}", row.entity),
            source: SourceRef {
                section: SectionKind::Table,
                index: row_index,
            },
            entity: Some(row.entity.clone()),
            column: Some(col.clone()),
            value: Some(val.clone()),
            atomic: true,
        })
        .collect())
}

fn check_row(header: &[String], row: &TableRow, row_index: usize) -> Result<()> {
    if row.cells.len() != header.len() {
        return Err(Error::RaggedRow {
            row: row_index,
            expected: header.len(),
            got: row.cells.len(),
        });
    }
    if row.entity.trim().is_empty() {
        return Err(Error::EmptyEntity { row: row_index });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct FactorizeOptions {
    pub granularity: Granularity,
    /// Post-text is kept per line by default; enable to sentence-split it
    /// like pre-text.
    pub split_post: bool,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions {
            granularity: Granularity::Both,
            split_post: false,
        }
    }
}

/// Decompose a document into ordered facts: all PRE in source order, all
/// TABLE in row order (cell facts left-to-right within a row), all POST.
pub fn decompose_document(doc: &Document, granularity: Granularity) -> Result<Vec<Fact>> {
    decompose_document_with(
        doc,
        FactorizeOptions {
            granularity,
            ..FactorizeOptions::default()
        },
    )
}

pub fn decompose_document_with(doc: &Document, opts: FactorizeOptions) -> Result<Vec<Fact>> {
    let mut facts = Vec::new();
    for (i, block) in doc.pre_text.iter().enumerate() {
        for sentence in split_sentences(block) {
            facts.push(Fact {
                kind: FactKind::Pre,
                text: format!("{PRE_PREFIX}{sentence}"),
                source: SourceRef {
                    section: SectionKind::Pre,
                    index: i,
                },
                entity: None,
                column: None,
                value: None,
                atomic: true,
            });
        }
    }
    for (r, row) in doc.table.rows.iter().enumerate() {
        if matches!(opts.granularity, Granularity::Row | Granularity::Both) {
            facts.push(serialize_row_fact(&doc.table.header, row, r)?);
        }
        if matches!(opts.granularity, Granularity::Cell | Granularity::Both) {
            facts.extend(serialize_cell_facts(&doc.table.header, row, r)?);
        }
    }
    for (i, line) in doc.post_text.iter().enumerate() {
        let pieces = if opts.split_post {
            split_sentences(line)
        } else {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                vec![]
            } else {
                vec![trimmed.to_owned()]
            }
        };
        for piece in pieces {
            facts.push(Fact {
                kind: FactKind::Post,
                text: format!("{POST_PREFIX}{piece}"),
                source: SourceRef {
                    section: SectionKind::Post,
                    index: i,
                },
                entity: None,
                column: None,
                value: None,
                atomic: true,
            });
        }
    }
    Ok(facts)
}

fn count_delims(text: &str) -> usize {
    text.matches(ATTR_DELIM).count()
}

/// A fact is composite when it is a serialized row carrying two or more
/// attribute-value pairs. Cell, pre, and post facts are never composite.
pub fn is_composite(fact: &Fact) -> bool {
    is_composite_with(fact, DEFAULT_COMPOSITE_THRESHOLD)
}

pub fn is_composite_with(fact: &Fact, threshold: usize) -> bool {
    match fact.kind {
        FactKind::TableRow => count_delims(&fact.text) >= threshold,
        FactKind::Pre | FactKind::Post | FactKind::TableCell => false,
    }
}

/// Plain-text document rendering: pre sentences, row-serialized table
/// lines, post lines. Used for full-document prompt context and free-form
/// memory ingestion.
pub fn render_document_lines(doc: &Document) -> Result<Vec<String>> {
    let mut lines: Vec<String> = Vec::new();
    for block in &doc.pre_text {
        lines.extend(split_sentences(block));
    }
    for (r, row) in doc.table.rows.iter().enumerate() {
        lines.push(serialize_row_fact(&doc.table.header, row, r)?.text);
    }
    for line in &doc.post_text {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            lines.push(trimmed.to_owned());
        }
    }
    Ok(lines)
}

/// Fact dump for offline inspection of retrieval corpora: JSONL, one fact
/// per line.
pub fn write_facts_jsonl(path: &Path, facts: &[Fact]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for fact in facts {
        serde_json::to_writer(&mut file, fact)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
