//! The two memory policies over the vector store.
//!
//! Free-form memory is one shared pool across all dialogs in a run: raw
//! document context blocks plus `Q: ... / A: ...` pairs, accumulated and
//! never evicted. Structured memory ingests decomposed facts scoped per
//! dialog and drops composite rows after retrieval in favor of atomic
//! single-attribute facts.

use std::sync::Arc;

use crate::corpus::Document;
use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::factorize::{
    decompose_document, is_composite_with, render_document_lines, Fact, Granularity,
    DEFAULT_COMPOSITE_THRESHOLD,
};
use crate::store::{FactId, VectorStore, GLOBAL_SCOPE};

/// Free-form memory entries are chunked to at most this many characters,
/// split on fact boundaries.
pub const MAX_ENTRY_CHARS: usize = 1000;

/// Shared-pool free-form memory. Entries are raw texts; no schema
/// extraction is ever applied.
pub struct FreeformMemory {
    store: VectorStore<String>,
    embedder: Arc<Embedder>,
}

impl FreeformMemory {
    pub fn new(embedder: Arc<Embedder>) -> Self {
        FreeformMemory {
            store: VectorStore::new(),
            embedder,
        }
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn store(&self) -> &VectorStore<String> {
        &self.store
    }

    /// Render the document (pre sentences, row-serialized table, post
    /// lines) and add it to the pool as one or more chunked entries.
    /// Returns the number of entries added.
    pub fn add_context(&mut self, doc: &Document) -> Result<usize> {
        let lines = render_document_lines(doc)?;
        let mut added = 0;
        for chunk in chunk_lines(&lines, MAX_ENTRY_CHARS) {
            let embedding = self.embedder.embed_text(&chunk)?;
            self.store.add(GLOBAL_SCOPE, chunk, embedding)?;
            added += 1;
        }
        Ok(added)
    }

    /// Append a completed turn as `Q: {question}\nA: {answer}`.
    pub fn append_qa(&mut self, question: &str, answer_text: &str) -> Result<FactId> {
        let entry = format!("Q: {question}\nA: {answer_text}");
        let embedding = self.embedder.embed_text(&entry)?;
        self.store.add(GLOBAL_SCOPE, entry, embedding)
    }

    /// Top-k pool entries most similar to the query, in store order. No
    /// dedup is applied: near-duplicate entries are both returned.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>> {
        if self.store.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embedder.embed_text(query)?;
        Ok(self
            .store
            .search(Some(GLOBAL_SCOPE), &q, k)?
            .into_iter()
            .map(|h| h.item)
            .collect())
    }
}

/// Greedy packing of whole lines into chunks of at most `max_chars`
/// characters (joined with newlines). A single oversized line becomes its
/// own chunk; facts are never split mid-line.
fn chunk_lines(lines: &[String], max_chars: usize) -> Vec<String> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_chars = 0usize;
    for line in lines {
        let line_chars = line.chars().count();
        if current.is_empty() {
            current = line.clone();
            current_chars = line_chars;
            continue;
        }
        if current_chars + 1 + line_chars <= max_chars {
            current.push('\n');
            current.push_str(line);
            current_chars += 1 + line_chars;
        } else {
            chunks.push(std::mem::take(&mut current));
            current = line.clone();
            current_chars = line_chars;
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Per-dialog structured attribute-value memory. Facts are stored by
/// direct embedding; no language-model extraction is involved.
pub struct StructuredMemory {
    store: VectorStore<Fact>,
    embedder: Arc<Embedder>,
    composite_threshold: usize,
}

impl StructuredMemory {
    pub fn new(embedder: Arc<Embedder>) -> Self {
        StructuredMemory {
            store: VectorStore::new(),
            embedder,
            composite_threshold: DEFAULT_COMPOSITE_THRESHOLD,
        }
    }

    pub fn store(&self) -> &VectorStore<Fact> {
        &self.store
    }

    pub fn has_dialog(&self, dialog_id: &str) -> bool {
        self.store.has_scope(dialog_id)
    }

    /// Ingest cell facts plus row-fact fallback plus pre/post facts under
    /// the dialog's scope. A dialog id may be ingested once.
    pub fn ingest(&mut self, doc: &Document, dialog_id: &str) -> Result<usize> {
        if self.has_dialog(dialog_id) {
            return Err(Error::DuplicateDialog(dialog_id.to_owned()));
        }
        let facts = decompose_document(doc, Granularity::Both)?;
        let count = facts.len();
        for fact in facts {
            let embedding = self.embedder.embed_text(&fact.text)?;
            self.store.add(dialog_id, fact, embedding)?;
        }
        Ok(count)
    }

    /// Top-k scoped hits with composite rows dropped after retrieval; the
    /// result may therefore hold fewer than k facts (possibly zero).
    pub fn retrieve(&self, query: &str, dialog_id: &str, k: usize) -> Result<Vec<Fact>> {
        if !self.has_dialog(dialog_id) {
            return Err(Error::UnknownDialog(dialog_id.to_owned()));
        }
        let q = self.embedder.embed_text(query)?;
        Ok(self
            .store
            .search(Some(dialog_id), &q, k)?
            .into_iter()
            .map(|h| h.item)
            .filter(|f| !is_composite_with(f, self.composite_threshold))
            .collect())
    }
}
