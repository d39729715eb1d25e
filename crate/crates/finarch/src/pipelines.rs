//! Prompt assembly for the four architectures and the turn-by-turn run
//! loop.
//!
//! All architectures share one frozen template: header instruction, a
//! per-architecture context block, the dialogue-history block, the current
//! question, and the answer-format instruction. Histories are never
//! windowed: every prior turn's Q/A pair is injected verbatim.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{DialogueExample, Document};
use crate::embed::{hex, Embedder};
use crate::error::{Error, Result};
use crate::factorize::{decompose_document, render_document_lines, Fact, Granularity};
use crate::llm::{LlmClient, JUDGE_TEMPLATE};
use crate::memory::{FreeformMemory, StructuredMemory};
use crate::runlog::TurnRecord;
use crate::store::VectorStore;

pub const PROMPT_HEADER: &str = "You are a financial analysis assistant. Answer the question \
using the provided context. Show the key calculation briefly when one is needed.";
pub const CONTEXT_LABEL: &str = "CONTEXT:";
pub const MEMORY_LABEL: &str = "RELEVANT MEMORY:";
pub const HISTORY_LABEL: &str = "HISTORY:";
pub const QUESTION_LABEL: &str = "Question:";
pub const ANSWER_FORMAT_INSTRUCTION: &str = "End your response with the final numeric answer.";

/// History line shape, 1-based for display.
const HISTORY_LINE_FORMAT: &str = "Turn {i} Q: {q}\\nTurn {i} A: {a}";

/// Hash of every frozen template string, embedded in run headers so replay
/// artifacts are tied to the exact prompt wording that produced them.
pub fn template_hash() -> String {
    let mut hasher = Sha256::new();
    for part in [
        PROMPT_HEADER,
        CONTEXT_LABEL,
        MEMORY_LABEL,
        HISTORY_LABEL,
        QUESTION_LABEL,
        ANSWER_FORMAT_INSTRUCTION,
        HISTORY_LINE_FORMAT,
        JUDGE_TEMPLATE,
    ] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hex(&hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArchitectureId {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "rag")]
    Rag,
    #[serde(rename = "mem0")]
    Mem0Aug,
    #[serde(rename = "structmem")]
    StructMem0,
}

impl ArchitectureId {
    pub const ALL: [ArchitectureId; 4] = [
        ArchitectureId::Baseline,
        ArchitectureId::Rag,
        ArchitectureId::Mem0Aug,
        ArchitectureId::StructMem0,
    ];

    /// Human-readable name for report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ArchitectureId::Baseline => "Baseline LLM",
            ArchitectureId::Rag => "RAG",
            ArchitectureId::Mem0Aug => "Mem0-Augmented",
            ArchitectureId::StructMem0 => "Structured Mem0",
        }
    }
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            ArchitectureId::Baseline => "baseline",
            ArchitectureId::Rag => "rag",
            ArchitectureId::Mem0Aug => "mem0",
            ArchitectureId::StructMem0 => "structmem",
        };
        write!(f, "{token}")
    }
}

impl std::str::FromStr for ArchitectureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(ArchitectureId::Baseline),
            "rag" => Ok(ArchitectureId::Rag),
            "mem0" => Ok(ArchitectureId::Mem0Aug),
            "structmem" => Ok(ArchitectureId::StructMem0),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture `{other}` (expected baseline, rag, mem0, or structmem)"
            ))),
        }
    }
}

/// Resolved turns so far: the dialogue state injected into later prompts.
/// Grows by exactly one (question, raw answer) entry per completed turn and
/// is never truncated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DialogueState {
    turns: Vec<(String, String)>,
}

impl DialogueState {
    pub fn new() -> Self {
        DialogueState::default()
    }

    pub fn push(&mut self, question: impl Into<String>, answer_text: impl Into<String>) {
        self.turns.push((question.into(), answer_text.into()));
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn turns(&self) -> &[(String, String)] {
        &self.turns
    }
}

/// `Turn {i} Q:` / `Turn {i} A:` lines for every resolved turn, 1-based.
pub fn render_history(state: &DialogueState) -> String {
    state
        .turns
        .iter()
        .enumerate()
        .map(|(i, (q, a))| format!("Turn {n} Q: {q}\nTurn {n} A: {a}", n = i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn missing(arch: ArchitectureId, section: &str) -> Error {
    Error::MissingPromptSection {
        arch: arch.to_string(),
        section: section.to_owned(),
    }
}

/// Assemble the frozen prompt template for one turn.
///
/// Required sections per architecture: `document` for Baseline and
/// Mem0-Augmented, `evidence` for RAG and Structured Mem0, `memories` for
/// Mem0-Augmented. An empty evidence or memory list is valid (a retrieval
/// shortfall), only an absent section is an error.
pub fn build_prompt(
    arch: ArchitectureId,
    document: Option<&Document>,
    evidence: Option<&[String]>,
    memories: Option<&[String]>,
    state: &DialogueState,
    question: &str,
) -> Result<String> {
    let mut sections: Vec<String> = vec![PROMPT_HEADER.to_owned()];
    match arch {
        ArchitectureId::Baseline => {
            let doc = document.ok_or_else(|| missing(arch, "document"))?;
            sections.push(format!(
                "{CONTEXT_LABEL}\n{}",
                render_document_lines(doc)?.join("\n")
            ));
        }
        ArchitectureId::Rag | ArchitectureId::StructMem0 => {
            let facts = evidence.ok_or_else(|| missing(arch, "evidence"))?;
            sections.push(format!("{CONTEXT_LABEL}\n{}", facts.join("\n")));
        }
        ArchitectureId::Mem0Aug => {
            let doc = document.ok_or_else(|| missing(arch, "document"))?;
            let memories = memories.ok_or_else(|| missing(arch, "memories"))?;
            sections.push(format!(
                "{CONTEXT_LABEL}\n{}",
                render_document_lines(doc)?.join("\n")
            ));
            sections.push(format!("{MEMORY_LABEL}\n{}", memories.join("\n")));
        }
    }
    if !state.is_empty() {
        sections.push(format!("{HISTORY_LABEL}\n{}", render_history(state)));
    }
    sections.push(format!(
        "{QUESTION_LABEL} {question}\n{ANSWER_FORMAT_INSTRUCTION}"
    ));
    Ok(sections.join("\n\n"))
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    /// Retrieval depth per query.
    pub k: usize,
    /// Fact granularity for the RAG per-document index.
    pub rag_granularity: Granularity,
    /// Dialog-level parallelism; turns within a dialog are always
    /// sequential.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 12,
            rag_granularity: Granularity::Row,
            workers: 1,
        }
    }
}

/// Shared run services. The RAG index and structured memory are scoped per
/// dialog; free-form memory is one GLOBAL pool whose writes serialize
/// across dialog runners.
pub struct RunServices {
    pub embedder: Arc<Embedder>,
    pub llm: LlmClient,
    rag: Mutex<VectorStore<Fact>>,
    rag_indexed: Mutex<BTreeSet<String>>,
    structured: Mutex<StructuredMemory>,
    freeform: Mutex<FreeformMemory>,
    freeform_seeded: Mutex<BTreeSet<String>>,
}

impl RunServices {
    pub fn new(embedder: Arc<Embedder>, llm: LlmClient) -> Self {
        RunServices {
            rag: Mutex::new(VectorStore::new()),
            rag_indexed: Mutex::new(BTreeSet::new()),
            structured: Mutex::new(StructuredMemory::new(embedder.clone())),
            freeform: Mutex::new(FreeformMemory::new(embedder.clone())),
            freeform_seeded: Mutex::new(BTreeSet::new()),
            embedder,
            llm,
        }
    }

    pub fn structured(&self) -> std::sync::MutexGuard<'_, StructuredMemory> {
        self.structured.lock().expect("structured memory lock")
    }

    pub fn freeform(&self) -> std::sync::MutexGuard<'_, FreeformMemory> {
        self.freeform.lock().expect("freeform memory lock")
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub dialogs: usize,
    pub new_records: usize,
    pub skipped_records: usize,
    pub error_turns: usize,
}

/// Run one dialog, resuming after `prior` completed turns, and return only
/// the newly produced records. Model failures become failed-turn records
/// (empty answer, error message) rather than aborts, and still advance the
/// dialogue state.
pub fn run_dialogue(
    arch: ArchitectureId,
    example: &DialogueExample,
    services: &RunServices,
    cfg: &PipelineConfig,
    prior: &[TurnRecord],
) -> Result<Vec<TurnRecord>> {
    let dialog_id = &example.dialog_id;
    prepare_dialog(arch, example, services, cfg)?;

    let mut state = DialogueState::new();
    for rec in prior {
        state.push(rec.question.clone(), rec.raw_text.clone());
    }

    let mut records = Vec::new();
    for turn in example.turns.iter().skip(prior.len()) {
        let question = &turn.question;
        let (evidence, memories, retrieved) = gather_context(arch, dialog_id, question, services, cfg)?;
        let prompt = build_prompt(
            arch,
            Some(&example.document),
            evidence.as_deref(),
            memories.as_deref(),
            &state,
            question,
        )?;
        let prompt_chars = prompt.chars().count();
        let record = match services.llm.complete(&prompt) {
            Ok(completion) => TurnRecord {
                dialog_id: dialog_id.clone(),
                turn_index: turn.index,
                benchmark: example.benchmark,
                architecture: arch,
                question: question.clone(),
                gold_answer: turn.gold_answer.clone(),
                prompt_chars,
                prompt_tokens: completion
                    .prompt_tokens
                    .unwrap_or_else(|| (prompt_chars as u64).div_ceil(4)),
                tokens_estimated: completion.prompt_tokens.is_none(),
                raw_text: completion.text,
                latency_ms: completion.latency_ms,
                retrieved_fact_count: retrieved,
                replayed: completion.replayed,
                truncated: completion.truncated,
                error: None,
            },
            Err(err) => TurnRecord {
                dialog_id: dialog_id.clone(),
                turn_index: turn.index,
                benchmark: example.benchmark,
                architecture: arch,
                question: question.clone(),
                gold_answer: turn.gold_answer.clone(),
                prompt_chars,
                prompt_tokens: (prompt_chars as u64).div_ceil(4),
                tokens_estimated: true,
                raw_text: String::new(),
                latency_ms: 0,
                retrieved_fact_count: retrieved,
                replayed: false,
                truncated: false,
                error: Some(err.to_string()),
            },
        };
        // a bad turn still contaminates history, as in a real run
        state.push(question.clone(), record.raw_text.clone());
        if arch == ArchitectureId::Mem0Aug {
            services.freeform().append_qa(question, &record.raw_text)?;
        }
        records.push(record);
    }
    Ok(records)
}

fn prepare_dialog(
    arch: ArchitectureId,
    example: &DialogueExample,
    services: &RunServices,
    cfg: &PipelineConfig,
) -> Result<()> {
    let dialog_id = &example.dialog_id;
    match arch {
        ArchitectureId::Baseline => {}
        ArchitectureId::Rag => {
            let mut indexed = services.rag_indexed.lock().expect("rag index lock");
            if indexed.insert(dialog_id.clone()) {
                let facts = decompose_document(&example.document, cfg.rag_granularity)?;
                let mut store = services.rag.lock().expect("rag store lock");
                for fact in facts {
                    let embedding = services.embedder.embed_text(&fact.text)?;
                    store.add(dialog_id, fact, embedding)?;
                }
            }
        }
        ArchitectureId::StructMem0 => {
            let mut mem = services.structured();
            if !mem.has_dialog(dialog_id) {
                mem.ingest(&example.document, dialog_id)?;
            }
        }
        ArchitectureId::Mem0Aug => {
            let mut seeded = services.freeform_seeded.lock().expect("freeform seed lock");
            if seeded.insert(dialog_id.clone()) {
                services.freeform().add_context(&example.document)?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::type_complexity)]
fn gather_context(
    arch: ArchitectureId,
    dialog_id: &str,
    question: &str,
    services: &RunServices,
    cfg: &PipelineConfig,
) -> Result<(Option<Vec<String>>, Option<Vec<String>>, usize)> {
    match arch {
        ArchitectureId::Baseline => Ok((None, None, 0)),
        ArchitectureId::Rag => {
            let query = services.embedder.embed_text(question)?;
            let store = services.rag.lock().expect("rag store lock");
            let hits = store.search(Some(dialog_id), &query, cfg.k)?;
            let texts: Vec<String> = hits.into_iter().map(|h| h.item.text).collect();
            let n = texts.len();
            Ok((Some(texts), None, n))
        }
        ArchitectureId::StructMem0 => {
            let mem = services.structured();
            let facts = mem.retrieve(question, dialog_id, cfg.k)?;
            let texts: Vec<String> = facts.into_iter().map(|f| f.text).collect();
            let n = texts.len();
            Ok((Some(texts), None, n))
        }
        ArchitectureId::Mem0Aug => {
            let mem = services.freeform();
            let memories = mem.retrieve(question, cfg.k)?;
            let n = memories.len();
            Ok((None, Some(memories), n))
        }
    }
}

/// Rebuild the free-form pool for dialogs resumed from an existing log:
/// context first, then each completed turn's Q/A, in corpus order.
fn reseed_freeform(
    corpus: &[DialogueExample],
    services: &RunServices,
    existing: &HashMap<String, Vec<TurnRecord>>,
) -> Result<()> {
    for ex in corpus {
        let Some(done) = existing.get(&ex.dialog_id) else {
            continue;
        };
        if done.is_empty() {
            continue;
        }
        let mut seeded = services.freeform_seeded.lock().expect("freeform seed lock");
        if seeded.insert(ex.dialog_id.clone()) {
            let mut mem = services.freeform();
            mem.add_context(&ex.document)?;
            for rec in done {
                mem.append_qa(&rec.question, &rec.raw_text)?;
            }
        }
    }
    Ok(())
}

/// Run every dialog of the corpus, skipping turns already present in
/// `existing`, and emit new records in corpus order. Dialogs may run in
/// parallel (`cfg.workers`); turns within a dialog never do.
pub fn run_benchmark(
    arch: ArchitectureId,
    corpus: &[DialogueExample],
    services: &RunServices,
    cfg: &PipelineConfig,
    existing: &HashMap<String, Vec<TurnRecord>>,
    mut emit: impl FnMut(TurnRecord) -> Result<()>,
) -> Result<RunSummary> {
    if arch == ArchitectureId::Mem0Aug {
        reseed_freeform(corpus, services, existing)?;
    }
    let mut summary = RunSummary {
        dialogs: corpus.len(),
        ..RunSummary::default()
    };
    let empty: Vec<TurnRecord> = Vec::new();
    let skipped: usize = corpus
        .iter()
        .map(|ex| existing.get(&ex.dialog_id).map_or(0, Vec::len))
        .sum();
    summary.skipped_records = skipped;

    let mut consume = |records: Vec<TurnRecord>, emit: &mut dyn FnMut(TurnRecord) -> Result<()>| -> Result<()> {
        for record in records {
            summary.new_records += 1;
            if record.error.is_some() {
                summary.error_turns += 1;
            }
            emit(record)?;
        }
        Ok(())
    };

    if cfg.workers <= 1 {
        for ex in corpus {
            let prior = existing.get(&ex.dialog_id).unwrap_or(&empty);
            let records = run_dialogue(arch, ex, services, cfg, prior)?;
            consume(records, &mut emit)?;
        }
        return Ok(summary);
    }

    // worker pool; the main thread re-orders results back to corpus order
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<TurnRecord>>)>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..cfg.workers.min(corpus.len()) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= corpus.len() {
                    break;
                }
                let ex = &corpus[idx];
                let prior = existing.get(&ex.dialog_id).map_or(&[] as &[_], Vec::as_slice);
                let result = run_dialogue(arch, ex, services, cfg, prior);
                if tx.send((idx, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending: HashMap<usize, Vec<TurnRecord>> = HashMap::new();
        let mut next_emit = 0usize;
        let mut first_error: Option<Error> = None;
        for (idx, result) in rx {
            match result {
                Ok(records) if first_error.is_none() => {
                    pending.insert(idx, records);
                    while let Some(records) = pending.remove(&next_emit) {
                        consume(records, &mut emit)?;
                        next_emit += 1;
                    }
                }
                Ok(_) => {}
                Err(err) => {
                    if first_error.is_none() {
                        first_error = Some(err);
                    }
                }
            }
        }
        match first_error {
            Some(err) => Err(err),
            None => Ok(()),
        }
    })?;
    Ok(summary)
}
