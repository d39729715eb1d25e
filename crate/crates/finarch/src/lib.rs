//! Evaluation harness for retrieval- and memory-augmented financial QA.
//!
//! `finarch` runs four reasoning architectures over FinQA/ConvFinQA-style
//! datasets against a local model server and scores them with a symbolic
//! numeric decoder:
//!
//! - **Baseline** — the full rendered document in every prompt.
//! - **RAG** — per-query top-k cosine retrieval over decomposed document
//!   facts (`PRE:` / `TABLE:` / `POST:`).
//! - **Mem0-Augmented** — a shared free-form memory pool accumulating raw
//!   context plus each completed turn's Q/A pair.
//! - **Structured Mem0** — per-dialog attribute-value fact memory
//!   (`entity | column = value`) with composite rows dropped after
//!   retrieval.
//!
//! Dialogue history is injected into every prompt with no window, model
//! calls go through a record/replay transcript so whole runs are
//! reproducible offline, and the analysis layer produces accuracy tables
//! with Wilson intervals, latency percentiles, turn-depth accuracy,
//! cascade-failure rates, judge/numeric divergence, and router
//! simulations.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p finarch --example ingest_corpus       # dataset loading + validation
//! cargo run -p finarch --example factorize_document  # PRE/TABLE/POST fact decomposition
//! cargo run -p finarch --example embed_and_search    # embeddings, cache, top-k search
//! cargo run -p finarch --example memory_policies     # free-form vs structured memory
//! cargo run -p finarch --example record_replay       # transcript record/strict replay
//! cargo run -p finarch --example run_architectures   # all four pipelines end to end
//! cargo run -p finarch --example score_answers       # numeric decoding + verdicts
//! cargo run -p finarch --example analyze_metrics     # tables, CIs, cascade, divergence
//! cargo run -p finarch --example route_simulation    # router arithmetic
//! ```
//!
//! The thin `finarch` binary exposes the same flow as subcommands
//! (`ingest`, `run`, `score`, `analyze`, `route-sim`, `report`); see the
//! repository README.
//!
//! # Quick start
//!
//! ```
//! use std::sync::Arc;
//! use finarch::embed::Embedder;
//! use finarch::memory::StructuredMemory;
//! use finarch::corpus::{Document, Table, TableRow};
//!
//! let doc = Document {
//!     id: "doc".into(),
//!     pre_text: vec!["Revenue grew in fiscal 2021.".into()],
//!     table: Table {
//!         header: vec!["2020".into(), "2021".into()],
//!         rows: vec![TableRow { entity: "total volume".into(),
//!                               cells: vec!["598".into(), "637".into()] }],
//!     },
//!     post_text: vec![],
//! };
//! let mut memory = StructuredMemory::new(Arc::new(Embedder::fallback(384)));
//! memory.ingest(&doc, "dialog-1").unwrap();
//! let facts = memory.retrieve("total volume in 2021", "dialog-1", 12).unwrap();
//! assert!(facts.iter().any(|f| f.text == "TABLE: total volume | 2021 = 637"));
//! ```

pub mod analysis;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod factorize;
pub mod llm;
pub mod memory;
pub mod pipelines;
pub mod routing;
pub mod runlog;
pub mod scoring;
pub mod store;
pub mod testkit;

pub use error::{Error, Result};
