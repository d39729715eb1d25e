//! Exact in-memory vector store with scoped insertion and top-k cosine
//! search.
//!
//! Search is a linear scan with heap selection, not ANN: corpora here are
//! thousands of facts and results must be bit-stable across runs. Ties
//! break by insertion order (ascending id).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embed::{decode_vector, encode_vector, Embedding};
use crate::error::{Error, Result};
use crate::factorize::Fact;

/// Scope shared by entries that are retrievable from every search.
pub const GLOBAL_SCOPE: &str = "GLOBAL";

pub type FactId = u64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stored<T> {
    pub fact_id: FactId,
    pub scope_id: String,
    pub item: T,
    pub embedding: Embedding,
}

/// The store's native entry type.
pub type StoredFact = Stored<Fact>;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<T> {
    pub fact_id: FactId,
    /// Cosine similarity in [-1, 1] (up to float rounding).
    pub score: f64,
    pub item: T,
}

/// Cosine similarity with 64-bit accumulation; for unit vectors this is a
/// plain dot product.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.vector.iter().zip(&b.vector) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

#[derive(Debug, Default)]
pub struct VectorStore<T> {
    dim: Option<usize>,
    next_id: FactId,
    entries: Vec<Stored<T>>,
}

impl<T: Clone> VectorStore<T> {
    pub fn new() -> Self {
        VectorStore {
            dim: None,
            next_id: 0,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Store dimension, fixed by the first add.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn has_scope(&self, scope_id: &str) -> bool {
        self.entries.iter().any(|e| e.scope_id == scope_id)
    }

    pub fn entries(&self) -> &[Stored<T>] {
        &self.entries
    }

    pub fn add(&mut self, scope_id: &str, item: T, embedding: Embedding) -> Result<FactId> {
        match self.dim {
            None => self.dim = Some(embedding.dim),
            Some(dim) if dim != embedding.dim => {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: embedding.dim,
                })
            }
            Some(_) => {}
        }
        let fact_id = self.next_id;
        self.next_id += 1;
        self.entries.push(Stored {
            fact_id,
            scope_id: scope_id.to_owned(),
            item,
            embedding,
        });
        Ok(fact_id)
    }

    /// Top-k by cosine among entries matching `scope` (all scopes when
    /// `None`). Hits are sorted score-descending, ties by ascending id;
    /// fewer than k are returned iff the candidate pool is smaller.
    pub fn search(
        &self,
        scope: Option<&str>,
        query: &Embedding,
        k: usize,
    ) -> Result<Vec<SearchHit<T>>> {
        if let Some(dim) = self.dim {
            if dim != query.dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: query.dim,
                });
            }
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        // min-heap on (score, reversed id): the root is the worst kept hit
        let mut heap: BinaryHeap<HeapKey> = BinaryHeap::with_capacity(k + 1);
        for (idx, entry) in self.entries.iter().enumerate() {
            if let Some(s) = scope {
                if entry.scope_id != s {
                    continue;
                }
            }
            let score = cosine(query, &entry.embedding)?;
            heap.push(HeapKey {
                score,
                fact_id: entry.fact_id,
                idx,
            });
            if heap.len() > k {
                heap.pop();
            }
        }
        let mut hits: Vec<HeapKey> = heap.into_vec();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.fact_id.cmp(&b.fact_id))
        });
        Ok(hits
            .into_iter()
            .map(|h| SearchHit {
                fact_id: h.fact_id,
                score: h.score,
                item: self.entries[h.idx].item.clone(),
            })
            .collect())
    }
}

struct HeapKey {
    score: f64,
    fact_id: FactId,
    idx: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // greater = worse, so BinaryHeap::pop evicts the worst:
        // lower score is worse; on equal scores a higher id is worse
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.fact_id.cmp(&other.fact_id))
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotRecord<T> {
    fact_id: FactId,
    scope_id: String,
    item: T,
    model_id: String,
    /// base64 of the cache's binary vector layout
    vector: String,
}

impl<T: Clone + Serialize + DeserializeOwned> VectorStore<T> {
    /// JSONL snapshot, one stored entry per line.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let b64 = base64::engine::general_purpose::STANDARD;
        for e in &self.entries {
            let rec = SnapshotRecord {
                fact_id: e.fact_id,
                scope_id: e.scope_id.clone(),
                item: e.item.clone(),
                model_id: e.embedding.model_id.clone(),
                vector: b64.encode(encode_vector(&e.embedding.vector)),
            };
            serde_json::to_writer(&mut file, &rec)?;
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Restore a snapshot, preserving the original ids.
    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let b64 = base64::engine::general_purpose::STANDARD;
        let mut store = VectorStore::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SnapshotRecord<T> = serde_json::from_str(&line)?;
            let bytes = b64.decode(rec.vector.as_bytes()).map_err(|e| Error::LogFormat {
                path: path.to_owned(),
                msg: format!("bad base64 vector: {e}"),
            })?;
            let vector = decode_vector(&bytes).ok_or_else(|| Error::LogFormat {
                path: path.to_owned(),
                msg: "bad vector payload".into(),
            })?;
            let dim = vector.len();
            match store.dim {
                None => store.dim = Some(dim),
                Some(d) if d != dim => return Err(Error::DimMismatch { expected: d, got: dim }),
                Some(_) => {}
            }
            store.next_id = store.next_id.max(rec.fact_id + 1);
            store.entries.push(Stored {
                fact_id: rec.fact_id,
                scope_id: rec.scope_id,
                item: rec.item,
                embedding: Embedding {
                    vector,
                    dim,
                    model_id: rec.model_id,
                },
            });
        }
        Ok(store)
    }
}
