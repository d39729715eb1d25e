//! Unit-norm dense embeddings with a content-addressed disk cache.
//!
//! Two providers: a remote model-server endpoint (`POST
//! {endpoint}/api/embeddings`) and a deterministic offline fallback that
//! feature-hashes character trigrams. Every vector is L2-normalized
//! client-side so downstream cosine similarity reduces to a dot product.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_FALLBACK_DIM: usize = 384;

/// Seed mixed into the fallback embedder's FNV-1a basis. Fixed so fallback
/// vectors are identical across platforms and runs.
pub const FALLBACK_HASH_SEED: u64 = 0x51_7E_AD_5E_ED_00_13_37;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub dim: usize,
    pub model_id: String,
}

impl Embedding {
    pub fn l2_norm(&self) -> f64 {
        self.vector
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone)]
pub enum ProviderKind {
    Remote { endpoint: String },
    FallbackHash { dim: usize },
}

/// Embedding provider handle: remote endpoint or offline fallback, plus an
/// optional content-addressed disk cache.
pub struct Embedder {
    kind: ProviderKind,
    model_id: String,
    cache_dir: Option<PathBuf>,
    http: Option<reqwest::blocking::Client>,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Embedder {
    pub fn remote(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Embedder {
            kind: ProviderKind::Remote {
                endpoint: endpoint.into(),
            },
            model_id: model_id.into(),
            cache_dir: None,
            http: Some(
                reqwest::blocking::Client::builder()
                    .connect_timeout(std::time::Duration::from_secs(10))
                    .timeout(std::time::Duration::from_secs(300))
                    .build()
                    .expect("http client"),
            ),
        }
    }

    pub fn fallback(dim: usize) -> Self {
        Embedder {
            kind: ProviderKind::FallbackHash { dim },
            model_id: format!("trigram-hash-{dim}"),
            cache_dir: None,
            http: None,
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim_hint(&self) -> Option<usize> {
        match self.kind {
            ProviderKind::FallbackHash { dim } => Some(dim),
            ProviderKind::Remote { .. } => None,
        }
    }

    /// Embed one text. Results are unit-norm and cached by
    /// `sha256(model_id \0 text)` when a cache directory is configured.
    pub fn embed_text(&self, text: &str) -> Result<Embedding> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        let key = cache_key(&self.model_id, text);
        if let Some(dir) = &self.cache_dir {
            if let Some(vector) = read_cached(&self.entry_path(dir, &key)) {
                let dim = vector.len();
                return Ok(Embedding {
                    vector,
                    dim,
                    model_id: self.model_id.clone(),
                });
            }
        }
        let mut vector = match &self.kind {
            ProviderKind::FallbackHash { dim } => fallback_embed(text, *dim)?.vector,
            ProviderKind::Remote { endpoint } => self.fetch_remote(endpoint, text)?,
        };
        normalize(&mut vector).map_err(|_| match &self.kind {
            ProviderKind::Remote { endpoint } => Error::MalformedResponse {
                endpoint: endpoint.clone(),
                msg: "zero-norm embedding".into(),
            },
            ProviderKind::FallbackHash { .. } => Error::EmptyText,
        })?;
        if let Some(dir) = &self.cache_dir {
            write_cached(&self.entry_path(dir, &key), &vector)?;
        }
        let dim = vector.len();
        Ok(Embedding {
            vector,
            dim,
            model_id: self.model_id.clone(),
        })
    }

    /// Element-wise [`Self::embed_text`]; output order matches input order
    /// and any failure aborts the whole batch.
    pub fn embed_batch(&self, texts: &[impl AsRef<str>]) -> Result<Vec<Embedding>> {
        if texts.iter().any(|t| t.as_ref().is_empty()) {
            return Err(Error::EmptyText);
        }
        texts.iter().map(|t| self.embed_text(t.as_ref())).collect()
    }

    fn entry_path(&self, dir: &Path, key: &str) -> PathBuf {
        dir.join(sanitize_component(&self.model_id))
            .join(format!("{key}.vec"))
    }

    fn fetch_remote(&self, endpoint: &str, text: &str) -> Result<Vec<f32>> {
        #[derive(Serialize)]
        struct Req<'a> {
            model: &'a str,
            prompt: &'a str,
        }
        #[derive(Deserialize)]
        struct Resp {
            embedding: Vec<f64>,
        }
        let url = format!("{}/api/embeddings", endpoint.trim_end_matches('/'));
        let resp = self
            .http
            .as_ref()
            .expect("remote embedder has http client")
            .post(&url)
            .json(&Req {
                model: &self.model_id,
                prompt: text,
            })
            .send()
            .map_err(|e| Error::EndpointUnreachable {
                endpoint: endpoint.to_owned(),
                msg: e.to_string(),
            })?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Error::EndpointUnreachable {
                endpoint: endpoint.to_owned(),
                msg: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(Error::MalformedResponse {
                endpoint: endpoint.to_owned(),
                msg: format!("status {status}"),
            });
        }
        let body: Resp = resp.json().map_err(|e| Error::MalformedResponse {
            endpoint: endpoint.to_owned(),
            msg: e.to_string(),
        })?;
        if body.embedding.is_empty() {
            return Err(Error::MalformedResponse {
                endpoint: endpoint.to_owned(),
                msg: "empty embedding array".into(),
            });
        }
        Ok(body.embedding.into_iter().map(|x| x as f32).collect())
    }
}

/// Deterministic offline embedder: counts of cyclic character trigrams,
/// feature-hashed (FNV-1a seeded with [`FALLBACK_HASH_SEED`]) into `dim`
/// buckets, then L2-normalized.
///
/// Trigrams are taken cyclically over the UTF-8 bytes, so a text and its
/// self-concatenation produce exactly the same direction.
pub fn fallback_embed(text: &str, dim: usize) -> Result<Embedding> {
    if text.is_empty() {
        return Err(Error::EmptyText);
    }
    if dim < 8 {
        return Err(Error::InvalidArgument(format!(
            "fallback dim must be >= 8, got {dim}"
        )));
    }
    let bytes = text.as_bytes();
    let n = bytes.len();
    let mut counts = vec![0u32; dim];
    for i in 0..n {
        let tri = [bytes[i], bytes[(i + 1) % n], bytes[(i + 2) % n]];
        counts[(fnv1a_seeded(&tri) % dim as u64) as usize] += 1;
    }
    let mut vector: Vec<f32> = counts.into_iter().map(|c| c as f32).collect();
    normalize(&mut vector).expect("non-empty text always yields mass");
    Ok(Embedding {
        vector,
        dim,
        model_id: format!("trigram-hash-{dim}"),
    })
}

/// Bucket index a trigram hashes to; exposed so tests can pre-check that
/// fixture strings are collision-free.
pub fn fallback_bucket(trigram: &[u8; 3], dim: usize) -> usize {
    (fnv1a_seeded(trigram) % dim as u64) as usize
}

fn fnv1a_seeded(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET_BASIS ^ FALLBACK_HASH_SEED;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// L2-normalize in place with 64-bit accumulation. Errors on zero norm.
fn normalize(vector: &mut [f32]) -> std::result::Result<(), ()> {
    let norm = vector
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(());
    }
    for x in vector.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    Ok(())
}

pub fn cache_key(model_id: &str, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sanitize_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
        .collect()
}

/// Cache entry layout: 4-byte little-endian dim header, then `dim`
/// little-endian f32 values.
pub fn encode_vector(vector: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + vector.len() * 4);
    out.extend_from_slice(&(vector.len() as u32).to_le_bytes());
    for &x in vector {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_vector(bytes: &[u8]) -> Option<Vec<f32>> {
    if bytes.len() < 4 {
        return None;
    }
    let dim = u32::from_le_bytes(bytes[0..4].try_into().ok()?) as usize;
    if bytes.len() != 4 + dim * 4 {
        return None;
    }
    Some(
        bytes[4..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

fn read_cached(path: &Path) -> Option<Vec<f32>> {
    let bytes = fs::read(path).ok()?;
    // malformed entries are treated as misses and overwritten
    decode_vector(&bytes)
}

/// Write-then-rename so concurrent readers never observe torn entries.
/// Duplicate concurrent misses both compute; last rename wins with an
/// identical payload.
fn write_cached(path: &Path, vector: &[f32]) -> Result<()> {
    let dir = path.parent().expect("cache entry has parent dir");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, encode_vector(vector)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
