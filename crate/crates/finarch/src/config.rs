//! Run configuration: a single JSON document with defaults for every
//! field except the dataset paths. CLI flags override file values; the
//! `MODEL_ENDPOINT` environment variable overrides the configured endpoint
//! (flag > env > file > default). The fully resolved configuration is
//! echoed into every run header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::CascadeMetric;
use crate::corpus::Benchmark;
use crate::embed::{Embedder, DEFAULT_FALLBACK_DIM};
use crate::error::{Error, Result};
use crate::factorize::Granularity;
use crate::llm::ReplayMode;
use crate::pipelines::ArchitectureId;
use crate::scoring::ScoringConfig;

pub const ENV_MODEL_ENDPOINT: &str = "MODEL_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedProviderKind {
    Remote,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub finqa_path: Option<PathBuf>,
    pub convfinqa_path: Option<PathBuf>,
    pub architecture: ArchitectureId,
    pub benchmark: Benchmark,
    pub k: usize,
    pub model_id: String,
    pub judge_model_id: Option<String>,
    pub embed_model_id: String,
    pub embed_provider: EmbedProviderKind,
    pub fallback_dim: usize,
    pub endpoint: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub replay: ReplayMode,
    pub transcript_path: Option<PathBuf>,
    pub workers: usize,
    pub scoring: ScoringConfig,
    pub keyword_list_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub rag_granularity: Granularity,
    pub include_replayed_latency: bool,
    pub cascade_metric: CascadeMetric,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            finqa_path: None,
            convfinqa_path: None,
            architecture: ArchitectureId::Baseline,
            benchmark: Benchmark::FinQA,
            k: 12,
            model_id: "llama3.1:8b".into(),
            judge_model_id: None,
            embed_model_id: "nomic-embed-text".into(),
            embed_provider: EmbedProviderKind::Remote,
            fallback_dim: DEFAULT_FALLBACK_DIM,
            endpoint: "http://localhost:11434".into(),
            temperature: 0.0,
            max_output_tokens: 512,
            replay: ReplayMode::Off,
            transcript_path: None,
            workers: 1,
            scoring: ScoringConfig::default(),
            keyword_list_path: None,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            rag_granularity: Granularity::Row,
            include_replayed_latency: false,
            cascade_metric: CascadeMetric::CorrectedClose,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Apply the environment override for the endpoint.
    pub fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var(ENV_MODEL_ENDPOINT) {
            if !endpoint.is_empty() {
                self.endpoint = endpoint;
            }
        }
    }

    pub fn transcript_path(&self) -> PathBuf {
        self.transcript_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join("transcript.jsonl"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("embed_cache"))
    }

    pub fn corpus_path(&self, benchmark: Benchmark) -> PathBuf {
        self.out_dir.join(format!("corpus_{benchmark}.jsonl"))
    }

    pub fn run_log_path(&self, benchmark: Benchmark, arch: ArchitectureId) -> PathBuf {
        self.out_dir.join(format!("run_{benchmark}_{arch}.jsonl"))
    }

    pub fn scored_log_path(&self, benchmark: Benchmark, arch: ArchitectureId) -> PathBuf {
        self.out_dir
            .join(format!("run_{benchmark}_{arch}.scored.jsonl"))
    }

    pub fn dataset_path(&self, benchmark: Benchmark) -> Result<&PathBuf> {
        let path = match benchmark {
            Benchmark::FinQA => self.finqa_path.as_ref(),
            Benchmark::ConvFinQA => self.convfinqa_path.as_ref(),
        };
        path.ok_or_else(|| {
            Error::MissingInput(format!("no dataset path configured for {benchmark}"))
        })
    }

    pub fn build_embedder(&self) -> Embedder {
        let embedder = match self.embed_provider {
            EmbedProviderKind::Remote => {
                Embedder::remote(self.endpoint.clone(), self.embed_model_id.clone())
            }
            EmbedProviderKind::Fallback => Embedder::fallback(self.fallback_dim),
        };
        embedder.with_cache_dir(self.cache_dir())
    }

    /// The fully resolved configuration as echoed into run headers.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hash of the architecture- and benchmark-independent run
    /// environment: everything that must agree before artifacts may be
    /// bundled into one report. Output locations, dataset paths, and the
    /// architecture/benchmark selectors are excluded so the four
    /// architecture runs of one experiment share a hash.
    pub fn config_hash(&self) -> String {
        let surface = serde_json::json!({
            "model_id": self.model_id,
            "judge_model_id": self.judge_model_id,
            "embed_model_id": self.embed_model_id,
            "embed_provider": self.embed_provider,
            "fallback_dim": self.fallback_dim,
            "k": self.k,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "scoring": self.scoring,
            "rag_granularity": self.rag_granularity,
            "seed": self.seed,
        });
        let mut hasher = Sha256::new();
        hasher.update(surface.to_string().as_bytes());
        crate::embed::hex(&hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_constants() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.k, 12);
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.fallback_dim, 384);
    }

    #[test]
    fn file_round_trip_and_unknown_field_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let cfg = RunConfig {
            k: 7,
            finqa_path: Some(PathBuf::from("/data/finqa.json")),
            ..RunConfig::default()
        };
        fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(loaded, cfg);

        fs::write(&path, r#"{"kk": 3}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn config_hash_ignores_arch_and_outputs_but_not_inference_surface() {
        let base = RunConfig::default();
        let mut arch_differs = base.clone();
        arch_differs.architecture = ArchitectureId::Rag;
        arch_differs.benchmark = Benchmark::ConvFinQA;
        arch_differs.out_dir = PathBuf::from("elsewhere");
        assert_eq!(base.config_hash(), arch_differs.config_hash());

        let mut k_differs = base.clone();
        k_differs.k = 5;
        assert_ne!(base.config_hash(), k_differs.config_hash());

        let mut model_differs = base;
        model_differs.model_id = "other".into();
        assert_ne!(model_differs.config_hash(), k_differs.config_hash());
    }
}
