//! Run all four architectures over the bundled mini corpus against the
//! deterministic stub server, then score and summarize the logs.
//!
//! ```bash
//! cargo run -p finarch --example run_architectures
//! ```
//!
//! Point `MODEL_ENDPOINT` at a real local model server to run the same
//! flow against live inference.

use std::path::Path;

use finarch::cli::{cmd_analyze, cmd_ingest, cmd_run, cmd_score};
use finarch::config::{EmbedProviderKind, RunConfig};
use finarch::corpus::Benchmark;
use finarch::llm::ReplayMode;
use finarch::pipelines::ArchitectureId;
use finarch::testkit::StubServer;

fn main() -> finarch::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().expect("tempdir");

    let stub;
    let endpoint = match std::env::var("MODEL_ENDPOINT") {
        Ok(endpoint) => endpoint,
        Err(_) => {
            stub = StubServer::start().expect("stub server");
            println!("MODEL_ENDPOINT not set; using the deterministic stub at {}", stub.endpoint());
            stub.endpoint().to_owned()
        }
    };

    let cfg = RunConfig {
        convfinqa_path: Some(fixtures.join("convfinqa_mini.json")),
        benchmark: Benchmark::ConvFinQA,
        model_id: "stub-model".into(),
        embed_provider: EmbedProviderKind::Fallback,
        endpoint,
        replay: ReplayMode::Record,
        transcript_path: Some(dir.path().join("transcript.jsonl")),
        out_dir: dir.path().join("out"),
        ..RunConfig::default()
    };

    cmd_ingest(&cfg)?;
    cmd_run(&cfg, &ArchitectureId::ALL)?;
    cmd_score(&cfg, &[], true)?;
    cmd_analyze(&cfg, &[], None, None)?;

    println!("\nartifacts under {}:", cfg.out_dir.display());
    let mut names: Vec<String> = std::fs::read_dir(&cfg.out_dir)
        .expect("out dir")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
    Ok(())
}
