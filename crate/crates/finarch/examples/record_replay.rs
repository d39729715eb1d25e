//! Record completions against a local stub server, then replay them
//! strictly with no server running.
//!
//! ```bash
//! cargo run -p finarch --example record_replay
//! ```

use finarch::llm::{GenParams, LlmClient, ReplayMode, Transcript};
use finarch::testkit::StubServer;

fn main() -> finarch::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let transcript_path = dir.path().join("transcript.jsonl");

    let server = StubServer::start().expect("stub server");
    let params = GenParams::new("stub-model", server.endpoint());

    let recorder = LlmClient::new(
        params.clone(),
        ReplayMode::Record,
        Some(Transcript::open(&transcript_path)?),
    )?;
    let prompt = "CONTEXT:\nTABLE: total volume | 2021 = 637\n\nQuestion: what was total volume in 2021?\nEnd your response with the final numeric answer.";
    let live = recorder.complete(prompt)?;
    println!("live completion ({} ms): {}", live.latency_ms, live.text);

    let verdict = recorder.judge("what was total volume in 2021?", "637", &live.text)?;
    println!("judge verdict: {:?}", verdict.verdict);

    drop(server);
    println!("\nserver stopped; replaying strictly from {}", transcript_path.display());

    let replayer = LlmClient::new(
        params,
        ReplayMode::Strict,
        Some(Transcript::open(&transcript_path)?),
    )?;
    let replayed = replayer.complete(prompt)?;
    assert!(replayed.replayed);
    assert_eq!(replayed.text, live.text);
    println!("replayed completion ({} ms, recorded): {}", replayed.latency_ms, replayed.text);

    // an unseen prompt is a hard error in strict mode
    let miss = replayer.complete("a prompt that was never recorded");
    println!("\nstrict miss: {}", miss.unwrap_err());
    Ok(())
}
