//! Load the bundled mini datasets, validate them, and dump the canonical
//! corpus as JSONL.
//!
//! ```bash
//! cargo run -p finarch --example ingest_corpus
//! ```

use std::path::Path;

use finarch::corpus::{corpus_stats, load_convfinqa, load_finqa, validate_example};

fn main() -> finarch::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let finqa = load_finqa(&fixtures.join("finqa_mini.json"))?;
    let (examples, turns) = corpus_stats(&finqa);
    println!("finqa_mini: {examples} examples, {turns} turns");

    let convfinqa = load_convfinqa(&fixtures.join("convfinqa_mini.json"))?;
    let (dialogs, turns) = corpus_stats(&convfinqa);
    println!("convfinqa_mini: {dialogs} dialogs, {turns} turns");

    for example in finqa.iter().chain(&convfinqa) {
        for issue in validate_example(example) {
            println!("  {:?}: {}", issue.severity, issue.message);
        }
    }

    let out = tempfile::tempdir().expect("tempdir");
    let dump = out.path().join("corpus.jsonl");
    let all: Vec<_> = finqa.into_iter().chain(convfinqa).collect();
    finarch::corpus::write_corpus_jsonl(&dump, &all)?;
    let reloaded = finarch::corpus::read_corpus_jsonl(&dump)?;
    assert_eq!(all, reloaded);
    println!("canonical dump round-trips: {} examples", reloaded.len());

    let sample = &all[0];
    println!("\nfirst example ({}):", sample.dialog_id);
    println!("  question: {}", sample.turns[0].question);
    println!("  gold:     {}", sample.turns[0].gold_answer);
    println!("  table:    {} rows x {} cols", sample.document.table.rows.len(), sample.document.table.header.len());
    Ok(())
}
