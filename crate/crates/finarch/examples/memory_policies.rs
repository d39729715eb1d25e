//! The two memory policies side by side: shared-pool free-form memory
//! (with its interference mode) and per-dialog structured memory (with
//! composite-row filtering).
//!
//! ```bash
//! cargo run -p finarch --example memory_policies
//! ```

use std::path::Path;
use std::sync::Arc;

use finarch::corpus::load_convfinqa;
use finarch::embed::Embedder;
use finarch::memory::{FreeformMemory, StructuredMemory};

fn main() -> finarch::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_convfinqa(&fixtures.join("convfinqa_mini.json"))?;
    let embedder = Arc::new(Embedder::fallback(384));

    // free-form: one GLOBAL pool shared by every dialog in the run
    let mut freeform = FreeformMemory::new(embedder.clone());
    for example in &corpus[..2] {
        let added = freeform.add_context(&example.document)?;
        println!("freeform: added {added} context entries from {}", example.dialog_id);
    }
    freeform.append_qa("what was the total volume in 2021?", "637")?;
    freeform.append_qa("what was the total volume in 2020?", "598")?;

    println!("\nfreeform retrieval for 'what was the total volume in 2021?':");
    for entry in freeform.retrieve("what was the total volume in 2021?", 3)? {
        println!("  ---\n  {}", entry.replace('\n', "\n  "));
    }
    println!("note: both near-duplicate Q/A entries surface; nothing deduplicates them.");

    // structured: per-dialog scope, composite rows dropped after retrieval
    let mut structured = StructuredMemory::new(embedder);
    for example in &corpus[..2] {
        let count = structured.ingest(&example.document, &example.dialog_id)?;
        println!("\nstructured: ingested {count} facts under scope {}", example.dialog_id);
    }
    let dialog = &corpus[0].dialog_id;
    println!("structured retrieval for 'total volume in 2021' in {dialog}:");
    for fact in structured.retrieve("total volume in 2021", dialog, 6)? {
        println!("  {}", fact.text);
    }
    println!("(only atomic single-attribute facts survive the composite filter)");

    // scope isolation: the other dialog's facts are unreachable
    let other = &corpus[1].dialog_id;
    let cross = structured.retrieve("total volume in 2021", other, 6)?;
    assert!(cross.iter().all(|f| !f.text.contains("total volume")));
    println!("\nscope isolation holds: {other} cannot see {dialog}'s facts");
    Ok(())
}
