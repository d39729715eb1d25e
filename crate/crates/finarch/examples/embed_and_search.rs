//! Embed facts with the deterministic fallback embedder, cache them on
//! disk, and run scoped top-k cosine search.
//!
//! ```bash
//! cargo run -p finarch --example embed_and_search
//! ```

use std::sync::Arc;

use finarch::embed::Embedder;
use finarch::store::VectorStore;

fn main() -> finarch::Result<()> {
    let cache = tempfile::tempdir().expect("tempdir");
    let embedder = Arc::new(Embedder::fallback(384).with_cache_dir(cache.path()));

    let facts = [
        "TABLE: total volume | 2021 = 637",
        "TABLE: total volume | 2020 = 598",
        "TABLE: operating margin | 2020 = 12.5%",
        "TABLE: net revenue | 2021 = 1,391",
        "PRE: Consolidated revenue grew across both operating segments.",
    ];
    let mut store = VectorStore::new();
    for (i, fact) in facts.iter().enumerate() {
        let scope = if i < 3 { "dialog-a" } else { "dialog-b" };
        store.add(scope, fact.to_string(), embedder.embed_text(fact)?)?;
    }

    let query = "what was total volume in 2021?";
    let q = embedder.embed_text(query)?;
    println!("query: {query}\n");
    println!("all scopes, k=3:");
    for hit in store.search(None, &q, 3)? {
        println!("  {:>6.3}  {}", hit.score, hit.item);
    }
    println!("\nscope dialog-a only, k=3:");
    for hit in store.search(Some("dialog-a"), &q, 3)? {
        println!("  {:>6.3}  {}", hit.score, hit.item);
    }

    // cached embeddings are byte-identical on the second call
    let again = embedder.embed_text(query)?;
    assert_eq!(q.vector, again.vector);
    println!("\ncache hit returned an identical vector (norm {:.9})", again.l2_norm());
    Ok(())
}
