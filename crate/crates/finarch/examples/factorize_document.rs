//! Decompose a document into prefixed facts at row, cell, and mixed
//! granularity, and classify composite rows.
//!
//! ```bash
//! cargo run -p finarch --example factorize_document
//! ```

use std::path::Path;

use finarch::corpus::load_finqa;
use finarch::factorize::{decompose_document, is_composite, split_sentences, Granularity};

fn main() -> finarch::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = load_finqa(&fixtures.join("finqa_mini.json"))?;
    let doc = &corpus[0].document;

    for granularity in [Granularity::Row, Granularity::Cell, Granularity::Both] {
        let facts = decompose_document(doc, granularity)?;
        println!("granularity {granularity:?}: {} facts", facts.len());
    }

    println!("\nfacts at BOTH granularity:");
    for fact in decompose_document(doc, Granularity::Both)? {
        let marker = if is_composite(&fact) { "composite" } else { "atomic" };
        println!("  [{marker:>9}] {}", fact.text);
    }

    println!("\nsentence splitting:");
    let text = "Approx. 5.2 million of the decline reflects lower rates. It grew afterwards.";
    for sentence in split_sentences(text) {
        println!("  {sentence}");
    }
    Ok(())
}
