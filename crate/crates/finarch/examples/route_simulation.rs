//! Router simulation over synthetic logs whose per-benchmark close rates
//! match the published combined-accuracy inputs, reproducing the
//! oracle-router arithmetic.
//!
//! ```bash
//! cargo run -p finarch --example route_simulation
//! ```

use finarch::corpus::Benchmark;
use finarch::llm::Verdict;
use finarch::pipelines::ArchitectureId;
use finarch::routing::{
    combined_close, render_route_report, route_keyword, route_sim_report, default_keywords,
    Router, RouterLogs,
};
use finarch::runlog::{ScoredRecord, TurnRecord};

fn record(
    bench: Benchmark,
    arch: ArchitectureId,
    dialog: &str,
    close: bool,
) -> ScoredRecord {
    ScoredRecord {
        turn: TurnRecord {
            dialog_id: dialog.into(),
            turn_index: 0,
            benchmark: bench,
            architecture: arch,
            question: "what was the value?".into(),
            gold_answer: "637".into(),
            prompt_chars: 10,
            prompt_tokens: 3,
            tokens_estimated: true,
            raw_text: "x".into(),
            latency_ms: 1,
            retrieved_fact_count: 0,
            replayed: true,
            truncated: false,
            error: None,
        },
        parse_success: true,
        parsed_value: None,
        exact: close,
        corrected_exact: close,
        corrected_close: close,
        applied_scale: 1.0,
        numeric_gold: true,
        format_violation: false,
        multi_number: false,
        judge_verdict: Some(if close { Verdict::Correct } else { Verdict::Incorrect }),
        judge_raw: None,
    }
}

fn main() -> finarch::Result<()> {
    // close-success counts per architecture: (finqa of 492, convfinqa of 1490)
    let plan = [
        (ArchitectureId::Baseline, 190u64, 711u64),
        (ArchitectureId::Rag, 153, 796),
        (ArchitectureId::Mem0Aug, 152, 709),
        (ArchitectureId::StructMem0, 210, 699),
    ];
    let mut logs = RouterLogs::new();
    for (arch, f, c) in plan {
        logs.insert(
            (Benchmark::FinQA, arch),
            (0..492).map(|i| record(Benchmark::FinQA, arch, &format!("f{i}"), (i as u64) < f)).collect(),
        );
        logs.insert(
            (Benchmark::ConvFinQA, arch),
            (0..1490).map(|i| record(Benchmark::ConvFinQA, arch, &format!("c{i}"), (i as u64) < c)).collect(),
        );
    }

    let report = route_sim_report(&logs, &Router::Oracle)?;
    print!("{}", render_route_report(&report));

    let oracle = combined_close(0.427, 492, 0.534, 1490)?;
    println!("\nclosed-form oracle check: {oracle:.4}");

    println!("\nkeyword router decisions:");
    let keywords = default_keywords();
    for question in [
        "how does that compare to last year?",
        "what was the operating margin in 2021?",
    ] {
        let decision = route_keyword(question, &keywords)?;
        println!("  {question:?} -> {} ({:?})", decision.architecture.label(), decision.signal);
    }
    Ok(())
}
