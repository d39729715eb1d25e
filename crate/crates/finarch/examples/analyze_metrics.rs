//! Aggregate a synthetic scored log: summary row with Wilson interval,
//! accuracy by turn index, cascade failure, and judge/numeric divergence.
//!
//! ```bash
//! cargo run -p finarch --example analyze_metrics
//! ```

use finarch::analysis::{
    cascade_stats, divergence_counts, summarize, turn_index_accuracy, wilson_ci, CascadeMetric,
};
use finarch::corpus::Benchmark;
use finarch::llm::Verdict;
use finarch::pipelines::ArchitectureId;
use finarch::runlog::{ScoredRecord, TurnRecord};

fn record(dialog: &str, turn: usize, close: bool, judge: Verdict) -> ScoredRecord {
    ScoredRecord {
        turn: TurnRecord {
            dialog_id: dialog.into(),
            turn_index: turn,
            benchmark: Benchmark::ConvFinQA,
            architecture: ArchitectureId::Rag,
            question: "what was the value?".into(),
            gold_answer: "637".into(),
            prompt_chars: 1800 + 40 * turn,
            prompt_tokens: 450 + 10 * turn as u64,
            tokens_estimated: false,
            raw_text: if close { "637".into() } else { "a plausible 42".into() },
            latency_ms: 900 + 37 * (turn as u64 + dialog.len() as u64),
            retrieved_fact_count: 12,
            replayed: false,
            truncated: false,
            error: None,
        },
        parse_success: true,
        parsed_value: Some(if close { 637.0 } else { 42.0 }),
        exact: close,
        corrected_exact: close,
        corrected_close: close,
        applied_scale: 1.0,
        numeric_gold: true,
        format_violation: !close,
        multi_number: false,
        judge_verdict: Some(judge),
        judge_raw: None,
    }
}

fn main() -> finarch::Result<()> {
    // 40 three-turn dialogs: turn-0 strong, later turns degrade, and a
    // slice of fluent-but-wrong turns for the divergence table
    let mut records = Vec::new();
    for d in 0..40usize {
        for t in 0..3usize {
            let close = match t {
                0 => d % 4 != 0,
                1 => d % 2 == 0,
                _ => d % 3 == 0,
            };
            let judge = if close || d % 5 == 0 { Verdict::Correct } else { Verdict::Incorrect };
            records.push(record(&format!("dlg-{d:02}"), t, close, judge));
        }
    }

    let row = summarize(&records, false)?;
    println!("summary for {} ({} turns):", row.architecture.label(), row.n);
    println!("  corrected close {:.3} (95% CI [{:.3}, {:.3}])", row.corrected_close_rate, row.corrected_close_ci.0, row.corrected_close_ci.1);
    println!("  corrected exact {:.3}  parse success {:.3}", row.corrected_exact_rate, row.parse_success_rate);
    println!("  p50 {} ms  p95 {} ms  avg prompt {:.0} chars / {:.0} tokens",
        row.p50_ms.unwrap_or(0.0), row.p95_ms.unwrap_or(0.0), row.avg_prompt_chars, row.avg_prompt_tokens);

    println!("\naccuracy by turn index:");
    for r in turn_index_accuracy(&records) {
        println!("  turn {}: {:.3} ({} of {})", r.turn_index, r.rate, r.successes, r.n);
    }

    let cascade = cascade_stats(&records, CascadeMetric::CorrectedClose);
    println!("\ncascade failure: mean {:.3} median {:.3} ({} dialogs counted, {} excluded)",
        cascade.mean_rate, cascade.median_rate, cascade.dialogs_counted, cascade.dialogs_excluded);

    let d = divergence_counts(&records);
    println!("\njudge vs numeric close:");
    println!("  judge correct / close wrong: {}", d.judge_correct_close_wrong);
    println!("  close correct / judge wrong: {}", d.close_correct_judge_wrong);
    println!("  both correct: {}  neither: {}  unjudged: {}", d.both_correct, d.neither_correct, d.missing_judge);

    let (lo, hi) = wilson_ci(row.corrected_close_successes, row.n)?;
    println!("\nwilson interval recomputed from counts: [{lo:.3}, {hi:.3}]");
    Ok(())
}
