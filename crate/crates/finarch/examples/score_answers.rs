//! Symbolic numeric decoding: last-token extraction, accounting
//! negatives, percent/fraction harmonization, and precision-aware
//! tolerance.
//!
//! ```bash
//! cargo run -p finarch --example score_answers
//! ```

use finarch::scoring::{
    extract_numeric, format_violation, judge_parse, multi_number, parse_gold, tolerance, verdict,
    GoldValue, ScoringConfig, ToleranceConfig,
};

fn main() {
    println!("extraction:");
    for text in [
        "The decline was (1,234)",
        "growth of 4.5% then the final answer is 21.07",
        "$1,234.56 per share",
        "no numerals here",
    ] {
        match extract_numeric(text) {
            Some(p) => println!(
                "  {text:?} -> value {} (decimals {}, percent {})",
                p.value, p.decimals, p.percent_flag
            ),
            None => println!("  {text:?} -> no numeric token"),
        }
    }

    println!("\ntolerance (gold-precision aware):");
    let cfg = ToleranceConfig::default();
    for gold in ["637", "21.1%", "0.0", "1234.56"] {
        if let GoldValue::Numeric(g) = parse_gold(gold) {
            println!("  gold {gold:>8} -> tolerance {:.4}", tolerance(&g, &cfg));
        }
    }

    println!("\nverdicts:");
    let scoring = ScoringConfig::default();
    let cases = [
        ("0.12", "what was the tax rate?", "12%"),
        ("0.12", "what was the value?", "12"),
        ("the ratio is 21.14", "what percentage?", "21.1%"),
        ("between 3 and 5, probably 4", "how many segments?", "4"),
    ];
    for (pred, question, gold) in cases {
        let v = verdict(pred, question, gold, &scoring);
        println!(
            "  pred {pred:?} vs gold {gold:?}: exact {} corrected_exact {} corrected_close {} scale {}",
            v.exact, v.corrected_exact, v.corrected_close, v.applied_scale
        );
    }

    println!("\nformat diagnostics:");
    for text in ["The answer is 42.", "42 is likely but verify", "between 3 and 5"] {
        println!(
            "  {text:?}: format_violation {} multi_number {}",
            format_violation(text),
            multi_number(text)
        );
    }

    println!("\njudge parsing:");
    for raw in ["CORRECT", "This is incorrect.", "hard to say"] {
        println!("  {raw:?} -> {:?}", judge_parse(raw).verdict);
    }
}
