//! Symbolic numerical decoding and per-turn verdicts.
//!
//! The decoder extracts the last numeric token from free-form output
//! (comma-formatted, parenthetical accounting negatives, currency symbols,
//! trailing percent), harmonizes percent/fraction scale when the question
//! or gold answer implies percent context, and applies a
//! gold-precision-aware tolerance. It runs identically over every
//! architecture's output.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{JudgeVerdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedNumber {
    pub value: f64,
    /// The token carried a '%'.
    pub percent_flag: bool,
    /// Fractional digits in the source token.
    pub decimals: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GoldValue {
    Numeric(ParsedNumber),
    /// Yes/no style golds; scored by case-insensitive substring match and
    /// excluded from numeric-only analyses.
    NonNumeric(String),
}

/// The four tolerance constants: the half-ulp floor factor and the
/// per-precision relative terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub half_ulp_factor: f64,
    pub rel_d0: f64,
    pub rel_d1: f64,
    pub rel_multi: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            half_ulp_factor: 0.5,
            rel_d0: 0.005,
            rel_d1: 0.002,
            rel_multi: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub tolerance: ToleranceConfig,
    /// Extends the corrected candidate set with x1000 / /1000 for scale
    /// ablations. Off by default: only percent harmonization is standard.
    pub thousands_candidates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub parse_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<ParsedNumber>,
    /// Rounding equality at gold precision with no candidate scaling.
    pub exact: bool,
    /// Some scale candidate rounds to gold at gold precision.
    pub corrected_exact: bool,
    /// Some scale candidate falls within the gold tolerance.
    pub corrected_close: bool,
    /// Scale factor of the matching candidate (1 if none matched).
    pub applied_scale: f64,
    /// False for yes/no style golds scored by substring match.
    pub numeric_gold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeVerdict>,
}

static NUM_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\(\s*[$€£¥]?\s*[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?\s*%?\s*\)%?|[+-]?[$€£¥]?[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?%?",
    )
    .expect("numeric token regex")
});

/// Extract the last numeric token. Parentheses negate
/// (accounting style), commas are stripped, '%' sets the percent flag with
/// the value kept as written. Returns `None` when the text has no numeric
/// token; never fails.
pub fn extract_numeric(text: &str) -> Option<ParsedNumber> {
    NUM_TOKEN.find_iter(text).last().map(|m| parse_token(m.as_str()))
}

/// Number of numeric tokens in the text.
pub fn count_numeric_tokens(text: &str) -> usize {
    NUM_TOKEN.find_iter(text).count()
}

/// More than one numeric token in the response.
pub fn multi_number(text: &str) -> bool {
    count_numeric_tokens(text) > 1
}

/// True iff the response does not end — modulo trailing whitespace and
/// punctuation — with a numeric token.
pub fn format_violation(text: &str) -> bool {
    const TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', ')', ']', '}', '*'];
    match NUM_TOKEN.find_iter(text).last() {
        None => true,
        Some(m) => text[m.end()..]
            .chars()
            .any(|c| !c.is_whitespace() && !TRAILING.contains(&c)),
    }
}

fn parse_token(token: &str) -> ParsedNumber {
    let parenthetical = token.starts_with('(');
    let percent_flag = token.contains('%');
    let negative = parenthetical || token.contains('-');
    let core: String = token.chars().filter(|c| c.is_ascii_digit() || *c == '.').collect();
    let decimals = core
        .split_once('.')
        .map(|(_, frac)| frac.len() as u32)
        .unwrap_or(0);
    let magnitude: f64 = core.parse().unwrap_or(0.0);
    ParsedNumber {
        value: if negative { -magnitude } else { magnitude },
        percent_flag,
        decimals,
    }
}

/// Apply the same extraction rules to the gold string; golds without a
/// numeric token (yes/no) are flagged non-numeric.
pub fn parse_gold(gold: &str) -> GoldValue {
    match extract_numeric(gold) {
        Some(parsed) => GoldValue::Numeric(parsed),
        None => GoldValue::NonNumeric(gold.trim().to_owned()),
    }
}

/// Percent context holds when the gold carries '%' or the question
/// mentions percent/percentage or a '%' sign.
pub fn percent_context(question: &str, gold: &ParsedNumber) -> bool {
    if gold.percent_flag {
        return true;
    }
    let q = question.to_lowercase();
    q.contains('%') || q.contains("percent")
}

/// Scale candidates considered by the corrected metrics: the value as
/// written, plus x100 / /100 under percent context.
pub fn candidate_set(pred: &ParsedNumber, percent_ctx: bool) -> Vec<f64> {
    candidate_scales(percent_ctx, false)
        .into_iter()
        .map(|s| pred.value * s)
        .fold(Vec::new(), |mut acc, v| {
            if !acc.contains(&v) {
                acc.push(v);
            }
            acc
        })
}

fn candidate_scales(percent_ctx: bool, thousands: bool) -> Vec<f64> {
    let mut scales = vec![1.0];
    if percent_ctx {
        scales.push(100.0);
        scales.push(0.01);
    }
    if thousands {
        scales.push(1000.0);
        scales.push(0.001);
    }
    scales
}

/// Gold-precision-aware tolerance: a half-ulp absolute floor at the gold's
/// printed precision, against a relative term that loosens for coarse
/// golds.
pub fn tolerance(gold: &ParsedNumber, cfg: &ToleranceConfig) -> f64 {
    let d = gold.decimals;
    let floor = cfg.half_ulp_factor * 10f64.powi(-(d as i32));
    let rel = match d {
        0 => cfg.rel_d0,
        1 => cfg.rel_d1,
        _ => cfg.rel_multi,
    };
    floor.max(rel * gold.value.abs())
}

/// Rounding equality at the gold's printed precision (half away from
/// zero).
fn rounds_to(value: f64, gold: &ParsedNumber) -> bool {
    let scale = 10f64.powi(gold.decimals as i32);
    (value * scale).round() == (gold.value * scale).round()
}

/// Score one prediction against one gold answer.
pub fn verdict(pred_text: &str, question: &str, gold_text: &str, cfg: &ScoringConfig) -> MatchVerdict {
    let parsed = extract_numeric(pred_text);
    let parse_success = parsed.is_some();
    match parse_gold(gold_text) {
        GoldValue::NonNumeric(g) => {
            let matched = !g.is_empty()
                && pred_text.to_lowercase().contains(&g.to_lowercase());
            MatchVerdict {
                parse_success,
                parsed,
                exact: matched,
                corrected_exact: matched,
                corrected_close: matched,
                applied_scale: 1.0,
                numeric_gold: false,
                judge: None,
            }
        }
        GoldValue::Numeric(gold) => {
            let Some(pred) = parsed else {
                return MatchVerdict {
                    parse_success: false,
                    parsed: None,
                    exact: false,
                    corrected_exact: false,
                    corrected_close: false,
                    applied_scale: 1.0,
                    numeric_gold: true,
                    judge: None,
                };
            };
            let ctx = percent_context(question, &gold);
            let tol = tolerance(&gold, &cfg.tolerance);
            let candidates: Vec<(f64, f64)> = candidate_scales(ctx, cfg.thousands_candidates)
                .into_iter()
                .map(|s| (pred.value * s, s))
                .collect();
            let exact = rounds_to(pred.value, &gold);
            let exact_scale = candidates.iter().find(|(v, _)| rounds_to(*v, &gold));
            let close_scale = candidates.iter().find(|(v, _)| (*v - gold.value).abs() <= tol);
            MatchVerdict {
                parse_success: true,
                parsed: Some(pred),
                exact,
                corrected_exact: exact_scale.is_some(),
                corrected_close: close_scale.is_some(),
                applied_scale: exact_scale.or(close_scale).map_or(1.0, |(_, s)| *s),
                numeric_gold: true,
                judge: None,
            }
        }
    }
}

/// Case-insensitive verdict scan. INCORRECT is checked first because
/// CORRECT is its substring.
pub fn judge_parse(raw: &str) -> JudgeVerdict {
    let upper = raw.to_uppercase();
    let verdict = if upper.contains("INCORRECT") {
        Verdict::Incorrect
    } else if upper.contains("CORRECT") {
        Verdict::Correct
    } else {
        Verdict::Unparseable
    };
    JudgeVerdict {
        verdict,
        raw: raw.to_owned(),
    }
}
