//! Aggregation of scored logs into the report statistics: rates with
//! Wilson intervals, latency percentiles, prompt/token averages,
//! accuracy by turn index, cascade failure, judge/numeric divergence, and
//! the percent/non-percent question split.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::Benchmark;
use crate::error::{Error, Result};
use crate::llm::Verdict;
use crate::pipelines::ArchitectureId;
use crate::runlog::{RunHeader, ScoredRecord};
use crate::scoring::{parse_gold, percent_context, GoldValue};

pub const WILSON_Z95: f64 = 1.96;

/// Wilson score interval at z = 1.96.
pub fn wilson_ci(successes: u64, n: u64) -> Result<(f64, f64)> {
    wilson_ci_with_z(successes, n, WILSON_Z95)
}

pub fn wilson_ci_with_z(successes: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("wilson_ci requires n >= 1".into()));
    }
    if successes > n {
        return Err(Error::InvalidArgument(format!(
            "successes {successes} exceed n {n}"
        )));
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Nearest-rank percentile: element at index ceil(q/100 * n) - 1 of the
/// sorted list.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of empty list".into()));
    }
    if !(0.0 < q && q <= 100.0) {
        return Err(Error::InvalidArgument(format!("percentile q {q} out of (0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q / 100.0 * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurnIndexRow {
    pub turn_index: usize,
    pub successes: u64,
    pub n: u64,
    pub rate: f64,
}

/// Corrected-close rate per turn index, rows for indices 0..=max.
pub fn turn_index_accuracy(records: &[ScoredRecord]) -> Vec<TurnIndexRow> {
    if records.is_empty() {
        return Vec::new();
    }
    let max = records.iter().map(|r| r.turn.turn_index).max().unwrap_or(0);
    let mut rows: Vec<TurnIndexRow> = (0..=max)
        .map(|turn_index| TurnIndexRow {
            turn_index,
            successes: 0,
            n: 0,
            rate: 0.0,
        })
        .collect();
    for record in records {
        let row = &mut rows[record.turn.turn_index];
        row.n += 1;
        if record.corrected_close {
            row.successes += 1;
        }
    }
    for row in &mut rows {
        if row.n > 0 {
            row.rate = row.successes as f64 / row.n as f64;
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeMetric {
    CorrectedClose,
    Exact,
}

impl std::str::FromStr for CascadeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "corrected_close" | "close" => Ok(CascadeMetric::CorrectedClose),
            "exact" => Ok(CascadeMetric::Exact),
            other => Err(Error::InvalidArgument(format!(
                "unknown cascade metric `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeStats {
    pub mean_rate: f64,
    pub median_rate: f64,
    pub dialogs_counted: u64,
    pub dialogs_excluded: u64,
}

/// Post-first-failure failure rate per dialog, averaged over dialogs.
///
/// A dialog enters the statistic when its earliest failing turn has at
/// least one later turn; its rate is the failure share among those later
/// turns. Dialogs with no failure, or whose only failure is the final
/// turn, are excluded and counted.
pub fn cascade_stats(records: &[ScoredRecord], metric: CascadeMetric) -> CascadeStats {
    let mut dialogs: BTreeMap<&str, Vec<(usize, bool)>> = BTreeMap::new();
    for record in records {
        let pass = match metric {
            CascadeMetric::CorrectedClose => record.corrected_close,
            CascadeMetric::Exact => record.exact,
        };
        dialogs
            .entry(record.turn.dialog_id.as_str())
            .or_default()
            .push((record.turn.turn_index, pass));
    }
    let mut rates = Vec::new();
    let mut excluded = 0u64;
    for (_, mut turns) in dialogs {
        turns.sort_by_key(|(idx, _)| *idx);
        let first_fail = turns.iter().position(|(_, pass)| !pass);
        match first_fail {
            Some(t) if t + 1 < turns.len() => {
                let later = &turns[t + 1..];
                let failures = later.iter().filter(|(_, pass)| !pass).count();
                rates.push(failures as f64 / later.len() as f64);
            }
            _ => excluded += 1,
        }
    }
    let counted = rates.len() as u64;
    if rates.is_empty() {
        return CascadeStats {
            mean_rate: 0.0,
            median_rate: 0.0,
            dialogs_counted: 0,
            dialogs_excluded: excluded,
        };
    }
    rates.sort_by(f64::total_cmp);
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let mid = rates.len() / 2;
    let median_rate = if rates.len() % 2 == 1 {
        rates[mid]
    } else {
        (rates[mid - 1] + rates[mid]) / 2.0
    };
    CascadeStats {
        mean_rate,
        median_rate,
        dialogs_counted: counted,
        dialogs_excluded: excluded,
    }
}

/// Judge-vs-close 2x2 confusion counts. Records without a judge verdict
/// are counted separately, never silently dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DivergenceCounts {
    pub judge_correct_close_wrong: u64,
    pub close_correct_judge_wrong: u64,
    pub both_correct: u64,
    pub neither_correct: u64,
    pub missing_judge: u64,
}

impl DivergenceCounts {
    pub fn judged_total(&self) -> u64 {
        self.judge_correct_close_wrong
            + self.close_correct_judge_wrong
            + self.both_correct
            + self.neither_correct
    }

    pub fn total(&self) -> u64 {
        self.judged_total() + self.missing_judge
    }
}

pub fn divergence_counts(records: &[ScoredRecord]) -> DivergenceCounts {
    let mut counts = DivergenceCounts::default();
    for record in records {
        let close = record.corrected_close;
        match record.judge_verdict {
            None => counts.missing_judge += 1,
            Some(v) => {
                let judge_correct = v == Verdict::Correct;
                match (judge_correct, close) {
                    (true, true) => counts.both_correct += 1,
                    (true, false) => counts.judge_correct_close_wrong += 1,
                    (false, true) => counts.close_correct_judge_wrong += 1,
                    (false, false) => counts.neither_correct += 1,
                }
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BucketRate {
    pub successes: u64,
    pub n: u64,
    pub rate: f64,
}

fn bucket(successes: u64, n: u64) -> Option<BucketRate> {
    (n > 0).then(|| BucketRate {
        successes,
        n,
        rate: successes as f64 / n as f64,
    })
}

/// Corrected-close accuracy partitioned by percent context. Non-numeric
/// golds cannot enter the partition and are counted separately. Empty
/// buckets are reported as absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuestionTypeSplit {
    pub percent: Option<BucketRate>,
    pub non_percent: Option<BucketRate>,
    pub non_numeric_gold_n: u64,
}

pub fn question_type_split(records: &[ScoredRecord]) -> QuestionTypeSplit {
    let mut pct = (0u64, 0u64);
    let mut plain = (0u64, 0u64);
    let mut non_numeric = 0u64;
    for record in records {
        let gold = match parse_gold(&record.turn.gold_answer) {
            GoldValue::Numeric(g) => g,
            GoldValue::NonNumeric(_) => {
                non_numeric += 1;
                continue;
            }
        };
        let target = if percent_context(&record.turn.question, &gold) {
            &mut pct
        } else {
            &mut plain
        };
        target.1 += 1;
        if record.corrected_close {
            target.0 += 1;
        }
    }
    QuestionTypeSplit {
        percent: bucket(pct.0, pct.1),
        non_percent: bucket(plain.0, plain.1),
        non_numeric_gold_n: non_numeric,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub architecture: ArchitectureId,
    pub benchmark: Benchmark,
    pub n: u64,
    pub exact_rate: f64,
    pub corrected_exact_rate: f64,
    pub corrected_close_rate: f64,
    pub corrected_close_successes: u64,
    pub corrected_close_ci: (f64, f64),
    /// Judge-correct share of all records; absent when nothing was judged.
    pub judge_rate: Option<f64>,
    pub parse_success_rate: f64,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub avg_prompt_chars: f64,
    pub avg_prompt_tokens: f64,
    pub format_violation_rate: f64,
    pub multi_number_rate: f64,
    pub non_numeric_gold_n: u64,
    pub replayed_n: u64,
}

/// Aggregate one single-architecture scored log into its metric row.
/// Replayed records are excluded from latency percentiles unless
/// `include_replayed_latency` is set; their recorded latency is not
/// inference latency.
pub fn summarize(records: &[ScoredRecord], include_replayed_latency: bool) -> Result<MetricRow> {
    let first = records.first().ok_or_else(|| {
        Error::InvalidArgument("cannot summarize an empty record set".into())
    })?;
    let architecture = first.turn.architecture;
    let benchmark = first.turn.benchmark;
    if records.iter().any(|r| r.turn.architecture != architecture) {
        return Err(Error::InvalidArgument(
            "summarize expects a single-architecture record set".into(),
        ));
    }
    let n = records.len() as u64;
    let count = |f: &dyn Fn(&ScoredRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    let close_successes = count(&|r| r.corrected_close);
    let judged = count(&|r| r.judge_verdict.is_some());
    let latencies: Vec<f64> = records
        .iter()
        .filter(|r| (include_replayed_latency || !r.turn.replayed) && r.turn.error.is_none())
        .map(|r| r.turn.latency_ms as f64)
        .collect();
    let (p50_ms, p95_ms) = if latencies.is_empty() {
        (None, None)
    } else {
        (Some(percentile(&latencies, 50.0)?), Some(percentile(&latencies, 95.0)?))
    };
    Ok(MetricRow {
        architecture,
        benchmark,
        n,
        exact_rate: count(&|r| r.exact) as f64 / n as f64,
        corrected_exact_rate: count(&|r| r.corrected_exact) as f64 / n as f64,
        corrected_close_rate: close_successes as f64 / n as f64,
        corrected_close_successes: close_successes,
        corrected_close_ci: wilson_ci(close_successes, n)?,
        judge_rate: (judged > 0)
            .then(|| count(&|r| r.judge_verdict == Some(Verdict::Correct)) as f64 / n as f64),
        parse_success_rate: count(&|r| r.parse_success) as f64 / n as f64,
        p50_ms,
        p95_ms,
        avg_prompt_chars: records.iter().map(|r| r.turn.prompt_chars as f64).sum::<f64>()
            / n as f64,
        avg_prompt_tokens: records.iter().map(|r| r.turn.prompt_tokens as f64).sum::<f64>()
            / n as f64,
        format_violation_rate: count(&|r| r.format_violation) as f64 / n as f64,
        multi_number_rate: count(&|r| r.multi_number) as f64 / n as f64,
        non_numeric_gold_n: count(&|r| !r.numeric_gold),
        replayed_n: count(&|r| r.turn.replayed),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ArchitectureAnalysis {
    pub row: MetricRow,
    pub turn_accuracy: Vec<TurnIndexRow>,
    pub cascade: CascadeStats,
    pub divergence: DivergenceCounts,
    pub question_split: QuestionTypeSplit,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkAnalysis {
    pub benchmark: Benchmark,
    pub architectures: Vec<ArchitectureAnalysis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub template_hash: String,
    pub config_hash: String,
    pub benchmarks: Vec<BenchmarkAnalysis>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub include_replayed_latency: bool,
    pub cascade_metric: CascadeMetric,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            include_replayed_latency: false,
            cascade_metric: CascadeMetric::CorrectedClose,
        }
    }
}

/// Aggregate a set of scored logs (one per architecture/benchmark).
/// Mixing logs produced under different template or config hashes is an
/// error.
pub fn analyze(
    logs: &[(RunHeader, Vec<ScoredRecord>)],
    opts: AnalysisOptions,
) -> Result<AnalysisReport> {
    let first = logs.first().ok_or_else(|| {
        Error::MissingInput("no scored logs to analyze".into())
    })?;
    for (header, _) in logs {
        if header.template_hash != first.0.template_hash {
            return Err(Error::HashMismatch {
                msg: format!(
                    "template hash {} does not match {}",
                    header.template_hash, first.0.template_hash
                ),
            });
        }
        if header.config_hash != first.0.config_hash {
            return Err(Error::HashMismatch {
                msg: format!(
                    "config hash {} does not match {}",
                    header.config_hash, first.0.config_hash
                ),
            });
        }
    }
    let mut by_benchmark: BTreeMap<Benchmark, Vec<&(RunHeader, Vec<ScoredRecord>)>> =
        BTreeMap::new();
    for log in logs {
        by_benchmark.entry(log.0.benchmark).or_default().push(log);
    }
    let mut benchmarks = Vec::new();
    for (benchmark, logs) in by_benchmark {
        let mut architectures = Vec::new();
        let mut sorted = logs;
        sorted.sort_by_key(|(h, _)| h.architecture);
        for (_, records) in sorted {
            if records.is_empty() {
                continue;
            }
            architectures.push(ArchitectureAnalysis {
                row: summarize(records, opts.include_replayed_latency)?,
                turn_accuracy: turn_index_accuracy(records),
                cascade: cascade_stats(records, opts.cascade_metric),
                divergence: divergence_counts(records),
                question_split: question_type_split(records),
            });
        }
        benchmarks.push(BenchmarkAnalysis {
            benchmark,
            architectures,
        });
    }
    Ok(AnalysisReport {
        template_hash: first.0.template_hash.clone(),
        config_hash: first.0.config_hash.clone(),
        benchmarks,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn opt_ms(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.0}"))
}

/// Human-readable report: per-benchmark metric, turn-accuracy, cascade,
/// efficiency, divergence, and question-type tables.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let push_line = |out: &mut String, line: String| {
        out.push_str(&line);
        out.push('\n');
    };
    push_line(&mut out, "ANALYSIS REPORT".into());
    push_line(&mut out, format!("template_hash: {}", report.template_hash));
    push_line(&mut out, format!("config_hash:   {}", report.config_hash));
    for bench in &report.benchmarks {
        push_line(&mut out, String::new());
        push_line(&mut out, format!("== {} ==", bench.benchmark));
        push_line(
            &mut out,
            format!(
                "{:<16} {:>6} {:>9} {:>11} {:>11} {:>8} {:>8} {:>9} {:>9} {:>11} {:>11}",
                "method", "n", "exact", "corr.exact", "corr.close", "judge", "parse",
                "p50(ms)", "p95(ms)", "avg chars", "avg tokens"
            ),
        );
        for arch in &bench.architectures {
            let r = &arch.row;
            push_line(
                &mut out,
                format!(
                    "{:<16} {:>6} {:>9} {:>11} {:>11} {:>8} {:>8} {:>9} {:>9} {:>11.0} {:>11.0}",
                    r.architecture.label(),
                    r.n,
                    pct(r.exact_rate),
                    pct(r.corrected_exact_rate),
                    pct(r.corrected_close_rate),
                    r.judge_rate.map_or_else(|| "-".into(), pct),
                    pct(r.parse_success_rate),
                    opt_ms(r.p50_ms),
                    opt_ms(r.p95_ms),
                    r.avg_prompt_chars,
                    r.avg_prompt_tokens,
                ),
            );
        }
        push_line(&mut out, String::new());
        for arch in &bench.architectures {
            let r = &arch.row;
            push_line(
                &mut out,
                format!(
                    "{:<16} close 95% CI [{}, {}]  format violations {}  multi-number {}  non-numeric golds {}",
                    r.architecture.label(),
                    pct(r.corrected_close_ci.0),
                    pct(r.corrected_close_ci.1),
                    pct(r.format_violation_rate),
                    pct(r.multi_number_rate),
                    r.non_numeric_gold_n,
                ),
            );
        }
        let multi_turn = bench
            .architectures
            .iter()
            .any(|a| a.turn_accuracy.len() > 1);
        if multi_turn {
            push_line(&mut out, String::new());
            push_line(&mut out, "accuracy by turn index (corrected close):".into());
            for arch in &bench.architectures {
                let cells: Vec<String> = arch
                    .turn_accuracy
                    .iter()
                    .map(|row| format!("turn {} {} (n={})", row.turn_index, pct(row.rate), row.n))
                    .collect();
                push_line(
                    &mut out,
                    format!("{:<16} {}", arch.row.architecture.label(), cells.join("  ")),
                );
            }
            push_line(&mut out, String::new());
            push_line(&mut out, "cascade failure:".into());
            for arch in &bench.architectures {
                let c = &arch.cascade;
                push_line(
                    &mut out,
                    format!(
                        "{:<16} mean {} median {} (counted {}, excluded {})",
                        arch.row.architecture.label(),
                        pct(c.mean_rate),
                        pct(c.median_rate),
                        c.dialogs_counted,
                        c.dialogs_excluded,
                    ),
                );
            }
        }
        push_line(&mut out, String::new());
        push_line(&mut out, "judge vs numeric close (divergence):".into());
        for arch in &bench.architectures {
            let d = &arch.divergence;
            let total = d.judged_total().max(1) as f64;
            push_line(
                &mut out,
                format!(
                    "{:<16} judge+/close- {} ({})  judge-/close+ {} ({})  both {} ({})  neither {} ({})  unjudged {}",
                    arch.row.architecture.label(),
                    d.judge_correct_close_wrong,
                    pct(d.judge_correct_close_wrong as f64 / total),
                    d.close_correct_judge_wrong,
                    pct(d.close_correct_judge_wrong as f64 / total),
                    d.both_correct,
                    pct(d.both_correct as f64 / total),
                    d.neither_correct,
                    pct(d.neither_correct as f64 / total),
                    d.missing_judge,
                ),
            );
        }
        push_line(&mut out, String::new());
        push_line(&mut out, "accuracy by question type (corrected close):".into());
        for arch in &bench.architectures {
            let q = &arch.question_split;
            let fmt_bucket = |b: &Option<BucketRate>| {
                b.map_or_else(
                    || "absent".to_string(),
                    |b| format!("{} (n={})", pct(b.rate), b.n),
                )
            };
            push_line(
                &mut out,
                format!(
                    "{:<16} percent {}  non-percent {}",
                    arch.row.architecture.label(),
                    fmt_bucket(&q.percent),
                    fmt_bucket(&q.non_percent),
                ),
            );
        }
    }
    out
}

/// Overall corrected-close rate recomputed from per-index counts; used to
/// assert the weighted-consistency invariant.
pub fn weighted_close_rate(rows: &[TurnIndexRow]) -> Option<f64> {
    let n: u64 = rows.iter().map(|r| r.n).sum();
    let successes: u64 = rows.iter().map(|r| r.successes).sum();
    (n > 0).then(|| successes as f64 / n as f64)
}
