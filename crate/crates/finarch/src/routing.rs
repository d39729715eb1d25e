//! Architecture routing: the structural history rule, the
//! keyword-heuristic router, the per-benchmark oracle, and combined
//! accuracy arithmetic over scored logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::corpus::Benchmark;
use crate::error::{Error, Result};
use crate::pipelines::{ArchitectureId, DialogueState};
use crate::runlog::ScoredRecord;

/// Default implicit-reference keyword list, shipped as data so
/// alternatives can be probed without code changes.
pub const DEFAULT_KEYWORDS_DATA: &str = include_str!("../data/implicit_reference_keywords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    HistoryEmpty,
    HistoryPresent,
    KeywordHit,
    KeywordMiss,
    OracleBenchmark,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouterDecision {
    pub architecture: ArchitectureId,
    pub signal: Signal,
}

/// History presence is the structural signal: an empty history routes to
/// structured memory, anything else to retrieval.
pub fn route_structural(_question: &str, history: &DialogueState) -> RouterDecision {
    if history.is_empty() {
        RouterDecision {
            architecture: ArchitectureId::StructMem0,
            signal: Signal::HistoryEmpty,
        }
    } else {
        RouterDecision {
            architecture: ArchitectureId::Rag,
            signal: Signal::HistoryPresent,
        }
    }
}

/// Case-insensitive whole-word/phrase match against the implicit-reference
/// list: a hit routes to RAG, a miss to structured memory.
pub fn route_keyword(question: &str, keywords: &[String]) -> Result<RouterDecision> {
    if keywords.is_empty() {
        return Err(Error::InvalidArgument("keyword list is empty".into()));
    }
    let hit = keywords.iter().any(|k| keyword_hit(question, k));
    Ok(if hit {
        RouterDecision {
            architecture: ArchitectureId::Rag,
            signal: Signal::KeywordHit,
        }
    } else {
        RouterDecision {
            architecture: ArchitectureId::StructMem0,
            signal: Signal::KeywordMiss,
        }
    })
}

fn keyword_hit(question: &str, keyword: &str) -> bool {
    let q = question.to_lowercase();
    let k = keyword.to_lowercase();
    if k.is_empty() {
        return false;
    }
    let mut start = 0;
    while let Some(pos) = q[start..].find(&k) {
        let begin = start + pos;
        let end = begin + k.len();
        let left_ok = begin == 0
            || !q[..begin].chars().next_back().is_some_and(char::is_alphanumeric);
        let right_ok = end == q.len()
            || !q[end..].chars().next().is_some_and(char::is_alphanumeric);
        if left_ok && right_ok {
            return true;
        }
        start = begin + 1;
    }
    false
}

/// The empirically strongest architecture per benchmark.
pub fn route_oracle(benchmark: Benchmark) -> ArchitectureId {
    match benchmark {
        Benchmark::FinQA => ArchitectureId::StructMem0,
        Benchmark::ConvFinQA => ArchitectureId::Rag,
    }
}

pub fn default_keywords() -> Vec<String> {
    parse_keywords(DEFAULT_KEYWORDS_DATA)
}

pub fn load_keywords(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let keywords = parse_keywords(&text);
    if keywords.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "keyword list {} is empty",
            path.display()
        )));
    }
    Ok(keywords)
}

fn parse_keywords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Sample-weighted mean of two per-benchmark rates.
pub fn combined_close(rate_f: f64, n_f: u64, rate_c: f64, n_c: u64) -> Result<f64> {
    if n_f + n_c == 0 {
        return Err(Error::InvalidArgument(
            "combined_close requires at least one sample".into(),
        ));
    }
    Ok((rate_f * n_f as f64 + rate_c * n_c as f64) / (n_f + n_c) as f64)
}

#[derive(Debug, Clone)]
pub enum Router {
    Structural,
    Keyword(Vec<String>),
    Oracle,
    Const(ArchitectureId),
}

impl Router {
    pub fn name(&self) -> String {
        match self {
            Router::Structural => "Structural (history)".into(),
            Router::Keyword(_) => "Keyword Heuristic (RAG + Struct. Mem0)".into(),
            Router::Oracle => {
                "Oracle Router (Struct. Mem0 -> FinQA; RAG -> ConvFinQA)".into()
            }
            Router::Const(arch) => arch.label().to_owned(),
        }
    }

    /// Route one turn given its structural position. History presence is
    /// derived from the turn index: turn 0 has no history.
    pub fn decide(&self, benchmark: Benchmark, turn_index: usize, question: &str) -> Result<ArchitectureId> {
        Ok(match self {
            Router::Structural => {
                if turn_index == 0 {
                    ArchitectureId::StructMem0
                } else {
                    ArchitectureId::Rag
                }
            }
            Router::Keyword(keywords) => route_keyword(question, keywords)?.architecture,
            Router::Oracle => route_oracle(benchmark),
            Router::Const(arch) => *arch,
        })
    }
}

impl std::str::FromStr for Router {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(arch) = lower.strip_prefix("const:") {
            return Ok(Router::Const(arch.parse()?));
        }
        match lower.as_str() {
            "structural" => Ok(Router::Structural),
            "keyword" => Ok(Router::Keyword(default_keywords())),
            "oracle" => Ok(Router::Oracle),
            other => Err(Error::InvalidArgument(format!(
                "unknown router `{other}` (expected structural, keyword, oracle, or const:<arch>)"
            ))),
        }
    }
}

/// Scored logs keyed by benchmark and architecture.
pub type RouterLogs = BTreeMap<(Benchmark, ArchitectureId), Vec<ScoredRecord>>;

type TurnIndex<'a> = BTreeMap<(&'a str, usize), &'a ScoredRecord>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouteBucket {
    pub successes: u64,
    pub n: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouterOutcome {
    pub per_benchmark: BTreeMap<Benchmark, RouteBucket>,
    pub combined_successes: u64,
    pub combined_n: u64,
    pub combined_close: f64,
}

/// Replay a router over scored logs: each turn takes the corrected-close
/// verdict from the record of the architecture the router picks for that
/// same (dialog, turn).
pub fn simulate_router(logs: &RouterLogs, router: &Router) -> Result<RouterOutcome> {
    if logs.is_empty() {
        return Err(Error::MissingInput("no logs to route over".into()));
    }
    let mut index: BTreeMap<(Benchmark, ArchitectureId), TurnIndex> = BTreeMap::new();
    for ((bench, arch), records) in logs {
        let map = index.entry((*bench, *arch)).or_default();
        for record in records {
            map.insert((record.turn.dialog_id.as_str(), record.turn.turn_index), record);
        }
    }
    let benchmarks: Vec<Benchmark> = {
        let mut b: Vec<Benchmark> = logs.keys().map(|(bench, _)| *bench).collect();
        b.dedup();
        b
    };
    let mut per_benchmark = BTreeMap::new();
    let mut combined_successes = 0u64;
    let mut combined_n = 0u64;
    for bench in benchmarks {
        // enumerate the turn universe from the first architecture present
        let (first_key, first_map) = index
            .iter()
            .find(|((b, _), _)| *b == bench)
            .expect("benchmark came from the key set");
        let turn_keys: Vec<(&str, usize)> = first_map.keys().cloned().collect();
        let mut successes = 0u64;
        for (dialog_id, turn_index) in &turn_keys {
            let question = &first_map[&(*dialog_id, *turn_index)].turn.question;
            let chosen = router.decide(bench, *turn_index, question)?;
            let record = index
                .get(&(bench, chosen))
                .and_then(|m| m.get(&(*dialog_id, *turn_index)))
                .ok_or_else(|| Error::MissingInput(format!(
                    "no {chosen} record for benchmark {bench}, dialog {dialog_id}, turn {turn_index} \
                     (router {} needs logs for every architecture it can choose)",
                    router.name()
                )))?;
            if record.corrected_close {
                successes += 1;
            }
        }
        let n = turn_keys.len() as u64;
        // consistency: every architecture log for this benchmark must cover
        // the same turn universe
        for ((b, arch), map) in &index {
            if *b == bench && map.len() != turn_keys.len() && (bench, *arch) != *first_key {
                return Err(Error::MissingInput(format!(
                    "log for {arch} on {bench} has {} turns, expected {}",
                    map.len(),
                    turn_keys.len()
                )));
            }
        }
        combined_successes += successes;
        combined_n += n;
        per_benchmark.insert(
            bench,
            RouteBucket {
                successes,
                n,
                rate: successes as f64 / n.max(1) as f64,
            },
        );
    }
    Ok(RouterOutcome {
        per_benchmark,
        combined_successes,
        combined_n,
        combined_close: combined_successes as f64 / combined_n.max(1) as f64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteRow {
    pub method: String,
    pub finqa_close: Option<f64>,
    pub convfinqa_close: Option<f64>,
    pub combined_close: f64,
    /// Difference against the best constant-architecture router.
    pub vs_best_single: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteSimReport {
    pub rows: Vec<RouteRow>,
    pub best_single: ArchitectureId,
}

/// The Table-VII-shaped report: each constant architecture, then the
/// requested router, all over the same scored logs.
pub fn route_sim_report(logs: &RouterLogs, router: &Router) -> Result<RouteSimReport> {
    let archs: Vec<ArchitectureId> = {
        let mut a: Vec<ArchitectureId> = logs.keys().map(|(_, arch)| *arch).collect();
        a.sort();
        a.dedup();
        a
    };
    let mut const_outcomes: Vec<(ArchitectureId, RouterOutcome)> = Vec::new();
    for arch in archs {
        const_outcomes.push((arch, simulate_router(logs, &Router::Const(arch))?));
    }
    let (best_single, best_rate) = const_outcomes
        .iter()
        .map(|(arch, outcome)| (*arch, outcome.combined_close))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::MissingInput("no constant-architecture logs".into()))?;

    let mut rows = Vec::new();
    let mut push_row = |name: String, outcome: &RouterOutcome| {
        rows.push(RouteRow {
            method: name,
            finqa_close: outcome.per_benchmark.get(&Benchmark::FinQA).map(|b| b.rate),
            convfinqa_close: outcome.per_benchmark.get(&Benchmark::ConvFinQA).map(|b| b.rate),
            combined_close: outcome.combined_close,
            vs_best_single: outcome.combined_close - best_rate,
        });
    };
    for (arch, outcome) in &const_outcomes {
        push_row(arch.label().to_owned(), outcome);
    }
    let routed = simulate_router(logs, router)?;
    push_row(router.name(), &routed);
    Ok(RouteSimReport { rows, best_single })
}

pub fn render_route_report(report: &RouteSimReport) -> String {
    let mut out = String::new();
    out.push_str("ROUTING SIMULATION (combined close accuracy)\n");
    out.push_str(&format!(
        "{:<56} {:>10} {:>10} {:>10} {:>16}\n",
        "method", "finqa", "convfinqa", "combined", "vs best single"
    ));
    let fmt_rate = |r: Option<f64>| r.map_or_else(|| "-".into(), |v| format!("{:.3}", v));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<56} {:>10} {:>10} {:>10.3} {:>+14.1}pp\n",
            row.method,
            fmt_rate(row.finqa_close),
            fmt_rate(row.convfinqa_close),
            row.combined_close,
            row.vs_best_single * 100.0,
        ));
    }
    out.push_str(&format!("best single architecture: {}\n", report.best_single.label()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Verdict;
    use crate::runlog::TurnRecord;

    #[test]
    fn structural_router_follows_history() {
        let empty = DialogueState::new();
        let d = route_structural("anything", &empty);
        assert_eq!(d.architecture, ArchitectureId::StructMem0);
        assert_eq!(d.signal, Signal::HistoryEmpty);

        let mut with_history = DialogueState::new();
        with_history.push("q1", "a1");
        let d = route_structural("anything", &with_history);
        assert_eq!(d.architecture, ArchitectureId::Rag);
        assert_eq!(d.signal, Signal::HistoryPresent);
    }

    #[test]
    fn keyword_router_spec_examples() {
        let keywords = default_keywords();
        let d = route_keyword("how does that compare to last year?", &keywords).unwrap();
        assert_eq!(d.architecture, ArchitectureId::Rag);
        assert_eq!(d.signal, Signal::KeywordHit);

        let d = route_keyword("what was the operating margin in 2021?", &keywords).unwrap();
        assert_eq!(d.architecture, ArchitectureId::StructMem0);
        assert_eq!(d.signal, Signal::KeywordMiss);

        let d = route_keyword("", &keywords).unwrap();
        assert_eq!(d.architecture, ArchitectureId::StructMem0);

        assert!(route_keyword("q", &[]).is_err());
    }

    #[test]
    fn keyword_matching_is_whole_word() {
        assert!(keyword_hit("compare the results", "compare"));
        assert!(keyword_hit("COMPARE THEM", "compare"));
        assert!(!keyword_hit("comparable margins", "compare"));
        assert!(!keyword_hit("thistle growers report", "this"));
        assert!(keyword_hit("and the following year?", "following year"));
    }

    #[test]
    fn oracle_mapping() {
        assert_eq!(route_oracle(Benchmark::FinQA), ArchitectureId::StructMem0);
        assert_eq!(route_oracle(Benchmark::ConvFinQA), ArchitectureId::Rag);
        assert!("weirdbench".parse::<Benchmark>().is_err());
    }

    // Published combined-accuracy arithmetic reproduced from per-benchmark
    // inputs with n_f = 492, n_c = 1490.
    #[test]
    fn combined_close_reproduces_published_rows() {
        let cases = [
            (0.386, 0.477, 0.455),
            (0.311, 0.534, 0.479),
            (0.309, 0.476, 0.434),
            (0.427, 0.469, 0.458),
            (0.427, 0.534, 0.508),
        ];
        for (f, c, want) in cases {
            let got = combined_close(f, 492, c, 1490).unwrap();
            assert!((got - want).abs() <= 0.001, "({f}, {c}): got {got}, want {want}");
        }
    }

    #[test]
    fn combined_close_is_a_weighted_mean() {
        assert_eq!(combined_close(0.3, 100, 0.3, 900).unwrap(), 0.3);
        assert!(combined_close(0.5, 0, 0.5, 0).is_err());
        // boundary: one side empty
        assert_eq!(combined_close(0.9, 10, 0.1, 0).unwrap(), 0.9);
    }

    pub(crate) fn scored_for(
        bench: Benchmark,
        arch: ArchitectureId,
        dialog: &str,
        turn: usize,
        close: bool,
    ) -> ScoredRecord {
        ScoredRecord {
            turn: TurnRecord {
                dialog_id: dialog.into(),
                turn_index: turn,
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

    /// Logs where `arch` answers dialog turns correctly iff the turn index
    /// is in its winning set.
    fn two_arch_logs() -> RouterLogs {
        let mut logs = RouterLogs::new();
        for arch in [ArchitectureId::Rag, ArchitectureId::StructMem0] {
            let mut records = Vec::new();
            for d in 0..4 {
                for t in 0..3 {
                    // structmem wins turn 0, rag wins later turns
                    let close = match arch {
                        ArchitectureId::StructMem0 => t == 0,
                        ArchitectureId::Rag => t > 0,
                        _ => unreachable!(),
                    };
                    records.push(scored_for(
                        Benchmark::ConvFinQA,
                        arch,
                        &format!("d{d}"),
                        t,
                        close,
                    ));
                }
            }
            logs.insert((Benchmark::ConvFinQA, arch), records);
        }
        logs
    }

    #[test]
    fn structural_router_takes_turn0_from_structmem_and_rest_from_rag() {
        let logs = two_arch_logs();
        let outcome = simulate_router(&logs, &Router::Structural).unwrap();
        // structmem wins every turn 0, rag wins every later turn
        assert_eq!(outcome.combined_close, 1.0);
        let rag_only = simulate_router(&logs, &Router::Const(ArchitectureId::Rag)).unwrap();
        assert!((rag_only.combined_close - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_router_reproduces_that_arch_rate() {
        let logs = two_arch_logs();
        let outcome = simulate_router(&logs, &Router::Const(ArchitectureId::StructMem0)).unwrap();
        let records = &logs[&(Benchmark::ConvFinQA, ArchitectureId::StructMem0)];
        let expected = records.iter().filter(|r| r.corrected_close).count() as f64
            / records.len() as f64;
        assert_eq!(outcome.combined_close, expected);
    }

    #[test]
    fn missing_arch_log_is_an_error() {
        let mut logs = two_arch_logs();
        logs.remove(&(Benchmark::ConvFinQA, ArchitectureId::Rag));
        let err = simulate_router(&logs, &Router::Structural).unwrap_err();
        assert!(err.to_string().contains("rag"), "{err}");
    }

    #[test]
    fn router_parsing() {
        assert!(matches!("structural".parse::<Router>().unwrap(), Router::Structural));
        assert!(matches!("oracle".parse::<Router>().unwrap(), Router::Oracle));
        assert!(matches!(
            "const:rag".parse::<Router>().unwrap(),
            Router::Const(ArchitectureId::Rag)
        ));
        match "keyword".parse::<Router>().unwrap() {
            Router::Keyword(k) => assert!(k.contains(&"following year".to_owned())),
            other => panic!("{other:?}"),
        }
        assert!("nope".parse::<Router>().is_err());
    }
}
