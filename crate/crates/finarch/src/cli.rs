//! Command-line entry points: ingest, run, score, analyze, route-sim,
//! report. Flags override config-file values; `MODEL_ENDPOINT` overrides
//! the configured endpoint.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::analysis::{self, AnalysisOptions, AnalysisReport};
use crate::config::RunConfig;
use crate::corpus::{self, Benchmark, Severity};
use crate::error::{Error, Result};
use crate::llm::{GenParams, LlmClient, ReplayMode, Transcript};
use crate::pipelines::{self, template_hash, ArchitectureId, PipelineConfig, RunServices};
use crate::routing::{self, Router, RouterLogs, RouteSimReport};
use crate::runlog::{
    group_by_dialog, read_run_log, read_scored_log, write_scored_log, RunHeader,
    RunLogWriter, ScoredRecord, ScoringMeta, LOG_VERSION,
};
use crate::scoring;

#[derive(Debug, Parser)]
#[command(name = "finarch", version, about = "Financial QA architecture evaluation harness")]
pub struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, validate, and canonicalize dataset files.
    Ingest {
        /// FinQA source JSON.
        #[arg(long)]
        finqa: Option<PathBuf>,
        /// ConvFinQA source JSON.
        #[arg(long)]
        convfinqa: Option<PathBuf>,
        /// Output directory for canonical corpus files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run architectures over an ingested corpus, writing a JSONL run log.
    Run {
        /// baseline | rag | mem0 | structmem | all
        #[arg(long)]
        arch: Option<String>,
        /// finqa | convfinqa
        #[arg(long)]
        dataset: Option<Benchmark>,
        /// Retrieval depth per query.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// off | record | strict
        #[arg(long)]
        replay: Option<ReplayMode>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Append verdict columns to run logs (input log -> scored log).
    Score {
        /// Run logs to score; defaults to every run_*.jsonl in the output
        /// directory.
        #[arg(long)]
        log: Vec<PathBuf>,
        /// Also obtain judge verdicts from the model endpoint.
        #[arg(long)]
        judge: bool,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        replay: Option<ReplayMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate scored logs into metric tables.
    Analyze {
        /// Scored logs (files or directories).
        #[arg(long)]
        logs: Vec<PathBuf>,
        /// Machine-readable summary path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Human-readable report path.
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate an architecture router over scored logs.
    RouteSim {
        /// structural | keyword | oracle | const:<arch>
        #[arg(long)]
        router: String,
        /// Directory holding scored logs for every routable architecture.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Keyword list override for the keyword router.
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundle analysis and routing into one document.
    Report {
        /// Directory holding scored logs (defaults to the output dir).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    match cli.command {
        Command::Ingest { finqa, convfinqa, out } => {
            if let Some(p) = finqa {
                cfg.finqa_path = Some(p);
            }
            if let Some(p) = convfinqa {
                cfg.convfinqa_path = Some(p);
            }
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            cmd_ingest(&cfg).map(|_| ())
        }
        Command::Run {
            arch,
            dataset,
            k,
            endpoint,
            model,
            replay,
            workers,
            out,
            transcript,
        } => {
            if let Some(b) = dataset {
                cfg.benchmark = b;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(e) = endpoint {
                cfg.endpoint = e;
            }
            if let Some(m) = model {
                cfg.model_id = m;
            }
            if let Some(r) = replay {
                cfg.replay = r;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            if let Some(p) = transcript {
                cfg.transcript_path = Some(p);
            }
            let archs = parse_archs(arch.as_deref(), cfg.architecture)?;
            cmd_run(&cfg, &archs).map(|_| ())
        }
        Command::Score {
            log,
            judge,
            endpoint,
            replay,
            out,
        } => {
            if let Some(e) = endpoint {
                cfg.endpoint = e;
            }
            if let Some(r) = replay {
                cfg.replay = r;
            }
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            cmd_score(&cfg, &log, judge).map(|_| ())
        }
        Command::Analyze { logs, json, text, out } => {
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            cmd_analyze(&cfg, &logs, json, text).map(|_| ())
        }
        Command::RouteSim {
            router,
            logs,
            keywords,
            out,
        } => {
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            if let Some(p) = keywords {
                cfg.keyword_list_path = Some(p);
            }
            cmd_route_sim(&cfg, &router, logs).map(|_| ())
        }
        Command::Report { dir, out } => {
            if let Some(p) = out {
                cfg.out_dir = p;
            }
            cmd_report(&cfg, dir).map(|_| ())
        }
    }
}

fn parse_archs(flag: Option<&str>, fallback: ArchitectureId) -> Result<Vec<ArchitectureId>> {
    match flag {
        None => Ok(vec![fallback]),
        Some("all") => Ok(ArchitectureId::ALL.to_vec()),
        Some(one) => Ok(vec![one.parse()?]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    pub examples: usize,
    pub turns: usize,
    pub warnings: usize,
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<Vec<(Benchmark, IngestStats)>> {
    if cfg.finqa_path.is_none() && cfg.convfinqa_path.is_none() {
        return Err(Error::MissingInput(
            "no dataset paths given (set finqa_path/convfinqa_path or pass --finqa/--convfinqa)"
                .into(),
        ));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut all_stats = Vec::new();
    for benchmark in [Benchmark::FinQA, Benchmark::ConvFinQA] {
        let Ok(path) = cfg.dataset_path(benchmark) else {
            continue;
        };
        let corpus = match benchmark {
            Benchmark::FinQA => corpus::load_finqa(path)?,
            Benchmark::ConvFinQA => corpus::load_convfinqa(path)?,
        };
        let mut warnings = 0usize;
        for example in &corpus {
            for issue in corpus::validate_example(example) {
                match issue.severity {
                    Severity::Warning => {
                        warnings += 1;
                        println!("warning: {}", issue.message);
                    }
                    Severity::Error => {
                        return Err(Error::Dataset {
                            path: path.clone(),
                            msg: issue.message,
                        })
                    }
                }
            }
        }
        let out_path = cfg.corpus_path(benchmark);
        corpus::write_corpus_jsonl(&out_path, &corpus)?;
        let (examples, turns) = corpus::corpus_stats(&corpus);
        println!(
            "{benchmark}: {examples} examples, {turns} turns, {warnings} warnings -> {}",
            out_path.display()
        );
        all_stats.push((
            benchmark,
            IngestStats {
                examples,
                turns,
                warnings,
            },
        ));
    }
    Ok(all_stats)
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn make_header(cfg: &RunConfig, arch: ArchitectureId, embed_model_id: &str) -> RunHeader {
    RunHeader {
        version: LOG_VERSION,
        benchmark: cfg.benchmark,
        architecture: arch,
        model_id: cfg.model_id.clone(),
        embed_model_id: embed_model_id.to_owned(),
        k: cfg.k,
        seed: cfg.seed,
        temperature: cfg.temperature,
        template_hash: template_hash(),
        config_hash: cfg.config_hash(),
        created_unix_ms: now_unix_ms(),
        config: cfg.resolved_json(),
        scoring: None,
    }
}

fn build_llm(cfg: &RunConfig) -> Result<LlmClient> {
    let params = GenParams {
        model_id: cfg.model_id.clone(),
        endpoint: cfg.endpoint.clone(),
        temperature: cfg.temperature,
        max_output_tokens: Some(cfg.max_output_tokens),
    };
    let transcript = match cfg.replay {
        ReplayMode::Off => None,
        ReplayMode::Record | ReplayMode::Strict => Some(Transcript::open(&cfg.transcript_path())?),
    };
    let mut client = LlmClient::new(params, cfg.replay, transcript)?;
    if let Some(judge_model) = &cfg.judge_model_id {
        client = client.with_judge_model(judge_model.clone());
    }
    Ok(client)
}

/// Run the selected architectures over the ingested corpus. Existing log
/// records are skipped by (dialog, turn), so an interrupted run resumes
/// where it stopped.
pub fn cmd_run(cfg: &RunConfig, archs: &[ArchitectureId]) -> Result<Vec<PathBuf>> {
    let corpus_path = cfg.corpus_path(cfg.benchmark);
    if !corpus_path.exists() {
        return Err(Error::MissingInput(format!(
            "canonical corpus {} not found; run `finarch ingest` first",
            corpus_path.display()
        )));
    }
    let corpus = corpus::read_corpus_jsonl(&corpus_path)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let pipe_cfg = PipelineConfig {
        k: cfg.k,
        rag_granularity: cfg.rag_granularity,
        workers: cfg.workers.max(1),
    };
    let mut written = Vec::new();
    for &arch in archs {
        let embedder = Arc::new(cfg.build_embedder());
        let llm = build_llm(cfg)?;
        let services = RunServices::new(embedder.clone(), llm);
        let header = make_header(cfg, arch, embedder.model_id());
        let log_path = cfg.run_log_path(cfg.benchmark, arch);
        let (mut writer, existing) = if log_path.exists() {
            let (old_header, records) = read_run_log(&log_path)?;
            if old_header.config_hash != header.config_hash
                || old_header.template_hash != header.template_hash
                || old_header.architecture != arch
                || old_header.benchmark != cfg.benchmark
            {
                return Err(Error::HashMismatch {
                    msg: format!(
                        "existing log {} was produced under a different configuration; \
                         delete it or change --out",
                        log_path.display()
                    ),
                });
            }
            (RunLogWriter::append(&log_path)?, group_by_dialog(records))
        } else {
            (RunLogWriter::create(&log_path, &header)?, HashMap::new())
        };
        let summary = pipelines::run_benchmark(
            arch,
            &corpus,
            &services,
            &pipe_cfg,
            &existing,
            |record| writer.write_record(&record),
        )?;
        println!(
            "{arch} on {}: {} new records, {} skipped, {} error turns -> {}",
            cfg.benchmark,
            summary.new_records,
            summary.skipped_records,
            summary.error_turns,
            log_path.display()
        );
        written.push(log_path);
    }
    Ok(written)
}

fn scored_path_for(run_log: &Path) -> PathBuf {
    let name = run_log
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("run.jsonl");
    let scored = match name.strip_suffix(".jsonl") {
        Some(stem) => format!("{stem}.scored.jsonl"),
        None => format!("{name}.scored.jsonl"),
    };
    run_log.with_file_name(scored)
}

fn default_run_logs(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut logs = Vec::new();
    let dir = fs::read_dir(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    for entry in dir {
        let entry = entry.map_err(|e| Error::io(&cfg.out_dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("run_") && name.ends_with(".jsonl") && !name.ends_with(".scored.jsonl")
        {
            logs.push(entry.path());
        }
    }
    logs.sort();
    Ok(logs)
}

/// Score run logs: numeric verdicts always, judge verdicts on request.
/// All original record fields are preserved.
pub fn cmd_score(cfg: &RunConfig, logs: &[PathBuf], judge: bool) -> Result<Vec<PathBuf>> {
    let logs = if logs.is_empty() {
        default_run_logs(cfg)?
    } else {
        logs.to_vec()
    };
    if logs.is_empty() {
        return Err(Error::MissingInput(format!(
            "no run logs found under {}; run `finarch run` first",
            cfg.out_dir.display()
        )));
    }
    let judge_client = if judge { Some(build_llm(cfg)?) } else { None };
    let mut written = Vec::new();
    for log_path in &logs {
        let (mut header, records) = read_run_log(log_path)?;
        let mut scored = Vec::with_capacity(records.len());
        for turn in records {
            let v = scoring::verdict(&turn.raw_text, &turn.question, &turn.gold_answer, &cfg.scoring);
            let judge_verdict = match &judge_client {
                // failed turns have nothing to adjudicate
                Some(client) if turn.error.is_none() => {
                    Some(client.judge(&turn.question, &turn.gold_answer, &turn.raw_text)?)
                }
                _ => None,
            };
            scored.push(ScoredRecord {
                parse_success: v.parse_success,
                parsed_value: v.parsed.map(|p| p.value),
                exact: v.exact,
                corrected_exact: v.corrected_exact,
                corrected_close: v.corrected_close,
                applied_scale: v.applied_scale,
                numeric_gold: v.numeric_gold,
                format_violation: scoring::format_violation(&turn.raw_text),
                multi_number: scoring::multi_number(&turn.raw_text),
                judge_verdict: judge_verdict.as_ref().map(|j| j.verdict),
                judge_raw: judge_verdict.map(|j| j.raw),
                turn,
            });
        }
        header.scoring = Some(ScoringMeta {
            config: cfg.scoring,
            judged: judge,
        });
        let out_path = scored_path_for(log_path);
        write_scored_log(&out_path, &header, &scored)?;
        println!("scored {} records -> {}", scored.len(), out_path.display());
        written.push(out_path);
    }
    Ok(written)
}

fn collect_scored_logs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let dir = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
            for entry in dir {
                let entry = entry.map_err(|e| Error::io(path, e))?;
                if entry.file_name().to_string_lossy().ends_with(".scored.jsonl") {
                    files.push(entry.path());
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn read_scored_logs(paths: &[PathBuf]) -> Result<Vec<(RunHeader, Vec<ScoredRecord>)>> {
    paths.iter().map(|p| read_scored_log(p)).collect()
}

pub fn cmd_analyze(
    cfg: &RunConfig,
    logs: &[PathBuf],
    json_out: Option<PathBuf>,
    text_out: Option<PathBuf>,
) -> Result<AnalysisReport> {
    let paths = if logs.is_empty() {
        collect_scored_logs(std::slice::from_ref(&cfg.out_dir))?
    } else {
        collect_scored_logs(logs)?
    };
    if paths.is_empty() {
        return Err(Error::MissingInput(
            "no scored logs found; run `finarch score` first".into(),
        ));
    }
    let parsed = read_scored_logs(&paths)?;
    let opts = AnalysisOptions {
        include_replayed_latency: cfg.include_replayed_latency,
        cascade_metric: cfg.cascade_metric,
    };
    let report = analysis::analyze(&parsed, opts)?;
    let text = analysis::render_text(&report);
    print!("{text}");
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let json_path = json_out.unwrap_or_else(|| cfg.out_dir.join("analysis.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io(&json_path, e))?;
    let text_path = text_out.unwrap_or_else(|| cfg.out_dir.join("analysis.txt"));
    fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    println!("wrote {} and {}", json_path.display(), text_path.display());
    Ok(report)
}

fn router_logs_from(parsed: Vec<(RunHeader, Vec<ScoredRecord>)>) -> Result<RouterLogs> {
    let mut logs = RouterLogs::new();
    for (header, records) in parsed {
        if logs
            .insert((header.benchmark, header.architecture), records)
            .is_some()
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate scored log for {} / {}",
                header.benchmark, header.architecture
            )));
        }
    }
    Ok(logs)
}

fn check_hash_uniformity(parsed: &[(RunHeader, Vec<ScoredRecord>)]) -> Result<()> {
    if let Some((first, _)) = parsed.first() {
        for (header, _) in parsed {
            if header.template_hash != first.template_hash
                || header.config_hash != first.config_hash
            {
                return Err(Error::HashMismatch {
                    msg: "scored logs come from different template/config hashes".into(),
                });
            }
        }
    }
    Ok(())
}

pub fn cmd_route_sim(
    cfg: &RunConfig,
    router_spec: &str,
    logs_dir: Option<PathBuf>,
) -> Result<RouteSimReport> {
    let mut router: Router = router_spec.parse()?;
    if let (Router::Keyword(_), Some(path)) = (&router, &cfg.keyword_list_path) {
        router = Router::Keyword(routing::load_keywords(path)?);
    }
    let dir = logs_dir.unwrap_or_else(|| cfg.out_dir.clone());
    let paths = collect_scored_logs(std::slice::from_ref(&dir))?;
    if paths.is_empty() {
        return Err(Error::MissingInput(format!(
            "no scored logs in {}; run `finarch score` first",
            dir.display()
        )));
    }
    let parsed = read_scored_logs(&paths)?;
    check_hash_uniformity(&parsed)?;
    let logs = router_logs_from(parsed)?;
    let report = routing::route_sim_report(&logs, &router)?;
    let text = routing::render_route_report(&report);
    print!("{text}");
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let json_path = cfg.out_dir.join("routing.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io(&json_path, e))?;
    let text_path = cfg.out_dir.join("routing.txt");
    fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    println!("wrote {} and {}", json_path.display(), text_path.display());
    Ok(report)
}

/// Bundle analysis plus routing into one document. Every input must carry
/// the same template and config hash.
pub fn cmd_report(cfg: &RunConfig, dir: Option<PathBuf>) -> Result<PathBuf> {
    let dir = dir.unwrap_or_else(|| cfg.out_dir.clone());
    let paths = collect_scored_logs(std::slice::from_ref(&dir))?;
    if paths.is_empty() {
        return Err(Error::MissingInput(format!(
            "report inputs missing in {}: expected run_*.scored.jsonl files \
             (produce them with `finarch run` then `finarch score`)",
            dir.display()
        )));
    }
    let parsed = read_scored_logs(&paths)?;
    check_hash_uniformity(&parsed)?;
    let opts = AnalysisOptions {
        include_replayed_latency: cfg.include_replayed_latency,
        cascade_metric: cfg.cascade_metric,
    };
    let analysis_report = analysis::analyze(&parsed, opts)?;
    let routing_report = match router_logs_from(parsed) {
        Ok(logs) => routing::route_sim_report(&logs, &Router::Oracle).ok(),
        Err(_) => None,
    };

    let mut text = String::new();
    text.push_str("FINARCH EVALUATION REPORT\n");
    text.push_str(&format!("inputs: {} scored logs under {}\n\n", paths.len(), dir.display()));
    text.push_str(&analysis::render_text(&analysis_report));
    text.push('\n');
    match &routing_report {
        Some(route) => text.push_str(&routing::render_route_report(route)),
        None => text.push_str(
            "ROUTING SIMULATION: skipped (needs scored logs for every routable architecture)\n",
        ),
    }
    let json = serde_json::json!({
        "template_hash": analysis_report.template_hash,
        "config_hash": analysis_report.config_hash,
        "analysis": analysis_report,
        "routing": routing_report,
    });
    let text_path = dir.join("report.txt");
    fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&json)?)
        .map_err(|e| Error::io(&json_path, e))?;
    print!("{text}");
    println!("wrote {} and {}", text_path.display(), json_path.display());
    Ok(text_path)
}

/// Library-level entry used by the binary and by integration tests that
/// drive full command lines.
pub fn run_command_line<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    run(cli)
}
