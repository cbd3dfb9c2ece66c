//! The five commands as library calls: transform, run, score, analyze and report.
//!
//! Each writes its artifacts under the configured output directory and stamps them with
//! the configuration digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sentcomp_core::analysis::{bucket_report, compare_reports, BucketSpec, SignificanceResult};
use sentcomp_core::metrics::{score_run, Metric};
use sentcomp_core::{Corpus, GenerationRecord, MetricReport};

use crate::backend::{
    hex_digest, run_batch, Backend, BatchFailure, BatchRequest, CachedBackend, HttpBackend, OracleBackend,
    PredictionsBackend, ReplayCache,
};
use crate::config::{BackendKind, RunConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::prompts::{render_prompts, PromptRow};
use crate::report::{
    buckets_csv, check_same_corpus, disambiguate_rows, emit_tables, metric_report_csv, BertScores, SignificanceDoc,
    TableFormat, TableOptions,
};

pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptLine {
    pub config_digest: String,
    #[serde(flatten)]
    pub row: PromptRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub config_digest: String,
    #[serde(flatten)]
    pub record: GenerationRecord,
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    io::load_corpus(&cfg.corpus.path, cfg.corpus.format, &cfg.dataset_name(), cfg.corpus.split, cfg.corpus.origin)
}

/// Writes the instruction-format file; never contacts a backend.
pub fn transform(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    if corpus.is_empty() {
        log::warn!("{}: corpus is empty; writing an empty prompt file", cfg.corpus.path.display());
    }
    let rows = render_prompts(&corpus, &cfg.instruction_template()?, cfg.policy()?)?;
    let digest = cfg.digest();
    let lines: Vec<PromptLine> = rows.into_iter().map(|row| PromptLine { config_digest: digest.clone(), row }).collect();
    let path = cfg.output_dir.join(PROMPTS_FILE);
    io::write_file(&path, io::to_jsonl(&lines).as_bytes())?;
    log::info!("wrote {} prompt(s) to {}", lines.len(), path.display());
    Ok(path)
}

pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn Backend>> {
    let section = &cfg.backend;
    let cached = |live: bool| -> Result<Box<dyn Backend>> {
        let path = cfg.cache_path();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let cache = ReplayCache::open(&path)?;
        let inner: Option<Box<dyn Backend>> =
            live.then(|| Box::new(HttpBackend::new(section.http())) as Box<dyn Backend>);
        let strict = !live;
        Ok(Box::new(CachedBackend::new(format!("chat:{}", section.model_id), cache, inner, strict)))
    };
    match section.kind {
        BackendKind::Oracle => Ok(Box::new(OracleBackend)),
        BackendKind::Predictions => {
            let path = section.predictions.clone().unwrap_or_default();
            Ok(Box::new(PredictionsBackend::load(&path)?))
        }
        BackendKind::Http => cached(true),
        BackendKind::Replay => cached(!section.strict && !section.endpoint.is_empty()),
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub records_path: PathBuf,
    pub records: usize,
    pub failures: Vec<BatchFailure>,
}

/// Generates one record per example. Completions reach the replay cache as they arrive, so
/// rerunning an interrupted live run only pays for what is missing.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let backend = build_backend(cfg)?;
    let template = cfg.instruction_template()?;
    let extractor = cfg.extraction.resolve()?.compile()?;
    let params = cfg.backend.params();
    let request = BatchRequest {
        corpus: &corpus,
        template: &template,
        policy: cfg.policy()?,
        params: &params,
        extractor: &extractor,
        parallelism: cfg.parallelism,
    };
    let outcome = run_batch(&request, backend.as_ref())?;
    let digest = cfg.digest();
    let lines: Vec<RecordLine> = outcome
        .records
        .into_iter()
        .map(|record| RecordLine { config_digest: digest.clone(), record })
        .collect();
    let path = cfg.output_dir.join(RECORDS_FILE);
    io::write_file(&path, io::to_jsonl(&lines).as_bytes())?;
    log::info!("wrote {} record(s) to {}", lines.len(), path.display());
    for f in &outcome.failures {
        log::error!("example {}: {}", f.example_id, f.error);
    }
    if let Some(first) = outcome.failures.first() {
        if !cfg.skip_failures {
            return Err(Error::Batch {
                count: outcome.failures.len(),
                first: format!("example {}: {}", first.example_id, first.error),
            });
        }
        log::warn!("{} example(s) failed and were skipped", outcome.failures.len());
    }
    Ok(RunOutput { records_path: path, records: lines.len(), failures: outcome.failures })
}

pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let lines: Vec<RecordLine> = io::read_jsonl(path)?;
    Ok(lines.into_iter().map(|l| l.record).collect())
}

/// Scores the records file (by default the one `run` wrote) and writes the metric files.
pub fn score(cfg: &RunConfig, records: Option<&Path>) -> Result<MetricReport> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let default_path = cfg.output_dir.join(RECORDS_FILE);
    let records = read_records(records.unwrap_or(&default_path))?;
    let report = score_run(&records, &corpus, cfg.report_config()?, cfg.score_options())?;
    io::write_json(&cfg.output_dir.join(METRICS_JSON), &report)?;
    io::write_file(&cfg.output_dir.join(METRICS_CSV), metric_report_csv(&report)?.as_bytes())?;
    log::info!("{}: {} example(s) scored", report.config.row_key(), report.per_example.len());
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let text = io::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_owned(), line: e.line(), message: e.to_string() })
}

#[derive(Debug)]
pub struct AnalysisOutput {
    pub reports: Vec<MetricReport>,
    pub significance: Option<SignificanceDoc>,
}

pub const ANALYSIS_FILES: [&str; 5] = ["report.md", "report.csv", "report.json", "buckets.csv", "significance.json"];

/// Buckets every report and, given two or more, tests each against the baseline row.
///
/// Repeated row keys are told apart with a numeric suffix on the setting label.
pub fn analyze(cfg: &RunConfig, report_paths: &[PathBuf], baseline: Option<&str>) -> Result<AnalysisOutput> {
    if report_paths.is_empty() {
        return Err(Error::Config("analyze needs at least one report".into()));
    }
    let corpus = load_corpus(cfg)?;
    let mut reports = report_paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    disambiguate_rows(&mut reports);
    check_same_corpus(&reports)?;

    let mut tables = Vec::new();
    for report in &reports {
        for spec in [BucketSpec::gold_cr(), BucketSpec::gold_word_count()] {
            let digest = report.config.details.get("config_digest").cloned().unwrap_or_default();
            tables.push((report.config.row_key(), digest, bucket_report(report, &corpus, &spec)?));
        }
    }
    io::write_file(&cfg.output_dir.join("buckets.csv"), buckets_csv(&tables)?.as_bytes())?;

    let significance = if reports.len() >= 2 {
        let baseline = baseline.ok_or_else(|| Error::Config("two or more reports need --baseline".into()))?;
        let base = reports
            .iter()
            .find(|r| r.config.row_key() == baseline)
            .ok_or_else(|| Error::Config(format!("baseline row {baseline:?} is not among the reports")))?;
        let (r, seed) = (cfg.permutations(), cfg.seed);
        let mut results: Vec<SignificanceResult> = Vec::new();
        for report in reports.iter().filter(|r| r.config.row_key() != baseline) {
            for metric in Metric::TABLE {
                results.push(compare_reports(report, base, metric, r, seed)?);
            }
        }
        let mut hasher_input = cfg.digest();
        for report in &reports {
            hasher_input.push('\n');
            hasher_input.push_str(report.config.details.get("config_digest").map(String::as_str).unwrap_or(""));
        }
        hasher_input.push('\n');
        hasher_input.push_str(baseline);
        let doc = SignificanceDoc {
            analysis_digest: hex_digest(hasher_input.as_bytes()),
            dataset: base.config.dataset.clone(),
            baseline: baseline.to_owned(),
            permutations: r,
            seed,
            note: "paired approximate randomization (sign flips), two-sided, add-one smoothed; \
                   dCR is tested on per-example |dCR|"
                .into(),
            results,
        };
        io::write_json(&cfg.output_dir.join("significance.json"), &doc)?;
        Some(doc)
    } else {
        None
    };

    let results = significance.as_ref().map(|d| d.results.as_slice()).unwrap_or(&[]);
    let options = TableOptions { baseline, bert_scores: None };
    for (file, format) in [("report.md", TableFormat::Markdown), ("report.csv", TableFormat::Csv), ("report.json", TableFormat::Json)] {
        let text = emit_tables(&reports, results, format, &options)?;
        io::write_file(&cfg.output_dir.join(file), text.as_bytes())?;
    }
    Ok(AnalysisOutput { reports, significance })
}

/// Renders a comparison table from saved reports and, optionally, saved significance results.
pub fn report(
    report_paths: &[PathBuf],
    significance: Option<&Path>,
    baseline: Option<&str>,
    bert_scores: Option<&Path>,
    format: TableFormat,
) -> Result<String> {
    let mut reports = report_paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    disambiguate_rows(&mut reports);
    let (results, baseline) = match significance {
        Some(path) => {
            let text = io::read_text(path)?;
            let doc: SignificanceDoc = serde_json::from_str(&text)
                .map_err(|e| Error::Parse { path: path.to_owned(), line: e.line(), message: e.to_string() })?;
            let baseline = baseline.map(str::to_owned).unwrap_or(doc.baseline);
            (doc.results, Some(baseline))
        }
        None => (Vec::new(), baseline.map(str::to_owned)),
    };
    let bs: Option<BertScores> = match bert_scores {
        Some(path) => Some(
            serde_json::from_str(&io::read_text(path)?)
                .map_err(|e| Error::Parse { path: path.to_owned(), line: e.line(), message: e.to_string() })?,
        ),
        None => None,
    };
    let options = TableOptions { baseline: baseline.as_deref(), bert_scores: bs.as_ref() };
    emit_tables(&reports, &results, format, &options)
}
