//! Per-example and aggregate compression scores.
//!
//! ROUGE follows the normalization of the widely used Google Research scorer (see
//! [`rouge::normalize`]). Kept-token F1, compression ratio and the novel-word ratio work on
//! whitespace tokens, lowercased.

pub mod porter;
pub mod rouge;

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CompressionExample, Corpus};
use crate::postprocess::tokenize_words;
use crate::record::GenerationRecord;

pub use rouge::{lcs_len, rouge_l, rouge_n, Prf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("source sentence is empty")]
    EmptySource,
    #[error("record for unknown example id {0:?}")]
    UnknownId(String),
    #[error("duplicate record for example id {0:?}")]
    DuplicateId(String),
    #[error("{missing} corpus examples have no record (first: {first:?})")]
    MissingRecords { missing: usize, first: String },
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}

fn lowercase_all<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}

/// Multiset F1 between system tokens and gold-compression tokens, in `[0, 1]`.
pub fn kept_token_f1<S: AsRef<str>, T: AsRef<str>>(system: &[S], gold: &[T]) -> f64 {
    let mut remaining: BTreeMap<String, usize> = BTreeMap::new();
    for t in lowercase_all(gold) {
        *remaining.entry(t).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for t in lowercase_all(system) {
        if let Some(c) = remaining.get_mut(&t) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    Prf::from_counts(matched, system.len(), gold.len()).f1 / 100.0
}

/// Percentage of system tokens (case-insensitive) absent from the source.
pub fn novel_pct<S: AsRef<str>, T: AsRef<str>>(system: &[S], source: &[T]) -> f64 {
    if system.is_empty() {
        return 0.0;
    }
    let vocab: BTreeSet<String> = lowercase_all(source).into_iter().collect();
    let novel = lowercase_all(system).iter().filter(|t| !vocab.contains(*t)).count();
    100.0 * novel as f64 / system.len() as f64
}

/// System compression ratio minus gold compression ratio, in percentage points.
pub fn delta_cr(system_len: usize, source_len: usize, gold_len: usize) -> Result<f64, MetricError> {
    if source_len == 0 {
        return Err(MetricError::EmptySource);
    }
    let src = source_len as f64;
    Ok(100.0 * (system_len as f64 / src - gold_len as f64 / src))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RougeMode {
    #[default]
    F1,
    Recall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceAggregation {
    First,
    #[default]
    Max,
}

impl FromStr for RougeMode {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f1" => Ok(RougeMode::F1),
            "recall" => Ok(RougeMode::Recall),
            other => Err(MetricError::UnknownName { kind: "rouge mode", name: other.to_owned() }),
        }
    }
}

impl FromStr for ReferenceAggregation {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(ReferenceAggregation::First),
            "max" => Ok(ReferenceAggregation::Max),
            other => Err(MetricError::UnknownName { kind: "reference aggregation", name: other.to_owned() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScoreOptions {
    pub rouge_mode: RougeMode,
    pub reference_aggregation: ReferenceAggregation,
    pub stemming: bool,
    /// Score only the examples that have records instead of failing on gaps.
    pub allow_partial: bool,
}

/// Every value a report column can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rouge1,
    Rouge2,
    RougeL,
    KeptF1,
    DeltaCr,
    /// Magnitude of the compression ratio error; smaller is better.
    AbsDeltaCr,
    Novel,
    Cr,
    GenLen,
    SrcLen,
    TgtLen,
}

impl Metric {
    /// Columns shown in comparison tables, in order.
    pub const TABLE: [Metric; 6] =
        [Metric::Rouge1, Metric::Rouge2, Metric::RougeL, Metric::KeptF1, Metric::DeltaCr, Metric::Novel];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Rouge1 => "R-1",
            Metric::Rouge2 => "R-2",
            Metric::RougeL => "R-L",
            Metric::KeptF1 => "F1",
            Metric::DeltaCr => "dCR",
            Metric::AbsDeltaCr => "|dCR|",
            Metric::Novel => "novel",
            Metric::Cr => "CR",
            Metric::GenLen => "gen len",
            Metric::SrcLen => "src len",
            Metric::TgtLen => "tgt len",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::RougeL => "rougeL",
            Metric::KeptF1 => "kept_f1",
            Metric::DeltaCr => "delta_cr",
            Metric::AbsDeltaCr => "abs_delta_cr",
            Metric::Novel => "novel",
            Metric::Cr => "cr",
            Metric::GenLen => "gen_len",
            Metric::SrcLen => "src_len",
            Metric::TgtLen => "tgt_len",
        }
    }

    /// Whether a larger value is an improvement.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::AbsDeltaCr | Metric::Novel)
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            Metric::Rouge1,
            Metric::Rouge2,
            Metric::RougeL,
            Metric::KeptF1,
            Metric::DeltaCr,
            Metric::AbsDeltaCr,
            Metric::Novel,
            Metric::Cr,
            Metric::GenLen,
            Metric::SrcLen,
            Metric::TgtLen,
        ];
        all.into_iter()
            .find(|m| m.key() == s || m.label() == s)
            .ok_or_else(|| MetricError::UnknownName { kind: "metric", name: s.to_owned() })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Scores of one example. Only the ROUGE triple of the active mode is populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge1_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge2_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "rougeL_f")]
    pub rouge_l_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge1_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge2_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "rougeL_r")]
    pub rouge_l_r: Option<f64>,
    pub kept_f1: f64,
    pub cr: f64,
    pub delta_cr_pts: f64,
    pub novel_pct: f64,
    pub gen_len: usize,
    pub src_len: usize,
    pub tgt_len: usize,
}

impl ExampleScores {
    pub fn value(&self, metric: Metric) -> f64 {
        let pick = |f: Option<f64>, r: Option<f64>| f.or(r).unwrap_or(0.0);
        match metric {
            Metric::Rouge1 => pick(self.rouge1_f, self.rouge1_r),
            Metric::Rouge2 => pick(self.rouge2_f, self.rouge2_r),
            Metric::RougeL => pick(self.rouge_l_f, self.rouge_l_r),
            Metric::KeptF1 => self.kept_f1,
            Metric::DeltaCr => self.delta_cr_pts,
            Metric::AbsDeltaCr => self.delta_cr_pts.abs(),
            Metric::Novel => self.novel_pct,
            Metric::Cr => self.cr,
            Metric::GenLen => self.gen_len as f64,
            Metric::SrcLen => self.src_len as f64,
            Metric::TgtLen => self.tgt_len as f64,
        }
    }
}

/// Arithmetic means of every [`ExampleScores`] field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregates {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge1_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge2_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "rougeL_f")]
    pub rouge_l_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge1_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge2_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "rougeL_r")]
    pub rouge_l_r: Option<f64>,
    pub kept_f1: f64,
    pub cr: f64,
    pub delta_cr_pts: f64,
    /// Mean per-example magnitude of the compression ratio error.
    #[serde(default)]
    pub abs_delta_cr_pts: f64,
    pub novel_pct: f64,
    pub gen_len: f64,
    pub src_len: f64,
    pub tgt_len: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_opt(rows: &[ExampleScores], field: impl Fn(&ExampleScores) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = rows.iter().filter_map(&field).collect();
    (!values.is_empty()).then(|| mean(values.into_iter()))
}

impl Aggregates {
    pub fn from_rows(rows: &[ExampleScores]) -> Self {
        let m = |f: fn(&ExampleScores) -> f64| mean(rows.iter().map(f));
        Self {
            count: rows.len(),
            rouge1_f: mean_opt(rows, |r| r.rouge1_f),
            rouge2_f: mean_opt(rows, |r| r.rouge2_f),
            rouge_l_f: mean_opt(rows, |r| r.rouge_l_f),
            rouge1_r: mean_opt(rows, |r| r.rouge1_r),
            rouge2_r: mean_opt(rows, |r| r.rouge2_r),
            rouge_l_r: mean_opt(rows, |r| r.rouge_l_r),
            kept_f1: m(|r| r.kept_f1),
            cr: m(|r| r.cr),
            delta_cr_pts: m(|r| r.delta_cr_pts),
            abs_delta_cr_pts: m(|r| r.delta_cr_pts.abs()),
            novel_pct: m(|r| r.novel_pct),
            gen_len: m(|r| r.gen_len as f64),
            src_len: m(|r| r.src_len as f64),
            tgt_len: m(|r| r.tgt_len as f64),
        }
    }

    pub fn value(&self, metric: Metric) -> f64 {
        let pick = |f: Option<f64>, r: Option<f64>| f.or(r).unwrap_or(0.0);
        match metric {
            Metric::Rouge1 => pick(self.rouge1_f, self.rouge1_r),
            Metric::Rouge2 => pick(self.rouge2_f, self.rouge2_r),
            Metric::RougeL => pick(self.rouge_l_f, self.rouge_l_r),
            Metric::KeptF1 => self.kept_f1,
            Metric::DeltaCr => self.delta_cr_pts,
            Metric::AbsDeltaCr => self.abs_delta_cr_pts,
            Metric::Novel => self.novel_pct,
            Metric::Cr => self.cr,
            Metric::GenLen => self.gen_len,
            Metric::SrcLen => self.src_len,
            Metric::TgtLen => self.tgt_len,
        }
    }
}

/// Where a report came from: the row labels used in comparison tables plus a free-form
/// configuration echo.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ReportConfig {
    pub dataset: String,
    pub setting: String,
    pub instruction: String,
    pub prompting: String,
    #[serde(default)]
    pub details: BTreeMap<String, String>,
}

impl ReportConfig {
    /// Row key `setting / instruction / prompting`.
    pub fn row_key(&self) -> String {
        let mut key = self.setting.clone();
        key.push_str(" / ");
        key.push_str(&self.instruction);
        key.push_str(" / ");
        key.push_str(&self.prompting);
        key
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: ReportConfig,
    pub options: ScoreOptions,
    pub per_example: Vec<ExampleScores>,
    pub aggregate: Aggregates,
}

impl MetricReport {
    pub fn new(config: ReportConfig, options: ScoreOptions, per_example: Vec<ExampleScores>) -> Self {
        let aggregate = Aggregates::from_rows(&per_example);
        Self { config, options, per_example, aggregate }
    }

    pub fn aggregate_value(&self, metric: Metric) -> f64 {
        self.aggregate.value(metric)
    }

    /// Per-example values of a metric, in report order.
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_example.iter().map(|r| r.value(metric)).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ExampleScores> {
        self.per_example.iter().find(|r| r.id == id)
    }
}

/// Scores one system output against an example.
pub fn score_example(example: &CompressionExample, system: &str, options: &ScoreOptions) -> ExampleScores {
    let system_tokens = tokenize_words(system);
    let source = example.source_tokens();
    let references: &[String] = match options.reference_aggregation {
        ReferenceAggregation::First => &example.gold_references()[..1],
        ReferenceAggregation::Max => example.gold_references(),
    };
    let sys_norm = rouge::normalize(&system_tokens, options.stemming);
    let mut best = [Prf::default(); 3];
    let mut best_kept = 0.0f64;
    for reference in references {
        let ref_tokens = tokenize_words(reference);
        let ref_norm = rouge::normalize(&ref_tokens, options.stemming);
        let scores = [
            rouge::rouge_n_normalized(&sys_norm, &ref_norm, 1),
            rouge::rouge_n_normalized(&sys_norm, &ref_norm, 2),
            rouge::rouge_l_normalized(&sys_norm, &ref_norm),
        ];
        for (b, s) in best.iter_mut().zip(scores) {
            b.precision = b.precision.max(s.precision);
            b.recall = b.recall.max(s.recall);
            b.f1 = b.f1.max(s.f1);
        }
        best_kept = best_kept.max(kept_token_f1(&system_tokens, &ref_tokens));
    }
    let gold_len = tokenize_words(example.first_reference()).len();
    let src_len = source.len();
    let gen_len = system_tokens.len();
    let (f, r) = match options.rouge_mode {
        RougeMode::F1 => (Some(best.map(|s| s.f1)), None),
        RougeMode::Recall => (None, Some(best.map(|s| s.recall))),
    };
    ExampleScores {
        id: example.id().to_owned(),
        rouge1_f: f.map(|v| v[0]),
        rouge2_f: f.map(|v| v[1]),
        rouge_l_f: f.map(|v| v[2]),
        rouge1_r: r.map(|v| v[0]),
        rouge2_r: r.map(|v| v[1]),
        rouge_l_r: r.map(|v| v[2]),
        kept_f1: best_kept,
        cr: gen_len as f64 / src_len as f64,
        // Examples always have a non-empty source.
        delta_cr_pts: delta_cr(gen_len, src_len, gold_len).unwrap_or(0.0),
        novel_pct: novel_pct(&system_tokens, source),
        gen_len,
        src_len,
        tgt_len: gold_len,
    }
}

/// Scores a run. Rows follow corpus order regardless of record order.
pub fn score_run(
    records: &[GenerationRecord],
    corpus: &Corpus,
    config: ReportConfig,
    options: ScoreOptions,
) -> Result<MetricReport, MetricError> {
    let mut by_id: BTreeMap<&str, &GenerationRecord> = BTreeMap::new();
    let known: BTreeSet<&str> = corpus.examples().iter().map(|e| e.id()).collect();
    for record in records {
        if !known.contains(record.example_id.as_str()) {
            return Err(MetricError::UnknownId(record.example_id.clone()));
        }
        if by_id.insert(record.example_id.as_str(), record).is_some() {
            return Err(MetricError::DuplicateId(record.example_id.clone()));
        }
    }
    let missing: Vec<&str> = corpus.examples().iter().map(|e| e.id()).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() && !options.allow_partial {
        return Err(MetricError::MissingRecords { missing: missing.len(), first: missing[0].to_string() });
    }
    let rows = corpus
        .examples()
        .iter()
        .filter_map(|ex| by_id.get(ex.id()).map(|rec| score_example(ex, &rec.extracted, &options)))
        .collect();
    Ok(MetricReport::new(config, options, rows))
}
