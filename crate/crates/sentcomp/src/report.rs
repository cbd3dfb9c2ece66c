//! Report documents: comparison tables, per-example metric files and bucket tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sentcomp_core::analysis::{BucketTable, SignificanceResult};
use sentcomp_core::metrics::{Metric, RougeMode};
use sentcomp_core::MetricReport;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Config(format!("unknown table format {other:?}"))),
        }
    }
}

/// Externally computed BERTScore values, `{dataset: {row key: value}}`.
pub type BertScores = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, Default)]
pub struct TableOptions<'a> {
    /// Row key that significance results are measured against. Required whenever
    /// significance results are supplied.
    pub baseline: Option<&'a str>,
    pub bert_scores: Option<&'a BertScores>,
}

fn digest_of(report: &MetricReport) -> &str {
    report.config.details.get("config_digest").map(String::as_str).unwrap_or("")
}

/// Checks that all reports score the same examples of the same dataset.
pub fn check_same_corpus(reports: &[MetricReport]) -> Result<()> {
    let Some(first) = reports.first() else { return Ok(()) };
    let ids: BTreeSet<&str> = first.per_example.iter().map(|r| r.id.as_str()).collect();
    for report in &reports[1..] {
        if report.config.dataset != first.config.dataset {
            return Err(Error::MismatchedCorpora(format!(
                "dataset {:?} vs {:?}",
                report.config.dataset, first.config.dataset
            )));
        }
        let other: BTreeSet<&str> = report.per_example.iter().map(|r| r.id.as_str()).collect();
        if other != ids {
            let diff = ids.symmetric_difference(&other).next().copied().unwrap_or_default();
            return Err(Error::MismatchedCorpora(format!(
                "{} and {} differ on example {diff:?}",
                first.config.row_key(),
                report.config.row_key()
            )));
        }
    }
    Ok(())
}

/// Renames repeated row keys by appending ` (2)`, ` (3)`, ... to the setting label.
pub fn disambiguate_rows(reports: &mut [MetricReport]) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for report in reports.iter_mut() {
        let n = seen.entry(report.config.row_key()).or_insert(0);
        *n += 1;
        if *n > 1 {
            report.config.setting = format!("{} ({n})", report.config.setting);
        }
    }
}

struct Row<'a> {
    report: &'a MetricReport,
    values: Vec<(Metric, f64)>,
    bs: Option<f64>,
    daggers: BTreeSet<Metric>,
}

fn table_metric(metric: Metric) -> Metric {
    if metric == Metric::AbsDeltaCr {
        Metric::DeltaCr
    } else {
        metric
    }
}

fn build_rows<'a>(
    reports: &'a [MetricReport],
    significance: &[SignificanceResult],
    options: &TableOptions<'_>,
) -> Result<Vec<Row<'a>>> {
    check_same_corpus(reports)?;
    let keys: Vec<String> = reports.iter().map(|r| r.config.row_key()).collect();
    if keys.iter().collect::<BTreeSet<_>>().len() != keys.len() {
        return Err(Error::Report("row keys repeat; label the reports apart first".into()));
    }
    if !significance.is_empty() {
        let baseline = options
            .baseline
            .ok_or_else(|| Error::Report("significance marks need a baseline row".into()))?;
        if !keys.iter().any(|k| k == baseline) {
            return Err(Error::Report(format!("baseline row {baseline:?} is not among the reports")));
        }
        for s in significance {
            for system in [&s.system_a, &s.system_b] {
                if !keys.contains(system) {
                    return Err(Error::Report(format!("significance result names unknown row {system:?}")));
                }
            }
        }
    }
    Ok(reports
        .iter()
        .zip(&keys)
        .map(|(report, key)| {
            let daggers = significance
                .iter()
                .filter(|s| &s.system_a == key && Some(s.system_b.as_str()) == options.baseline)
                .filter(|s| s.is_significant() && s.a_is_better())
                .map(|s| table_metric(s.metric))
                .collect();
            Row {
                report,
                values: Metric::TABLE.iter().map(|&m| (m, report.aggregate_value(m))).collect(),
                bs: options.bert_scores.and_then(|bs| bs.get(&report.config.dataset)?.get(key).copied()),
                daggers,
            }
        })
        .collect())
}

fn cell(metric: Metric, value: f64) -> String {
    match metric {
        Metric::DeltaCr => format!("{value:+.2}"),
        _ => format!("{value:.2}"),
    }
}

fn header_label(metric: Metric) -> &'static str {
    match metric {
        Metric::DeltaCr => "ΔCR",
        other => other.label(),
    }
}

/// Renders one comparison table. A dagger marks a cell whose improvement over the
/// baseline row is significant at p < 0.05.
pub fn emit_tables(
    reports: &[MetricReport],
    significance: &[SignificanceResult],
    format: TableFormat,
    options: &TableOptions<'_>,
) -> Result<String> {
    let rows = build_rows(reports, significance, options)?;
    let with_bs = rows.iter().any(|r| r.bs.is_some());
    Ok(match format {
        TableFormat::Markdown => markdown(&rows, significance, options, with_bs),
        TableFormat::Csv => csv_table(&rows, with_bs)?,
        TableFormat::Json => {
            let mut text = serde_json::to_string_pretty(&json_table(&rows)).expect("serializable");
            text.push('\n');
            text
        }
    })
}

fn markdown(rows: &[Row<'_>], significance: &[SignificanceResult], options: &TableOptions<'_>, with_bs: bool) -> String {
    let mut out = String::new();
    if rows.iter().any(|r| r.report.options.rouge_mode == RougeMode::Recall) {
        out.push_str("ROUGE columns are recall.\n\n");
    }
    if let (Some(baseline), Some(first)) = (options.baseline, significance.first()) {
        let _ = writeln!(
            out,
            "† p < 0.05 against `{baseline}` (paired approximate randomization, R = {}, seed = {}). \
             ΔCR is tested on per-example |ΔCR|.\n",
            first.permutations, first.seed
        );
    }
    let mut header = vec!["Dataset", "Setting", "Instruction", "Prompting"];
    let mut metrics: Vec<Option<Metric>> = Metric::TABLE.iter().copied().map(Some).collect();
    if with_bs {
        metrics.insert(4, None);
    }
    header.extend(metrics.iter().map(|m| m.map_or("BS", header_label)));
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let c = &row.report.config;
        let mut cells = vec![c.dataset.clone(), c.setting.clone(), c.instruction.clone(), c.prompting.clone()];
        for m in &metrics {
            cells.push(match m {
                None => row.bs.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
                Some(m) => {
                    let value = row.values.iter().find(|(k, _)| k == m).map(|(_, v)| *v).unwrap_or_default();
                    let mark = if row.daggers.contains(m) { "†" } else { "" };
                    format!("{}{mark}", cell(*m, value))
                }
            });
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "- `{}` config digest `{}`", row.report.config.row_key(), digest_of(row.report));
    }
    out
}

fn csv_table(rows: &[Row<'_>], with_bs: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["dataset", "setting", "instruction", "prompting"].map(String::from).to_vec();
    header.extend(Metric::TABLE.iter().map(|m| m.label().to_owned()));
    if with_bs {
        header.push("BS".into());
    }
    header.extend(Metric::TABLE.iter().map(|m| format!("{} significant", m.label())));
    header.push("config_digest".into());
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let c = &row.report.config;
        let mut record = vec![c.dataset.clone(), c.setting.clone(), c.instruction.clone(), c.prompting.clone()];
        record.extend(row.values.iter().map(|(_, v)| v.to_string()));
        if with_bs {
            record.push(row.bs.map(|v| v.to_string()).unwrap_or_default());
        }
        record.extend(Metric::TABLE.iter().map(|m| row.daggers.contains(m).to_string()));
        record.push(digest_of(row.report).to_owned());
        w.write_record(&record).map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Report(e.to_string()))?).expect("utf-8 input"))
}

fn json_table(rows: &[Row<'_>]) -> Value {
    let mut datasets: BTreeMap<String, Map<String, Value>> = BTreeMap::new();
    for row in rows {
        let mut cells = Map::new();
        for (m, v) in &row.values {
            cells.insert(m.label().into(), Value::from(*v));
        }
        if let Some(bs) = row.bs {
            cells.insert("BS".into(), Value::from(bs));
        }
        cells.insert(
            "significant".into(),
            Value::from(row.daggers.iter().map(|m| m.label()).collect::<Vec<_>>()),
        );
        cells.insert("config_digest".into(), Value::from(digest_of(row.report)));
        datasets
            .entry(row.report.config.dataset.clone())
            .or_default()
            .insert(row.report.config.row_key(), Value::Object(cells));
    }
    serde_json::to_value(datasets).expect("serializable")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per example followed by an aggregate row; only the active ROUGE mode's columns.
pub fn metric_report_csv(report: &MetricReport) -> Result<String> {
    let recall = report.options.rouge_mode == RougeMode::Recall;
    let suffix = if recall { "r" } else { "f" };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row".to_owned(), "id".to_owned()];
    header.extend(["rouge1", "rouge2", "rougeL"].map(|r| format!("{r}_{suffix}")));
    header.extend(
        ["kept_f1", "cr", "delta_cr_pts", "abs_delta_cr_pts", "novel_pct", "gen_len", "src_len", "tgt_len", "config_digest"]
            .map(String::from),
    );
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let digest = digest_of(report);
    for r in &report.per_example {
        let rouge = if recall { [r.rouge1_r, r.rouge2_r, r.rouge_l_r] } else { [r.rouge1_f, r.rouge2_f, r.rouge_l_f] };
        let mut record = vec!["example".to_owned(), r.id.clone()];
        record.extend(rouge.map(opt));
        record.extend([
            r.kept_f1.to_string(),
            r.cr.to_string(),
            r.delta_cr_pts.to_string(),
            r.delta_cr_pts.abs().to_string(),
            r.novel_pct.to_string(),
            r.gen_len.to_string(),
            r.src_len.to_string(),
            r.tgt_len.to_string(),
            digest.to_owned(),
        ]);
        w.write_record(&record).map_err(csv_err)?;
    }
    let a = &report.aggregate;
    let rouge = if recall { [a.rouge1_r, a.rouge2_r, a.rouge_l_r] } else { [a.rouge1_f, a.rouge2_f, a.rouge_l_f] };
    let mut record = vec!["aggregate".to_owned(), a.count.to_string()];
    record.extend(rouge.map(opt));
    record.extend([
        a.kept_f1.to_string(),
        a.cr.to_string(),
        a.delta_cr_pts.to_string(),
        a.abs_delta_cr_pts.to_string(),
        a.novel_pct.to_string(),
        a.gen_len.to_string(),
        a.src_len.to_string(),
        a.tgt_len.to_string(),
        digest.to_owned(),
    ]);
    w.write_record(&record).map_err(csv_err)?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Report(e.to_string()))?).expect("utf-8 input"))
}

/// Bucket tables of several systems in one CSV; empty cells mark empty buckets or columns
/// that do not apply to the bucket kind.
pub fn buckets_csv(tables: &[(String, String, BucketTable)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record([
        "system", "config_digest", "dataset", "kind", "bucket", "lo", "hi", "cnt", "R-1", "R-2", "R-L", "F1", "dCR",
        "src_len", "tgt_len", "gen_len",
    ])
    .map_err(csv_err)?;
    for (system, digest, table) in tables {
        let kind = match table.kind {
            sentcomp_core::analysis::BucketKind::GoldCr => "gold_cr",
            sentcomp_core::analysis::BucketKind::GoldWordCount => "gold_word_count",
        };
        for row in &table.rows {
            w.write_record([
                system.clone(),
                digest.clone(),
                table.dataset.clone(),
                kind.to_owned(),
                row.label.clone(),
                row.lo.to_string(),
                row.hi.to_string(),
                row.cnt.to_string(),
                opt(row.rouge1),
                opt(row.rouge2),
                opt(row.rouge_l),
                opt(row.kept_f1),
                opt(row.delta_cr),
                opt(row.src_len),
                opt(row.tgt_len),
                opt(row.gen_len),
            ])
            .map_err(csv_err)?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Report(e.to_string()))?).expect("utf-8 input"))
}

/// Contents of `significance.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceDoc {
    pub analysis_digest: String,
    pub dataset: String,
    pub baseline: String,
    pub permutations: usize,
    pub seed: u64,
    pub note: String,
    pub results: Vec<SignificanceResult>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use sentcomp_core::analysis::compare_reports;
    use sentcomp_core::metrics::{score_example, ReportConfig, ScoreOptions};
    use sentcomp_core::{CompressionExample, Origin};

    fn report(setting: &str, outputs: &[&str]) -> MetricReport {
        let opts = ScoreOptions::default();
        let rows = outputs
            .iter()
            .enumerate()
            .map(|(i, out)| {
                let ex = CompressionExample::from_references(
                    i.to_string(),
                    "the quick brown fox jumps over the dog",
                    vec!["quick fox jumps over dog".into()],
                    Origin::Custom,
                )
                .unwrap();
                let mut s = score_example(&ex, out, &opts);
                s.id = i.to_string();
                s
            })
            .collect();
        let config = ReportConfig {
            dataset: "toy".into(),
            setting: setting.into(),
            instruction: "#3".into(),
            prompting: "none".into(),
            details: [("config_digest".to_owned(), format!("digest-{setting}"))].into(),
        };
        MetricReport::new(config, opts, rows)
    }

    fn pair() -> (Vec<MetricReport>, Vec<SignificanceResult>) {
        let good = report("good", &["quick fox jumps over dog"; 30]);
        let bad = report("bad", &["the brown fox"; 30]);
        let sig = Metric::TABLE.iter().map(|&m| compare_reports(&good, &bad, m, 1000, 3).unwrap()).collect();
        (vec![bad, good], sig)
    }

    #[test]
    fn markdown_marks_winning_cells() {
        let (reports, sig) = pair();
        let options = TableOptions { baseline: Some("bad / #3 / none"), bert_scores: None };
        let md = emit_tables(&reports, &sig, TableFormat::Markdown, &options).unwrap();
        let good = md.lines().find(|l| l.starts_with("| toy | good")).unwrap();
        let bad = md.lines().find(|l| l.starts_with("| toy | bad")).unwrap();
        assert_eq!(good, "| toy | good | #3 | none | 100.00† | 100.00† | 100.00† | 1.00† | +0.00† | 0.00 |");
        assert!(!bad.contains('†'));
        assert!(md.contains("digest-good"));
    }

    #[test]
    fn significance_needs_a_known_baseline() {
        let (reports, sig) = pair();
        let none = TableOptions::default();
        assert!(emit_tables(&reports, &sig, TableFormat::Markdown, &none).is_err());
        let wrong = TableOptions { baseline: Some("nope"), bert_scores: None };
        assert!(emit_tables(&reports, &sig, TableFormat::Markdown, &wrong).is_err());
        assert!(emit_tables(&reports, &[], TableFormat::Markdown, &none).is_ok());
    }

    #[test]
    fn csv_round_trips() {
        let (reports, sig) = pair();
        let bs: BertScores = [("toy".to_owned(), [("good / #3 / none".to_owned(), 0.9123456789)].into())].into();
        let options = TableOptions { baseline: Some("bad / #3 / none"), bert_scores: Some(&bs) };
        let text = emit_tables(&reports, &sig, TableFormat::Csv, &options).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().unwrap().clone();
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        for (row, report) in rows.iter().zip(&reports) {
            for m in Metric::TABLE {
                let parsed: f64 = row[col(m.label())].parse().unwrap();
                assert_eq!(parsed, report.aggregate_value(m));
            }
        }
        assert_eq!(rows[1][col("BS")].parse::<f64>().unwrap(), 0.9123456789);
        assert_eq!(&rows[0][col("BS")], "");
        assert_eq!(&rows[1][col("R-1 significant")], "true");
        assert_eq!(&rows[1][col("novel significant")], "false");
    }

    #[test]
    fn json_nests_dataset_row_metric() {
        let (reports, _) = pair();
        let text = emit_tables(&reports, &[], TableFormat::Json, &TableOptions::default()).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["toy"]["good / #3 / none"]["R-1"], 100.0);
        assert_eq!(v["toy"]["bad / #3 / none"]["dCR"], reports[0].aggregate_value(Metric::DeltaCr));
    }

    #[test]
    fn corpora_must_match() {
        let a = report("a", &["x", "y"]);
        let b = report("b", &["x", "y", "z"]);
        assert!(matches!(check_same_corpus(&[a.clone(), b]), Err(Error::MismatchedCorpora(_))));
        let mut c = a.clone();
        c.config.dataset = "other".into();
        assert!(matches!(check_same_corpus(&[a, c]), Err(Error::MismatchedCorpora(_))));
    }

    #[test]
    fn repeated_rows_get_suffixes() {
        let mut reports = vec![report("a", &["x"]), report("a", &["x"]), report("a", &["x"])];
        disambiguate_rows(&mut reports);
        let keys: Vec<String> = reports.iter().map(|r| r.config.row_key()).collect();
        assert_eq!(keys, ["a / #3 / none", "a (2) / #3 / none", "a (3) / #3 / none"]);
    }

    #[test]
    fn metric_csv_has_aggregate_row() {
        let r = report("a", &["quick fox", "dog"]);
        let text = metric_report_csv(&r).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("row,id,rouge1_f,rouge2_f,rougeL_f,kept_f1"));
        assert!(lines[3].starts_with("aggregate,2,"));
    }
}
