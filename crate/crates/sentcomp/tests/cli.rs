mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{chat_response, prompt_of, MockServer};

const GOOGLE_TSV: &str = "Chinese\tshares\tclosed\tlower\ton\tWednesday\t.\n1\t1\t1\t1\t0\t1\t0\n\n\
The\tcat\tsat\tquietly\ton\tthe\tmat\n0\t1\t1\t0\t0\t0\t1\n\n\
Rain\tis\texpected\tacross\tthe\tregion\ttomorrow\n1\t0\t1\t0\t0\t1\t1\n";

fn sentcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sentcomp")).args(args).env("RUST_LOG", "info").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn setup(dir: &Path, extra: &str) -> PathBuf {
    fs::write(dir.join("google.tsv"), GOOGLE_TSV).unwrap();
    let cfg = dir.join("run.toml");
    fs::write(&cfg, format!("[corpus]\npath = \"google.tsv\"\nname = \"google\"\n{extra}")).unwrap();
    cfg
}

#[test]
fn oracle_pipeline_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "[backend]\nkind = \"oracle\"\n");
    let cfg = cfg.to_str().unwrap();
    for cmd in ["transform", "run", "score"] {
        let out = sentcomp(&[cmd, "-c", cfg]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metrics.json")).unwrap()).unwrap();
    let agg = &report["aggregate"];
    assert_eq!((agg["rouge1_f"].as_f64(), agg["rouge2_f"].as_f64(), agg["rougeL_f"].as_f64()), (Some(100.0), Some(100.0), Some(100.0)));
    assert_eq!(agg["kept_f1"], 1.0);
    assert_eq!(agg["delta_cr_pts"], 0.0);
    assert_eq!(agg["novel_pct"], 0.0);
    let csv = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("aggregate,3,100,100,100,1,"));
    let prompts = fs::read_to_string(dir.path().join("out/prompts.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(prompts.lines().next().unwrap()).unwrap();
    assert_eq!(first["length"], serde_json::json!({"src_len": 7, "keep": 5, "del": 2}));
    assert_eq!(first["refs"], serde_json::json!(["Chinese shares closed lower Wednesday"]));
    assert_eq!(first["config_digest"], report["config"]["details"]["config_digest"]);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let out = sentcomp(&["transform", "-c", cfg.to_str().unwrap(), "--policy", "none", "--template", "#2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("length placeholders"), "{}", stderr(&out));
    assert!(!dir.path().join("out/prompts.jsonl").exists());

    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "a\tb\n1\t0\n\nc\td\te\n1\t0\n").unwrap();
    let out = sentcomp(&["transform", "-c", cfg.to_str().unwrap(), "--corpus", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.tsv") && err.contains("line 5"), "{err}");
}

#[test]
fn empty_corpus_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    fs::write(dir.path().join("google.tsv"), "").unwrap();
    let out = sentcomp(&["transform", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("empty"));
    assert_eq!(fs::read_to_string(dir.path().join("out/prompts.jsonl")).unwrap(), "");
}

#[test]
fn live_run_fills_cache_then_replays_offline() {
    let server = MockServer::start(|i, body| {
        if i == 1 {
            return (503, "busy".into());
        }
        // Echo the source line back as the compression.
        let prompt = prompt_of(body);
        let src = prompt.lines().nth(1).unwrap_or_default();
        (200, chat_response(&format!("Sure! Here is the result:\n\"{src}\"")))
    });
    let dir = tempfile::tempdir().unwrap();
    let extra = format!(
        "[backend]\nkind = \"http\"\nendpoint = \"{}\"\nmodel_id = \"m\"\ninitial_backoff_ms = 1\n",
        server.url
    );
    let cfg = setup(dir.path(), &extra);
    let cfg = cfg.to_str().unwrap();
    let out = sentcomp(&["run", "-c", cfg, "-j", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("retry 1/5"), "{}", stderr(&out));
    assert_eq!(server.requests().len(), 4);
    let cache = fs::read_to_string(dir.path().join("out/cache.jsonl")).unwrap();
    assert_eq!(cache.lines().count(), 3);
    let records = fs::read_to_string(dir.path().join("out/records.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["extracted"], "Chinese shares closed lower on Wednesday .");
    assert!(first["raw_completion"].as_str().unwrap().starts_with("Sure!"));

    // Same config, replay only: no new requests.
    let out = sentcomp(&["run", "-c", cfg, "--backend", "replay"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(server.requests().len(), 4);
    let out = sentcomp(&["score", "-c", cfg, "--backend", "replay"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn strict_replay_miss_exits_two_naming_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "[backend]\nkind = \"oracle\"\n");
    let cfg = cfg.to_str().unwrap();
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/cache.jsonl"), "").unwrap();
    let out = sentcomp(&["run", "-c", cfg, "--backend", "replay"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("example \"0\"") || err.contains("example 0"), "{err}");
    assert!(err.contains("no entry for key"), "{err}");

    let out = sentcomp(&["run", "-c", cfg, "--backend", "replay", "--skip-failures"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.path().join("out/records.jsonl")).unwrap(), "");
}

#[test]
fn incomplete_records_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "[backend]\nkind = \"oracle\"\n");
    let cfg = cfg.to_str().unwrap();
    assert!(sentcomp(&["run", "-c", cfg]).status.success());
    let records = dir.path().join("out/records.jsonl");
    let text = fs::read_to_string(&records).unwrap();
    let partial: Vec<&str> = text.lines().take(2).collect();
    fs::write(&records, partial.join("\n")).unwrap();
    let out = sentcomp(&["score", "-c", cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains('2'), "{}", stderr(&out));
}

#[test]
fn duc_profile_truncates_and_scores_recall() {
    let dir = tempfile::tempdir().unwrap();
    let long = "word ".repeat(30);
    let corpus = format!("{{\"id\":\"d1\",\"src\":\"{long}\",\"refs\":[\"word word\",\"word\"]}}\n");
    fs::write(dir.path().join("duc.jsonl"), corpus).unwrap();
    fs::write(dir.path().join("preds.jsonl"), format!("{{\"id\":\"d1\",\"completion\":\"{long}\"}}\n")).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[corpus]\npath = \"duc.jsonl\"\nformat = \"multiref-jsonl\"\norigin = \"duc\"\n\
         [template]\nname = \"plain#1\"\n[length]\npolicy = \"none\"\n\
         [backend]\nkind = \"predictions\"\npredictions = \"preds.jsonl\"\n[extraction]\nprofile = \"duc\"\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    for cmd in ["run", "score"] {
        let out = sentcomp(&[cmd, "-c", cfg]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }
    let records = fs::read_to_string(dir.path().join("out/records.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(records.trim()).unwrap();
    let extracted = rec["extracted"].as_str().unwrap();
    assert!(extracted.chars().count() <= 75);
    assert_eq!(extracted, "word ".repeat(15).trim_end());
    let header = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert!(header.starts_with("row,id,rouge1_r,rouge2_r,rougeL_r,"), "{header}");
}

#[test]
fn analyze_then_report_marks_significant_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut tsv = String::new();
    for i in 0..40 {
        tsv.push_str(&format!("w{i}\talpha\tbeta\tgamma\tdelta\n1\t1\t0\t1\t0\n\n"));
    }
    fs::write(dir.path().join("c.tsv"), tsv).unwrap();
    let weak: String = (0..40).map(|i| format!("{{\"id\":\"{i}\",\"completion\":\"w{i} alpha beta gamma delta\"}}\n")).collect();
    fs::write(dir.path().join("weak.jsonl"), weak).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[corpus]\npath = \"c.tsv\"\nname = \"toy\"\n[scoring]\npermutations = 2000\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let oracle_dir = dir.path().join("oracle");
    let weak_dir = dir.path().join("weak");
    let preds = dir.path().join("weak.jsonl");
    let (oracle_out, weak_out, preds) = (oracle_dir.to_str().unwrap(), weak_dir.to_str().unwrap(), preds.to_str().unwrap());
    let weak_flags = ["--backend", "predictions", "--predictions", preds, "--template", "#1", "--policy", "none"];
    for cmd in ["run", "score"] {
        let out = sentcomp(&[cmd, "-c", cfg, "-o", oracle_out]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        let mut args = vec![cmd, "-c", cfg, "-o", weak_out];
        args.extend(weak_flags);
        let out = sentcomp(&args);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }

    let analysis = dir.path().join("analysis");
    let oracle_report = oracle_dir.join("metrics.json");
    let weak_report = weak_dir.join("metrics.json");
    let reports = [oracle_report.to_str().unwrap(), weak_report.to_str().unwrap()];
    let out = sentcomp(&["analyze", "-c", cfg, "-o", analysis.to_str().unwrap(), "--reports", reports[0], reports[1]]);
    assert_eq!(out.status.code(), Some(1), "baseline is required");
    let out = sentcomp(&[
        "analyze", "-c", cfg, "-o", analysis.to_str().unwrap(), "--reports", reports[0], reports[1], "--baseline", "zero-shot / #1 / none",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["report.md", "report.csv", "report.json", "buckets.csv", "significance.json"] {
        assert!(analysis.join(file).is_file(), "{file}");
    }
    let md = fs::read_to_string(analysis.join("report.md")).unwrap();
    let oracle_row = md.lines().find(|l| l.contains("| #3 |")).unwrap();
    assert!(oracle_row.contains("100.00†"), "{md}");
    assert!(!md.lines().find(|l| l.contains("| #1 |")).unwrap().contains('†'));

    let out = sentcomp(&[
        "report", "--reports", reports[0], reports[1], "--significance", analysis.join("significance.json").to_str().unwrap(), "--format", "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["toy"]["zero-shot / #3 / none"]["R-1"], 100.0);
    assert!(v["toy"]["zero-shot / #3 / none"]["significant"].as_array().unwrap().contains(&"R-1".into()));
}
