use proptest::prelude::*;

use sentcomp_core::analysis::{bucket_report, paired_randomization_test, BucketSpec};
use sentcomp_core::corpus::{parse_corpus, CompressionExample, Corpus, CorpusFormat, Origin, Split};
use sentcomp_core::metrics::{kept_token_f1, rouge_l, rouge_n, score_run, ReportConfig, ScoreOptions};
use sentcomp_core::postprocess::{tokenize_words, truncate_at_word, ExtractionConfig};
use sentcomp_core::templating::{compute_length_spec, InstructionTemplate, LengthPolicy, TemplateName};
use sentcomp_core::GenerationRecord;

fn word() -> impl Strategy<Value = String> {
    prop::string::string_regex("[A-Za-z][a-z0-9]{0,6}[.,]?").unwrap()
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..max)
}

fn labeled_example(id: usize) -> impl Strategy<Value = CompressionExample> {
    words(25)
        .prop_flat_map(|tokens| {
            let n = tokens.len();
            (Just(tokens), prop::collection::vec(any::<bool>(), n))
        })
        .prop_filter("at least one kept token", |(_, labels)| labels.iter().any(|k| *k))
        .prop_map(move |(tokens, labels)| {
            CompressionExample::from_labels(id.to_string(), tokens, labels, Origin::Google).unwrap()
        })
}

fn labeled_corpus(max: usize) -> impl Strategy<Value = Corpus> {
    (1..max)
        .prop_flat_map(|n| (0..n).map(labeled_example).collect::<Vec<_>>())
        .prop_map(|examples| Corpus::new("synthetic", Split::Test, examples).unwrap())
}

fn policy() -> impl Strategy<Value = LengthPolicy> {
    prop_oneof![
        Just(LengthPolicy::Gold),
        (1u32..=100).prop_map(|p| LengthPolicy::Ratio(p as f64 / 100.0)),
        (1usize..60).prop_map(LengthPolicy::Fixed),
    ]
}

proptest! {
    #[test]
    fn extract_is_idempotent(raw in "(Sure, here it is:\n|\"|would be:|[a-z ]{0,20}|\n|'| ){0,12}", truncate in prop::option::of(1usize..40)) {
        let cfg = ExtractionConfig { truncate_chars: truncate, ..ExtractionConfig::default() };
        let ex = cfg.compile().unwrap();
        let once = ex.extract(&raw);
        prop_assert_eq!(ex.extract(&once), once);
    }

    #[test]
    fn truncation_shrinks_without_splitting(text in "[a-z]{1,8}( [a-z]{1,8}){0,15}", limit in 1usize..80) {
        let out = truncate_at_word(&text, limit);
        prop_assert!(out.chars().count() <= limit.min(text.chars().count()));
        prop_assert!(text.starts_with(out));
        let next = text[out.len()..].chars().next();
        prop_assert!(out.is_empty() || next.is_none() || next == Some(' '));
    }

    #[test]
    fn references_pass_through_extraction(tokens in words(20)) {
        let reference = tokens.join(" ");
        let out = ExtractionConfig::default().compile().unwrap().extract(&reference);
        prop_assert_eq!(tokenize_words(&out), tokenize_words(&reference));
    }

    #[test]
    fn length_spec_sums(example in labeled_example(0), policy in policy()) {
        let spec = compute_length_spec(&example, policy).unwrap().unwrap();
        prop_assert_eq!(spec.src_len(), spec.keep() + spec.del());
        prop_assert!(spec.keep() >= 1 && spec.keep() <= spec.src_len());
        prop_assert_eq!(spec.src_len(), example.src_len());
    }

    #[test]
    fn priming_prompt_numbers_add_up(example in labeled_example(0), policy in policy()) {
        let spec = compute_length_spec(&example, policy).unwrap();
        let t = InstructionTemplate::builtin(TemplateName::Priming).unwrap();
        let prompt = t.render(&example, spec.as_ref()).unwrap();
        prop_assert_eq!(&prompt, &t.render(&example, spec.as_ref()).unwrap());
        let lines: Vec<&str> = prompt.split('\n').collect();
        let src_len: usize = lines[0].trim_start_matches("Sentence that consists of ").trim_end_matches(" words:").parse().unwrap();
        let last = lines[lines.len() - 2];
        let nums: Vec<usize> = last.split(' ').filter_map(|w| w.parse().ok()).collect();
        prop_assert_eq!(src_len, nums[0] + nums[1]);
    }

    #[test]
    fn rouge_bounds_and_symmetry(a in prop::collection::vec("[abcd]", 0..8), b in prop::collection::vec("[abcd]", 0..8)) {
        for n in 1..=2 {
            let ab = rouge_n(&a, &b, n);
            let ba = rouge_n(&b, &a, n);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert!((0.0..=100.0).contains(&ab.f1));
            prop_assert!(ab.f1 <= ab.precision.max(ab.recall) + 1e-9);
            prop_assert_eq!(ab.f1 == 0.0, ab.precision == 0.0);
        }
        let ab = rouge_l(&a, &b);
        let ba = rouge_l(&b, &a);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.f1, ba.f1);
    }

    #[test]
    fn kept_f1_symmetric(a in prop::collection::vec("[aAbBc]", 0..8), b in prop::collection::vec("[aAbBc]", 0..8)) {
        let x = kept_token_f1(&a, &b);
        prop_assert!((x - kept_token_f1(&b, &a)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn corpus_round_trips(corpus in labeled_corpus(12)) {
        let text = corpus.to_jsonl();
        let back = parse_corpus(&text, CorpusFormat::MultirefJsonl, "synthetic", Split::Test, Origin::Custom).unwrap();
        prop_assert_eq!(&back, &corpus);
        for (i, ex) in back.examples().iter().enumerate() {
            prop_assert_eq!(ex.id(), i.to_string());
        }
    }

    #[test]
    fn labeled_gold_ratio_is_mean_label_rate(corpus in labeled_corpus(12)) {
        let expected: f64 = corpus.examples().iter().map(|e| {
            let labels = e.gold_labels().unwrap();
            labels.iter().filter(|k| **k).count() as f64 / labels.len() as f64
        }).sum::<f64>() / corpus.len() as f64;
        prop_assert!((corpus.gold_compression_ratio().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn oracle_fixed_point_and_bucket_totals(corpus in labeled_corpus(20)) {
        let records: Vec<GenerationRecord> = corpus.examples().iter().map(|e| GenerationRecord {
            example_id: e.id().into(),
            template_name: "priming#3".into(),
            prompt: String::new(),
            raw_completion: e.first_reference().into(),
            extracted: e.first_reference().into(),
            backend_id: "oracle".into(),
            latency_ms: 0,
        }).collect();
        let report = score_run(&records, &corpus, ReportConfig::default(), ScoreOptions::default()).unwrap();
        for row in &report.per_example {
            prop_assert_eq!(row.rouge1_f, Some(100.0));
            prop_assert_eq!(row.rouge_l_f, Some(100.0));
            // A one-word reference has no bigrams, which scores R-2 as 0.
            if row.tgt_len >= 2 {
                prop_assert_eq!(row.rouge2_f, Some(100.0));
            }
            prop_assert_eq!(row.delta_cr_pts, 0.0);
            prop_assert_eq!(row.kept_f1, 1.0);
            prop_assert_eq!(row.novel_pct, 0.0);
        }
        for spec in [BucketSpec::gold_cr(), BucketSpec::gold_word_count()] {
            let table = bucket_report(&report, &corpus, &spec).unwrap();
            prop_assert_eq!(table.total(), corpus.len());
        }
    }

    #[test]
    fn p_value_symmetric(a in prop::collection::vec(0.0f64..100.0, 2..30), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().rev().cloned().collect();
        let x = paired_randomization_test(&a, &b, 200, seed).unwrap();
        let y = paired_randomization_test(&b, &a, 200, seed).unwrap();
        prop_assert_eq!(x.p_value, y.p_value);
        prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
    }
}
