//! Boundary analysis: per-bucket means keyed by gold compression ratio or gold word count.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::metrics::{Metric, MetricReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BucketError {
    #[error("bucket edges must be strictly ascending with at least two values")]
    BadEdges,
    #[error("example {id:?} has value {value} outside all buckets")]
    OutOfRange { id: String, value: f64 },
    #[error("report has no scores for example {0:?}")]
    MissingExample(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketKind {
    /// First-reference words over source words.
    GoldCr,
    /// First-reference word count.
    GoldWordCount,
}

/// Half-open buckets `[lo, hi)`; the topmost bucket also includes its upper edge when that
/// edge is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    kind: BucketKind,
    edges: Vec<f64>,
}

impl BucketSpec {
    pub fn new(kind: BucketKind, edges: Vec<f64>) -> Result<Self, BucketError> {
        let ascending = edges.windows(2).all(|w| w[0] < w[1]);
        if edges.len() < 2 || !ascending || edges.iter().any(|e| e.is_nan()) {
            return Err(BucketError::BadEdges);
        }
        Ok(Self { kind, edges })
    }

    pub fn gold_cr() -> Self {
        Self { kind: BucketKind::GoldCr, edges: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0] }
    }

    pub fn gold_word_count() -> Self {
        Self { kind: BucketKind::GoldWordCount, edges: vec![0.0, 5.0, 10.0, 15.0, 20.0, f64::INFINITY] }
    }

    pub fn kind(&self) -> BucketKind {
        self.kind
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the bucket holding `value`.
    pub fn locate(&self, value: f64) -> Option<usize> {
        let last = self.len() - 1;
        (0..self.len()).find(|&i| {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            value >= lo && (value < hi || (i == last && value == hi))
        })
    }

    pub fn label(&self, index: usize) -> String {
        let (lo, hi) = (self.edges[index], self.edges[index + 1]);
        if hi.is_infinite() {
            format!("{lo}~")
        } else {
            format!("{lo}~{hi}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub cnt: usize,
    /// Means of R-1, R-2, R-L and kept-token F1; `None` for empty buckets.
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    pub rouge_l: Option<f64>,
    pub kept_f1: Option<f64>,
    /// Reported for compression-ratio buckets.
    pub delta_cr: Option<f64>,
    /// Reported for word-count buckets.
    pub src_len: Option<f64>,
    pub tgt_len: Option<f64>,
    pub gen_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub dataset: String,
    pub kind: BucketKind,
    pub rows: Vec<BucketRow>,
}

impl BucketTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.cnt).sum()
    }
}

/// Assigns every corpus example to exactly one bucket and averages its scores per bucket.
pub fn bucket_report(report: &MetricReport, corpus: &Corpus, spec: &BucketSpec) -> Result<BucketTable, BucketError> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); spec.len()];
    for example in corpus.examples() {
        let row = report
            .per_example
            .iter()
            .position(|r| r.id == example.id())
            .ok_or_else(|| BucketError::MissingExample(example.id().to_owned()))?;
        let value = match spec.kind {
            BucketKind::GoldCr => example.gold_ratio(),
            BucketKind::GoldWordCount => crate::word_count(example.first_reference()) as f64,
        };
        let bucket = spec
            .locate(value)
            .ok_or_else(|| BucketError::OutOfRange { id: example.id().to_owned(), value })?;
        members[bucket].push(row);
    }
    let rows = members
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            let mean = |metric: Metric| {
                (!rows.is_empty()).then(|| {
                    rows.iter().map(|&r| report.per_example[r].value(metric)).sum::<f64>() / rows.len() as f64
                })
            };
            let by_cr = spec.kind == BucketKind::GoldCr;
            BucketRow {
                label: spec.label(i),
                lo: spec.edges[i],
                hi: spec.edges[i + 1],
                cnt: rows.len(),
                rouge1: mean(Metric::Rouge1),
                rouge2: mean(Metric::Rouge2),
                rouge_l: mean(Metric::RougeL),
                kept_f1: mean(Metric::KeptF1),
                delta_cr: if by_cr { mean(Metric::DeltaCr) } else { None },
                src_len: if by_cr { None } else { mean(Metric::SrcLen) },
                tgt_len: if by_cr { None } else { mean(Metric::TgtLen) },
                gen_len: if by_cr { None } else { mean(Metric::GenLen) },
            }
        })
        .collect();
    Ok(BucketTable { dataset: corpus.name().to_owned(), kind: spec.kind, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let cr = BucketSpec::gold_cr();
        assert_eq!(cr.locate(0.45), Some(2));
        assert_eq!(cr.locate(0.4), Some(2));
        assert_eq!(cr.locate(0.0), Some(0));
        assert_eq!(cr.locate(1.0), Some(4));
        assert_eq!(cr.locate(1.2), None);
        assert_eq!(cr.locate(-0.1), None);
        let wc = BucketSpec::gold_word_count();
        assert_eq!(wc.locate(20.0), Some(4));
        assert_eq!(wc.locate(250.0), Some(4));
        assert_eq!(wc.locate(4.0), Some(0));
        assert_eq!(wc.label(4), "20~");
        assert_eq!(cr.label(2), "0.4~0.6");
    }

    #[test]
    fn bad_edges() {
        assert_eq!(BucketSpec::new(BucketKind::GoldCr, vec![0.0]), Err(BucketError::BadEdges));
        assert_eq!(BucketSpec::new(BucketKind::GoldCr, vec![0.0, 0.5, 0.5]), Err(BucketError::BadEdges));
    }
}
