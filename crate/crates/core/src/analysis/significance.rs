//! Paired approximate randomization (sign-flip) test.
//!
//! Each permutation flips the sign of every per-example difference with probability 1/2 and
//! the test counts permutations whose absolute mean difference reaches the observed one.
//! The sign vector of permutation `i` is drawn from a ChaCha stream keyed by `(seed, i)`, so
//! results do not depend on evaluation order.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::metrics::{Metric, MetricReport};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const MIN_PERMUTATIONS: usize = 100;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignificanceError {
    #[error("score lists differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least 2 paired examples, got {0}")]
    TooFewExamples(usize),
    #[error("need at least {MIN_PERMUTATIONS} permutations, got {0}")]
    TooFewPermutations(usize),
    #[error("non-finite score at position {0}")]
    NonFinite(usize),
    #[error("example {id:?} is missing from report {report:?}")]
    Unaligned { id: String, report: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// mean(a) - mean(b)
    pub mean_difference: f64,
    pub p_value: f64,
    pub permutations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric: Metric,
    pub system_a: String,
    pub system_b: String,
    pub mean_difference: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl SignificanceResult {
    pub fn is_significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }

    /// Whether system A improves on system B for this metric.
    pub fn a_is_better(&self) -> bool {
        if self.metric.higher_is_better() {
            self.mean_difference > 0.0
        } else {
            self.mean_difference < 0.0
        }
    }
}

/// Two-sided paired randomization test with add-one smoothing: `(count + 1) / (R + 1)`.
pub fn paired_randomization_test(
    scores_a: &[f64],
    scores_b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<TestOutcome, SignificanceError> {
    if scores_a.len() != scores_b.len() {
        return Err(SignificanceError::LengthMismatch { a: scores_a.len(), b: scores_b.len() });
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(SignificanceError::TooFewExamples(n));
    }
    if permutations < MIN_PERMUTATIONS {
        return Err(SignificanceError::TooFewPermutations(permutations));
    }
    let diffs: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    if let Some(i) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(SignificanceError::NonFinite(i));
    }
    let observed: f64 = diffs.iter().sum();
    // Sums differ from means by the constant factor n; compare sums to avoid the division.
    let threshold = observed.abs() * (1.0 - 1e-12);
    let mut at_least_as_extreme = 0usize;
    let mut signs = Vec::with_capacity(n.div_ceil(64));
    for index in 0..permutations {
        sign_words(seed, index as u64, n, &mut signs);
        let permuted: f64 = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| if signs[i / 64] >> (i % 64) & 1 == 1 { -d } else { *d })
            .sum();
        if permuted.abs() >= threshold {
            at_least_as_extreme += 1;
        }
    }
    Ok(TestOutcome {
        mean_difference: observed / n as f64,
        p_value: (at_least_as_extreme + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

fn sign_words(seed: u64, index: u64, n: usize, out: &mut Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    out.clear();
    out.extend((0..n.div_ceil(64)).map(|_| rng.next_u64()));
}

/// Tests `metric` between two reports, pairing examples by id in report A's order.
///
/// For [`Metric::DeltaCr`] the test runs on per-example magnitudes, since moving closer to
/// the gold ratio is the improvement of interest.
pub fn compare_reports(
    a: &MetricReport,
    b: &MetricReport,
    metric: Metric,
    permutations: usize,
    seed: u64,
) -> Result<SignificanceResult, SignificanceError> {
    let metric = if metric == Metric::DeltaCr { Metric::AbsDeltaCr } else { metric };
    if a.per_example.len() != b.per_example.len() {
        return Err(SignificanceError::LengthMismatch { a: a.per_example.len(), b: b.per_example.len() });
    }
    let mut scores_a = Vec::with_capacity(a.per_example.len());
    let mut scores_b = Vec::with_capacity(a.per_example.len());
    for row in &a.per_example {
        let other = b.get(&row.id).ok_or_else(|| SignificanceError::Unaligned {
            id: row.id.clone(),
            report: b.config.row_key(),
        })?;
        scores_a.push(row.value(metric));
        scores_b.push(other.value(metric));
    }
    let outcome = paired_randomization_test(&scores_a, &scores_b, permutations, seed)?;
    Ok(SignificanceResult {
        metric,
        system_a: a.config.row_key(),
        system_b: b.config.row_key().to_owned(),
        mean_difference: outcome.mean_difference,
        p_value: outcome.p_value,
        permutations,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identical_systems_give_p_one() {
        let a = [1.0, 2.0, 3.5, 0.0];
        let out = paired_randomization_test(&a, &a, 1000, 7).unwrap();
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.mean_difference, 0.0);
    }

    #[test]
    fn constant_difference_is_significant() {
        let a = vec![2.0; 100];
        let b = vec![1.0; 100];
        let out = paired_randomization_test(&a, &b, 10_000, 1).unwrap();
        assert!(out.p_value <= 0.01, "{}", out.p_value);
        assert_eq!(out.mean_difference, 1.0);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 17) % 13) as f64).collect();
        let x = paired_randomization_test(&a, &b, 2000, 42).unwrap();
        let y = paired_randomization_test(&a, &b, 2000, 42).unwrap();
        let z = paired_randomization_test(&b, &a, 2000, 42).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.p_value, z.p_value);
        assert_eq!(x.mean_difference, -z.mean_difference);
    }

    #[test]
    fn input_validation() {
        assert_eq!(
            paired_randomization_test(&[1.0, 2.0], &[1.0], 100, 0).unwrap_err(),
            SignificanceError::LengthMismatch { a: 2, b: 1 }
        );
        assert_eq!(
            paired_randomization_test(&[1.0, 2.0], &[1.0, 2.0], 99, 0).unwrap_err(),
            SignificanceError::TooFewPermutations(99)
        );
        assert_eq!(
            paired_randomization_test(&[1.0], &[1.0], 100, 0).unwrap_err(),
            SignificanceError::TooFewExamples(1)
        );
        assert_eq!(
            paired_randomization_test(&[1.0, f64::NAN], &[1.0, 2.0], 100, 0).unwrap_err(),
            SignificanceError::NonFinite(1)
        );
    }
}
