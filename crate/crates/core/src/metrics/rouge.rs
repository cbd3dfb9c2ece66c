use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::porter;

/// Precision, recall and F1 on a 0-100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Builds percentages from an overlap count; zero denominators give zero components.
    pub fn from_counts(overlap: usize, system: usize, reference: usize) -> Self {
        let ratio = |den: usize| if den == 0 { 0.0 } else { overlap as f64 / den as f64 };
        let (p, r) = (ratio(system), ratio(reference));
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Self { precision: 100.0 * p, recall: 100.0 * r, f1: 100.0 * f1 }
    }
}

/// Scorer-side token normalization: lowercase, treat every run of characters outside
/// `[a-z0-9]` as a separator, drop empties, and optionally Porter-stem tokens longer than
/// three characters.
pub fn normalize<S: AsRef<str>>(tokens: &[S], stemming: bool) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens {
        let lower = token.as_ref().to_lowercase();
        for piece in lower.split(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit())) {
            if piece.is_empty() {
                continue;
            }
            if stemming && piece.len() > 3 {
                out.push(porter::stem(piece));
            } else {
                out.push(String::from(piece));
            }
        }
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N over already-normalized tokens.
pub fn rouge_n_normalized(system: &[String], reference: &[String], n: usize) -> Prf {
    let sys = ngram_counts(system, n);
    let refs = ngram_counts(reference, n);
    let overlap = sys.iter().map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0))).sum();
    Prf::from_counts(overlap, sys.values().sum(), refs.values().sum())
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L over already-normalized tokens.
pub fn rouge_l_normalized(system: &[String], reference: &[String]) -> Prf {
    Prf::from_counts(lcs_len(system, reference), system.len(), reference.len())
}

/// ROUGE-N between a system and a reference token list (no stemming).
pub fn rouge_n<S: AsRef<str>>(system: &[S], reference: &[S], n: usize) -> Prf {
    rouge_n_normalized(&normalize(system, false), &normalize(reference, false), n)
}

/// ROUGE-L between a system and a reference token list (no stemming).
pub fn rouge_l<S: AsRef<str>>(system: &[S], reference: &[S]) -> Prf {
    rouge_l_normalized(&normalize(system, false), &normalize(reference, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 0.005
    }

    #[test]
    fn identity_is_perfect() {
        let t = ["the", "cat", "sat"];
        assert_eq!(rouge_n(&t, &t, 1).f1, 100.0);
        assert_eq!(rouge_n(&t, &t, 2).f1, 100.0);
        assert_eq!(rouge_l(&t, &t).f1, 100.0);
    }

    #[test]
    fn hand_counted_pairs() {
        let reference = ["the", "cat", "sat"];
        let system = ["the", "cat"];
        let r1 = rouge_n(&system[..], &reference[..], 1);
        assert!(close(r1.precision, 100.0) && close(r1.recall, 66.67) && close(r1.f1, 80.0));
        let r2 = rouge_n(&system[..], &reference[..], 2);
        assert!(close(r2.precision, 100.0) && close(r2.recall, 50.0) && close(r2.f1, 66.67));

        let rl = rouge_l(&["a", "c"][..], &["a", "b", "c", "d"][..]);
        assert!(close(rl.precision, 100.0) && close(rl.recall, 50.0) && close(rl.f1, 66.67));
    }

    #[test]
    fn disjoint_and_empty() {
        assert_eq!(rouge_l(&["x", "y"], &["a", "b"]).f1, 0.0);
        assert_eq!(rouge_n::<&str>(&[], &["a"], 1), Prf::default());
        assert_eq!(rouge_n(&["a"], &["a"], 2), Prf::default());
    }

    #[test]
    fn normalization_splits_on_punctuation() {
        assert_eq!(normalize(&["SM-857", "Brazil.", "--", "Caf\u{e9}"], false), ["sm", "857", "brazil", "caf"]);
        assert_eq!(normalize(&["Shares", "closed"], true), ["share", "close"]);
        assert_eq!(normalize(&["was"], true), ["was"]);
    }

    #[test]
    fn repeated_ngrams_are_clipped() {
        let r = rouge_n(&["a", "a", "a"], &["a", "b"], 1);
        assert!(close(r.precision, 100.0 / 3.0));
        assert!(close(r.recall, 50.0));
    }
}
