//! Sentence compression examples and the corpus formats they are read from.
//!
//! Three input layouts are understood:
//!
//! - `labeled-tsv`: one example per block, the first line holds tab-separated tokens, the
//!   second line tab-separated `0`/`1` keep labels, blocks are separated by a blank line.
//! - `pair-jsonl`: `{"id"?: .., "src": .., "ref": ..}` per line.
//! - `multiref-jsonl`: `{"id"?: .., "src": .., "refs": [..], "labels"?: [..], "origin"?: ..}`
//!   per line. This is also the interchange layout written by [`Corpus::to_jsonl`].

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::word_count;

/// Dataset tag carried by every example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Google,
    Broadcast,
    Bnc,
    Duc,
    #[default]
    Custom,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Google => "google",
            Origin::Broadcast => "broadcast",
            Origin::Bnc => "bnc",
            Origin::Duc => "duc",
            Origin::Custom => "custom",
        }
    }
}

impl FromStr for Origin {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "google" => Ok(Origin::Google),
            "broadcast" | "broad" => Ok(Origin::Broadcast),
            "bnc" => Ok(Origin::Bnc),
            "duc" => Ok(Origin::Duc),
            "custom" => Ok(Origin::Custom),
            other => Err(CorpusError::UnknownName { kind: "origin", name: other.to_owned() }),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    #[default]
    Test,
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownName { kind: "split", name: other.to_owned() }),
        }
    }
}

/// Layout of a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusFormat {
    #[serde(rename = "labeled-tsv")]
    LabeledTsv,
    #[serde(rename = "pair-jsonl")]
    PairJsonl,
    #[serde(rename = "multiref-jsonl")]
    MultirefJsonl,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "labeled-tsv" => Ok(CorpusFormat::LabeledTsv),
            "pair-jsonl" => Ok(CorpusFormat::PairJsonl),
            "multiref-jsonl" | "interchange-jsonl" => Ok(CorpusFormat::MultirefJsonl),
            other => Err(CorpusError::UnknownName { kind: "corpus format", name: other.to_owned() }),
        }
    }
}

/// Why a single example failed validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExampleError {
    #[error("source sentence has no words")]
    EmptySource,
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("reference {index} is empty")]
    EmptyReference { index: usize },
    #[error("no reference compression")]
    NoReference,
    #[error("first reference {found:?} differs from the kept tokens {expected:?}")]
    InconsistentReference { expected: String, found: String },
    #[error("token {index} is empty or contains whitespace")]
    BadToken { index: usize },
    #[error("label {value:?} is not 0 or 1")]
    BadLabel { value: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: example {id:?}: {error}")]
    InvalidExample { line: usize, id: String, error: ExampleError },
    #[error("duplicate example id {id:?}")]
    DuplicateId { id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
}

/// One source sentence with its gold compression(s).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionExample {
    id: String,
    source: String,
    source_tokens: Vec<String>,
    gold_labels: Option<Vec<bool>>,
    gold_references: Vec<String>,
    origin: Origin,
}

impl CompressionExample {
    /// Builds a labeled example; the single reference is the kept tokens joined by spaces.
    pub fn from_labels(
        id: impl Into<String>,
        tokens: Vec<String>,
        labels: Vec<bool>,
        origin: Origin,
    ) -> Result<Self, ExampleError> {
        if tokens.is_empty() {
            return Err(ExampleError::EmptySource);
        }
        if tokens.len() != labels.len() {
            return Err(ExampleError::LengthMismatch { tokens: tokens.len(), labels: labels.len() });
        }
        if let Some(index) = tokens.iter().position(|t| t.is_empty() || t.contains(char::is_whitespace)) {
            return Err(ExampleError::BadToken { index });
        }
        let reference = kept_text(&tokens, &labels);
        if reference.is_empty() {
            return Err(ExampleError::EmptyReference { index: 0 });
        }
        Ok(Self {
            id: id.into(),
            source: tokens.join(" "),
            source_tokens: tokens,
            gold_labels: Some(labels),
            gold_references: alloc::vec![reference],
            origin,
        })
    }

    /// Builds an example from a raw source string and one or more reference strings.
    pub fn from_references(
        id: impl Into<String>,
        source: impl Into<String>,
        references: Vec<String>,
        origin: Origin,
    ) -> Result<Self, ExampleError> {
        let source = source.into();
        let source_tokens: Vec<String> = source.split_whitespace().map(ToOwned::to_owned).collect();
        if source_tokens.is_empty() {
            return Err(ExampleError::EmptySource);
        }
        if references.is_empty() {
            return Err(ExampleError::NoReference);
        }
        if let Some(index) = references.iter().position(|r| r.trim().is_empty()) {
            return Err(ExampleError::EmptyReference { index });
        }
        Ok(Self {
            id: id.into(),
            source,
            source_tokens,
            gold_labels: None,
            gold_references: references,
            origin,
        })
    }

    /// Attaches keep labels to a reference-based example, checking them against the
    /// tokens and the first reference.
    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self, ExampleError> {
        if labels.len() != self.source_tokens.len() {
            return Err(ExampleError::LengthMismatch {
                tokens: self.source_tokens.len(),
                labels: labels.len(),
            });
        }
        let expected = kept_text(&self.source_tokens, &labels);
        if expected != self.gold_references[0] {
            return Err(ExampleError::InconsistentReference {
                expected,
                found: self.gold_references[0].clone(),
            });
        }
        self.gold_labels = Some(labels);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The raw source sentence as read from the corpus.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn source_tokens(&self) -> &[String] {
        &self.source_tokens
    }

    pub fn gold_labels(&self) -> Option<&[bool]> {
        self.gold_labels.as_deref()
    }

    pub fn gold_references(&self) -> &[String] {
        &self.gold_references
    }

    /// The canonical reference, used for gold compression ratios and length priming.
    pub fn first_reference(&self) -> &str {
        &self.gold_references[0]
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn src_len(&self) -> usize {
        self.source_tokens.len()
    }

    /// Word count of the first reference divided by the source word count.
    pub fn gold_ratio(&self) -> f64 {
        word_count(self.first_reference()) as f64 / self.src_len() as f64
    }
}

fn kept_text(tokens: &[String], labels: &[bool]) -> String {
    tokens
        .iter()
        .zip(labels)
        .filter(|(_, keep)| **keep)
        .map(|(t, _)| t.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// An ordered collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    split: Split,
    examples: Vec<CompressionExample>,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        examples: Vec<CompressionExample>,
    ) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for ex in &examples {
            if !seen.insert(ex.id()) {
                return Err(CorpusError::DuplicateId { id: ex.id().to_owned() });
            }
        }
        Ok(Self { name: name.into(), split, examples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn examples(&self) -> &[CompressionExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CompressionExample> {
        self.examples.iter().find(|e| e.id() == id)
    }

    /// Mean over examples of first-reference words / source words.
    pub fn gold_compression_ratio(&self) -> Result<f64, CorpusError> {
        if self.examples.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let total: f64 = self.examples.iter().map(CompressionExample::gold_ratio).sum();
        Ok(total / self.examples.len() as f64)
    }

    /// Serializes to the interchange JSONL layout, one example per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            let line = InterchangeLine {
                id: Some(ex.id.clone()),
                src: ex.source.clone(),
                labels: ex.gold_labels.as_ref().map(|l| l.iter().map(|&k| u8::from(k)).collect()),
                refs: ex.gold_references.clone(),
                origin: Some(ex.origin),
            };
            // Serializing plain strings and integers cannot fail.
            out.push_str(&serde_json::to_string(&line).expect("interchange line serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct InterchangeLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<u8>>,
    refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Origin>,
}

#[derive(Deserialize)]
struct PairLine {
    #[serde(default)]
    id: Option<String>,
    src: String,
    #[serde(rename = "ref")]
    reference: String,
}

/// Parses corpus text in the given layout.
///
/// Examples without an explicit id are numbered by their zero-based position.
pub fn parse_corpus(
    text: &str,
    format: CorpusFormat,
    name: &str,
    split: Split,
    origin: Origin,
) -> Result<Corpus, CorpusError> {
    let examples = match format {
        CorpusFormat::LabeledTsv => parse_labeled_tsv(text, origin)?,
        CorpusFormat::PairJsonl => parse_pair_jsonl(text, origin)?,
        CorpusFormat::MultirefJsonl => parse_multiref_jsonl(text, origin)?,
    };
    Corpus::new(name, split, examples)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn parse_labeled_tsv(text: &str, origin: Origin) -> Result<Vec<CompressionExample>, CorpusError> {
    let mut examples = Vec::new();
    let mut it = lines(text).peekable();
    loop {
        while matches!(it.peek(), Some((_, l)) if l.trim().is_empty()) {
            it.next();
        }
        let Some((token_line, tokens)) = it.next() else { break };
        let (label_line, labels) = match it.next() {
            Some((n, l)) if !l.trim().is_empty() => (n, l),
            Some((n, _)) => {
                return Err(CorpusError::Malformed { line: n, message: "expected a label line".into() })
            }
            None => {
                return Err(CorpusError::Malformed {
                    line: token_line + 1,
                    message: "missing label line at end of file".into(),
                })
            }
        };
        if let Some((n, extra)) = it.peek() {
            if !extra.trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line: *n,
                    message: "expected a blank line between examples".into(),
                });
            }
        }
        let tokens: Vec<String> = tokens.split('\t').map(ToOwned::to_owned).collect();
        let labels = labels
            .split('\t')
            .map(|v| match v.trim() {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(ExampleError::BadLabel { value: other.to_owned() }),
            })
            .collect::<Result<Vec<_>, _>>();
        let id = examples.len().to_string();
        let example = labels
            .and_then(|labels| CompressionExample::from_labels(id.clone(), tokens, labels, origin))
            .map_err(|error| CorpusError::InvalidExample { line: label_line, id, error })?;
        examples.push(example);
    }
    Ok(examples)
}

fn json_line<'a, T: Deserialize<'a>>(line: usize, text: &'a str) -> Result<T, CorpusError> {
    serde_json::from_str(text).map_err(|e| CorpusError::Malformed { line, message: e.to_string() })
}

fn parse_pair_jsonl(text: &str, origin: Origin) -> Result<Vec<CompressionExample>, CorpusError> {
    let mut examples = Vec::new();
    for (n, line) in lines(text).filter(|(_, l)| !l.trim().is_empty()) {
        let row: PairLine = json_line(n, line)?;
        let id = row.id.unwrap_or_else(|| examples.len().to_string());
        let example = CompressionExample::from_references(id.clone(), row.src, alloc::vec![row.reference], origin)
            .map_err(|error| CorpusError::InvalidExample { line: n, id, error })?;
        examples.push(example);
    }
    Ok(examples)
}

fn parse_multiref_jsonl(text: &str, origin: Origin) -> Result<Vec<CompressionExample>, CorpusError> {
    let mut examples = Vec::new();
    for (n, line) in lines(text).filter(|(_, l)| !l.trim().is_empty()) {
        let row: InterchangeLine = json_line(n, line)?;
        let id = row.id.unwrap_or_else(|| examples.len().to_string());
        let invalid = |error| CorpusError::InvalidExample { line: n, id: id.clone(), error };
        let mut example =
            CompressionExample::from_references(id.clone(), row.src, row.refs, row.origin.unwrap_or(origin))
                .map_err(invalid)?;
        if let Some(labels) = row.labels {
            let labels = labels
                .into_iter()
                .map(|v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(ExampleError::BadLabel { value: format!("{other}") }),
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            example = example.with_labels(labels).map_err(invalid)?;
        }
        examples.push(example);
    }
    Ok(examples)
}
