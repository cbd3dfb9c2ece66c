//! Instruction templates and length priming.
//!
//! A template body is plain text with up to four placeholders: `{src}` (the raw source
//! sentence), `{src len}` (its word count), `{keep}` (words to keep) and `{del}` (words to
//! delete). The three numbers come from a [`LengthSpec`], itself derived from an example and
//! a [`LengthPolicy`].

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::CompressionExample;
use crate::word_count;

/// Default chain-of-thought prefix. The exact wording used in published runs is not known;
/// this is the common zero-shot trigger.
pub const COT_PREFIX: &str = "Let's think step by step.\n";

/// Default single-prompt tree-of-thought preamble (reconstruction).
pub const TOT_PREFIX: &str = "Imagine three different experts are answering this question. \
All experts will write down 1 step of their thinking, then share it with the group. \
Then all experts will go on to the next step, etc. \
If any expert realises they're wrong at any point then they leave.\n";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template} needs a length spec but none was given")]
    MissingLengthSpec { template: String },
    #[error("unknown placeholder {{{name}}} in template body")]
    UnknownPlaceholder { name: String },
    #[error("template body must contain {{src}} exactly once, found {count}")]
    SourcePlaceholder { count: usize },
    #[error("unknown template name {0:?}")]
    UnknownTemplate(String),
    #[error("invalid length spec: keep={keep}, src_len={src_len}")]
    InvalidLengthSpec { src_len: usize, keep: usize },
    #[error("invalid length policy: {0}")]
    InvalidPolicy(String),
    #[error("example {id:?} has an empty source")]
    EmptySource { id: String },
}

/// Source length, kept words and deleted words; always `src_len == keep + del`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LengthSpec {
    src_len: usize,
    keep: usize,
    del: usize,
}

impl LengthSpec {
    pub fn new(src_len: usize, keep: usize) -> Result<Self, TemplateError> {
        if keep == 0 || keep > src_len {
            return Err(TemplateError::InvalidLengthSpec { src_len, keep });
        }
        Ok(Self { src_len, keep, del: src_len - keep })
    }

    pub fn src_len(&self) -> usize {
        self.src_len
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn del(&self) -> usize {
        self.del
    }
}

/// How the target length of a compression is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum LengthPolicy {
    /// Word count of the first gold reference.
    Gold,
    /// A fraction of the source length, rounded half-up.
    Ratio(f64),
    /// A fixed word count, capped at the source length.
    Fixed(usize),
    /// No length information.
    None,
}

impl LengthPolicy {
    pub fn validate(self) -> Result<Self, TemplateError> {
        match self {
            LengthPolicy::Ratio(r) if !(r > 0.0 && r <= 1.0) => {
                Err(TemplateError::InvalidPolicy(format!("ratio must be in (0, 1], got {r}")))
            }
            LengthPolicy::Fixed(0) => Err(TemplateError::InvalidPolicy("fixed length must be at least 1".into())),
            p => Ok(p),
        }
    }
}

impl fmt::Display for LengthPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LengthPolicy::Gold => f.write_str("gold"),
            LengthPolicy::Ratio(r) => write!(f, "ratio:{r}"),
            LengthPolicy::Fixed(k) => write!(f, "fixed:{k}"),
            LengthPolicy::None => f.write_str("none"),
        }
    }
}

impl FromStr for LengthPolicy {
    type Err = TemplateError;

    /// Parses `gold`, `none`, `ratio:0.75` or `fixed:11`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TemplateError::InvalidPolicy(format!("cannot parse {s:?}"));
        let policy = match s.split_once(':') {
            None if s == "gold" => LengthPolicy::Gold,
            None if s == "none" => LengthPolicy::None,
            Some(("ratio", v)) => LengthPolicy::Ratio(v.trim().parse().map_err(|_| bad())?),
            Some(("fixed", v)) => LengthPolicy::Fixed(v.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        policy.validate()
    }
}

/// Computes the length spec for an example, or `None` under [`LengthPolicy::None`].
///
/// The kept count is clamped to `[1, src_len]` in every mode, so abstractive references
/// longer than their source still yield a valid spec.
pub fn compute_length_spec(
    example: &CompressionExample,
    policy: LengthPolicy,
) -> Result<Option<LengthSpec>, TemplateError> {
    let src_len = example.src_len();
    if src_len == 0 {
        return Err(TemplateError::EmptySource { id: example.id().to_owned() });
    }
    let keep = match policy.validate()? {
        LengthPolicy::None => return Ok(None),
        LengthPolicy::Gold => word_count(example.first_reference()),
        LengthPolicy::Ratio(r) => round_half_up(r * src_len as f64),
        LengthPolicy::Fixed(k) => k,
    };
    LengthSpec::new(src_len, keep.clamp(1, src_len)).map(Some)
}

// Products like 0.35 * 10 land a hair under the half point in binary; the small slack keeps
// them rounding up the way the decimal value would.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum TemplateName {
    #[serde(rename = "plain#1")]
    Plain,
    #[serde(rename = "length#2")]
    Length,
    #[serde(rename = "priming#3")]
    Priming,
    #[serde(rename = "src-priming#3-1")]
    SrcPriming,
    #[serde(rename = "tgt-priming#3-2")]
    TgtPriming,
    #[serde(rename = "flan#1")]
    Flan1,
    #[serde(rename = "flan#2")]
    Flan2,
    #[serde(rename = "flan#3")]
    Flan3,
    #[serde(rename = "custom")]
    Custom,
}

impl TemplateName {
    pub const BUILTIN: [TemplateName; 8] = [
        TemplateName::Plain,
        TemplateName::Length,
        TemplateName::Priming,
        TemplateName::SrcPriming,
        TemplateName::TgtPriming,
        TemplateName::Flan1,
        TemplateName::Flan2,
        TemplateName::Flan3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Plain => "plain#1",
            TemplateName::Length => "length#2",
            TemplateName::Priming => "priming#3",
            TemplateName::SrcPriming => "src-priming#3-1",
            TemplateName::TgtPriming => "tgt-priming#3-2",
            TemplateName::Flan1 => "flan#1",
            TemplateName::Flan2 => "flan#2",
            TemplateName::Flan3 => "flan#3",
            TemplateName::Custom => "custom",
        }
    }

    /// Short instruction label used in report tables (`#1`, `#3-1`, ...).
    pub fn short_label(self) -> &'static str {
        match self {
            TemplateName::Plain => "#1",
            TemplateName::Length => "#2",
            TemplateName::Priming => "#3",
            TemplateName::SrcPriming => "#3-1",
            TemplateName::TgtPriming => "#3-2",
            TemplateName::Flan1 => "flan#1",
            TemplateName::Flan2 => "flan#2",
            TemplateName::Flan3 => "flan#3",
            TemplateName::Custom => "custom",
        }
    }

    fn builtin_body(self) -> Option<&'static str> {
        Some(match self {
            TemplateName::Plain => "Sentence:\n{src}\nThe sentence without the less important words would be:\n",
            TemplateName::Length => {
                "Sentence:\n{src}\nThe sentence without the less important {del} words would be:\n"
            }
            TemplateName::Priming => {
                "Sentence that consists of {src len} words:\n{src}\n\
                 The sentence that consists of {keep} words without the less important {del} words would be:\n"
            }
            TemplateName::SrcPriming => {
                "Sentence that consists of {src len} words:\n{src}\n\
                 The sentence without the less important {del} words would be:\n"
            }
            TemplateName::TgtPriming => {
                "Sentence:\n{src}\n\
                 The sentence that consists of {keep} words without the less important {del} words would be:\n"
            }
            TemplateName::Flan1 => "Sentence:\n{src}\nSummarize without the less important words would be:\n",
            TemplateName::Flan2 => {
                "Sentence:\n{src}\nSummarize without the less important {del} words would be:\n"
            }
            TemplateName::Flan3 => {
                "Sentence with {src len} words:\n{src}\n\
                 Summarize in {keep} words without the less important {del} words would be:\n"
            }
            TemplateName::Custom => return None,
        })
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = match s {
            "plain#1" | "#1" | "1" => TemplateName::Plain,
            "length#2" | "#2" | "2" => TemplateName::Length,
            "priming#3" | "#3" | "3" => TemplateName::Priming,
            "src-priming#3-1" | "#3-1" | "3-1" => TemplateName::SrcPriming,
            "tgt-priming#3-2" | "#3-2" | "3-2" => TemplateName::TgtPriming,
            "flan#1" => TemplateName::Flan1,
            "flan#2" => TemplateName::Flan2,
            "flan#3" => TemplateName::Flan3,
            "custom" => TemplateName::Custom,
            other => return Err(TemplateError::UnknownTemplate(other.to_owned())),
        };
        Ok(name)
    }
}

/// Prompting strategy, realized as a verbatim prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Prompting {
    #[default]
    None,
    ChainOfThought,
    TreeOfThought,
    Custom(String),
}

impl Prompting {
    pub fn prefix(&self) -> Option<&str> {
        match self {
            Prompting::None => None,
            Prompting::ChainOfThought => Some(COT_PREFIX),
            Prompting::TreeOfThought => Some(TOT_PREFIX),
            Prompting::Custom(text) => Some(text),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Prompting::None => "none",
            Prompting::ChainOfThought => "chain-of-thought",
            Prompting::TreeOfThought => "tree-of-thought",
            Prompting::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placeholder {
    Src,
    SrcLen,
    Keep,
    Del,
}

impl Placeholder {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "src" => Some(Placeholder::Src),
            "src len" => Some(Placeholder::SrcLen),
            "keep" => Some(Placeholder::Keep),
            "del" => Some(Placeholder::Del),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(Placeholder),
}

// Braced runs of letters, digits, inner spaces and underscores are placeholders; any other
// brace is literal text.
fn parse_body(body: &str) -> Result<Vec<Piece>, TemplateError> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let candidate = after
            .find('}')
            .map(|close| &after[..close])
            .filter(|name| {
                !name.is_empty()
                    && !name.starts_with(' ')
                    && !name.ends_with(' ')
                    && name.chars().all(|c| c.is_alphanumeric() || c == ' ' || c == '_')
            });
        match candidate {
            Some(name) => {
                let slot = Placeholder::parse(name)
                    .ok_or_else(|| TemplateError::UnknownPlaceholder { name: name.to_owned() })?;
                text.push_str(&rest[..open]);
                if !text.is_empty() {
                    pieces.push(Piece::Text(core::mem::take(&mut text)));
                }
                pieces.push(Piece::Slot(slot));
                rest = &after[name.len() + 1..];
            }
            None => {
                text.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    let count = pieces.iter().filter(|p| **p == Piece::Slot(Placeholder::Src)).count();
    if count != 1 {
        return Err(TemplateError::SourcePlaceholder { count });
    }
    Ok(pieces)
}

/// A named prompt skeleton with an optional verbatim prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTemplate {
    name: TemplateName,
    body: String,
    prefix: Option<String>,
    pieces: Vec<Piece>,
}

impl InstructionTemplate {
    pub fn builtin(name: TemplateName) -> Result<Self, TemplateError> {
        let body = name
            .builtin_body()
            .ok_or_else(|| TemplateError::UnknownTemplate("custom templates need a body".into()))?;
        Self::with_body(name, body)
    }

    pub fn custom(body: impl Into<String>) -> Result<Self, TemplateError> {
        Self::with_body(TemplateName::Custom, body)
    }

    fn with_body(name: TemplateName, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let pieces = parse_body(&body)?;
        Ok(Self { name, body, prefix: None, pieces })
    }

    pub fn with_prefix(mut self, prefix: Option<&str>) -> Self {
        self.prefix = prefix.map(ToOwned::to_owned);
        self
    }

    pub fn name(&self) -> TemplateName {
        self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn prefix(&self) -> Option<&str> {
        self.prefix.as_deref()
    }

    /// Whether the body references `{src len}`, `{keep}` or `{del}`.
    pub fn uses_length(&self) -> bool {
        self.pieces
            .iter()
            .any(|p| matches!(p, Piece::Slot(Placeholder::SrcLen | Placeholder::Keep | Placeholder::Del)))
    }

    /// Renders the prompt for one example.
    ///
    /// A spec handed to a template without length placeholders is ignored.
    pub fn render(&self, example: &CompressionExample, spec: Option<&LengthSpec>) -> Result<String, TemplateError> {
        let spec = match (self.uses_length(), spec) {
            (true, None) => {
                return Err(TemplateError::MissingLengthSpec { template: self.name.as_str().to_string() })
            }
            (_, spec) => spec,
        };
        let mut out = String::with_capacity(self.body.len() + example.source().len() + 16);
        if let Some(prefix) = &self.prefix {
            out.push_str(prefix);
        }
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(Placeholder::Src) => out.push_str(example.source()),
                // uses_length() guarantees a spec whenever a numeric slot exists.
                Piece::Slot(slot) => {
                    let spec = spec.expect("length spec checked above");
                    let n = match slot {
                        Placeholder::SrcLen => spec.src_len,
                        Placeholder::Keep => spec.keep,
                        Placeholder::Del => spec.del,
                        Placeholder::Src => unreachable!(),
                    };
                    out.push_str(&n.to_string());
                }
            }
        }
        Ok(out)
    }
}
