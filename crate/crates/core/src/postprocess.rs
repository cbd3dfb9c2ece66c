//! From raw completion to the compressed sentence that is scored.
//!
//! One extraction pass runs:
//!
//! 1. keep the text after the last occurrence of the cue phrase, if present;
//! 2. drop lines matching any preamble pattern ("Sure, here is ...:");
//! 3. take the first non-empty remaining line;
//! 4. strip wrapping quotation marks and trim;
//! 5. optionally truncate to a character budget, dropping a trailing partial word.
//!
//! Every step yields a substring of its input, and [`Extractor::extract`] repeats the pass
//! until the text stops changing, which makes extraction idempotent.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CUE_PHRASE: &str = "would be:";

/// Character budget of the DUC evaluation protocol.
pub const DUC_TRUNCATE_CHARS: usize = 75;

const DEFAULT_PREAMBLES: [&str; 3] = [
    r"(?i)^(sure|certainly|of course|okay|ok|absolutely)\s*[!,.:]",
    r"(?i)^here(\s+is|'s|\s+are)\b.*:$",
    r"(?i)^(the\s+)?(compressed|shortened|new|resulting)\s+(sentence|version)(\s+is)?\s*:$",
];

const QUOTE_PAIRS: [(char, char); 6] =
    [('"', '"'), ('\'', '\''), ('`', '`'), ('\u{201c}', '\u{201d}'), ('\u{2018}', '\u{2019}'), ('\u{ab}', '\u{bb}')];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractionError {
    #[error("invalid preamble pattern {pattern:?}: {message}")]
    BadPattern { pattern: String, message: String },
    #[error("truncate_chars must be at least 1")]
    ZeroTruncation,
}

/// Serializable extraction settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Empty disables the cue step.
    pub cue_phrase: String,
    pub strip_quotes: bool,
    pub preamble_patterns: Vec<String>,
    pub truncate_chars: Option<usize>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            cue_phrase: DEFAULT_CUE_PHRASE.to_owned(),
            strip_quotes: true,
            preamble_patterns: DEFAULT_PREAMBLES.iter().map(|p| (*p).to_owned()).collect(),
            truncate_chars: None,
        }
    }
}

impl ExtractionConfig {
    /// Default extraction plus the 75-character truncation used for DUC.
    pub fn duc() -> Self {
        Self { truncate_chars: Some(DUC_TRUNCATE_CHARS), ..Self::default() }
    }

    /// Looks up a named profile (`default` or `duc`).
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "duc" => Some(Self::duc()),
            _ => None,
        }
    }

    pub fn compile(&self) -> Result<Extractor, ExtractionError> {
        if self.truncate_chars == Some(0) {
            return Err(ExtractionError::ZeroTruncation);
        }
        let preambles = self
            .preamble_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|e| ExtractionError::BadPattern { pattern: p.clone(), message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Extractor { config: self.clone(), preambles })
    }
}

/// A compiled [`ExtractionConfig`].
#[derive(Debug, Clone)]
pub struct Extractor {
    config: ExtractionConfig,
    preambles: Vec<Regex>,
}

impl Extractor {
    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    pub fn extract(&self, raw: &str) -> String {
        let mut current = self.pass(raw);
        loop {
            let next = self.pass(current);
            // Each pass returns a substring, so equal length means a fixed point.
            if next.len() == current.len() {
                return current.to_owned();
            }
            current = next;
        }
    }

    fn pass<'a>(&self, raw: &'a str) -> &'a str {
        let cfg = &self.config;
        let mut text = raw;
        if !cfg.cue_phrase.is_empty() {
            if let Some(at) = text.rfind(cfg.cue_phrase.as_str()) {
                text = &text[at + cfg.cue_phrase.len()..];
            }
        }
        let line = text
            .split('\n')
            .map(str::trim)
            .find(|line| !self.unquote(line).is_empty() && !self.is_preamble(line))
            .unwrap_or("");
        let mut out = self.unquote(line);
        if let Some(limit) = cfg.truncate_chars {
            out = self.unquote(truncate_at_word(out, limit));
        }
        out
    }

    fn is_preamble(&self, line: &str) -> bool {
        let bare = self.unquote(line);
        self.preambles.iter().any(|re| re.is_match(line) || re.is_match(bare))
    }

    fn unquote<'a>(&self, text: &'a str) -> &'a str {
        let mut text = text.trim();
        if !self.config.strip_quotes {
            return text;
        }
        while let Some(inner) = strip_quote_pair(text) {
            text = inner.trim();
        }
        text
    }
}

fn strip_quote_pair(text: &str) -> Option<&str> {
    let first = text.chars().next()?;
    let last = text.chars().next_back()?;
    QUOTE_PAIRS.iter().find_map(|&(open, close)| {
        if first != open || last != close || text.chars().count() < 2 {
            return None;
        }
        let inner = &text[open.len_utf8()..text.len() - close.len_utf8()];
        (!inner.contains(open) && !inner.contains(close)).then_some(inner)
    })
}

/// Cuts `text` to at most `limit` Unicode scalar values without splitting a word.
///
/// A single word longer than the budget yields the empty string.
pub fn truncate_at_word(text: &str, limit: usize) -> &str {
    let Some((cut, next)) = text.char_indices().nth(limit) else {
        return text;
    };
    let head = &text[..cut];
    if next.is_whitespace() {
        return head.trim_end();
    }
    match head.rfind(char::is_whitespace) {
        Some(at) => head[..at].trim_end(),
        None => "",
    }
}

/// Whitespace tokenization; punctuation stays attached to its word.
pub fn tokenize_words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}
