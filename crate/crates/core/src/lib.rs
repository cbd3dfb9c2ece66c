//! Sentence compression as instruction following.
//!
//! This crate holds the pure, allocation-only parts of the toolkit:
//!
//! - [`corpus`]: the labeled / reference-based example types and corpus parsers.
//! - [`templating`]: length specs and instruction prompt rendering.
//! - [`postprocess`]: turning raw completions into the compressed sentence that gets scored.
//! - [`metrics`]: ROUGE-1/2/L, kept-token F1, compression ratio deltas and novel-word ratio.
//! - [`analysis`]: paired approximate randomization and boundary (bucket) reports.
//!
//! File IO, completion backends and the command line live in the `sentcomp` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod metrics;
pub mod postprocess;
pub mod record;
pub mod templating;

pub use corpus::{CompressionExample, Corpus, CorpusError, CorpusFormat, Origin, Split};
pub use metrics::{ExampleScores, MetricReport, ScoreOptions};
pub use record::GenerationRecord;
pub use templating::{InstructionTemplate, LengthPolicy, LengthSpec, TemplateName};

/// Whitespace word count, the unit every length in this crate is measured in.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
