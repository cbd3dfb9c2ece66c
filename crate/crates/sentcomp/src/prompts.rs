//! Instruction-format rows: the rendered prompt for each example with its length targets.

use serde::{Deserialize, Serialize};

use sentcomp_core::templating::{compute_length_spec, LengthPolicy, LengthSpec};
use sentcomp_core::{Corpus, InstructionTemplate};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRow {
    pub id: String,
    pub prompt: String,
    pub refs: Vec<String>,
    pub length: Option<LengthSpec>,
}

/// Renders every example in corpus order; the first failing example aborts.
pub fn render_prompts(corpus: &Corpus, template: &InstructionTemplate, policy: LengthPolicy) -> Result<Vec<PromptRow>> {
    corpus
        .examples()
        .iter()
        .map(|example| {
            let spec = compute_length_spec(example, policy)?;
            // Templates without length placeholders ignore the spec; keep the row honest.
            let length = spec.filter(|_| template.uses_length());
            let prompt = template.render(example, length.as_ref())?;
            Ok(PromptRow { id: example.id().to_owned(), prompt, refs: example.gold_references().to_vec(), length })
        })
        .collect()
}
