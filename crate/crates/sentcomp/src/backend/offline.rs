use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{Backend, BackendError, Completion, CompletionRequest, DecodingParams};
use crate::error::Result;

/// Answers every prompt with the example's first gold reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl Backend for OracleBackend {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn complete(&self, request: CompletionRequest<'_>, _: &DecodingParams) -> Result<Completion, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        Ok(Completion { text: request.example.first_reference().to_owned(), latency_ms: 0 })
    }
}

#[derive(Deserialize)]
struct PredictionLine {
    id: String,
    completion: String,
}

/// Serves completions produced elsewhere, keyed by example id.
#[derive(Debug, Clone)]
pub struct PredictionsBackend {
    name: String,
    completions: HashMap<String, String>,
}

impl PredictionsBackend {
    pub fn new(name: impl Into<String>, completions: HashMap<String, String>) -> Self {
        Self { name: name.into(), completions }
    }

    /// Loads a `{id, completion}` JSON lines file; a repeated id is an error.
    pub fn load(path: &Path) -> Result<Self> {
        let lines: Vec<PredictionLine> = crate::io::read_jsonl(path)?;
        let mut completions = HashMap::with_capacity(lines.len());
        for (i, line) in lines.into_iter().enumerate() {
            if completions.insert(line.id.clone(), line.completion).is_some() {
                return Err(crate::Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("duplicate prediction id {:?}", line.id),
                });
            }
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::new(name, completions))
    }
}

impl Backend for PredictionsBackend {
    fn id(&self) -> String {
        format!("predictions:{}", self.name)
    }

    fn complete(&self, request: CompletionRequest<'_>, _: &DecodingParams) -> Result<Completion, BackendError> {
        let id = request.example.id();
        let text = self.completions.get(id).ok_or_else(|| BackendError::MissingPrediction(id.to_owned()))?;
        Ok(Completion { text: text.clone(), latency_ms: 0 })
    }
}
