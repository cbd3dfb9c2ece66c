use alloc::string::String;

use serde::{Deserialize, Serialize};

/// One dispatched prompt and what came back.
///
/// `prompt` is the exact string sent to the backend and `raw_completion` is stored
/// unmodified; `extracted` is what gets scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub example_id: String,
    pub template_name: String,
    pub prompt: String,
    pub raw_completion: String,
    pub extracted: String,
    pub backend_id: String,
    pub latency_ms: u64,
}
