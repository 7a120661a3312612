use serde::{Deserialize, Serialize};

use crate::error::Result;

/// What a generator backend can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub returns_token_probabilities: bool,
    pub is_deterministic: bool,
    /// Safe to call from several threads at once.
    pub concurrent_safe: bool,
}

/// Request body of the generator wire contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f32,
    pub seed: u64,
    pub want_token_probabilities: bool,
}

/// Response body of the generator wire contract.
///
/// `token_probabilities[i]`, when present, holds the per-token probabilities
/// of `texts[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probabilities: Option<Vec<Vec<f64>>>,
}

/// A generative language model reachable through the prompt-in, texts-out contract.
pub trait GeneratorBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse>;
}
