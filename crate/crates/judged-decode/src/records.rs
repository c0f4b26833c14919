//! One JSON line per generated prompt.

use judged_decode_core::{GenerationResult, StepTrace, TokenId};
use serde::{Deserialize, Serialize};

/// Output record. `acceptance_rate` is `null` for plain sampling; `traces`
/// is present only when tracing is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub algorithm: String,
    pub prompt_tokens: Vec<TokenId>,
    pub output_tokens: Vec<TokenId>,
    pub text: Option<String>,
    pub steps: usize,
    pub acceptance_rate: Option<f64>,
    pub tokens_per_step: f64,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<StepTrace>>,
}

impl ResultRecord {
    pub fn new(
        id: &str,
        algorithm: &str,
        prompt: Vec<TokenId>,
        result: GenerationResult,
        speculative: bool,
        text: Option<String>,
        with_traces: bool,
    ) -> Self {
        let steps = if speculative { result.steps() } else { result.output.len() };
        ResultRecord {
            id: id.to_string(),
            algorithm: algorithm.to_string(),
            prompt_tokens: prompt,
            output_tokens: result.output,
            text,
            steps,
            acceptance_rate: speculative.then_some(result.acceptance_rate),
            tokens_per_step: result.tokens_per_step,
            wall_time_ms: result.wall_time_ms,
            traces: (with_traces && speculative).then_some(result.traces),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("records always serialize");
        line.push('\n');
        line
    }
}
