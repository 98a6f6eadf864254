//! Prompt-based Latin extraction against chat-style model backends.
//!
//! [`prompt`] renders the registered prompt templates for the three input
//! modalities (plus the joint categorization task), [`backend`] abstracts
//! the chat-completions HTTP protocol, [`parse`] turns free-form responses
//! into segment lists or category maps without ever throwing, and [`batch`]
//! runs deterministic bounded-concurrency inference over a corpus with
//! retry, transcripts, and prediction files.

pub mod backend;
pub mod batch;
pub mod parse;
pub mod prompt;
pub mod testing;

use thiserror::Error;

pub use backend::{
    BackendError, Capabilities, ChatBackend, ChatMessage, ChatRequest, ChatResponse, ContentPart,
    EndpointConfig, GenerationParams, HttpChatBackend, RetryPolicy,
};
pub use batch::{
    category_map, load_predictions, post_correct, run_batch, run_categorization_batch,
    segment_map, write_prediction_rows, write_predictions, write_transcripts, BatchOptions,
    ParsedPrediction, PredictionFileRecord, PredictionRecord, TranscriptRecord,
};
pub use parse::{empty_category_map, parse_category_map, parse_segment_list, ParseStatus};
pub use prompt::{
    build_categorization_prompt, build_prompt, category_definition, PromptMode, PromptPayload,
    PromptVariant,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("page {page_id}: prompt mode requires an image but the page has no image_ref")]
    MissingImage { page_id: String },
    #[error("page {page_id}: prompt mode requires page text but none is available")]
    MissingText { page_id: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("post_correct requires non-empty text")]
    EmptyCorrectionInput,
    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("predictions file line {line}: {source}")]
    MalformedPrediction {
        line: usize,
        source: serde_json::Error,
    },
    #[error("duplicate page_id {page_id} in predictions file")]
    DuplicatePrediction { page_id: String },
}
