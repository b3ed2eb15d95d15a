//! Shared data model: tasks, schemas, structured outputs, scores, reports.
//!
//! All types here are immutable values after construction and safe to share
//! across concurrent tasks.

mod report;
mod schema;
mod score;
mod task;
mod value;

pub use report::{CallDiagnostic, CallOutcome, TrustReport};
pub use schema::{validate_output, OutputSchema, SchemaField, TypeDescriptor, TypeKind, Violation};
pub use score::{IntermediateScore, TemplateId};
pub use task::ScoringTask;
pub use value::{parse_lenient_json, StructuredOutput, Value};

/// Errors from constructing or validating the core data model.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("expected an object, found {found}")]
    NotAnObject { found: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {detail}")]
    InvalidSchema { detail: String },
    #[error("field set mismatch: {detail}")]
    FieldSetMismatch { detail: String },
    #[error("invalid logprobs: {detail}")]
    InvalidLogprobs { detail: String },
    #[error("unknown template id {name:?}")]
    UnknownTemplate { name: String },
    #[error("intermediate score carries neither a document nor field scores")]
    EmptyIntermediate,
    #[error("score {score} outside [0, 1]")]
    ScoreOutOfUnitRange { score: f64 },
}
