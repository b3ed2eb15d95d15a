//! Trustworthiness scoring for LLM structured outputs.
//!
//! Scores how much a structured output from any LLM can be trusted, both per
//! document and per field, by dispatching an ensemble of verifier-model
//! calls in parallel and aggregating their judgments. Ships with baseline
//! detectors (LLM-as-a-judge variants, token-logprob scoring) and a
//! benchmark-evaluation harness (AUROC, precision at the true error count,
//! confidence gap).
//!
//! - [`types`] - tasks, schemas, structured outputs, scores, reports
//! - [`templates`] - the verifier and judge prompt corpus
//! - [`backend`] - chat endpoints: OpenAI-compatible HTTP, scripted mock,
//!   parallel dispatch with deadline
//! - [`parsing`] - verifier-reply parsers
//! - [`engine`] - the scoring pipeline and aggregation rules
//! - [`baselines`] - comparison detectors
//! - [`eval`] - dataset loading, correctness judging, detector metrics

pub mod backend;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod eval;
pub mod parsing;
pub mod templates;
pub mod types;

pub use engine::{aggregate, harmonic_mean, select_explanations, ScoringConfig, TrustScorer};
pub use types::{OutputSchema, ScoringTask, StructuredOutput, TemplateId, TrustReport};
