//! The scoring pipeline: render the five verifier prompts, dispatch them
//! concurrently, parse the survivors, and aggregate into a trust report.
//!
//! Aggregation is hyperparameter-free: field-scoring calls contribute extra
//! document-level signals through a harmonic average (a soft minimum, so one
//! bad field drags the document score down), and final scores are plain
//! arithmetic means of the surviving intermediates.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::backend::{
    dispatch_parallel, ChatBackend, ChatMessage, ChatRequest, OutcomeStatus, TimeoutPolicy,
};
use crate::parsing::parse_intermediate;
use crate::templates::{TemplateError, TemplateSet};
use crate::types::{
    CallDiagnostic, CallOutcome, IntermediateScore, OutputSchema, ScoringTask, TemplateId,
    TrustReport,
};

#[derive(Debug, thiserror::Error)]
pub enum ScoringError {
    #[error("empty score list")]
    EmptyScores,
    #[error("score {score} outside [0, 1]")]
    ScoreOutOfRange { score: f64 },
    #[error("insufficient verifier signal: {detail}")]
    InsufficientSignal { detail: String, diagnostics: Vec<CallDiagnostic> },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Tunables for the scoring pipeline. The defaults match the deployed
/// configuration: alpha/beta fixed at 0.1/0.9, verifier temperature 0, a
/// 30-second call deadline, and fields below 0.5 flagged for review.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub model: String,
    pub deadline_ms: u64,
    /// When set, the deadline tightens to twice the median latency of the
    /// batch's already-completed calls (never below `adaptive_floor_ms`).
    pub adaptive_timeout: bool,
    pub adaptive_floor_ms: u64,
    pub field_threshold: f64,
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
    /// Whether the Likert field-scoring call also contributes a harmonic
    /// document-level intermediate, like the numeric field-scoring call.
    pub harmonic_doc_from_likert: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4.1-mini".to_string(),
            deadline_ms: 30_000,
            adaptive_timeout: false,
            adaptive_floor_ms: 5_000,
            field_threshold: 0.5,
            alpha: 0.1,
            beta: 0.9,
            temperature: 0.0,
            harmonic_doc_from_likert: true,
        }
    }
}

impl ScoringConfig {
    pub fn timeout_policy(&self) -> TimeoutPolicy {
        if self.adaptive_timeout {
            TimeoutPolicy::Adaptive { floor_ms: self.adaptive_floor_ms, cap_ms: self.deadline_ms }
        } else {
            TimeoutPolicy::Fixed { deadline_ms: self.deadline_ms }
        }
    }
}

/// Harmonic mean `n / sum(1/s_i)` of scores in [0, 1]. Any zero score pulls
/// the result to the limit value 0.
pub fn harmonic_mean(scores: &[f64]) -> Result<f64, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::EmptyScores);
    }
    for &score in scores {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(ScoringError::ScoreOutOfRange { score });
        }
    }
    if scores.iter().any(|&s| s == 0.0) {
        return Ok(0.0);
    }
    let reciprocal_sum: f64 = scores.iter().map(|s| 1.0 / s).sum();
    Ok(scores.len() as f64 / reciprocal_sum)
}

/// A document-level signal extracted from one intermediate score: either the
/// call's own document score or the harmonic mean of its field scores.
#[derive(Debug, Clone)]
struct DocCandidate {
    template: TemplateId,
    score: f64,
    explanation: Option<String>,
}

fn doc_candidates(
    intermediates: &[IntermediateScore],
    harmonic_doc_from_likert: bool,
) -> Vec<DocCandidate> {
    let mut candidates = Vec::new();
    for intermediate in intermediates {
        if let Some(score) = intermediate.doc_score {
            candidates.push(DocCandidate {
                template: intermediate.template_id,
                score,
                explanation: intermediate.doc_explanation.clone(),
            });
        } else if let Some(fields) = &intermediate.field_scores {
            if intermediate.template_id == TemplateId::T3Likert && !harmonic_doc_from_likert {
                continue;
            }
            let values: Vec<f64> = fields.values().copied().collect();
            if let Ok(score) = harmonic_mean(&values) {
                candidates.push(DocCandidate {
                    template: intermediate.template_id,
                    score,
                    explanation: None,
                });
            }
        }
    }
    candidates
}

/// Aggregates surviving intermediate scores into a document score and a
/// per-field map, both arithmetic means. Fails when no document-level or no
/// field-level signal survived.
pub fn aggregate(
    intermediates: &[IntermediateScore],
    schema: &OutputSchema,
    harmonic_doc_from_likert: bool,
) -> Result<(f64, IndexMap<String, f64>), ScoringError> {
    let candidates = doc_candidates(intermediates, harmonic_doc_from_likert);
    if candidates.is_empty() {
        return Err(ScoringError::InsufficientSignal {
            detail: "no surviving document-level intermediates".to_string(),
            diagnostics: Vec::new(),
        });
    }
    let doc_score = candidates.iter().map(|c| c.score).sum::<f64>() / candidates.len() as f64;

    let field_sources: Vec<&IndexMap<String, f64>> = intermediates
        .iter()
        .filter_map(|i| i.field_scores.as_ref())
        .collect();
    if field_sources.is_empty() {
        return Err(ScoringError::InsufficientSignal {
            detail: "no surviving field-level intermediates".to_string(),
            diagnostics: Vec::new(),
        });
    }

    let mut per_field = IndexMap::new();
    for field in schema.top_level_fields() {
        let values: Vec<f64> = field_sources
            .iter()
            .filter_map(|fields| fields.get(&field).copied())
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        per_field.insert(field, mean);
    }
    Ok((doc_score, per_field))
}

/// Picks the report's explanations: the document explanation comes from the
/// call whose document-level intermediate is lowest, and each field's
/// explanation from the field-scoring call with the lowest score for that
/// field. Empty explanations are skipped in favor of the next-lowest with
/// text; ties break in canonical template order.
pub fn select_explanations(
    intermediates: &[IntermediateScore],
    schema: &OutputSchema,
    harmonic_doc_from_likert: bool,
) -> (String, IndexMap<String, String>) {
    let mut candidates = doc_candidates(intermediates, harmonic_doc_from_likert);
    candidates.sort_by(|a, b| {
        a.score.total_cmp(&b.score).then(a.template.cmp(&b.template))
    });
    let doc_explanation = candidates
        .iter()
        .filter_map(|c| c.explanation.as_deref())
        .find(|text| !text.is_empty())
        .unwrap_or_default()
        .to_string();

    let mut per_field = IndexMap::new();
    for field in schema.top_level_fields() {
        let mut field_candidates: Vec<(f64, TemplateId, &str)> = intermediates
            .iter()
            .filter_map(|i| {
                let score = i.field_scores.as_ref()?.get(&field)?;
                let explanation = i
                    .field_explanations
                    .as_ref()
                    .and_then(|e| e.get(&field))
                    .map(String::as_str)
                    .unwrap_or("");
                Some((*score, i.template_id, explanation))
            })
            .collect();
        field_candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let explanation = field_candidates
            .iter()
            .map(|(_, _, text)| *text)
            .find(|text| !text.is_empty())
            .unwrap_or_default()
            .to_string();
        per_field.insert(field, explanation);
    }
    (doc_explanation, per_field)
}

/// Orchestrates trust scoring against a configured backend. Cheap to clone;
/// safe to use from multiple tasks concurrently.
#[derive(Clone)]
pub struct TrustScorer {
    backend: Arc<dyn ChatBackend>,
    templates: Arc<TemplateSet>,
    config: ScoringConfig,
    tag_scope: Option<String>,
}

impl TrustScorer {
    pub fn new(backend: Arc<dyn ChatBackend>, templates: TemplateSet, config: ScoringConfig) -> Self {
        Self { backend, templates: Arc::new(templates), config, tag_scope: None }
    }

    /// Returns a scorer whose request tags are prefixed with `scope/`, so
    /// scripted runs can route replies per example.
    pub fn with_tag_scope(&self, scope: impl Into<String>) -> Self {
        Self { tag_scope: Some(scope.into()), ..self.clone() }
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn backend(&self) -> Arc<dyn ChatBackend> {
        Arc::clone(&self.backend)
    }

    pub(crate) fn tag_for(&self, name: &str) -> String {
        match &self.tag_scope {
            Some(scope) => format!("{scope}/{name}"),
            None => name.to_string(),
        }
    }

    pub(crate) fn build_request(&self, prompt: String, response_format: Option<crate::types::Value>, tag: String) -> ChatRequest {
        let mut request = ChatRequest::new(vec![ChatMessage::user(prompt)], &self.config.model)
            .with_temperature(self.config.temperature)
            .with_tag(tag);
        if let Some(schema) = response_format {
            request = request.with_response_format(schema);
        }
        request
    }

    /// Scores one task: dispatches the five verifier calls in parallel,
    /// parses whatever completes within the deadline, and aggregates the
    /// survivors into a [`TrustReport`].
    pub async fn score(&self, task: &ScoringTask) -> Result<TrustReport, ScoringError> {
        let fields = task.output_schema.top_level_fields();

        let mut requests = Vec::with_capacity(TemplateId::ENSEMBLE.len());
        for template in TemplateId::ENSEMBLE {
            let prompt = self.templates.render(template, task, None)?;
            let response_format = self.templates.response_schema(template, &fields);
            requests.push(self.build_request(prompt, response_format, self.tag_for(template.as_str())));
        }

        let outcomes =
            dispatch_parallel(self.backend(), requests, self.config.timeout_policy()).await;

        let mut intermediates = Vec::new();
        let mut diagnostics = Vec::new();
        for (template, outcome) in TemplateId::ENSEMBLE.into_iter().zip(&outcomes) {
            let diagnostic = match outcome.status {
                OutcomeStatus::Completed => {
                    match parse_intermediate(
                        template,
                        outcome,
                        &fields,
                        self.config.alpha,
                        self.config.beta,
                        &self.tag_for(template.as_str()),
                    ) {
                        Ok((intermediate, note)) => {
                            intermediates.push(intermediate);
                            CallDiagnostic {
                                template_id: template,
                                outcome: CallOutcome::Completed,
                                latency_ms: outcome.latency_ms,
                                detail: note,
                            }
                        }
                        Err(parse_error) => CallDiagnostic {
                            template_id: template,
                            outcome: CallOutcome::ParseFailed,
                            latency_ms: outcome.latency_ms,
                            detail: Some(parse_error.to_string()),
                        },
                    }
                }
                OutcomeStatus::TimedOut => CallDiagnostic {
                    template_id: template,
                    outcome: CallOutcome::TimedOut,
                    latency_ms: outcome.latency_ms,
                    detail: None,
                },
                OutcomeStatus::TransportFailed => CallDiagnostic {
                    template_id: template,
                    outcome: CallOutcome::TransportFailed,
                    latency_ms: outcome.latency_ms,
                    detail: outcome.diagnostic.clone(),
                },
            };
            diagnostics.push(diagnostic);
        }

        let (doc_score, per_field_scores) = aggregate(
            &intermediates,
            &task.output_schema,
            self.config.harmonic_doc_from_likert,
        )
        .map_err(|e| match e {
            ScoringError::InsufficientSignal { detail, .. } => ScoringError::InsufficientSignal {
                detail,
                diagnostics: diagnostics.clone(),
            },
            other => other,
        })?;

        let (doc_explanation, per_field_explanations) = select_explanations(
            &intermediates,
            &task.output_schema,
            self.config.harmonic_doc_from_likert,
        );

        let mut untrustworthy: Vec<(String, f64)> = per_field_scores
            .iter()
            .filter(|(_, score)| **score < self.config.field_threshold)
            .map(|(name, score)| (name.clone(), *score))
            .collect();
        untrustworthy.sort_by(|a, b| a.1.total_cmp(&b.1));

        Ok(TrustReport {
            trustworthiness_score: doc_score,
            per_field_scores,
            per_field_explanations,
            doc_explanation,
            untrustworthy_fields: untrustworthy.into_iter().map(|(name, _)| name).collect(),
            diagnostics,
        })
    }
}
