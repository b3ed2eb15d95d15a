//! Comparison detectors: per-document judge, single-call and multi-call
//! per-field judges, and average-token-logprob scoring.

use indexmap::IndexMap;

use crate::backend::{dispatch_parallel, OutcomeStatus};
use crate::engine::TrustScorer;
use crate::parsing::{parse_judge_per_field, parse_judge_rating, ParseError};
use crate::templates::TemplateError;
use crate::types::{ScoringTask, StructuredOutput, TemplateId};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("judge call failed: {detail}")]
    CallFailed { detail: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("every per-field judge call failed")]
    AllFieldCallsFailed,
    #[error("logprobs unavailable for this task")]
    LogprobsUnavailable,
}

/// Per-field judge results. Failed per-field calls land in `failures`
/// instead of aborting the whole task.
#[derive(Debug, Clone)]
pub struct MultiJudgeScores {
    pub scores: IndexMap<String, f64>,
    pub failures: IndexMap<String, String>,
}

impl TrustScorer {
    /// One judge call rating the whole structured output on 1-10.
    pub async fn judge_document(&self, task: &ScoringTask) -> Result<f64, BaselineError> {
        let prompt = self.templates().render(TemplateId::JudgeDocument, task, None)?;
        let request =
            self.build_request(prompt, None, self.tag_for(TemplateId::JudgeDocument.as_str()));
        let outcome = dispatch_parallel(
            self.backend(),
            vec![request],
            self.config().timeout_policy(),
        )
        .await
        .remove(0);
        match outcome.status {
            OutcomeStatus::Completed => {
                let text = outcome.content.as_deref().unwrap_or_default();
                Ok(parse_judge_rating(text)?)
            }
            status => Err(BaselineError::CallFailed {
                detail: outcome.diagnostic.unwrap_or_else(|| format!("{status:?}")),
            }),
        }
    }

    /// One structured judge call rating every top-level field on 0-10.
    pub async fn judge_fields_single_call(
        &self,
        task: &ScoringTask,
    ) -> Result<IndexMap<String, f64>, BaselineError> {
        let fields = task.output_schema.top_level_fields();
        let prompt = self.templates().render(TemplateId::JudgeFieldsSingle, task, None)?;
        let response_format = self.templates().response_schema(TemplateId::JudgeFieldsSingle, &fields);
        let request = self.build_request(
            prompt,
            response_format,
            self.tag_for(TemplateId::JudgeFieldsSingle.as_str()),
        );
        let outcome = dispatch_parallel(
            self.backend(),
            vec![request],
            self.config().timeout_policy(),
        )
        .await
        .remove(0);
        match outcome.status {
            OutcomeStatus::Completed => {
                let payload = match &outcome.structured_payload {
                    Some(payload) => payload.clone(),
                    None => {
                        let content = outcome.content.as_deref().unwrap_or_default();
                        StructuredOutput::from_text(content)
                            .map_err(|_| ParseError::MissingPayload)?
                    }
                };
                Ok(parse_judge_per_field(&payload, &fields)?.scores)
            }
            status => Err(BaselineError::CallFailed {
                detail: outcome.diagnostic.unwrap_or_else(|| format!("{status:?}")),
            }),
        }
    }

    /// One judge call per field, dispatched concurrently. A failed call
    /// marks only its own field as failed; the task errors only when every
    /// field fails.
    pub async fn judge_fields_multi_call(
        &self,
        task: &ScoringTask,
    ) -> Result<MultiJudgeScores, BaselineError> {
        let fields = task.output_schema.top_level_fields();
        let mut requests = Vec::with_capacity(fields.len());
        for field in &fields {
            let prompt = self.templates().render(TemplateId::JudgeFieldsMulti, task, Some(field))?;
            let tag = self.tag_for(&format!("{}/{field}", TemplateId::JudgeFieldsMulti.as_str()));
            requests.push(self.build_request(prompt, None, tag));
        }
        let outcomes =
            dispatch_parallel(self.backend(), requests, self.config().timeout_policy()).await;

        let mut scores = IndexMap::new();
        let mut failures = IndexMap::new();
        for (field, outcome) in fields.iter().zip(outcomes) {
            match outcome.status {
                OutcomeStatus::Completed => {
                    let text = outcome.content.as_deref().unwrap_or_default();
                    match parse_judge_rating(text) {
                        Ok(score) => {
                            scores.insert(field.clone(), score);
                        }
                        Err(e) => {
                            failures.insert(field.clone(), e.to_string());
                        }
                    }
                }
                status => {
                    let detail = outcome.diagnostic.unwrap_or_else(|| format!("{status:?}"));
                    failures.insert(field.clone(), detail);
                }
            }
        }
        if scores.is_empty() {
            return Err(BaselineError::AllFieldCallsFailed);
        }
        Ok(MultiJudgeScores { scores, failures })
    }
}

/// Geometric-mean token probability: `exp(mean(logprobs))`, in (0, 1].
/// Errors when the task carries no generation logprobs (several providers
/// never expose them).
pub fn logprob_score(task: &ScoringTask) -> Result<f64, BaselineError> {
    let logprobs = task
        .generation_logprobs
        .as_ref()
        .ok_or(BaselineError::LogprobsUnavailable)?;
    let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
    Ok(mean.exp())
}
