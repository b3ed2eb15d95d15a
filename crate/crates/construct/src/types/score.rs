//! Intermediate scores: the parsed result of a single verifier call.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::CoreError;

/// Identifies which prompt produced a verifier call.
///
/// `T1`..`T5` are the ensemble's five calls; the `Judge*` variants are the
/// baseline detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    /// Document-level confidence with tagged think/score output.
    T1,
    /// Per-field 0-100 confidence scores via structured output.
    #[serde(rename = "T2_numeric")]
    T2Numeric,
    /// Per-field five-point confidence labels via structured output.
    #[serde(rename = "T3_likert")]
    T3Likert,
    /// Incorrect-field flagging plus a 0-100 document confidence.
    #[serde(rename = "T4_flag_accuracy")]
    T4FlagAccuracy,
    /// Incorrect-field flagging plus a 0-10 document rating.
    #[serde(rename = "T5_flag_confidence")]
    T5FlagConfidence,
    #[serde(rename = "judge_doc")]
    JudgeDocument,
    #[serde(rename = "judge_fields_single")]
    JudgeFieldsSingle,
    #[serde(rename = "judge_fields_multi")]
    JudgeFieldsMulti,
}

impl TemplateId {
    /// The five templates the scoring ensemble dispatches, in canonical order.
    pub const ENSEMBLE: [TemplateId; 5] = [
        TemplateId::T1,
        TemplateId::T2Numeric,
        TemplateId::T3Likert,
        TemplateId::T4FlagAccuracy,
        TemplateId::T5FlagConfidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::T1 => "T1",
            TemplateId::T2Numeric => "T2_numeric",
            TemplateId::T3Likert => "T3_likert",
            TemplateId::T4FlagAccuracy => "T4_flag_accuracy",
            TemplateId::T5FlagConfidence => "T5_flag_confidence",
            TemplateId::JudgeDocument => "judge_doc",
            TemplateId::JudgeFieldsSingle => "judge_fields_single",
            TemplateId::JudgeFieldsMulti => "judge_fields_multi",
        }
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T1" => Ok(TemplateId::T1),
            "T2_numeric" => Ok(TemplateId::T2Numeric),
            "T3_likert" => Ok(TemplateId::T3Likert),
            "T4_flag_accuracy" => Ok(TemplateId::T4FlagAccuracy),
            "T5_flag_confidence" => Ok(TemplateId::T5FlagConfidence),
            "judge_doc" => Ok(TemplateId::JudgeDocument),
            "judge_fields_single" => Ok(TemplateId::JudgeFieldsSingle),
            "judge_fields_multi" => Ok(TemplateId::JudgeFieldsMulti),
            other => Err(CoreError::UnknownTemplate { name: other.to_string() }),
        }
    }
}

/// One verifier call's parsed result: a document-level score and/or per-field
/// scores in [0, 1], plus any explanations the call produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediateScore {
    pub call_id: String,
    pub template_id: TemplateId,
    pub doc_score: Option<f64>,
    pub field_scores: Option<IndexMap<String, f64>>,
    pub doc_explanation: Option<String>,
    pub field_explanations: Option<IndexMap<String, String>>,
}

impl IntermediateScore {
    /// Validates the constructed score: at least one of doc/field scores must
    /// be present, all scores must lie in [0, 1], and field scores (when
    /// present) must cover exactly `expected_fields`.
    pub fn validated(self, expected_fields: &[String]) -> Result<Self, CoreError> {
        if self.doc_score.is_none() && self.field_scores.is_none() {
            return Err(CoreError::EmptyIntermediate);
        }
        if let Some(doc) = self.doc_score {
            if !(0.0..=1.0).contains(&doc) {
                return Err(CoreError::ScoreOutOfUnitRange { score: doc });
            }
        }
        if let Some(fields) = &self.field_scores {
            for name in expected_fields {
                match fields.get(name) {
                    Some(score) if (0.0..=1.0).contains(score) => {}
                    Some(score) => {
                        return Err(CoreError::ScoreOutOfUnitRange { score: *score })
                    }
                    None => {
                        return Err(CoreError::FieldSetMismatch {
                            detail: format!("intermediate score missing field {name:?}"),
                        })
                    }
                }
            }
            if fields.len() != expected_fields.len() {
                return Err(CoreError::FieldSetMismatch {
                    detail: "intermediate score has fields outside the schema".to_string(),
                });
            }
        }
        Ok(self)
    }
}
