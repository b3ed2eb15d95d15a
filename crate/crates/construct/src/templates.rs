//! Verifier and judge prompt templates.
//!
//! The five ensemble prompts and the three judge prompts ship as embedded
//! text resources with named placeholders. Rendering is pure: the same task
//! always produces the same prompt text, byte for byte.

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde_json::json;

use crate::types::{ScoringTask, TemplateId, Value};

/// How a template's reply is expected to be structured, which selects the
/// parser and (for structured kinds) the response-format schema for the call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    TaggedThinkScore,
    StructuredFieldScoresNumeric,
    StructuredFieldScoresLikert,
    StructuredFlaggedFieldsAccuracy,
    StructuredFlaggedFieldsConfidence,
    JudgeRatingText,
    JudgeStructuredPerField,
}

/// A prompt template: its id, body with named placeholders, and the reply
/// structure it elicits.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
    pub expected_response_kind: ResponseKind,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template {id} declares unknown placeholder {placeholder:?}")]
    UnknownPlaceholder { id: TemplateId, placeholder: String },
    #[error("template {id} requires a relevant field")]
    MissingRelevantField { id: TemplateId },
    #[error("failed to read template override {path}: {source}")]
    OverrideRead {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const PLACEHOLDER_INPUT: &str = "{input_to_generator}";
const PLACEHOLDER_SCHEMA: &str = "{schema_text}";
const PLACEHOLDER_OUTPUT: &str = "{generated_output_text}";
const PLACEHOLDER_FIELD: &str = "{relevant_field}";

static PLACEHOLDER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{[a-z_]+\}").expect("placeholder pattern compiles"));

/// The five Likert labels, in descending confidence order.
pub const LIKERT_LABELS: [&str; 5] =
    ["Certain", "Mostly Certain", "Somewhat Certain", "Uncertain", "Likely Incorrect"];

fn template_file_name(id: TemplateId) -> &'static str {
    match id {
        TemplateId::T1 => "t1_doc_score.txt",
        TemplateId::T2Numeric => "t2_field_scores_numeric.txt",
        TemplateId::T3Likert => "t3_field_scores_likert.txt",
        TemplateId::T4FlagAccuracy => "t4_flag_accuracy.txt",
        TemplateId::T5FlagConfidence => "t5_flag_confidence.txt",
        TemplateId::JudgeDocument => "judge_document.txt",
        TemplateId::JudgeFieldsSingle => "judge_fields_single.txt",
        TemplateId::JudgeFieldsMulti => "judge_fields_multi.txt",
    }
}

fn builtin_body(id: TemplateId) -> &'static str {
    match id {
        TemplateId::T1 => include_str!("../assets/templates/t1_doc_score.txt"),
        TemplateId::T2Numeric => include_str!("../assets/templates/t2_field_scores_numeric.txt"),
        TemplateId::T3Likert => include_str!("../assets/templates/t3_field_scores_likert.txt"),
        TemplateId::T4FlagAccuracy => include_str!("../assets/templates/t4_flag_accuracy.txt"),
        TemplateId::T5FlagConfidence => {
            include_str!("../assets/templates/t5_flag_confidence.txt")
        }
        TemplateId::JudgeDocument => include_str!("../assets/templates/judge_document.txt"),
        TemplateId::JudgeFieldsSingle => {
            include_str!("../assets/templates/judge_fields_single.txt")
        }
        TemplateId::JudgeFieldsMulti => include_str!("../assets/templates/judge_fields_multi.txt"),
    }
}

fn response_kind(id: TemplateId) -> ResponseKind {
    match id {
        TemplateId::T1 => ResponseKind::TaggedThinkScore,
        TemplateId::T2Numeric => ResponseKind::StructuredFieldScoresNumeric,
        TemplateId::T3Likert => ResponseKind::StructuredFieldScoresLikert,
        TemplateId::T4FlagAccuracy => ResponseKind::StructuredFlaggedFieldsAccuracy,
        TemplateId::T5FlagConfidence => ResponseKind::StructuredFlaggedFieldsConfidence,
        TemplateId::JudgeDocument | TemplateId::JudgeFieldsMulti => ResponseKind::JudgeRatingText,
        TemplateId::JudgeFieldsSingle => ResponseKind::JudgeStructuredPerField,
    }
}

const ALL_TEMPLATES: [TemplateId; 8] = [
    TemplateId::T1,
    TemplateId::T2Numeric,
    TemplateId::T3Likert,
    TemplateId::T4FlagAccuracy,
    TemplateId::T5FlagConfidence,
    TemplateId::JudgeDocument,
    TemplateId::JudgeFieldsSingle,
    TemplateId::JudgeFieldsMulti,
];

/// The full template corpus, either built in or overridden from a directory.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

impl TemplateSet {
    /// The embedded templates.
    pub fn builtin() -> Self {
        let templates = ALL_TEMPLATES
            .iter()
            .map(|&id| PromptTemplate {
                id,
                body: builtin_body(id).to_string(),
                expected_response_kind: response_kind(id),
            })
            .collect();
        Self { templates }
    }

    /// Loads overrides from `dir`, falling back to the built-in body for any
    /// template file the directory does not provide. Override files use the
    /// same placeholder names as the built-ins.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for template in &mut set.templates {
            let path = dir.join(template_file_name(template.id));
            if path.exists() {
                let body = std::fs::read_to_string(&path).map_err(|source| {
                    TemplateError::OverrideRead {
                        path: path.display().to_string(),
                        source,
                    }
                })?;
                validate_placeholders(template.id, &body)?;
                template.body = body;
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .expect("all template ids are constructed")
    }

    /// Renders the prompt for `id` from a task. `relevant_field` is required
    /// for (and only used by) the multi-call judge template.
    pub fn render(
        &self,
        id: TemplateId,
        task: &ScoringTask,
        relevant_field: Option<&str>,
    ) -> Result<String, TemplateError> {
        let template = self.get(id);
        if id == TemplateId::JudgeFieldsMulti && relevant_field.is_none() {
            return Err(TemplateError::MissingRelevantField { id });
        }

        // Templates that embed the schema in their own fenced block receive
        // the bare user message; the rest receive the user message with the
        // response-format block appended, so the verifier always sees the
        // schema exactly once.
        let input_to_generator = if template.body.contains(PLACEHOLDER_SCHEMA) {
            task.user_message.clone()
        } else {
            format!(
                "{}\n\n## Response Format\nYour output must be formatted using the following JSON schema:\n\n<json_schema>\n{}\n</json_schema>",
                task.user_message,
                task.output_schema.raw_schema_text()
            )
        };
        let output_text = task.generated_output.to_pretty_text();

        let rendered = PLACEHOLDER_RE.replace_all(&template.body, |caps: &regex::Captures| {
            match caps.get(0).map(|m| m.as_str()) {
                Some(PLACEHOLDER_INPUT) => input_to_generator.clone(),
                Some(PLACEHOLDER_SCHEMA) => task.output_schema.raw_schema_text().to_string(),
                Some(PLACEHOLDER_OUTPUT) => output_text.clone(),
                Some(PLACEHOLDER_FIELD) => relevant_field.unwrap_or_default().to_string(),
                other => other.unwrap_or_default().to_string(),
            }
        });
        Ok(rendered.into_owned())
    }

    /// The response-format JSON schema a structured call must follow, or
    /// `None` for free-text templates. Field-keyed schemas are built from the
    /// task's top-level field names.
    pub fn response_schema(&self, id: TemplateId, fields: &[String]) -> Option<Value> {
        match response_kind(id) {
            ResponseKind::TaggedThinkScore | ResponseKind::JudgeRatingText => None,
            ResponseKind::StructuredFieldScoresNumeric => Some(per_field_schema(
                fields,
                json!({"type": "integer", "minimum": 0, "maximum": 100}),
                "score",
            )),
            ResponseKind::StructuredFieldScoresLikert => Some(per_field_schema(
                fields,
                json!({"type": "string", "enum": LIKERT_LABELS}),
                "confidence",
            )),
            ResponseKind::StructuredFlaggedFieldsAccuracy => Some(flagged_fields_schema(
                "confidence_score",
                json!({"type": "integer", "minimum": 0, "maximum": 100}),
            )),
            ResponseKind::StructuredFlaggedFieldsConfidence => Some(flagged_fields_schema(
                "rating",
                json!({"type": "integer", "minimum": 0, "maximum": 10}),
            )),
            ResponseKind::JudgeStructuredPerField => Some(per_field_schema(
                fields,
                json!({"type": "integer", "minimum": 0, "maximum": 10}),
                "rating",
            )),
        }
    }
}

fn validate_placeholders(id: TemplateId, body: &str) -> Result<(), TemplateError> {
    for found in PLACEHOLDER_RE.find_iter(body) {
        let name = found.as_str();
        if ![PLACEHOLDER_INPUT, PLACEHOLDER_SCHEMA, PLACEHOLDER_OUTPUT, PLACEHOLDER_FIELD]
            .contains(&name)
        {
            return Err(TemplateError::UnknownPlaceholder {
                id,
                placeholder: name.to_string(),
            });
        }
    }
    Ok(())
}

fn per_field_schema(fields: &[String], score_schema: Value, score_key: &str) -> Value {
    let mut properties = serde_json::Map::new();
    for field in fields {
        properties.insert(
            field.clone(),
            json!({
                "type": "object",
                "properties": {
                    "explanation": {"type": "string"},
                    score_key: score_schema.clone(),
                },
                "required": ["explanation", score_key],
                "additionalProperties": false
            }),
        );
    }
    json!({
        "type": "object",
        "properties": properties,
        "required": fields,
        "additionalProperties": false
    })
}

fn flagged_fields_schema(score_key: &str, score_schema: Value) -> Value {
    json!({
        "type": "object",
        "properties": {
            "explanation": {"type": "string"},
            "incorrect_fields": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "field_name": {"type": "string"},
                        "explanation": {"type": "string"}
                    },
                    "required": ["field_name", "explanation"],
                    "additionalProperties": false
                }
            },
            score_key: score_schema,
        },
        "required": ["explanation", "incorrect_fields", score_key],
        "additionalProperties": false
    })
}
