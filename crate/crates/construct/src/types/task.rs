//! Scoring tasks: the generator's input, schema, and generated output.

use serde::Deserialize;

use super::schema::OutputSchema;
use super::value::{parse_lenient_json, StructuredOutput, Value};
use super::CoreError;

/// Everything needed to score one structured output: the generator's
/// messages, the output schema, the generated output, and (optionally) the
/// generation's per-token log-probabilities.
#[derive(Debug, Clone)]
pub struct ScoringTask {
    pub system_message: String,
    /// The prompt `x`, including the document to process.
    pub user_message: String,
    pub output_schema: OutputSchema,
    pub generated_output: StructuredOutput,
    /// Natural-log token probabilities of the generation, each <= 0.
    pub generation_logprobs: Option<Vec<f64>>,
}

impl ScoringTask {
    /// Builds a task, enforcing that the output's top-level key set equals
    /// the schema's field-name set and that logprobs, when present, are
    /// non-empty with every entry <= 0.
    pub fn new(
        system_message: impl Into<String>,
        user_message: impl Into<String>,
        output_schema: OutputSchema,
        generated_output: StructuredOutput,
        generation_logprobs: Option<Vec<f64>>,
    ) -> Result<Self, CoreError> {
        let schema_fields = output_schema.top_level_fields();
        let output_fields: Vec<String> = generated_output.keys().map(str::to_string).collect();

        for name in &schema_fields {
            if !output_fields.contains(name) {
                return Err(CoreError::FieldSetMismatch {
                    detail: format!("generated output is missing schema field {name:?}"),
                });
            }
        }
        for name in &output_fields {
            if !schema_fields.contains(name) {
                return Err(CoreError::FieldSetMismatch {
                    detail: format!("generated output has key {name:?} not in the schema"),
                });
            }
        }

        if let Some(logprobs) = &generation_logprobs {
            if logprobs.is_empty() {
                return Err(CoreError::InvalidLogprobs {
                    detail: "logprobs list is empty".to_string(),
                });
            }
            if let Some(bad) = logprobs.iter().find(|lp| **lp > 0.0 || !lp.is_finite()) {
                return Err(CoreError::InvalidLogprobs {
                    detail: format!("logprob {bad} is not a finite value <= 0"),
                });
            }
        }

        Ok(Self {
            system_message: system_message.into(),
            user_message: user_message.into(),
            output_schema,
            generated_output,
            generation_logprobs,
        })
    }

    /// Reads a task from its JSON file form:
    /// `{system, user, schema, generated_output, logprobs?}`.
    pub fn from_json_text(text: &str) -> Result<Self, CoreError> {
        #[derive(Deserialize)]
        struct TaskFile {
            #[serde(default)]
            system: String,
            user: String,
            schema: Value,
            generated_output: Value,
            #[serde(default)]
            logprobs: Option<Vec<f64>>,
        }

        let raw = parse_lenient_json(text)?;
        let file: TaskFile = serde_json::from_value(raw).map_err(CoreError::Json)?;
        let schema = match &file.schema {
            Value::String(schema_text) => OutputSchema::from_text(schema_text)?,
            other => OutputSchema::from_value(other)?,
        };
        let output = StructuredOutput::from_value(file.generated_output)?;
        Self::new(file.system, file.user, schema, output, file.logprobs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn two_field_schema() -> OutputSchema {
        OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {"a": {"type": "string"}, "b": {"type": "string"}}
        }))
        .unwrap()
    }

    #[test]
    fn accepts_matching_key_set() {
        let output = StructuredOutput::from_value(json!({"a": "x", "b": "y"})).unwrap();
        assert!(ScoringTask::new("", "prompt", two_field_schema(), output, None).is_ok());
    }

    #[test]
    fn rejects_missing_and_extra_keys() {
        let missing = StructuredOutput::from_value(json!({"a": "x"})).unwrap();
        assert!(ScoringTask::new("", "p", two_field_schema(), missing, None).is_err());

        let extra = StructuredOutput::from_value(json!({"a": "x", "b": "y", "c": "z"})).unwrap();
        assert!(ScoringTask::new("", "p", two_field_schema(), extra, None).is_err());
    }

    #[test]
    fn rejects_bad_logprobs() {
        let output = StructuredOutput::from_value(json!({"a": "x", "b": "y"})).unwrap();
        let empty = ScoringTask::new("", "p", two_field_schema(), output.clone(), Some(vec![]));
        assert!(empty.is_err());
        let positive =
            ScoringTask::new("", "p", two_field_schema(), output.clone(), Some(vec![-0.5, 0.1]));
        assert!(positive.is_err());
        let ok = ScoringTask::new("", "p", two_field_schema(), output, Some(vec![-0.5, 0.0]));
        assert!(ok.is_ok());
    }

    #[test]
    fn loads_task_file_with_embedded_schema() {
        let text = r#"{
            "system": "extract",
            "user": "doc text",
            "schema": {"type": "object", "properties": {"a": {"type": "string"}}},
            "generated_output": {"a": "value"},
            "logprobs": [-0.1, -0.2]
        }"#;
        let task = ScoringTask::from_json_text(text).unwrap();
        assert_eq!(task.output_schema.top_level_fields(), vec!["a"]);
        assert_eq!(task.generation_logprobs.as_deref(), Some(&[-0.1, -0.2][..]));
    }

    #[test]
    fn loads_task_file_with_schema_text() {
        let text = r#"{
            "user": "doc",
            "schema": "{\"type\": \"object\", \"properties\": {\"a\": {\"type\": \"string\"}}}",
            "generated_output": {"a": None}
        }"#;
        let task = ScoringTask::from_json_text(text).unwrap();
        assert!(task.generated_output.get("a").unwrap().is_null());
        assert!(task.output_schema.raw_schema_text().starts_with("{\"type\""));
    }
}
