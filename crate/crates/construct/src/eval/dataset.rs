//! Benchmark dataset loading.
//!
//! Datasets are UTF-8 newline-delimited JSON records:
//! `{id, system, user, schema, ground_truth, comparison_profile?}`. The
//! schema may be embedded as an object or as schema text; ground truths may
//! spell nulls as `null` or `None`.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::types::{
    parse_lenient_json, validate_output, OutputSchema, StructuredOutput, Value,
};

use super::correctness::ComparisonProfile;

/// One benchmark example: the generator's task plus the ground-truth output
/// it is evaluated against.
#[derive(Debug, Clone)]
pub struct BenchmarkExample {
    pub id: String,
    pub system_message: String,
    pub user_message: String,
    pub output_schema: OutputSchema,
    pub ground_truth: StructuredOutput,
    pub comparison_profile: ComparisonProfile,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    Record { line: usize, detail: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    system: String,
    user: String,
    schema: Value,
    ground_truth: Value,
    #[serde(default)]
    comparison_profile: Option<String>,
}

/// Loads a dataset file. Malformed records fail with their line number;
/// duplicate ids are rejected. Ground truths must validate against their
/// schema.
pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkExample>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut examples = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        let line_number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let example = parse_record(line).map_err(|detail| DatasetError::Record {
            line: line_number,
            detail,
        })?;
        if !seen_ids.insert(example.id.clone()) {
            return Err(DatasetError::DuplicateId { line: line_number, id: example.id });
        }
        examples.push(example);
    }
    Ok(examples)
}

fn parse_record(line: &str) -> Result<BenchmarkExample, String> {
    let raw_value = parse_lenient_json(line).map_err(|e| e.to_string())?;
    let record: RawRecord = serde_json::from_value(raw_value).map_err(|e| e.to_string())?;

    let output_schema = match &record.schema {
        Value::String(text) => OutputSchema::from_text(text).map_err(|e| e.to_string())?,
        other => OutputSchema::from_value(other).map_err(|e| e.to_string())?,
    };
    let ground_truth =
        StructuredOutput::from_value(record.ground_truth).map_err(|e| e.to_string())?;

    let violations = validate_output(&output_schema, &ground_truth);
    if !violations.is_empty() {
        let rendered: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(format!(
            "ground_truth does not validate against schema: {}",
            rendered.join("; ")
        ));
    }

    let comparison_profile = match record.comparison_profile.as_deref() {
        Some(name) => name.parse().map_err(|e: String| e)?,
        None => ComparisonProfile::default(),
    };

    Ok(BenchmarkExample {
        id: record.id,
        system_message: record.system,
        user_message: record.user,
        output_schema,
        ground_truth,
        comparison_profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_dataset(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        file
    }

    const VALID_RECORD: &str = r#"{"id": "ex1", "system": "s", "user": "u", "schema": {"type": "object", "properties": {"a": {"type": "string", "nullable": true}}}, "ground_truth": {"a": "x"}, "comparison_profile": "ordered_lists"}"#;

    #[test]
    fn loads_well_formed_records() {
        let second = VALID_RECORD.replace("ex1", "ex2");
        let file = write_dataset(&[VALID_RECORD, &second]);
        let examples = load_dataset(file.path()).unwrap();
        assert_eq!(examples.len(), 2);
        assert_eq!(examples[0].id, "ex1");
    }

    #[test]
    fn missing_ground_truth_errors_with_line() {
        let broken = r#"{"id": "ex2", "user": "u", "schema": {"type": "object", "properties": {"a": {"type": "string"}}}}"#;
        let file = write_dataset(&[VALID_RECORD, broken]);
        let err = load_dataset(file.path()).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "got: {err}");
        assert!(err.to_string().contains("ground_truth"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let file = write_dataset(&[VALID_RECORD, VALID_RECORD]);
        let err = load_dataset(file.path()).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn financial_entities_sample_round_trips() {
        // Entity-extraction sample: two companies, one money span, the other
        // categories null (spelled `None` in circulated fixtures).
        let record = r#"{"id": "fin1", "system": "Identify and extract entities", "user": "GSK rejected $68 billion Unilever bid for consumer division", "schema": {"type": "object", "properties": {"Company": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Date": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Location": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Money": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Person": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Product": {"type": "array", "items": {"type": "string"}, "nullable": true}, "Quantity": {"type": "array", "items": {"type": "string"}, "nullable": true}}}, "ground_truth": {"Company": ["GSK", "Unilever"], "Date": None, "Location": None, "Money": ["$68 billion"], "Person": None, "Product": None, "Quantity": None}, "comparison_profile": "unordered_lists"}"#;
        let file = write_dataset(&[record]);
        let examples = load_dataset(file.path()).unwrap();
        let example = &examples[0];
        assert_eq!(
            example.output_schema.top_level_fields(),
            vec!["Company", "Date", "Location", "Money", "Person", "Product", "Quantity"]
        );
        assert_eq!(
            example.ground_truth.get("Company"),
            Some(&serde_json::json!(["GSK", "Unilever"]))
        );
        assert!(example.ground_truth.get("Date").unwrap().is_null());
        assert_eq!(example.comparison_profile, ComparisonProfile::UnorderedLists);
    }

    #[test]
    fn ground_truth_must_validate_against_schema() {
        let bad = r#"{"id": "x", "user": "u", "schema": {"type": "object", "properties": {"a": {"type": "string"}}}, "ground_truth": {"a": 5}}"#;
        let file = write_dataset(&[bad]);
        let err = load_dataset(file.path()).unwrap_err();
        assert!(err.to_string().contains("does not validate"));
    }
}
