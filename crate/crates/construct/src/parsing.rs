//! Parsers that turn raw verifier replies into intermediate scores.
//!
//! Every parser is total: any byte string or payload yields either a parsed
//! result or a [`ParseError`] — never a panic. Out-of-range values fail the
//! call rather than being clamped, so malformed verifier output is discarded
//! instead of laundered into extreme confidence.

use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::Regex;

use crate::backend::ChatOutcome;
use crate::templates::LIKERT_LABELS;
use crate::types::{IntermediateScore, StructuredOutput, TemplateId, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no <score> block found")]
    MissingScoreTag,
    #[error("score content {raw:?} is not a number")]
    NonNumericScore { raw: String },
    #[error("score {value} outside [0, {max}]")]
    ScoreOutOfRange { value: f64, max: f64 },
    #[error("reply carries no structured payload")]
    MissingPayload,
    #[error("reply carries no text content")]
    MissingContent,
    #[error("expected field {field:?} missing from payload")]
    MissingField { field: String },
    #[error("payload has unexpected field {field:?}")]
    ExtraField { field: String },
    #[error("entry for {field:?} is not an object")]
    EntryNotAnObject { field: String },
    #[error("entry for {field:?} is missing {key:?}")]
    MissingEntryKey { field: String, key: String },
    #[error("entry for {field:?} has non-numeric {key:?}")]
    NonNumericEntry { field: String, key: String },
    #[error("unrecognized confidence label {label:?}")]
    UnknownLabel { label: String },
    #[error("payload is missing {key:?}")]
    MissingDocKey { key: String },
    #[error("payload {key:?} is not a number")]
    NonNumericDocKey { key: String },
    #[error("incorrect_fields is not a list")]
    InvalidIncorrectFields,
    #[error("no [[rating]] marker found")]
    MissingRatingMarker,
    #[error("rating {value} outside [1, 10]")]
    RatingOutOfRange { value: f64 },
}

/// Per-field scores plus whatever explanations the call produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldScores {
    pub scores: IndexMap<String, f64>,
    pub explanations: IndexMap<String, String>,
}

/// Result of parsing a flag-style reply: a document score plus an alpha/beta
/// field map. Flagged names not in the schema are dropped and reported in
/// `ignored_fields`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedFields {
    pub doc_score: f64,
    pub field_scores: IndexMap<String, f64>,
    pub doc_explanation: Option<String>,
    pub field_explanations: IndexMap<String, String>,
    pub ignored_fields: Vec<String>,
}

/// Which scale a flag-style reply's document score uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagScale {
    /// `confidence_score` in 0-100.
    Hundred,
    /// `rating` in 0-10.
    Ten,
}

impl FlagScale {
    fn key(self) -> &'static str {
        match self {
            FlagScale::Hundred => "confidence_score",
            FlagScale::Ten => "rating",
        }
    }

    fn max(self) -> f64 {
        match self {
            FlagScale::Hundred => 100.0,
            FlagScale::Ten => 10.0,
        }
    }
}

static SCORE_BLOCK_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<score>(.*?)</score>").expect("score pattern compiles"));
static THINK_BLOCK_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think>(.*?)</think>").expect("think pattern compiles"));
static RATING_MARKER_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[\[\s*([0-9]+(?:\.[0-9]+)?)\s*\]\]").expect("rating pattern compiles")
});

/// Parses a tagged think/score reply: the number inside the last
/// `<score>...</score>` block divided by 100, with the `<think>` block as the
/// document explanation.
pub fn parse_tagged_score(text: &str) -> Result<(f64, Option<String>), ParseError> {
    let raw = SCORE_BLOCK_RE
        .captures_iter(text)
        .last()
        .and_then(|caps| caps.get(1))
        .map(|m| m.as_str().trim().to_string())
        .ok_or(ParseError::MissingScoreTag)?;
    let value: f64 = raw
        .parse()
        .map_err(|_| ParseError::NonNumericScore { raw: raw.clone() })?;
    if !value.is_finite() || !(0.0..=100.0).contains(&value) {
        return Err(ParseError::ScoreOutOfRange { value, max: 100.0 });
    }
    let explanation = THINK_BLOCK_RE
        .captures_iter(text)
        .last()
        .and_then(|caps| caps.get(1))
        .map(|m| m.as_str().trim().to_string());
    Ok((value / 100.0, explanation))
}

/// Parses a per-field numeric reply: `{field: {explanation, score}}` with
/// scores in 0-100, normalized to [0, 1]. The payload's field set must match
/// `fields` exactly.
pub fn parse_field_scores_numeric(
    payload: &StructuredOutput,
    fields: &[String],
) -> Result<FieldScores, ParseError> {
    expect_exact_field_set(payload, fields)?;
    let mut scores = IndexMap::new();
    let mut explanations = IndexMap::new();
    for field in fields {
        let entry = entry_object(payload, field)?;
        let value = entry_number(entry, field, "score")?;
        if !(0.0..=100.0).contains(&value) {
            return Err(ParseError::ScoreOutOfRange { value, max: 100.0 });
        }
        scores.insert(field.clone(), value / 100.0);
        explanations.insert(field.clone(), entry_explanation(entry));
    }
    Ok(FieldScores { scores, explanations })
}

/// Parses a per-field Likert reply, mapping the five labels to
/// `{1, 0.75, 0.5, 0.25, 0}`. Label matching is case-insensitive after
/// trimming; anything else fails the call.
pub fn parse_field_scores_likert(
    payload: &StructuredOutput,
    fields: &[String],
) -> Result<FieldScores, ParseError> {
    expect_exact_field_set(payload, fields)?;
    let mut scores = IndexMap::new();
    let mut explanations = IndexMap::new();
    for field in fields {
        let entry = entry_object(payload, field)?;
        let label = entry
            .get("confidence")
            .ok_or_else(|| ParseError::MissingEntryKey {
                field: field.clone(),
                key: "confidence".to_string(),
            })?
            .as_str()
            .ok_or_else(|| ParseError::UnknownLabel { label: "<non-text>".to_string() })?;
        let score = likert_value(label)
            .ok_or_else(|| ParseError::UnknownLabel { label: label.to_string() })?;
        scores.insert(field.clone(), score);
        explanations.insert(field.clone(), entry_explanation(entry));
    }
    Ok(FieldScores { scores, explanations })
}

/// The canonical five-point label table.
pub fn likert_value(label: &str) -> Option<f64> {
    let normalized = label.trim().to_lowercase();
    LIKERT_LABELS
        .iter()
        .zip([1.0, 0.75, 0.5, 0.25, 0.0])
        .find(|(canonical, _)| canonical.to_lowercase() == normalized)
        .map(|(_, value)| value)
}

/// Parses a flag-style reply: the document score normalized from its scale,
/// and a field map assigning `alpha` to every flagged field and `beta` to the
/// rest. Flagged names outside the schema are dropped (call kept); a
/// non-list `incorrect_fields` fails the call.
pub fn parse_flagged_fields(
    payload: &StructuredOutput,
    fields: &[String],
    alpha: f64,
    beta: f64,
    scale: FlagScale,
) -> Result<FlaggedFields, ParseError> {
    let key = scale.key();
    let doc_raw = payload
        .get(key)
        .ok_or_else(|| ParseError::MissingDocKey { key: key.to_string() })?;
    let doc_value = doc_raw
        .as_f64()
        .ok_or_else(|| ParseError::NonNumericDocKey { key: key.to_string() })?;
    if !(0.0..=scale.max()).contains(&doc_value) {
        return Err(ParseError::ScoreOutOfRange { value: doc_value, max: scale.max() });
    }

    let flagged_list = match payload.get("incorrect_fields") {
        Some(Value::Array(entries)) => entries.as_slice(),
        _ => return Err(ParseError::InvalidIncorrectFields),
    };

    let mut flag_explanations: IndexMap<String, String> = IndexMap::new();
    let mut ignored_fields = Vec::new();
    for entry in flagged_list {
        let name = entry.get("field_name").and_then(Value::as_str);
        match name {
            Some(name) if fields.iter().any(|f| f == name) => {
                let explanation = entry
                    .get("explanation")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                flag_explanations.entry(name.to_string()).or_insert(explanation);
            }
            Some(name) => ignored_fields.push(name.to_string()),
            None => ignored_fields.push("<unnamed>".to_string()),
        }
    }

    let mut field_scores = IndexMap::new();
    let mut field_explanations = IndexMap::new();
    for field in fields {
        if let Some(explanation) = flag_explanations.get(field) {
            field_scores.insert(field.clone(), alpha);
            field_explanations.insert(field.clone(), explanation.clone());
        } else {
            field_scores.insert(field.clone(), beta);
            field_explanations.insert(field.clone(), String::new());
        }
    }

    Ok(FlaggedFields {
        doc_score: doc_value / scale.max(),
        field_scores,
        doc_explanation: payload
            .get("explanation")
            .and_then(Value::as_str)
            .map(str::to_string),
        field_explanations,
        ignored_fields,
    })
}

/// Extracts the last `[[k]]` rating marker with `k` in [1, 10] and returns
/// `k / 10`.
pub fn parse_judge_rating(text: &str) -> Result<f64, ParseError> {
    let raw = RATING_MARKER_RE
        .captures_iter(text)
        .last()
        .and_then(|caps| caps.get(1))
        .map(|m| m.as_str().to_string())
        .ok_or(ParseError::MissingRatingMarker)?;
    let value: f64 = raw.parse().map_err(|_| ParseError::MissingRatingMarker)?;
    if !(1.0..=10.0).contains(&value) {
        return Err(ParseError::RatingOutOfRange { value });
    }
    Ok(value / 10.0)
}

/// Parses the single-call judge's structured reply: `{field: {explanation,
/// rating}}` with ratings in 0-10, normalized to [0, 1].
pub fn parse_judge_per_field(
    payload: &StructuredOutput,
    fields: &[String],
) -> Result<FieldScores, ParseError> {
    expect_exact_field_set(payload, fields)?;
    let mut scores = IndexMap::new();
    let mut explanations = IndexMap::new();
    for field in fields {
        let entry = entry_object(payload, field)?;
        let value = entry_number(entry, field, "rating")?;
        if !(0.0..=10.0).contains(&value) {
            return Err(ParseError::ScoreOutOfRange { value, max: 10.0 });
        }
        scores.insert(field.clone(), value / 10.0);
        explanations.insert(field.clone(), entry_explanation(entry));
    }
    Ok(FieldScores { scores, explanations })
}

/// Converts a completed verifier call into an [`IntermediateScore`] using
/// the parser the template calls for. Returns the score plus an optional
/// diagnostic note (e.g. flagged names that were dropped).
pub fn parse_intermediate(
    template: TemplateId,
    outcome: &ChatOutcome,
    fields: &[String],
    alpha: f64,
    beta: f64,
    call_id: &str,
) -> Result<(IntermediateScore, Option<String>), ParseError> {
    let base = IntermediateScore {
        call_id: call_id.to_string(),
        template_id: template,
        doc_score: None,
        field_scores: None,
        doc_explanation: None,
        field_explanations: None,
    };
    match template {
        TemplateId::T1 => {
            let text = outcome.content.as_deref().ok_or(ParseError::MissingContent)?;
            let (score, explanation) = parse_tagged_score(text)?;
            Ok((
                IntermediateScore { doc_score: Some(score), doc_explanation: explanation, ..base },
                None,
            ))
        }
        TemplateId::T2Numeric => {
            let payload = structured_payload(outcome)?;
            let parsed = parse_field_scores_numeric(&payload, fields)?;
            Ok((
                IntermediateScore {
                    field_scores: Some(parsed.scores),
                    field_explanations: Some(parsed.explanations),
                    ..base
                },
                None,
            ))
        }
        TemplateId::T3Likert => {
            let payload = structured_payload(outcome)?;
            let parsed = parse_field_scores_likert(&payload, fields)?;
            Ok((
                IntermediateScore {
                    field_scores: Some(parsed.scores),
                    field_explanations: Some(parsed.explanations),
                    ..base
                },
                None,
            ))
        }
        TemplateId::T4FlagAccuracy | TemplateId::T5FlagConfidence => {
            let scale = if template == TemplateId::T4FlagAccuracy {
                FlagScale::Hundred
            } else {
                FlagScale::Ten
            };
            let payload = structured_payload(outcome)?;
            let parsed = parse_flagged_fields(&payload, fields, alpha, beta, scale)?;
            let note = if parsed.ignored_fields.is_empty() {
                None
            } else {
                Some(format!(
                    "ignored flagged fields not in schema: {}",
                    parsed.ignored_fields.join(", ")
                ))
            };
            Ok((
                IntermediateScore {
                    doc_score: Some(parsed.doc_score),
                    field_scores: Some(parsed.field_scores),
                    doc_explanation: parsed.doc_explanation,
                    field_explanations: Some(parsed.field_explanations),
                    ..base
                },
                note,
            ))
        }
        TemplateId::JudgeDocument | TemplateId::JudgeFieldsMulti => {
            let text = outcome.content.as_deref().ok_or(ParseError::MissingContent)?;
            let score = parse_judge_rating(text)?;
            Ok((IntermediateScore { doc_score: Some(score), ..base }, None))
        }
        TemplateId::JudgeFieldsSingle => {
            let payload = structured_payload(outcome)?;
            let parsed = parse_judge_per_field(&payload, fields)?;
            Ok((
                IntermediateScore {
                    field_scores: Some(parsed.scores),
                    field_explanations: Some(parsed.explanations),
                    ..base
                },
                None,
            ))
        }
    }
}

/// The structured payload of an outcome, falling back to parsing the text
/// content as JSON.
fn structured_payload(outcome: &ChatOutcome) -> Result<StructuredOutput, ParseError> {
    if let Some(payload) = &outcome.structured_payload {
        return Ok(payload.clone());
    }
    let content = outcome.content.as_deref().ok_or(ParseError::MissingPayload)?;
    StructuredOutput::from_text(content).map_err(|_| ParseError::MissingPayload)
}

fn expect_exact_field_set(payload: &StructuredOutput, fields: &[String]) -> Result<(), ParseError> {
    for field in fields {
        if payload.get(field).is_none() {
            return Err(ParseError::MissingField { field: field.clone() });
        }
    }
    for key in payload.keys() {
        if !fields.iter().any(|f| f == key) {
            return Err(ParseError::ExtraField { field: key.to_string() });
        }
    }
    Ok(())
}

fn entry_object<'a>(
    payload: &'a StructuredOutput,
    field: &str,
) -> Result<&'a serde_json::Map<String, Value>, ParseError> {
    payload
        .get(field)
        .and_then(Value::as_object)
        .ok_or_else(|| ParseError::EntryNotAnObject { field: field.to_string() })
}

fn entry_number(
    entry: &serde_json::Map<String, Value>,
    field: &str,
    key: &str,
) -> Result<f64, ParseError> {
    let value = entry.get(key).ok_or_else(|| ParseError::MissingEntryKey {
        field: field.to_string(),
        key: key.to_string(),
    })?;
    value.as_f64().ok_or_else(|| ParseError::NonNumericEntry {
        field: field.to_string(),
        key: key.to_string(),
    })
}

fn entry_explanation(entry: &serde_json::Map<String, Value>) -> String {
    entry
        .get("explanation")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}
