//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use construct::types::{OutputSchema, ScoringTask, StructuredOutput};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// The invoice fixture task used by golden tests and the live smoke test.
pub fn invoice_task() -> ScoringTask {
    let text = std::fs::read_to_string(fixtures_dir().join("invoice_task.json"))
        .expect("fixture task readable");
    ScoringTask::from_json_text(&text).expect("fixture task valid")
}

/// Deterministic random task generator for placeholder/fuzz checks.
pub fn random_task(rng: &mut StdRng) -> ScoringTask {
    let field_count = rng.gen_range(1..=6);
    let mut names = Vec::new();
    while names.len() < field_count {
        let len = rng.gen_range(1..=8);
        let name: String = (0..len)
            .map(|_| (b'a' + rng.gen_range(0..26)) as char)
            .collect();
        if !names.contains(&name) {
            names.push(name);
        }
    }

    let mut properties = serde_json::Map::new();
    let mut output = serde_json::Map::new();
    for name in &names {
        let (descriptor, value) = random_field(rng);
        properties.insert(name.clone(), descriptor);
        output.insert(name.clone(), value);
    }
    let schema =
        OutputSchema::from_value(&json!({"type": "object", "properties": properties}))
            .expect("random schema valid");
    let output = StructuredOutput::from_value(Value::Object(output)).expect("object");

    let user: String = (0..rng.gen_range(0..120))
        .map(|_| {
            let c = rng.gen_range(0..70u32);
            char::from_u32(32 + c).unwrap_or(' ')
        })
        .collect();
    ScoringTask::new("", user, schema, output, None).expect("random task valid")
}

fn random_field(rng: &mut StdRng) -> (Value, Value) {
    match rng.gen_range(0..4) {
        0 => (json!({"type": "string"}), json!(random_word(rng))),
        1 => (json!({"type": "number"}), json!(rng.gen_range(-1000.0..1000.0))),
        2 => (json!({"type": "boolean"}), json!(rng.gen_bool(0.5))),
        _ => (
            json!({"type": "array", "items": {"type": "string"}}),
            json!((0..rng.gen_range(0..3)).map(|_| random_word(rng)).collect::<Vec<_>>()),
        ),
    }
}

fn random_word(rng: &mut StdRng) -> String {
    (0..rng.gen_range(1..10)).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect()
}

/// Builds a mock-script JSON entry.
pub fn script_entry(tag: &str, body: ScriptBody, latency_ms: u64) -> Value {
    let mut entry = json!({"tag": tag, "scripted_latency_ms": latency_ms});
    match body {
        ScriptBody::Text(text) => entry["reply_text"] = json!(text),
        ScriptBody::Payload(payload) => entry["reply_payload"] = payload,
    }
    entry
}

pub enum ScriptBody {
    Text(String),
    Payload(Value),
}

/// The five scripted ensemble replies matching the hand-evaluated oracle:
/// T1 doc 0.8, T2 fields {a: 1.0, b: 0.5}, T3 fields {a: 0.75, b: 0.75},
/// T4 doc 0.9 (nothing flagged), T5 doc 0.7 (b flagged).
pub fn oracle_script(scope: Option<&str>, slow_template: Option<(&str, u64)>) -> Vec<Value> {
    let tag = |name: &str| match scope {
        Some(scope) => format!("{scope}/{name}"),
        None => name.to_string(),
    };
    let latency = |name: &str| match slow_template {
        Some((slow, ms)) if slow == name => ms,
        _ => 1,
    };
    vec![
        script_entry(
            &tag("T1"),
            ScriptBody::Text("<think>mostly consistent</think>\n<score>80</score>".to_string()),
            latency("T1"),
        ),
        script_entry(
            &tag("T2_numeric"),
            ScriptBody::Payload(json!({
                "a": {"explanation": "exact match", "score": 100},
                "b": {"explanation": "cannot verify", "score": 50}
            })),
            latency("T2_numeric"),
        ),
        script_entry(
            &tag("T3_likert"),
            ScriptBody::Payload(json!({
                "a": {"explanation": "looks right", "confidence": "Mostly Certain"},
                "b": {"explanation": "looks right", "confidence": "Mostly Certain"}
            })),
            latency("T3_likert"),
        ),
        script_entry(
            &tag("T4_flag_accuracy"),
            ScriptBody::Payload(json!({
                "explanation": "no issues found",
                "incorrect_fields": [],
                "confidence_score": 90
            })),
            latency("T4_flag_accuracy"),
        ),
        script_entry(
            &tag("T5_flag_confidence"),
            ScriptBody::Payload(json!({
                "explanation": "b is questionable",
                "incorrect_fields": [{"field_name": "b", "explanation": "b mismatch"}],
                "rating": 7
            })),
            latency("T5_flag_confidence"),
        ),
    ]
}

/// A two-field task matching [`oracle_script`].
pub fn oracle_task() -> ScoringTask {
    let schema = OutputSchema::from_value(&json!({
        "type": "object",
        "properties": {"a": {"type": "string"}, "b": {"type": "string"}}
    }))
    .unwrap();
    let output = StructuredOutput::from_value(json!({"a": "x", "b": "y"})).unwrap();
    ScoringTask::new("", "verify this output", schema, output, None).unwrap()
}

/// Expected aggregate values for [`oracle_script`], recomputed from the
/// aggregation formulas by hand.
pub fn oracle_expectations() -> (f64, f64, f64) {
    let harmonic = |values: &[f64]| values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>();
    let doc =
        (0.8 + 0.9 + 0.7 + harmonic(&[1.0, 0.5]) + harmonic(&[0.75, 0.75])) / 5.0;
    let field_a = (1.0 + 0.75 + 0.9 + 0.9) / 4.0;
    let field_b = (0.5 + 0.75 + 0.9 + 0.1) / 4.0;
    (doc, field_a, field_b)
}
