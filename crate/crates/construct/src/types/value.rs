//! Structured-output values and their canonical JSON serialization.

use serde::{Deserialize, Serialize};

use super::CoreError;

/// A single field value inside a structured output: null, text, number,
/// boolean, a list of values, or a nested object.
///
/// Backed by [`serde_json::Value`] with insertion order preserved, so the
/// generator's field order survives parse/serialize round trips.
pub type Value = serde_json::Value;

/// A generated structured output `y` — an ordered map from top-level field
/// name to [`Value`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructuredOutput {
    values: serde_json::Map<String, Value>,
}

impl StructuredOutput {
    /// Builds a structured output from a JSON value, which must be an object.
    pub fn from_value(value: Value) -> Result<Self, CoreError> {
        match value {
            Value::Object(values) => Ok(Self { values }),
            other => Err(CoreError::NotAnObject {
                found: json_type_name(&other).to_string(),
            }),
        }
    }

    /// Parses a structured output from JSON text. Accepts the lenient dialect
    /// described in [`parse_lenient_json`].
    pub fn from_text(text: &str) -> Result<Self, CoreError> {
        Self::from_value(parse_lenient_json(text)?)
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.values.get(field)
    }

    /// Field names in insertion order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn as_map(&self) -> &serde_json::Map<String, Value> {
        &self.values
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.values)
    }

    /// Canonical serialization: pretty-printed JSON with two-space indent,
    /// fields in insertion order. This is the form embedded into prompts.
    pub fn to_pretty_text(&self) -> String {
        serde_json::to_string_pretty(&self.values).expect("object serialization cannot fail")
    }

    /// Compact single-line serialization.
    pub fn to_compact_text(&self) -> String {
        serde_json::to_string(&self.values).expect("object serialization cannot fail")
    }
}

/// Parses JSON text, additionally accepting the bare Python-style literals
/// `None`, `True`, and `False` (outside string literals) as `null`, `true`,
/// and `false`. Dataset samples circulate in both spellings.
pub fn parse_lenient_json(text: &str) -> Result<Value, CoreError> {
    match serde_json::from_str(text) {
        Ok(value) => Ok(value),
        Err(first_err) => {
            let rewritten = rewrite_python_literals(text);
            if rewritten == text {
                return Err(CoreError::Json(first_err));
            }
            serde_json::from_str(&rewritten).map_err(CoreError::Json)
        }
    }
}

/// Replaces bare `None`/`True`/`False` tokens with their JSON equivalents,
/// leaving string contents untouched.
fn rewrite_python_literals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut in_string = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            out.push(b as char);
            if b == b'\\' && i + 1 < bytes.len() {
                out.push(bytes[i + 1] as char);
                i += 2;
                continue;
            }
            if b == b'"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        if b == b'"' {
            in_string = true;
            out.push('"');
            i += 1;
            continue;
        }
        if b.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            match word {
                "None" => out.push_str("null"),
                "True" => out.push_str("true"),
                "False" => out.push_str("false"),
                other => out.push_str(other),
            }
            continue;
        }
        // Non-ASCII and punctuation pass through byte-wise; multi-byte UTF-8
        // sequences never contain ASCII bytes, so this is safe.
        let ch_len = utf8_len(b);
        out.push_str(&text[i..i + ch_len]);
        i += ch_len;
    }
    out
}

fn utf8_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

pub(crate) fn json_type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "text",
        Value::Array(_) => "list",
        Value::Object(_) => "object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trips_through_canonical_text() {
        let output = StructuredOutput::from_value(json!({
            "vendor": "Brightstone Manufacturing",
            "invoice_date": "2024-02-31",
            "total_amount": "1530.50",
            "currency": "USD"
        }))
        .unwrap();
        let reparsed = StructuredOutput::from_text(&output.to_pretty_text()).unwrap();
        assert_eq!(output, reparsed);
    }

    #[test]
    fn preserves_field_order() {
        let output = StructuredOutput::from_text(r#"{"b": 1, "a": 2, "c": 3}"#).unwrap();
        let keys: Vec<&str> = output.keys().collect();
        assert_eq!(keys, vec!["b", "a", "c"]);
    }

    #[test]
    fn lenient_parse_maps_python_literals() {
        let value = parse_lenient_json(r#"{"Date": None, "ok": True, "bad": False}"#).unwrap();
        assert_eq!(value, json!({"Date": null, "ok": true, "bad": false}));
    }

    #[test]
    fn lenient_parse_leaves_strings_alone() {
        let value = parse_lenient_json(r#"{"note": "use None here", "v": None}"#).unwrap();
        assert_eq!(value, json!({"note": "use None here", "v": null}));
    }

    #[test]
    fn lenient_parse_handles_escaped_quotes() {
        let value = parse_lenient_json(r#"{"note": "he said \"None\"", "v": None}"#).unwrap();
        assert_eq!(value, json!({"note": "he said \"None\"", "v": null}));
    }

    #[test]
    fn non_object_is_rejected() {
        let err = StructuredOutput::from_text("[1, 2]").unwrap_err();
        assert!(err.to_string().contains("expected an object"));
    }

    #[test]
    fn mixed_number_reprs_round_trip() {
        let output = StructuredOutput::from_text(r#"{"a": 2485.0, "b": 2485, "c": -940.618915}"#)
            .unwrap();
        let text = output.to_compact_text();
        assert!(text.contains("2485.0"));
        assert!(text.contains("2485,") || text.contains("\"b\":2485"));
        assert_eq!(StructuredOutput::from_text(&text).unwrap(), output);
    }
}
