//! Output schemas: the typed field contract a structured output must follow.
//!
//! Supports the JSON-Schema-style subset used by extraction tasks: scalar
//! types, lists, enumerations, nullable markers, and nested objects.

use serde::Serialize;

use super::value::{json_type_name, parse_lenient_json, StructuredOutput, Value};
use super::CoreError;

/// Schema for a structured output: an ordered list of named top-level fields
/// plus the exact schema text shown to LLMs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSchema {
    fields: Vec<SchemaField>,
    raw_schema_text: String,
}

/// One named field and its type descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaField {
    pub name: String,
    pub descriptor: TypeDescriptor,
}

/// The type contract for a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDescriptor {
    pub kind: TypeKind,
    pub nullable: bool,
    pub enum_values: Option<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeKind {
    Text,
    Number,
    Integer,
    Boolean,
    /// List with an optional element descriptor; `None` accepts any element.
    List(Option<Box<TypeDescriptor>>),
    /// Nested object with named sub-fields.
    Object(Vec<SchemaField>),
    /// No type constraint.
    Any,
}

impl TypeKind {
    fn name(&self) -> &'static str {
        match self {
            TypeKind::Text => "text",
            TypeKind::Number => "number",
            TypeKind::Integer => "integer",
            TypeKind::Boolean => "boolean",
            TypeKind::List(_) => "list",
            TypeKind::Object(_) => "object",
            TypeKind::Any => "any",
        }
    }
}

/// A single validation failure produced by [`validate_output`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingKey { key: String },
    ExtraKey { key: String },
    TypeMismatch { path: String, expected: String, found: String },
    NotInEnum { path: String, found: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MissingKey { key } => write!(f, "missing key: {key}"),
            Violation::ExtraKey { key } => write!(f, "extra key: {key}"),
            Violation::TypeMismatch { path, expected, found } => {
                write!(f, "type mismatch at {path}: expected {expected}, found {found}")
            }
            Violation::NotInEnum { path, found } => {
                write!(f, "value at {path} not in enumeration: {found}")
            }
        }
    }
}

impl OutputSchema {
    /// Parses a schema from its exact textual form. The text is preserved
    /// byte-for-byte for embedding into prompts.
    pub fn from_text(text: &str) -> Result<Self, CoreError> {
        let value = parse_lenient_json(text)?;
        Self::from_parts(&value, text.to_string())
    }

    /// Builds a schema from an already-parsed JSON value. The raw text is the
    /// pretty-printed form of the value.
    pub fn from_value(value: &Value) -> Result<Self, CoreError> {
        let text = serde_json::to_string_pretty(value).expect("value serialization cannot fail");
        Self::from_parts(value, text)
    }

    fn from_parts(value: &Value, raw_schema_text: String) -> Result<Self, CoreError> {
        let Value::Object(root) = value else {
            return Err(CoreError::InvalidSchema {
                detail: "schema root must be an object".to_string(),
            });
        };
        let Some(Value::Object(properties)) = root.get("properties") else {
            return Err(CoreError::InvalidSchema {
                detail: "schema root must declare properties".to_string(),
            });
        };
        if properties.is_empty() {
            return Err(CoreError::InvalidSchema {
                detail: "schema must declare at least one top-level field".to_string(),
            });
        }
        let fields = parse_fields(properties)?;
        Ok(Self { fields, raw_schema_text })
    }

    /// Names of the top-level fields, in declaration order. This order is
    /// canonical everywhere downstream.
    pub fn top_level_fields(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name.clone()).collect()
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[SchemaField] {
        &self.fields
    }

    /// The exact schema serialization embedded into prompts.
    pub fn raw_schema_text(&self) -> &str {
        &self.raw_schema_text
    }
}

fn parse_fields(properties: &serde_json::Map<String, Value>) -> Result<Vec<SchemaField>, CoreError> {
    properties
        .iter()
        .map(|(name, spec)| {
            Ok(SchemaField {
                name: name.clone(),
                descriptor: parse_descriptor(spec, name)?,
            })
        })
        .collect()
}

fn parse_descriptor(spec: &Value, path: &str) -> Result<TypeDescriptor, CoreError> {
    let Value::Object(spec) = spec else {
        return Err(CoreError::InvalidSchema {
            detail: format!("descriptor for {path} must be an object"),
        });
    };

    let mut nullable = matches!(spec.get("nullable"), Some(Value::Bool(true)));
    let enum_values = match spec.get("enum") {
        Some(Value::Array(values)) => Some(values.clone()),
        Some(_) => {
            return Err(CoreError::InvalidSchema {
                detail: format!("enum for {path} must be a list"),
            })
        }
        None => None,
    };

    let type_name = match spec.get("type") {
        Some(Value::String(name)) => Some(name.clone()),
        Some(Value::Array(names)) => {
            // ["string", "null"] style nullable unions
            let mut base = None;
            for entry in names {
                match entry.as_str() {
                    Some("null") => nullable = true,
                    Some(other) if base.is_none() => base = Some(other.to_string()),
                    Some(_) => {
                        return Err(CoreError::InvalidSchema {
                            detail: format!("type union for {path} has more than one non-null type"),
                        })
                    }
                    None => {
                        return Err(CoreError::InvalidSchema {
                            detail: format!("type union for {path} must contain strings"),
                        })
                    }
                }
            }
            base
        }
        Some(_) => {
            return Err(CoreError::InvalidSchema {
                detail: format!("type for {path} must be a string or list of strings"),
            })
        }
        None => None,
    };

    let kind = match type_name.as_deref() {
        Some("string") => TypeKind::Text,
        Some("number") => TypeKind::Number,
        Some("integer") => TypeKind::Integer,
        Some("boolean") => TypeKind::Boolean,
        Some("null") => {
            nullable = true;
            TypeKind::Any
        }
        Some("array") => {
            let items = match spec.get("items") {
                Some(items) => Some(Box::new(parse_descriptor(items, &format!("{path}[]"))?)),
                None => None,
            };
            TypeKind::List(items)
        }
        Some("object") => {
            let sub_fields = match spec.get("properties") {
                Some(Value::Object(props)) => parse_fields_with_path(props, path)?,
                Some(_) => {
                    return Err(CoreError::InvalidSchema {
                        detail: format!("properties for {path} must be an object"),
                    })
                }
                None => Vec::new(),
            };
            TypeKind::Object(sub_fields)
        }
        Some(other) => {
            return Err(CoreError::InvalidSchema {
                detail: format!("unsupported type {other:?} for {path}"),
            })
        }
        None => {
            // Untyped: infer from structure keywords if present.
            if let Some(Value::Object(props)) = spec.get("properties") {
                TypeKind::Object(parse_fields_with_path(props, path)?)
            } else if let Some(items) = spec.get("items") {
                TypeKind::List(Some(Box::new(parse_descriptor(items, &format!("{path}[]"))?)))
            } else {
                TypeKind::Any
            }
        }
    };

    Ok(TypeDescriptor { kind, nullable, enum_values })
}

fn parse_fields_with_path(
    properties: &serde_json::Map<String, Value>,
    path: &str,
) -> Result<Vec<SchemaField>, CoreError> {
    properties
        .iter()
        .map(|(name, spec)| {
            Ok(SchemaField {
                name: name.clone(),
                descriptor: parse_descriptor(spec, &format!("{path}.{name}"))?,
            })
        })
        .collect()
}

/// Checks a structured output against a schema. Returns every violation
/// found rather than failing on the first: the top-level key set must match
/// exactly, and each value must be type-compatible with its descriptor
/// (null allowed where nullable).
pub fn validate_output(schema: &OutputSchema, output: &StructuredOutput) -> Vec<Violation> {
    let mut violations = Vec::new();
    for field in schema.fields() {
        match output.get(&field.name) {
            Some(value) => check_value(value, &field.descriptor, &field.name, &mut violations),
            None => violations.push(Violation::MissingKey { key: field.name.clone() }),
        }
    }
    let declared: Vec<&str> = schema.fields().iter().map(|f| f.name.as_str()).collect();
    for key in output.keys() {
        if !declared.contains(&key) {
            violations.push(Violation::ExtraKey { key: key.to_string() });
        }
    }
    violations
}

fn check_value(value: &Value, descriptor: &TypeDescriptor, path: &str, out: &mut Vec<Violation>) {
    if value.is_null() {
        if !descriptor.nullable {
            out.push(Violation::TypeMismatch {
                path: path.to_string(),
                expected: descriptor.kind.name().to_string(),
                found: "null".to_string(),
            });
        }
        return;
    }

    if let Some(allowed) = &descriptor.enum_values {
        if !allowed.contains(value) {
            out.push(Violation::NotInEnum {
                path: path.to_string(),
                found: value.to_string(),
            });
            return;
        }
    }

    let mismatch = |out: &mut Vec<Violation>| {
        out.push(Violation::TypeMismatch {
            path: path.to_string(),
            expected: descriptor.kind.name().to_string(),
            found: json_type_name(value).to_string(),
        });
    };

    match &descriptor.kind {
        TypeKind::Any => {}
        TypeKind::Text => {
            if !value.is_string() {
                mismatch(out);
            }
        }
        TypeKind::Number => {
            if !value.is_number() {
                mismatch(out);
            }
        }
        TypeKind::Integer => {
            if !(value.is_i64() || value.is_u64()) {
                mismatch(out);
            }
        }
        TypeKind::Boolean => {
            if !value.is_boolean() {
                mismatch(out);
            }
        }
        TypeKind::List(items) => match value {
            Value::Array(elements) => {
                if let Some(item_descriptor) = items {
                    for (i, element) in elements.iter().enumerate() {
                        check_value(element, item_descriptor, &format!("{path}[{i}]"), out);
                    }
                }
            }
            _ => mismatch(out),
        },
        TypeKind::Object(sub_fields) => match value {
            Value::Object(entries) => {
                for sub in sub_fields {
                    match entries.get(&sub.name) {
                        Some(sub_value) => check_value(
                            sub_value,
                            &sub.descriptor,
                            &format!("{path}.{}", sub.name),
                            out,
                        ),
                        None => out.push(Violation::MissingKey {
                            key: format!("{path}.{}", sub.name),
                        }),
                    }
                }
                let declared: Vec<&str> = sub_fields.iter().map(|f| f.name.as_str()).collect();
                for key in entries.keys() {
                    if !declared.contains(&key.as_str()) {
                        out.push(Violation::ExtraKey { key: format!("{path}.{key}") });
                    }
                }
            }
            _ => mismatch(out),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn invoice_schema() -> OutputSchema {
        OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {
                "vendor": {"type": "string"},
                "invoice_date": {"type": "string"},
                "total_amount": {"type": "string"},
                "currency": {"type": "string"}
            },
            "required": ["vendor", "invoice_date", "total_amount", "currency"]
        }))
        .unwrap()
    }

    #[test]
    fn top_level_fields_in_declaration_order() {
        let schema = invoice_schema();
        assert_eq!(
            schema.top_level_fields(),
            vec!["vendor", "invoice_date", "total_amount", "currency"]
        );
        // Deterministic across calls.
        assert_eq!(schema.top_level_fields(), schema.top_level_fields());
    }

    #[test]
    fn singleton_schema() {
        let schema = OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {"a": {"type": "string"}}
        }))
        .unwrap();
        assert_eq!(schema.top_level_fields(), vec!["a"]);
    }

    #[test]
    fn nested_schema_exposes_only_top_level_names() {
        let schema = OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {
                "header": {"type": "object", "properties": {"claim_id": {"type": "string"}}},
                "policy_details": {"type": "object", "nullable": true},
                "insured_objects": {"type": "array", "nullable": true,
                                    "items": {"type": "object"}},
                "incident_description": {"type": "object"}
            }
        }))
        .unwrap();
        assert_eq!(
            schema.top_level_fields(),
            vec!["header", "policy_details", "insured_objects", "incident_description"]
        );
    }

    #[test]
    fn empty_schema_rejected() {
        let err = OutputSchema::from_value(&json!({"type": "object", "properties": {}}));
        assert!(err.is_err());
    }

    #[test]
    fn raw_text_preserved_exactly() {
        let text = "{\"type\": \"object\",\n  \"properties\": {\"a\": {\"type\": \"string\"}}}";
        let schema = OutputSchema::from_text(text).unwrap();
        assert_eq!(schema.raw_schema_text(), text);
    }

    #[test]
    fn conforming_output_is_ok() {
        let schema = invoice_schema();
        let output = StructuredOutput::from_value(json!({
            "vendor": "Brightstone Manufacturing",
            "invoice_date": "2024-02-31",
            "total_amount": "1530.50",
            "currency": "USD"
        }))
        .unwrap();
        assert!(validate_output(&schema, &output).is_empty());
    }

    #[test]
    fn missing_key_reported() {
        let schema = invoice_schema();
        let output = StructuredOutput::from_value(json!({
            "vendor": "x", "invoice_date": "y", "total_amount": "z"
        }))
        .unwrap();
        let violations = validate_output(&schema, &output);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].to_string(), "missing key: currency");
    }

    #[test]
    fn extra_key_reported() {
        let schema = invoice_schema();
        let output = StructuredOutput::from_value(json!({
            "vendor": "x", "invoice_date": "y", "total_amount": "z",
            "currency": "USD", "notes": "extra"
        }))
        .unwrap();
        let violations = validate_output(&schema, &output);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].to_string(), "extra key: notes");
    }

    #[test]
    fn type_mismatch_reported_with_path() {
        let schema = OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {
                "amount": {"type": "number"},
                "tags": {"type": "array", "items": {"type": "string"}}
            }
        }))
        .unwrap();
        let output = StructuredOutput::from_value(json!({
            "amount": "not a number",
            "tags": ["ok", 7]
        }))
        .unwrap();
        let violations = validate_output(&schema, &output);
        let rendered: Vec<String> = violations.iter().map(ToString::to_string).collect();
        assert!(rendered.contains(&"type mismatch at amount: expected number, found text".to_string()));
        assert!(rendered.contains(&"type mismatch at tags[1]: expected text, found number".to_string()));
    }

    #[test]
    fn nullable_accepts_null() {
        let schema = OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {
                "a": {"type": ["string", "null"]},
                "b": {"type": "string", "nullable": true},
                "c": {"type": "string"}
            }
        }))
        .unwrap();
        let output =
            StructuredOutput::from_value(json!({"a": null, "b": null, "c": null})).unwrap();
        let violations = validate_output(&schema, &output);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].to_string().contains("type mismatch at c"));
    }

    #[test]
    fn enum_membership_checked() {
        let schema = OutputSchema::from_value(&json!({
            "type": "object",
            "properties": {"kind": {"type": "string", "enum": ["str", "int", "float"]}}
        }))
        .unwrap();
        let ok = StructuredOutput::from_value(json!({"kind": "int"})).unwrap();
        assert!(validate_output(&schema, &ok).is_empty());
        let bad = StructuredOutput::from_value(json!({"kind": "bool"})).unwrap();
        assert_eq!(validate_output(&schema, &bad).len(), 1);
    }
}
