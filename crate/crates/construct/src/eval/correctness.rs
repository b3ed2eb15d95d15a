//! Correctness judging: is a generated field value equal to the ground
//! truth under the dataset's comparison profile?

use serde::Serialize;

use crate::types::Value;

/// Absolute tolerance for numeric equality. Ground truths mix integer and
/// float spellings of the same quantity (2485 vs 2485.0).
pub const NUMERIC_TOLERANCE: f64 = 1e-9;

/// Normalization rule-set for a dataset. Entity-extraction datasets compare
/// lists as multisets; everything else compares positionally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonProfile {
    #[default]
    OrderedLists,
    UnorderedLists,
}

impl std::str::FromStr for ComparisonProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ordered_lists" | "ordered" => Ok(ComparisonProfile::OrderedLists),
            "unordered_lists" | "unordered" => Ok(ComparisonProfile::UnorderedLists),
            other => Err(format!("unknown comparison profile {other:?}")),
        }
    }
}

/// Deep equality under the profile's normalization: canonical nulls, trimmed
/// strings, numbers within [`NUMERIC_TOLERANCE`], lists positionally or as
/// multisets, nested maps key-wise.
pub fn field_correct(predicted: &Value, truth: &Value, profile: ComparisonProfile) -> bool {
    match (predicted, truth) {
        (Value::Null, Value::Null) => true,
        (Value::Bool(a), Value::Bool(b)) => a == b,
        (Value::Number(a), Value::Number(b)) => match (a.as_f64(), b.as_f64()) {
            (Some(a), Some(b)) => (a - b).abs() <= NUMERIC_TOLERANCE,
            _ => a == b,
        },
        (Value::String(a), Value::String(b)) => a.trim() == b.trim(),
        (Value::Array(a), Value::Array(b)) => match profile {
            ComparisonProfile::OrderedLists => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| field_correct(x, y, profile))
            }
            ComparisonProfile::UnorderedLists => multiset_equal(a, b, profile),
        },
        (Value::Object(a), Value::Object(b)) => {
            a.len() == b.len()
                && a.iter().all(|(key, value)| {
                    b.get(key).is_some_and(|other| field_correct(value, other, profile))
                })
        }
        _ => false,
    }
}

fn multiset_equal(a: &[Value], b: &[Value], profile: ComparisonProfile) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut matched = vec![false; b.len()];
    for item in a {
        let slot = b.iter().enumerate().find(|(i, candidate)| {
            !matched[*i] && field_correct(item, candidate, profile)
        });
        match slot {
            Some((i, _)) => matched[i] = true,
            None => return false,
        }
    }
    true
}

/// Fraction of individually correct fields across all examples.
pub fn field_accuracy(results: &[Vec<bool>]) -> f64 {
    let total: usize = results.iter().map(Vec::len).sum();
    assert!(total > 0, "field_accuracy requires at least one field result");
    let correct: usize = results.iter().flatten().filter(|c| **c).count();
    correct as f64 / total as f64
}

/// Fraction of examples whose every field is correct.
pub fn document_accuracy(results: &[Vec<bool>]) -> f64 {
    assert!(!results.is_empty(), "document_accuracy requires at least one example");
    let fully_correct = results.iter().filter(|fields| fields.iter().all(|c| *c)).count();
    fully_correct as f64 / results.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unordered_lists_compare_as_multisets() {
        let a = json!(["GSK", "Unilever"]);
        let b = json!(["Unilever", "GSK"]);
        assert!(field_correct(&a, &b, ComparisonProfile::UnorderedLists));
        assert!(!field_correct(&a, &b, ComparisonProfile::OrderedLists));
    }

    #[test]
    fn multiset_respects_multiplicity() {
        let a = json!(["x", "x", "y"]);
        let b = json!(["x", "y", "y"]);
        assert!(!field_correct(&a, &b, ComparisonProfile::UnorderedLists));
    }

    #[test]
    fn differing_strings_are_wrong() {
        let predicted = json!("2024-02-31");
        let truth = json!("2024-02-12");
        assert!(!field_correct(&predicted, &truth, ComparisonProfile::OrderedLists));
    }

    #[test]
    fn strings_compare_after_trimming() {
        assert!(field_correct(&json!("  USD "), &json!("USD"), ComparisonProfile::OrderedLists));
    }

    #[test]
    fn numbers_compare_within_tolerance() {
        assert!(field_correct(&json!(2485.0), &json!(2485), ComparisonProfile::OrderedLists));
        assert!(!field_correct(&json!(2485.1), &json!(2485), ComparisonProfile::OrderedLists));
        assert!(!field_correct(&json!("2485"), &json!(2485), ComparisonProfile::OrderedLists));
    }

    #[test]
    fn nulls_match_only_nulls() {
        assert!(field_correct(&json!(null), &json!(null), ComparisonProfile::OrderedLists));
        assert!(!field_correct(&json!(""), &json!(null), ComparisonProfile::OrderedLists));
    }

    #[test]
    fn nested_maps_compare_keywise() {
        let a = json!({"Beta": 2485.0, "Gamma": null});
        let b = json!({"Gamma": null, "Beta": 2485});
        assert!(field_correct(&a, &b, ComparisonProfile::OrderedLists));
        let c = json!({"Beta": 2485.0});
        assert!(!field_correct(&a, &c, ComparisonProfile::OrderedLists));
    }

    #[test]
    fn field_correct_is_reflexive_and_symmetric() {
        let values = [
            json!(null),
            json!("text"),
            json!(12.5),
            json!([1, 2, 3]),
            json!({"k": ["a", null]}),
        ];
        for profile in [ComparisonProfile::OrderedLists, ComparisonProfile::UnorderedLists] {
            for v in &values {
                assert!(field_correct(v, v, profile));
                for w in &values {
                    assert_eq!(field_correct(v, w, profile), field_correct(w, v, profile));
                }
            }
        }
    }

    #[test]
    fn accuracy_counts() {
        let results = vec![vec![true, true], vec![true, false]];
        assert_eq!(field_accuracy(&results), 0.75);
        assert_eq!(document_accuracy(&results), 0.5);

        let all = vec![vec![true], vec![true]];
        assert_eq!(field_accuracy(&all), 1.0);
        assert_eq!(document_accuracy(&all), 1.0);

        let none = vec![vec![false], vec![false]];
        assert_eq!(field_accuracy(&none), 0.0);
        assert_eq!(document_accuracy(&none), 0.0);
    }

    #[test]
    fn document_correct_implies_all_fields_correct() {
        let results = vec![vec![true, true, true], vec![true, false, true]];
        for fields in &results {
            let doc_correct = fields.iter().all(|c| *c);
            if doc_correct {
                assert!(fields.iter().all(|c| *c));
            }
        }
        assert_eq!(document_accuracy(&results), 0.5);
    }

    #[test]
    fn single_field_error_fails_the_document() {
        // One wrong field out of seven sinks the document.
        let results = vec![vec![true, true, true, false, true, true, true]];
        assert_eq!(document_accuracy(&results), 0.0);
        assert!((field_accuracy(&results) - 6.0 / 7.0).abs() < 1e-12);
    }
}
