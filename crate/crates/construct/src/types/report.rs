//! The final trust report for one structured output.

use indexmap::IndexMap;
use serde::Serialize;

use super::score::TemplateId;
use super::value::{StructuredOutput, Value};

/// Outcome of one verifier call, as recorded in report diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Completed,
    TimedOut,
    ParseFailed,
    TransportFailed,
}

/// Per-call diagnostic record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallDiagnostic {
    pub template_id: TemplateId,
    pub outcome: CallOutcome,
    pub latency_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// The scoring result for one structured output: an overall trustworthiness
/// score, per-field scores and explanations, the fields that warrant review,
/// and per-call diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustReport {
    pub trustworthiness_score: f64,
    /// Per-field scores in the schema's canonical field order.
    pub per_field_scores: IndexMap<String, f64>,
    pub per_field_explanations: IndexMap<String, String>,
    pub doc_explanation: String,
    /// Fields scoring below the configured threshold, sorted ascending by
    /// score.
    pub untrustworthy_fields: Vec<String>,
    pub diagnostics: Vec<CallDiagnostic>,
}

impl TrustReport {
    /// Renders the report as human-readable text, with an `Untrustworthy
    /// fields` block listing Response/Score/Explanation for each flagged
    /// field of `output`.
    pub fn to_text(&self, output: &StructuredOutput) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Trustworthiness score: {:.2}\n\n",
            self.trustworthiness_score
        ));
        out.push_str("Per-field scores:\n");
        for (field, score) in &self.per_field_scores {
            out.push_str(&format!("  {field}: {score:.2}\n"));
        }
        out.push('\n');
        let listed: Vec<String> = self
            .untrustworthy_fields
            .iter()
            .map(|f| format!("'{f}'"))
            .collect();
        out.push_str(&format!("Untrustworthy fields: [{}]\n", listed.join(", ")));
        for field in &self.untrustworthy_fields {
            out.push('\n');
            out.push_str(&format!("Field: {field}\n"));
            let response = output.get(field).map(render_value).unwrap_or_default();
            out.push_str(&format!("Response: {response}\n"));
            let score = self.per_field_scores.get(field).copied().unwrap_or(0.0);
            out.push_str(&format!("Score: {score:.2}\n"));
            let explanation = self
                .per_field_explanations
                .get(field)
                .map(String::as_str)
                .unwrap_or("");
            out.push_str(&format!("Explanation: {explanation}\n"));
        }
        out
    }
}

fn render_value(value: &Value) -> String {
    match value {
        Value::String(text) => text.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn text_rendering_lists_flagged_fields_low_score_first() {
        let mut scores = IndexMap::new();
        scores.insert("vendor".to_string(), 0.99);
        scores.insert("invoice_date".to_string(), 0.03);
        scores.insert("total_amount".to_string(), 0.16);
        scores.insert("currency".to_string(), 0.98);
        let mut explanations = IndexMap::new();
        explanations.insert("invoice_date".to_string(), "invalid date".to_string());
        explanations.insert("total_amount".to_string(), "amount mismatch".to_string());

        let report = TrustReport {
            trustworthiness_score: 0.18,
            per_field_scores: scores,
            per_field_explanations: explanations,
            doc_explanation: "several fields look wrong".to_string(),
            untrustworthy_fields: vec!["invoice_date".to_string(), "total_amount".to_string()],
            diagnostics: vec![],
        };
        let output = StructuredOutput::from_value(json!({
            "vendor": "Brightstone Manufacturing",
            "invoice_date": "2024-02-31",
            "total_amount": "1530.50",
            "currency": "USD"
        }))
        .unwrap();

        let text = report.to_text(&output);
        assert!(text.contains("Trustworthiness score: 0.18"));
        assert!(text.contains("Untrustworthy fields: ['invoice_date', 'total_amount']"));
        assert!(text.contains("Field: invoice_date\nResponse: 2024-02-31\nScore: 0.03\nExplanation: invalid date"));
        assert!(text.contains("Field: total_amount\nResponse: 1530.50\nScore: 0.16"));
    }

    #[test]
    fn non_string_responses_render_as_json() {
        assert_eq!(render_value(&json!(37000)), "37000");
        assert_eq!(render_value(&json!(["a", "b"])), r#"["a","b"]"#);
        assert_eq!(render_value(&json!(null)), "null");
    }
}
