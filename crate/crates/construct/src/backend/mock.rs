//! Deterministic scripted backend for tests and offline runs.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use crate::types::{StructuredOutput, Value};

use super::{ChatBackend, ChatOutcome, ChatRequest, OutcomeStatus};

/// One scripted reply. A request consumes the first unconsumed entry whose
/// `tag` matches the request's tag; an entry without a tag matches any
/// request.
#[derive(Debug, Clone, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub reply_text: Option<String>,
    #[serde(default)]
    pub reply_payload: Option<Value>,
    #[serde(default)]
    pub scripted_latency_ms: u64,
    #[serde(default)]
    pub scripted_status: ScriptedStatus,
    #[serde(default)]
    pub scripted_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedStatus {
    #[default]
    Completed,
    TimedOut,
    TransportFailed,
}

/// Scripted mock backend. Same script plus same requests always produce the
/// same outcomes; even the reported latency is the scripted value rather
/// than wall time.
pub struct MockBackend {
    entries: Vec<ScriptEntry>,
    consumed: Mutex<Vec<bool>>,
}

impl MockBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = Mutex::new(vec![false; entries.len()]);
        Self { entries, consumed }
    }

    /// Loads a script file: a JSON array of entries.
    pub fn from_script_file(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::new(entries))
    }

    fn take_entry(&self, tag: Option<&str>) -> Option<ScriptEntry> {
        let mut consumed = self.consumed.lock().expect("mock script lock");
        for (i, entry) in self.entries.iter().enumerate() {
            if consumed[i] {
                continue;
            }
            let matches = match (&entry.tag, tag) {
                (None, _) => true,
                (Some(entry_tag), Some(request_tag)) => entry_tag == request_tag,
                (Some(_), None) => false,
            };
            if matches {
                consumed[i] = true;
                return Some(entry.clone());
            }
        }
        None
    }
}

#[async_trait::async_trait]
impl ChatBackend for MockBackend {
    async fn complete(&self, request: &ChatRequest) -> ChatOutcome {
        let Some(entry) = self.take_entry(request.tag.as_deref()) else {
            return ChatOutcome::transport_failed(
                format!("no scripted reply for tag {:?}", request.tag),
                0,
            );
        };

        if entry.scripted_latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(entry.scripted_latency_ms)).await;
        }

        match entry.scripted_status {
            ScriptedStatus::TimedOut => ChatOutcome::timed_out(entry.scripted_latency_ms),
            ScriptedStatus::TransportFailed => {
                ChatOutcome::transport_failed("scripted transport failure", entry.scripted_latency_ms)
            }
            ScriptedStatus::Completed => {
                let (content, payload) = match (entry.reply_text, entry.reply_payload) {
                    (Some(text), None) => (Some(text), None),
                    (text, Some(value)) => {
                        let rendered = text.unwrap_or_else(|| value.to_string());
                        let payload = StructuredOutput::from_value(value).ok();
                        (Some(rendered), payload)
                    }
                    (None, None) => (Some(String::new()), None),
                };
                ChatOutcome {
                    status: OutcomeStatus::Completed,
                    content,
                    structured_payload: payload,
                    token_logprobs: if request.want_logprobs {
                        entry.scripted_logprobs
                    } else {
                        None
                    },
                    latency_ms: entry.scripted_latency_ms,
                    diagnostic: None,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;
    use serde_json::json;

    fn request(tag: Option<&str>) -> ChatRequest {
        let mut req = ChatRequest::new(vec![ChatMessage::user("hi")], "mock");
        if let Some(tag) = tag {
            req = req.with_tag(tag);
        }
        req
    }

    #[tokio::test]
    async fn scripted_text_reply() {
        let backend = MockBackend::new(vec![ScriptEntry {
            tag: None,
            reply_text: Some("<score>90</score>".to_string()),
            reply_payload: None,
            scripted_latency_ms: 0,
            scripted_status: ScriptedStatus::Completed,
            scripted_logprobs: None,
        }]);
        let outcome = backend.complete(&request(None)).await;
        assert!(outcome.is_completed());
        assert_eq!(outcome.content.as_deref(), Some("<score>90</score>"));
    }

    #[tokio::test]
    async fn payload_reply_carries_structured_output() {
        let backend = MockBackend::new(vec![ScriptEntry {
            tag: Some("T4_flag_accuracy".to_string()),
            reply_text: None,
            reply_payload: Some(json!({"explanation": "ok", "incorrect_fields": [],
                                       "confidence_score": 90})),
            scripted_latency_ms: 0,
            scripted_status: ScriptedStatus::Completed,
            scripted_logprobs: None,
        }]);
        let outcome = backend.complete(&request(Some("T4_flag_accuracy"))).await;
        let payload = outcome.structured_payload.unwrap();
        assert_eq!(payload.get("confidence_score"), Some(&json!(90)));
    }

    #[tokio::test]
    async fn unmatched_tag_is_transport_failure() {
        let backend = MockBackend::new(vec![ScriptEntry {
            tag: Some("T1".to_string()),
            reply_text: Some("x".to_string()),
            reply_payload: None,
            scripted_latency_ms: 0,
            scripted_status: ScriptedStatus::Completed,
            scripted_logprobs: None,
        }]);
        let outcome = backend.complete(&request(Some("T2_numeric"))).await;
        assert_eq!(outcome.status, OutcomeStatus::TransportFailed);
    }

    #[tokio::test]
    async fn entries_consumed_in_order() {
        let entries = vec![
            ScriptEntry {
                tag: Some("T1".to_string()),
                reply_text: Some("first".to_string()),
                reply_payload: None,
                scripted_latency_ms: 0,
                scripted_status: ScriptedStatus::Completed,
                scripted_logprobs: None,
            },
            ScriptEntry {
                tag: Some("T1".to_string()),
                reply_text: Some("second".to_string()),
                reply_payload: None,
                scripted_latency_ms: 0,
                scripted_status: ScriptedStatus::Completed,
                scripted_logprobs: None,
            },
        ];
        let backend = MockBackend::new(entries);
        let a = backend.complete(&request(Some("T1"))).await;
        let b = backend.complete(&request(Some("T1"))).await;
        assert_eq!(a.content.as_deref(), Some("first"));
        assert_eq!(b.content.as_deref(), Some("second"));
        let c = backend.complete(&request(Some("T1"))).await;
        assert_eq!(c.status, OutcomeStatus::TransportFailed);
    }

    #[tokio::test]
    async fn logprobs_only_returned_when_requested() {
        let entry = ScriptEntry {
            tag: None,
            reply_text: Some("{}".to_string()),
            reply_payload: None,
            scripted_latency_ms: 0,
            scripted_status: ScriptedStatus::Completed,
            scripted_logprobs: Some(vec![-0.1, -0.2]),
        };
        let backend = MockBackend::new(vec![entry.clone(), entry]);
        let plain = backend.complete(&request(None)).await;
        assert!(plain.token_logprobs.is_none());
        let with = backend.complete(&request(None).with_logprobs()).await;
        assert_eq!(with.token_logprobs.unwrap(), vec![-0.1, -0.2]);
    }
}
