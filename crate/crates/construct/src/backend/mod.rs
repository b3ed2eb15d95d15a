//! Model endpoint abstraction: one interface, an OpenAI-compatible HTTP
//! implementation, a deterministic scripted mock, and concurrent dispatch
//! with a deadline that discards late results.

mod http;
mod mock;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

use crate::types::{StructuredOutput, Value};

pub use http::HttpBackend;
pub use mock::{MockBackend, ScriptEntry, ScriptedStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// One chat-completion request.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    /// Non-empty; the first message is the system or user turn.
    pub messages: Vec<ChatMessage>,
    /// JSON schema the reply must follow, when the call is structured.
    pub response_format: Option<Value>,
    pub want_logprobs: bool,
    pub temperature: f64,
    pub model_name: String,
    /// Routing tag: identifies the originating template (and, for batch
    /// runs, the example scope). The mock backend keys its script on this.
    pub tag: Option<String>,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, model_name: impl Into<String>) -> Self {
        debug_assert!(!messages.is_empty());
        Self {
            messages,
            response_format: None,
            want_logprobs: false,
            temperature: 0.0,
            model_name: model_name.into(),
            tag: None,
        }
    }

    pub fn with_response_format(mut self, schema: Value) -> Self {
        self.response_format = Some(schema);
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn with_logprobs(mut self) -> Self {
        self.want_logprobs = true;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Completed,
    TimedOut,
    TransportFailed,
}

/// The result of one chat call. Transport problems never surface as `Err`;
/// they become a `TransportFailed` outcome with a diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct ChatOutcome {
    pub status: OutcomeStatus,
    pub content: Option<String>,
    pub structured_payload: Option<StructuredOutput>,
    pub token_logprobs: Option<Vec<f64>>,
    pub latency_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ChatOutcome {
    pub fn completed(content: String, latency_ms: u64) -> Self {
        Self {
            status: OutcomeStatus::Completed,
            content: Some(content),
            structured_payload: None,
            token_logprobs: None,
            latency_ms,
            diagnostic: None,
        }
    }

    pub fn timed_out(latency_ms: u64) -> Self {
        Self {
            status: OutcomeStatus::TimedOut,
            content: None,
            structured_payload: None,
            token_logprobs: None,
            latency_ms,
            diagnostic: None,
        }
    }

    pub fn transport_failed(diagnostic: impl Into<String>, latency_ms: u64) -> Self {
        Self {
            status: OutcomeStatus::TransportFailed,
            content: None,
            structured_payload: None,
            token_logprobs: None,
            latency_ms,
            diagnostic: Some(diagnostic.into()),
        }
    }

    pub fn is_completed(&self) -> bool {
        self.status == OutcomeStatus::Completed
    }
}

/// A chat-completion endpoint. Implementations must be safely callable from
/// multiple concurrent tasks; [`dispatch_parallel`] owns the concurrency.
#[async_trait::async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> ChatOutcome;
}

/// Deadline policy for [`dispatch_parallel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeoutPolicy {
    /// One fixed deadline for the whole batch.
    Fixed { deadline_ms: u64 },
    /// Deadline tightens to `2 x median latency` of the calls already
    /// completed in this batch, floored at `floor_ms` and capped at `cap_ms`.
    Adaptive { floor_ms: u64, cap_ms: u64 },
}

impl TimeoutPolicy {
    fn current_deadline_ms(&self, completed_latencies: &[u64]) -> u64 {
        match *self {
            TimeoutPolicy::Fixed { deadline_ms } => deadline_ms,
            TimeoutPolicy::Adaptive { floor_ms, cap_ms } => {
                if completed_latencies.is_empty() {
                    return cap_ms;
                }
                let mut sorted = completed_latencies.to_vec();
                sorted.sort_unstable();
                let median = sorted[sorted.len() / 2];
                (2 * median).clamp(floor_ms, cap_ms)
            }
        }
    }
}

/// Starts every request concurrently and returns outcomes in input order.
/// Requests that have not completed by the deadline yield `TimedOut`; their
/// in-flight work is abandoned and its eventual result ignored.
pub async fn dispatch_parallel(
    backend: Arc<dyn ChatBackend>,
    requests: Vec<ChatRequest>,
    policy: TimeoutPolicy,
) -> Vec<ChatOutcome> {
    let n = requests.len();
    let started = Instant::now();
    let (tx, mut rx) = mpsc::unbounded_channel::<(usize, ChatOutcome)>();

    let mut handles = Vec::with_capacity(n);
    for (index, request) in requests.into_iter().enumerate() {
        let backend = Arc::clone(&backend);
        let tx = tx.clone();
        handles.push(tokio::spawn(async move {
            let outcome = backend.complete(&request).await;
            let _ = tx.send((index, outcome));
        }));
    }
    drop(tx);

    let mut results: Vec<Option<ChatOutcome>> = (0..n).map(|_| None).collect();
    let mut completed_latencies: Vec<u64> = Vec::new();
    let mut received = 0;

    while received < n {
        let deadline_ms = policy.current_deadline_ms(&completed_latencies);
        let cutoff = started + Duration::from_millis(deadline_ms);
        tokio::select! {
            message = rx.recv() => match message {
                Some((index, outcome)) => {
                    if outcome.is_completed() {
                        completed_latencies.push(outcome.latency_ms);
                    }
                    results[index] = Some(outcome);
                    received += 1;
                }
                None => break,
            },
            _ = tokio::time::sleep_until(cutoff.into()) => break,
        }
    }

    for handle in handles {
        handle.abort();
    }

    let elapsed_ms = started.elapsed().as_millis() as u64;
    results
        .into_iter()
        .map(|slot| slot.unwrap_or_else(|| ChatOutcome::timed_out(elapsed_ms)))
        .collect()
}
