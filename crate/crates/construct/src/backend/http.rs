//! OpenAI-compatible chat-completions client.

use std::time::Instant;

use serde::Deserialize;
use serde_json::json;

use crate::types::{validate_output, OutputSchema, StructuredOutput, Value};

use super::{ChatBackend, ChatOutcome, ChatRequest, OutcomeStatus, Role};

/// Environment variable holding the API credential.
pub const API_KEY_ENV: &str = "CONSTRUCT_API_KEY";
/// Environment variable holding the endpoint base URL.
pub const BASE_URL_ENV: &str = "CONSTRUCT_BASE_URL";

/// Speaks `POST {base_url}/chat/completions` with optional bearer auth,
/// structured response formats, and token logprobs.
pub struct HttpBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        Self { client: reqwest::Client::new(), base_url, api_key }
    }

    /// Builds a backend from `CONSTRUCT_BASE_URL` / `CONSTRUCT_API_KEY`,
    /// unless an explicit base URL is given.
    pub fn from_env(base_url_override: Option<&str>) -> Result<Self, BackendConfigError> {
        let base_url = match base_url_override {
            Some(url) => url.to_string(),
            None => std::env::var(BASE_URL_ENV).map_err(|_| BackendConfigError::MissingBaseUrl)?,
        };
        let api_key = std::env::var(API_KEY_ENV).ok();
        Ok(Self::new(base_url, api_key))
    }

    fn request_body(&self, request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                json!({
                    "role": match m.role { Role::System => "system", Role::User => "user" },
                    "content": m.content,
                })
            })
            .collect();
        let mut body = json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(schema) = &request.response_format {
            body["response_format"] = json!({
                "type": "json_schema",
                "json_schema": {
                    "name": "response",
                    "schema": schema,
                    "strict": true,
                }
            });
        }
        if request.want_logprobs {
            body["logprobs"] = json!(true);
        }
        body
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendConfigError {
    #[error("no base URL configured: set {BASE_URL_ENV} or pass --base-url")]
    MissingBaseUrl,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Option<Vec<TokenLogprob>>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    logprob: f64,
}

#[async_trait::async_trait]
impl ChatBackend for HttpBackend {
    async fn complete(&self, request: &ChatRequest) -> ChatOutcome {
        let started = Instant::now();
        let elapsed_ms = |started: Instant| started.elapsed().as_millis() as u64;

        let url = format!("{}/chat/completions", self.base_url);
        let mut http = self.client.post(&url).json(&self.request_body(request));
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }

        let response = match http.send().await {
            Ok(response) => response,
            Err(e) => {
                return ChatOutcome::transport_failed(
                    format!("request failed: {e}"),
                    elapsed_ms(started),
                )
            }
        };

        let status = response.status();
        let body = match response.text().await {
            Ok(body) => body,
            Err(e) => {
                return ChatOutcome::transport_failed(
                    format!("failed reading response body: {e}"),
                    elapsed_ms(started),
                )
            }
        };
        if !status.is_success() {
            return ChatOutcome::transport_failed(
                format!("HTTP {status}: {}", truncate(&body, 500)),
                elapsed_ms(started),
            );
        }

        let parsed: CompletionResponse = match serde_json::from_str(&body) {
            Ok(parsed) => parsed,
            Err(e) => {
                return ChatOutcome::transport_failed(
                    format!("malformed response body: {e}"),
                    elapsed_ms(started),
                )
            }
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return ChatOutcome::transport_failed("response has no choices", elapsed_ms(started));
        };
        let Some(content) = choice.message.content else {
            return ChatOutcome::transport_failed(
                "response message has no content",
                elapsed_ms(started),
            );
        };

        let structured_payload = match &request.response_format {
            Some(schema) => match parse_structured(&content, schema) {
                Ok(payload) => Some(payload),
                Err(diagnostic) => {
                    return ChatOutcome::transport_failed(diagnostic, elapsed_ms(started))
                }
            },
            None => None,
        };

        let token_logprobs = choice
            .logprobs
            .and_then(|lp| lp.content)
            .map(|tokens| tokens.into_iter().map(|t| t.logprob).collect::<Vec<f64>>())
            .filter(|v| !v.is_empty());

        ChatOutcome {
            status: OutcomeStatus::Completed,
            content: Some(content),
            structured_payload,
            token_logprobs,
            latency_ms: elapsed_ms(started),
            diagnostic: None,
        }
    }
}

fn parse_structured(content: &str, schema: &Value) -> Result<StructuredOutput, String> {
    let payload = StructuredOutput::from_text(content)
        .map_err(|e| format!("structured reply is not a JSON object: {e}"))?;
    // Validate only when the schema fits the supported subset; anything
    // else passes through for the caller's parser to judge.
    if let Ok(parsed_schema) = OutputSchema::from_value(schema) {
        let violations = validate_output(&parsed_schema, &payload);
        if !violations.is_empty() {
            let rendered: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(format!("schema violation: {}", rendered.join("; ")));
        }
    }
    Ok(payload)
}

fn truncate(text: &str, limit: usize) -> &str {
    match text.char_indices().nth(limit) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;

    #[test]
    fn request_body_includes_response_format_and_logprobs() {
        let backend = HttpBackend::new("http://localhost:1", None);
        let request = ChatRequest::new(
            vec![ChatMessage::system("sys"), ChatMessage::user("hi")],
            "test-model",
        )
        .with_response_format(json!({"type": "object", "properties": {"a": {"type": "string"}}}))
        .with_logprobs();
        let body = backend.request_body(&request);
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["response_format"]["type"], "json_schema");
        assert_eq!(body["response_format"]["json_schema"]["strict"], true);
        assert_eq!(body["logprobs"], true);
    }

    #[tokio::test]
    async fn unreachable_endpoint_is_transport_failure() {
        let backend = HttpBackend::new("http://127.0.0.1:1", None);
        let request = ChatRequest::new(vec![ChatMessage::user("hi")], "m");
        let outcome = backend.complete(&request).await;
        assert_eq!(outcome.status, OutcomeStatus::TransportFailed);
        assert!(outcome.diagnostic.unwrap().contains("request failed"));
    }

    #[test]
    fn schema_violations_reported() {
        let schema = json!({"type": "object", "properties": {"a": {"type": "string"}}});
        let err = parse_structured(r#"{"a": 3}"#, &schema).unwrap_err();
        assert!(err.contains("schema violation"));
        let ok = parse_structured(r#"{"a": "ok"}"#, &schema).unwrap();
        assert_eq!(ok.get("a"), Some(&json!("ok")));
    }
}
