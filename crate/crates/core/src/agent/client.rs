//! Model request/response contract and transports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed model response: {0}")]
    Decode(String),
    #[error("mock has no response for this request")]
    NoMatch,
    #[error("failed to read mock file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mock file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError>;
}

/// POSTs the request as JSON and expects a [`ModelResponse`] body.
#[cfg(feature = "http")]
pub struct HttpModelClient {
    endpoint: String,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpModelClient {
    pub fn new(endpoint: impl Into<String>, timeout: std::time::Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpModelClient { endpoint: endpoint.into(), agent }
    }
}

#[cfg(feature = "http")]
impl ModelClient for HttpModelClient {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let body = serde_json::to_string(request).expect("request serializes");
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()))
    }
}

/// One canned reply. A rule without `contains` matches every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub text: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// Replays canned responses: the first rule whose `contains` occurs in the
/// request's last message wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileMockClient {
    pub responses: Vec<MockRule>,
}

impl FileMockClient {
    pub fn new(responses: Vec<MockRule>) -> Self {
        FileMockClient { responses }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl ModelClient for FileMockClient {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let last = request.messages.last().map_or("", |m| m.content.as_str());
        self.responses
            .iter()
            .find(|r| r.contains.as_deref().is_none_or(|c| last.contains(c)))
            .map(|r| ModelResponse {
                text: r.text.clone(),
                prompt_tokens: r.prompt_tokens,
                completion_tokens: r.completion_tokens,
            })
            .ok_or(ClientError::NoMatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ModelRequest {
        ModelRequest { model: "m".into(), messages: vec![Message::user(text)], temperature: 0.0, max_tokens: 16 }
    }

    #[test]
    fn mock_matches_first_rule() {
        let mock = FileMockClient::new(vec![
            MockRule { contains: Some("key".into()), text: "A".into(), prompt_tokens: 3, completion_tokens: 1 },
            MockRule { contains: None, text: "B".into(), prompt_tokens: 0, completion_tokens: 0 },
        ]);
        assert_eq!(mock.complete(&req("the key")).unwrap().text, "A");
        assert_eq!(mock.complete(&req("other")).unwrap().text, "B");
    }

    #[test]
    fn mock_without_match_errors() {
        let mock = FileMockClient::new(vec![MockRule {
            contains: Some("x".into()),
            text: "A".into(),
            prompt_tokens: 0,
            completion_tokens: 0,
        }]);
        assert!(matches!(mock.complete(&req("y")), Err(ClientError::NoMatch)));
    }

    #[test]
    fn wire_format() {
        let json = serde_json::to_value(req("hi")).unwrap();
        assert_eq!(json["messages"][0]["role"], "user");
        assert_eq!(json["max_tokens"], 16);
        let r: ModelResponse =
            serde_json::from_str(r#"{"text":"click[Buy Now]","prompt_tokens":5,"completion_tokens":2}"#).unwrap();
        assert_eq!(r.completion_tokens, 2);
    }
}
