use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            messages,
            temperature: 0.0,
            max_tokens: 1024,
            model_id: model_id.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => return Err(LlmError::InvalidRequest("request has no messages".into())),
            Some(m) if m.role == Role::Assistant => {
                return Err(LlmError::InvalidRequest(
                    "first message must be a system or user message".into(),
                ))
            }
            Some(_) => {}
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} is not a finite non-negative number",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Deterministic sampling regime: responses may be cached and replayed.
    pub fn is_deterministic(&self) -> bool {
        self.temperature == 0.0
    }

    /// Digest over every field; the response cache key.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Digest over the messages only; the key used by mock scripts.
    pub fn prompt_digest(&self) -> String {
        let canonical = serde_json::to_vec(&self.messages).expect("messages serialize");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Concatenated text of all user messages.
    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub total_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    #[serde(default)]
    pub usage: Usage,
    #[serde(default)]
    pub from_cache: bool,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ChatResponse {
            content: content.into(),
            finish_reason: "stop".into(),
            usage: Usage::default(),
            from_cache: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::system("s"), ChatMessage::user("u")])
    }

    #[test]
    fn every_field_changes_the_cache_key() {
        let base = req().cache_key();
        assert_eq!(base, req().cache_key());
        assert_ne!(base, req().with_temperature(0.5).cache_key());
        assert_ne!(base, req().with_max_tokens(7).cache_key());
        let mut other_model = req();
        other_model.model_id = "n".into();
        assert_ne!(base, other_model.cache_key());
        let mut other_msg = req();
        other_msg.messages[1].content.push('!');
        assert_ne!(base, other_msg.cache_key());
    }

    #[test]
    fn prompt_digest_ignores_sampling_parameters() {
        assert_eq!(req().prompt_digest(), req().with_temperature(1.0).prompt_digest());
    }

    #[test]
    fn validation() {
        assert!(req().validate().is_ok());
        assert!(ChatRequest::new("m", vec![]).validate().is_err());
        assert!(ChatRequest::new("m", vec![ChatMessage::assistant("a")])
            .validate()
            .is_err());
        assert!(req().with_temperature(-1.0).validate().is_err());
        assert!(req().with_max_tokens(0).validate().is_err());
    }
}
