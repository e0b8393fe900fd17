//! Chat-completion request shape and its content digest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::PromptTemplate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_TOP_P: f64 = 1.0;

/// Body of a chat-completion call. Field order is fixed so the serialized
/// form, and therefore the digest, is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub messages: Vec<Message>,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        CompletionRequest {
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            messages,
        }
    }

    pub fn from_prompt(model: impl Into<String>, prompt: &PromptTemplate) -> Self {
        Self::new(model, prompt.to_messages())
    }

    pub fn sampling(mut self, temperature: f64, top_p: f64) -> Self {
        self.temperature = temperature;
        self.top_p = top_p;
        self
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    /// Lowercase hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req() -> CompletionRequest {
        CompletionRequest::new("model-a", vec![Message::system("r"), Message::user("q")])
    }

    #[test]
    fn canonical_form_is_fixed() {
        assert_eq!(
            req().canonical_json(),
            r#"{"model":"model-a","temperature":0.0,"top_p":1.0,"messages":[{"role":"system","content":"r"},{"role":"user","content":"q"}]}"#
        );
        assert_eq!(req().digest(), hex::encode(Sha256::digest(req().canonical_json())));
    }

    #[test]
    fn digest_covers_model_and_sampling() {
        let base = req().digest();
        assert_eq!(base.len(), 64);
        let mut other = req();
        other.model = "model-b".into();
        assert_ne!(base, other.digest());
        assert_ne!(base, req().sampling(0.5, 1.0).digest());
        assert_ne!(base, req().sampling(0.0, 0.9).digest());
    }

    proptest! {
        #[test]
        fn digest_is_injective_on_content(a in ".{0,40}", b in ".{0,40}") {
            let ra = CompletionRequest::new("m", vec![Message::user(a.clone())]);
            let rb = CompletionRequest::new("m", vec![Message::user(b.clone())]);
            prop_assert_eq!(a == b, ra.digest() == rb.digest());
        }
    }
}
