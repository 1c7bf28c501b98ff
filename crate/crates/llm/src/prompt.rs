use prescribe_core::TextUnit;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::template::{PromptKind, TemplateError, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
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
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

/// Body sent to a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatPayload {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    pub temperature: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { model: "gpt-4o-mini".into(), temperature: 0.0 }
    }
}

/// A payload plus what it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub unit_id: String,
    pub kind: PromptKind,
    pub template_hash: String,
    pub payload: ChatPayload,
}

impl ChatRequest {
    /// Stable digest of model, temperature, template and messages.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            model: &'a str,
            temperature: f64,
            template: &'a str,
            messages: &'a [ChatMessage],
        }
        let key = Key {
            model: &self.payload.model,
            temperature: self.payload.temperature,
            template: &self.template_hash,
            messages: &self.payload.messages,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&key).expect("key serializes")))
    }

    /// Follow-up request asking for the answer format again.
    pub fn with_format_reminder(&self, bad_reply: &str, reminder: &str) -> ChatRequest {
        let mut next = self.clone();
        next.payload.messages.push(ChatMessage::new(Role::Assistant, bad_reply));
        next.payload.messages.push(ChatMessage::new(Role::User, reminder));
        next
    }

    /// The target text message, i.e. the last user message.
    pub fn target(&self) -> &str {
        self.payload.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }
}

/// Builds the request for one unit and prompt kind.
///
/// Messages are the system text, then each few-shot as a user/assistant
/// pair, then the unit's text. `items` fills the scoring template's
/// `{items}` slot.
pub fn build_prompt(
    unit: &TextUnit,
    kind: PromptKind,
    templates: &TemplateSet,
    model: &ModelConfig,
    items: Option<&str>,
) -> Result<ChatRequest, TemplateError> {
    let template = templates.get(kind)?;
    let mut messages = vec![ChatMessage::new(Role::System, template.system.clone())];
    for shot in &template.few_shots {
        messages.push(ChatMessage::new(Role::User, template.render_user(&shot.text, shot.items.as_deref())));
        messages.push(ChatMessage::new(Role::Assistant, shot.answer.clone()));
    }
    messages.push(ChatMessage::new(Role::User, template.render_user(unit.raw(), items)));
    Ok(ChatRequest {
        unit_id: unit.id().to_owned(),
        kind,
        template_hash: template.hash(),
        payload: ChatPayload { model: model.model.clone(), temperature: model.temperature, messages },
    })
}
