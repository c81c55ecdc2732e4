//! Supervised fine-tuning data: quality metrics, near-exact deduplication
//! and noise flags.

mod dedup;
mod noise;
mod quality;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dedup::{dedup_near, normalized_key, word_ngrams, DedupMode, DedupOutcome};
pub use noise::{
    bracket_imbalance, fence_count, flag_noise, has_unbalanced_markup, is_blank, NoiseConfig,
    RULE_EMPTY_RESPONSE, RULE_LENGTH_OUTLIER, RULE_ROLE_VIOLATION, RULE_UNBALANCED_MARKUP,
};
pub use quality::{
    quality_metrics, QualityAccumulator, QualityReport, FLAG_UNDEFINED_PROMPT_DIVERSITY,
    FLAG_UNDEFINED_RESPONSE_DIVERSITY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Turn {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Turn {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSample {
    pub id: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub source: String,
    pub conversation: Vec<Turn>,
}

impl SftSample {
    pub fn new(id: impl Into<String>, conversation: Vec<Turn>) -> Self {
        SftSample {
            id: id.into(),
            language: String::new(),
            source: String::new(),
            conversation,
        }
    }

    /// Checks that roles alternate starting with the user and that there is
    /// at least one assistant turn. A trailing user turn is allowed here; the
    /// noise flagger reports it.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidConversation {
            id: self.id.clone(),
            reason,
        };
        for (i, turn) in self.conversation.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if turn.role != expected {
                return Err(invalid(format!(
                    "turn {} is {}, expected {}",
                    i + 1,
                    turn.role.as_str(),
                    expected.as_str()
                )));
            }
        }
        if self.assistant_turns() == 0 {
            return Err(invalid("no assistant turn".into()));
        }
        Ok(())
    }

    pub fn assistant_turns(&self) -> usize {
        self.conversation
            .iter()
            .filter(|t| t.role == Role::Assistant)
            .count()
    }

    /// All user turns joined by newlines.
    pub fn prompt_text(&self) -> String {
        self.role_text(Role::User)
    }

    /// All assistant turns joined by newlines.
    pub fn response_text(&self) -> String {
        self.role_text(Role::Assistant)
    }

    fn role_text(&self, role: Role) -> String {
        let parts: Vec<&str> = self
            .conversation
            .iter()
            .filter(|t| t.role == role)
            .map(|t| t.text.as_str())
            .collect();
        parts.join("\n")
    }
}
