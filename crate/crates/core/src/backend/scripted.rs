//! Deterministic replay backend.
//!
//! A script is a list of `{match, reply}` entries, stored as JSONL. `match` is
//! either one substring or a list of substrings that must all occur in the
//! final user message. In [`ScriptMode::FirstMatch`] the first matching entry
//! answers and entries are reusable; in [`ScriptMode::Ordered`] entries are
//! consumed strictly in order.
//!
//! Every request is recorded, so tests can inspect the exact transcript.

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, FinishReason};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    One(String),
    All(Vec<String>),
}

impl Matcher {
    pub fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::One(s) => text.contains(s.as_str()),
            Matcher::All(parts) => parts.iter().all(|p| text.contains(p.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub reply: String,
}

impl ScriptEntry {
    pub fn new(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::One(pattern.into()),
            reply: reply.into(),
        }
    }

    pub fn all(patterns: &[&str], reply: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::All(patterns.iter().map(|p| p.to_string()).collect()),
            reply: reply.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptMode {
    #[default]
    FirstMatch,
    Ordered,
}

#[derive(Debug, Default)]
struct State {
    cursor: usize,
    transcript: Vec<ChatRequest>,
}

#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    mode: ScriptMode,
    state: Mutex<State>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>, mode: ScriptMode) -> Self {
        Self {
            entries,
            mode,
            state: Mutex::new(State::default()),
        }
    }

    pub fn from_jsonl(path: &Path, mode: ScriptMode) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| BackendError::Script(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(entries, mode))
    }

    /// Every request received so far, in order.
    pub fn transcript(&self) -> Vec<ChatRequest> {
        self.state.lock().unwrap().transcript.clone()
    }

    pub fn calls(&self) -> usize {
        self.state.lock().unwrap().transcript.len()
    }

    fn exhausted(text: &str) -> BackendError {
        let preview: String = text.chars().take(120).collect();
        BackendError::ScriptExhausted(preview)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let text = request.last_user_message();
        let mut state = self.state.lock().unwrap();
        state.transcript.push(request.clone());
        let reply = match self.mode {
            ScriptMode::FirstMatch => self
                .entries
                .iter()
                .find(|e| e.matcher.matches(text))
                .map(|e| e.reply.clone()),
            ScriptMode::Ordered => match self.entries.get(state.cursor) {
                Some(e) if e.matcher.matches(text) => {
                    state.cursor += 1;
                    Some(e.reply.clone())
                }
                _ => None,
            },
        };
        let content = reply.ok_or_else(|| Self::exhausted(text))?;
        Ok(ChatResponse {
            content,
            finish_reason: FinishReason::Stop,
            usage: None,
        })
    }
}
