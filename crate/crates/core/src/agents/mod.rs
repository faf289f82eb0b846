//! Planner, Code Writer and Mentor as text-in/text-out calls over a
//! [`ChatBackend`].
//!
//! Prompts come from [`Templates`]; the built-in set lives in `prompts/` and
//! can be overridden file by file. Every parse failure gets exactly one
//! re-ask (the original exchange plus a short correction message) before it
//! becomes an error.

mod parse;
mod templates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatMessage, ChatRequest};
use crate::executor::ErrorType;
use crate::knowledge::{FixRecord, DEFAULT_MENTOR_THRESHOLD, DEFAULT_RETRIEVAL_K};

pub use parse::{extract_code, parse_mentor, split_plans};
pub use templates::Templates;

pub const PLAN_COUNT: usize = 3;
/// Fixes shown to the Mentor; older ones beyond this are left out.
pub const MENTOR_CONTEXT_FIXES: usize = 20;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{role} reply could not be parsed: {detail}")]
    ParseFailure { role: &'static str, detail: String },
    #[error("reply contained no code block")]
    NoCodeBlock,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("bad prompt template: {0}")]
    Template(String),
}

impl AgentError {
    /// True for failures of the model's output rather than of the plumbing.
    pub fn is_reply_failure(&self) -> bool {
        matches!(self, AgentError::ParseFailure { .. } | AgentError::NoCodeBlock)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub index: u8,
    pub steps: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairContext {
    pub description: String,
    pub initial_code: String,
    pub guiding_assertion: String,
    pub error_type: ErrorType,
    pub error_message: String,
    pub fixing_suggestion: String,
    pub retrieved_examples: Vec<FixRecord>,
}

impl RepairContext {
    pub fn validate(&self) -> Result<(), AgentError> {
        let blank = [
            ("description", &self.description),
            ("initial_code", &self.initial_code),
            ("guiding_assertion", &self.guiding_assertion),
        ]
        .into_iter()
        .find(|(_, v)| v.trim().is_empty());
        if let Some((name, _)) = blank {
            return Err(AgentError::Precondition(format!("repair context has empty {name}")));
        }
        if self.error_type.is_pass() {
            return Err(AgentError::Precondition("cannot repair passing code".into()));
        }
        if self.retrieved_examples.len() > DEFAULT_RETRIEVAL_K {
            return Err(AgentError::Precondition(format!(
                "{} retrieved examples, at most {DEFAULT_RETRIEVAL_K} allowed",
                self.retrieved_examples.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentorUpdate {
    pub error_type: ErrorType,
    pub causes_summary: String,
    pub suggestions: Vec<String>,
}

/// Request parameters shared by all roles.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model: "default".into(),
            temperature: crate::backend::DEFAULT_TEMPERATURE,
            max_tokens: None,
        }
    }
}

pub struct Agents<B> {
    backend: B,
    settings: ModelSettings,
    templates: Templates,
    mentor_min_fixes: usize,
}

impl<B: ChatBackend> Agents<B> {
    pub fn new(backend: B, settings: ModelSettings, templates: Templates) -> Self {
        Self {
            backend,
            settings,
            templates,
            mentor_min_fixes: DEFAULT_MENTOR_THRESHOLD as usize,
        }
    }

    pub fn with_mentor_min_fixes(mut self, n: usize) -> Self {
        self.mentor_min_fixes = n.max(1);
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// Three distinct plans for a problem.
    pub fn plan(&self, description: &str, guiding_assertion: &str) -> Result<Vec<Plan>, AgentError> {
        if description.trim().is_empty() || guiding_assertion.trim().is_empty() {
            return Err(AgentError::Precondition(
                "plan needs a description and an assertion".into(),
            ));
        }
        let prompt = self.templates.render(
            "plan",
            &[("description", description), ("guiding_assertion", guiding_assertion)],
        );
        let parse = |reply: &str| {
            let sections = split_plans(reply);
            (sections.len() >= PLAN_COUNT).then(|| {
                sections
                    .into_iter()
                    .take(PLAN_COUNT)
                    .enumerate()
                    .map(|(i, steps)| Plan {
                        index: i as u8 + 1,
                        steps,
                    })
                    .collect()
            })
        };
        self.ask(&prompt, "reask_plan", parse)?
            .ok_or_else(|| AgentError::ParseFailure {
                role: "planner",
                detail: format!("fewer than {PLAN_COUNT} plans"),
            })
    }

    /// Initial code following plan `chosen` (1-based), or no plan at all.
    pub fn write_initial(
        &self,
        description: &str,
        plans: &[Plan],
        guiding_assertion: &str,
        chosen: Option<u8>,
    ) -> Result<String, AgentError> {
        let plan = match chosen {
            Some(i) => {
                let plan = plans.iter().find(|p| p.index == i).filter(|_| (1..=3).contains(&i));
                let plan =
                    plan.ok_or_else(|| AgentError::Precondition(format!("plan {i} not among {} plans", plans.len())))?;
                self.templates.render("plan_section", &[("steps", &plan.steps)])
            }
            None => String::new(),
        };
        let prompt = self.templates.render(
            "generate",
            &[
                ("description", description),
                ("guiding_assertion", guiding_assertion),
                ("plan", &plan),
            ],
        );
        self.ask(&prompt, "reask_code", extract_code)?
            .ok_or(AgentError::NoCodeBlock)
    }

    /// The repair prompt for `context`, exactly as sent.
    pub fn repair_prompt(&self, context: &RepairContext) -> String {
        let examples = if context.retrieved_examples.is_empty() {
            String::new()
        } else {
            let items = self.render_fixes("example_item", &context.retrieved_examples);
            self.templates.render("examples", &[("items", &items)])
        };
        self.templates.render(
            "repair",
            &[
                ("description", &context.description),
                ("initial_code", &context.initial_code),
                ("guiding_assertion", &context.guiding_assertion),
                ("error_type", context.error_type.label()),
                ("error_message", &context.error_message),
                ("fixing_suggestion", &context.fixing_suggestion),
                ("examples", &examples),
            ],
        )
    }

    pub fn repair(&self, context: &RepairContext) -> Result<String, AgentError> {
        context.validate()?;
        let prompt = self.repair_prompt(context);
        self.ask(&prompt, "reask_code", extract_code)?
            .ok_or(AgentError::NoCodeBlock)
    }

    /// Rewrite the suggestions for `error_type` from recent fixes (oldest first).
    pub fn summarize(
        &self,
        error_type: ErrorType,
        current_suggestions: &[String],
        new_fixes: &[FixRecord],
    ) -> Result<MentorUpdate, AgentError> {
        if error_type.is_pass() {
            return Err(AgentError::Precondition("pass has no suggestions".into()));
        }
        if new_fixes.len() < self.mentor_min_fixes {
            return Err(AgentError::Precondition(format!(
                "mentor needs at least {} fixes, got {}",
                self.mentor_min_fixes,
                new_fixes.len()
            )));
        }
        if let Some(r) = new_fixes.iter().find(|r| r.error_type != error_type) {
            return Err(AgentError::Precondition(format!(
                "fix {} is {}, not {}",
                r.record_id, r.error_type, error_type
            )));
        }
        let shown = &new_fixes[new_fixes.len().saturating_sub(MENTOR_CONTEXT_FIXES)..];
        let suggestions = if current_suggestions.is_empty() {
            "(none yet)".to_string()
        } else {
            current_suggestions
                .iter()
                .map(|s| format!("- {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let count = shown.len().to_string();
        let fixes = self.render_fixes("mentor_fix", shown);
        let prompt = self.templates.render(
            "mentor",
            &[
                ("error_type", error_type.label()),
                ("count", &count),
                ("suggestions", &suggestions),
                ("fixes", &fixes),
            ],
        );
        let (causes_summary, suggestions) =
            self.ask(&prompt, "reask_mentor", parse_mentor)?
                .ok_or_else(|| AgentError::ParseFailure {
                    role: "mentor",
                    detail: "missing CAUSES or SUGGESTIONS section".into(),
                })?;
        Ok(MentorUpdate {
            error_type,
            causes_summary,
            suggestions,
        })
    }

    fn render_fixes(&self, template: &str, fixes: &[FixRecord]) -> String {
        let mut out = String::new();
        for (i, r) in fixes.iter().enumerate() {
            let n = (i + 1).to_string();
            let item = self.templates.render(
                template,
                &[
                    ("n", &n),
                    ("error_message", &r.error_message),
                    ("initial_code", &r.initial_code),
                    ("fixed_code", &r.fixed_code),
                ],
            );
            out.push_str(item.trim_end());
            out.push('\n');
            if i + 1 < fixes.len() {
                out.push('\n');
            }
        }
        out
    }

    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        let mut request = ChatRequest::new(self.settings.model.clone(), messages);
        request.temperature = self.settings.temperature;
        request.max_tokens = self.settings.max_tokens;
        request
    }

    /// Send `prompt`; on a parse miss, re-ask once within the same exchange.
    fn ask<T>(&self, prompt: &str, reask: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>, AgentError> {
        let mut messages = vec![
            ChatMessage::system(self.templates.get("system").trim_end()),
            ChatMessage::user(prompt),
        ];
        let first = self.backend.complete(&self.request(messages.clone()))?;
        if let Some(parsed) = parse(&first.content) {
            return Ok(Some(parsed));
        }
        tracing::debug!(reask, "unparseable reply, asking again");
        messages.push(ChatMessage::assistant(first.content));
        messages.push(ChatMessage::user(self.templates.get(reask).trim_end()));
        let second = self.backend.complete(&self.request(messages))?;
        Ok(parse(&second.content))
    }
}
