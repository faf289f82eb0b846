//! Worker wire protocol: one JSON request on stdin, one JSON report on stdout.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerLimits {
    pub max_output_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerRequest {
    pub code: String,
    pub assertion: String,
    pub limits: WorkerLimits,
}

impl WorkerRequest {
    pub fn new(code: &str, assertion: &str, max_output_bytes: usize) -> Self {
        Self {
            code: code.to_string(),
            assertion: assertion.to_string(),
            limits: WorkerLimits { max_output_bytes },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Compile,
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionKind {
    Assertion,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerReport {
    pub stage: Stage,
    pub ok: bool,
    #[serde(default)]
    pub exception_kind: Option<ExceptionKind>,
    #[serde(default)]
    pub error_message: String,
    #[serde(default)]
    pub traceback: String,
    #[serde(default)]
    pub duration_ms: u64,
}

impl WorkerReport {
    pub fn pass(duration_ms: u64) -> Self {
        Self {
            stage: Stage::Run,
            ok: true,
            exception_kind: None,
            error_message: String::new(),
            traceback: String::new(),
            duration_ms,
        }
    }
}
