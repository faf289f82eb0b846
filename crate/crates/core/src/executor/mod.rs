//! Sandboxed execution of candidate programs against assertions.
//!
//! Execution is split in two halves. A worker (the real interpreter shim or
//! the scripted [`StubSandbox`]) runs one program plus one assertion and
//! returns a [`WorkerReport`]. The orchestrator side in this module owns the
//! deadline, turns the report into exactly one [`ErrorType`], and never lets
//! an infrastructure failure masquerade as a code error.

mod process;
mod protocol;
mod stub;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use process::ProcessSandbox;
pub use protocol::{ExceptionKind, Stage, WorkerLimits, WorkerReport, WorkerRequest};
pub use stub::{StubEntry, StubOutcome, StubSandbox};

/// Default wall-clock limit for one execution.
pub const DEFAULT_TIMEOUT_MS: u64 = 5_000;
/// Default cap on captured worker output.
pub const DEFAULT_MAX_OUTPUT_BYTES: usize = 64 * 1024;
/// Extra time granted to a killed worker before the orchestrator gives up on it.
pub const KILL_GRACE_MS: u64 = 500;

/// The five execution states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    NotCompiled,
    TestError,
    TestFailed,
    Timeout,
    Pass,
}

impl ErrorType {
    /// All states in matrix order.
    pub const ALL: [ErrorType; 5] = [
        ErrorType::NotCompiled,
        ErrorType::TestError,
        ErrorType::TestFailed,
        ErrorType::Timeout,
        ErrorType::Pass,
    ];

    /// The four failure states.
    pub const FAILURES: [ErrorType; 4] = [
        ErrorType::NotCompiled,
        ErrorType::TestError,
        ErrorType::TestFailed,
        ErrorType::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::NotCompiled => "not_compiled",
            ErrorType::TestError => "test_error",
            ErrorType::TestFailed => "test_failed",
            ErrorType::Timeout => "timeout",
            ErrorType::Pass => "pass",
        }
    }

    /// Human-readable label used in prompts and reports.
    pub fn label(self) -> &'static str {
        match self {
            ErrorType::NotCompiled => "Not Compiled",
            ErrorType::TestError => "Test Error",
            ErrorType::TestFailed => "Test Failed",
            ErrorType::Timeout => "Timeout",
            ErrorType::Pass => "Pass",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_pass(self) -> bool {
        self == ErrorType::Pass
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown error type `{s}`"))
    }
}

/// Outcome of one sandbox run, after classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ErrorType,
    /// Short message: exception type plus first message line. Empty iff pass.
    pub error_message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceback: Option<String>,
    pub duration_ms: u64,
}

impl ExecutionResult {
    pub fn is_pass(&self) -> bool {
        self.status.is_pass()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    pub timeout_ms: u64,
    pub worker_command: Vec<String>,
    pub max_output_bytes: usize,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            timeout_ms: DEFAULT_TIMEOUT_MS,
            worker_command: vec![
                "python3".to_string(),
                "-I".to_string(),
                "-m".to_string(),
                "memoloop_shim".to_string(),
            ],
            max_output_bytes: DEFAULT_MAX_OUTPUT_BYTES,
        }
    }
}

impl SandboxConfig {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.timeout_ms == 0 {
            return Err(SandboxError::InvalidConfig("timeout_ms must be positive".into()));
        }
        if self.max_output_bytes == 0 {
            return Err(SandboxError::InvalidConfig("max_output_bytes must be positive".into()));
        }
        Ok(())
    }
}

/// What the orchestrator observed from one worker invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkerOutcome {
    /// The worker finished and printed a report.
    Completed(WorkerReport),
    /// The orchestrator killed the worker at the deadline.
    KilledAtDeadline { elapsed_ms: u64 },
}

/// Infrastructure failures. These are never recorded as code errors.
#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("failed to spawn sandbox worker `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sandbox worker exited with status {status}: {stderr}")]
    WorkerFailed { status: String, stderr: String },
    #[error("sandbox worker I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("sandbox protocol violation: {0}")]
    Protocol(String),
    #[error("no scripted report for code {code_sha256} and assertion `{assertion}`")]
    NoScriptedReport { code_sha256: String, assertion: String },
    #[error("invalid sandbox config: {0}")]
    InvalidConfig(String),
}

/// A transport that runs one worker request.
pub trait Sandbox: Send + Sync {
    fn run_worker(&self, request: &WorkerRequest, config: &SandboxConfig) -> Result<WorkerOutcome, SandboxError>;
}

impl<S: Sandbox + ?Sized> Sandbox for &S {
    fn run_worker(&self, request: &WorkerRequest, config: &SandboxConfig) -> Result<WorkerOutcome, SandboxError> {
        (**self).run_worker(request, config)
    }
}

impl<S: Sandbox + ?Sized> Sandbox for Box<S> {
    fn run_worker(&self, request: &WorkerRequest, config: &SandboxConfig) -> Result<WorkerOutcome, SandboxError> {
        (**self).run_worker(request, config)
    }
}

/// Map a worker outcome onto the taxonomy.
///
/// Compile-stage failure is `not_compiled`, an assertion signal is
/// `test_failed`, any other exception is `test_error`, a kill at the deadline
/// is `timeout` and a clean run is `pass`. Reports that break the protocol
/// invariants are rejected rather than guessed.
pub fn classify(outcome: &WorkerOutcome) -> Result<ErrorType, SandboxError> {
    let report = match outcome {
        WorkerOutcome::KilledAtDeadline { .. } => return Ok(ErrorType::Timeout),
        WorkerOutcome::Completed(report) => report,
    };
    match (report.stage, report.ok, report.exception_kind) {
        (_, true, Some(kind)) => Err(SandboxError::Protocol(format!(
            "ok report carries exception_kind {kind:?}"
        ))),
        (_, true, None) if !report.error_message.is_empty() => {
            Err(SandboxError::Protocol("ok report carries an error message".into()))
        }
        (Stage::Compile, true, None) => Err(SandboxError::Protocol(
            "worker stopped after a successful compile stage".into(),
        )),
        (Stage::Run, true, None) => Ok(ErrorType::Pass),
        (Stage::Compile, false, None) => Ok(ErrorType::NotCompiled),
        (Stage::Compile, false, Some(_)) => {
            Err(SandboxError::Protocol("compile failure carries exception_kind".into()))
        }
        (Stage::Run, false, Some(ExceptionKind::Assertion)) => Ok(ErrorType::TestFailed),
        (Stage::Run, false, Some(ExceptionKind::Other)) => Ok(ErrorType::TestError),
        (Stage::Run, false, None) => Err(SandboxError::Protocol("run failure without exception_kind".into())),
    }
}

/// Parse and classify a raw JSON report line.
pub fn classify_json(raw: &str) -> Result<ErrorType, SandboxError> {
    let report: WorkerReport =
        serde_json::from_str(raw.trim()).map_err(|e| SandboxError::Protocol(format!("malformed report: {e}")))?;
    classify(&WorkerOutcome::Completed(report))
}

/// First non-empty line, trimmed.
fn first_line(text: &str) -> &str {
    text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("")
}

/// Run `code` against one assertion.
pub fn execute<S: Sandbox + ?Sized>(
    sandbox: &S,
    code: &str,
    assertion: &str,
    config: &SandboxConfig,
) -> Result<ExecutionResult, SandboxError> {
    config.validate()?;
    let request = WorkerRequest::new(code, assertion, config.max_output_bytes);
    let outcome = sandbox.run_worker(&request, config)?;
    let status = classify(&outcome)?;
    let result = match outcome {
        WorkerOutcome::KilledAtDeadline { elapsed_ms } => ExecutionResult {
            status,
            error_message: format!("TimeoutError: execution exceeded {} ms", config.timeout_ms),
            traceback: None,
            duration_ms: elapsed_ms.max(config.timeout_ms),
        },
        WorkerOutcome::Completed(report) if status.is_pass() => ExecutionResult {
            status,
            error_message: String::new(),
            traceback: None,
            duration_ms: report.duration_ms,
        },
        WorkerOutcome::Completed(report) => {
            let mut message = first_line(&report.error_message).to_string();
            if message.is_empty() {
                message = match status {
                    ErrorType::NotCompiled => "SyntaxError".to_string(),
                    ErrorType::TestFailed => "AssertionError".to_string(),
                    _ => "Exception".to_string(),
                };
            }
            ExecutionResult {
                status,
                error_message: message,
                traceback: (!report.traceback.is_empty()).then_some(report.traceback),
                duration_ms: report.duration_ms,
            }
        }
    };
    Ok(result)
}

/// Run `code` against every assertion without short-circuiting.
///
/// Returns `(fixed, per_assertion)` where `fixed` holds iff every assertion
/// passed.
pub fn execute_all<S: Sandbox + ?Sized>(
    sandbox: &S,
    code: &str,
    assertions: &[String],
    config: &SandboxConfig,
) -> Result<(bool, Vec<ExecutionResult>), SandboxError> {
    if assertions.is_empty() {
        return Err(SandboxError::InvalidConfig(
            "execute_all needs at least one assertion".into(),
        ));
    }
    let results = assertions
        .iter()
        .map(|a| execute(sandbox, code, a, config))
        .collect::<Result<Vec<_>, _>>()?;
    let fixed = results.iter().all(ExecutionResult::is_pass);
    Ok((fixed, results))
}
