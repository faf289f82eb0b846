//! Scripted sandbox that replays canned worker reports keyed by code hash.
//!
//! Lets the whole pipeline run without an interpreter installed. Entries are
//! looked up by `(sha256(code), assertion)` first, then by `sha256(code)` alone.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Sandbox, SandboxConfig, SandboxError, WorkerOutcome, WorkerReport, WorkerRequest};

/// Lowercase hex SHA-256 of the candidate code.
pub fn code_sha256(code: &str) -> String {
    use std::fmt::Write;
    Sha256::digest(code.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubOutcome {
    Report(WorkerReport),
    /// Behave as if the worker hung until the deadline.
    Timeout,
}

/// One line of a stub script. Either `code` or `code_sha256` identifies the
/// program; `assertion` narrows the entry to a single assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assertion: Option<String>,
    pub outcome: StubOutcome,
}

impl StubEntry {
    pub fn for_code(code: &str, outcome: StubOutcome) -> Self {
        Self {
            code: Some(code.to_string()),
            code_sha256: None,
            assertion: None,
            outcome,
        }
    }

    pub fn with_assertion(mut self, assertion: &str) -> Self {
        self.assertion = Some(assertion.to_string());
        self
    }

    fn key_hash(&self) -> Result<String, SandboxError> {
        match (&self.code_sha256, &self.code) {
            (Some(hash), _) => Ok(hash.to_ascii_lowercase()),
            (None, Some(code)) => Ok(code_sha256(code)),
            (None, None) => Err(SandboxError::Protocol(
                "stub entry needs `code` or `code_sha256`".into(),
            )),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct StubSandbox {
    entries: HashMap<(String, Option<String>), StubOutcome>,
}

impl StubSandbox {
    pub fn new(entries: impl IntoIterator<Item = StubEntry>) -> Result<Self, SandboxError> {
        let mut map = HashMap::new();
        for entry in entries {
            map.insert((entry.key_hash()?, entry.assertion.clone()), entry.outcome);
        }
        Ok(Self { entries: map })
    }

    /// Load a JSONL stub script. Blank lines are ignored.
    pub fn from_jsonl(path: &Path) -> Result<Self, SandboxError> {
        let text = fs::read_to_string(path)?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<StubEntry>(l)
                    .map_err(|e| SandboxError::Protocol(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Sandbox for StubSandbox {
    fn run_worker(&self, request: &WorkerRequest, config: &SandboxConfig) -> Result<WorkerOutcome, SandboxError> {
        let hash = code_sha256(&request.code);
        let outcome = self
            .entries
            .get(&(hash.clone(), Some(request.assertion.clone())))
            .or_else(|| self.entries.get(&(hash.clone(), None)))
            .ok_or_else(|| SandboxError::NoScriptedReport {
                code_sha256: hash,
                assertion: request.assertion.clone(),
            })?;
        Ok(match outcome {
            StubOutcome::Report(report) => WorkerOutcome::Completed(report.clone()),
            StubOutcome::Timeout => WorkerOutcome::KilledAtDeadline {
                elapsed_ms: config.timeout_ms,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{execute, execute_all, ErrorType, ExceptionKind, Stage};

    fn failing(kind: ExceptionKind, msg: &str) -> StubOutcome {
        StubOutcome::Report(WorkerReport {
            stage: Stage::Run,
            ok: false,
            exception_kind: Some(kind),
            error_message: msg.into(),
            traceback: String::new(),
            duration_ms: 1,
        })
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            code_sha256(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn assertion_specific_entry_wins() {
        let code = "def f(x): return x";
        let stub = StubSandbox::new([
            StubEntry::for_code(code, StubOutcome::Report(WorkerReport::pass(1))),
            StubEntry::for_code(code, failing(ExceptionKind::Assertion, "AssertionError"))
                .with_assertion("assert f(2) == 3"),
        ])
        .unwrap();
        let config = SandboxConfig::default();
        let asserts = vec!["assert f(1) == 1".to_string(), "assert f(2) == 3".to_string()];
        let (fixed, results) = execute_all(&stub, code, &asserts, &config).unwrap();
        assert!(!fixed);
        assert_eq!(results[0].status, ErrorType::Pass);
        assert_eq!(results[1].status, ErrorType::TestFailed);
    }

    #[test]
    fn scripted_timeout_reports_configured_limit() {
        let stub = StubSandbox::new([StubEntry::for_code("loop", StubOutcome::Timeout)]).unwrap();
        let result = execute(&stub, "loop", "assert f()", &SandboxConfig::default()).unwrap();
        assert_eq!(result.status, ErrorType::Timeout);
        assert_eq!(result.duration_ms, 5000);
    }

    #[test]
    fn unknown_code_is_infrastructure_error() {
        let stub = StubSandbox::default();
        let err = execute(&stub, "x", "assert f()", &SandboxConfig::default()).unwrap_err();
        assert!(matches!(err, SandboxError::NoScriptedReport { .. }));
    }

    #[test]
    fn not_compiled_repeats_for_every_assertion() {
        let code = "def f(: pass";
        let stub = StubSandbox::new([StubEntry::for_code(
            code,
            StubOutcome::Report(WorkerReport {
                stage: Stage::Compile,
                ok: false,
                exception_kind: None,
                error_message: "SyntaxError: invalid syntax".into(),
                traceback: String::new(),
                duration_ms: 0,
            }),
        )])
        .unwrap();
        let asserts: Vec<String> = (0..3).map(|i| format!("assert f({i}) == {i}")).collect();
        let (fixed, results) = execute_all(&stub, code, &asserts, &SandboxConfig::default()).unwrap();
        assert!(!fixed);
        assert_eq!(results.len(), 3);
        assert!(results.iter().all(|r| r.status == ErrorType::NotCompiled));
    }

    #[test]
    fn stub_script_parses_from_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stub.jsonl");
        fs::write(
            &path,
            concat!(
                r#"{"code":"a","outcome":"timeout"}"#,
                "\n\n",
                r#"{"code_sha256":"CA978112CA1BBDCAFAC231B39A23DC4DA786EFF8147C4E72B9807785AFEE48BB","outcome":{"report":{"stage":"run","ok":true,"exception_kind":null,"error_message":"","traceback":"","duration_ms":2}}}"#,
                "\n"
            ),
        )
        .unwrap();
        let stub = StubSandbox::from_jsonl(&path).unwrap();
        assert_eq!(stub.len(), 1);
        // "a" hashes to ca9781...; the second entry overrides the first.
        let result = execute(&stub, "a", "assert f()", &SandboxConfig::default()).unwrap();
        assert_eq!(result.status, ErrorType::Pass);
    }
}
