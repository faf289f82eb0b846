//! Canonical problems and their ingestion from benchmark dumps.
//!
//! Every problem carries at least three assertions. The first is the guiding
//! assertion, the only test any agent ever sees; the rest stay hidden until a
//! candidate is judged. Prompt-building code accepts a [`GuidingAssertion`],
//! never a [`Problem`], so hidden tests cannot leak into a prompt.

mod assertion;
mod ingest;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assertion::{calls_function, extract_function_name, python_literal, wrap_pair};
pub use ingest::{ingest_file, normalize_record, read_raw_records, IngestReport, SkippedRecord};

/// Minimum number of assertions per problem.
pub const MIN_ASSERTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record is missing `{0}`")]
    MissingField(String),
    #[error("only {found} assertion(s) derivable, need at least {MIN_ASSERTIONS}")]
    TooFewTests { found: usize },
    #[error("malformed assertion: {0}")]
    MalformedAssertion(String),
    #[error("assertion does not call `{function}`: {assertion}")]
    ForeignCallee { function: String, assertion: String },
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Apps,
    Mbpp,
    Humaneval,
    Lcb,
    Custom,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Apps => "apps",
            Source::Mbpp => "mbpp",
            Source::Humaneval => "humaneval",
            Source::Lcb => "lcb",
            Source::Custom => "custom",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "apps" => Ok(Source::Apps),
            "mbpp" => Ok(Source::Mbpp),
            "humaneval" | "he" => Ok(Source::Humaneval),
            "lcb" | "livecodebench" => Ok(Source::Lcb),
            "custom" => Ok(Source::Custom),
            other => Err(CorpusError::UnknownSource(other.to_string())),
        }
    }
}

/// A dataset record exactly as read, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub source: Source,
    pub payload: serde_json::Value,
}

/// The only test an agent may see.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GuidingAssertion(String);

impl GuidingAssertion {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GuidingAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub description: String,
    pub function_name: String,
    pub assertions: Vec<String>,
    pub source: Source,
}

impl Problem {
    /// Build a problem, checking every invariant.
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        function_name: impl Into<String>,
        assertions: Vec<String>,
        source: Source,
    ) -> Result<Self, CorpusError> {
        let problem = Self {
            id: id.into(),
            description: description.into(),
            function_name: function_name.into(),
            assertions,
            source,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::MissingField("id".into()));
        }
        if self.description.trim().is_empty() {
            return Err(CorpusError::MissingField("description".into()));
        }
        if self.function_name.trim().is_empty() {
            return Err(CorpusError::MissingField("function_name".into()));
        }
        if self.assertions.len() < MIN_ASSERTIONS {
            return Err(CorpusError::TooFewTests {
                found: self.assertions.len(),
            });
        }
        for assertion in &self.assertions {
            if !calls_function(assertion, &self.function_name) {
                return Err(CorpusError::ForeignCallee {
                    function: self.function_name.clone(),
                    assertion: assertion.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn guiding(&self) -> GuidingAssertion {
        GuidingAssertion(self.assertions[0].clone())
    }

    pub fn hidden(&self) -> &[String] {
        &self.assertions[1..]
    }
}

/// Positional split into the guiding assertion and the hidden tests.
pub fn split_tests(problem: &Problem) -> (GuidingAssertion, Vec<String>) {
    (problem.guiding(), problem.hidden().to_vec())
}

/// Read a canonical corpus (one problem per line).
pub fn read_corpus(path: &Path) -> Result<Vec<Problem>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let problem: Problem = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        problem.validate()?;
        if !seen.insert(problem.id.clone()) {
            return Err(CorpusError::DuplicateId(problem.id));
        }
        problems.push(problem);
    }
    Ok(problems)
}

/// Serialize one problem as its canonical JSONL line (no trailing newline).
pub fn problem_to_line(problem: &Problem) -> String {
    serde_json::to_string(problem).expect("problem serializes")
}

/// Write a canonical corpus: UTF-8, LF line endings.
pub fn write_corpus(path: &Path, problems: &[Problem]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for problem in problems {
        out.write_all(problem_to_line(problem).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
