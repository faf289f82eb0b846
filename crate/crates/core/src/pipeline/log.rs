//! Run log: one JSON object per line, tagged by `kind`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::{ErrorType, ExecutionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Generate,
    Repair,
}

/// One generated or repaired program and its guiding-assertion result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub problem_id: String,
    pub round: u32,
    pub attempt_index: u32,
    pub action: Action,
    pub code: String,
    pub result: ExecutionResult,
    #[serde(default)]
    pub plan_index: Option<u8>,
    #[serde(default)]
    pub suggestions_version: Option<u32>,
    #[serde(default)]
    pub retrieved_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemStatus {
    Solved,
    Unsolved,
    /// The model's reply could not be used; counts as unsolved.
    AgentFailed,
    /// Backend or sandbox failure; excluded from metrics.
    InfraFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem_id: String,
    pub round: u32,
    pub status: ProblemStatus,
    /// Guiding-assertion status per attempt.
    pub statuses: Vec<ErrorType>,
    pub guiding_passed: bool,
    /// Every assertion, hidden ones included, passed on the final code.
    pub solved_all_tests: bool,
    #[serde(default)]
    pub hidden_statuses: Vec<ErrorType>,
    #[serde(default)]
    pub fix_record_id: Option<u64>,
    #[serde(default)]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u32,
    pub processed: usize,
    pub solved: usize,
    pub infra_failed: usize,
    pub remaining: usize,
    pub committed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentorEvent {
    /// The round after which the update ran.
    pub after_round: u32,
    pub error_type: ErrorType,
    pub fixes_considered: usize,
    #[serde(default)]
    pub new_version: Option<u32>,
    #[serde(default)]
    pub suggestions: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    NoneRemaining,
    RoundCap,
    Stagnant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndSummary {
    pub reason: Termination,
    pub rounds: u32,
    pub solved: usize,
    pub unsolved: usize,
    pub infra_failed: usize,
}

/// Identifies the configuration and code a run was produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Provenance(Provenance),
    Attempt(Attempt),
    Problem(ProblemSummary),
    Round(RoundSummary),
    Mentor(MentorEvent),
    End(EndSummary),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
}

impl RunLog {
    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn attempts(&self) -> impl Iterator<Item = &Attempt> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Attempt(a) => Some(a),
            _ => None,
        })
    }

    pub fn problems(&self) -> impl Iterator<Item = &ProblemSummary> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Problem(p) => Some(p),
            _ => None,
        })
    }

    pub fn mentor_events(&self) -> impl Iterator<Item = &MentorEvent> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Mentor(m) => Some(m),
            _ => None,
        })
    }

    pub fn end(&self) -> Option<&EndSummary> {
        self.entries.iter().rev().find_map(|e| match e {
            LogEntry::End(s) => Some(s),
            _ => None,
        })
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.entries.iter().find_map(|e| match e {
            LogEntry::Provenance(p) => Some(p),
            _ => None,
        })
    }

    /// The last summary per problem, in first-seen order.
    pub fn final_summaries(&self) -> Vec<&ProblemSummary> {
        let mut order: Vec<&str> = Vec::new();
        let mut latest: std::collections::HashMap<&str, &ProblemSummary> = Default::default();
        for p in self.problems() {
            if latest.insert(p.problem_id.as_str(), p).is_none() {
                order.push(&p.problem_id);
            }
        }
        order.into_iter().map(|id| latest[id]).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
