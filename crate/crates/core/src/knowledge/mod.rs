//! Fixing knowledge set and per-error-type suggestion registry.
//!
//! On disk a store is a directory with three files:
//!
//! * `fixes.jsonl` - one [`FixRecord`] per line, append-only;
//! * `registry.json` - the current [`SuggestionRegistry`], replaced atomically
//!   (write to a temp file, then rename);
//! * `registry_audit.jsonl` - every superseded registry entry.
//!
//! Writes go through a single [`KnowledgeStore`]. Readers work on a
//! [`KnowledgeSnapshot`] taken at a round boundary, which only contains fixes
//! committed in earlier rounds.

mod similarity;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::MentorUpdate;
use crate::executor::ErrorType;

pub use similarity::{match_length, tokenize, SequenceMatch, TokenSequence};

pub const FIXES_FILE: &str = "fixes.jsonl";
pub const REGISTRY_FILE: &str = "registry.json";
pub const AUDIT_FILE: &str = "registry_audit.jsonl";

/// Fixes of one error type that trigger a mentor rewrite.
pub const DEFAULT_MENTOR_THRESHOLD: u32 = 20;
/// Maximum number of past fixes placed in a repair prompt.
pub const DEFAULT_RETRIEVAL_K: usize = 10;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("invalid fix record: {0}")]
    InvalidRecord(String),
    #[error("invalid mentor update: {0}")]
    InvalidUpdate(String),
    #[error("{path}:{line}: corrupt store entry: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("knowledge store I/O failed: {0}")]
    Storage(#[from] std::io::Error),
}

/// One successful repair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixRecord {
    pub record_id: u64,
    pub problem_id: String,
    pub error_type: ErrorType,
    pub error_message: String,
    pub initial_code: String,
    pub fixed_code: String,
    pub round_index: u32,
    pub created_at: DateTime<Utc>,
}

/// A fix awaiting commit; the store assigns id and timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewFix {
    pub problem_id: String,
    pub error_type: ErrorType,
    pub error_message: String,
    pub initial_code: String,
    pub fixed_code: String,
    pub round_index: u32,
}

impl NewFix {
    fn validate(&self) -> Result<(), KnowledgeError> {
        if self.error_type.is_pass() {
            return Err(KnowledgeError::InvalidRecord("error_type must not be pass".into()));
        }
        if self.fixed_code == self.initial_code {
            return Err(KnowledgeError::InvalidRecord("fixed_code equals initial_code".into()));
        }
        if self.problem_id.is_empty() {
            return Err(KnowledgeError::InvalidRecord("empty problem_id".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub version: u32,
    pub suggestions: Vec<String>,
    pub fixes_since_update: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionRegistry {
    entries: BTreeMap<ErrorType, RegistryEntry>,
}

impl SuggestionRegistry {
    /// Version 1 entries for every failure type.
    pub fn seeded(seeds: &BTreeMap<ErrorType, Vec<String>>) -> Self {
        let entries = ErrorType::FAILURES
            .into_iter()
            .map(|t| {
                let entry = RegistryEntry {
                    version: 1,
                    suggestions: seeds.get(&t).cloned().unwrap_or_default(),
                    fixes_since_update: 0,
                };
                (t, entry)
            })
            .collect();
        Self { entries }
    }

    pub fn entry(&self, error_type: ErrorType) -> Option<&RegistryEntry> {
        self.entries.get(&error_type)
    }

    pub fn entries(&self) -> impl Iterator<Item = (ErrorType, &RegistryEntry)> {
        self.entries.iter().map(|(t, e)| (*t, e))
    }

    fn entry_mut(&mut self, error_type: ErrorType) -> &mut RegistryEntry {
        self.entries.entry(error_type).or_insert(RegistryEntry {
            version: 1,
            suggestions: Vec::new(),
            fixes_since_update: 0,
        })
    }
}

/// Seed fixing suggestions used before any mentor update.
pub fn default_seed_suggestions() -> BTreeMap<ErrorType, Vec<String>> {
    let seeds: [(ErrorType, &[&str]); 4] = [
        (
            ErrorType::NotCompiled,
            &[
                "Check for unbalanced brackets, missing colons and inconsistent indentation.",
                "Import every module the code uses and define every helper it calls.",
                "Return only valid source code without prose or markdown inside the function.",
            ],
        ),
        (
            ErrorType::TestError,
            &[
                "Guard indexing and unpacking against empty or shorter-than-expected inputs.",
                "Check argument types and conversions before arithmetic or string operations.",
                "Make sure every name used is defined on all code paths.",
            ],
        ),
        (
            ErrorType::TestFailed,
            &[
                "Re-read the problem statement and trace the guiding assertion by hand.",
                "Check edge cases: empty input, single element, boundaries and off-by-one limits.",
                "Match the expected return type and format exactly.",
            ],
        ),
        (
            ErrorType::Timeout,
            &[
                "Make sure every loop and recursion makes progress toward termination.",
                "Replace brute-force search with a polynomial algorithm or memoization.",
                "Avoid reading from standard input; the function receives its arguments directly.",
            ],
        ),
    ];
    seeds
        .into_iter()
        .map(|(t, s)| (t, s.iter().map(|x| x.to_string()).collect()))
        .collect()
}

/// A superseded registry entry, kept for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub error_type: ErrorType,
    pub previous: RegistryEntry,
    pub new_version: u32,
    pub causes_summary: String,
    pub replaced_at: DateTime<Utc>,
}

/// Per-type counts for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KnowledgeStats {
    pub total_fixes: usize,
    pub fixes_by_type: BTreeMap<ErrorType, usize>,
    pub registry_versions: BTreeMap<ErrorType, u32>,
    pub fixes_since_update: BTreeMap<ErrorType, u32>,
}

/// Rank `records` for a query.
///
/// Candidates are restricted to `error_type`, other problems and rounds before
/// `max_round`, ordered by match length then record id (both descending), and
/// truncated to `k`.
pub fn retrieve<'a>(
    records: &'a [FixRecord],
    query_message: &str,
    error_type: ErrorType,
    exclude_problem: &str,
    max_round: u32,
    k: usize,
) -> Vec<&'a FixRecord> {
    let query = tokenize(query_message);
    let mut scored: Vec<(usize, &FixRecord)> = records
        .iter()
        .filter(|r| r.error_type == error_type && r.problem_id != exclude_problem && r.round_index < max_round)
        .map(|r| (match_length(&query, &tokenize(&r.error_message)).length, r))
        .collect();
    scored.sort_by(|(la, ra), (lb, rb)| lb.cmp(la).then(rb.record_id.cmp(&ra.record_id)));
    scored.into_iter().take(k).map(|(_, r)| r).collect()
}

/// Read-only view of the store at the start of a round.
#[derive(Debug, Clone)]
pub struct KnowledgeSnapshot {
    round: u32,
    records: Arc<Vec<FixRecord>>,
    registry: SuggestionRegistry,
}

impl KnowledgeSnapshot {
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn records(&self) -> &[FixRecord] {
        &self.records
    }

    pub fn registry(&self) -> &SuggestionRegistry {
        &self.registry
    }

    pub fn count_of_type(&self, error_type: ErrorType) -> usize {
        self.records.iter().filter(|r| r.error_type == error_type).count()
    }

    pub fn retrieve(
        &self,
        query_message: &str,
        error_type: ErrorType,
        exclude_problem: &str,
        k: usize,
    ) -> Vec<&FixRecord> {
        retrieve(&self.records, query_message, error_type, exclude_problem, self.round, k)
    }
}

/// The single writer over a knowledge directory (or memory, for tests).
#[derive(Debug)]
pub struct KnowledgeStore {
    dir: Option<PathBuf>,
    records: Vec<FixRecord>,
    registry: SuggestionRegistry,
    audit: Vec<AuditEntry>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, KnowledgeError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| KnowledgeError::Corrupt {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<(), KnowledgeError> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_string(value).expect("store types serialize");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

impl KnowledgeStore {
    pub fn in_memory(seeds: &BTreeMap<ErrorType, Vec<String>>) -> Self {
        Self {
            dir: None,
            records: Vec::new(),
            registry: SuggestionRegistry::seeded(seeds),
            audit: Vec::new(),
        }
    }

    /// Open (or create) a store directory. `seeds` only matter for a fresh
    /// registry.
    pub fn open(dir: &Path, seeds: &BTreeMap<ErrorType, Vec<String>>) -> Result<Self, KnowledgeError> {
        fs::create_dir_all(dir)?;
        let records: Vec<FixRecord> = read_jsonl(&dir.join(FIXES_FILE))?;
        for pair in records.windows(2) {
            if pair[1].record_id <= pair[0].record_id {
                return Err(KnowledgeError::Corrupt {
                    path: dir.join(FIXES_FILE).display().to_string(),
                    line: 0,
                    message: format!("record ids out of order at {}", pair[1].record_id),
                });
            }
        }
        let registry_path = dir.join(REGISTRY_FILE);
        let registry = if registry_path.exists() {
            let text = fs::read_to_string(&registry_path)?;
            serde_json::from_str(&text).map_err(|e| KnowledgeError::Corrupt {
                path: registry_path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        } else {
            SuggestionRegistry::seeded(seeds)
        };
        let audit = read_jsonl(&dir.join(AUDIT_FILE))?;
        let store = Self {
            dir: Some(dir.to_path_buf()),
            records,
            registry,
            audit,
        };
        store.save_registry()?;
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn records(&self) -> &[FixRecord] {
        &self.records
    }

    pub fn registry(&self) -> &SuggestionRegistry {
        &self.registry
    }

    pub fn audit_log(&self) -> &[AuditEntry] {
        &self.audit
    }

    /// First round index not yet used by any committed fix (at least 1).
    pub fn next_round(&self) -> u32 {
        self.records.iter().map(|r| r.round_index + 1).max().unwrap_or(1).max(1)
    }

    fn save_registry(&self) -> Result<(), KnowledgeError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{REGISTRY_FILE}.tmp"));
        {
            let mut file = File::create(&tmp)?;
            let text = serde_json::to_string_pretty(&self.registry).expect("registry serializes");
            file.write_all(text.as_bytes())?;
            file.write_all(b"\n")?;
            file.sync_all()?;
        }
        fs::rename(&tmp, dir.join(REGISTRY_FILE))?;
        Ok(())
    }

    /// Append a fix and bump its type's counter. Returns the assigned id.
    pub fn commit_fix(&mut self, fix: NewFix) -> Result<u64, KnowledgeError> {
        fix.validate()?;
        let record = FixRecord {
            record_id: self.records.last().map_or(1, |r| r.record_id + 1),
            problem_id: fix.problem_id,
            error_type: fix.error_type,
            error_message: fix.error_message,
            initial_code: fix.initial_code,
            fixed_code: fix.fixed_code,
            round_index: fix.round_index,
            created_at: Utc::now(),
        };
        if let Some(dir) = &self.dir {
            append_jsonl(&dir.join(FIXES_FILE), &record)?;
        }
        let id = record.record_id;
        self.registry.entry_mut(record.error_type).fixes_since_update += 1;
        self.records.push(record);
        self.save_registry()?;
        Ok(id)
    }

    /// Error types with at least `threshold` fixes since their last update.
    pub fn mentor_due(&self, threshold: u32) -> Vec<ErrorType> {
        self.registry
            .entries()
            .filter(|(_, e)| e.fixes_since_update >= threshold)
            .map(|(t, _)| t)
            .collect()
    }

    /// The fixes of `error_type` committed since its last update, oldest first.
    pub fn fixes_since_update(&self, error_type: ErrorType) -> Vec<&FixRecord> {
        let pending = self
            .registry
            .entry(error_type)
            .map_or(0, |e| e.fixes_since_update as usize);
        let mut newest: Vec<&FixRecord> = self
            .records
            .iter()
            .rev()
            .filter(|r| r.error_type == error_type)
            .take(pending)
            .collect();
        newest.reverse();
        newest
    }

    /// Replace a type's suggestions. Returns the new version.
    pub fn apply_update(&mut self, update: &MentorUpdate) -> Result<u32, KnowledgeError> {
        if update.suggestions.is_empty() || update.suggestions.iter().all(|s| s.trim().is_empty()) {
            return Err(KnowledgeError::InvalidUpdate("suggestions are empty".into()));
        }
        if update.error_type.is_pass() {
            return Err(KnowledgeError::InvalidUpdate("pass has no suggestions".into()));
        }
        let entry = self.registry.entry_mut(update.error_type);
        let previous = entry.clone();
        entry.version += 1;
        entry.suggestions = update.suggestions.clone();
        entry.fixes_since_update = 0;
        let audit = AuditEntry {
            error_type: update.error_type,
            previous,
            new_version: entry.version,
            causes_summary: update.causes_summary.clone(),
            replaced_at: Utc::now(),
        };
        let version = entry.version;
        if let Some(dir) = &self.dir {
            append_jsonl(&dir.join(AUDIT_FILE), &audit)?;
        }
        self.audit.push(audit);
        self.save_registry()?;
        Ok(version)
    }

    /// Snapshot for `round`: fixes from earlier rounds only.
    pub fn snapshot(&self, round: u32) -> KnowledgeSnapshot {
        KnowledgeSnapshot {
            round,
            records: Arc::new(self.records.iter().filter(|r| r.round_index < round).cloned().collect()),
            registry: self.registry.clone(),
        }
    }

    pub fn stats(&self) -> KnowledgeStats {
        let mut fixes_by_type: BTreeMap<ErrorType, usize> = ErrorType::FAILURES.into_iter().map(|t| (t, 0)).collect();
        for r in &self.records {
            *fixes_by_type.entry(r.error_type).or_default() += 1;
        }
        KnowledgeStats {
            total_fixes: self.records.len(),
            fixes_by_type,
            registry_versions: self.registry.entries().map(|(t, e)| (t, e.version)).collect(),
            fixes_since_update: self
                .registry
                .entries()
                .map(|(t, e)| (t, e.fixes_since_update))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fix(problem: &str, t: ErrorType, msg: &str, round: u32) -> NewFix {
        NewFix {
            problem_id: problem.into(),
            error_type: t,
            error_message: msg.into(),
            initial_code: format!("def f(): pass  # {problem} before"),
            fixed_code: format!("def f(): return 1  # {problem} after"),
            round_index: round,
        }
    }

    fn update(t: ErrorType, suggestions: &[&str]) -> MentorUpdate {
        MentorUpdate {
            error_type: t,
            causes_summary: "causes".into(),
            suggestions: suggestions.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn store() -> KnowledgeStore {
        KnowledgeStore::in_memory(&default_seed_suggestions())
    }

    #[test]
    fn first_commit_gets_id_one() {
        let mut s = store();
        assert_eq!(s.commit_fix(fix("a", ErrorType::TestError, "x", 1)).unwrap(), 1);
        assert_eq!(s.registry().entry(ErrorType::TestError).unwrap().fixes_since_update, 1);
        assert_eq!(s.commit_fix(fix("b", ErrorType::TestError, "x", 1)).unwrap(), 2);
    }

    #[test]
    fn pass_and_unchanged_code_are_rejected() {
        let mut s = store();
        assert!(matches!(
            s.commit_fix(fix("a", ErrorType::Pass, "x", 1)),
            Err(KnowledgeError::InvalidRecord(_))
        ));
        let mut same = fix("a", ErrorType::Timeout, "x", 1);
        same.fixed_code = same.initial_code.clone();
        assert!(s.commit_fix(same).is_err());
        assert!(s.records().is_empty());
    }

    #[test]
    fn mentor_due_threshold() {
        let mut s = store();
        for i in 0..20 {
            s.commit_fix(fix(&format!("p{i}"), ErrorType::NotCompiled, "SyntaxError", 1))
                .unwrap();
        }
        for i in 0..19 {
            s.commit_fix(fix(&format!("q{i}"), ErrorType::TestFailed, "AssertionError", 1))
                .unwrap();
        }
        assert_eq!(s.mentor_due(DEFAULT_MENTOR_THRESHOLD), vec![ErrorType::NotCompiled]);
        assert!(store().mentor_due(DEFAULT_MENTOR_THRESHOLD).is_empty());
        assert_eq!(s.fixes_since_update(ErrorType::NotCompiled).len(), 20);
    }

    #[test]
    fn two_types_over_threshold_are_both_due() {
        let mut s = store();
        for i in 0..25 {
            s.commit_fix(fix(&format!("a{i}"), ErrorType::TestError, "m", 1))
                .unwrap();
        }
        for i in 0..31 {
            s.commit_fix(fix(&format!("b{i}"), ErrorType::Timeout, "m", 1)).unwrap();
        }
        assert_eq!(s.mentor_due(20), vec![ErrorType::TestError, ErrorType::Timeout]);
    }

    #[test]
    fn apply_update_bumps_version_and_resets_counter() {
        let mut s = store();
        for i in 0..3 {
            s.commit_fix(fix(&format!("p{i}"), ErrorType::TestFailed, "m", 1))
                .unwrap();
        }
        // Manual invocation below the threshold still applies.
        assert_eq!(s.apply_update(&update(ErrorType::TestFailed, &["new"])).unwrap(), 2);
        let entry = s.registry().entry(ErrorType::TestFailed).unwrap();
        assert_eq!((entry.version, entry.fixes_since_update), (2, 0));
        assert_eq!(entry.suggestions, vec!["new"]);
        assert_eq!(s.audit_log().len(), 1);
        assert_eq!(s.audit_log()[0].previous.version, 1);
        assert!(s.fixes_since_update(ErrorType::TestFailed).is_empty());
    }

    #[test]
    fn empty_update_is_rejected() {
        let mut s = store();
        assert!(matches!(
            s.apply_update(&update(ErrorType::TestFailed, &[])),
            Err(KnowledgeError::InvalidUpdate(_))
        ));
        assert_eq!(s.registry().entry(ErrorType::TestFailed).unwrap().version, 1);
    }

    #[test]
    fn retrieval_filters_and_ranks() {
        let mut s = store();
        s.commit_fix(fix(
            "a",
            ErrorType::TestError,
            "too many values to unpack (expected 2)",
            1,
        ))
        .unwrap();
        s.commit_fix(fix("b", ErrorType::TestError, "list index out of range", 1))
            .unwrap();
        s.commit_fix(fix("c", ErrorType::TestError, "values to unpack", 1))
            .unwrap();
        s.commit_fix(fix("q", ErrorType::TestError, "not enough values to unpack", 1))
            .unwrap();
        s.commit_fix(fix("d", ErrorType::TestFailed, "values to unpack expected 2", 1))
            .unwrap();
        s.commit_fix(fix("e", ErrorType::TestError, "values to unpack expected 2", 2))
            .unwrap();

        let snap = s.snapshot(2);
        let got: Vec<&str> = snap
            .retrieve(
                "not enough values to unpack (expected 2, got 1)",
                ErrorType::TestError,
                "q",
                10,
            )
            .iter()
            .map(|r| r.problem_id.as_str())
            .collect();
        // `q` is the querying problem, `d` has another type, `e` is from round 2.
        assert_eq!(got, vec!["a", "c", "b"]);
    }

    #[test]
    fn retrieval_caps_at_k() {
        let mut s = store();
        for i in 0..15 {
            s.commit_fix(fix(&format!("p{i}"), ErrorType::Timeout, "timed out", 1))
                .unwrap();
        }
        let snap = s.snapshot(2);
        let got = snap.retrieve("timed out", ErrorType::Timeout, "other", DEFAULT_RETRIEVAL_K);
        assert_eq!(got.len(), 10);
        // Equal match lengths: newest first.
        assert_eq!(got[0].record_id, 15);
        assert!(snap.retrieve("x", ErrorType::Timeout, "other", 10).len() == 10);
        assert!(store()
            .snapshot(5)
            .retrieve("x", ErrorType::Timeout, "o", 10)
            .is_empty());
    }

    #[test]
    fn persisted_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let seeds = default_seed_suggestions();
        let (records, registry) = {
            let mut s = KnowledgeStore::open(dir.path(), &seeds).unwrap();
            s.commit_fix(fix("a", ErrorType::TestError, "m1", 1)).unwrap();
            s.commit_fix(fix("b", ErrorType::NotCompiled, "m2", 2)).unwrap();
            s.apply_update(&update(ErrorType::TestError, &["s1", "s2"])).unwrap();
            (s.records().to_vec(), s.registry().clone())
        };
        let s = KnowledgeStore::open(dir.path(), &BTreeMap::new()).unwrap();
        assert_eq!(s.records(), records.as_slice());
        assert_eq!(s.registry(), &registry);
        assert_eq!(s.audit_log().len(), 1);
        assert_eq!(s.next_round(), 3);
        assert!(!dir.path().join("registry.json.tmp").exists());
    }

    #[test]
    fn next_round_of_empty_store_is_one() {
        assert_eq!(store().next_round(), 1);
    }

    proptest! {
        #[test]
        fn retrieval_is_causal_and_sorted(
            specs in prop::collection::vec((0usize..5, 0usize..4, 1u32..5, 0usize..6), 0..40),
            query_problem in 0usize..5,
            max_round in 1u32..6,
            k in 1usize..12,
        ) {
            let words = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
            let mut s = store();
            for (i, (p, t, round, w)) in specs.iter().enumerate() {
                let msg = words[*w..].join(" ");
                let mut nf = fix(&format!("p{p}"), ErrorType::FAILURES[*t], &msg, *round);
                nf.fixed_code.push_str(&i.to_string());
                s.commit_fix(nf).unwrap();
            }
            let query = "beta gamma delta";
            let qp = format!("p{query_problem}");
            let got = retrieve(s.records(), query, ErrorType::TestError, &qp, max_round, k);
            prop_assert!(got.len() <= k);
            let q = tokenize(query);
            let keys: Vec<(usize, u64)> = got
                .iter()
                .map(|r| (match_length(&q, &tokenize(&r.error_message)).length, r.record_id))
                .collect();
            for r in &got {
                prop_assert!(r.round_index < max_round);
                prop_assert!(r.problem_id != qp);
                prop_assert_eq!(r.error_type, ErrorType::TestError);
            }
            for w in keys.windows(2) {
                prop_assert!(w[0].0 > w[1].0 || (w[0].0 == w[1].0 && w[0].1 > w[1].1));
            }
        }

        #[test]
        fn versions_strictly_increase(n in 1usize..8) {
            let mut s = store();
            let mut last = 1;
            for i in 0..n {
                let v = s.apply_update(&update(ErrorType::Timeout, &[&format!("s{i}")])).unwrap();
                prop_assert!(v > last);
                last = v;
            }
        }
    }
}
