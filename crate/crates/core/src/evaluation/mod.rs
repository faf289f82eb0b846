//! Metrics over run logs: sequential pass@k, McNemar's test, error
//! transition matrices and per-iteration error shares.

mod report;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ErrorType;
use crate::pipeline::{ProblemStatus, ProblemSummary, RunLog};

pub use report::{write_report, Method, ReportOptions, DEFAULT_KS};

/// Discordant pairs below this use the exact binomial test.
pub const EXACT_BELOW: u64 = 25;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no results to score")]
    EmptyResultSet,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("problem sets differ: {0}")]
    MismatchedProblemSets(String),
    #[error("smoothing window must be a positive odd number, got {0}")]
    InvalidWindow(usize),
    #[error("invalid outcome sequence for {problem_id}: {reason}")]
    InvalidSequence { problem_id: String, reason: String },
    #[error("report I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Guiding-assertion status per attempt for one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSequence {
    pub problem_id: String,
    pub statuses: Vec<ErrorType>,
    pub solved_all_tests: bool,
}

impl OutcomeSequence {
    pub fn new(
        problem_id: impl Into<String>,
        statuses: Vec<ErrorType>,
        solved_all_tests: bool,
    ) -> Result<Self, EvalError> {
        let seq = Self {
            problem_id: problem_id.into(),
            statuses,
            solved_all_tests,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |reason: &str| EvalError::InvalidSequence {
            problem_id: self.problem_id.clone(),
            reason: reason.into(),
        };
        let n = self.statuses.len();
        if self.statuses.iter().take(n.saturating_sub(1)).any(|s| s.is_pass()) {
            return Err(invalid("pass before the final attempt"));
        }
        if self.solved_all_tests && !self.passed() {
            return Err(invalid("all tests solved without a passing attempt"));
        }
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.statuses.last().is_some_and(|s| s.is_pass())
    }

    fn from_summary(s: &ProblemSummary) -> Result<Self, EvalError> {
        Self::new(s.problem_id.clone(), s.statuses.clone(), s.solved_all_tests)
    }
}

/// Scorable sequences of a log (last round per problem), plus the ids of
/// problems excluded because of infrastructure failures.
pub fn sequences_from_log(log: &RunLog) -> Result<(Vec<OutcomeSequence>, Vec<String>), EvalError> {
    let mut sequences = Vec::new();
    let mut excluded = Vec::new();
    for summary in log.final_summaries() {
        if summary.status == ProblemStatus::InfraFailed {
            excluded.push(summary.problem_id.clone());
        } else {
            sequences.push(OutcomeSequence::from_summary(summary)?);
        }
    }
    Ok((sequences, excluded))
}

/// A correct program appears within the first `k` attempts.
///
/// # Panics
/// If `k` is zero.
pub fn pass_at_k(sequence: &OutcomeSequence, k: usize) -> bool {
    assert!(k >= 1, "pass@k needs k >= 1");
    sequence.solved_all_tests && sequence.passed() && sequence.statuses.len() <= k
}

/// Percentage of sequences passing within `k` attempts.
pub fn pass_rate(sequences: &[OutcomeSequence], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if sequences.is_empty() {
        return Err(EvalError::EmptyResultSet);
    }
    let hits = sequences.iter().filter(|s| pass_at_k(s, k)).count();
    Ok(100.0 * hits as f64 / sequences.len() as f64)
}

/// Per-problem pass/fail of two methods over the same problems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedOutcomes {
    pairs: BTreeMap<String, (bool, bool)>,
}

impl PairedOutcomes {
    pub fn new(a: &[(String, bool)], b: &[(String, bool)]) -> Result<Self, EvalError> {
        let a_map: BTreeMap<_, _> = a.iter().cloned().collect();
        let b_map: BTreeMap<_, _> = b.iter().cloned().collect();
        if a_map.len() != a.len() || b_map.len() != b.len() {
            return Err(EvalError::MismatchedProblemSets("duplicate problem id".into()));
        }
        if let Some(id) = a_map.keys().find(|k| !b_map.contains_key(*k)) {
            return Err(EvalError::MismatchedProblemSets(format!("{id} only in first method")));
        }
        if let Some(id) = b_map.keys().find(|k| !a_map.contains_key(*k)) {
            return Err(EvalError::MismatchedProblemSets(format!("{id} only in second method")));
        }
        let pairs = a_map.into_iter().map(|(id, pa)| {
            let pb = b_map[&id];
            (id, (pa, pb))
        });
        Ok(Self { pairs: pairs.collect() })
    }

    pub fn from_counts(both: u64, only_a: u64, only_b: u64, neither: u64) -> Self {
        let mut pairs = BTreeMap::new();
        let groups = [
            (both, (true, true)),
            (only_a, (true, false)),
            (only_b, (false, true)),
            (neither, (false, false)),
        ];
        for (g, (count, outcome)) in groups.into_iter().enumerate() {
            for i in 0..count {
                pairs.insert(format!("{g}-{i:06}"), outcome);
            }
        }
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn swapped(&self) -> Self {
        let pairs = self.pairs.iter().map(|(k, &(a, b))| (k.clone(), (b, a))).collect();
        Self { pairs }
    }

    /// (a passes and b fails, a fails and b passes).
    pub fn discordant(&self) -> (u64, u64) {
        self.pairs.values().fold((0, 0), |(b, c), &(pa, pb)| match (pa, pb) {
            (true, false) => (b + 1, c),
            (false, true) => (b, c + 1),
            _ => (b, c),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ChiSquare,
    ExactBinomial,
    /// No discordant pairs.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub b: u64,
    pub c: u64,
    /// Continuity-corrected statistic (|b - c| - 1)^2 / (b + c).
    pub statistic: f64,
    /// Chi-square (1 df) p-value of `statistic`, always computed.
    pub p_chi_square: f64,
    /// Exact two-sided binomial p-value, computed when b + c < 25.
    pub p_exact: Option<f64>,
    /// The p-value of the selected method.
    pub p_value: f64,
    pub method: McNemarMethod,
}

impl McNemar {
    pub fn significant(&self, alpha: f64) -> bool {
        self.method != McNemarMethod::Degenerate && self.p_value < alpha
    }
}

/// McNemar's test from discordant counts.
pub fn mcnemar_counts(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_chi_square: 1.0,
            p_exact: None,
            p_value: 1.0,
            method: McNemarMethod::Degenerate,
        };
    }
    let diff = b.abs_diff(c) as f64 - 1.0;
    let statistic = diff * diff / n as f64;
    let p_chi_square = stats::chi_square_sf(statistic, 1.0);
    let p_exact = (n < EXACT_BELOW).then(|| stats::binomial_two_sided(b.min(c), n));
    let (p_value, method) = match p_exact {
        Some(p) => (p, McNemarMethod::ExactBinomial),
        None => (p_chi_square, McNemarMethod::ChiSquare),
    };
    McNemar {
        b,
        c,
        statistic,
        p_chi_square,
        p_exact,
        p_value,
        method,
    }
}

pub fn mcnemar(paired: &PairedOutcomes) -> McNemar {
    let (b, c) = paired.discordant();
    mcnemar_counts(b, c)
}

pub const STATES: [ErrorType; 5] = ErrorType::ALL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    /// `counts[i][j]`: attempts in state i followed by an attempt in state j.
    pub counts: [[u64; 5]; 5],
    /// Row-normalized counts; all zero for rows without observations.
    pub probabilities: [[f64; 5]; 5],
    /// Rows with no outgoing observation.
    pub empty_rows: [bool; 5],
}

impl TransitionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn transition_matrix(sequences: &[OutcomeSequence]) -> TransitionMatrix {
    let mut counts = [[0u64; 5]; 5];
    for seq in sequences {
        for pair in seq.statuses.windows(2) {
            counts[pair[0].index()][pair[1].index()] += 1;
        }
    }
    let mut probabilities = [[0.0; 5]; 5];
    let mut empty_rows = [false; 5];
    for i in 0..5 {
        let row: u64 = counts[i].iter().sum();
        empty_rows[i] = row == 0;
        if row > 0 {
            for j in 0..5 {
                probabilities[i][j] = counts[i][j] as f64 / row as f64;
            }
        }
    }
    TransitionMatrix {
        counts,
        probabilities,
        empty_rows,
    }
}

/// Columns of the time series: the five states plus problems whose attempts
/// ended without a pass.
pub const SERIES_COLUMNS: [&str; 6] = [
    "not_compiled",
    "test_error",
    "test_failed",
    "timeout",
    "pass",
    "exhausted",
];
const EXHAUSTED: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub iteration: usize,
    pub raw: [f64; 6],
    pub smoothed: [f64; 6],
}

/// Share of problems in each state at every attempt index.
///
/// A problem that passed earlier stays in `pass`; one that ran out of
/// attempts moves to `exhausted`. Shares use all problems as denominator, so
/// each raw row sums to 1. Smoothing is a centered moving average whose
/// window is truncated at both ends.
pub fn error_timeseries(sequences: &[OutcomeSequence], window: usize) -> Result<Vec<TimeseriesRow>, EvalError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(EvalError::InvalidWindow(window));
    }
    let horizon = sequences.iter().map(|s| s.statuses.len()).max().unwrap_or(0);
    let n = sequences.len() as f64;
    let raw: Vec<[f64; 6]> = (0..horizon)
        .map(|t| {
            let mut counts = [0usize; 6];
            for seq in sequences {
                let column = match seq.statuses.get(t) {
                    Some(s) => s.index(),
                    None if seq.passed() => ErrorType::Pass.index(),
                    None => EXHAUSTED,
                };
                counts[column] += 1;
            }
            counts.map(|c| c as f64 / n)
        })
        .collect();
    let half = window / 2;
    let rows = (0..horizon)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(horizon - 1);
            let mut smoothed = [0.0; 6];
            for r in &raw[lo..=hi] {
                for (s, v) in smoothed.iter_mut().zip(r) {
                    *s += v;
                }
            }
            let width = (hi - lo + 1) as f64;
            smoothed.iter_mut().for_each(|s| *s /= width);
            TimeseriesRow {
                iteration: t + 1,
                raw: raw[t],
                smoothed,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ErrorType::*;

    fn seq(statuses: &[ErrorType], all: bool) -> OutcomeSequence {
        OutcomeSequence::new("p", statuses.to_vec(), all).unwrap()
    }

    #[test]
    fn sequence_invariants() {
        assert!(OutcomeSequence::new("p", vec![Pass, TestFailed], false).is_err());
        assert!(OutcomeSequence::new("p", vec![TestFailed], true).is_err());
        assert!(OutcomeSequence::new("p", vec![], false).is_ok());
    }

    #[test]
    fn fourth_attempt_pass() {
        let s = seq(&[TestFailed, TestFailed, TestFailed, Pass], true);
        assert!(!pass_at_k(&s, 3));
        assert!(pass_at_k(&s, 4));
        assert!(pass_at_k(&s, 50));
    }

    #[test]
    fn guiding_pass_with_failing_hidden_tests_does_not_count() {
        let s = seq(&[Pass], false);
        assert!(!pass_at_k(&s, 1));
        assert!(pass_at_k(&seq(&[Pass], true), 1));
        assert!(!pass_at_k(&seq(&[TestError; 50], false), 50));
    }

    #[test]
    fn pass_rates() {
        let seqs = [
            seq(&[Pass], true),
            seq(&[TestError, Pass], true),
            seq(&[TestError], false),
            seq(&[NotCompiled, Timeout], false),
        ];
        assert_eq!(pass_rate(&seqs, 2).unwrap(), 50.0);
        assert_eq!(pass_rate(&seqs, 1).unwrap(), 25.0);
        assert!(matches!(pass_rate(&[], 1), Err(EvalError::EmptyResultSet)));
        assert!(matches!(pass_rate(&seqs, 0), Err(EvalError::InvalidK)));
    }

    #[test]
    fn paired_outcomes_need_same_problems() {
        let a = vec![("x".to_string(), true), ("y".to_string(), false)];
        let b = vec![("x".to_string(), false), ("z".to_string(), true)];
        assert!(matches!(
            PairedOutcomes::new(&a, &b),
            Err(EvalError::MismatchedProblemSets(_))
        ));
        let b = vec![("y".to_string(), true), ("x".to_string(), false)];
        let p = PairedOutcomes::new(&a, &b).unwrap();
        assert_eq!(p.discordant(), (1, 1));
    }

    #[test]
    fn mcnemar_symmetric_discordance() {
        let m = mcnemar(&PairedOutcomes::from_counts(10, 8, 8, 10));
        assert!((m.statistic - 1.0 / 16.0).abs() < 1e-12);
        assert!(m.p_value > 0.5);
        let d = mcnemar_counts(0, 0);
        assert_eq!(d.method, McNemarMethod::Degenerate);
        assert_eq!(d.p_value, 1.0);
    }

    #[test]
    fn mcnemar_large_counts_use_chi_square() {
        let m = mcnemar_counts(30, 10);
        assert_eq!(m.method, McNemarMethod::ChiSquare);
        assert_eq!(m.p_exact, None);
        assert!((m.statistic - 361.0 / 40.0).abs() < 1e-12);
        assert_eq!(m.p_value, m.p_chi_square);
    }

    #[test]
    fn transition_counts_single_sequence() {
        let m = transition_matrix(&[seq(&[NotCompiled, NotCompiled, TestFailed, Pass], true)]);
        assert_eq!(m.counts[0][0], 1);
        assert_eq!(m.counts[0][2], 1);
        assert_eq!(m.counts[2][4], 1);
        assert_eq!(m.total(), 3);
        assert_eq!(m.probabilities[0], [0.5, 0.0, 0.5, 0.0, 0.0]);
        assert!(m.empty_rows[4] && m.empty_rows[1] && !m.empty_rows[0]);
    }

    #[test]
    fn transition_empty_inputs() {
        let m = transition_matrix(&[]);
        assert_eq!(m.total(), 0);
        assert!(m.empty_rows.iter().all(|&e| e));
        let m = transition_matrix(&[seq(&[TestError], false), seq(&[Pass], true)]);
        assert_eq!(m.total(), 0);
    }

    #[test]
    fn timeseries_shares() {
        let mut seqs = Vec::new();
        for i in 0..20 {
            let first = if i < 10 { NotCompiled } else { TestFailed };
            seqs.push(seq(&[first, Pass], true));
        }
        let rows = error_timeseries(&seqs, 3).unwrap();
        assert_eq!(rows[0].raw[0], 0.5);
        assert_eq!(rows[1].raw[4], 1.0);
        let identity = error_timeseries(&seqs, 1).unwrap();
        assert!(identity.iter().all(|r| r.raw == r.smoothed));
        assert!(matches!(error_timeseries(&seqs, 2), Err(EvalError::InvalidWindow(2))));
    }

    #[test]
    fn timeseries_all_pass_first() {
        let seqs = vec![seq(&[Pass], true); 4];
        let rows = error_timeseries(&seqs, 3).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].raw[4], 1.0);
        assert_eq!(rows[0].smoothed[4], 1.0);
    }

    #[test]
    fn timeseries_exhausted_and_cumulative_pass() {
        let seqs = vec![seq(&[TestError], false), seq(&[TestError, TestError, Pass], true)];
        let rows = error_timeseries(&seqs, 3).unwrap();
        assert_eq!(rows[1].raw, [0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(rows[2].raw, [0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
        // Middle row averages all three raw rows.
        assert!((rows[1].smoothed[1] - (1.0 + 0.5 + 0.0) / 3.0).abs() < 1e-12);
        // Edge rows average two.
        assert!((rows[0].smoothed[1] - (1.0 + 0.5) / 2.0).abs() < 1e-12);
    }
}
