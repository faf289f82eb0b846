//! Per-problem generate/test/repair loop and the round-based driver.
//!
//! Within a round every problem reads the same [`KnowledgeSnapshot`], which
//! holds only fixes from earlier rounds. Fixes produced during the round are
//! committed at the barrier, in corpus order, so results do not depend on
//! scheduling. Mentor updates run between rounds.

mod log;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, Agents, Plan, RepairContext, PLAN_COUNT};
use crate::backend::ChatBackend;
use crate::corpus::Problem;
use crate::executor::{execute, execute_all, ErrorType, ExecutionResult, Sandbox, SandboxConfig, SandboxError};
use crate::knowledge::{
    KnowledgeError, KnowledgeSnapshot, KnowledgeStats, KnowledgeStore, NewFix, DEFAULT_MENTOR_THRESHOLD,
    DEFAULT_RETRIEVAL_K,
};

pub use log::{
    Action, Attempt, EndSummary, LogEntry, MentorEvent, ProblemStatus, ProblemSummary, Provenance, RoundSummary,
    RunLog, Termination,
};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 50;
pub const DEFAULT_MAX_ROUNDS: u32 = 10;
pub const DEFAULT_PLAN_ROTATION: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Accumulate,
    #[default]
    Evaluate,
}

/// Which mentor inputs are enabled. The code writer itself is never ablated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub planner: bool,
    pub rag: bool,
    pub error_pattern: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            planner: true,
            rag: true,
            error_pattern: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_attempts: u32,
    pub retrieval_k: usize,
    pub timeout_ms: u64,
    pub ablation: Ablation,
    pub phase: Phase,
    pub round_parallelism: usize,
    pub max_rounds: u32,
    pub mentor_threshold: u32,
    /// Retrieval for an error type starts once the snapshot holds this many
    /// fixes of that type.
    pub retrieval_min_fixes: usize,
    /// Failed repairs before regenerating from the next plan.
    pub plan_rotation: u32,
    /// Make accumulation bank fixes only when hidden tests pass too.
    pub accumulate_requires_hidden: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            retrieval_k: DEFAULT_RETRIEVAL_K,
            timeout_ms: crate::executor::DEFAULT_TIMEOUT_MS,
            ablation: Ablation::default(),
            phase: Phase::Evaluate,
            round_parallelism: 1,
            max_rounds: DEFAULT_MAX_ROUNDS,
            mentor_threshold: DEFAULT_MENTOR_THRESHOLD,
            retrieval_min_fixes: DEFAULT_MENTOR_THRESHOLD as usize,
            plan_rotation: DEFAULT_PLAN_ROTATION,
            accumulate_requires_hidden: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let checks = [
            (self.max_attempts >= 1, "max_attempts must be positive"),
            (self.retrieval_k >= 1, "retrieval_k must be positive"),
            (
                self.retrieval_k <= DEFAULT_RETRIEVAL_K,
                "retrieval_k must be at most 10",
            ),
            (self.timeout_ms >= 1, "timeout_ms must be positive"),
            (self.round_parallelism >= 1, "round_parallelism must be positive"),
            (self.max_rounds >= 1, "max_rounds must be positive"),
            (self.mentor_threshold >= 1, "mentor_threshold must be positive"),
            (self.plan_rotation >= 1, "plan_rotation must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(PipelineError::Config(msg.to_string())),
            None => Ok(()),
        }
    }

    fn banks_on_guiding_only(&self) -> bool {
        self.phase == Phase::Accumulate && !self.accumulate_requires_hidden
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Everything one problem produced in one round.
#[derive(Debug, Clone)]
pub struct ProblemRun {
    pub attempts: Vec<Attempt>,
    pub summary: ProblemSummary,
    pub fix: Option<NewFix>,
}

enum Abort {
    Agent(AgentError),
    Sandbox(SandboxError),
}

impl From<AgentError> for Abort {
    fn from(e: AgentError) -> Self {
        Abort::Agent(e)
    }
}

impl From<SandboxError> for Abort {
    fn from(e: SandboxError) -> Self {
        Abort::Sandbox(e)
    }
}

pub struct Pipeline<'a, B, S: ?Sized> {
    agents: &'a Agents<B>,
    sandbox: &'a S,
    sandbox_config: SandboxConfig,
    config: RunConfig,
}

impl<'a, B: ChatBackend, S: Sandbox + ?Sized> Pipeline<'a, B, S> {
    /// `config.timeout_ms` overrides the timeout in `sandbox_config`.
    pub fn new(
        agents: &'a Agents<B>,
        sandbox: &'a S,
        sandbox_config: SandboxConfig,
        config: RunConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let sandbox_config = SandboxConfig {
            timeout_ms: config.timeout_ms,
            ..sandbox_config
        };
        sandbox_config
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            agents,
            sandbox,
            sandbox_config,
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Plan, generate and repair one problem until the guiding assertion
    /// passes or attempts run out.
    pub fn solve_problem(&self, problem: &Problem, snapshot: &KnowledgeSnapshot) -> ProblemRun {
        let mut attempts = Vec::new();
        let outcome = self.attempt_loop(problem, snapshot, &mut attempts);
        let statuses: Vec<ErrorType> = attempts.iter().map(|a| a.result.status).collect();
        let mut summary = ProblemSummary {
            problem_id: problem.id.clone(),
            round: snapshot.round(),
            status: ProblemStatus::Unsolved,
            statuses,
            guiding_passed: false,
            solved_all_tests: false,
            hidden_statuses: Vec::new(),
            fix_record_id: None,
            failure: None,
        };
        let guiding_passed = match outcome {
            Ok(passed) => passed,
            Err(Abort::Agent(e)) if e.is_reply_failure() => {
                summary.status = ProblemStatus::AgentFailed;
                summary.failure = Some(e.to_string());
                return ProblemRun {
                    attempts,
                    summary,
                    fix: None,
                };
            }
            Err(Abort::Agent(e)) => return infra(attempts, summary, e.to_string()),
            Err(Abort::Sandbox(e)) => return infra(attempts, summary, e.to_string()),
        };
        summary.guiding_passed = guiding_passed;
        if !guiding_passed {
            return ProblemRun {
                attempts,
                summary,
                fix: None,
            };
        }
        let last = attempts.last().expect("a passing attempt exists");
        match execute_all(self.sandbox, &last.code, &problem.assertions, &self.sandbox_config) {
            Ok((all, results)) => {
                summary.solved_all_tests = all;
                summary.hidden_statuses = results.iter().skip(1).map(|r| r.status).collect();
            }
            Err(e) => return infra(attempts, summary, e.to_string()),
        }
        let solved = summary.solved_all_tests || self.config.banks_on_guiding_only();
        if solved {
            summary.status = ProblemStatus::Solved;
        }
        let first = &attempts[0];
        let fix = (solved && attempts.len() > 1 && first.code != last.code).then(|| NewFix {
            problem_id: problem.id.clone(),
            error_type: first.result.status,
            error_message: first.result.error_message.clone(),
            initial_code: first.code.clone(),
            fixed_code: last.code.clone(),
            round_index: snapshot.round(),
        });
        ProblemRun { attempts, summary, fix }
    }

    fn attempt_loop(
        &self,
        problem: &Problem,
        snapshot: &KnowledgeSnapshot,
        attempts: &mut Vec<Attempt>,
    ) -> Result<bool, Abort> {
        let guiding = problem.guiding();
        let guiding = guiding.as_str();
        let ablation = self.config.ablation;
        let plans: Vec<Plan> = if ablation.planner {
            self.agents.plan(&problem.description, guiding)?
        } else {
            Vec::new()
        };
        let mut plan_cursor = 0usize;
        let mut failed_repairs = 0u32;
        let mut code = String::new();
        let mut last: Option<ExecutionResult> = None;
        for attempt_index in 1..=self.config.max_attempts {
            let regenerate = match &last {
                None => true,
                Some(_) => ablation.planner && failed_repairs >= self.config.plan_rotation,
            };
            let mut record = Attempt {
                problem_id: problem.id.clone(),
                round: snapshot.round(),
                attempt_index,
                action: Action::Generate,
                code: String::new(),
                result: ExecutionResult {
                    status: ErrorType::Pass,
                    error_message: String::new(),
                    traceback: None,
                    duration_ms: 0,
                },
                plan_index: None,
                suggestions_version: None,
                retrieved_ids: Vec::new(),
            };
            if regenerate {
                if last.is_some() {
                    plan_cursor = (plan_cursor + 1) % PLAN_COUNT;
                    failed_repairs = 0;
                }
                let chosen = plans.get(plan_cursor).map(|p| p.index);
                record.plan_index = chosen;
                code = self
                    .agents
                    .write_initial(&problem.description, &plans, guiding, chosen)?;
            } else {
                let previous = last.as_ref().expect("repair follows an attempt");
                let (suggestion, version) = self.suggestion(snapshot, previous.status);
                let examples =
                    if ablation.rag && snapshot.count_of_type(previous.status) >= self.config.retrieval_min_fixes {
                        snapshot
                            .retrieve(
                                &previous.error_message,
                                previous.status,
                                &problem.id,
                                self.config.retrieval_k,
                            )
                            .into_iter()
                            .cloned()
                            .collect()
                    } else {
                        Vec::new()
                    };
                record.action = Action::Repair;
                record.plan_index = plans.get(plan_cursor).map(|p| p.index);
                record.suggestions_version = version;
                record.retrieved_ids = examples.iter().map(|r| r.record_id).collect();
                code = self.agents.repair(&RepairContext {
                    description: problem.description.clone(),
                    initial_code: code.clone(),
                    guiding_assertion: guiding.to_string(),
                    error_type: previous.status,
                    error_message: previous.error_message.clone(),
                    fixing_suggestion: suggestion,
                    retrieved_examples: examples,
                })?;
                failed_repairs += 1;
            }
            let result = execute(self.sandbox, &code, guiding, &self.sandbox_config)?;
            let passed = result.is_pass();
            record.code = code.clone();
            record.result = result.clone();
            attempts.push(record);
            if passed {
                return Ok(true);
            }
            last = Some(result);
        }
        Ok(false)
    }

    fn suggestion(&self, snapshot: &KnowledgeSnapshot, error_type: ErrorType) -> (String, Option<u32>) {
        if !self.config.ablation.error_pattern {
            return (String::new(), None);
        }
        match snapshot.registry().entry(error_type) {
            Some(entry) => {
                let text = entry
                    .suggestions
                    .iter()
                    .map(|s| format!("- {s}"))
                    .collect::<Vec<_>>()
                    .join("\n");
                (text, Some(entry.version))
            }
            None => (String::new(), None),
        }
    }

    fn run_round(&self, problems: &[&Problem], snapshot: &KnowledgeSnapshot) -> Vec<ProblemRun> {
        let workers = self.config.round_parallelism.min(problems.len()).max(1);
        if workers == 1 {
            return problems.iter().map(|p| self.solve_problem(p, snapshot)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<ProblemRun>>> = problems.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(problem) = problems.get(i) else { break };
                    let run = self.solve_problem(problem, snapshot);
                    *slots[i].lock().unwrap() = Some(run);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().unwrap().expect("every problem ran"))
            .collect()
    }

    /// Run `corpus` through rounds until everything is solved, the round cap
    /// is reached, or a round solves nothing.
    pub fn run_rounds(&self, corpus: &[Problem], store: &mut KnowledgeStore) -> Result<RunLog, PipelineError> {
        let mut log = RunLog::default();
        let mut unsolved: Vec<&Problem> = corpus.iter().collect();
        let mut solved_total = 0usize;
        let mut infra_total = 0usize;
        let first_round = store.next_round();
        let mut rounds = 0u32;
        let reason = loop {
            if unsolved.is_empty() {
                break Termination::NoneRemaining;
            }
            if rounds == self.config.max_rounds {
                break Termination::RoundCap;
            }
            let round = first_round + rounds;
            rounds += 1;
            tracing::info!(round, problems = unsolved.len(), "starting round");
            let snapshot = store.snapshot(round);
            let runs = self.run_round(&unsolved, &snapshot);

            let mut committed = Vec::new();
            let mut done: HashSet<String> = HashSet::new();
            let (mut solved, mut infra_failed) = (0, 0);
            for mut run in runs {
                if let Some(fix) = run.fix.take() {
                    let id = store.commit_fix(fix)?;
                    run.summary.fix_record_id = Some(id);
                    committed.push(id);
                }
                match run.summary.status {
                    ProblemStatus::Solved => {
                        solved += 1;
                        done.insert(run.summary.problem_id.clone());
                    }
                    ProblemStatus::InfraFailed => {
                        infra_failed += 1;
                        tracing::warn!(
                            problem = %run.summary.problem_id,
                            failure = run.summary.failure.as_deref().unwrap_or(""),
                            "infrastructure failure"
                        );
                        done.insert(run.summary.problem_id.clone());
                    }
                    _ => {}
                }
                log.entries.extend(run.attempts.into_iter().map(LogEntry::Attempt));
                log.push(LogEntry::Problem(run.summary));
            }
            let processed = unsolved.len();
            unsolved.retain(|p| !done.contains(&p.id));
            solved_total += solved;
            infra_total += infra_failed;
            log.push(LogEntry::Round(RoundSummary {
                round,
                processed,
                solved,
                infra_failed,
                remaining: unsolved.len(),
                committed,
            }));
            self.run_mentor(round, store, &mut log)?;
            if solved == 0 && !unsolved.is_empty() {
                break Termination::Stagnant;
            }
        };
        log.push(LogEntry::End(EndSummary {
            reason,
            rounds,
            solved: solved_total,
            unsolved: unsolved.len(),
            infra_failed: infra_total,
        }));
        Ok(log)
    }

    fn run_mentor(&self, round: u32, store: &mut KnowledgeStore, log: &mut RunLog) -> Result<(), PipelineError> {
        for error_type in store.mentor_due(self.config.mentor_threshold) {
            let fixes: Vec<_> = store.fixes_since_update(error_type).into_iter().cloned().collect();
            let current = store
                .registry()
                .entry(error_type)
                .map(|e| e.suggestions.clone())
                .unwrap_or_default();
            let mut event = MentorEvent {
                after_round: round,
                error_type,
                fixes_considered: fixes.len(),
                new_version: None,
                suggestions: Vec::new(),
                error: None,
            };
            match self.agents.summarize(error_type, &current, &fixes) {
                Ok(update) => {
                    event.new_version = Some(store.apply_update(&update)?);
                    event.suggestions = update.suggestions;
                }
                Err(e) => {
                    tracing::warn!(%error_type, error = %e, "mentor update skipped");
                    event.error = Some(e.to_string());
                }
            }
            log.push(LogEntry::Mentor(event));
        }
        Ok(())
    }

    /// Knowledge accumulation: rounds in which a guiding-assertion pass is
    /// enough to bank a fix.
    pub fn accumulate(
        &self,
        corpus: &[Problem],
        store: &mut KnowledgeStore,
    ) -> Result<(RunLog, KnowledgeStats), PipelineError> {
        if self.config.phase != Phase::Accumulate {
            return Err(PipelineError::Config("accumulate needs phase = accumulate".into()));
        }
        let log = self.run_rounds(corpus, store)?;
        Ok((log, store.stats()))
    }
}

fn infra(attempts: Vec<Attempt>, mut summary: ProblemSummary, failure: String) -> ProblemRun {
    summary.status = ProblemStatus::InfraFailed;
    summary.failure = Some(failure);
    ProblemRun {
        attempts,
        summary,
        fix: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.phase, Phase::Evaluate);
        assert!(c.ablation.planner && c.ablation.rag && c.ablation.error_pattern);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let bad = [
            RunConfig {
                max_attempts: 0,
                ..RunConfig::default()
            },
            RunConfig {
                retrieval_k: 0,
                ..RunConfig::default()
            },
            RunConfig {
                retrieval_k: 11,
                ..RunConfig::default()
            },
            RunConfig {
                round_parallelism: 0,
                ..RunConfig::default()
            },
            RunConfig {
                max_rounds: 0,
                ..RunConfig::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(PipelineError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn only_lenient_accumulation_banks_on_the_guiding_test() {
        let mut c = RunConfig::default();
        assert!(!c.banks_on_guiding_only());
        c.phase = Phase::Accumulate;
        assert!(c.banks_on_guiding_only());
        c.accumulate_requires_hidden = true;
        assert!(!c.banks_on_guiding_only());
    }
}
