mod common;

use std::collections::HashMap;

use common::{fenced, mentor_fixture, run_demo, run_fixture, MentorFixture, GEN, REP};
use memoloop::backend::{ScriptEntry, ScriptMode, ScriptedBackend};
use memoloop::evaluation::{pass_at_k, sequences_from_log};
use memoloop::pipeline::{Action, Phase, ProblemStatus, Termination};
use memoloop::ErrorType;

fn statuses_by_problem(log: &memoloop::pipeline::RunLog) -> HashMap<String, (u32, ProblemStatus, Vec<ErrorType>)> {
    log.final_summaries()
        .into_iter()
        .map(|s| (s.problem_id.clone(), (s.round, s.status, s.statuses.clone())))
        .collect()
}

#[test]
fn demo_run_follows_the_scripted_story() {
    use ErrorType::*;
    let run = run_demo(|_| {});
    let finals = statuses_by_problem(&run.log);
    assert_eq!(finals["custom/add_numbers"], (1, ProblemStatus::Solved, vec![Pass]));
    assert_eq!(
        finals["custom/min_cost"],
        (1, ProblemStatus::Solved, vec![TestError, TestFailed, TestError, Pass])
    );
    assert_eq!(
        finals["custom/count_vowels"],
        (1, ProblemStatus::Solved, vec![NotCompiled, Pass])
    );
    assert_eq!(
        finals["custom/reverse_words"],
        (2, ProblemStatus::Solved, vec![TestError, Pass])
    );
    assert_eq!(finals["custom/is_palindrome"].1, ProblemStatus::Unsolved);

    let end = run.log.end().unwrap();
    assert_eq!(
        (end.reason, end.rounds, end.solved, end.unsolved),
        (Termination::Stagnant, 3, 4, 1)
    );

    let palindrome = run
        .log
        .problems()
        .find(|p| p.problem_id == "custom/is_palindrome")
        .unwrap();
    assert!(palindrome.guiding_passed && !palindrome.solved_all_tests);
    assert_eq!(palindrome.hidden_statuses, vec![TestFailed, TestFailed]);
    assert_eq!(palindrome.fix_record_id, None);

    let records = run.store.records();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0].problem_id, "custom/min_cost");
    assert_eq!(records[0].error_type, TestError);
    assert_eq!(
        records[0].error_message,
        "ValueError: too many values to unpack (expected 2)"
    );
    assert_eq!(records[2].problem_id, "custom/reverse_words");
    assert_eq!(records[2].round_index, 2);
}

#[test]
fn repair_prompt_contains_the_retrieved_fix() {
    let run = run_demo(|_| {});
    let record = &run.store.records()[0];
    let prompt = run
        .transcript
        .iter()
        .map(|r| r.last_user_message())
        .find(|m| m.contains(REP) && m.contains("## Past fixes"))
        .expect("a repair prompt with examples");
    assert!(prompt.contains("# reverse_words v1"));
    assert!(prompt.contains(&record.initial_code));
    assert!(prompt.contains(&record.fixed_code));
    assert!(prompt.contains(&record.error_message));
    assert!(prompt.contains("## Fixing suggestion\n- "));
}

#[test]
fn parallel_rounds_log_identically() {
    let serial = run_demo(|_| {});
    let parallel = run_demo(|c| c.round_parallelism = 4);
    assert_eq!(serial.log.to_jsonl(), parallel.log.to_jsonl());
}

#[test]
fn ablations_change_only_their_component() {
    let no_planner = run_demo(|c| c.ablation.planner = false);
    assert!(no_planner.log.attempts().all(|a| a.plan_index.is_none()));
    // Without plans there is nothing to rotate to, so each round generates once.
    for p in no_planner.log.problems() {
        let generated = no_planner
            .log
            .attempts()
            .filter(|a| a.problem_id == p.problem_id && a.round == p.round && a.action == Action::Generate)
            .count();
        assert_eq!(generated, 1);
    }

    let no_pattern = run_demo(|c| c.ablation.error_pattern = false);
    assert!(no_pattern.log.attempts().all(|a| a.suggestions_version.is_none()));

    let full = run_demo(|_| {});
    assert!(full
        .log
        .attempts()
        .filter(|a| a.action == Action::Repair)
        .all(|a| a.suggestions_version == Some(1)));
    assert!(full.log.attempts().any(|a| a.plan_index.is_some()));
}

#[test]
fn retrieval_waits_for_enough_fixes_of_the_type() {
    let strict = run_demo(|c| c.retrieval_min_fixes = 2);
    assert!(strict.log.attempts().all(|a| a.retrieved_ids.is_empty()));
}

#[test]
fn accumulate_banks_on_guiding_pass() {
    let run = run_demo(|c| c.phase = Phase::Accumulate);
    let finals = statuses_by_problem(&run.log);
    assert_eq!(finals["custom/is_palindrome"].1, ProblemStatus::Solved);
    assert_eq!(run.log.end().unwrap().reason, Termination::NoneRemaining);

    let strict = run_demo(|c| {
        c.phase = Phase::Accumulate;
        c.accumulate_requires_hidden = true;
    });
    assert_eq!(
        statuses_by_problem(&strict.log)["custom/is_palindrome"].1,
        ProblemStatus::Unsolved
    );
}

#[test]
fn mentor_failure_is_logged_and_the_run_goes_on() {
    let run = run_demo(|c| c.mentor_threshold = 1);
    let events: Vec<_> = run.log.mentor_events().collect();
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e.error.is_some() && e.new_version.is_none()));
    assert_eq!(run.log.end().unwrap().solved, 4);
}

fn stuck_with_planner() -> MentorFixture {
    let mut fixture = mentor_fixture(0);
    let code = "def stuck(x):\n    # stuck\n    return x[9]";
    fixture.backend = ScriptedBackend::new(
        vec![
            ScriptEntry::new("high-level plans", "Plan 1: index.\nPlan 2: slice.\nPlan 3: copy."),
            ScriptEntry::all(&[GEN, "stuck("], fenced(code)),
            ScriptEntry::all(&[REP, "# stuck"], fenced(code)),
        ],
        ScriptMode::FirstMatch,
    );
    fixture
}

#[test]
fn fifty_failures_rotate_plans_and_score_false() {
    let fixture = stuck_with_planner();
    let (log, store) = run_fixture(&fixture, |c| {
        c.max_attempts = 50;
        c.ablation.planner = true;
        c.max_rounds = 1;
    });
    let attempts: Vec<_> = log.attempts().collect();
    assert_eq!(attempts.len(), 50);
    let generations: Vec<(u32, Option<u8>)> = attempts
        .iter()
        .filter(|a| a.action == Action::Generate)
        .map(|a| (a.attempt_index, a.plan_index))
        .collect();
    assert_eq!(
        generations,
        vec![(1, Some(1)), (12, Some(2)), (23, Some(3)), (34, Some(1)), (45, Some(2))]
    );
    assert_eq!(log.end().unwrap().rounds, 1);
    let (sequences, excluded) = sequences_from_log(&log).unwrap();
    assert!(excluded.is_empty());
    assert!(!pass_at_k(&sequences[0], 50));
    assert!(store.records().is_empty());
}

#[test]
fn round_two_retrieves_only_earlier_fixes_from_other_problems() {
    let fixture = mentor_fixture(4);
    let (log, store) = run_fixture(&fixture, |_| {});
    let by_id: HashMap<u64, _> = store.records().iter().map(|r| (r.record_id, r)).collect();
    let mut seen = 0;
    for a in log.attempts() {
        if a.round == 1 {
            assert!(a.retrieved_ids.is_empty());
        }
        for id in &a.retrieved_ids {
            let r = by_id[id];
            assert_ne!(r.problem_id, a.problem_id);
            assert!(r.round_index < a.round);
            seen += 1;
        }
    }
    assert!(seen > 0);
    // Equal match lengths fall back to the newest record first.
    let first = log.attempts().find(|a| !a.retrieved_ids.is_empty()).unwrap();
    assert_eq!(first.retrieved_ids, vec![4, 3, 2, 1]);
}

#[test]
fn missing_stub_entry_is_an_infrastructure_failure() {
    let mut fixture = mentor_fixture(2);
    let entries = vec![
        ScriptEntry::all(&[GEN, "f_00("], fenced("def f_00(x):\n    # unknown\n    return x")),
        ScriptEntry::all(&[GEN, "f_01("], "I would rather not."),
        ScriptEntry::new("did not contain a code block", "Still no."),
        ScriptEntry::all(&[GEN, "stuck("], fenced("def stuck(x):\n    # stuck\n    return x[9]")),
        ScriptEntry::all(&[REP, "# stuck"], fenced("def stuck(x):\n    # stuck\n    return x[9]")),
    ];
    fixture.backend = ScriptedBackend::new(entries, ScriptMode::FirstMatch);
    let (log, _) = run_fixture(&fixture, |c| c.max_rounds = 3);
    let finals = statuses_by_problem(&log);
    assert_eq!(finals["custom/f_00"].1, ProblemStatus::InfraFailed);
    assert_eq!(finals["custom/f_01"].1, ProblemStatus::AgentFailed);
    assert_eq!(finals["custom/stuck"].1, ProblemStatus::Unsolved);
    // Infrastructure failures leave the pool; agent failures retry next round.
    assert!(log.problems().filter(|p| p.problem_id == "custom/f_00").count() == 1);
    let (sequences, excluded) = sequences_from_log(&log).unwrap();
    assert_eq!(excluded, vec!["custom/f_00".to_string()]);
    assert_eq!(sequences.len(), 2);
    let end = log.end().unwrap();
    assert_eq!(end.infra_failed, 1);
}
