#![allow(dead_code)]

use std::path::{Path, PathBuf};

use memoloop::agents::{Agents, ModelSettings, Templates};
use memoloop::backend::{ChatRequest, ScriptEntry, ScriptMode, ScriptedBackend};
use memoloop::config::AppConfig;
use memoloop::corpus::{read_corpus, Problem, Source};
use memoloop::executor::{ExceptionKind, Stage, StubEntry, StubOutcome, StubSandbox, WorkerReport};
use memoloop::knowledge::{default_seed_suggestions, KnowledgeStore};
use memoloop::pipeline::{Pipeline, RunConfig, RunLog};
use memoloop::SandboxConfig;

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn demo_config() -> AppConfig {
    AppConfig::load(&demo_dir().join("config.toml")).expect("demo config loads")
}

pub fn demo_corpus() -> Vec<Problem> {
    read_corpus(&demo_dir().join("corpus.jsonl")).expect("demo corpus loads")
}

pub struct DemoRun {
    pub log: RunLog,
    pub transcript: Vec<ChatRequest>,
    pub store: KnowledgeStore,
}

/// Run the demo in-process with `tweak` applied to the pipeline settings.
pub fn run_demo(tweak: impl FnOnce(&mut RunConfig)) -> DemoRun {
    let config = demo_config();
    let mut run_config = config.pipeline.clone();
    tweak(&mut run_config);
    let backend = ScriptedBackend::from_jsonl(&demo_dir().join("script.jsonl"), ScriptMode::FirstMatch)
        .expect("demo script loads");
    let sandbox = StubSandbox::from_jsonl(&demo_dir().join("stub_reports.jsonl")).expect("stub loads");
    let settings = ModelSettings {
        model: config.backend.model.clone(),
        ..ModelSettings::default()
    };
    let agents = Agents::new(&backend, settings, Templates::default())
        .with_mentor_min_fixes(run_config.mentor_threshold as usize);
    let sandbox_config = config.sandbox.sandbox_config(run_config.timeout_ms);
    let pipeline = Pipeline::new(&agents, &sandbox, sandbox_config, run_config).expect("valid config");
    let mut store = KnowledgeStore::in_memory(&default_seed_suggestions());
    let log = pipeline.run_rounds(&demo_corpus(), &mut store).expect("run completes");
    DemoRun {
        log,
        transcript: backend.transcript(),
        store,
    }
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_memoloop")
}

pub const GEN: &str = "Write a Python function that solves";
pub const REP: &str = "The code below does not pass its test";
pub const MENTOR: &str = "fixing suggestions for programs";

pub fn fenced(code: &str) -> String {
    format!("```python\n{code}\n```")
}

fn index_error() -> StubOutcome {
    StubOutcome::Report(WorkerReport {
        stage: Stage::Run,
        ok: false,
        exception_kind: Some(ExceptionKind::Other),
        error_message: "IndexError: list index out of range".into(),
        traceback: String::new(),
        duration_ms: 1,
    })
}

/// `solvable` problems that each need one repair of a test_error, plus one
/// problem `stuck` that never passes. All fixes are of type test_error.
pub struct MentorFixture {
    pub corpus: Vec<Problem>,
    pub backend: ScriptedBackend,
    pub sandbox: StubSandbox,
}

pub fn mentor_fixture(solvable: usize) -> MentorFixture {
    let mut corpus = Vec::new();
    let mut stub = Vec::new();
    let stuck_code = "def stuck(x):\n    # stuck\n    return x[9]";
    let mut script = vec![
        ScriptEntry::all(&[GEN, "stuck("], fenced(stuck_code)),
        ScriptEntry::all(&[REP, "# stuck"], fenced(stuck_code)),
        ScriptEntry::new(
            MENTOR,
            "CAUSES:\nIndexing past the end of short inputs.\nSUGGESTIONS:\n- Check the sequence length before indexing.\n- Prefer iteration over positional access.",
        ),
    ];
    stub.push(StubEntry::for_code(stuck_code, index_error()));
    corpus.push(
        Problem::new(
            "custom/stuck",
            "Write a function stuck(x) that returns x.",
            "stuck",
            (1..=3).map(|i| format!("assert stuck([{i}]) == [{i}]")).collect(),
            Source::Custom,
        )
        .unwrap(),
    );
    for i in 0..solvable {
        let name = format!("f_{i:02}");
        let broken = format!("def {name}(x):\n    # {name} v1\n    return x[5]");
        let fixed = format!("def {name}(x):\n    # {name} v2\n    return x");
        script.push(ScriptEntry::all(&[GEN, &format!("{name}(")], fenced(&broken)));
        script.push(ScriptEntry::all(&[REP, &format!("# {name} v1")], fenced(&fixed)));
        stub.push(StubEntry::for_code(&broken, index_error()));
        stub.push(StubEntry::for_code(&fixed, StubOutcome::Report(WorkerReport::pass(1))));
        corpus.push(
            Problem::new(
                format!("custom/{name}"),
                format!("Write a function {name}(x) that returns x unchanged."),
                name.clone(),
                (1..=3).map(|k| format!("assert {name}([{k}]) == [{k}]")).collect(),
                Source::Custom,
            )
            .unwrap(),
        );
    }
    MentorFixture {
        corpus,
        backend: ScriptedBackend::new(script, ScriptMode::FirstMatch),
        sandbox: StubSandbox::new(stub).unwrap(),
    }
}

/// Run a fixture with the planner off and retrieval allowed from one fix.
pub fn run_fixture(fixture: &MentorFixture, tweak: impl FnOnce(&mut RunConfig)) -> (RunLog, KnowledgeStore) {
    let mut config = RunConfig {
        max_attempts: 3,
        retrieval_min_fixes: 1,
        ..RunConfig::default()
    };
    config.ablation.planner = false;
    tweak(&mut config);
    let agents = Agents::new(&fixture.backend, ModelSettings::default(), Templates::default())
        .with_mentor_min_fixes(config.mentor_threshold as usize);
    let pipeline = Pipeline::new(&agents, &fixture.sandbox, SandboxConfig::default(), config).unwrap();
    let mut store = KnowledgeStore::in_memory(&default_seed_suggestions());
    let log = pipeline.run_rounds(&fixture.corpus, &mut store).unwrap();
    (log, store)
}
