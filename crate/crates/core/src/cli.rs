//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 domain error (bad corpus, corrupt store,
//! mismatched logs), 2 infrastructure error (I/O, backend, sandbox), 64 usage
//! error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::agents::{Agents, ModelSettings, Templates};
use crate::backend::{ChatBackend, HttpBackend, HttpConfig, ScriptedBackend};
use crate::config::{AppConfig, BackendKind, SandboxKind};
use crate::corpus::{ingest_file, read_corpus, write_corpus, CorpusError, Source};
use crate::evaluation::{self, write_report, Method, ReportOptions};
use crate::executor::{ErrorType, ProcessSandbox, Sandbox, StubSandbox};
use crate::knowledge::{default_seed_suggestions, KnowledgeError, KnowledgeStore};
use crate::pipeline::{LogEntry, Phase, Pipeline, PipelineError, ProblemStatus, Provenance, RunLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_INFRA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RUN_LOG_FILE: &str = "run_log.jsonl";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Parser)]
#[command(
    name = "memoloop",
    version,
    about = "Multi-agent code generation and repair with a fix memory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a benchmark file into a canonical corpus.
    Ingest(IngestArgs),
    /// Populate a knowledge store from a training corpus.
    Accumulate(RunArgs),
    /// Run the pipeline on an evaluation corpus.
    Evaluate(RunArgs),
    /// Build pass@k, McNemar, transition and time-series tables from run logs.
    Analyze(AnalyzeArgs),
    /// Look into a knowledge store.
    #[command(subcommand)]
    Knowledge(KnowledgeCommand),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub source: Source,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for run_log.jsonl (accumulate defaults to the store).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_planner: bool,
    #[arg(long)]
    pub no_rag: bool,
    #[arg(long)]
    pub no_error_pattern: bool,
    #[arg(long, value_name = "N")]
    pub max_attempts: Option<u32>,
    #[arg(long, value_name = "N")]
    pub rounds: Option<u32>,
    #[arg(long, value_name = "N")]
    pub parallelism: Option<usize>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Scripted backend transcript (JSONL).
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sandbox: Option<SandboxKind>,
    /// Stub sandbox reports (JSONL).
    #[arg(long)]
    pub stub_script: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run logs, as `path` or `name=path`.
    #[arg(long, num_args = 1.., required = true)]
    pub logs: Vec<String>,
    /// Method every other method is compared against (default: the first).
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = evaluation::DEFAULT_KS)]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = evaluation::DEFAULT_SMOOTHING_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Subcommand)]
pub enum KnowledgeCommand {
    /// Print fix records and the suggestion registry.
    Inspect {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        error_type: Option<ErrorType>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Per-error-type counts.
    Stats {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Infra(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Infra(_) => EXIT_INFRA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Infra(m) => m,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => CliError::Domain(e.to_string()),
            CorpusError::Io(_) => CliError::Infra(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<KnowledgeError> for CliError {
    fn from(e: KnowledgeError) -> Self {
        match e {
            KnowledgeError::Storage(_) => CliError::Infra(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Knowledge(k) => k.into(),
            PipelineError::Config(m) => CliError::Domain(m),
        }
    }
}

impl From<evaluation::EvalError> for CliError {
    fn from(e: evaluation::EvalError) -> Self {
        use evaluation::EvalError::*;
        match e {
            Io(_) | Csv(_) => CliError::Infra(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn io_err(context: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| {
        let message = format!("{}: {e}", context.display());
        // A missing input is the caller's mistake, not a broken machine.
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Domain(message)
        } else {
            CliError::Infra(message)
        }
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn,memoloop=info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(args) => ingest(args),
        Command::Accumulate(args) => run_pipeline(args, Phase::Accumulate),
        Command::Evaluate(args) => run_pipeline(args, Phase::Evaluate),
        Command::Analyze(args) => analyze(args),
        Command::Knowledge(cmd) => knowledge(cmd),
    }
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let report = ingest_file(&args.input, args.source)?;
    for s in &report.skipped {
        tracing::warn!(index = s.index, id = s.id.as_deref().unwrap_or("?"), reason = %s.reason, "skipped record");
    }
    if report.problems.is_empty() {
        return Err(CliError::Domain(format!(
            "no usable records in {} ({} skipped)",
            args.input.display(),
            report.skipped.len()
        )));
    }
    write_corpus(&args.out, &report.problems)?;
    println!(
        "ingested {} problems into {} ({} skipped)",
        report.problems.len(),
        args.out.display(),
        report.skipped.len()
    );
    Ok(())
}

/// Config file (if any) with flags applied on top.
pub fn effective_config(args: &RunArgs, phase: Phase) -> Result<AppConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => AppConfig::load(path).map_err(|e| CliError::Domain(e.to_string()))?,
        None => AppConfig::default(),
    };
    config.pipeline.phase = phase;
    let p = &mut config.pipeline;
    if args.no_planner {
        p.ablation.planner = false;
    }
    if args.no_rag {
        p.ablation.rag = false;
    }
    if args.no_error_pattern {
        p.ablation.error_pattern = false;
    }
    if let Some(n) = args.max_attempts {
        p.max_attempts = n;
    }
    if let Some(n) = args.rounds {
        p.max_rounds = n;
    }
    if let Some(n) = args.parallelism {
        p.round_parallelism = n;
    }
    let b = &mut config.backend;
    if let Some(kind) = args.backend {
        b.kind = kind;
    }
    if let Some(s) = &args.script {
        b.script = Some(s.clone());
    }
    if let Some(m) = &args.model {
        b.model = m.clone();
    }
    if let Some(u) = &args.base_url {
        b.base_url = u.clone();
    }
    if let Some(t) = &args.templates {
        b.templates_dir = Some(t.clone());
    }
    if let Some(kind) = args.sandbox {
        config.sandbox.kind = kind;
    }
    if let Some(s) = &args.stub_script {
        config.sandbox.stub_script = Some(s.clone());
    }
    let paths = &mut config.paths;
    if let Some(c) = &args.corpus {
        paths.corpus = Some(c.clone());
    }
    if let Some(s) = &args.store {
        paths.store = Some(s.clone());
    }
    if let Some(o) = &args.out {
        paths.out = Some(o.clone());
    }
    Ok(config)
}

fn build_backend(config: &AppConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    let b = &config.backend;
    Ok(match b.kind {
        BackendKind::Scripted => {
            let script = b
                .script
                .as_ref()
                .ok_or_else(|| CliError::Usage("--backend scripted needs --script".into()))?;
            Box::new(ScriptedBackend::from_jsonl(script, b.script_mode).map_err(|e| CliError::Domain(e.to_string()))?)
        }
        BackendKind::Http => {
            let mut http = HttpConfig::from_env(b.base_url.clone());
            http.max_attempts = b.max_attempts;
            http.requests_per_minute = b.requests_per_minute;
            Box::new(HttpBackend::new(http))
        }
    })
}

fn build_sandbox(config: &AppConfig) -> Result<Box<dyn Sandbox>, CliError> {
    let s = &config.sandbox;
    Ok(match s.kind {
        SandboxKind::Stub => {
            let script = s
                .stub_script
                .as_ref()
                .ok_or_else(|| CliError::Usage("--sandbox stub needs --stub-script".into()))?;
            Box::new(StubSandbox::from_jsonl(script).map_err(|e| CliError::Domain(e.to_string()))?)
        }
        SandboxKind::Process => {
            let pool = s.pool_size.unwrap_or(config.pipeline.round_parallelism);
            Box::new(ProcessSandbox::new(pool))
        }
    })
}

fn open_store(path: &Path) -> Result<KnowledgeStore, CliError> {
    if !path.exists() {
        tracing::warn!(store = %path.display(), "knowledge store does not exist, starting empty");
    }
    Ok(KnowledgeStore::open(path, &default_seed_suggestions())?)
}

fn write_provenance(
    dir: &Path,
    command: &str,
    provenance: &Provenance,
    seed: u64,
    started: chrono::DateTime<Utc>,
) -> Result<(), CliError> {
    let doc = json!({
        "command": command,
        "config_hash": provenance.config_hash,
        "code_version": provenance.code_version,
        "seed": seed,
        "started_at": started.to_rfc3339(),
        "finished_at": Utc::now().to_rfc3339(),
    });
    let path = dir.join(PROVENANCE_FILE);
    fs::write(&path, format!("{:#}\n", doc)).map_err(io_err(&path))
}

fn run_pipeline(args: RunArgs, phase: Phase) -> Result<(), CliError> {
    let started = Utc::now();
    let config = effective_config(&args, phase)?;
    let command = match phase {
        Phase::Accumulate => "accumulate",
        Phase::Evaluate => "evaluate",
    };
    let corpus_path = config
        .paths
        .corpus
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{command} needs --corpus")))?;
    let store_path = config
        .paths
        .store
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{command} needs --store")))?;
    let out = match (&config.paths.out, phase) {
        (Some(o), _) => o.clone(),
        (None, Phase::Accumulate) => store_path.clone(),
        (None, Phase::Evaluate) => return Err(CliError::Usage("evaluate needs --out".into())),
    };

    if !corpus_path.is_file() {
        return Err(CliError::Domain(format!("corpus not found: {}", corpus_path.display())));
    }
    let corpus = read_corpus(&corpus_path)?;
    let backend = build_backend(&config)?;
    let sandbox = build_sandbox(&config)?;
    let templates = match &config.backend.templates_dir {
        Some(dir) => Templates::load_dir(dir).map_err(|e| CliError::Domain(e.to_string()))?,
        None => Templates::default(),
    };
    let settings = ModelSettings {
        model: config.backend.model.clone(),
        temperature: config.backend.temperature,
        max_tokens: config.backend.max_tokens,
    };
    let agents =
        Agents::new(backend, settings, templates).with_mentor_min_fixes(config.pipeline.mentor_threshold as usize);
    let pipeline = Pipeline::new(
        &agents,
        &*sandbox,
        config.sandbox.sandbox_config(config.pipeline.timeout_ms),
        config.pipeline.clone(),
    )?;
    let mut store = open_store(&store_path)?;

    let run_log = pipeline.run_rounds(&corpus, &mut store)?;
    let provenance = Provenance {
        config_hash: config.config_hash(),
        code_version: CODE_VERSION.to_string(),
    };
    let mut log = RunLog {
        entries: vec![LogEntry::Provenance(provenance.clone())],
    };
    log.entries.extend(run_log.entries);

    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let log_path = out.join(RUN_LOG_FILE);
    log.write(&log_path).map_err(io_err(&log_path))?;
    write_provenance(&out, command, &provenance, config.seed, started)?;

    let finals = log.final_summaries();
    let infra = finals.iter().filter(|s| s.status == ProblemStatus::InfraFailed).count();
    let solved = finals.iter().filter(|s| s.status == ProblemStatus::Solved).count();
    if let Some(end) = log.end() {
        println!(
            "{command}: {} problems, {solved} solved, {infra} infrastructure failures, {} rounds ({:?})",
            finals.len(),
            end.rounds,
            end.reason
        );
    }
    if phase == Phase::Evaluate {
        let (sequences, _) = evaluation::sequences_from_log(&log)?;
        if !sequences.is_empty() {
            for k in evaluation::DEFAULT_KS {
                println!("  pass@{k}: {:.2}%", evaluation::pass_rate(&sequences, k)?);
            }
        }
    } else {
        print_stats(&store, false);
    }
    println!("run log: {}", log_path.display());
    if !finals.is_empty() && infra == finals.len() {
        return Err(CliError::Infra("every problem failed on infrastructure errors".into()));
    }
    Ok(())
}

fn parse_log_arg(arg: &str) -> (String, PathBuf) {
    if let Some((name, path)) = arg.split_once('=') {
        if !name.is_empty() && !name.contains('/') {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(arg);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = if stem == "run_log" {
        path.parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(stem)
    } else {
        stem
    };
    (name, path)
}

fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let started = Utc::now();
    let mut methods = Vec::new();
    let mut hasher = Sha256::new();
    for arg in &args.logs {
        let (name, path) = parse_log_arg(arg);
        if methods.iter().any(|m: &Method| m.name == name) {
            return Err(CliError::Usage(format!(
                "duplicate method name `{name}`; use name=path"
            )));
        }
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        hasher.update(name.as_bytes());
        hasher.update(Sha256::digest(&bytes));
        let log = RunLog::parse(&String::from_utf8_lossy(&bytes))
            .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
        methods.push(Method { name, log });
    }
    let reference = args.reference.clone().unwrap_or_else(|| methods[0].name.clone());
    hasher.update(format!("{reference}|{:?}|{}", args.k, args.window).as_bytes());
    let provenance = Provenance {
        config_hash: hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect(),
        code_version: CODE_VERSION.to_string(),
    };
    let options = ReportOptions {
        ks: args.k.clone(),
        reference,
        smoothing_window: args.window,
        alpha: 0.05,
        provenance: Some(provenance.clone()),
    };
    let summary = write_report(&methods, &options, &args.out)?;
    write_provenance(&args.out, "analyze", &provenance, 0, started)?;
    print!("{summary}");
    Ok(())
}

fn print_stats(store: &KnowledgeStore, as_json: bool) {
    let stats = store.stats();
    if as_json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        return;
    }
    println!("fixes: {}", stats.total_fixes);
    println!("{:<14} {:>6} {:>8} {:>7}", "error_type", "fixes", "version", "pending");
    for t in ErrorType::FAILURES {
        println!(
            "{:<14} {:>6} {:>8} {:>7}",
            t.as_str(),
            stats.fixes_by_type.get(&t).copied().unwrap_or(0),
            stats.registry_versions.get(&t).copied().unwrap_or(0),
            stats.fixes_since_update.get(&t).copied().unwrap_or(0),
        );
    }
}

fn knowledge(cmd: KnowledgeCommand) -> Result<(), CliError> {
    let store_path = match &cmd {
        KnowledgeCommand::Inspect { store, .. } | KnowledgeCommand::Stats { store, .. } => store.clone(),
    };
    if !store_path.is_dir() {
        return Err(CliError::Domain(format!(
            "no knowledge store at {}",
            store_path.display()
        )));
    }
    let store = KnowledgeStore::open(&store_path, &default_seed_suggestions())?;
    match cmd {
        KnowledgeCommand::Stats { json, .. } => print_stats(&store, json),
        KnowledgeCommand::Inspect {
            error_type,
            problem,
            limit,
            ..
        } => {
            for (t, entry) in store.registry().entries() {
                println!(
                    "{}",
                    json!({"registry": t, "version": entry.version, "fixes_since_update": entry.fixes_since_update, "suggestions": entry.suggestions})
                );
            }
            let records = store
                .records()
                .iter()
                .filter(|r| error_type.is_none_or(|t| r.error_type == t))
                .filter(|r| problem.as_deref().is_none_or(|p| r.problem_id == p))
                .take(limit.unwrap_or(usize::MAX));
            for r in records {
                println!("{}", serde_json::to_string(r).expect("records serialize"));
            }
        }
    }
    Ok(())
}
