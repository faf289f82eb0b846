//! Normalization of native benchmark layouts into [`Problem`]s.
//!
//! Field names are looked up leniently across the layouts of the supported
//! sources (MBPP `test_list`, HumanEval `test` + `entry_point`, APPS
//! `input_output`, LiveCodeBench `public_test_cases`, plus a generic
//! `inputs`/`outputs` or `pairs` form). Records that cannot be wrapped into
//! call-form assertions are skipped and reported, never guessed.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use super::{
    assertion::{extract_function_name, wrap_pair},
    CorpusError, Problem, RawRecord, Source,
};

const ID_KEYS: &[&str] = &["id", "task_id", "problem_id", "question_id"];
const DESCRIPTION_KEYS: &[&str] = &["description", "text", "prompt", "question", "question_content"];
const NAME_KEYS: &[&str] = &["function_name", "fn_name", "entry_point", "func_name"];
const ASSERTION_KEYS: &[&str] = &["assertions", "test_list"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub problems: Vec<Problem>,
    pub skipped: Vec<SkippedRecord>,
}

fn as_object(payload: &Value) -> Result<&Map<String, Value>, CorpusError> {
    payload
        .as_object()
        .ok_or_else(|| CorpusError::MissingField("record object".into()))
}

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k)).filter(|v| !v.is_null())
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Values that some datasets store as JSON encoded inside a string.
fn maybe_embedded_json(value: &Value) -> Option<Value> {
    match value {
        Value::String(s) => serde_json::from_str(s).ok(),
        Value::Null => None,
        other => Some(other.clone()),
    }
}

fn native_id(obj: &Map<String, Value>) -> Result<String, CorpusError> {
    let raw = lookup(obj, ID_KEYS)
        .and_then(scalar_string)
        .ok_or_else(|| CorpusError::MissingField("id".into()))?;
    // "HumanEval/0" and an already-prefixed "mbpp/11" both reduce to the tail.
    Ok(raw.rsplit('/').next().unwrap_or(&raw).to_string())
}

fn declared_function_name(obj: &Map<String, Value>) -> Option<String> {
    if let Some(name) = lookup(obj, NAME_KEYS).and_then(scalar_string) {
        return Some(name);
    }
    for nested in ["metadata", "input_output"] {
        if let Some(Value::Object(inner)) = obj.get(nested).and_then(maybe_embedded_json) {
            if let Some(name) = lookup(&inner, NAME_KEYS).and_then(scalar_string) {
                return Some(name);
            }
        }
    }
    None
}

fn ready_assertions(obj: &Map<String, Value>) -> Option<Vec<String>> {
    let list = lookup(obj, ASSERTION_KEYS)?.as_array()?;
    Some(
        list.iter()
            .filter_map(Value::as_str)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

/// Single-line `assert` statements from a HumanEval-style `check(candidate)`
/// body, with `candidate` renamed to the entry point.
fn check_body_assertions(test: &str, entry_point: &str) -> Vec<String> {
    let candidate = regex::Regex::new(r"\bcandidate\b").expect("static regex");
    test.lines()
        .map(str::trim)
        .filter(|l| l.starts_with("assert ") && l.contains("candidate("))
        .filter(|l| balanced(l))
        .map(|l| candidate.replace_all(l, entry_point).into_owned())
        .collect()
}

fn balanced(line: &str) -> bool {
    let mut depth: i32 = 0;
    for c in line.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return false;
        }
    }
    depth == 0 && !line.ends_with('\\')
}

/// Input/output pairs in any of the supported layouts.
fn io_pairs(obj: &Map<String, Value>, name: &str) -> Result<Option<Vec<String>>, CorpusError> {
    // Generic and APPS: {"inputs": [...], "outputs": [...]}, possibly nested
    // in an `input_output` JSON string.
    let io_source = match obj.get("input_output").and_then(maybe_embedded_json) {
        Some(Value::Object(inner)) => Some(inner),
        _ => None,
    };
    let container = io_source.as_ref().unwrap_or(obj);
    if let (Some(Value::Array(inputs)), Some(Value::Array(outputs))) =
        (container.get("inputs"), container.get("outputs"))
    {
        if inputs.len() != outputs.len() {
            return Err(CorpusError::MalformedAssertion(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        return Ok(Some(
            inputs.iter().zip(outputs).map(|(x, y)| wrap_pair(name, x, y)).collect(),
        ));
    }
    if let Some(Value::Array(pairs)) = obj.get("pairs") {
        let mut out = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let (x, y) = match pair {
                Value::Array(xy) if xy.len() == 2 => (&xy[0], &xy[1]),
                Value::Object(o) => match (o.get("input"), o.get("output")) {
                    (Some(x), Some(y)) => (x, y),
                    _ => return Err(CorpusError::MissingField("pairs[].input/output".into())),
                },
                _ => return Err(CorpusError::MissingField("pairs[].input/output".into())),
            };
            out.push(wrap_pair(name, x, y));
        }
        return Ok(Some(out));
    }
    if let Some(cases) = obj.get("public_test_cases").and_then(maybe_embedded_json) {
        return lcb_assertions(&cases, name).map(Some);
    }
    Ok(None)
}

/// LiveCodeBench functional cases hold newline-separated argument literals.
fn lcb_assertions(cases: &Value, name: &str) -> Result<Vec<String>, CorpusError> {
    let cases = cases
        .as_array()
        .ok_or_else(|| CorpusError::MissingField("public_test_cases".into()))?;
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let testtype = case.get("testtype").and_then(Value::as_str).unwrap_or("functional");
        if testtype != "functional" {
            return Err(CorpusError::MalformedAssertion(format!(
                "`{testtype}` test cases cannot be wrapped as call assertions"
            )));
        }
        let input = case.get("input").and_then(Value::as_str).unwrap_or_default();
        let output = case.get("output").and_then(Value::as_str).unwrap_or_default();
        let args: Vec<&str> = input.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        out.push(format!("assert {name}({}) == {}", args.join(", "), output.trim()));
    }
    Ok(out)
}

/// Normalize one raw record into a canonical problem.
pub fn normalize_record(raw: &RawRecord) -> Result<Problem, CorpusError> {
    let obj = as_object(&raw.payload)?;
    let id = format!("{}/{}", raw.source, native_id(obj)?);
    let description = lookup(obj, DESCRIPTION_KEYS)
        .and_then(scalar_string)
        .ok_or_else(|| CorpusError::MissingField("description".into()))?;

    let declared = declared_function_name(obj);
    let mut assertions = ready_assertions(obj).unwrap_or_default();
    if assertions.is_empty() {
        if let (Some(test), Some(name)) = (obj.get("test").and_then(Value::as_str), &declared) {
            assertions = check_body_assertions(test, name);
        }
    }

    let function_name = match (&declared, assertions.first()) {
        (Some(name), _) => name.clone(),
        (None, Some(first)) => extract_function_name(first)?,
        (None, None) => return Err(CorpusError::MissingField("function_name".into())),
    };

    if assertions.is_empty() {
        assertions = io_pairs(obj, &function_name)?.unwrap_or_default();
    }
    if assertions.len() < super::MIN_ASSERTIONS {
        return Err(CorpusError::TooFewTests {
            found: assertions.len(),
        });
    }
    Problem::new(id, description.trim(), function_name, assertions, raw.source)
}

/// Read a dataset file as either a JSON array of records or JSONL.
pub fn read_raw_records(path: &Path, source: Source) -> Result<Vec<RawRecord>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, e: serde_json::Error| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    };
    let payloads: Vec<Value> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| parse_err(e.line(), e))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(i + 1, e)))
            .collect::<Result<_, _>>()?
    };
    Ok(payloads
        .into_iter()
        .map(|payload| RawRecord { source, payload })
        .collect())
}

/// Normalize a whole dataset file. Failing records are skipped and listed.
pub fn ingest_file(path: &Path, source: Source) -> Result<IngestReport, CorpusError> {
    let records = read_raw_records(path, source)?;
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for (index, raw) in records.iter().enumerate() {
        let id = as_object(&raw.payload)
            .ok()
            .and_then(|o| native_id(o).ok())
            .map(|n| format!("{source}/{n}"));
        match normalize_record(raw) {
            Ok(problem) if !seen.insert(problem.id.clone()) => report.skipped.push(SkippedRecord {
                index,
                id,
                reason: CorpusError::DuplicateId(problem.id).to_string(),
            }),
            Ok(problem) => report.problems.push(problem),
            Err(e) => report.skipped.push(SkippedRecord {
                index,
                id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}
