//! CSV tables and a text summary for one or more methods.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    error_timeseries, mcnemar, pass_at_k, pass_rate, sequences_from_log, transition_matrix, EvalError, McNemar,
    McNemarMethod, OutcomeSequence, PairedOutcomes, SERIES_COLUMNS, STATES,
};
use crate::pipeline::{Provenance, RunLog};

pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 50];
pub const PASS_RATES_FILE: &str = "pass_rates.csv";
pub const MCNEMAR_FILE: &str = "mcnemar.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct Method {
    pub name: String,
    pub log: RunLog,
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub ks: Vec<usize>,
    /// Name of the method every other method is tested against.
    pub reference: String,
    pub smoothing_window: usize,
    pub alpha: f64,
    pub provenance: Option<Provenance>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            reference: String::new(),
            smoothing_window: super::DEFAULT_SMOOTHING_WINDOW,
            alpha: 0.05,
            provenance: None,
        }
    }
}

struct Scored<'a> {
    name: &'a str,
    sequences: Vec<OutcomeSequence>,
    excluded: Vec<String>,
}

fn provenance_line(p: &Option<Provenance>) -> String {
    match p {
        Some(p) => format!(
            "# provenance: config_hash={} code_version={}\n",
            p.config_hash, p.code_version
        ),
        None => String::new(),
    }
}

fn write_csv(path: &Path, header_line: &str, rows: Vec<Vec<String>>) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let body = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
    let mut out = header_line.as_bytes().to_vec();
    out.extend(body);
    fs::write(path, out)?;
    Ok(())
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// Write the report bundle into `out`. Returns the summary text.
pub fn write_report(methods: &[Method], options: &ReportOptions, out: &Path) -> Result<String, EvalError> {
    if methods.is_empty() {
        return Err(EvalError::EmptyResultSet);
    }
    if options.ks.contains(&0) {
        return Err(EvalError::InvalidK);
    }
    let reference = methods
        .iter()
        .position(|m| m.name == options.reference)
        .ok_or_else(|| {
            EvalError::MismatchedProblemSets(format!("reference method `{}` not among inputs", options.reference))
        })?;

    let problem_set =
        |log: &RunLog| -> BTreeSet<String> { log.final_summaries().iter().map(|s| s.problem_id.clone()).collect() };
    let expected = problem_set(&methods[reference].log);
    for m in methods {
        if problem_set(&m.log) != expected {
            return Err(EvalError::MismatchedProblemSets(format!(
                "`{}` and `{}` cover different problems",
                m.name, methods[reference].name
            )));
        }
    }
    let scored = methods
        .iter()
        .map(|m| {
            let (sequences, excluded) = sequences_from_log(&m.log)?;
            Ok(Scored {
                name: &m.name,
                sequences,
                excluded,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    fs::create_dir_all(out)?;
    let header = provenance_line(&options.provenance);

    // McNemar per method and k against the reference.
    let mut tests: Vec<(usize, usize, McNemar)> = Vec::new();
    for (i, s) in scored.iter().enumerate() {
        if i == reference {
            continue;
        }
        for &k in &options.ks {
            tests.push((i, k, mcnemar(&paired(&scored[reference], s, k)?)));
        }
    }
    let test_for = |i: usize, k: usize| tests.iter().find(|(m, kk, _)| *m == i && *kk == k).map(|t| t.2);

    let mut rows = vec![{
        let mut h = vec!["method".to_string(), "problems".into(), "infra_failed".into()];
        for k in &options.ks {
            h.push(format!("pass@{k}"));
            h.push(format!("pass@{k}_sig"));
        }
        h
    }];
    let mut rates = Vec::new();
    for (i, s) in scored.iter().enumerate() {
        let mut row = vec![
            s.name.to_string(),
            s.sequences.len().to_string(),
            s.excluded.len().to_string(),
        ];
        let mut method_rates = Vec::new();
        for &k in &options.ks {
            let rate = if s.sequences.is_empty() {
                None
            } else {
                Some(pass_rate(&s.sequences, k)? / 100.0)
            };
            let star = test_for(i, k).is_some_and(|t| t.significant(options.alpha));
            row.push(rate.map_or(String::new(), f6));
            row.push(if star { "*".into() } else { String::new() });
            method_rates.push((rate, star));
        }
        rates.push(method_rates);
        rows.push(row);
    }
    write_csv(&out.join(PASS_RATES_FILE), &header, rows)?;

    let mut rows = vec![[
        "reference",
        "method",
        "k",
        "b",
        "c",
        "statistic",
        "p_chi_square",
        "p_exact",
        "p_value",
        "test",
        "significant",
    ]
    .map(String::from)
    .to_vec()];
    for (i, k, t) in &tests {
        let test = match t.method {
            McNemarMethod::ChiSquare => "chi_square",
            McNemarMethod::ExactBinomial => "exact_binomial",
            McNemarMethod::Degenerate => "degenerate",
        };
        rows.push(vec![
            scored[reference].name.to_string(),
            scored[*i].name.to_string(),
            k.to_string(),
            t.b.to_string(),
            t.c.to_string(),
            f6(t.statistic),
            f6(t.p_chi_square),
            t.p_exact.map_or(String::new(), f6),
            f6(t.p_value),
            test.into(),
            t.significant(options.alpha).to_string(),
        ]);
    }
    write_csv(&out.join(MCNEMAR_FILE), &header, rows)?;

    let mut rows = vec![["method", "from", "to", "count", "probability", "row_observed"]
        .map(String::from)
        .to_vec()];
    for s in &scored {
        let m = transition_matrix(&s.sequences);
        for (i, from) in STATES.iter().enumerate() {
            for (j, to) in STATES.iter().enumerate() {
                rows.push(vec![
                    s.name.to_string(),
                    from.as_str().into(),
                    to.as_str().into(),
                    m.counts[i][j].to_string(),
                    f6(m.probabilities[i][j]),
                    (!m.empty_rows[i]).to_string(),
                ]);
            }
        }
    }
    write_csv(&out.join(TRANSITIONS_FILE), &header, rows)?;

    let mut rows = vec![["method", "iteration", "state", "raw", "smoothed"]
        .map(String::from)
        .to_vec()];
    for s in &scored {
        for r in error_timeseries(&s.sequences, options.smoothing_window)? {
            for (c, column) in SERIES_COLUMNS.iter().enumerate() {
                rows.push(vec![
                    s.name.to_string(),
                    r.iteration.to_string(),
                    column.to_string(),
                    f6(r.raw[c]),
                    f6(r.smoothed[c]),
                ]);
            }
        }
    }
    write_csv(&out.join(TIMESERIES_FILE), &header, rows)?;

    let summary = summary_text(&scored, reference, &rates, &tests, options);
    fs::write(out.join(SUMMARY_FILE), format!("{header}{summary}"))?;
    Ok(summary)
}

fn paired(a: &Scored, b: &Scored, k: usize) -> Result<PairedOutcomes, EvalError> {
    // Problems excluded from either side cannot be paired.
    let skip: BTreeSet<&String> = a.excluded.iter().chain(&b.excluded).collect();
    let outcomes = |s: &Scored| -> Vec<(String, bool)> {
        s.sequences
            .iter()
            .filter(|q| !skip.contains(&q.problem_id))
            .map(|q| (q.problem_id.clone(), pass_at_k(q, k)))
            .collect()
    };
    PairedOutcomes::new(&outcomes(a), &outcomes(b))
}

fn summary_text(
    scored: &[Scored],
    reference: usize,
    rates: &[Vec<(Option<f64>, bool)>],
    tests: &[(usize, usize, McNemar)],
    options: &ReportOptions,
) -> String {
    let width = scored.iter().map(|s| s.name.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "Passing rates (sequential pass@k, all tests)");
    let _ = write!(out, "{:<width$}  {:>8}  {:>5}", "method", "problems", "infra");
    for k in &options.ks {
        let _ = write!(out, "  {:>9}", format!("pass@{k}"));
    }
    out.push('\n');
    for (s, method_rates) in scored.iter().zip(rates) {
        let _ = write!(
            out,
            "{:<width$}  {:>8}  {:>5}",
            s.name,
            s.sequences.len(),
            s.excluded.len()
        );
        for (rate, star) in method_rates {
            let cell = match rate {
                Some(r) => format!("{:.2}%{}", r * 100.0, if *star { "*" } else { " " }),
                None => "n/a ".into(),
            };
            let _ = write!(out, "  {cell:>9}");
        }
        out.push('\n');
    }
    if !tests.is_empty() {
        let _ = writeln!(
            out,
            "\nMcNemar against {} (* p < {})",
            scored[reference].name, options.alpha
        );
        for (i, k, t) in tests {
            let method = match t.method {
                McNemarMethod::ChiSquare => "chi-square",
                McNemarMethod::ExactBinomial => "exact",
                McNemarMethod::Degenerate => "no discordant pairs",
            };
            let _ = writeln!(
                out,
                "  {:<width$}  k={:<3} b={:<4} c={:<4} statistic={:.4} p={:.4} ({method})",
                scored[*i].name, k, t.b, t.c, t.statistic, t.p_value
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::ErrorType::{self, *};
    use crate::pipeline::{LogEntry, ProblemStatus, ProblemSummary};

    fn log(results: &[(&str, &[ErrorType], bool, bool)]) -> RunLog {
        let entries = results
            .iter()
            .map(|(id, statuses, all, infra)| {
                LogEntry::Problem(ProblemSummary {
                    problem_id: id.to_string(),
                    round: 1,
                    status: if *infra {
                        ProblemStatus::InfraFailed
                    } else if *all {
                        ProblemStatus::Solved
                    } else {
                        ProblemStatus::Unsolved
                    },
                    statuses: statuses.to_vec(),
                    guiding_passed: statuses.last() == Some(&Pass),
                    solved_all_tests: *all,
                    hidden_statuses: vec![],
                    fix_record_id: None,
                    failure: None,
                })
            })
            .collect();
        RunLog { entries }
    }

    fn options(reference: &str) -> ReportOptions {
        ReportOptions {
            reference: reference.into(),
            provenance: Some(Provenance {
                config_hash: "h".into(),
                code_version: "v".into(),
            }),
            ..Default::default()
        }
    }

    #[test]
    fn dominant_method_scores_at_least_as_high() {
        let a = log(&[
            ("p1", &[Pass], true, false),
            ("p2", &[TestError, Pass], true, false),
            ("p3", &[TestFailed], false, false),
        ]);
        let b = log(&[
            ("p1", &[Pass], true, false),
            ("p2", &[TestError, TestError], false, false),
            ("p3", &[TestFailed], false, false),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let methods = [
            Method {
                name: "a".into(),
                log: a,
            },
            Method {
                name: "b".into(),
                log: b,
            },
        ];
        write_report(&methods, &options("a"), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(PASS_RATES_FILE)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# provenance: config_hash=h code_version=v");
        assert!(lines
            .next()
            .unwrap()
            .starts_with("method,problems,infra_failed,pass@1,pass@1_sig"));
        let a_row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let b_row: Vec<&str> = lines.next().unwrap().split(',').collect();
        for col in [3, 5, 7, 9] {
            assert!(a_row[col].parse::<f64>().unwrap() >= b_row[col].parse::<f64>().unwrap());
        }
        for f in [MCNEMAR_FILE, TRANSITIONS_FILE, TIMESERIES_FILE, SUMMARY_FILE] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn identical_logs_are_degenerate() {
        let l = log(&[("p1", &[Pass], true, false), ("p2", &[TestError], false, false)]);
        let dir = tempfile::tempdir().unwrap();
        let methods = [
            Method {
                name: "a".into(),
                log: l.clone(),
            },
            Method {
                name: "b".into(),
                log: l,
            },
        ];
        write_report(&methods, &options("a"), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(MCNEMAR_FILE)).unwrap();
        let rows: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.contains(",0,0,") && r.contains("degenerate")));
    }

    #[test]
    fn three_methods_compare_against_reference() {
        let l = |ok: bool| log(&[("p1", &[if ok { Pass } else { TestFailed }], ok, false)]);
        let dir = tempfile::tempdir().unwrap();
        let methods = [
            Method {
                name: "x".into(),
                log: l(false),
            },
            Method {
                name: "ref".into(),
                log: l(true),
            },
            Method {
                name: "y".into(),
                log: l(true),
            },
        ];
        write_report(&methods, &options("ref"), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(MCNEMAR_FILE)).unwrap();
        let pairs: BTreeSet<(String, String)> = text
            .lines()
            .skip(2)
            .map(|r| {
                let c: Vec<&str> = r.split(',').collect();
                (c[0].to_string(), c[1].to_string())
            })
            .collect();
        assert_eq!(
            pairs,
            BTreeSet::from([("ref".into(), "x".into()), ("ref".into(), "y".into())])
        );
    }

    #[test]
    fn mismatched_corpora_are_rejected() {
        let a = log(&[("p1", &[Pass], true, false)]);
        let b = log(&[("p2", &[Pass], true, false)]);
        let dir = tempfile::tempdir().unwrap();
        let methods = [
            Method {
                name: "a".into(),
                log: a,
            },
            Method {
                name: "b".into(),
                log: b,
            },
        ];
        assert!(matches!(
            write_report(&methods, &options("a"), dir.path()),
            Err(EvalError::MismatchedProblemSets(_))
        ));
        assert!(write_report(&methods, &options("zzz"), dir.path()).is_err());
    }

    #[test]
    fn infra_failures_are_excluded_and_counted() {
        let a = log(&[("p1", &[Pass], true, false), ("p2", &[], false, true)]);
        let dir = tempfile::tempdir().unwrap();
        let summary = write_report(
            &[Method {
                name: "a".into(),
                log: a,
            }],
            &options("a"),
            dir.path(),
        )
        .unwrap();
        assert!(summary.contains("100.00%"));
        let text = fs::read_to_string(dir.path().join(PASS_RATES_FILE)).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("a,1,1,1.000000,"));
    }

    #[test]
    fn report_is_byte_stable() {
        let l = log(&[
            ("p1", &[NotCompiled, TestError, Pass], true, false),
            ("p2", &[Timeout, Timeout], false, false),
        ]);
        let methods = [Method {
            name: "a".into(),
            log: l,
        }];
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_report(&methods, &options("a"), d1.path()).unwrap();
        write_report(&methods, &options("a"), d2.path()).unwrap();
        for f in [
            PASS_RATES_FILE,
            MCNEMAR_FILE,
            TRANSITIONS_FILE,
            TIMESERIES_FILE,
            SUMMARY_FILE,
        ] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap()
            );
        }
    }
}
