//! Shallow assertion parsing and Python literal rendering.
//!
//! Only enough of the benchmark language is understood to find the callee of
//! an `assert name(...) == expected` statement. Exotic expressions (callees
//! behind subscripts, lambdas, comprehensions on the left side) are rejected
//! as malformed rather than parsed.

use serde_json::Value;

use super::CorpusError;

/// Builtins that benchmark assertions commonly wrap around the call under
/// test, e.g. `assert set(f(x)) == set(y)` or `assert math.isclose(f(x), y)`.
/// When one of these is the outermost callee, the parser descends into its
/// first argument.
const TRANSPARENT_WRAPPERS: &[&str] = &[
    "abs",
    "all",
    "any",
    "bool",
    "dict",
    "float",
    "frozenset",
    "int",
    "len",
    "list",
    "math.isclose",
    "max",
    "min",
    "repr",
    "reversed",
    "round",
    "set",
    "sorted",
    "str",
    "sum",
    "tuple",
];

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Ident(&'a str),
    Punct(char),
    Other,
}

fn tokens(src: &str) -> Vec<Token<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push(Token::Ident(&src[start..i]));
        } else if b"()[]{},=".contains(&c) {
            out.push(Token::Punct(c as char));
            i += 1;
        } else {
            out.push(Token::Other);
            // Skip one full UTF-8 scalar.
            i += src[i..].chars().next().map_or(1, char::len_utf8);
        }
    }
    out
}

/// Callee identifier of the call under test in an assertion.
///
/// `assert min_cost([[1, 2, 3]], 2, 2) == 8` yields `min_cost`. A leading
/// `not` and redundant parentheses are skipped; see [`TRANSPARENT_WRAPPERS`].
pub fn extract_function_name(assertion: &str) -> Result<String, CorpusError> {
    let malformed = || CorpusError::MalformedAssertion(assertion.to_string());
    let toks = tokens(assertion.trim());
    let mut pos = match toks.first() {
        Some(Token::Ident("assert")) => 1,
        _ => return Err(malformed()),
    };
    loop {
        match toks.get(pos) {
            Some(Token::Ident("not")) | Some(Token::Punct('(')) => pos += 1,
            Some(Token::Ident(name)) if toks.get(pos + 1) == Some(&Token::Punct('(')) => {
                if TRANSPARENT_WRAPPERS.contains(name) {
                    pos += 2;
                    continue;
                }
                if is_keyword(name) {
                    return Err(malformed());
                }
                return Ok((*name).to_string());
            }
            _ => return Err(malformed()),
        }
    }
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "lambda" | "and" | "or" | "in" | "is" | "if" | "else" | "for" | "None" | "True" | "False"
    )
}

/// Whether `name` is called somewhere in `assertion` (identifier-bounded).
pub fn calls_function(assertion: &str, name: &str) -> bool {
    tokens(assertion)
        .windows(2)
        .any(|w| w[0] == Token::Ident(name) && w[1] == Token::Punct('('))
}

/// Render a JSON value as a Python literal: `null` becomes `None`, booleans
/// are capitalised and containers use Python's `repr` spacing.
pub fn python_literal(value: &Value) -> String {
    let mut out = String::new();
    write_literal(value, &mut out);
    out
}

fn write_literal(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("None"),
        Value::Bool(true) => out.push_str("True"),
        Value::Bool(false) => out.push_str("False"),
        Value::Number(n) => out.push_str(&n.to_string()),
        // JSON string escapes are a subset of Python's.
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_literal(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_literal(v, out);
            }
            out.push('}');
        }
    }
}

/// Wrap one input/output pair as `assert name(args) == expected`.
///
/// An array input is spread as the positional argument list; any other input
/// is passed as the single argument.
pub fn wrap_pair(name: &str, input: &Value, output: &Value) -> String {
    let args = match input {
        Value::Array(items) => items.iter().map(python_literal).collect::<Vec<_>>().join(", "),
        other => python_literal(other),
    };
    format!("assert {name}({args}) == {}", python_literal(output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_outermost_callee() {
        assert_eq!(
            extract_function_name("assert min_cost([[1, 2, 3], [4, 8, 2], [1, 5, 3]], 2, 2) == 8").unwrap(),
            "min_cost"
        );
        assert_eq!(extract_function_name("assert f(x) == y").unwrap(), "f");
        assert_eq!(extract_function_name("  assert   not is_prime(4)").unwrap(), "is_prime");
        assert_eq!(extract_function_name("assert (f(1)) == 2").unwrap(), "f");
    }

    #[test]
    fn descends_through_wrappers() {
        assert_eq!(
            extract_function_name("assert set(similar_elements((3, 4, 5, 6),(5, 7, 4, 10))) == set((4, 5))").unwrap(),
            "similar_elements"
        );
        assert_eq!(
            extract_function_name("assert math.isclose(area(2), 12.5, rel_tol=0.001)").unwrap(),
            "area"
        );
    }

    #[test]
    fn rejects_assertions_without_call() {
        for bad in [
            "assert 1 == 1",
            "f(1) == 2",
            "assert",
            "assert x == f(1)",
            "assert lambda(x)",
        ] {
            assert!(
                matches!(extract_function_name(bad), Err(CorpusError::MalformedAssertion(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn calls_function_respects_identifier_bounds() {
        assert!(calls_function("assert set(f(1)) == {1}", "f"));
        assert!(!calls_function("assert ff(1) == 1", "f"));
        assert!(!calls_function("assert f == 1", "f"));
    }

    #[test]
    fn python_literals() {
        assert_eq!(python_literal(&json!(null)), "None");
        assert_eq!(python_literal(&json!([true, false])), "[True, False]");
        assert_eq!(python_literal(&json!("a\"b\n")), r#""a\"b\n""#);
        assert_eq!(python_literal(&json!({"k": [1, 2.5]})), r#"{"k": [1, 2.5]}"#);
    }

    #[test]
    fn wraps_min_cost_pair() {
        let input = json!([[[1, 2, 3], [4, 8, 2], [1, 5, 3]], 2, 2]);
        assert_eq!(
            wrap_pair("min_cost", &input, &json!(8)),
            "assert min_cost([[1, 2, 3], [4, 8, 2], [1, 5, 3]], 2, 2) == 8"
        );
        assert_eq!(wrap_pair("f", &json!("x"), &json!("y")), r#"assert f("x") == "y""#);
    }
}
