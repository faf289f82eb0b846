//! Reply parsers. All of them are total: they return `None` instead of
//! guessing when a reply has no recognizable structure.

use std::sync::OnceLock;

use regex::Regex;

fn fence() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)```").unwrap())
}

fn labeled_plan() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(?:#{1,6}\s*)?(?:\*\*)?\s*(?:plan|approach|strategy)\s*#?\s*(\d+)\s*(?:\*\*)?\s*[:.)\-]?\s*(?:\*\*)?\s*(.*)$",
        )
        .unwrap()
    })
}

fn heading_plan() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#{1,6}\s*(\d+)\s*[:.)]?\s*(.*)$").unwrap())
}

fn numbered_item() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+)[.)]\s+(.*)$").unwrap())
}

const CODE_STARTERS: [&str; 6] = ["def ", "class ", "import ", "from ", "async def ", "@"];

/// First fenced block, or the whole reply when it is bare code.
pub fn extract_code(reply: &str) -> Option<String> {
    if let Some(c) = fence().captures(reply) {
        let body = c.get(1).unwrap().as_str();
        let body = body.strip_suffix('\n').unwrap_or(body);
        return (!body.trim().is_empty()).then(|| body.to_string());
    }
    let trimmed = reply.trim();
    CODE_STARTERS
        .iter()
        .any(|s| trimmed.starts_with(s))
        .then(|| trimmed.to_string())
}

/// Split a reply into plan bodies.
///
/// Lines labeled `Plan N` (optionally as a heading or in bold) delimit plans;
/// failing that, `## N` headings; failing that, top-level `N.` list items.
pub fn split_plans(reply: &str) -> Vec<String> {
    for re in [labeled_plan(), heading_plan(), numbered_item()] {
        let sections = sections(reply, re);
        if !sections.is_empty() {
            return sections;
        }
    }
    Vec::new()
}

fn sections(reply: &str, marker: &Regex) -> Vec<String> {
    let mut out: Vec<Vec<&str>> = Vec::new();
    for line in reply.lines() {
        if let Some(c) = marker.captures(line) {
            out.push(vec![c.get(2).map_or("", |m| m.as_str())]);
        } else if let Some(current) = out.last_mut() {
            current.push(line);
        }
    }
    out.into_iter()
        .map(|lines| lines.join("\n").trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// `CAUSES:` / `SUGGESTIONS:` reply, as (causes, suggestions).
pub fn parse_mentor(reply: &str) -> Option<(String, Vec<String>)> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Causes,
        Suggestions,
    }
    let header = |line: &str, name: &str| -> Option<String> {
        let l = line.trim().trim_start_matches('#').trim().trim_matches('*');
        let upper = l.to_ascii_uppercase();
        upper.strip_prefix(name).and_then(|rest| {
            let rest = rest.trim_start_matches('*');
            rest.strip_prefix(':')
                .map(|r| l[l.len() - r.len()..].trim_matches('*').trim().to_string())
        })
    };
    let mut section = Section::None;
    let mut seen_causes = false;
    let mut causes = Vec::new();
    let mut suggestions = Vec::new();
    for line in reply.lines() {
        if let Some(rest) = header(line, "CAUSES") {
            section = Section::Causes;
            seen_causes = true;
            causes.push(rest);
            continue;
        }
        if let Some(rest) = header(line, "SUGGESTIONS") {
            section = Section::Suggestions;
            suggestions.push(rest);
            continue;
        }
        match section {
            Section::Causes => causes.push(line.trim().to_string()),
            Section::Suggestions => suggestions.push(strip_bullet(line).to_string()),
            Section::None => {}
        }
    }
    let suggestions: Vec<String> = suggestions.into_iter().filter(|s| !s.is_empty()).collect();
    if !seen_causes || suggestions.is_empty() {
        return None;
    }
    let causes = causes
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Some((causes, suggestions))
}

fn strip_bullet(line: &str) -> &str {
    let l = line.trim();
    if let Some(rest) = l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")) {
        return rest.trim();
    }
    if let Some(c) = numbered_item().captures(l) {
        return c.get(2).unwrap().as_str().trim();
    }
    l
}
