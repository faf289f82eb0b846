use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::AgentError;

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").unwrap())
}

/// Names of all template files and the placeholders each must contain.
const SPECS: [(&str, &[&str]); 12] = [
    ("system", &[]),
    ("plan", &["description", "guiding_assertion"]),
    ("plan_section", &["steps"]),
    ("generate", &["description", "guiding_assertion", "plan"]),
    (
        "repair",
        &[
            "description",
            "initial_code",
            "guiding_assertion",
            "error_type",
            "error_message",
            "fixing_suggestion",
            "examples",
        ],
    ),
    ("examples", &["items"]),
    ("example_item", &["n", "error_message", "initial_code", "fixed_code"]),
    ("mentor", &["error_type", "count", "suggestions", "fixes"]),
    ("mentor_fix", &["n", "error_message", "initial_code", "fixed_code"]),
    ("reask_plan", &[]),
    ("reask_code", &[]),
    ("reask_mentor", &[]),
];

const DEFAULTS: [(&str, &str); 12] = [
    ("system", include_str!("../../prompts/system.txt")),
    ("plan", include_str!("../../prompts/plan.txt")),
    ("plan_section", include_str!("../../prompts/plan_section.txt")),
    ("generate", include_str!("../../prompts/generate.txt")),
    ("repair", include_str!("../../prompts/repair.txt")),
    ("examples", include_str!("../../prompts/examples.txt")),
    ("example_item", include_str!("../../prompts/example_item.txt")),
    ("mentor", include_str!("../../prompts/mentor.txt")),
    ("mentor_fix", include_str!("../../prompts/mentor_fix.txt")),
    ("reask_plan", include_str!("../../prompts/reask_plan.txt")),
    ("reask_code", include_str!("../../prompts/reask_code.txt")),
    ("reask_mentor", include_str!("../../prompts/reask_mentor.txt")),
];

/// The prompt set. Each template is plain text with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    texts: Vec<(&'static str, String)>,
}

impl Default for Templates {
    fn default() -> Self {
        let texts = DEFAULTS.iter().map(|(n, t)| (*n, t.to_string())).collect();
        Self { texts }
    }
}

impl Templates {
    /// Built-in templates, with any `<name>.txt` found in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let mut templates = Self::default();
        for (name, text) in &mut templates.texts {
            match fs::read_to_string(dir.join(format!("{name}.txt"))) {
                Ok(custom) => *text = custom,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(AgentError::Template(format!("{name}.txt: {e}"))),
            }
        }
        templates.check()?;
        Ok(templates)
    }

    /// Every required placeholder present, no unknown ones.
    pub fn check(&self) -> Result<(), AgentError> {
        for (name, required) in SPECS {
            let text = self.get(name);
            let used: Vec<&str> = placeholder()
                .captures_iter(text)
                .map(|c| c.get(1).unwrap().as_str())
                .collect();
            if let Some(missing) = required.iter().find(|r| !used.contains(r)) {
                return Err(AgentError::Template(format!("{name}.txt lacks {{{{{missing}}}}}")));
            }
            if let Some(extra) = used.iter().find(|u| !required.contains(u)) {
                return Err(AgentError::Template(format!(
                    "{name}.txt uses unknown placeholder {{{{{extra}}}}}"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> &str {
        self.texts
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t.as_str())
            .unwrap_or_else(|| panic!("no template named {name}"))
    }

    /// Substitute placeholders in one pass; values are never re-expanded.
    pub fn render(&self, name: &str, values: &[(&str, &str)]) -> String {
        placeholder()
            .replace_all(self.get(name), |c: &regex::Captures| {
                let key = &c[1];
                values
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_else(|| panic!("template {name} needs value for {key}"))
            })
            .into_owned()
    }
}
