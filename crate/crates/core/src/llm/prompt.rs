use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{load, DataError};
use crate::lint::IssueType;
use crate::metrics::{cosine_similarity, TokenVector};
use crate::mining::TranslationRecord;

const GUIDELINES_YML: &str = include_str!("../../data/guidelines.yml");

pub const SOURCE_CONFIGURATION: &str = "SOURCE_CONFIGURATION";
pub const EXAMPLE_SOURCE: &str = "EXAMPLE_SOURCE";
pub const EXAMPLE_TARGET: &str = "EXAMPLE_TARGET";
pub const GUIDELINES: &str = "GUIDELINES";
pub const FAULTY_CONFIGURATION: &str = "FAULTY_CONFIGURATION";
pub const ERROR_MESSAGES: &str = "ERROR_MESSAGES";

const ROLE: &str = "You are an expert in continuous integration and build automation.";
const TASK: &str = "Translate the CI configuration below from the source platform to the target platform, keeping its behavior: triggers, build matrix, environment, commands and their order.";
const PLATFORMS: &str = "Source platform: Travis CI\nTarget platform: GitHub Actions";
const OUTPUT_CONTROL: &str = "Reply with the complete GitHub Actions workflow YAML only: no explanations, no comments about the changes.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Basic,
    OneShot,
    Guideline,
    Refinement,
}

impl Strategy {
    fn template(self) -> String {
        let source = "Travis CI configuration:\n```yaml\n$SOURCE_CONFIGURATION\n```";
        match self {
            Strategy::Basic => format!("{ROLE}\n{TASK}\n{PLATFORMS}\n\n{source}\n\n{OUTPUT_CONTROL}\n"),
            Strategy::OneShot => format!(
                "{ROLE}\n{TASK}\n{PLATFORMS}\n\nHere is a solved example.\nExample Travis CI configuration:\n```yaml\n$EXAMPLE_SOURCE\n```\nIts GitHub Actions translation:\n```yaml\n$EXAMPLE_TARGET\n```\n\n{source}\n\n{OUTPUT_CONTROL}\n"
            ),
            Strategy::Guideline => format!(
                "{ROLE}\n{TASK}\n{PLATFORMS}\n\nFollow these rules:\n$GUIDELINES\n\n{source}\n\n{OUTPUT_CONTROL}\n"
            ),
            Strategy::Refinement => format!(
                "{ROLE}\nThe GitHub Actions workflow below was translated from a Travis CI configuration, but its build fails. Fix the workflow so that it builds and still does what the Travis CI configuration did.\n{PLATFORMS}\n\n{source}\n\nFailing workflow:\n```yaml\n$FAULTY_CONFIGURATION\n```\n\nBuild errors:\n```\n$ERROR_MESSAGES\n```\n\n{OUTPUT_CONTROL}\n"
            ),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Basic => "basic",
            Strategy::OneShot => "one_shot",
            Strategy::Guideline => "guideline",
            Strategy::Refinement => "refinement",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub strategy: Strategy,
    pub text: String,
    pub slots: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("source configuration is empty")]
    EmptySource,
    #[error("prompt slot {0} is not filled")]
    MissingSlot(String),
    #[error("no example records to choose from")]
    EmptyPool,
}

/// Names of `$SLOT` placeholders, in order of appearance.
fn placeholders(template: &str) -> Vec<(usize, usize, &str)> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' {
            let end = bytes[i + 1..]
                .iter()
                .position(|b| !(b.is_ascii_uppercase() || *b == b'_'))
                .map_or(bytes.len(), |p| i + 1 + p);
            if end > i + 1 {
                out.push((i, end, &template[i + 1..end]));
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Fills the strategy's template in a single pass, so slot values are
/// inserted verbatim even when they contain `$NAMES` themselves.
pub fn build_prompt(
    strategy: Strategy,
    source_text: &str,
    context: &BTreeMap<String, String>,
) -> Result<PromptInstance, PromptError> {
    if source_text.trim().is_empty() {
        return Err(PromptError::EmptySource);
    }
    let template = strategy.template();
    let mut slots = BTreeMap::new();
    let mut text = String::with_capacity(template.len() + source_text.len());
    let mut last = 0;
    for (start, end, name) in placeholders(&template) {
        let value = if name == SOURCE_CONFIGURATION {
            source_text
        } else {
            context
                .get(name)
                .map(String::as_str)
                .ok_or_else(|| PromptError::MissingSlot(name.to_string()))?
        };
        let value = value.trim_end_matches('\n');
        text.push_str(&template[last..start]);
        text.push_str(value);
        slots.insert(name.to_string(), value.to_string());
        last = end;
    }
    text.push_str(&template[last..]);
    Ok(PromptInstance { strategy, text, slots })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineRule {
    pub issue_type: IssueType,
    pub rule: String,
}

/// Natural-language rules, at least one per issue type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GuidelineSet {
    pub rules: Vec<GuidelineRule>,
}

impl Default for GuidelineSet {
    fn default() -> Self {
        Self::from_yaml(GUIDELINES_YML).expect("bundled guidelines are valid")
    }
}

impl GuidelineSet {
    pub fn from_yaml(text: &str) -> Result<Self, DataError> {
        let set: Self = load(text, "guidelines")?;
        if let Some(missing) = IssueType::ALL
            .into_iter()
            .find(|t| !set.rules.iter().any(|r| r.issue_type == *t))
        {
            return Err(DataError::Schema {
                what: "guidelines",
                message: format!("no rule for issue type {missing}"),
            });
        }
        Ok(set)
    }

    /// The rules as a bulleted list for the GUIDELINES slot.
    pub fn render(&self) -> String {
        self.rules
            .iter()
            .map(|r| format!("- {}", r.rule))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The pool record whose source is most similar to `source_text`; the
/// first record wins ties.
pub fn select_one_shot_example<'a>(
    source_text: &str,
    pool: &'a [TranslationRecord],
) -> Result<&'a TranslationRecord, PromptError> {
    let query = TokenVector::from_text(source_text);
    let mut best: Option<(&TranslationRecord, f64)> = None;
    for record in pool {
        let score = cosine_similarity(&query, &TokenVector::from_text(&record.source_text)).unwrap_or(0.0);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((record, score));
        }
    }
    best.map(|(r, _)| r).ok_or(PromptError::EmptyPool)
}
