//! Prompt construction, model providers and the iterative refinement loop.

mod prompt;
mod provider;
mod refine;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lint::{has_blocking, lint, LintContext};
use crate::metrics::BuildOutcome;
use crate::mining::TranslationRecord;
use crate::yaml::{parse_document, parse_workflow};

pub use prompt::{
    build_prompt, select_one_shot_example, GuidelineRule, GuidelineSet, PromptError, PromptInstance, Strategy,
    ERROR_MESSAGES, EXAMPLE_SOURCE, EXAMPLE_TARGET, FAULTY_CONFIGURATION, GUIDELINES, SOURCE_CONFIGURATION,
};
pub use provider::{
    FnProvider, HttpProvider, Message, Provider, ProviderError, ProviderRequest, ProviderResponse,
    ScriptedProvider, KEY_ENV, URL_ENV,
};
pub use refine::{
    refine_batch, Builder, RefineConfig, RefineResult, RefinementState, RefinementStatus, RunStrategy, SimulatedBuild,
    TraceEntry, MAX_ERROR_LINES,
};

/// One translation task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub source_text: String,
}

impl From<&TranslationRecord> for Case {
    fn from(r: &TranslationRecord) -> Self {
        Self {
            id: r.id.clone(),
            source_text: r.source_text.clone(),
        }
    }
}

/// Model parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    pub temperature: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            model: "default".into(),
            temperature: 0.0,
        }
    }
}

/// Inputs that strategies draw their extra prompt slots from.
#[derive(Debug, Clone, Default)]
pub struct StrategyInputs {
    pub guidelines: GuidelineSet,
    /// Records the one-shot example is picked from; the case itself is skipped.
    pub example_pool: Vec<TranslationRecord>,
}

impl StrategyInputs {
    pub fn context(&self, strategy: Strategy, case: &Case) -> Result<BTreeMap<String, String>, PromptError> {
        let mut ctx = BTreeMap::new();
        match strategy {
            Strategy::OneShot => {
                let pool: Vec<TranslationRecord> =
                    self.example_pool.iter().filter(|r| r.id != case.id).cloned().collect();
                let example = select_one_shot_example(&case.source_text, &pool)?;
                ctx.insert(EXAMPLE_SOURCE.into(), example.source_text.clone());
                ctx.insert(EXAMPLE_TARGET.into(), example.target_text.clone());
            }
            Strategy::Guideline => {
                ctx.insert(GUIDELINES.into(), self.guidelines.render());
            }
            Strategy::Basic | Strategy::Refinement => {}
        }
        Ok(ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("response contains no workflow configuration")]
pub struct ExtractionError;

fn is_top_level_key(line: &str) -> bool {
    let Some(first) = line.chars().next() else { return false };
    if first.is_whitespace() || first == '#' || first == '-' {
        return false;
    }
    match line.find(':') {
        Some(i) => {
            let key = &line[..i];
            let after = &line[i + 1..];
            !key.is_empty()
                && (!key.contains(char::is_whitespace) || key.starts_with(['"', '\'']))
                && (after.is_empty() || after.starts_with(char::is_whitespace))
        }
        None => false,
    }
}

/// Lines that can continue a YAML document after its first key.
fn continues_yaml(line: &str) -> bool {
    line.trim().is_empty()
        || line.starts_with(char::is_whitespace)
        || line.starts_with('-')
        || line.starts_with('#')
        || is_top_level_key(line)
}

fn fenced_blocks(response: &str) -> Vec<(String, String)> {
    let mut blocks = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in response.lines() {
        let trimmed = line.trim_start();
        if let Some(info) = trimmed.strip_prefix("```") {
            match current.take() {
                Some((lang, body)) => blocks.push((lang, body.join("\n"))),
                None => current = Some((info.trim().to_ascii_lowercase(), Vec::new())),
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some((lang, body)) = current {
        blocks.push((lang, body.join("\n")));
    }
    blocks
}

/// Pulls the workflow out of a model response: the body of a code fence
/// when there is one, otherwise the lines from the first top-level key to
/// the last line that still reads as YAML.
pub fn extract_config(response: &str) -> Result<String, ExtractionError> {
    let candidates: Vec<String> = {
        let blocks = fenced_blocks(response);
        let mut ordered: Vec<String> = blocks
            .iter()
            .filter(|(lang, _)| lang == "yaml" || lang == "yml")
            .chain(blocks.iter().filter(|(lang, _)| lang != "yaml" && lang != "yml"))
            .map(|(_, body)| body.clone())
            .collect();
        ordered.push(response.to_string());
        ordered
    };
    candidates
        .iter()
        .find_map(|text| yaml_region(text))
        .ok_or(ExtractionError)
}

fn yaml_region(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| is_top_level_key(l) || l.trim_end() == "---")?;
    let mut end = start;
    for (i, line) in lines.iter().enumerate().skip(start) {
        if !continues_yaml(line) {
            break;
        }
        if !line.trim().is_empty() {
            end = i;
        }
    }
    let mut region = lines[start..=end].join("\n");
    region.push('\n');
    match parse_document(&region) {
        Ok(Some(root)) if root.as_map().is_some() => Some(region),
        _ => None,
    }
}

/// Outcome of one provider round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub prompt: PromptInstance,
    pub response: String,
    pub candidate: Result<String, ExtractionError>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Builds the prompt, makes exactly one provider call and extracts the
/// candidate workflow.
pub fn translate_once(
    provider: &dyn Provider,
    strategy: Strategy,
    case: &Case,
    context: &BTreeMap<String, String>,
    settings: &ModelSettings,
    iteration: usize,
) -> Result<Attempt, TranslateError> {
    let prompt = build_prompt(strategy, &case.source_text, context)?;
    let request = ProviderRequest {
        model: settings.model.clone(),
        temperature: settings.temperature,
        messages: vec![Message::user(prompt.text.clone())],
        case_id: case.id.clone(),
        iteration,
    };
    let response = provider.complete(&request)?.content;
    let candidate = extract_config(&response);
    Ok(Attempt {
        prompt,
        response,
        candidate,
    })
}

/// Offline stand-in for running the workflow: it builds when it parses,
/// satisfies the workflow invariants and has no blocking lint issue.
pub fn simulate_build(case_id: &str, candidate_text: &str, ctx: &LintContext) -> BuildOutcome {
    let wf = match parse_workflow(candidate_text) {
        Ok(wf) => wf,
        Err(e) => {
            let mut messages: Vec<String> = lint(candidate_text, ctx)
                .iter()
                .filter(|i| i.is_blocking())
                .map(ToString::to_string)
                .collect();
            if messages.is_empty() {
                messages.push(format!("workflow does not load: {e}"));
            }
            return BuildOutcome::failure(case_id, messages);
        }
    };
    let mut messages: Vec<String> = match wf.validate() {
        Ok(()) => Vec::new(),
        Err(violations) => violations.iter().map(|v| format!("invalid workflow: {v}")).collect(),
    };
    let issues = lint(candidate_text, ctx);
    if has_blocking(&issues) {
        messages.extend(issues.iter().filter(|i| i.is_blocking()).map(ToString::to_string));
    }
    if messages.is_empty() {
        BuildOutcome::success(case_id)
    } else {
        BuildOutcome::failure(case_id, messages)
    }
}
