use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{translate_once, Case, ModelSettings, Provider, Strategy, StrategyInputs, ERROR_MESSAGES, FAULTY_CONFIGURATION};
use crate::lint::LintContext;
use crate::metrics::BuildOutcome;
use crate::yaml::parse_travis;

/// Error output fed back to the model is cut to this many lines.
pub const MAX_ERROR_LINES: usize = 100;

/// Decides whether a candidate workflow builds.
pub trait Builder: Send + Sync {
    fn build(&self, case: &Case, candidate: &str) -> BuildOutcome;
}

/// Builds offline with [`super::simulate_build`], linting each candidate
/// against its own source configuration.
#[derive(Debug, Clone, Default)]
pub struct SimulatedBuild {
    pub base: LintContext,
}

impl Builder for SimulatedBuild {
    fn build(&self, case: &Case, candidate: &str) -> BuildOutcome {
        let mut ctx = self.base.clone();
        ctx.source = parse_travis(&case.source_text).ok();
        super::simulate_build(&case.id, candidate, &ctx)
    }
}

/// Prompting strategy for a whole run; the `*Ir` variants add refinement
/// rounds after the initial translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStrategy {
    Basic,
    OneShot,
    Guideline,
    GuidelineIr,
    Ir,
}

impl RunStrategy {
    pub const ALL: [RunStrategy; 5] = [
        RunStrategy::Basic,
        RunStrategy::OneShot,
        RunStrategy::Guideline,
        RunStrategy::GuidelineIr,
        RunStrategy::Ir,
    ];

    pub fn initial(self) -> Strategy {
        match self {
            RunStrategy::Basic | RunStrategy::Ir => Strategy::Basic,
            RunStrategy::OneShot => Strategy::OneShot,
            RunStrategy::Guideline | RunStrategy::GuidelineIr => Strategy::Guideline,
        }
    }

    pub fn refines(self) -> bool {
        matches!(self, RunStrategy::GuidelineIr | RunStrategy::Ir)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStrategy::Basic => "basic",
            RunStrategy::OneShot => "one-shot",
            RunStrategy::Guideline => "guideline",
            RunStrategy::GuidelineIr => "guideline-ir",
            RunStrategy::Ir => "ir",
        }
    }
}

impl fmt::Display for RunStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RunStrategy::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub strategy: RunStrategy,
    /// Refinement rounds after the initial translation; ignored when the
    /// strategy does not refine.
    pub max_iters: usize,
    pub settings: ModelSettings,
    pub workers: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            strategy: RunStrategy::GuidelineIr,
            max_iters: 5,
            settings: ModelSettings::default(),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementStatus {
    Pending,
    Fixed,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Workflow extracted from the response, if any.
    pub candidate: Option<String>,
    pub outcome: BuildOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementState {
    pub case_id: String,
    /// Iteration of the latest attempt; 0 is the initial translation.
    pub iteration: usize,
    /// Text handed to the next refinement prompt: the extracted workflow,
    /// or the raw response when nothing could be extracted.
    pub current_text: String,
    pub last_outcome: Option<BuildOutcome>,
    pub status: RefinementStatus,
    pub trace: Vec<TraceEntry>,
}

impl RefinementState {
    fn new(case_id: &str) -> Self {
        Self {
            case_id: case_id.to_string(),
            iteration: 0,
            current_text: String::new(),
            last_outcome: None,
            status: RefinementStatus::Pending,
            trace: Vec::new(),
        }
    }

    /// The final candidate workflow, if the latest response contained one.
    pub fn candidate(&self) -> Option<&str> {
        self.trace.last().and_then(|t| t.candidate.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineResult {
    pub states: Vec<RefinementState>,
    /// Refinement rounds actually run, not counting the initial translation.
    pub iterations_run: usize,
    pub provider_calls: usize,
    /// Number of fixed cases after each iteration, starting with iteration 0.
    pub fixed_after: Vec<usize>,
}

impl RefineResult {
    pub fn outcomes(&self) -> Vec<BuildOutcome> {
        self.states
            .iter()
            .map(|s| {
                s.last_outcome
                    .clone()
                    .unwrap_or_else(|| BuildOutcome::failure(s.case_id.clone(), vec![]))
            })
            .collect()
    }
}

fn truncate_lines(messages: &[String], max: usize) -> String {
    let lines: Vec<&str> = messages.iter().flat_map(|m| m.lines()).collect();
    let mut out = lines[..lines.len().min(max)].join("\n");
    if lines.len() > max {
        out.push_str(&format!("\n... {} more lines", lines.len() - max));
    }
    out
}

struct Runner<'a> {
    provider: &'a dyn Provider,
    builder: &'a dyn Builder,
    settings: &'a ModelSettings,
}

/// Runs one attempt for `case` and records it in `state`. Returns whether
/// the provider was called.
fn step(
    runner: &Runner<'_>,
    case: &Case,
    state: &mut RefinementState,
    strategy: Strategy,
    context: Result<BTreeMap<String, String>, String>,
    iteration: usize,
) -> bool {
    let Runner { provider, builder, settings } = *runner;
    let mut called = false;
    let (candidate, outcome) = match context {
        Err(message) => (None, BuildOutcome::failure(case.id.clone(), vec![message])),
        Ok(context) => {
            called = true;
            match translate_once(provider, strategy, case, &context, settings, iteration) {
                Err(e) => {
                    // A prompt error is raised before any request goes out.
                    called = !matches!(e, super::TranslateError::Prompt(_));
                    (None, BuildOutcome::failure(case.id.clone(), vec![e.to_string()]))
                }
                Ok(attempt) => match attempt.candidate {
                    Ok(text) => {
                        let outcome = builder.build(case, &text);
                        state.current_text = text.clone();
                        (Some(text), outcome)
                    }
                    Err(e) => {
                        state.current_text = attempt.response;
                        (None, BuildOutcome::failure(case.id.clone(), vec![e.to_string()]))
                    }
                },
            }
        }
    };
    state.iteration = iteration;
    if outcome.is_success() {
        state.status = RefinementStatus::Fixed;
    }
    state.trace.push(TraceEntry {
        iteration,
        candidate,
        outcome: outcome.clone(),
    });
    state.last_outcome = Some(outcome);
    called
}

/// Translates every case, then keeps feeding build errors back for the
/// cases that still fail. Stops when all cases build, when a round fixes
/// nothing new, or after `max_iters` rounds.
pub fn refine_batch(
    provider: &dyn Provider,
    builder: &dyn Builder,
    cases: &[Case],
    inputs: &StrategyInputs,
    config: &RefineConfig,
) -> RefineResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run(provider, builder, cases, inputs, config))
}

fn run(
    provider: &dyn Provider,
    builder: &dyn Builder,
    cases: &[Case],
    inputs: &StrategyInputs,
    config: &RefineConfig,
) -> RefineResult {
    let runner = Runner {
        provider,
        builder,
        settings: &config.settings,
    };
    let initial = config.strategy.initial();
    let mut states: Vec<RefinementState> = cases.iter().map(|c| RefinementState::new(&c.id)).collect();
    let mut provider_calls: usize = states
        .par_iter_mut()
        .zip(cases.par_iter())
        .map(|(state, case)| {
            let context = inputs.context(initial, case).map_err(|e| e.to_string());
            step(&runner, case, state, initial, context, 0) as usize
        })
        .sum();
    let fixed = |states: &[RefinementState]| states.iter().filter(|s| s.status == RefinementStatus::Fixed).count();
    let mut fixed_after = vec![fixed(&states)];
    let mut iterations_run = 0;

    if config.strategy.refines() {
        for iteration in 1..=config.max_iters {
            if fixed_after.last() == Some(&cases.len()) {
                break;
            }
            iterations_run = iteration;
            provider_calls += states
                .par_iter_mut()
                .zip(cases.par_iter())
                .filter(|(s, _)| s.status == RefinementStatus::Pending)
                .map(|(state, case)| {
                    let errors = state
                        .last_outcome
                        .as_ref()
                        .map(|o| truncate_lines(&o.messages, MAX_ERROR_LINES))
                        .unwrap_or_default();
                    let context = BTreeMap::from([
                        (FAULTY_CONFIGURATION.to_string(), state.current_text.clone()),
                        (ERROR_MESSAGES.to_string(), errors),
                    ]);
                    step(&runner, case, state, Strategy::Refinement, Ok(context), iteration) as usize
                })
                .sum::<usize>();
            let now = fixed(&states);
            let newly_fixed = now - fixed_after.last().copied().unwrap_or(0);
            fixed_after.push(now);
            if newly_fixed == 0 {
                break;
            }
        }
    }

    for state in &mut states {
        if state.status == RefinementStatus::Pending {
            state.status = RefinementStatus::Exhausted;
        }
    }
    RefineResult {
        states,
        iterations_run,
        provider_calls,
        fixed_after,
    }
}
