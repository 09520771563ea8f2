//! Typed representations of both CI dialects.
//!
//! The Travis side ([`TravisConfig`]) keeps every top-level key of the source
//! document, either in a named field or in `raw_extras`. The GitHub Actions
//! side ([`Workflow`]) is the shape produced by the transpiler and consumed by
//! the linter.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::yaml::Node;

/// A scalar that keeps its exact source spelling.
///
/// Equality compares `raw_text` only: quoting is presentation, and a renderer
/// is free to add quotes to protect a hazardous literal.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct VersionLiteral {
    pub raw_text: String,
    pub quoted: bool,
}

impl PartialEq for VersionLiteral {
    fn eq(&self, other: &Self) -> bool {
        self.raw_text == other.raw_text
    }
}

impl VersionLiteral {
    pub fn plain(raw: impl Into<String>) -> Self {
        Self {
            raw_text: raw.into(),
            quoted: false,
        }
    }

    pub fn quoted(raw: impl Into<String>) -> Self {
        Self {
            raw_text: raw.into(),
            quoted: true,
        }
    }

    /// An unquoted literal that a YAML loader would truncate (`3.10` -> `3.1`).
    pub fn is_trailing_zero_hazard(&self) -> bool {
        !self.quoted && is_trailing_zero_number(&self.raw_text)
    }
}

impl fmt::Display for VersionLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw_text)
    }
}

/// Matches `^\d+\.\d*0$`.
pub fn is_trailing_zero_number(text: &str) -> bool {
    let Some((whole, frac)) = text.split_once('.') else {
        return false;
    };
    !whole.is_empty()
        && whole.bytes().all(|b| b.is_ascii_digit())
        && frac.ends_with('0')
        && frac.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvForm {
    /// `KEY=VAL`
    AssignmentString,
    /// `KEY: VAL`
    KeyValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvEntry {
    pub name: String,
    pub value: String,
    pub origin_form: EnvForm,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid environment variable name {0:?}")]
pub struct InvalidEnvName(pub String);

impl EnvEntry {
    pub fn new(
        name: impl Into<String>,
        value: impl Into<String>,
        origin_form: EnvForm,
    ) -> Result<Self, InvalidEnvName> {
        let name = name.into();
        if name.is_empty() || name.contains('=') || name.contains(char::is_whitespace) {
            return Err(InvalidEnvName(name));
        }
        Ok(Self {
            name,
            value: value.into(),
            origin_form,
        })
    }

    /// Parses a Travis assignment string. The string may hold several
    /// assignments separated by whitespace (`A=1 B="x y"`).
    pub fn parse_assignments(text: &str) -> Result<Vec<Self>, InvalidEnvName> {
        split_shell_words(text)
            .into_iter()
            .map(|word| match word.split_once('=') {
                Some((name, value)) => {
                    Self::new(name, unquote(value), EnvForm::AssignmentString)
                }
                None => Err(InvalidEnvName(word)),
            })
            .collect()
    }
}

fn unquote(value: &str) -> &str {
    let bytes = value.as_bytes();
    if bytes.len() >= 2
        && (bytes[0] == b'"' || bytes[0] == b'\'')
        && bytes[bytes.len() - 1] == bytes[0]
    {
        &value[1..value.len() - 1]
    } else {
        value
    }
}

/// Whitespace split that keeps quoted runs together (quotes are retained).
fn split_shell_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for c in text.chars() {
        match quote {
            Some(q) => {
                current.push(c);
                if c == q {
                    quote = None;
                }
            }
            None if c == '"' || c == '\'' => {
                current.push(c);
                quote = Some(c);
            }
            None if c.is_whitespace() => {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
            }
            None => current.push(c),
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// One shell command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub text: String,
    pub normalized: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("blank command")]
pub struct BlankCommand;

pub fn normalize_command(raw: &str) -> Result<Command, BlankCommand> {
    let normalized = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if normalized.is_empty() {
        return Err(BlankCommand);
    }
    Ok(Command {
        text: raw.trim().to_string(),
        normalized,
    })
}

/// Splits a multi-line shell block into commands, dropping blank lines.
/// Lines ending in a backslash continue onto the next line.
pub fn split_commands(block: &str) -> Vec<Command> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for line in block.lines() {
        let line = line.trim();
        let joined = match pending.take() {
            Some(mut acc) => {
                acc.push('\n');
                acc.push_str(line);
                acc
            }
            None => line.to_string(),
        };
        if joined.ends_with('\\') {
            pending = Some(joined);
            continue;
        }
        if let Ok(cmd) = normalize_command(&joined) {
            out.push(cmd);
        }
    }
    if let Some(rest) = pending {
        if let Ok(cmd) = normalize_command(&rest) {
            out.push(cmd);
        }
    }
    out
}

/// Travis lifecycle phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BeforeInstall,
    Install,
    BeforeScript,
    Script,
    AfterSuccess,
    AfterFailure,
    BeforeDeploy,
    Deploy,
    AfterScript,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::BeforeInstall,
        Phase::Install,
        Phase::BeforeScript,
        Phase::Script,
        Phase::AfterSuccess,
        Phase::AfterFailure,
        Phase::BeforeDeploy,
        Phase::Deploy,
        Phase::AfterScript,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::BeforeInstall => "before_install",
            Phase::Install => "install",
            Phase::BeforeScript => "before_script",
            Phase::Script => "script",
            Phase::AfterSuccess => "after_success",
            Phase::AfterFailure => "after_failure",
            Phase::BeforeDeploy => "before_deploy",
            Phase::Deploy => "deploy",
            Phase::AfterScript => "after_script",
        }
    }

    pub fn from_key(key: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str() == key)
    }

    /// The step condition that reproduces this phase's Travis semantics.
    pub fn step_condition(self) -> Option<&'static str> {
        match self {
            Phase::AfterSuccess | Phase::BeforeDeploy | Phase::Deploy => Some("success()"),
            Phase::AfterFailure => Some("failure()"),
            Phase::AfterScript => Some("always()"),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Phases = IndexMap<Phase, Vec<Command>>;

/// Languages with a known version axis and setup action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LanguageSpec {
    pub language: &'static str,
    /// Travis key carrying the version list.
    pub travis_key: &'static str,
    /// Registry purpose of the setup action.
    pub setup_purpose: &'static str,
    /// Input of the setup action, also used as the matrix axis name.
    pub version_input: &'static str,
}

pub const LANGUAGES: &[LanguageSpec] = &[
    LanguageSpec {
        language: "python",
        travis_key: "python",
        setup_purpose: "setup-python",
        version_input: "python-version",
    },
    LanguageSpec {
        language: "node_js",
        travis_key: "node_js",
        setup_purpose: "setup-node",
        version_input: "node-version",
    },
    LanguageSpec {
        language: "ruby",
        travis_key: "rvm",
        setup_purpose: "setup-ruby",
        version_input: "ruby-version",
    },
    LanguageSpec {
        language: "go",
        travis_key: "go",
        setup_purpose: "setup-go",
        version_input: "go-version",
    },
    LanguageSpec {
        language: "java",
        travis_key: "jdk",
        setup_purpose: "setup-java",
        version_input: "java-version",
    },
    LanguageSpec {
        language: "php",
        travis_key: "php",
        setup_purpose: "setup-php",
        version_input: "php-version",
    },
];

pub fn language_spec(language: &str) -> Option<&'static LanguageSpec> {
    LANGUAGES.iter().find(|l| l.language == language)
}

pub fn language_for_axis(axis: &str) -> Option<&'static LanguageSpec> {
    LANGUAGES.iter().find(|l| l.version_input == axis)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheSpec {
    /// Package managers such as `pip` or `npm`.
    pub managers: Vec<String>,
    pub directories: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchFilter {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
}

/// One entry of Travis `jobs.include` / `matrix.include` (or exclude).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixEntry {
    pub stage: Option<String>,
    pub name: Option<String>,
    pub version: Option<VersionLiteral>,
    pub os: Option<String>,
    pub arch: Option<String>,
    pub env: Vec<EnvEntry>,
    pub phases: Phases,
    pub extras: IndexMap<String, Node>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TravisMatrix {
    pub include: Vec<MatrixEntry>,
    pub exclude: Vec<MatrixEntry>,
    pub allow_failures: Vec<MatrixEntry>,
    pub fast_finish: Option<bool>,
    /// Unrecognized keys, by document path.
    pub extras: IndexMap<String, Node>,
}

impl TravisMatrix {
    pub fn is_empty(&self) -> bool {
        self.include.is_empty()
            && self.exclude.is_empty()
            && self.allow_failures.is_empty()
            && self.fast_finish.is_none()
            && self.extras.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageDef {
    pub name: String,
    /// Indices into `matrix_extras.include`.
    pub jobs: Vec<usize>,
    pub condition: Option<String>,
}

/// Typed `.travis.yml`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TravisConfig {
    pub language: Option<String>,
    pub versions: Vec<VersionLiteral>,
    pub os_list: Vec<String>,
    pub arch_list: Vec<String>,
    pub global_env: Vec<EnvEntry>,
    /// Env subtrees that have no workflow equivalent (`secure:` values, env matrices),
    /// keyed by document path.
    pub unmapped_env: IndexMap<String, Node>,
    pub phases: Phases,
    pub stages: Vec<StageDef>,
    pub cache: Option<CacheSpec>,
    pub notifications: Option<Node>,
    pub branch_filter: Option<BranchFilter>,
    pub matrix_extras: TravisMatrix,
    pub raw_extras: IndexMap<String, Node>,
    /// Top-level keys consumed by named fields, in source order.
    pub named_keys: Vec<String>,
}

impl TravisConfig {
    pub fn language_spec(&self) -> Option<&'static LanguageSpec> {
        self.language.as_deref().and_then(language_spec)
    }

    /// Every command the configuration runs, with the phase it came from.
    /// Stage entries contribute their overriding phases.
    pub fn effective_commands(&self) -> Vec<(Phase, &Command)> {
        let mut out: Vec<(Phase, &Command)> = self
            .phases
            .iter()
            .flat_map(|(phase, cmds)| cmds.iter().map(move |c| (*phase, c)))
            .collect();
        for entry in &self.matrix_extras.include {
            for (phase, cmds) in &entry.phases {
                out.extend(cmds.iter().map(|c| (*phase, c)));
            }
        }
        out
    }

    pub fn has_stage_entries(&self) -> bool {
        self.matrix_extras.include.iter().any(|e| e.stage.is_some())
    }

    pub fn all_top_level_keys(&self) -> BTreeSet<String> {
        self.named_keys
            .iter()
            .chain(self.raw_extras.keys())
            .cloned()
            .collect()
    }
}

pub fn version_axis_values(config: &TravisConfig) -> Vec<VersionLiteral> {
    config.versions.clone()
}

/// `owner/repo@version`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRef {
    pub name: String,
    pub version: Option<String>,
}

impl ActionRef {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: Some(version.into()),
        }
    }

    pub fn parse(text: &str) -> Self {
        match text.rsplit_once('@') {
            Some((name, version)) if !name.is_empty() => Self {
                name: name.to_string(),
                version: Some(version.to_string()),
            },
            _ => Self {
                name: text.to_string(),
                version: None,
            },
        }
    }

    /// `owner/repo`, dropping any sub-path (`github/codeql-action/init`).
    pub fn repository(&self) -> &str {
        let mut parts = self.name.splitn(3, '/');
        match (parts.next(), parts.next()) {
            (Some(owner), Some(repo)) => &self.name[..owner.len() + 1 + repo.len()],
            _ => &self.name,
        }
    }

    /// Major version for refs of the form `v3`, `v3.1.0`, `3`.
    pub fn major_version(&self) -> Option<u64> {
        self.version.as_deref().and_then(parse_major)
    }
}

pub fn parse_major(version: &str) -> Option<u64> {
    let v = version.strip_prefix('v').unwrap_or(version);
    v.split('.').next()?.parse().ok()
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.version {
            Some(v) => write!(f, "{}@{}", self.name, v),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    pub branches: Vec<String>,
    pub branches_ignore: Vec<String>,
    pub tags: Vec<String>,
    pub tags_ignore: Vec<String>,
    pub paths: Vec<String>,
    pub paths_ignore: Vec<String>,
}

impl EventFilter {
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
            && self.branches_ignore.is_empty()
            && self.tags.is_empty()
            && self.tags_ignore.is_empty()
            && self.paths.is_empty()
            && self.paths_ignore.is_empty()
    }

    pub fn restricts_refs(&self) -> bool {
        !(self.branches.is_empty()
            && self.branches_ignore.is_empty()
            && self.tags.is_empty()
            && self.tags_ignore.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    pub axes: IndexMap<String, Vec<VersionLiteral>>,
    pub include: Vec<IndexMap<String, VersionLiteral>>,
    pub exclude: Vec<IndexMap<String, VersionLiteral>>,
    pub fail_fast: Option<bool>,
}

impl Matrix {
    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
            && self.include.is_empty()
            && self.exclude.is_empty()
            && self.fail_fast.is_none()
    }

    /// Whether `${{ matrix.<name> }}` resolves.
    pub fn defines(&self, name: &str) -> bool {
        self.axes.contains_key(name) || self.include.iter().any(|e| e.contains_key(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Uses(ActionRef),
    Run { commands: Vec<Command> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub name: Option<String>,
    pub kind: StepKind,
    pub with_args: IndexMap<String, String>,
    pub env: IndexMap<String, String>,
    pub condition: Option<String>,
}

impl Step {
    pub fn uses(action: ActionRef) -> Self {
        Self {
            name: None,
            kind: StepKind::Uses(action),
            with_args: IndexMap::new(),
            env: IndexMap::new(),
            condition: None,
        }
    }

    pub fn run(commands: Vec<Command>) -> Self {
        Self {
            name: None,
            kind: StepKind::Run { commands },
            with_args: IndexMap::new(),
            env: IndexMap::new(),
            condition: None,
        }
    }

    pub fn with_arg(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.with_args.insert(key.into(), value.into());
        self
    }

    pub fn action(&self) -> Option<&ActionRef> {
        match &self.kind {
            StepKind::Uses(a) => Some(a),
            StepKind::Run { .. } => None,
        }
    }

    pub fn commands(&self) -> &[Command] {
        match &self.kind {
            StepKind::Run { commands } => commands,
            StepKind::Uses(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub name: Option<String>,
    pub runs_on: String,
    pub needs: Vec<String>,
    pub strategy_matrix: Option<Matrix>,
    pub env: IndexMap<String, String>,
    pub steps: Vec<Step>,
}

impl Job {
    pub fn new(runs_on: impl Into<String>) -> Self {
        Self {
            name: None,
            runs_on: runs_on.into(),
            needs: Vec::new(),
            strategy_matrix: None,
            env: IndexMap::new(),
            steps: Vec::new(),
        }
    }

    pub fn run_commands(&self) -> impl Iterator<Item = &Command> {
        self.steps.iter().flat_map(|s| s.commands().iter())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workflow {
    pub name: Option<String>,
    pub triggers: IndexMap<String, Option<EventFilter>>,
    pub jobs: IndexMap<String, Job>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantViolation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl Workflow {
    /// Checks the structural invariants a renderable workflow must satisfy.
    pub fn validate(&self) -> Result<(), Vec<InvariantViolation>> {
        let mut problems = Vec::new();
        let mut violation = |path: String, message: String| {
            problems.push(InvariantViolation { path, message })
        };
        if self.triggers.is_empty() {
            violation("on".into(), "workflow declares no trigger events".into());
        }
        if self.jobs.is_empty() {
            violation("jobs".into(), "workflow declares no jobs".into());
        }
        for (id, job) in &self.jobs {
            if job.steps.is_empty() {
                violation(format!("jobs.{id}.steps"), "job has no steps".into());
            }
            if job.runs_on.trim().is_empty() {
                violation(format!("jobs.{id}.runs-on"), "job has no runner".into());
            }
            for need in &job.needs {
                if !self.jobs.contains_key(need) {
                    violation(
                        format!("jobs.{id}.needs"),
                        format!("needs unknown job {need:?}"),
                    );
                }
            }
            for reference in job_matrix_references(job) {
                let defined = job
                    .strategy_matrix
                    .as_ref()
                    .is_some_and(|m| m.defines(&reference));
                if !defined {
                    violation(
                        format!("jobs.{id}"),
                        format!("matrix.{reference} is referenced but not defined"),
                    );
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// All `matrix.X` names referenced from expressions inside a job.
fn job_matrix_references(job: &Job) -> BTreeSet<String> {
    let mut texts: Vec<&str> = vec![&job.runs_on];
    texts.extend(job.name.as_deref());
    texts.extend(job.env.values().map(String::as_str));
    for step in &job.steps {
        texts.extend(step.name.as_deref());
        texts.extend(step.with_args.values().map(String::as_str));
        texts.extend(step.env.values().map(String::as_str));
        texts.extend(step.commands().iter().map(|c| c.text.as_str()));
    }
    let mut refs: BTreeSet<String> = texts
        .into_iter()
        .flat_map(crate::expr::matrix_references)
        .collect();
    for step in &job.steps {
        if let Some(cond) = &step.condition {
            refs.extend(crate::expr::bare_matrix_references(cond));
        }
    }
    refs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_collapses_whitespace() {
        let c = normalize_command("  python -m   pytest ").unwrap();
        assert_eq!(c.normalized, "python -m pytest");
        assert_eq!(c.text, "python -m   pytest");
    }

    #[test]
    fn normalize_keeps_clean_command() {
        let c = normalize_command("python setup.py develop").unwrap();
        assert_eq!(c.normalized, "python setup.py develop");
    }

    #[test]
    fn normalize_rejects_blank() {
        assert_eq!(normalize_command("\t"), Err(BlankCommand));
        assert_eq!(normalize_command(""), Err(BlankCommand));
    }

    #[test]
    fn split_commands_drops_blank_lines_and_joins_continuations() {
        let cmds = split_commands("pip install a\n\n  ./configure \\\n  --prefix=/x\nmake\n");
        let norm: Vec<_> = cmds.iter().map(|c| c.normalized.as_str()).collect();
        assert_eq!(norm, ["pip install a", "./configure \\ --prefix=/x", "make"]);
    }

    #[test]
    fn trailing_zero_pattern() {
        for yes in ["3.10", "3.0", "10.20", "1.100"] {
            assert!(is_trailing_zero_number(yes), "{yes}");
        }
        for no in ["3.9", "3", "3.", "v3.10", "3.10.1", ".10", "3.1a0", "abc"] {
            assert!(!is_trailing_zero_number(no), "{no}");
        }
        assert!(VersionLiteral::plain("3.10").is_trailing_zero_hazard());
        assert!(!VersionLiteral::quoted("3.10").is_trailing_zero_hazard());
    }

    #[test]
    fn env_assignment_strings() {
        let entries = EnvEntry::parse_assignments("TOX_ENV=flake8 MSG=\"a b\"").unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].name, "TOX_ENV");
        assert_eq!(entries[0].value, "flake8");
        assert_eq!(entries[1].value, "a b");
        assert!(EnvEntry::parse_assignments("NOPE").is_err());
        assert!(EnvEntry::new("", "x", EnvForm::KeyValue).is_err());
        assert!(EnvEntry::new("A=B", "x", EnvForm::KeyValue).is_err());
    }

    #[test]
    fn action_ref_parsing() {
        let a = ActionRef::parse("actions/cache@v2");
        assert_eq!(a.name, "actions/cache");
        assert_eq!(a.major_version(), Some(2));
        let b = ActionRef::parse("github/codeql-action/init@v3.1.0");
        assert_eq!(b.repository(), "github/codeql-action");
        assert_eq!(b.major_version(), Some(3));
        let c = ActionRef::parse("./local-action");
        assert_eq!(c.version, None);
        assert_eq!(ActionRef::parse("a/b@main").major_version(), None);
    }

    #[test]
    fn validate_reports_unknown_needs_and_matrix_refs() {
        let mut wf = Workflow::default();
        wf.triggers.insert("push".into(), None);
        let mut job = Job::new("ubuntu-latest");
        job.needs.push("missing".into());
        job.steps.push(
            Step::uses(ActionRef::new("actions/setup-python", "v5"))
                .with_arg("python-version", "${{ matrix.python-version }}"),
        );
        wf.jobs.insert("build".into(), job);
        let problems = wf.validate().unwrap_err();
        assert_eq!(problems.len(), 2);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "[ \\ta-z=\\-.]{0,40}") {
            if let Ok(once) = normalize_command(&raw) {
                let twice = normalize_command(&once.normalized).unwrap();
                prop_assert_eq!(twice.normalized, once.normalized);
            }
        }
    }
}
