//! Rule-based Travis CI → GitHub Actions translation.

mod defaults;
mod rules;

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{ActionRegistry, CredentialTable, PackageTable};
use crate::model::{
    EventFilter, InvariantViolation, Job, Matrix, Phase, Phases, Step, TravisConfig, VersionLiteral,
    Workflow,
};

pub use defaults::{inject_known_packages, materialize_defaults};
pub(crate) use defaults::has_credential;
pub(crate) use rules::plan_jobs;
pub use rules::{map_arch, map_env, map_matrix, map_stages, runner_for_os, sanitize_job_id};

#[derive(Debug, Clone, PartialEq)]
pub struct TranspileOptions {
    pub default_runner: String,
    pub default_triggers: Vec<String>,
    pub action_registry: ActionRegistry,
    /// Fail instead of warning on architectures GitHub runners lack.
    pub strict_arch: bool,
    pub package_table: PackageTable,
    pub credentials: CredentialTable,
}

impl Default for TranspileOptions {
    fn default() -> Self {
        Self {
            default_runner: "ubuntu-latest".into(),
            default_triggers: vec!["push".into(), "pull_request".into()],
            action_registry: ActionRegistry::default(),
            strict_arch: false,
            package_table: PackageTable::bundled(),
            credentials: CredentialTable::bundled(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningCode {
    DroppedNotifications,
    DroppedUnknownKey,
    SkippedArch,
    ImplicitDefaultAdded,
    PackageInjected,
    /// An env variable was defined twice; the last definition was kept.
    DuplicateEnv,
    /// A recognized Travis setting with no workflow equivalent.
    DroppedUnsupported,
    /// An unknown `os:` value used verbatim as the runner label.
    RunnerPassthrough,
}

impl WarningCode {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningCode::DroppedNotifications => "dropped_notifications",
            WarningCode::DroppedUnknownKey => "dropped_unknown_key",
            WarningCode::SkippedArch => "skipped_arch",
            WarningCode::ImplicitDefaultAdded => "implicit_default_added",
            WarningCode::PackageInjected => "package_injected",
            WarningCode::DuplicateEnv => "duplicate_env",
            WarningCode::DroppedUnsupported => "dropped_unsupported",
            WarningCode::RunnerPassthrough => "runner_passthrough",
        }
    }
}

impl fmt::Display for WarningCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspileWarning {
    pub code: WarningCode,
    pub detail: String,
    pub source_path: String,
}

impl TranspileWarning {
    pub fn new(code: WarningCode, detail: impl Into<String>, source_path: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
            source_path: source_path.into(),
        }
    }
}

impl fmt::Display for TranspileWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning[{}] {}: {}", self.code, self.source_path, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranspileError {
    #[error("architecture {0:?} is not supported by GitHub-hosted runners")]
    UnsupportedArchitecture(String),
    #[error("nothing to translate: the configuration defines no commands and no jobs")]
    NothingToTranslate,
    #[error("stage {0:?} is declared more than once")]
    DuplicateStage(String),
    #[error("default trigger list is empty")]
    NoTriggers,
    #[error("generated workflow is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<InvariantViolation>),
}

/// Translates a Travis configuration into a workflow plus the list of every
/// deviation from the source.
pub fn transpile(
    config: &TravisConfig,
    opts: &TranspileOptions,
) -> Result<(Workflow, Vec<TranspileWarning>), TranspileError> {
    if opts.default_triggers.is_empty() {
        return Err(TranspileError::NoTriggers);
    }
    if config.phases.values().all(Vec::is_empty) && config.matrix_extras.include.is_empty() {
        return Err(TranspileError::NothingToTranslate);
    }
    let mut warnings = Vec::new();
    let mut wf = Workflow {
        name: Some("CI".into()),
        triggers: triggers(config, opts, &mut warnings),
        jobs: IndexMap::new(),
    };

    let (global_env, env_warnings) = rules::map_env_at(&config.global_env, "env");
    warnings.extend(env_warnings);
    let (top_matrix, matrix_warnings) = map_matrix(config, opts)?;
    warnings.extend(matrix_warnings);
    let top_runner = rules::runners(&config.os_list, opts, "os", &mut Vec::new())
        .into_iter()
        .next()
        .unwrap_or_else(|| opts.default_runner.clone());

    for plan in rules::plan_jobs(config)? {
        let job = match &plan.entries {
            None => top_level_job(config, &top_matrix, &top_runner, &global_env),
            Some(entries) => entry_job(config, entries, opts, &top_runner, &global_env, &mut warnings)?,
        };
        let mut job = job;
        job.needs = plan.needs.clone();
        wf.jobs.insert(plan.id.clone(), job);
    }
    for (i, stage) in config.stages.iter().enumerate() {
        if let Some(cond) = &stage.condition {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnsupported,
                format!("stage condition {cond:?} has no direct workflow equivalent"),
                format!("stages[{i}].if"),
            ));
        }
    }
    for stage in &config.stages {
        if !config.has_stage_entries() && !config.phases.contains_key(&Phase::Script) {
            break;
        }
        let id = sanitize_job_id(&stage.name);
        if !wf.jobs.keys().any(|k| *k == id || k.starts_with(&format!("{id}-"))) {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnsupported,
                format!("stage {:?} has no jobs", stage.name),
                "stages",
            ));
        }
    }

    let (with_defaults, default_warnings) = materialize_defaults(&wf, config, opts);
    warnings.extend(default_warnings);
    let (mut wf, package_warnings) = inject_known_packages(&with_defaults, &opts.package_table);
    warnings.extend(package_warnings);
    defaults::inject_credentials(&mut wf, &opts.credentials, &mut warnings);

    warnings.extend(dropped_source_keys(config));
    wf.validate().map_err(TranspileError::Invalid)?;
    Ok((wf, warnings))
}

fn triggers(
    config: &TravisConfig,
    opts: &TranspileOptions,
    warnings: &mut Vec<TranspileWarning>,
) -> IndexMap<String, Option<EventFilter>> {
    let mut out: IndexMap<String, Option<EventFilter>> =
        opts.default_triggers.iter().map(|t| (t.clone(), None)).collect();
    let Some(filter) = &config.branch_filter else {
        return out;
    };
    let mut push = EventFilter::default();
    if !filter.include.is_empty() {
        push.branches = filter.include.clone();
        if !filter.exclude.is_empty() {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnsupported,
                "branches.only and branches.except are both set; only is kept",
                "branches.except",
            ));
        }
    } else {
        push.branches_ignore = filter.exclude.clone();
    }
    if !push.is_empty() {
        if let Some(slot) = out.get_mut("push") {
            *slot = Some(push);
        }
    }
    out
}

fn run_steps(phases: &Phases) -> Vec<Step> {
    let mut steps = Vec::new();
    for phase in Phase::ALL {
        let Some(commands) = phases.get(&phase) else { continue };
        for cmd in commands {
            let mut step = Step::run(vec![cmd.clone()]);
            step.condition = phase.step_condition().map(str::to_string);
            steps.push(step);
        }
    }
    steps
}

/// Env matrix axes are surfaced to commands through the job environment.
fn env_axis_refs(matrix: &Matrix, env: &mut IndexMap<String, String>, skip: &[&str]) {
    let mut names: Vec<&String> = matrix.axes.keys().collect();
    for row in &matrix.include {
        names.extend(row.keys());
    }
    for name in names {
        if skip.contains(&name.as_str()) || env.contains_key(name) {
            continue;
        }
        if name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_') {
            env.insert(name.clone(), format!("${{{{ matrix.{name} }}}}"));
        }
    }
}

fn top_level_job(
    config: &TravisConfig,
    matrix: &Matrix,
    runner: &str,
    global_env: &IndexMap<String, String>,
) -> Job {
    let mut job = Job::new(runner);
    if matrix.axes.contains_key("os") {
        job.runs_on = "${{ matrix.os }}".into();
    }
    job.env = global_env.clone();
    env_axis_refs(matrix, &mut job.env, &["os", "arch"]);
    if !matrix.is_empty() {
        job.strategy_matrix = Some(matrix.clone());
    }
    job.steps = run_steps(&config.phases);
    job
}

fn entry_job(
    config: &TravisConfig,
    entries: &[usize],
    opts: &TranspileOptions,
    top_runner: &str,
    global_env: &IndexMap<String, String>,
    warnings: &mut Vec<TranspileWarning>,
) -> Result<Job, TranspileError> {
    let first = &config.matrix_extras.include[entries[0]];
    let path = format!("jobs.include[{}]", entries[0]);
    let runner = match &first.os {
        Some(os) => rules::runners(std::slice::from_ref(os), opts, &path, warnings).remove(0),
        None => top_runner.to_string(),
    };
    let mut job = Job::new(runner);
    if entries.len() == 1 {
        job.name = first.name.clone();
    }

    let mut phases = config.phases.clone();
    for (phase, cmds) in &first.phases {
        phases.insert(*phase, cmds.clone());
    }
    phases.sort_keys();
    job.steps = run_steps(&phases);

    let (entry_env, env_warnings) = rules::map_env_at(&first.env, &format!("{path}.env"));
    warnings.extend(env_warnings);
    job.env = global_env.clone();
    job.env.extend(entry_env);

    let mut versions: Vec<VersionLiteral> = Vec::new();
    for i in entries {
        if let Some(v) = &config.matrix_extras.include[*i].version {
            if !versions.contains(v) {
                versions.push(v.clone());
            }
        }
    }
    let spec = config.language_spec();
    let mut matrix = Matrix::default();
    if let Some(spec) = spec {
        match versions.len() {
            0 => {}
            1 => {
                let setup = opts.action_registry.action_ref(spec.setup_purpose);
                if let Some(setup) = setup {
                    job.steps.insert(
                        0,
                        Step::uses(setup).with_arg(spec.version_input, versions[0].raw_text.clone()),
                    );
                }
            }
            _ => {
                matrix.axes.insert(spec.version_input.to_string(), versions);
            }
        }
    }
    if let Some(arch) = &first.arch {
        let mapped = rules::arches(std::slice::from_ref(arch), opts, &path, warnings)?;
        if !mapped.is_empty() {
            matrix.axes.insert("arch".into(), mapped.iter().map(VersionLiteral::plain).collect());
        }
    }
    if !matrix.is_empty() {
        job.strategy_matrix = Some(matrix);
    }
    for i in entries {
        for key in config.matrix_extras.include[*i].extras.keys() {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnknownKey,
                format!("{key} has no workflow equivalent"),
                format!("jobs.include[{i}].{key}"),
            ));
        }
    }
    Ok(job)
}

/// One warning per source key the workflow does not carry.
fn dropped_source_keys(config: &TravisConfig) -> Vec<TranspileWarning> {
    let mut out = Vec::new();
    if config.notifications.is_some() {
        out.push(TranspileWarning::new(
            WarningCode::DroppedNotifications,
            "GitHub Actions reports build results itself; notification settings are not translated",
            "notifications",
        ));
    }
    for key in config.raw_extras.keys() {
        out.push(TranspileWarning::new(
            WarningCode::DroppedUnknownKey,
            format!("{key} has no workflow equivalent"),
            key.clone(),
        ));
    }
    for key in config.matrix_extras.extras.keys() {
        out.push(TranspileWarning::new(
            WarningCode::DroppedUnknownKey,
            format!("{key} has no workflow equivalent"),
            key.clone(),
        ));
    }
    if !config.matrix_extras.allow_failures.is_empty() {
        out.push(TranspileWarning::new(
            WarningCode::DroppedUnsupported,
            "allow_failures has no per-combination equivalent; failing jobs will fail the build",
            "jobs.allow_failures",
        ));
    }
    for (path, node) in &config.unmapped_env {
        let translated = rules::is_env_matrix_path(path) && rules::env_matrix_axis(node).is_some();
        if translated {
            continue;
        }
        let detail = if path.ends_with("secure") {
            "encrypted variables must be configured as repository secrets".to_string()
        } else {
            "env matrix entries set several variables; not translated".to_string()
        };
        out.push(TranspileWarning::new(WarningCode::DroppedUnsupported, detail, path.clone()));
    }
    out
}
