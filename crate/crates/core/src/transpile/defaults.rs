use super::{TranspileOptions, TranspileWarning, WarningCode};
use crate::data::{ActionRegistry, CredentialTable, PackageTable};
use crate::expr;
use crate::model::{normalize_command, CacheSpec, Job, Step, StepKind, TravisConfig, Workflow};

/// Cache directory of each package manager Travis knows how to cache.
const MANAGER_PATHS: &[(&str, &str, &str)] = &[
    ("pip", "~/.cache/pip", "**/requirements*.txt"),
    ("npm", "~/.npm", "**/package-lock.json"),
    ("yarn", "~/.cache/yarn", "**/yarn.lock"),
    ("bundler", "vendor/bundle", "**/Gemfile.lock"),
    ("cargo", "~/.cargo", "**/Cargo.lock"),
    ("ccache", "~/.ccache", ""),
];

/// Setup actions whose `architecture` input accepts the `arch` axis.
const ARCH_AWARE_SETUPS: &[&str] = &["setup-python", "setup-node", "setup-java"];

/// Makes the implicit Travis defaults explicit: repository checkout, language
/// setup bound to the version axis, and the dependency cache. Steps already
/// present are kept; applying this twice equals applying it once.
pub fn materialize_defaults(
    wf: &Workflow,
    config: &TravisConfig,
    opts: &TranspileOptions,
) -> (Workflow, Vec<TranspileWarning>) {
    let registry = &opts.action_registry;
    let mut out = wf.clone();
    let mut warnings = Vec::new();
    for (id, job) in out.jobs.iter_mut() {
        ensure_checkout(job, registry);
        ensure_setup(job, config, registry);
        if let Some(cache) = &config.cache {
            if ensure_cache(job, cache, registry) {
                warnings.push(TranspileWarning::new(
                    WarningCode::ImplicitDefaultAdded,
                    format!(
                        "jobs.{id}: cache step added for {}",
                        describe_cache(cache)
                    ),
                    "cache",
                ));
            }
        }
    }
    (out, warnings)
}

fn ensure_checkout(job: &mut Job, registry: &ActionRegistry) {
    let Some(checkout) = registry.action_ref("checkout") else {
        return;
    };
    match job
        .steps
        .iter()
        .position(|s| s.action().is_some_and(|a| registry.is("checkout", a)))
    {
        Some(0) => {}
        Some(i) => {
            let step = job.steps.remove(i);
            job.steps.insert(0, step);
        }
        None => job.steps.insert(0, Step::uses(checkout)),
    }
}

fn ensure_setup(job: &mut Job, config: &TravisConfig, registry: &ActionRegistry) {
    let Some(spec) = config.language_spec() else {
        return;
    };
    let Some(setup) = registry.action_ref(spec.setup_purpose) else {
        return;
    };
    if job
        .steps
        .iter()
        .any(|s| s.action().is_some_and(|a| registry.is(spec.setup_purpose, a)))
    {
        return;
    }
    let matrix = job.strategy_matrix.as_ref();
    let version = if matrix.is_some_and(|m| m.defines(spec.version_input)) {
        format!("${{{{ matrix.{} }}}}", spec.version_input)
    } else {
        match config.versions.first() {
            Some(v) => v.raw_text.clone(),
            None => return,
        }
    };
    let mut step = Step::uses(setup).with_arg(spec.version_input, version);
    if ARCH_AWARE_SETUPS.contains(&spec.setup_purpose) && matrix.is_some_and(|m| m.defines("arch")) {
        step = step.with_arg("architecture", "${{ matrix.arch }}");
    }
    let at = usize::from(
        job.steps
            .first()
            .and_then(Step::action)
            .is_some_and(|a| registry.is("checkout", a)),
    );
    job.steps.insert(at, step);
}

/// Inserts the cache step before the first run step. Returns whether a step
/// was added.
fn ensure_cache(job: &mut Job, cache: &CacheSpec, registry: &ActionRegistry) -> bool {
    let Some(action) = registry.action_ref("cache") else {
        return false;
    };
    if job.steps.iter().any(|s| s.action().is_some_and(|a| registry.is("cache", a))) {
        return false;
    }
    let mut paths: Vec<String> = Vec::new();
    let mut lockfiles: Vec<&str> = Vec::new();
    for manager in &cache.managers {
        if let Some((_, path, lock)) = MANAGER_PATHS.iter().find(|(m, _, _)| m == manager) {
            paths.push((*path).to_string());
            if !lock.is_empty() {
                lockfiles.push(lock);
            }
        }
    }
    paths.extend(cache.directories.iter().cloned());
    if paths.is_empty() {
        return false;
    }
    let label = if cache.managers.is_empty() {
        "deps".to_string()
    } else {
        cache.managers.join("-")
    };
    let key = if lockfiles.is_empty() {
        format!("${{{{ runner.os }}}}-{label}-${{{{ github.sha }}}}")
    } else {
        let globs: Vec<String> = lockfiles.iter().map(|l| format!("'{l}'")).collect();
        format!("${{{{ runner.os }}}}-{label}-${{{{ hashFiles({}) }}}}", globs.join(", "))
    };
    let step = Step::uses(action)
        .with_arg("path", paths.join("\n"))
        .with_arg("key", key)
        .with_arg("restore-keys", format!("${{{{ runner.os }}}}-{label}-"));
    let at = job
        .steps
        .iter()
        .position(|s| matches!(s.kind, StepKind::Run { .. }))
        .unwrap_or(job.steps.len());
    job.steps.insert(at, step);
    true
}

fn describe_cache(cache: &CacheSpec) -> String {
    let mut parts = cache.managers.clone();
    parts.extend(cache.directories.iter().cloned());
    parts.join(", ")
}

/// Inserts install steps for tools the Travis image preinstalled, before the
/// first step that uses them, unless an earlier step installs them already.
pub fn inject_known_packages(wf: &Workflow, table: &PackageTable) -> (Workflow, Vec<TranspileWarning>) {
    let mut out = wf.clone();
    let mut warnings = Vec::new();
    for (id, job) in out.jobs.iter_mut() {
        let mut i = 0;
        while i < job.steps.len() {
            let needed: Vec<&str> = job.steps[i]
                .commands()
                .iter()
                .filter_map(|c| table.tool_invoked_by(c))
                .filter(|tool| {
                    !job.steps[..=i]
                        .iter()
                        .flat_map(Step::commands)
                        .any(|c| table.installs(c, tool))
                })
                .collect();
            let mut inserted = 0;
            for tool in needed {
                let Some(install) = table.install_command(tool).and_then(|c| normalize_command(c).ok()) else {
                    continue;
                };
                job.steps.insert(i, Step::run(vec![install]));
                inserted += 1;
                warnings.push(TranspileWarning::new(
                    WarningCode::PackageInjected,
                    format!("jobs.{id}: `{tool}` is not preinstalled on GitHub runners; installing it"),
                    format!("jobs.{id}.steps[{}]", i),
                ));
            }
            i += inserted + 1;
        }
    }
    (out, warnings)
}

/// Whether a step (or its job) already passes a credential to `tool`.
pub(crate) fn has_credential(step: &Step, job: &Job, token_env: &[String]) -> bool {
    let in_env = |env: &indexmap::IndexMap<String, String>| {
        env.keys().any(|k| token_env.contains(k))
            || env.values().any(|v| !expr::secret_references(v).is_empty())
    };
    in_env(&step.env)
        || in_env(&job.env)
        || step
            .commands()
            .iter()
            .any(|c| !expr::secret_references(&c.text).is_empty())
}

/// Adds the credential environment of tools such as coveralls to the steps
/// that invoke them.
pub(crate) fn inject_credentials(
    wf: &mut Workflow,
    table: &CredentialTable,
    warnings: &mut Vec<TranspileWarning>,
) {
    for (id, job) in wf.jobs.iter_mut() {
        let snapshot = job.clone();
        for (i, step) in job.steps.iter_mut().enumerate() {
            let Some((tool, spec)) = step.commands().iter().find_map(|c| table.tool_invoked_by(c)) else {
                continue;
            };
            if spec.inject.is_empty() || has_credential(step, &snapshot, &spec.token_env) {
                continue;
            }
            let tool = tool.to_string();
            for (k, v) in &spec.inject {
                step.env.entry(k.clone()).or_insert_with(|| v.clone());
            }
            warnings.push(TranspileWarning::new(
                WarningCode::ImplicitDefaultAdded,
                format!("jobs.{id}: credentials passed to `{tool}`"),
                format!("jobs.{id}.steps[{i}].env"),
            ));
        }
    }
}
