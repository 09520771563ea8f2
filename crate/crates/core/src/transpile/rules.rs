use indexmap::IndexMap;

use super::{TranspileError, TranspileOptions, TranspileWarning, WarningCode};
use crate::model::{EnvEntry, Matrix, MatrixEntry, TravisConfig, VersionLiteral};
use crate::yaml::{Node, DEFAULT_STAGE};

/// Converts env entries to a workflow `env:` mapping. Later duplicates win.
pub fn map_env(entries: &[EnvEntry]) -> (IndexMap<String, String>, Vec<TranspileWarning>) {
    map_env_at(entries, "env")
}

pub(crate) fn map_env_at(
    entries: &[EnvEntry],
    source_path: &str,
) -> (IndexMap<String, String>, Vec<TranspileWarning>) {
    let mut out = IndexMap::new();
    let mut warnings = Vec::new();
    for entry in entries {
        if let Some(previous) = out.insert(entry.name.clone(), entry.value.clone()) {
            warnings.push(TranspileWarning::new(
                WarningCode::DuplicateEnv,
                format!(
                    "{} is set more than once; keeping {:?} over {:?}",
                    entry.name, entry.value, previous
                ),
                source_path,
            ));
        }
    }
    (out, warnings)
}

/// Runner label for a Travis `os:` value, and whether the value was known
/// (unknown values pass through as labels).
pub fn runner_for_os(os: &str, opts: &TranspileOptions) -> (String, bool) {
    match os {
        "linux" => (opts.default_runner.clone(), true),
        "osx" => ("macos-latest".into(), true),
        "windows" => ("windows-latest".into(), true),
        other => (other.to_string(), false),
    }
}

/// Workflow architecture for a Travis `arch:` value.
pub fn map_arch(arch: &str) -> Option<&'static str> {
    match arch {
        "amd64" | "x64" | "x86_64" => Some("x64"),
        "arm64" | "arm64-graviton2" | "aarch64" => Some("arm64"),
        _ => None,
    }
}

pub(crate) fn runners(
    os_list: &[String],
    opts: &TranspileOptions,
    path: &str,
    warnings: &mut Vec<TranspileWarning>,
) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for os in os_list {
        let (label, known) = runner_for_os(os, opts);
        if !known {
            warnings.push(TranspileWarning::new(
                WarningCode::RunnerPassthrough,
                format!("no runner mapping for os {os:?}; using it as the runner label"),
                path,
            ));
        }
        if !out.contains(&label) {
            out.push(label);
        }
    }
    out
}

pub(crate) fn arches(
    arch_list: &[String],
    opts: &TranspileOptions,
    path: &str,
    warnings: &mut Vec<TranspileWarning>,
) -> Result<Vec<String>, TranspileError> {
    let mut out: Vec<String> = Vec::new();
    for arch in arch_list {
        match map_arch(arch) {
            Some(a) => {
                if !out.iter().any(|x| x == a) {
                    out.push(a.to_string());
                }
            }
            None if opts.strict_arch => {
                return Err(TranspileError::UnsupportedArchitecture(arch.clone()))
            }
            None => warnings.push(TranspileWarning::new(
                WarningCode::SkippedArch,
                format!("architecture {arch:?} is not available on GitHub-hosted runners"),
                path,
            )),
        }
    }
    Ok(out)
}

/// Single-variable env matrices (`env: [A=1, A=2]`) become an axis named
/// after the variable. Returns `None` for shapes that have no axis form.
pub(crate) fn env_matrix_axis(node: &Node) -> Option<(String, Vec<VersionLiteral>)> {
    let items = node.as_seq()?;
    let mut name: Option<String> = None;
    let mut values = Vec::new();
    for item in items {
        let entries = EnvEntry::parse_assignments(item.as_str()?).ok()?;
        let [entry] = entries.as_slice() else {
            return None;
        };
        match &name {
            None => name = Some(entry.name.clone()),
            Some(n) if *n != entry.name => return None,
            Some(_) => {}
        }
        values.push(VersionLiteral::quoted(entry.value.clone()));
    }
    name.map(|n| (n, values))
}

/// Builds the job matrix of the top-level (non-stage) build.
pub fn map_matrix(
    config: &TravisConfig,
    opts: &TranspileOptions,
) -> Result<(Matrix, Vec<TranspileWarning>), TranspileError> {
    let mut warnings = Vec::new();
    let mut matrix = Matrix::default();
    let spec = config.language_spec();
    if let Some(spec) = spec {
        if !config.versions.is_empty() {
            matrix
                .axes
                .insert(spec.version_input.to_string(), config.versions.clone());
        }
    }
    let runner_labels = runners(&config.os_list, opts, "os", &mut warnings);
    if runner_labels.len() > 1 {
        matrix.axes.insert(
            "os".into(),
            runner_labels.iter().map(VersionLiteral::plain).collect(),
        );
    }
    let arch_values = arches(&config.arch_list, opts, "arch", &mut warnings)?;
    if !arch_values.is_empty() {
        matrix
            .axes
            .insert("arch".into(), arch_values.iter().map(VersionLiteral::plain).collect());
    }
    for (path, node) in &config.unmapped_env {
        if !is_env_matrix_path(path) {
            continue;
        }
        if let Some((name, values)) = env_matrix_axis(node) {
            matrix.axes.insert(name, values);
        }
    }

    // Travis `fast_finish: true` reports the build as soon as the required
    // jobs finish, without cancelling the rest; the nearest workflow setting is
    // to keep the remaining matrix jobs running, i.e. `fail-fast: false`.
    if config.matrix_extras.fast_finish == Some(true) {
        matrix.fail_fast = Some(false);
    }

    let stage_mode = is_stage_mode(config);
    for (i, entry) in config.matrix_extras.include.iter().enumerate() {
        if stage_mode {
            break;
        }
        let path = format!("jobs.include[{i}]");
        if let Some(row) = matrix_row(entry, config, opts, &path, &mut warnings)? {
            matrix.include.push(row);
        }
    }
    for (i, entry) in config.matrix_extras.exclude.iter().enumerate() {
        let path = format!("jobs.exclude[{i}]");
        let Some(row) = matrix_row(entry, config, opts, &path, &mut warnings)? else {
            continue;
        };
        if row.keys().all(|k| matrix.axes.contains_key(k)) {
            matrix.exclude.push(row);
        } else {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnsupported,
                "exclude entry names a dimension the matrix does not have",
                path,
            ));
        }
    }
    // Include rows that pick an OS need the runner to follow the matrix.
    if matrix.include.iter().any(|r| r.contains_key("os")) && !matrix.axes.contains_key("os") {
        let label = runner_labels
            .first()
            .cloned()
            .unwrap_or_else(|| opts.default_runner.clone());
        matrix.axes.insert("os".into(), vec![VersionLiteral::plain(label)]);
    }
    Ok((matrix, warnings))
}

pub(crate) fn is_env_matrix_path(path: &str) -> bool {
    matches!(path, "env" | "env.jobs" | "env.matrix")
}

fn matrix_row(
    entry: &MatrixEntry,
    config: &TravisConfig,
    opts: &TranspileOptions,
    path: &str,
    warnings: &mut Vec<TranspileWarning>,
) -> Result<Option<IndexMap<String, VersionLiteral>>, TranspileError> {
    let mut row = IndexMap::new();
    if let (Some(v), Some(spec)) = (&entry.version, config.language_spec()) {
        row.insert(spec.version_input.to_string(), v.clone());
    }
    if let Some(os) = &entry.os {
        let label = runners(std::slice::from_ref(os), opts, path, warnings);
        row.insert("os".into(), VersionLiteral::plain(label[0].clone()));
    }
    if let Some(arch) = &entry.arch {
        match arches(std::slice::from_ref(arch), opts, path, warnings)?.first() {
            Some(a) => {
                row.insert("arch".into(), VersionLiteral::plain(a.clone()));
            }
            // The whole entry targets an unavailable architecture.
            None => return Ok(None),
        }
    }
    for env in &entry.env {
        if config.global_env.iter().any(|g| g.name == env.name) {
            warnings.push(TranspileWarning::new(
                WarningCode::DroppedUnsupported,
                format!("{} is set globally and per entry; keeping the global value", env.name),
                path,
            ));
            continue;
        }
        row.insert(env.name.clone(), VersionLiteral::quoted(env.value.clone()));
    }
    for key in entry.extras.keys() {
        warnings.push(TranspileWarning::new(
            WarningCode::DroppedUnknownKey,
            format!("{key} has no workflow equivalent"),
            format!("{path}.{key}"),
        ));
    }
    Ok((!row.is_empty()).then_some(row))
}

/// Stage mode: the build is split into jobs, one group per stage.
pub(crate) fn is_stage_mode(config: &TravisConfig) -> bool {
    !config.stages.is_empty()
        || config
            .matrix_extras
            .include
            .iter()
            .any(|e| e.stage.is_some() || !e.phases.is_empty())
}

/// One generated job: which include entries it runs, if any.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct JobPlan {
    pub id: String,
    pub stage: String,
    pub needs: Vec<String>,
    /// `None` for the top-level build matrix.
    pub entries: Option<Vec<usize>>,
}

/// Job ids and `needs` edges, one job per stage (or per distinct entry shape
/// within a stage). Without stages there is a single `build` job.
pub fn map_stages(config: &TravisConfig) -> Result<Vec<(String, Vec<String>)>, TranspileError> {
    Ok(plan_jobs(config)?
        .into_iter()
        .map(|p| (p.id, p.needs))
        .collect())
}

pub(crate) fn plan_jobs(config: &TravisConfig) -> Result<Vec<JobPlan>, TranspileError> {
    let mut seen = std::collections::HashSet::new();
    for stage in &config.stages {
        if !seen.insert(stage.name.to_lowercase()) {
            return Err(TranspileError::DuplicateStage(stage.name.clone()));
        }
    }
    if !is_stage_mode(config) {
        return Ok(vec![JobPlan {
            id: "build".into(),
            stage: DEFAULT_STAGE.into(),
            needs: Vec::new(),
            entries: None,
        }]);
    }

    // Stage order: declared stages first, then stages in order of first use.
    let mut order: IndexMap<String, Vec<usize>> = config
        .stages
        .iter()
        .map(|s| (s.name.clone(), Vec::new()))
        .collect();
    let implicit = config.phases.contains_key(&crate::model::Phase::Script);
    if implicit && !order.contains_key(DEFAULT_STAGE) {
        order.shift_insert(0, DEFAULT_STAGE.into(), Vec::new());
    }
    let mut current = DEFAULT_STAGE.to_string();
    for (i, entry) in config.matrix_extras.include.iter().enumerate() {
        if let Some(stage) = &entry.stage {
            current = stage.clone();
        }
        order.entry(current.clone()).or_default().push(i);
    }

    let mut plans = Vec::new();
    let mut previous: Vec<String> = Vec::new();
    let mut used_ids = std::collections::HashSet::new();
    for (stage, entries) in order {
        let mut groups: Vec<Option<Vec<usize>>> = Vec::new();
        if implicit && stage == DEFAULT_STAGE {
            groups.push(None);
        }
        for i in entries {
            let entry = &config.matrix_extras.include[i];
            let same_shape = groups.iter_mut().flatten().find(|g| {
                let first = &config.matrix_extras.include[g[0]];
                first.phases == entry.phases
                    && first.os == entry.os
                    && first.arch == entry.arch
                    && first.env == entry.env
                    && first.extras.keys().eq(entry.extras.keys())
            });
            match same_shape {
                Some(group) => group.push(i),
                None => groups.push(Some(vec![i])),
            }
        }
        if groups.is_empty() {
            continue;
        }
        let base = unique_id(&sanitize_job_id(&stage), &mut used_ids);
        let mut ids = Vec::new();
        let count = groups.len();
        for (n, group) in groups.into_iter().enumerate() {
            let id = if count == 1 {
                base.clone()
            } else {
                unique_id(&format!("{base}-{}", n + 1), &mut used_ids)
            };
            ids.push(id.clone());
            plans.push(JobPlan {
                id,
                stage: stage.clone(),
                needs: previous.clone(),
                entries: group,
            });
        }
        previous = ids;
    }
    if plans.is_empty() {
        return Err(TranspileError::NothingToTranslate);
    }
    Ok(plans)
}

fn unique_id(base: &str, used: &mut std::collections::HashSet<String>) -> String {
    let mut id = base.to_string();
    let mut n = 2;
    while !used.insert(id.clone()) {
        id = format!("{base}-{n}");
        n += 1;
    }
    id
}

/// Job ids must start with a letter or `_` and contain only `[A-Za-z0-9_-]`.
pub fn sanitize_job_id(name: &str) -> String {
    let mut id: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect();
    while id.contains("--") {
        id = id.replace("--", "-");
    }
    let id = id.trim_matches('-').to_string();
    match id.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => id,
        Some(_) => format!("stage-{id}"),
        None => "stage".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EnvForm;
    use crate::yaml::parse_travis;

    #[test]
    fn env_assignment_becomes_mapping() {
        let entries = EnvEntry::parse_assignments("TOX_ENV=flake8").unwrap();
        let (env, warnings) = map_env(&entries);
        assert_eq!(env["TOX_ENV"], "flake8");
        assert!(warnings.is_empty());
        assert!(map_env(&[]).0.is_empty());
    }

    #[test]
    fn duplicate_env_last_wins() {
        let entries = vec![
            EnvEntry::new("A", "1", EnvForm::AssignmentString).unwrap(),
            EnvEntry::new("A", "2", EnvForm::AssignmentString).unwrap(),
        ];
        let (env, warnings) = map_env(&entries);
        assert_eq!(env.len(), 1);
        assert_eq!(env["A"], "2");
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].code, WarningCode::DuplicateEnv);
    }

    #[test]
    fn version_axis() {
        let cfg = parse_travis("language: python\npython: [3.8, 3.9]\nscript: pytest\n").unwrap();
        let (m, w) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        let raw: Vec<_> = m.axes["python-version"].iter().map(|v| v.raw_text.as_str()).collect();
        assert_eq!(raw, ["3.8", "3.9"]);
        assert!(w.is_empty());
    }

    #[test]
    fn no_axes_gives_empty_matrix() {
        let cfg = parse_travis("language: generic\nscript: make\n").unwrap();
        let (m, _) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn fast_finish_maps_to_fail_fast_false() {
        let cfg = parse_travis("language: python\npython: [3.8]\nscript: pytest\njobs:\n  fast_finish: true\n").unwrap();
        let (m, _) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        assert_eq!(m.fail_fast, Some(false));
    }

    #[test]
    fn unsupported_arch_is_skipped_or_fatal() {
        let cfg = parse_travis("language: python\narch: [amd64, ppc64le]\nscript: pytest\n").unwrap();
        let (m, w) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        assert_eq!(m.axes["arch"], vec![VersionLiteral::plain("x64")]);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, WarningCode::SkippedArch);
        assert!(w[0].detail.contains("ppc64le"));
        let strict = TranspileOptions {
            strict_arch: true,
            ..TranspileOptions::default()
        };
        assert_eq!(
            map_matrix(&cfg, &strict).unwrap_err(),
            TranspileError::UnsupportedArchitecture("ppc64le".into())
        );
    }

    #[test]
    fn os_list_becomes_axis() {
        let cfg = parse_travis("language: python\nos: [linux, osx]\nscript: pytest\n").unwrap();
        let (m, _) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        let os: Vec<_> = m.axes["os"].iter().map(|v| v.raw_text.as_str()).collect();
        assert_eq!(os, ["ubuntu-latest", "macos-latest"]);
    }

    #[test]
    fn env_matrix_with_one_variable_is_an_axis() {
        let cfg = parse_travis("language: python\nenv:\n  - TOX_ENV=py38\n  - TOX_ENV=flake8\nscript: tox\n").unwrap();
        let (m, _) = map_matrix(&cfg, &TranspileOptions::default()).unwrap();
        let v: Vec<_> = m.axes["TOX_ENV"].iter().map(|v| v.raw_text.as_str()).collect();
        assert_eq!(v, ["py38", "flake8"]);
    }

    #[test]
    fn stages_chain_through_needs() {
        let text = "language: python\njobs:\n  include:\n    - stage: test-release\n      script: make test\n    - stage: release\n      script: make release\n";
        let cfg = parse_travis(text).unwrap();
        assert_eq!(
            map_stages(&cfg).unwrap(),
            vec![
                ("test-release".to_string(), vec![]),
                ("release".to_string(), vec!["test-release".to_string()])
            ]
        );
    }

    #[test]
    fn no_stages_gives_one_build_job() {
        let cfg = parse_travis("language: python\nscript: pytest\n").unwrap();
        assert_eq!(map_stages(&cfg).unwrap(), vec![("build".to_string(), vec![])]);
    }

    #[test]
    fn three_stages_chain() {
        let text = "stages: [a, b, c]\njobs:\n  include:\n    - stage: a\n      script: x\n    - stage: b\n      script: y\n    - stage: c\n      script: z\n";
        let plan = map_stages(&parse_travis(text).unwrap()).unwrap();
        assert_eq!(plan[1], ("b".to_string(), vec!["a".to_string()]));
        assert_eq!(plan[2], ("c".to_string(), vec!["b".to_string()]));
    }

    #[test]
    fn duplicate_stage_names_are_rejected() {
        let text = "stages: [a, a]\njobs:\n  include:\n    - stage: a\n      script: x\n";
        assert_eq!(
            map_stages(&parse_travis(text).unwrap()).unwrap_err(),
            TranspileError::DuplicateStage("a".into())
        );
    }

    #[test]
    fn implicit_test_stage_precedes_entries() {
        let text = "language: python\npython: [3.8, 3.9]\nscript: pytest\njobs:\n  include:\n    - stage: deploy\n      script: make deploy\n";
        let plan = map_stages(&parse_travis(text).unwrap()).unwrap();
        assert_eq!(plan, vec![("test".into(), vec![]), ("deploy".into(), vec!["test".into()])]);
    }

    #[test]
    fn entries_with_different_scripts_share_a_stage() {
        let text = "jobs:\n  include:\n    - stage: lint\n      script: flake8\n    - script: mypy\n    - stage: ship\n      script: make\n";
        let plan = map_stages(&parse_travis(text).unwrap()).unwrap();
        let ids: Vec<_> = plan.iter().map(|p| p.0.as_str()).collect();
        assert_eq!(ids, ["lint-1", "lint-2", "ship"]);
        assert_eq!(plan[2].1, ["lint-1", "lint-2"]);
    }

    #[test]
    fn job_ids_are_sanitized() {
        assert_eq!(sanitize_job_id("Deploy to PyPI"), "deploy-to-pypi");
        assert_eq!(sanitize_job_id("1st"), "stage-1st");
        assert_eq!(sanitize_job_id("!!"), "stage");
    }
}
