use indexmap::IndexMap;

use super::node::{parse_document, Node, NodeValue};
use super::FrontendError;
use crate::model::{
    language_spec, split_commands, BranchFilter, CacheSpec, Command, EnvEntry, EnvForm,
    MatrixEntry, Phase, Phases, StageDef, TravisConfig, TravisMatrix, VersionLiteral,
};

/// Travis names the first stage `test` unless told otherwise.
pub const DEFAULT_STAGE: &str = "test";

pub fn parse_travis(text: &str) -> Result<TravisConfig, FrontendError> {
    if text.trim().is_empty() {
        return Err(FrontendError::EmptyConfiguration);
    }
    let root = parse_document(text)?.ok_or(FrontendError::EmptyConfiguration)?;
    if root.is_null() {
        return Err(FrontendError::EmptyConfiguration);
    }
    if root.as_map().is_none() {
        return Err(FrontendError::invalid("", "top level of .travis.yml must be a mapping"));
    }

    let mut config = TravisConfig {
        language: root.get("language").and_then(Node::as_str).map(str::to_string),
        ..TravisConfig::default()
    };
    let version_key = config
        .language
        .as_deref()
        .and_then(language_spec)
        .map(|l| l.travis_key);

    for (key, value) in root.entries() {
        let consumed = match key {
            "language" => true,
            k if Some(k) == version_key => {
                config.versions = version_literals(value);
                true
            }
            "os" => {
                config.os_list = string_list(value);
                true
            }
            "arch" => {
                config.arch_list = string_list(value);
                true
            }
            "env" => {
                parse_env(value, &mut config)?;
                true
            }
            "stages" => {
                config.stages = parse_stage_list(value);
                true
            }
            "jobs" | "matrix" => {
                parse_matrix(value, version_key, &mut config.matrix_extras, key)?;
                true
            }
            "cache" => {
                config.cache = parse_cache(value);
                true
            }
            "notifications" => {
                config.notifications = Some(value.clone());
                true
            }
            "branches" => {
                config.branch_filter = Some(parse_branches(value));
                true
            }
            k => match Phase::from_key(k) {
                Some(phase) => match phase_commands(value) {
                    Some(cmds) => {
                        config.phases.insert(phase, cmds);
                        true
                    }
                    // deploy providers and other structured values
                    None => false,
                },
                None => false,
            },
        };
        if consumed {
            config.named_keys.push(key.to_string());
        } else {
            config.raw_extras.insert(key.to_string(), value.clone());
        }
    }

    assign_stages(&mut config);
    Ok(config)
}

fn version_literals(node: &Node) -> Vec<VersionLiteral> {
    let literal = |n: &Node| {
        n.as_str().map(|s| VersionLiteral {
            raw_text: s.to_string(),
            quoted: n.is_quoted(),
        })
    };
    match &node.value {
        NodeValue::Sequence(items) => items.iter().filter_map(literal).collect(),
        NodeValue::Scalar(_) => literal(node).into_iter().collect(),
        NodeValue::Mapping(_) => Vec::new(),
    }
}

fn string_list(node: &Node) -> Vec<String> {
    match &node.value {
        NodeValue::Sequence(items) => items
            .iter()
            .filter_map(Node::as_str)
            .map(str::to_string)
            .collect(),
        NodeValue::Scalar(_) => node.as_str().map(str::to_string).into_iter().collect(),
        NodeValue::Mapping(_) => Vec::new(),
    }
}

/// Commands of a phase value; `None` when the value is not command-shaped.
fn phase_commands(node: &Node) -> Option<Vec<Command>> {
    match &node.value {
        NodeValue::Scalar(_) => {
            if node.is_null() || node.as_bool().is_some() {
                return Some(Vec::new());
            }
            let text = node.as_str()?;
            if text.trim() == "skip" {
                return Some(Vec::new());
            }
            Some(split_commands(text))
        }
        NodeValue::Sequence(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(split_commands(item.as_str()?));
            }
            Some(out)
        }
        NodeValue::Mapping(_) => None,
    }
}

fn env_entries(node: &Node) -> Result<Vec<EnvEntry>, FrontendError> {
    let bad = |e: crate::model::InvalidEnvName| FrontendError::invalid("env", e.to_string());
    match &node.value {
        NodeValue::Scalar(_) => match node.as_str() {
            Some(text) => EnvEntry::parse_assignments(text).map_err(bad),
            None => Ok(Vec::new()),
        },
        NodeValue::Sequence(items) => {
            let mut out = Vec::new();
            for item in items {
                match &item.value {
                    NodeValue::Scalar(_) => {
                        if let Some(text) = item.as_str() {
                            out.extend(EnvEntry::parse_assignments(text).map_err(bad)?);
                        }
                    }
                    // `- secure: ...` entries carry no usable value
                    _ if item.get("secure").is_some() => {}
                    NodeValue::Mapping(_) => out.extend(key_value_env(item).map_err(bad)?),
                    NodeValue::Sequence(_) => {}
                }
            }
            Ok(out)
        }
        NodeValue::Mapping(_) => key_value_env(node).map_err(bad),
    }
}

fn key_value_env(node: &Node) -> Result<Vec<EnvEntry>, crate::model::InvalidEnvName> {
    node.entries()
        .filter(|(k, _)| *k != "secure")
        .map(|(k, v)| EnvEntry::new(k, v.as_str().unwrap_or(""), EnvForm::KeyValue))
        .collect()
}

fn has_secure(node: &Node) -> bool {
    let mut found = false;
    node.walk(&mut |path, _| {
        if matches!(path.last(), Some(super::node::PathSeg::Key(k)) if k == "secure") {
            found = true;
        }
    });
    found
}

fn parse_env(node: &Node, config: &mut TravisConfig) -> Result<(), FrontendError> {
    let is_split_form = node.get("global").is_some()
        || node.get("jobs").is_some()
        || node.get("matrix").is_some();
    if is_split_form {
        for (key, value) in node.entries() {
            match key {
                "global" => {
                    config.global_env.extend(env_entries(value)?);
                    if has_secure(value) {
                        config
                            .unmapped_env
                            .insert("env.global.secure".into(), value.clone());
                    }
                }
                other => {
                    config
                        .unmapped_env
                        .insert(format!("env.{other}"), value.clone());
                }
            }
        }
        return Ok(());
    }
    match &node.value {
        // a top-level list is an env matrix: one build per entry
        NodeValue::Sequence(items) if items.len() > 1 => {
            config.unmapped_env.insert("env".into(), node.clone());
        }
        _ => {
            config.global_env.extend(env_entries(node)?);
            if has_secure(node) {
                config.unmapped_env.insert("env.secure".into(), node.clone());
            }
        }
    }
    Ok(())
}

fn parse_stage_list(node: &Node) -> Vec<StageDef> {
    node.as_seq()
        .unwrap_or(&[])
        .iter()
        .filter_map(|item| {
            let (name, condition) = match &item.value {
                NodeValue::Scalar(_) => (item.as_str()?.to_string(), None),
                NodeValue::Mapping(_) => (
                    item.get("name")?.as_str()?.to_string(),
                    item.get("if").and_then(Node::as_str).map(str::to_string),
                ),
                NodeValue::Sequence(_) => return None,
            };
            Some(StageDef {
                name,
                jobs: Vec::new(),
                condition,
            })
        })
        .collect()
}

fn parse_matrix(
    node: &Node,
    version_key: Option<&str>,
    matrix: &mut TravisMatrix,
    parent: &str,
) -> Result<(), FrontendError> {
    let entries = |n: &Node| -> Result<Vec<MatrixEntry>, FrontendError> {
        n.as_seq()
            .unwrap_or(&[])
            .iter()
            .map(|e| parse_matrix_entry(e, version_key))
            .collect()
    };
    match &node.value {
        NodeValue::Sequence(_) => matrix.include.extend(entries(node)?),
        NodeValue::Mapping(_) => {
            for (key, value) in node.entries() {
                match key {
                    "include" => matrix.include.extend(entries(value)?),
                    "exclude" => matrix.exclude.extend(entries(value)?),
                    "allow_failures" => matrix.allow_failures.extend(entries(value)?),
                    "fast_finish" => matrix.fast_finish = value.as_bool(),
                    other => {
                        matrix
                            .extras
                            .insert(format!("{parent}.{other}"), value.clone());
                    }
                }
            }
        }
        NodeValue::Scalar(_) => {}
    }
    Ok(())
}

fn parse_matrix_entry(node: &Node, version_key: Option<&str>) -> Result<MatrixEntry, FrontendError> {
    let mut entry = MatrixEntry::default();
    let mut phases = Phases::new();
    for (key, value) in node.entries() {
        match key {
            "stage" => entry.stage = value.as_str().map(str::to_string),
            "name" => entry.name = value.as_str().map(str::to_string),
            "os" => entry.os = value.as_str().map(str::to_string),
            "arch" => entry.arch = value.as_str().map(str::to_string),
            "env" => entry.env = env_entries(value)?,
            k if Some(k) == version_key => {
                entry.version = value.as_str().map(|s| VersionLiteral {
                    raw_text: s.to_string(),
                    quoted: value.is_quoted(),
                })
            }
            k => match Phase::from_key(k).zip(phase_commands(value)) {
                Some((phase, cmds)) => {
                    phases.insert(phase, cmds);
                }
                None => {
                    entry.extras.insert(k.to_string(), value.clone());
                }
            },
        }
    }
    entry.phases = phases;
    Ok(entry)
}

fn parse_cache(node: &Node) -> Option<CacheSpec> {
    let mut spec = CacheSpec::default();
    match &node.value {
        NodeValue::Scalar(_) => {
            if node.as_bool() == Some(false) {
                return None;
            }
            spec.managers.extend(node.as_str().map(str::to_string));
        }
        NodeValue::Sequence(items) => {
            for item in items {
                match item.as_str() {
                    Some(s) => spec.managers.push(s.to_string()),
                    None => {
                        if let Some(dirs) = item.get("directories") {
                            spec.directories.extend(string_list(dirs));
                        }
                    }
                }
            }
        }
        NodeValue::Mapping(_) => {
            for (key, value) in node.entries() {
                match key {
                    "directories" => spec.directories.extend(string_list(value)),
                    k if value.as_bool() != Some(false) => spec.managers.push(k.to_string()),
                    _ => {}
                }
            }
        }
    }
    (!spec.managers.is_empty() || !spec.directories.is_empty()).then_some(spec)
}

fn parse_branches(node: &Node) -> BranchFilter {
    BranchFilter {
        include: node.get("only").map(string_list).unwrap_or_default(),
        exclude: node.get("except").map(string_list).unwrap_or_default(),
    }
}

/// Resolves which stage every include entry belongs to. Entries without a
/// `stage:` inherit the previous entry's stage.
fn assign_stages(config: &mut TravisConfig) {
    if !config.matrix_extras.include.iter().any(|e| e.stage.is_some()) {
        return;
    }
    // Duplicate declarations are reported by the transpiler; keep them visible.
    let mut seen = std::collections::HashSet::new();
    if !config.stages.iter().all(|s| seen.insert(s.name.as_str())) {
        return;
    }
    let mut current = DEFAULT_STAGE.to_string();
    let mut order: IndexMap<String, Vec<usize>> = config
        .stages
        .iter()
        .map(|s| (s.name.clone(), Vec::new()))
        .collect();
    for (i, entry) in config.matrix_extras.include.iter_mut().enumerate() {
        if let Some(stage) = &entry.stage {
            current = stage.clone();
        }
        entry.stage = Some(current.clone());
        order.entry(current.clone()).or_default().push(i);
    }
    let declared: IndexMap<String, Option<String>> = config
        .stages
        .drain(..)
        .map(|s| (s.name, s.condition))
        .collect();
    config.stages = order
        .into_iter()
        .map(|(name, jobs)| StageDef {
            condition: declared.get(&name).cloned().flatten(),
            name,
            jobs,
        })
        .collect();
}

#[cfg(test)]
mod tests {
    use super::*;

    const PYTHON_MATRIX: &str = "language: python\npython:\n  - 3.8\n  - 3.9\ninstall:\n  - python setup.py develop\nscript:\n  - python -m pytest\nnotifications:\n  email:\n    - dev@example.com\n";

    #[test]
    fn parses_the_python_example() {
        let cfg = parse_travis(PYTHON_MATRIX).unwrap();
        assert_eq!(cfg.language.as_deref(), Some("python"));
        let raw: Vec<_> = cfg.versions.iter().map(|v| v.raw_text.as_str()).collect();
        assert_eq!(raw, ["3.8", "3.9"]);
        assert_eq!(cfg.phases[&Phase::Install][0].normalized, "python setup.py develop");
        assert_eq!(cfg.phases[&Phase::Script][0].normalized, "python -m pytest");
        assert!(cfg.notifications.is_some());
        assert!(cfg.raw_extras.is_empty());
    }

    #[test]
    fn empty_document_is_rejected() {
        assert_eq!(parse_travis(""), Err(FrontendError::EmptyConfiguration));
        assert_eq!(parse_travis("# only a comment\n"), Err(FrontendError::EmptyConfiguration));
    }

    #[test]
    fn minimal_document() {
        let cfg = parse_travis("language: python\npython: [3.8]").unwrap();
        assert_eq!(cfg.versions, vec![VersionLiteral::plain("3.8")]);
    }

    #[test]
    fn no_version_axis() {
        let cfg = parse_travis("language: python\nscript: pytest\n").unwrap();
        assert!(crate::model::version_axis_values(&cfg).is_empty());
    }

    #[test]
    fn quoted_versions_keep_their_quoting() {
        let cfg = parse_travis("language: python\npython:\n  - \"3.10\"\n  - 3.10\n").unwrap();
        assert_eq!(cfg.versions[0].raw_text, "3.10");
        assert!(cfg.versions[0].quoted);
        assert!(!cfg.versions[1].quoted);
    }

    #[test]
    fn unknown_keys_land_in_raw_extras() {
        let cfg = parse_travis("language: python\ndist: xenial\nsudo: false\nscript: make\n").unwrap();
        let extras: Vec<_> = cfg.raw_extras.keys().collect();
        assert_eq!(extras, ["dist", "sudo"]);
        let all: Vec<_> = cfg.all_top_level_keys().into_iter().collect();
        assert_eq!(all, ["dist", "language", "script", "sudo"]);
    }

    #[test]
    fn deploy_provider_is_kept_opaque() {
        let cfg = parse_travis("script: make\ndeploy:\n  provider: pypi\n").unwrap();
        assert!(cfg.raw_extras.contains_key("deploy"));
        assert!(!cfg.phases.contains_key(&Phase::Deploy));
    }

    #[test]
    fn env_forms() {
        let cfg = parse_travis("env:\n  global:\n    - TOX_ENV=flake8\n    - A=1 B=2\n").unwrap();
        let names: Vec<_> = cfg.global_env.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["TOX_ENV", "A", "B"]);
        assert!(cfg
            .global_env
            .iter()
            .all(|e| e.origin_form == EnvForm::AssignmentString));

        let cfg = parse_travis("env: TOX_ENV=flake8\n").unwrap();
        assert_eq!(cfg.global_env[0].value, "flake8");

        let cfg = parse_travis("env:\n  - A=1\n  - A=2\n").unwrap();
        assert!(cfg.global_env.is_empty());
        assert!(cfg.unmapped_env.contains_key("env"));
    }

    #[test]
    fn stages_and_entries() {
        let text = "language: python\nscript: pytest\nstages:\n  - test-release\n  - release\njobs:\n  include:\n    - stage: test-release\n      script: make test-release\n    - stage: release\n      script: make release\n";
        let cfg = parse_travis(text).unwrap();
        let names: Vec<_> = cfg.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["test-release", "release"]);
        assert_eq!(cfg.stages[0].jobs, [0]);
        assert_eq!(cfg.stages[1].jobs, [1]);
    }

    #[test]
    fn stage_inheritance_and_default_stage() {
        let text = "script: t\njobs:\n  include:\n    - python: 3.8\n      stage: lint\n      script: flake8\n    - script: mypy\n    - stage: deploy\n      script: d\n";
        let cfg = parse_travis(text).unwrap();
        assert_eq!(cfg.matrix_extras.include[1].stage.as_deref(), Some("lint"));
        let names: Vec<_> = cfg.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["lint", "deploy"]);
    }

    #[test]
    fn fast_finish_and_cache() {
        let cfg = parse_travis("matrix:\n  fast_finish: true\ncache: pip\n").unwrap();
        assert_eq!(cfg.matrix_extras.fast_finish, Some(true));
        assert_eq!(cfg.cache.unwrap().managers, ["pip"]);
        let cfg = parse_travis("cache:\n  directories:\n    - $HOME/.cache\n").unwrap();
        assert_eq!(cfg.cache.unwrap().directories, ["$HOME/.cache"]);
    }

    #[test]
    fn phases_accept_scalars_and_skip() {
        let cfg = parse_travis("install: skip\nscript: |\n  make\n  make test\n").unwrap();
        assert!(cfg.phases[&Phase::Install].is_empty());
        assert_eq!(cfg.phases[&Phase::Script].len(), 2);
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_travis("a:\n  b: 1\n c: 2\n") {
            Err(FrontendError::Yaml(e)) => assert_eq!(e.line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
