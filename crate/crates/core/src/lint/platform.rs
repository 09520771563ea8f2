use std::sync::LazyLock;

use regex::Regex;

use super::{Issue, IssueType, LintContext};
use crate::data::{DenyList, PackageTable};
use crate::expr;
use crate::model::{is_trailing_zero_number, Workflow, LANGUAGES};
use crate::yaml::{format_path, parse_document, Node, NodeValue, PathSeg, ScalarStyle};

/// `NAME=value`, the Travis way of writing an environment variable.
static ASSIGNMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*=").unwrap());
/// Travis conditional syntax (`branch = main`, `tag IS present`, …).
static TRAVIS_CONDITION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(branch|tag|type|repo|os|sender|fork|head_branch|commit_message)\s*(=|!=|=~|\bIN\b|\bIS\b)")
        .unwrap()
});

const SUPPORTED_ARCHES: &[&str] = &["x64", "arm64"];
/// Travis architecture names that show up as runner labels.
const TRAVIS_ARCHES: &[&str] = &["amd64", "x86_64", "aarch64", "arm64-graviton2", "ppc64le", "s390x"];

pub fn detect_platform(candidate: &Workflow, candidate_text: &str, ctx: &LintContext) -> Vec<Issue> {
    match parse_document(candidate_text) {
        Ok(Some(tree)) => {
            let mut issues = check(candidate, &tree, ctx);
            super::locate(&mut issues, &tree);
            issues
        }
        _ => Vec::new(),
    }
}

pub(super) fn check(wf: &Workflow, tree: &Node, ctx: &LintContext) -> Vec<Issue> {
    let mut out = Vec::new();
    unsupported_keys(tree, &ctx.deny_list, &mut out);
    unsupported_expressions(tree, &mut out);
    unsupported_architectures(wf, &mut out);
    trailing_zeros(tree, &mut out);
    unspecified_defaults(wf, ctx, &mut out);
    missing_packages(wf, &ctx.package_table, &mut out);
    out
}

fn jobs(tree: &Node) -> impl Iterator<Item = (&str, &Node)> {
    tree.get("jobs").into_iter().flat_map(Node::entries)
}

fn steps(job: &Node) -> &[Node] {
    job.get("steps").and_then(Node::as_seq).unwrap_or(&[])
}

fn unsupported_keys(tree: &Node, deny: &DenyList, out: &mut Vec<Issue>) {
    let mut flag = |node: &Node, key: &str, path: String| {
        let line = node.key_node(key).map_or(node.line, |k| k.line);
        out.push(
            Issue::new(
                IssueType::UnsupportedKey,
                path,
                format!("`{key}` is a Travis CI key with no meaning in a workflow"),
                key,
            )
            .at_line(line),
        );
    };
    let mut scan = |node: &Node, allowed: &std::collections::BTreeSet<String>, prefix: &str| {
        for (key, _) in node.entries() {
            if allowed.contains(key) {
                let path = if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") };
                flag(node, key, path);
            }
        }
    };
    scan(tree, &deny.top, "");
    for (id, job) in jobs(tree) {
        scan(job, &deny.job, &format!("jobs.{id}"));
        if let Some(strategy) = job.get("strategy") {
            scan(strategy, &deny.strategy, &format!("jobs.{id}.strategy"));
            if let Some(matrix) = strategy.get("matrix") {
                scan(matrix, &deny.matrix, &format!("jobs.{id}.strategy.matrix"));
            }
        }
        for (i, step) in steps(job).iter().enumerate() {
            scan(step, &deny.step, &format!("jobs.{id}.steps[{i}]"));
        }
    }
}

fn is_assignment(text: &str) -> bool {
    ASSIGNMENT.is_match(text.trim_start())
}

fn unsupported_expressions(tree: &Node, out: &mut Vec<Issue>) {
    let mut envs: Vec<(String, &Node)> = Vec::new();
    let mut conditions: Vec<(String, &Node)> = Vec::new();
    envs.extend(tree.get("env").map(|e| ("env".to_string(), e)));
    for (id, job) in jobs(tree) {
        envs.extend(job.get("env").map(|e| (format!("jobs.{id}.env"), e)));
        conditions.extend(job.get("if").map(|c| (format!("jobs.{id}.if"), c)));
        for (i, step) in steps(job).iter().enumerate() {
            envs.extend(step.get("env").map(|e| (format!("jobs.{id}.steps[{i}].env"), e)));
            conditions.extend(step.get("if").map(|c| (format!("jobs.{id}.steps[{i}].if"), c)));
        }
    }
    for (path, env) in envs {
        if let Some((at, node, text)) = assignment_in(env, &path) {
            out.push(
                Issue::new(
                    IssueType::UnsupportedExpression,
                    at,
                    "environment variables are written as `NAME=value` strings; workflows need a `NAME: value` mapping",
                    text,
                )
                .at_line(node.line),
            );
        }
    }
    for (path, node) in conditions {
        let Some(text) = node.as_str() else { continue };
        if TRAVIS_CONDITION.is_match(text) || text.contains("TRAVIS_") {
            out.push(
                Issue::new(
                    IssueType::UnsupportedExpression,
                    path,
                    "condition uses Travis CI syntax instead of a workflow expression",
                    text,
                )
                .at_line(node.line),
            );
        }
    }
}

/// First `NAME=value` string inside an env node: a scalar, a list of them,
/// or a Travis `global:`/`matrix:` section.
fn assignment_in<'a>(env: &'a Node, path: &str) -> Option<(String, &'a Node, String)> {
    match &env.value {
        NodeValue::Scalar(s) => is_assignment(&s.text).then(|| (path.to_string(), env, s.text.clone())),
        NodeValue::Sequence(items) => items.iter().enumerate().find_map(|(i, item)| {
            let text = item.as_str()?;
            is_assignment(text).then(|| (format!("{path}[{i}]"), item, text.to_string()))
        }),
        NodeValue::Mapping(_) => env.entries().find_map(|(key, value)| match value.value {
            NodeValue::Scalar(_) => None,
            _ => assignment_in(value, &format!("{path}.{key}")),
        }),
    }
}

fn unsupported_architectures(wf: &Workflow, out: &mut Vec<Issue>) {
    let mut flag = |path: String, value: &str| {
        out.push(Issue::new(
            IssueType::UnsupportedArchitecture,
            path,
            format!("architecture {value:?} is not available on GitHub-hosted runners (x64 and arm64 only)"),
            value,
        ));
    };
    let unsupported = |v: &str| !expr::is_expression(v) && !SUPPORTED_ARCHES.contains(&v.to_ascii_lowercase().as_str());
    for (id, job) in &wf.jobs {
        if let Some(matrix) = &job.strategy_matrix {
            for axis in ["arch", "architecture"] {
                for (i, v) in matrix.axes.get(axis).into_iter().flatten().enumerate() {
                    if unsupported(&v.raw_text) {
                        flag(format!("jobs.{id}.strategy.matrix.{axis}[{i}]"), &v.raw_text);
                    }
                }
                for (r, row) in matrix.include.iter().enumerate() {
                    if let Some(v) = row.get(axis).filter(|v| unsupported(&v.raw_text)) {
                        flag(format!("jobs.{id}.strategy.matrix.include[{r}].{axis}"), &v.raw_text);
                    }
                }
            }
        }
        for label in job.runs_on.split(',').map(str::trim) {
            if TRAVIS_ARCHES.contains(&label.to_ascii_lowercase().as_str()) {
                flag(format!("jobs.{id}.runs-on"), label);
            }
        }
        for (i, step) in job.steps.iter().enumerate() {
            if let Some(v) = step.with_args.get("architecture").filter(|v| unsupported(v)) {
                flag(format!("jobs.{id}.steps[{i}].with.architecture"), v);
            }
        }
    }
}

/// Keys whose values are language or tool versions.
fn is_version_key(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.contains("version") || LANGUAGES.iter().any(|l| l.travis_key == key || l.language == key)
}

/// Plain scalars like `3.10` in version positions, which YAML reads as 3.1.
fn trailing_zeros(tree: &Node, out: &mut Vec<Issue>) {
    tree.walk(&mut |path: &[PathSeg], node: &Node| {
        let Some(s) = node.scalar() else { return };
        if s.style != ScalarStyle::Plain || s.spans_lines || !is_trailing_zero_number(&s.text) {
            return;
        }
        let owner = path.iter().rev().find_map(|seg| match seg {
            PathSeg::Key(k) => Some(k.as_str()),
            PathSeg::Index(_) => None,
        });
        if !owner.is_some_and(is_version_key) {
            return;
        }
        let read_as = s.text.trim_end_matches('0').trim_end_matches('.');
        out.push(
            Issue::new(
                IssueType::TrailingZero,
                format_path(path),
                format!("unquoted version {} is read as the number {read_as}; quote it", s.text),
                s.text.clone(),
            )
            .at_line(node.line),
        );
    });
}

fn unspecified_defaults(wf: &Workflow, ctx: &LintContext, out: &mut Vec<Issue>) {
    let registry = &ctx.action_registry;
    for (id, job) in &wf.jobs {
        let uses = |purpose: &str| {
            job.steps.iter().filter_map(|s| s.action()).any(|a| {
                registry.is(purpose, a) || a.repository().rsplit('/').next() == Some(purpose)
            })
        };
        let runs_commands = job.steps.iter().any(|s| !s.commands().is_empty());
        if runs_commands && !uses("checkout") {
            out.push(Issue::new(
                IssueType::UnspecifiedDefault,
                format!("jobs.{id}.steps"),
                "job runs commands but never checks out the repository",
                format!("jobs.{id}"),
            ));
        }
        let Some(matrix) = &job.strategy_matrix else { continue };
        for spec in LANGUAGES {
            let axis = [spec.version_input, spec.travis_key]
                .into_iter()
                .find(|a| matrix.defines(a));
            if let Some(axis) = axis {
                if !uses(spec.setup_purpose) {
                    out.push(Issue::new(
                        IssueType::UnspecifiedDefault,
                        format!("jobs.{id}.strategy.matrix.{axis}"),
                        format!("matrix varies `{axis}` but no {} step installs that version", spec.setup_purpose),
                        axis,
                    ));
                }
            }
        }
    }
}

fn missing_packages(wf: &Workflow, table: &PackageTable, out: &mut Vec<Issue>) {
    for (id, job) in &wf.jobs {
        let mut earlier = Vec::new();
        for (i, step) in job.steps.iter().enumerate() {
            for cmd in step.commands() {
                if let Some(tool) = table.tool_invoked_by(cmd) {
                    if !earlier.iter().any(|c| table.installs(c, tool)) {
                        out.push(Issue::new(
                            IssueType::MissingPackage,
                            format!("jobs.{id}.steps[{i}].run"),
                            format!("`{tool}` is not preinstalled on GitHub runners and is never installed"),
                            cmd.text.clone(),
                        ));
                    }
                }
                earlier.push(cmd.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yaml::parse_workflow;

    fn run(text: &str) -> Vec<(IssueType, String)> {
        let wf = parse_workflow(text).unwrap();
        detect_platform(&wf, text, &LintContext::default())
            .into_iter()
            .map(|i| (i.issue_type, i.path))
            .collect()
    }

    const HEAD: &str = "on: [push, pull_request]\njobs:\n  build:\n    runs-on: ubuntu-latest\n";
    const CHECKOUT: &str = "      - uses: actions/checkout@v4\n";

    #[test]
    fn fast_finish_in_matrix() {
        let text = format!("{HEAD}    strategy:\n      matrix:\n        fast-finish: true\n        os: [ubuntu-latest]\n    steps:\n{CHECKOUT}      - run: make\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnsupportedKey, "jobs.build.strategy.matrix.fast-finish".to_string())]
        );
    }

    #[test]
    fn travis_top_level_keys() {
        let text = format!("language: python\n{HEAD}    steps:\n{CHECKOUT}      - run: make\n");
        assert_eq!(run(&text), [(IssueType::UnsupportedKey, "language".to_string())]);
    }

    #[test]
    fn env_assignment_strings() {
        let text = format!("{HEAD}    env:\n      - TOX_ENV=flake8\n    steps:\n{CHECKOUT}      - run: tox\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnsupportedExpression, "jobs.build.env[0]".to_string())]
        );
        let text = format!("env: TOX_ENV=flake8\n{HEAD}    steps:\n{CHECKOUT}      - run: tox\n");
        assert_eq!(run(&text), [(IssueType::UnsupportedExpression, "env".to_string())]);
        let text = format!("{HEAD}    env:\n      TOX_ENV: flake8\n    steps:\n{CHECKOUT}      - run: tox\n");
        assert_eq!(run(&text), []);
    }

    #[test]
    fn travis_condition_syntax() {
        let text = format!("{HEAD}    steps:\n{CHECKOUT}      - run: make deploy\n        if: branch = master\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnsupportedExpression, "jobs.build.steps[1].if".to_string())]
        );
    }

    #[test]
    fn unsupported_arch_values() {
        let text = format!("{HEAD}    strategy:\n      matrix:\n        arch: [x64, ppc64le]\n    steps:\n{CHECKOUT}      - run: make\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnsupportedArchitecture, "jobs.build.strategy.matrix.arch[1]".to_string())]
        );
        let text = "on: push\njobs:\n  build:\n    runs-on: s390x\n    steps:\n      - uses: actions/checkout@v4\n      - run: make\n";
        assert_eq!(
            run(text),
            [(IssueType::UnsupportedArchitecture, "jobs.build.runs-on".to_string())]
        );
    }

    #[test]
    fn trailing_zero_positions() {
        let text = format!("{HEAD}    strategy:\n      matrix:\n        python-version: [3.9, 3.10, \"3.10\"]\n    steps:\n{CHECKOUT}      - uses: actions/setup-python@v5\n        with:\n          python-version: 3.10\n      - run: echo 3.10\n");
        assert_eq!(
            run(&text),
            [
                (IssueType::TrailingZero, "jobs.build.strategy.matrix.python-version[1]".to_string()),
                (IssueType::TrailingZero, "jobs.build.steps[1].with.python-version".to_string()),
            ]
        );
        let text = format!("{HEAD}    timeout-minutes: 10.0\n    steps:\n{CHECKOUT}      - run: make\n");
        assert_eq!(run(&text), []);
    }

    #[test]
    fn missing_checkout_and_setup() {
        let text = format!("{HEAD}    steps:\n      - run: make\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnspecifiedDefault, "jobs.build.steps".to_string())]
        );
        let text = format!("{HEAD}    strategy:\n      matrix:\n        python-version: [\"3.9\"]\n    steps:\n{CHECKOUT}      - run: pytest\n");
        assert_eq!(
            run(&text),
            [(IssueType::UnspecifiedDefault, "jobs.build.strategy.matrix.python-version".to_string())]
        );
        let text = format!("{HEAD}    steps:\n      - uses: actions/upload-artifact@v4\n");
        assert_eq!(run(&text), []);
    }

    #[test]
    fn preinstalled_tools_must_be_installed() {
        let text = format!("{HEAD}    steps:\n{CHECKOUT}      - run: nosetests\n");
        assert_eq!(
            run(&text),
            [(IssueType::MissingPackage, "jobs.build.steps[1].run".to_string())]
        );
        let text = format!("{HEAD}    steps:\n{CHECKOUT}      - run: |\n          pip install nose==1.3.7\n          nosetests\n");
        assert_eq!(run(&text), []);
    }
}
