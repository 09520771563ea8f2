use std::collections::BTreeSet;

use indexmap::IndexMap;

use super::{Issue, IssueType, LintContext};
use crate::expr;
use crate::model::Workflow;
use crate::transpile::has_credential;
use crate::yaml::Node;

pub fn detect_environment(candidate: &Workflow, ctx: &LintContext) -> Vec<Issue> {
    check(candidate, None, ctx)
}

pub(super) fn check(wf: &Workflow, tree: Option<&Node>, ctx: &LintContext) -> Vec<Issue> {
    let mut out = Vec::new();
    obsolete_actions(wf, ctx, &mut out);
    let top_env: IndexMap<String, String> = tree
        .and_then(|t| t.get("env"))
        .map(|env| {
            env.entries()
                .filter_map(|(k, v)| v.as_str().map(|s| (k.to_string(), s.to_string())))
                .collect()
        })
        .unwrap_or_default();
    undeclared_secrets(wf, &top_env, ctx, &mut out);
    unauthenticated_tools(wf, &top_env, ctx, &mut out);
    out
}

fn obsolete_actions(wf: &Workflow, ctx: &LintContext, out: &mut Vec<Issue>) {
    for (id, job) in &wf.jobs {
        for (i, step) in job.steps.iter().enumerate() {
            let Some(action) = step.action() else { continue };
            let (Some(minimum), Some(major)) = (ctx.action_registry.minimum_major(action), action.major_version())
            else {
                continue;
            };
            if major < minimum {
                out.push(Issue::new(
                    IssueType::ObsoleteAction,
                    format!("jobs.{id}.steps[{i}].uses"),
                    format!("{action} is no longer supported; use v{minimum} or later"),
                    action.to_string(),
                ));
            }
        }
    }
}

/// Every string of the workflow that may carry an expression, with its path.
fn expression_sites<'a>(wf: &'a Workflow, top_env: &'a IndexMap<String, String>) -> Vec<(String, &'a str)> {
    let mut sites: Vec<(String, &str)> = top_env.iter().map(|(k, v)| (format!("env.{k}"), v.as_str())).collect();
    for (id, job) in &wf.jobs {
        sites.push((format!("jobs.{id}.runs-on"), &job.runs_on));
        sites.extend(job.env.iter().map(|(k, v)| (format!("jobs.{id}.env.{k}"), v.as_str())));
        for (i, step) in job.steps.iter().enumerate() {
            let at = format!("jobs.{id}.steps[{i}]");
            sites.extend(step.with_args.iter().map(|(k, v)| (format!("{at}.with.{k}"), v.as_str())));
            sites.extend(step.env.iter().map(|(k, v)| (format!("{at}.env.{k}"), v.as_str())));
            sites.extend(step.condition.iter().map(|c| (format!("{at}.if"), c.as_str())));
            sites.extend(step.commands().iter().map(|c| (format!("{at}.run"), c.text.as_str())));
        }
    }
    sites
}

fn undeclared_secrets(
    wf: &Workflow,
    top_env: &IndexMap<String, String>,
    ctx: &LintContext,
    out: &mut Vec<Issue>,
) {
    let mut seen = BTreeSet::new();
    for (path, text) in expression_sites(wf, top_env) {
        for name in expr::secret_references(text) {
            if ctx.has_secret(&name) || !seen.insert((path.clone(), name.clone())) {
                continue;
            }
            out.push(Issue::new(
                IssueType::MissingSecret,
                path.clone(),
                format!("secret {name} is not configured for the repository"),
                format!("${{{{ secrets.{name} }}}}"),
            ));
        }
    }
}

fn unauthenticated_tools(
    wf: &Workflow,
    top_env: &IndexMap<String, String>,
    ctx: &LintContext,
    out: &mut Vec<Issue>,
) {
    for (id, job) in &wf.jobs {
        for (i, step) in job.steps.iter().enumerate() {
            let Some((tool, spec)) = step.commands().iter().find_map(|c| ctx.credentials.tool_invoked_by(c)) else {
                continue;
            };
            let global = top_env.keys().any(|k| spec.token_env.contains(k))
                || top_env.values().any(|v| !expr::secret_references(v).is_empty());
            if global || has_credential(step, job, &spec.token_env) {
                continue;
            }
            let evidence = step
                .commands()
                .iter()
                .find(|c| ctx.credentials.tool_invoked_by(c).is_some())
                .map(|c| c.text.clone())
                .unwrap_or_default();
            out.push(Issue::new(
                IssueType::MissingSecret,
                format!("jobs.{id}.steps[{i}].run"),
                format!(
                    "`{tool}` cannot authenticate: none of {} is set and no secret is passed",
                    spec.token_env.join(", ")
                ),
                evidence,
            ));
        }
    }
}
