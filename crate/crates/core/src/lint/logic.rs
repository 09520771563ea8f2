use std::collections::{BTreeSet, HashMap, HashSet};

use super::{Issue, IssueType};
use crate::data::PackageTable;
use crate::expr;
use crate::model::{Phase, Step, StepKind, TravisConfig, Workflow};
use crate::transpile::{plan_jobs, sanitize_job_id};

/// Commands whose effect a workflow gets from an action instead.
const ACTION_EQUIVALENTS: &[(&str, &str)] = &[
    ("nvm install", "setup-node"),
    ("nvm use", "setup-node"),
    ("rvm install", "setup-ruby"),
    ("rvm use", "setup-ruby"),
    ("jdk_switcher use", "setup-java"),
    ("gimme", "setup-go"),
    ("phpenv", "setup-php"),
    ("pyenv install", "setup-python"),
    ("pyenv global", "setup-python"),
    ("git fetch --unshallow", "checkout"),
    ("git submodule update", "checkout"),
];

/// Compares the candidate against the Travis configuration it translates.
pub fn detect_logic(source: &TravisConfig, candidate: &Workflow) -> Vec<Issue> {
    check(source, candidate, &PackageTable::bundled())
}

pub(super) fn check(source: &TravisConfig, wf: &Workflow, packages: &PackageTable) -> Vec<Issue> {
    let mut out = Vec::new();
    triggers(source, wf, &mut out);
    execution_order(source, wf, &mut out);
    conditions(source, wf, &mut out);
    missing_tasks(source, wf, &mut out);
    redundant_tasks(source, wf, packages, &mut out);
    out
}

fn triggers(source: &TravisConfig, wf: &Workflow, out: &mut Vec<Issue>) {
    match wf.triggers.get("push") {
        None => out.push(Issue::new(
            IssueType::TriggerEventMisconfig,
            "on",
            "pushes no longer trigger the workflow; the Travis build ran on every push",
            "on",
        )),
        Some(Some(filter)) if source.branch_filter.is_none() && filter.restricts_refs() => {
            let mut parts = Vec::new();
            for (key, values) in [
                ("branches", &filter.branches),
                ("branches-ignore", &filter.branches_ignore),
                ("tags", &filter.tags),
                ("tags-ignore", &filter.tags_ignore),
            ] {
                if !values.is_empty() {
                    parts.push(format!("{key}: {}", values.join(", ")));
                }
            }
            out.push(Issue::new(
                IssueType::TriggerEventMisconfig,
                "on.push",
                "push trigger is restricted although the Travis build ran on every push",
                parts.join("; "),
            ));
        }
        Some(_) => {}
    }
    if !wf.triggers.contains_key("pull_request") {
        out.push(Issue::new(
            IssueType::TriggerEventMisconfig,
            "on",
            "pull requests no longer trigger the workflow; Travis CI built them",
            "on",
        ));
    }
}

fn ancestors<'a>(wf: &'a Workflow, id: &'a str) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![id];
    while let Some(cur) = stack.pop() {
        for need in wf.jobs.get(cur).map(|j| j.needs.as_slice()).unwrap_or(&[]) {
            if seen.insert(need.as_str()) {
                stack.push(need);
            }
        }
    }
    seen
}

/// Consecutive Travis stages must be chained by `needs` edges.
fn execution_order(source: &TravisConfig, wf: &Workflow, out: &mut Vec<Issue>) {
    let Ok(plans) = plan_jobs(source) else { return };
    let mut stages: Vec<String> = Vec::new();
    for plan in &plans {
        let stage = sanitize_job_id(&plan.stage);
        if !stages.contains(&stage) {
            stages.push(stage);
        }
    }
    if stages.len() < 2 || wf.jobs.len() < 2 {
        return;
    }
    // A job belongs to the stage whose name is the longest match of its id or name.
    let stage_of = |id: &str, name: Option<&str>| -> Option<usize> {
        let names: Vec<String> = std::iter::once(sanitize_job_id(id))
            .chain(name.map(sanitize_job_id))
            .collect();
        stages
            .iter()
            .enumerate()
            .filter(|(_, s)| names.iter().any(|n| n == *s || n.starts_with(&format!("{s}-"))))
            .max_by_key(|(_, s)| s.len())
            .map(|(i, _)| i)
    };
    let assigned: Vec<(&str, Option<usize>)> = wf
        .jobs
        .iter()
        .map(|(id, job)| (id.as_str(), stage_of(id, job.name.as_deref())))
        .collect();
    if assigned.iter().all(|(_, s)| s.is_none()) {
        if wf.jobs.values().all(|j| j.needs.is_empty()) {
            out.push(Issue::new(
                IssueType::ExecutionOrderError,
                "jobs",
                format!("stages {} ran one after another; these jobs all run concurrently", stages.join(" → ")),
                "no needs",
            ));
        }
        return;
    }
    for (stage, pair) in stages.windows(2).enumerate() {
        let previous: BTreeSet<&str> = assigned
            .iter()
            .filter(|(_, s)| *s == Some(stage))
            .map(|(id, _)| *id)
            .collect();
        if previous.is_empty() {
            continue;
        }
        for (id, _) in assigned.iter().filter(|(_, s)| *s == Some(stage + 1)) {
            if ancestors(wf, id).is_disjoint(&previous) {
                let needs = &wf.jobs[*id].needs;
                out.push(Issue::new(
                    IssueType::ExecutionOrderError,
                    format!("jobs.{id}"),
                    format!("stage {} must wait for stage {}, but job {id} does not need it", pair[1], pair[0]),
                    if needs.is_empty() { "no needs".to_string() } else { format!("needs: [{}]", needs.join(", ")) },
                ));
            }
        }
    }
}

/// The run-status function a condition gates on; steps without one run on
/// success.
fn status_of(condition: Option<&str>) -> &'static str {
    let Some(cond) = condition else { return "success()" };
    let cond = expr::normalize_condition(cond);
    ["failure()", "always()", "cancelled()"]
        .into_iter()
        .find(|f| cond.contains(f))
        .unwrap_or("success()")
}

fn has_filter(condition: Option<&str>) -> bool {
    condition.is_some_and(|c| {
        let c = expr::normalize_condition(c);
        !["success()", "failure()", "always()", "cancelled()", "!cancelled()"].contains(&c.as_str())
    })
}

fn conditions(source: &TravisConfig, wf: &Workflow, out: &mut Vec<Issue>) {
    let mut phases_of: HashMap<&str, Vec<Phase>> = HashMap::new();
    for (phase, cmd) in source.effective_commands() {
        phases_of.entry(cmd.normalized.as_str()).or_default().push(phase);
    }
    let source_statuses: HashSet<&str> = phases_of
        .values()
        .flatten()
        .map(|p| status_of(p.step_condition()))
        .collect();
    for (id, job) in &wf.jobs {
        for (i, step) in job.steps.iter().enumerate() {
            let cond = step.condition.as_deref();
            let status = status_of(cond);
            let fine = match &step.kind {
                StepKind::Run { commands } => match commands.iter().find_map(|c| phases_of.get(c.normalized.as_str())) {
                    Some(phases) => phases.iter().any(|p| {
                        status_of(p.step_condition()) == status && (p.step_condition().is_some() || !has_filter(cond))
                    }),
                    None => status == "success()" || source_statuses.contains(status),
                },
                StepKind::Uses(_) => status == "success()" || source_statuses.contains(status),
            };
            if !fine {
                out.push(Issue::new(
                    IssueType::ConditionMisconfig,
                    format!("jobs.{id}.steps[{i}]"),
                    describe_condition(step, cond, &phases_of),
                    cond.map_or_else(|| "no condition".to_string(), |c| format!("if: {c}")),
                ));
            }
        }
    }
}

fn describe_condition(step: &Step, cond: Option<&str>, phases_of: &HashMap<&str, Vec<Phase>>) -> String {
    let phases: Vec<&str> = step
        .commands()
        .iter()
        .find_map(|c| phases_of.get(c.normalized.as_str()))
        .map(|ps| ps.iter().map(|p| p.as_str()).collect())
        .unwrap_or_default();
    match (cond, phases.is_empty()) {
        (Some(c), true) => format!("condition `{c}` has no counterpart in the Travis configuration"),
        (Some(c), false) => format!("condition `{c}` does not match Travis phase {}", phases.join("/")),
        (None, _) => format!("commands from Travis phase {} run unconditionally", phases.join("/")),
    }
}

fn covered_by_action(normalized: &str, wf: &Workflow) -> bool {
    ACTION_EQUIVALENTS
        .iter()
        .filter(|(prefix, _)| normalized.starts_with(prefix))
        .any(|(_, purpose)| {
            wf.jobs
                .values()
                .flat_map(|j| &j.steps)
                .filter_map(Step::action)
                .any(|a| a.repository().rsplit('/').next() == Some(*purpose))
        })
}

fn missing_tasks(source: &TravisConfig, wf: &Workflow, out: &mut Vec<Issue>) {
    let present: HashSet<&str> = wf
        .jobs
        .values()
        .flat_map(|j| j.run_commands())
        .map(|c| c.normalized.as_str())
        .collect();
    let mut reported = HashSet::new();
    for (phase, cmd) in source.effective_commands() {
        let text = cmd.normalized.as_str();
        if present.contains(text) || covered_by_action(text, wf) || !reported.insert(text) {
            continue;
        }
        out.push(Issue::new(
            IssueType::MissingTask,
            "jobs",
            format!("`{text}` from Travis phase {phase} is not run by any job"),
            cmd.text.clone(),
        ));
    }
    let Some(cache) = &source.cache else { return };
    if cache.managers.is_empty() && cache.directories.is_empty() {
        return;
    }
    let cached = wf.jobs.values().flat_map(|j| &j.steps).any(|s| {
        s.action().is_some_and(|a| a.repository().rsplit('/').next() == Some("cache"))
            || (s.action().is_some() && s.with_args.contains_key("cache"))
    });
    if !cached {
        let mut what = cache.managers.clone();
        what.extend(cache.directories.iter().cloned());
        out.push(Issue::new(
            IssueType::MissingTask,
            "jobs",
            "the Travis cache is not reproduced by any step",
            format!("cache: {}", what.join(", ")),
        ));
    }
}

fn redundant_tasks(source: &TravisConfig, wf: &Workflow, packages: &PackageTable, out: &mut Vec<Issue>) {
    let known: HashSet<&str> = source
        .effective_commands()
        .into_iter()
        .map(|(_, c)| c.normalized.as_str())
        .collect();
    let sanctioned = |text: &str| {
        packages
            .entries
            .values()
            .any(|install| install.split_whitespace().eq(text.split_whitespace()))
    };
    for (id, job) in &wf.jobs {
        for (i, step) in job.steps.iter().enumerate() {
            for cmd in step.commands() {
                let text = cmd.normalized.as_str();
                if known.contains(text) || sanctioned(text) {
                    continue;
                }
                out.push(Issue::new(
                    IssueType::RedundantTask,
                    format!("jobs.{id}.steps[{i}].run"),
                    format!("`{text}` does not come from the Travis configuration"),
                    cmd.text.clone(),
                ));
            }
        }
    }
}
