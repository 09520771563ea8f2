use indexmap::IndexMap;

use super::node::{parse_document, Node, NodeValue};
use super::FrontendError;
use crate::model::{
    split_commands, ActionRef, EventFilter, Job, Matrix, Step, StepKind, VersionLiteral, Workflow,
};

pub fn parse_workflow(text: &str) -> Result<Workflow, FrontendError> {
    if text.trim().is_empty() {
        return Err(FrontendError::EmptyConfiguration);
    }
    let root = parse_document(text)?.ok_or(FrontendError::EmptyConfiguration)?;
    workflow_from_tree(&root)
}

/// Builds the typed workflow from an already parsed tree. Keys outside the
/// model are ignored; the linter inspects the tree for those.
pub fn workflow_from_tree(root: &Node) -> Result<Workflow, FrontendError> {
    if root.as_map().is_none() {
        return Err(FrontendError::NotAWorkflow("top level is not a mapping".into()));
    }
    let jobs_node = root
        .get("jobs")
        .ok_or_else(|| FrontendError::NotAWorkflow("document has no jobs".into()))?;
    if jobs_node.as_map().is_none() {
        return Err(FrontendError::NotAWorkflow("jobs is not a mapping".into()));
    }

    let mut wf = Workflow {
        name: root.get("name").and_then(Node::as_str).map(str::to_string),
        triggers: root.get("on").map(parse_triggers).unwrap_or_default(),
        jobs: IndexMap::new(),
    };
    for (id, job) in jobs_node.entries() {
        wf.jobs.insert(id.to_string(), parse_job(id, job)?);
    }
    Ok(wf)
}

fn parse_triggers(node: &Node) -> IndexMap<String, Option<EventFilter>> {
    let mut triggers = IndexMap::new();
    match &node.value {
        NodeValue::Scalar(_) => {
            if let Some(event) = node.as_str() {
                triggers.insert(event.to_string(), None);
            }
        }
        NodeValue::Sequence(items) => {
            for event in items.iter().filter_map(Node::as_str) {
                triggers.insert(event.to_string(), None);
            }
        }
        NodeValue::Mapping(_) => {
            for (event, value) in node.entries() {
                let filter = value.as_map().map(|_| parse_filter(value)).filter(|f| !f.is_empty());
                triggers.insert(event.to_string(), filter);
            }
        }
    }
    triggers
}

fn parse_filter(node: &Node) -> EventFilter {
    let list = |key: &str| node.get(key).map(string_list).unwrap_or_default();
    EventFilter {
        branches: list("branches"),
        branches_ignore: list("branches-ignore"),
        tags: list("tags"),
        tags_ignore: list("tags-ignore"),
        paths: list("paths"),
        paths_ignore: list("paths-ignore"),
    }
}

pub(crate) fn string_list(node: &Node) -> Vec<String> {
    match &node.value {
        NodeValue::Sequence(items) => items
            .iter()
            .filter_map(Node::as_str)
            .map(str::to_string)
            .collect(),
        _ => node.as_str().map(str::to_string).into_iter().collect(),
    }
}

fn scalar_map(node: Option<&Node>) -> IndexMap<String, String> {
    node.map(|n| {
        n.entries()
            .filter_map(|(k, v)| v.scalar().map(|s| (k.to_string(), s.text.clone())))
            .collect()
    })
    .unwrap_or_default()
}

fn literal(node: &Node) -> Option<VersionLiteral> {
    node.scalar().map(|s| VersionLiteral {
        raw_text: s.text.clone(),
        quoted: s.style.is_quoted(),
    })
}

fn parse_job(id: &str, node: &Node) -> Result<Job, FrontendError> {
    if node.as_map().is_none() {
        return Err(FrontendError::invalid(format!("jobs.{id}"), "job is not a mapping"));
    }
    let runs_on = match node.get("runs-on") {
        Some(n) => match &n.value {
            NodeValue::Scalar(_) => n.as_str().unwrap_or("").to_string(),
            NodeValue::Sequence(_) => string_list(n).join(", "),
            NodeValue::Mapping(_) => n.get("labels").map(string_list).unwrap_or_default().join(", "),
        },
        None => {
            return Err(FrontendError::invalid(
                format!("jobs.{id}.runs-on"),
                "job has no runs-on",
            ))
        }
    };
    let strategy_matrix = node
        .get("strategy")
        .map(parse_strategy)
        .filter(|m| !m.is_empty());
    let steps_node = node.get("steps").ok_or_else(|| {
        FrontendError::invalid(format!("jobs.{id}.steps"), "job has no steps")
    })?;
    let steps = steps_node
        .as_seq()
        .ok_or_else(|| FrontendError::invalid(format!("jobs.{id}.steps"), "steps is not a sequence"))?
        .iter()
        .enumerate()
        .map(|(i, s)| parse_step(&format!("jobs.{id}.steps[{i}]"), s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Job {
        name: node.get("name").and_then(Node::as_str).map(str::to_string),
        runs_on,
        needs: node.get("needs").map(string_list).unwrap_or_default(),
        strategy_matrix,
        env: scalar_map(node.get("env")),
        steps,
    })
}

fn parse_strategy(node: &Node) -> Matrix {
    let mut matrix = Matrix {
        fail_fast: node.get("fail-fast").and_then(Node::as_bool),
        ..Matrix::default()
    };
    let Some(m) = node.get("matrix") else {
        return matrix;
    };
    let rows = |n: &Node| -> Vec<IndexMap<String, VersionLiteral>> {
        n.as_seq()
            .unwrap_or(&[])
            .iter()
            .map(|row| {
                row.entries()
                    .filter_map(|(k, v)| literal(v).map(|l| (k.to_string(), l)))
                    .collect()
            })
            .collect()
    };
    for (key, value) in m.entries() {
        match key {
            "include" => matrix.include = rows(value),
            "exclude" => matrix.exclude = rows(value),
            axis => {
                let values = match &value.value {
                    NodeValue::Sequence(items) => items.iter().filter_map(literal).collect(),
                    NodeValue::Scalar(_) => literal(value).into_iter().collect(),
                    NodeValue::Mapping(_) => Vec::new(),
                };
                matrix.axes.insert(axis.to_string(), values);
            }
        }
    }
    matrix
}

fn parse_step(path: &str, node: &Node) -> Result<Step, FrontendError> {
    if node.as_map().is_none() {
        return Err(FrontendError::invalid(path, "step is not a mapping"));
    }
    let kind = match (node.get("uses"), node.get("run")) {
        (Some(uses), None) => StepKind::Uses(ActionRef::parse(uses.as_str().unwrap_or(""))),
        (None, Some(run)) => StepKind::Run {
            commands: split_commands(run.as_str().unwrap_or("")),
        },
        (Some(_), Some(_)) => {
            return Err(FrontendError::invalid(path, "step has both uses and run"))
        }
        (None, None) => return Err(FrontendError::invalid(path, "step has neither uses nor run")),
    };
    Ok(Step {
        name: node.get("name").and_then(Node::as_str).map(str::to_string),
        kind,
        with_args: scalar_map(node.get("with")),
        env: scalar_map(node.get("env")),
        condition: node.get("if").and_then(Node::as_str).map(str::to_string),
    })
}
