use std::fmt::Write as _;

use indexmap::IndexMap;

use crate::model::{
    is_trailing_zero_number, EventFilter, InvariantViolation, Job, Matrix, Step, StepKind,
    VersionLiteral, Workflow,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("workflow violates invariants: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<InvariantViolation>),
}

/// Renders a workflow as YAML with a fixed key order and 2-space indentation.
pub fn render_workflow(wf: &Workflow) -> Result<String, RenderError> {
    wf.validate().map_err(RenderError::Invalid)?;
    let mut out = String::new();
    if let Some(name) = &wf.name {
        line(&mut out, 0, &format!("name: {}", scalar(name)));
    }
    render_triggers(&mut out, &wf.triggers);
    line(&mut out, 0, "jobs:");
    for (id, job) in &wf.jobs {
        line(&mut out, 1, &format!("{}:", key(id)));
        render_job(&mut out, job);
    }
    Ok(out)
}

fn line(out: &mut String, depth: usize, text: &str) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(text);
    out.push('\n');
}

fn render_triggers(out: &mut String, triggers: &IndexMap<String, Option<EventFilter>>) {
    let filtered = |f: &Option<EventFilter>| f.as_ref().is_some_and(|f| !f.is_empty());
    if !triggers.values().any(filtered) {
        let events: Vec<&str> = triggers.keys().map(String::as_str).collect();
        line(out, 0, &format!("on: {}", flow_list(&events)));
        return;
    }
    line(out, 0, "on:");
    for (event, filter) in triggers {
        match filter.as_ref().filter(|f| !f.is_empty()) {
            None => line(out, 1, &format!("{}:", key(event))),
            Some(f) => {
                line(out, 1, &format!("{}:", key(event)));
                let lists = [
                    ("branches", &f.branches),
                    ("branches-ignore", &f.branches_ignore),
                    ("tags", &f.tags),
                    ("tags-ignore", &f.tags_ignore),
                    ("paths", &f.paths),
                    ("paths-ignore", &f.paths_ignore),
                ];
                for (name, values) in lists {
                    if !values.is_empty() {
                        let values: Vec<&str> = values.iter().map(String::as_str).collect();
                        string_list(out, 2, name, &values);
                    }
                }
            }
        }
    }
}

fn render_job(out: &mut String, job: &Job) {
    if let Some(name) = &job.name {
        line(out, 2, &format!("name: {}", scalar(name)));
    }
    line(out, 2, &format!("runs-on: {}", scalar(&job.runs_on)));
    match job.needs.as_slice() {
        [] => {}
        [one] => line(out, 2, &format!("needs: {}", scalar(one))),
        many => {
            let needs: Vec<&str> = many.iter().map(String::as_str).collect();
            string_list(out, 2, "needs", &needs);
        }
    }
    if let Some(matrix) = job.strategy_matrix.as_ref().filter(|m| !m.is_empty()) {
        render_strategy(out, matrix);
    }
    string_map(out, 2, "env", &job.env);
    line(out, 2, "steps:");
    for step in &job.steps {
        render_step(out, step);
    }
}

fn render_strategy(out: &mut String, matrix: &Matrix) {
    line(out, 2, "strategy:");
    if let Some(ff) = matrix.fail_fast {
        line(out, 3, &format!("fail-fast: {ff}"));
    }
    if matrix.axes.is_empty() && matrix.include.is_empty() && matrix.exclude.is_empty() {
        return;
    }
    line(out, 3, "matrix:");
    for (axis, values) in &matrix.axes {
        let rendered: Vec<String> = values.iter().map(|v| literal(v, true)).collect();
        line(out, 4, &format!("{}: [{}]", key(axis), rendered.join(", ")));
    }
    for (name, rows) in [("include", &matrix.include), ("exclude", &matrix.exclude)] {
        if rows.is_empty() {
            continue;
        }
        line(out, 4, &format!("{name}:"));
        for row in rows {
            for (i, (k, v)) in row.iter().enumerate() {
                let lead = if i == 0 { "- " } else { "  " };
                line(out, 5, &format!("{lead}{}: {}", key(k), literal(v, false)));
            }
            if row.is_empty() {
                line(out, 5, "- {}");
            }
        }
    }
}

fn render_step(out: &mut String, step: &Step) {
    let mut fields: Vec<(String, Option<String>)> = Vec::new();
    if let Some(name) = &step.name {
        fields.push((format!("name: {}", scalar(name)), None));
    }
    if let Some(cond) = &step.condition {
        fields.push((format!("if: {}", scalar(cond)), None));
    }
    // The first field carries the list marker; nested blocks follow their key.
    let mut body = String::new();
    match &step.kind {
        StepKind::Uses(action) => {
            fields.push((format!("uses: {}", scalar(&action.to_string())), None));
            if !step.with_args.is_empty() {
                let mut block = String::new();
                for (k, v) in &step.with_args {
                    line(&mut block, 5, &format!("{}: {}", key(k), scalar(v)));
                }
                fields.push(("with:".into(), Some(block)));
            }
        }
        StepKind::Run { commands } => {
            let texts: Vec<&str> = commands.iter().map(|c| c.text.as_str()).collect();
            match texts.as_slice() {
                [one] if !one.contains('\n') && plain_safe(one, false) => {
                    fields.push((format!("run: {one}"), None));
                }
                _ => {
                    let mut block = String::new();
                    for text in &texts {
                        for l in text.lines() {
                            line(&mut block, 5, l.trim());
                        }
                    }
                    fields.push(("run: |".into(), Some(block)));
                }
            }
        }
    }
    if !step.env.is_empty() {
        let mut block = String::new();
        for (k, v) in &step.env {
            line(&mut block, 5, &format!("{}: {}", key(k), scalar(v)));
        }
        fields.push(("env:".into(), Some(block)));
    }
    for (i, (head, block)) in fields.into_iter().enumerate() {
        let lead = if i == 0 { "- " } else { "  " };
        let _ = writeln!(body, "      {lead}{head}");
        if let Some(block) = block {
            body.push_str(&block);
        }
    }
    out.push_str(&body);
}

fn string_list(out: &mut String, depth: usize, name: &str, values: &[&str]) {
    line(out, depth, &format!("{name}: {}", flow_list(values)));
}

fn string_map(out: &mut String, depth: usize, name: &str, map: &IndexMap<String, String>) {
    if map.is_empty() {
        return;
    }
    line(out, depth, &format!("{name}:"));
    for (k, v) in map {
        line(out, depth + 1, &format!("{}: {}", key(k), scalar(v)));
    }
}

fn flow_list(values: &[&str]) -> String {
    let items: Vec<String> = values
        .iter()
        .map(|v| {
            if plain_safe(v, true) {
                v.to_string()
            } else {
                double_quoted(v)
            }
        })
        .collect();
    format!("[{}]", items.join(", "))
}

fn literal(v: &VersionLiteral, flow: bool) -> String {
    if v.quoted || v.is_trailing_zero_hazard() || !plain_safe(&v.raw_text, flow) {
        double_quoted(&v.raw_text)
    } else {
        v.raw_text.clone()
    }
}

fn key(text: &str) -> String {
    if plain_safe(text, false) {
        text.to_string()
    } else {
        double_quoted(text)
    }
}

fn scalar(text: &str) -> String {
    if plain_safe(text, false) {
        text.to_string()
    } else {
        double_quoted(text)
    }
}

/// Whether `text` reads back verbatim as a plain scalar.
fn plain_safe(text: &str, flow: bool) -> bool {
    let Some(first) = text.chars().next() else {
        return false;
    };
    if text.trim() != text || matches!(text, "~" | "null" | "Null" | "NULL") {
        return false;
    }
    if is_trailing_zero_number(text) {
        return false;
    }
    if "-?:,[]{}#&*!|>'\"%@`".contains(first) {
        return false;
    }
    if text.contains(": ") || text.contains(" #") || text.ends_with(':') {
        return false;
    }
    if text.chars().any(|c| c.is_control()) {
        return false;
    }
    if flow && text.contains([',', '[', ']', '{', '}']) {
        return false;
    }
    true
}

fn double_quoted(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
