use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::node::{parse_document, Node, PathSeg, ScalarStyle, YamlError};
use super::workflow::string_list;
use crate::expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntaxSubtype {
    MissingSymbol,
    IndentationError,
    MissingOrMisplacedDefinition,
    InvalidValue,
}

impl SyntaxSubtype {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntaxSubtype::MissingSymbol => "missing_symbol",
            SyntaxSubtype::IndentationError => "indentation_error",
            SyntaxSubtype::MissingOrMisplacedDefinition => "missing_or_misplaced_definition",
            SyntaxSubtype::InvalidValue => "invalid_value",
        }
    }
}

impl fmt::Display for SyntaxSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxFinding {
    pub subtype: SyntaxSubtype,
    pub line: usize,
    pub column: Option<usize>,
    pub message: String,
    /// Document path of the offending node, when the text parsed.
    pub path: String,
}

impl SyntaxFinding {
    fn at(subtype: SyntaxSubtype, node: &Node, path: &[PathSeg], message: impl Into<String>) -> Self {
        Self {
            subtype,
            line: node.line,
            column: Some(node.column),
            message: message.into(),
            path: super::node::format_path(path),
        }
    }
}

/// Keys whose value must be a collection; a multi-line run of bare words in
/// one of these positions is a list or mapping written without `-` or `:`.
const COLLECTION_KEYS: &[&str] = &[
    "on", "jobs", "steps", "strategy", "matrix", "with", "env", "needs", "branches",
    "branches-ignore", "tags", "tags-ignore", "paths", "paths-ignore", "include", "exclude",
    "types",
];

/// Step keys that only make sense inside a step.
const STEP_KEYS: &[&str] = &["uses", "run", "with"];
/// Job keys that only make sense inside a job.
const JOB_KEYS: &[&str] = &["runs-on", "steps"];

/// Classifies syntactic and structural defects of a candidate workflow.
pub fn check_syntax(text: &str) -> Vec<SyntaxFinding> {
    let root = match parse_document(text) {
        Err(e) => return vec![classify_parse_error(text, &e)],
        Ok(None) => {
            return vec![SyntaxFinding {
                subtype: SyntaxSubtype::MissingOrMisplacedDefinition,
                line: 1,
                column: None,
                message: "document is empty; `on` and `jobs` are not defined".into(),
                path: String::new(),
            }]
        }
        Ok(Some(root)) => root,
    };
    let mut findings = Vec::new();
    if root.as_map().is_none() {
        findings.push(SyntaxFinding::at(
            SyntaxSubtype::MissingSymbol,
            &root,
            &[],
            "top level is not a mapping",
        ));
        return findings;
    }
    bare_word_runs(&root, &mut findings);
    structure(&root, &mut findings);
    findings.sort_by(|a, b| (a.line, a.column, &a.path).cmp(&(b.line, b.column, &b.path)));
    findings.dedup();
    findings
}

fn is_bare_word(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn bare_word_runs(root: &Node, findings: &mut Vec<SyntaxFinding>) {
    root.walk(&mut |path, node| {
        let Some(s) = node.scalar() else { return };
        if !s.spans_lines || s.style != ScalarStyle::Plain {
            return;
        }
        let words: Vec<&str> = s.text.split(' ').collect();
        let in_collection_slot = match path {
            [.., PathSeg::Key(k)] => {
                COLLECTION_KEYS.contains(&k.as_str())
                    || matches!(path, [.., PathSeg::Key(m), PathSeg::Key(_)] if m == "matrix")
            }
            _ => false,
        };
        if in_collection_slot && words.len() > 1 && words.iter().all(|w| is_bare_word(w)) {
            findings.push(SyntaxFinding::at(
                SyntaxSubtype::MissingSymbol,
                node,
                path,
                format!(
                    "entries {:?} are written on separate lines without `:` or `-`",
                    words
                ),
            ));
        }
    });
}

fn key_path(parent: &[PathSeg], key: &str) -> Vec<PathSeg> {
    let mut p = parent.to_vec();
    p.push(PathSeg::Key(key.to_string()));
    p
}

fn structure(root: &Node, findings: &mut Vec<SyntaxFinding>) {
    use SyntaxSubtype::*;
    for required in ["on", "jobs"] {
        if root.get(required).is_none() {
            findings.push(SyntaxFinding {
                subtype: MissingOrMisplacedDefinition,
                line: 1,
                column: None,
                message: format!("workflow does not define `{required}`"),
                path: required.into(),
            });
        }
    }
    for misplaced in JOB_KEYS {
        if let Some(k) = root.key_node(misplaced) {
            findings.push(SyntaxFinding::at(
                IndentationError,
                k,
                &[PathSeg::Key((*misplaced).into())],
                format!("`{misplaced}` belongs inside a job, not at the top level"),
            ));
        }
    }
    // Matrix references outside any job have nothing to resolve against.
    for (key, value) in root.entries().filter(|(k, _)| *k != "jobs") {
        unresolved_refs(value, &[PathSeg::Key(key.into())], &BTreeSet::new(), findings);
    }

    let Some(jobs) = root.get("jobs") else { return };
    if jobs.as_map().is_none() {
        if !jobs.is_null() {
            findings.push(SyntaxFinding::at(InvalidValue, jobs, &[PathSeg::Key("jobs".into())], "`jobs` must be a mapping of job ids"));
        }
        return;
    }
    let job_ids: BTreeSet<&str> = jobs.entries().map(|(k, _)| k).collect();
    for (id, job) in jobs.entries() {
        let jp = vec![PathSeg::Key("jobs".into()), PathSeg::Key(id.into())];
        check_job(id, job, &jp, &job_ids, findings);
    }
}

fn check_job(
    id: &str,
    job: &Node,
    jp: &[PathSeg],
    job_ids: &BTreeSet<&str>,
    findings: &mut Vec<SyntaxFinding>,
) {
    use SyntaxSubtype::*;
    if job.as_map().is_none() {
        findings.push(SyntaxFinding::at(InvalidValue, job, jp, format!("job `{id}` must be a mapping")));
        return;
    }
    let reusable = job.get("uses").is_some() && job.get("steps").is_none();
    if !reusable {
        for required in JOB_KEYS {
            if job.get(required).is_none() {
                let anchor = job.key_node(job.entries().next().map_or("", |(k, _)| k)).unwrap_or(job);
                findings.push(SyntaxFinding::at(
                    MissingOrMisplacedDefinition,
                    anchor,
                    &key_path(jp, required),
                    format!("job `{id}` does not define `{required}`"),
                ));
            }
        }
        for misplaced in STEP_KEYS {
            if let Some(k) = job.key_node(misplaced) {
                findings.push(SyntaxFinding::at(
                    IndentationError,
                    k,
                    &key_path(jp, misplaced),
                    format!("`{misplaced}` is aligned with the job keys instead of nested in a step"),
                ));
            }
        }
    }
    for misplaced in ["include", "exclude"] {
        if let Some(k) = job.key_node(misplaced) {
            findings.push(SyntaxFinding::at(
                IndentationError,
                k,
                &key_path(jp, misplaced),
                format!("`{misplaced}` must be nested under strategy.matrix"),
            ));
        }
    }

    if let Some(needs) = job.get("needs") {
        let np = key_path(jp, "needs");
        if needs.as_map().is_some() {
            findings.push(SyntaxFinding::at(InvalidValue, needs, &np, "`needs` must be a job id or a list of job ids"));
        } else {
            for need in string_list(needs) {
                if !job_ids.contains(need.as_str()) {
                    findings.push(SyntaxFinding::at(
                        MissingOrMisplacedDefinition,
                        needs,
                        &np,
                        format!("job `{id}` needs `{need}`, which is not defined"),
                    ));
                }
            }
        }
    }

    let mut axes = BTreeSet::new();
    if let Some(strategy) = job.get("strategy") {
        let sp = key_path(jp, "strategy");
        for misplaced in ["include", "exclude"] {
            if let Some(k) = strategy.key_node(misplaced) {
                findings.push(SyntaxFinding::at(
                    IndentationError,
                    k,
                    &key_path(&sp, misplaced),
                    format!("`{misplaced}` is aligned with `matrix` instead of nested under it"),
                ));
            }
        }
        if let Some(ff) = strategy.get("fail-fast") {
            if ff.as_bool().is_none() && !ff.as_str().is_some_and(expr::is_expression) {
                findings.push(SyntaxFinding::at(
                    InvalidValue,
                    ff,
                    &key_path(&sp, "fail-fast"),
                    format!("fail-fast expects a boolean, found {:?}", ff.to_string()),
                ));
            }
        }
        if let Some(matrix) = strategy.get("matrix") {
            for (k, v) in matrix.entries() {
                match k {
                    "include" | "exclude" => {
                        for row in v.as_seq().unwrap_or(&[]) {
                            axes.extend(row.entries().map(|(k, _)| k.to_string()));
                        }
                    }
                    axis => {
                        axes.insert(axis.to_string());
                    }
                }
            }
            // A matrix given as one expression (fromJSON) defines whatever it yields.
            if matrix.as_str().is_some_and(expr::is_expression) {
                return;
            }
        }
    }

    for (key, value) in job.entries().filter(|(k, _)| *k != "strategy") {
        unresolved_refs(value, &key_path(jp, key), &axes, findings);
    }

    if let Some(steps) = job.get("steps") {
        let sp = key_path(jp, "steps");
        let Some(items) = steps.as_seq() else {
            if !steps.is_null() {
                findings.push(SyntaxFinding::at(InvalidValue, steps, &sp, "`steps` must be a list"));
            }
            return;
        };
        for (i, step) in items.iter().enumerate() {
            let mut p = sp.clone();
            p.push(PathSeg::Index(i));
            check_step(step, &p, findings);
        }
    }
}

fn check_step(step: &Node, path: &[PathSeg], findings: &mut Vec<SyntaxFinding>) {
    use SyntaxSubtype::*;
    if step.as_map().is_none() {
        findings.push(SyntaxFinding::at(InvalidValue, step, path, "a step must be a mapping"));
        return;
    }
    match (step.get("uses"), step.get("run")) {
        (None, None) => findings.push(SyntaxFinding::at(
            MissingOrMisplacedDefinition,
            step,
            path,
            "step defines neither `uses` nor `run`",
        )),
        (Some(_), Some(_)) => findings.push(SyntaxFinding::at(
            InvalidValue,
            step,
            path,
            "step defines both `uses` and `run`",
        )),
        _ => {}
    }
    if let Some(with) = step.get("with") {
        for (k, v) in with.entries() {
            let Some(text) = v.as_str() else { continue };
            if k.ends_with("-version") && text.contains(',') && !expr::is_expression(text) {
                findings.push(SyntaxFinding::at(
                    InvalidValue,
                    v,
                    &key_path(&key_path(path, "with"), k),
                    format!("`{k}` expects a single version, found {text:?}"),
                ));
            }
        }
    }
}

/// Flags `matrix.X` references (inside `${{ }}`, or bare in `if:`) whose axis
/// is not in `axes`.
fn unresolved_refs(
    node: &Node,
    base: &[PathSeg],
    axes: &BTreeSet<String>,
    findings: &mut Vec<SyntaxFinding>,
) {
    node.walk(&mut |rel, n| {
        let Some(text) = n.as_str() else { return };
        let in_if = matches!(rel.last(), Some(PathSeg::Key(k)) if k == "if")
            || (rel.is_empty() && matches!(base.last(), Some(PathSeg::Key(k)) if k == "if"));
        let refs = if in_if {
            expr::bare_matrix_references(text)
        } else {
            expr::matrix_references(text)
        };
        for name in refs {
            if !axes.contains(&name) {
                let mut path = base.to_vec();
                path.extend_from_slice(rel);
                findings.push(SyntaxFinding::at(
                    SyntaxSubtype::MissingOrMisplacedDefinition,
                    n,
                    &path,
                    format!("matrix.{name} is referenced but no matrix axis `{name}` is defined"),
                ));
            }
        }
    });
}

/// Keys with no colon, or list items with no dash, usually surface as a
/// scanner error on the following line. A line whose indentation matches no
/// earlier line is classified as an indentation error instead.
fn classify_parse_error(text: &str, err: &YamlError) -> SyntaxFinding {
    let lines: Vec<&str> = text.lines().collect();
    let line_count = lines.len().max(1);
    let line = err.line.clamp(1, line_count);
    let indent = |l: &str| l.len() - l.trim_start().len();
    let meaningful = |l: &&str| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    };

    let subtype = match lines.get(line - 1) {
        None => SyntaxSubtype::MissingSymbol,
        Some(current) => {
            let earlier: Vec<&str> = lines[..line - 1].iter().copied().filter(meaningful).collect();
            let unterminated_key = earlier.last().is_some_and(|prev| {
                let t = prev.trim();
                !t.contains(':') && !t.starts_with('-') && indent(current) > indent(prev)
            });
            let orphan_indent = meaningful(current)
                && !earlier.is_empty()
                && !earlier.iter().any(|l| indent(l) == indent(current));
            if unterminated_key || !orphan_indent {
                SyntaxSubtype::MissingSymbol
            } else {
                SyntaxSubtype::IndentationError
            }
        }
    };
    let note = if subtype == SyntaxSubtype::MissingSymbol && !err.message.contains("expected") {
        " (low confidence)"
    } else {
        ""
    };
    SyntaxFinding {
        subtype,
        line,
        column: Some(err.column),
        message: format!("{}{note}", err.message),
        path: String::new(),
    }
}
