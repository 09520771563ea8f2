//! A small YAML document tree that keeps scalar spelling, quoting style and
//! source positions. Values are never type-resolved: `3.10` stays `"3.10"`.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarStyle {
    Plain,
    SingleQuoted,
    DoubleQuoted,
    Literal,
    Folded,
}

impl ScalarStyle {
    pub fn is_quoted(self) -> bool {
        matches!(self, ScalarStyle::SingleQuoted | ScalarStyle::DoubleQuoted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scalar {
    pub text: String,
    pub style: ScalarStyle,
    /// A plain scalar whose source continues over more than one line.
    pub spans_lines: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NodeValue {
    Scalar(Scalar),
    Sequence(Vec<Node>),
    Mapping(Vec<(Node, Node)>),
}

/// A parsed YAML node with its 1-based line and column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub value: NodeValue,
    pub line: usize,
    pub column: usize,
}

/// One step of a document path: `jobs.build.steps[2].run`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathSeg {
    Key(String),
    Index(usize),
}

/// Renders a path as `a.b[2].c`.
pub fn format_path(path: &[PathSeg]) -> String {
    let mut out = String::new();
    for seg in path {
        match seg {
            PathSeg::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            PathSeg::Index(i) => {
                out.push_str(&format!("[{i}]"));
            }
        }
    }
    out
}

/// Inverse of [`format_path`]. Keys containing dots are not representable.
pub fn parse_path(path: &str) -> Vec<PathSeg> {
    let mut segs = Vec::new();
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let mut rest = part;
        if let Some(open) = rest.find('[') {
            if open > 0 {
                segs.push(PathSeg::Key(rest[..open].to_string()));
            }
            rest = &rest[open..];
            while let Some(stripped) = rest.strip_prefix('[') {
                let Some(close) = stripped.find(']') else {
                    break;
                };
                if let Ok(i) = stripped[..close].parse() {
                    segs.push(PathSeg::Index(i));
                }
                rest = &stripped[close + 1..];
            }
        } else {
            segs.push(PathSeg::Key(rest.to_string()));
        }
    }
    segs
}

impl Node {
    pub fn scalar(&self) -> Option<&Scalar> {
        match &self.value {
            NodeValue::Scalar(s) => Some(s),
            _ => None,
        }
    }

    /// Scalar text, or `None` for collections and null.
    pub fn as_str(&self) -> Option<&str> {
        match &self.value {
            NodeValue::Scalar(s) if !self.is_null() => Some(&s.text),
            _ => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[Node]> {
        match &self.value {
            NodeValue::Sequence(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&[(Node, Node)]> {
        match &self.value {
            NodeValue::Mapping(entries) => Some(entries),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        match &self.value {
            NodeValue::Scalar(s) => {
                s.style == ScalarStyle::Plain && matches!(s.text.as_str(), "" | "~" | "null" | "Null" | "NULL")
            }
            _ => false,
        }
    }

    pub fn is_quoted(&self) -> bool {
        self.scalar().is_some_and(|s| s.style.is_quoted())
    }

    /// Boolean under the YAML 1.1 spellings CI platforms accept.
    pub fn as_bool(&self) -> Option<bool> {
        let s = self.scalar()?;
        if s.style != ScalarStyle::Plain {
            return None;
        }
        match s.text.as_str() {
            "true" | "True" | "TRUE" | "yes" | "Yes" | "on" | "On" => Some(true),
            "false" | "False" | "FALSE" | "no" | "No" | "off" | "Off" => Some(false),
            _ => None,
        }
    }

    /// Mapping entries keyed by scalar text.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &Node)> {
        self.as_map()
            .unwrap_or(&[])
            .iter()
            .filter_map(|(k, v)| k.scalar().map(|s| (s.text.as_str(), v)))
    }

    /// Last value bound to `key` (later duplicates win).
    pub fn get(&self, key: &str) -> Option<&Node> {
        self.entries().filter(|(k, _)| *k == key).map(|(_, v)| v).last()
    }

    pub fn key_node(&self, key: &str) -> Option<&Node> {
        self.as_map()?
            .iter()
            .rev()
            .find(|(k, _)| k.scalar().is_some_and(|s| s.text == key))
            .map(|(k, _)| k)
    }

    pub fn find(&self, path: &[PathSeg]) -> Option<&Node> {
        let mut node = self;
        for seg in path {
            node = match seg {
                PathSeg::Key(k) => node.get(k)?,
                PathSeg::Index(i) => node.as_seq()?.get(*i)?,
            };
        }
        Some(node)
    }

    /// Line of the deepest node reachable along `path`; a key's own line is
    /// preferred for the final segment.
    pub fn line_of(&self, path: &[PathSeg]) -> Option<usize> {
        let mut node = self;
        let mut line = None;
        for seg in path {
            match seg {
                PathSeg::Key(k) => {
                    let Some(key) = node.key_node(k) else { break };
                    line = Some(key.line);
                    node = node.get(k)?;
                }
                PathSeg::Index(i) => {
                    let Some(item) = node.as_seq().and_then(|s| s.get(*i)) else {
                        break;
                    };
                    line = Some(item.line);
                    node = item;
                }
            }
        }
        line
    }

    /// Visits every node depth-first with its path.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&[PathSeg], &'a Node)) {
        let mut path = Vec::new();
        self.walk_inner(&mut path, visit);
    }

    fn walk_inner<'a>(&'a self, path: &mut Vec<PathSeg>, visit: &mut dyn FnMut(&[PathSeg], &'a Node)) {
        visit(path, self);
        match &self.value {
            NodeValue::Scalar(_) => {}
            NodeValue::Sequence(items) => {
                for (i, item) in items.iter().enumerate() {
                    path.push(PathSeg::Index(i));
                    item.walk_inner(path, visit);
                    path.pop();
                }
            }
            NodeValue::Mapping(entries) => {
                for (k, v) in entries {
                    let key = k.scalar().map_or_else(String::new, |s| s.text.clone());
                    path.push(PathSeg::Key(key));
                    v.walk_inner(path, visit);
                    path.pop();
                }
            }
        }
    }

    /// Converts to JSON keeping every non-null scalar as a string.
    pub fn to_json_strings(&self) -> serde_json::Value {
        use serde_json::Value;
        match &self.value {
            NodeValue::Scalar(_) if self.is_null() => Value::Null,
            NodeValue::Scalar(s) => Value::String(s.text.clone()),
            NodeValue::Sequence(items) => Value::Array(items.iter().map(Node::to_json_strings).collect()),
            NodeValue::Mapping(entries) => Value::Object(
                entries
                    .iter()
                    .map(|(k, v)| {
                        let key = k.scalar().map_or_else(String::new, |s| s.text.clone());
                        (key, v.to_json_strings())
                    })
                    .collect(),
            ),
        }
    }

    /// Converts to JSON using the YAML core schema for plain scalars.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value;
        match &self.value {
            NodeValue::Scalar(s) => {
                if s.style != ScalarStyle::Plain {
                    return Value::String(s.text.clone());
                }
                if self.is_null() {
                    return Value::Null;
                }
                match s.text.as_str() {
                    "true" | "True" | "TRUE" => return Value::Bool(true),
                    "false" | "False" | "FALSE" => return Value::Bool(false),
                    _ => {}
                }
                if let Ok(i) = s.text.parse::<i64>() {
                    return Value::from(i);
                }
                match s.text.parse::<f64>() {
                    Ok(f) if f.is_finite() => Value::from(f),
                    _ => Value::String(s.text.clone()),
                }
            }
            NodeValue::Sequence(items) => Value::Array(items.iter().map(Node::to_json).collect()),
            NodeValue::Mapping(entries) => Value::Object(
                entries
                    .iter()
                    .map(|(k, v)| {
                        let key = k.scalar().map_or_else(String::new, |s| s.text.clone());
                        (key, v.to_json())
                    })
                    .collect(),
            ),
        }
    }
}

/// A YAML-level failure with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} (line {line}, column {column})")]
pub struct YamlError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Parses the first document of `text`. Returns `Ok(None)` for an empty stream.
pub fn parse_document(text: &str) -> Result<Option<Node>, YamlError> {
    let mut builder = TreeBuilder::new(text);
    let mut parser = Parser::new_from_str(text);
    parser.load(&mut builder, false).map_err(|e| YamlError {
        line: e.marker().line(),
        column: e.marker().col() + 1,
        message: e.info().to_string(),
    })?;
    if let Some(err) = builder.error {
        return Err(err);
    }
    Ok(builder.root)
}

enum Frame {
    Seq {
        items: Vec<Node>,
        line: usize,
        column: usize,
        anchor: usize,
    },
    Map {
        entries: Vec<(Node, Node)>,
        pending_key: Option<Node>,
        line: usize,
        column: usize,
        anchor: usize,
    },
}

struct TreeBuilder<'a> {
    source: &'a str,
    /// Byte offset of each char, present only for non-ASCII sources.
    char_offsets: Option<Vec<usize>>,
    stack: Vec<Frame>,
    anchors: HashMap<usize, Node>,
    root: Option<Node>,
    error: Option<YamlError>,
}

impl<'a> TreeBuilder<'a> {
    fn new(source: &'a str) -> Self {
        let char_offsets = (!source.is_ascii()).then(|| source.char_indices().map(|(i, _)| i).collect());
        Self {
            source,
            char_offsets,
            stack: Vec::new(),
            anchors: HashMap::new(),
            root: None,
            error: None,
        }
    }

    fn byte_offset(&self, char_index: usize) -> usize {
        match &self.char_offsets {
            Some(offsets) => offsets.get(char_index).copied().unwrap_or(self.source.len()),
            None => char_index.min(self.source.len()),
        }
    }

    /// Whether a plain scalar's text runs past the end of its first source line.
    fn plain_spans_lines(&self, text: &str, mark: &Marker) -> bool {
        if !text.contains(' ') {
            return false;
        }
        let start = self.byte_offset(mark.index());
        let rest = &self.source[start..];
        let line = rest.split('\n').next().unwrap_or("");
        !line.starts_with(text)
    }

    fn push(&mut self, node: Node, anchor: usize) {
        if anchor > 0 {
            self.anchors.insert(anchor, node.clone());
        }
        match self.stack.last_mut() {
            None => {
                if self.root.is_none() {
                    self.root = Some(node);
                }
            }
            Some(Frame::Seq { items, .. }) => items.push(node),
            Some(Frame::Map {
                entries,
                pending_key,
                ..
            }) => match pending_key.take() {
                None => *pending_key = Some(node),
                Some(key) => entries.push((key, node)),
            },
        }
    }
}

impl MarkedEventReceiver for TreeBuilder<'_> {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        let line = mark.line();
        let column = mark.col() + 1;
        match ev {
            Event::Scalar(text, style, anchor, _tag) => {
                let style = match style {
                    TScalarStyle::SingleQuoted => ScalarStyle::SingleQuoted,
                    TScalarStyle::DoubleQuoted => ScalarStyle::DoubleQuoted,
                    TScalarStyle::Literal => ScalarStyle::Literal,
                    TScalarStyle::Folded => ScalarStyle::Folded,
                    _ => ScalarStyle::Plain,
                };
                let spans_lines = style == ScalarStyle::Plain && self.plain_spans_lines(&text, &mark);
                let node = Node {
                    value: NodeValue::Scalar(Scalar {
                        text,
                        style,
                        spans_lines,
                    }),
                    line,
                    column,
                };
                self.push(node, anchor);
            }
            Event::SequenceStart(anchor, _) => self.stack.push(Frame::Seq {
                items: Vec::new(),
                line,
                column,
                anchor,
            }),
            Event::MappingStart(anchor, _) => self.stack.push(Frame::Map {
                entries: Vec::new(),
                pending_key: None,
                line,
                column,
                anchor,
            }),
            Event::SequenceEnd => {
                if let Some(Frame::Seq {
                    items,
                    line,
                    column,
                    anchor,
                }) = self.stack.pop()
                {
                    let (line, column) = items.first().map_or((line, column), |n| (n.line, n.column));
                    self.push(
                        Node {
                            value: NodeValue::Sequence(items),
                            line,
                            column,
                        },
                        anchor,
                    );
                }
            }
            Event::MappingEnd => {
                if let Some(Frame::Map {
                    entries,
                    line,
                    column,
                    anchor,
                    ..
                }) = self.stack.pop()
                {
                    let (line, column) = entries.first().map_or((line, column), |(k, _)| (k.line, k.column));
                    self.push(
                        Node {
                            value: NodeValue::Mapping(entries),
                            line,
                            column,
                        },
                        anchor,
                    );
                }
            }
            Event::Alias(id) => match self.anchors.get(&id).cloned() {
                Some(node) => self.push(node, 0),
                None => {
                    self.error = Some(YamlError {
                        line,
                        column,
                        message: "alias refers to an unknown anchor".into(),
                    })
                }
            },
            _ => {}
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            NodeValue::Scalar(s) => f.write_str(&s.text),
            NodeValue::Sequence(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            NodeValue::Mapping(entries) => {
                f.write_str("{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_raw_scalar_spelling_and_style() {
        let doc = parse_document("v: [3.10, \"3.9\", '3.0']\n").unwrap().unwrap();
        let items = doc.get("v").unwrap().as_seq().unwrap();
        let raw: Vec<_> = items.iter().map(|n| n.as_str().unwrap()).collect();
        assert_eq!(raw, ["3.10", "3.9", "3.0"]);
        assert!(!items[0].is_quoted());
        assert!(items[1].is_quoted());
        assert_eq!(items[0].line, 1);
        assert_eq!(items[0].column, 5);
    }

    #[test]
    fn detects_multiline_plain_scalars() {
        let doc = parse_document("on:\n  push\n  pull_request\n").unwrap().unwrap();
        let on = doc.get("on").unwrap().scalar().unwrap();
        assert_eq!(on.text, "push pull_request");
        assert!(on.spans_lines);
        let doc = parse_document("name: two words\n").unwrap().unwrap();
        assert!(!doc.get("name").unwrap().scalar().unwrap().spans_lines);
    }

    #[test]
    fn non_ascii_offsets() {
        let doc = parse_document("é: x\nname: a b\n").unwrap().unwrap();
        assert!(!doc.get("name").unwrap().scalar().unwrap().spans_lines);
    }

    #[test]
    fn aliases_resolve_to_anchored_nodes() {
        let doc = parse_document("a: &x [1, 2]\nb: *x\n").unwrap().unwrap();
        assert_eq!(doc.get("a"), doc.get("b"));
        assert_eq!(doc.get("b").unwrap().as_seq().unwrap().len(), 2);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_document("a:\n  b: 1\n c: 2\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(parse_document("").unwrap().is_none());
    }

    #[test]
    fn paths_round_trip_and_lookup() {
        let path = parse_path("jobs.build.steps[2].run");
        assert_eq!(format_path(&path), "jobs.build.steps[2].run");
        let doc = parse_document("jobs:\n  build:\n    steps:\n      - run: a\n      - run: b\n")
            .unwrap()
            .unwrap();
        let p = parse_path("jobs.build.steps[1].run");
        assert_eq!(doc.find(&p).unwrap().as_str(), Some("b"));
        assert_eq!(doc.line_of(&p), Some(5));
    }

    #[test]
    fn json_conversion_resolves_core_schema() {
        let doc = parse_document("a: 1\nb: true\nc: v4\nd: \"1\"\ne:\n").unwrap().unwrap();
        let json = doc.to_json();
        assert_eq!(json["a"], 1);
        assert_eq!(json["b"], true);
        assert_eq!(json["c"], "v4");
        assert_eq!(json["d"], "1");
        assert!(json["e"].is_null());
    }
}
