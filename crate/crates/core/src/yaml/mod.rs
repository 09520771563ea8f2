//! Parsing of both dialects, deterministic workflow rendering, and syntax
//! classification of candidate workflow texts.

mod node;
mod render;
mod syntax;
mod travis;
mod workflow;

pub use node::{format_path, parse_document, parse_path, Node, NodeValue, PathSeg, Scalar, ScalarStyle, YamlError};
pub use render::{render_workflow, RenderError};
pub use syntax::{check_syntax, SyntaxFinding, SyntaxSubtype};
pub use travis::{parse_travis, DEFAULT_STAGE};
pub use workflow::{parse_workflow, workflow_from_tree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("YAML parse error: {0}")]
    Yaml(#[from] YamlError),
    #[error("empty configuration")]
    EmptyConfiguration,
    #[error("not a workflow: {0}")]
    NotAWorkflow(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl FrontendError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        FrontendError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 1-based line of the failure, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            FrontendError::Yaml(e) => Some(e.line),
            _ => None,
        }
    }
}
