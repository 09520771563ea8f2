//! Travis CI → GitHub Actions translation toolkit: typed models of both
//! dialects, a rule-based transpiler, a taxonomy linter, translation-quality
//! metrics, an LLM prompt/refinement pipeline and repository-history mining.

pub mod data;
pub mod expr;
pub mod lint;
pub mod llm;
pub mod metrics;
pub mod mining;
pub mod model;
pub mod report;
pub mod transpile;
pub mod yaml;
