//! Scanning of `${{ }}` expressions embedded in workflow strings.

use std::sync::LazyLock;

use regex::Regex;

static EXPRESSION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\{\{(.*?)\}\}").unwrap());
static MATRIX_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bmatrix\.([A-Za-z_][A-Za-z0-9_-]*)").unwrap());
static SECRET_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bsecrets\.([A-Za-z_][A-Za-z0-9_]*)").unwrap());

/// Bodies of all `${{ ... }}` expressions in `text`.
pub fn expressions(text: &str) -> impl Iterator<Item = &str> {
    EXPRESSION
        .captures_iter(text)
        .map(|c| c.get(1).map_or("", |m| m.as_str()))
}

pub fn is_expression(text: &str) -> bool {
    EXPRESSION.is_match(text)
}

/// Names X of every `matrix.X` used inside `${{ }}` in `text`.
pub fn matrix_references(text: &str) -> Vec<String> {
    expressions(text).flat_map(bare_matrix_references).collect()
}

/// Names X of `matrix.X` in an expression body (e.g. an `if:` value).
pub fn bare_matrix_references(body: &str) -> Vec<String> {
    MATRIX_REF
        .captures_iter(body)
        .map(|c| c[1].to_string())
        .collect()
}

/// Names X of every `secrets.X` used inside `${{ }}` in `text`.
pub fn secret_references(text: &str) -> Vec<String> {
    expressions(text)
        .flat_map(|body| {
            SECRET_REF
                .captures_iter(body)
                .map(|c| c[1].to_string())
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Strips an optional `${{ }}` wrapper and collapses whitespace.
pub fn normalize_condition(cond: &str) -> String {
    let trimmed = cond.trim();
    let inner = trimmed
        .strip_prefix("${{")
        .and_then(|s| s.strip_suffix("}}"))
        .unwrap_or(trimmed);
    inner.split_whitespace().collect::<Vec<_>>().join(" ")
}
