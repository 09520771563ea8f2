//! Taxonomy linter: seventeen issue types in four categories, detected over a
//! candidate workflow and, for logic checks, the Travis configuration it was
//! translated from.

mod environment;
mod logic;
mod platform;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ActionRegistry, CredentialTable, DenyList, PackageTable};
use crate::model::TravisConfig;
use crate::yaml::{check_syntax, parse_document, parse_path, workflow_from_tree, Node, SyntaxSubtype};

pub use environment::detect_environment;
pub use logic::detect_logic;
pub use platform::detect_platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SyntaxError,
    PlatformDiscrepancy,
    EnvironmentError,
    LogicInconsistency,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::SyntaxError,
        Category::PlatformDiscrepancy,
        Category::EnvironmentError,
        Category::LogicInconsistency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SyntaxError => "syntax_error",
            Category::PlatformDiscrepancy => "platform_discrepancy",
            Category::EnvironmentError => "environment_error",
            Category::LogicInconsistency => "logic_inconsistency",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    MissingSymbol,
    IndentationError,
    MissingOrMisplacedDefinition,
    InvalidValue,
    UnsupportedKey,
    UnsupportedExpression,
    UnsupportedArchitecture,
    TrailingZero,
    UnspecifiedDefault,
    MissingPackage,
    ObsoleteAction,
    MissingSecret,
    TriggerEventMisconfig,
    ExecutionOrderError,
    ConditionMisconfig,
    MissingTask,
    RedundantTask,
}

impl IssueType {
    pub const ALL: [IssueType; 17] = [
        IssueType::MissingSymbol,
        IssueType::IndentationError,
        IssueType::MissingOrMisplacedDefinition,
        IssueType::InvalidValue,
        IssueType::UnsupportedKey,
        IssueType::UnsupportedExpression,
        IssueType::UnsupportedArchitecture,
        IssueType::TrailingZero,
        IssueType::UnspecifiedDefault,
        IssueType::MissingPackage,
        IssueType::ObsoleteAction,
        IssueType::MissingSecret,
        IssueType::TriggerEventMisconfig,
        IssueType::ExecutionOrderError,
        IssueType::ConditionMisconfig,
        IssueType::MissingTask,
        IssueType::RedundantTask,
    ];

    pub fn category(self) -> Category {
        use IssueType::*;
        match self {
            MissingSymbol | IndentationError | MissingOrMisplacedDefinition | InvalidValue => {
                Category::SyntaxError
            }
            UnsupportedKey | UnsupportedExpression | UnsupportedArchitecture | TrailingZero
            | UnspecifiedDefault | MissingPackage => Category::PlatformDiscrepancy,
            ObsoleteAction | MissingSecret => Category::EnvironmentError,
            TriggerEventMisconfig | ExecutionOrderError | ConditionMisconfig | MissingTask
            | RedundantTask => Category::LogicInconsistency,
        }
    }

    /// Logic issues leave a runnable workflow; everything else breaks the run.
    pub fn severity(self) -> Severity {
        match self.category() {
            Category::LogicInconsistency => Severity::Advisory,
            _ => Severity::Blocking,
        }
    }

    pub fn as_str(self) -> &'static str {
        use IssueType::*;
        match self {
            MissingSymbol => "missing_symbol",
            IndentationError => "indentation_error",
            MissingOrMisplacedDefinition => "missing_or_misplaced_definition",
            InvalidValue => "invalid_value",
            UnsupportedKey => "unsupported_key",
            UnsupportedExpression => "unsupported_expression",
            UnsupportedArchitecture => "unsupported_architecture",
            TrailingZero => "trailing_zero",
            UnspecifiedDefault => "unspecified_default",
            MissingPackage => "missing_package",
            ObsoleteAction => "obsolete_action",
            MissingSecret => "missing_secret",
            TriggerEventMisconfig => "trigger_event_misconfig",
            ExecutionOrderError => "execution_order_error",
            ConditionMisconfig => "condition_misconfig",
            MissingTask => "missing_task",
            RedundantTask => "redundant_task",
        }
    }
}

impl fmt::Display for IssueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown issue type {0:?}")]
pub struct UnknownIssueType(pub String);

impl FromStr for IssueType {
    type Err = UnknownIssueType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IssueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownIssueType(s.to_string()))
    }
}

impl From<SyntaxSubtype> for IssueType {
    fn from(subtype: SyntaxSubtype) -> Self {
        match subtype {
            SyntaxSubtype::MissingSymbol => IssueType::MissingSymbol,
            SyntaxSubtype::IndentationError => IssueType::IndentationError,
            SyntaxSubtype::MissingOrMisplacedDefinition => IssueType::MissingOrMisplacedDefinition,
            SyntaxSubtype::InvalidValue => IssueType::InvalidValue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Blocking,
    Advisory,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Blocking => "blocking",
            Severity::Advisory => "advisory",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub category: Category,
    pub issue_type: IssueType,
    pub path: String,
    pub line: Option<usize>,
    pub severity: Severity,
    pub message: String,
    pub evidence: String,
}

impl Issue {
    pub fn new(
        issue_type: IssueType,
        path: impl Into<String>,
        message: impl Into<String>,
        evidence: impl Into<String>,
    ) -> Self {
        Self {
            category: issue_type.category(),
            issue_type,
            path: path.into(),
            line: None,
            severity: issue_type.severity(),
            message: message.into(),
            evidence: evidence.into(),
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn is_blocking(&self) -> bool {
        self.severity == Severity::Blocking
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "{} [{}, {}]", self.issue_type, self.category, self.severity)?;
        if !self.path.is_empty() {
            write!(f, " at {}", self.path)?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Read-only inputs shared by all detectors.
#[derive(Debug, Clone)]
pub struct LintContext {
    pub source: Option<TravisConfig>,
    available_secrets: BTreeSet<String>,
    pub action_registry: ActionRegistry,
    pub package_table: PackageTable,
    pub credentials: CredentialTable,
    pub deny_list: DenyList,
}

impl Default for LintContext {
    fn default() -> Self {
        Self::new(None)
    }
}

impl LintContext {
    pub const DEFAULT_SECRET: &'static str = "GITHUB_TOKEN";

    pub fn new(source: Option<TravisConfig>) -> Self {
        Self {
            source,
            available_secrets: BTreeSet::from([Self::DEFAULT_SECRET.to_string()]),
            action_registry: ActionRegistry::default(),
            package_table: PackageTable::bundled(),
            credentials: CredentialTable::bundled(),
            deny_list: DenyList::bundled(),
        }
    }

    /// Adds repository secrets; `GITHUB_TOKEN` is always available.
    pub fn with_secrets<I, S>(mut self, secrets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.available_secrets
            .extend(secrets.into_iter().map(Into::into).filter(|s| !s.is_empty()));
        self
    }

    pub fn secrets(&self) -> &BTreeSet<String> {
        &self.available_secrets
    }

    pub fn has_secret(&self, name: &str) -> bool {
        self.available_secrets.contains(name)
    }

    /// Logic checks compare against the source and are skipped without it.
    pub fn logic_skipped(&self) -> bool {
        self.source.is_none()
    }
}

/// Runs every detector over `candidate_text`. Text that does not parse as a
/// workflow yields syntax issues only.
pub fn lint(candidate_text: &str, ctx: &LintContext) -> Vec<Issue> {
    let mut issues = detect_syntax(candidate_text);
    let Ok(Some(tree)) = parse_document(candidate_text) else {
        return issues;
    };
    let wf = match workflow_from_tree(&tree) {
        Ok(wf) => wf,
        Err(e) => {
            if issues.is_empty() {
                issues.push(
                    Issue::new(IssueType::MissingOrMisplacedDefinition, "", e.to_string(), "")
                        .at_line(e.line().unwrap_or(1)),
                );
            }
            return issues;
        }
    };
    issues.extend(platform::check(&wf, &tree, ctx));
    issues.extend(environment::check(&wf, Some(&tree), ctx));
    if let Some(source) = &ctx.source {
        // A section that failed the syntax check reads as garbage to the
        // consistency checks; reporting it again would only be noise.
        let broken: Vec<String> = issues
            .iter()
            .filter(|i| i.category == Category::SyntaxError)
            .map(|i| i.path.clone())
            .collect();
        issues.extend(
            logic::check(source, &wf, &ctx.package_table)
                .into_iter()
                .filter(|i| !broken.iter().any(|b| within(&i.path, b))),
        );
    }
    locate(&mut issues, &tree);
    sort_issues(&mut issues);
    issues
}

/// Whether `path` is `prefix` or lies below it.
fn within(path: &str, prefix: &str) -> bool {
    prefix.is_empty()
        || path
            .strip_prefix(prefix)
            .is_some_and(|rest| rest.is_empty() || rest.starts_with(['.', '[']))
}

/// Wraps structural findings of the YAML front end; always blocking.
pub fn detect_syntax(candidate_text: &str) -> Vec<Issue> {
    let lines: Vec<&str> = candidate_text.lines().collect();
    check_syntax(candidate_text)
        .into_iter()
        .map(|f| {
            let evidence = lines.get(f.line.saturating_sub(1)).map_or("", |l| l.trim());
            Issue::new(f.subtype.into(), f.path, f.message, evidence).at_line(f.line)
        })
        .collect()
}

pub(crate) fn locate(issues: &mut [Issue], tree: &Node) {
    for issue in issues.iter_mut().filter(|i| i.line.is_none() && !i.path.is_empty()) {
        issue.line = tree.line_of(&parse_path(&issue.path));
    }
}

/// Orders by line (unlocated issues last), then path; stable otherwise.
pub fn sort_issues(issues: &mut [Issue]) {
    issues.sort_by(|a, b| {
        let key = |i: &Issue| (i.line.is_none(), i.line.unwrap_or(0));
        key(a).cmp(&key(b)).then_with(|| a.path.cmp(&b.path))
    });
}

pub fn has_blocking(issues: &[Issue]) -> bool {
    issues.iter().any(Issue::is_blocking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yaml::parse_travis;

    const CLEAN: &str = "name: CI\non: [push, pull_request]\njobs:\n  build:\n    runs-on: ubuntu-latest\n    strategy:\n      matrix:\n        python-version: [3.8, 3.9]\n    steps:\n      - uses: actions/checkout@v4\n      - uses: actions/setup-python@v5\n        with:\n          python-version: ${{ matrix.python-version }}\n      - run: python setup.py develop\n      - run: python -m pytest\n";

    #[test]
    fn taxonomy_shape() {
        let per_category: Vec<usize> = Category::ALL
            .iter()
            .map(|c| IssueType::ALL.iter().filter(|t| t.category() == *c).count())
            .collect();
        assert_eq!(per_category, [4, 6, 2, 5]);
        for t in IssueType::ALL {
            assert_eq!(t.as_str().parse::<IssueType>().unwrap(), t);
            let blocking = t.severity() == Severity::Blocking;
            assert_eq!(blocking, t.category() != Category::LogicInconsistency, "{t}");
        }
        assert!("nonsense".parse::<IssueType>().is_err());
    }

    #[test]
    fn clean_workflow_has_no_issues() {
        assert_eq!(lint(CLEAN, &LintContext::default()), []);
        let source = parse_travis("language: python\npython:\n  - 3.8\n  - 3.9\ninstall:\n  - python setup.py develop\nscript:\n  - python -m pytest\n").unwrap();
        assert_eq!(lint(CLEAN, &LintContext::new(Some(source))), []);
    }

    #[test]
    fn unquoted_trailing_zero() {
        let text = CLEAN.replace("[3.8, 3.9]", "[3.9, 3.10]");
        let issues = lint(&text, &LintContext::default());
        assert_eq!(issues.len(), 1, "{issues:?}");
        assert_eq!(issues[0].issue_type, IssueType::TrailingZero);
        assert_eq!(issues[0].category, Category::PlatformDiscrepancy);
        assert_eq!(issues[0].line, Some(8));
        assert_eq!(issues[0].evidence, "3.10");
    }

    #[test]
    fn coveralls_without_token() {
        let text = format!("{CLEAN}      - run: coveralls\n");
        let source = parse_travis("language: python\nscript: pytest\nafter_success: coveralls\n").unwrap();
        let issues = lint(&text, &LintContext::new(Some(source)));
        let blocking: Vec<_> = issues.iter().filter(|i| i.is_blocking()).collect();
        assert_eq!(blocking.len(), 1, "{issues:?}");
        assert_eq!(blocking[0].issue_type, IssueType::MissingSecret);
        assert_eq!(blocking[0].category, Category::EnvironmentError);
    }

    #[test]
    fn unparseable_text_yields_syntax_only() {
        let issues = lint("on: [push\njobs: {", &LintContext::default());
        assert!(!issues.is_empty());
        assert!(issues.iter().all(|i| i.category == Category::SyntaxError));
    }

    #[test]
    fn syntax_errors_mask_logic_checks_below_them() {
        let text = CLEAN.replace("on: [push, pull_request]\n", "on:\n  push\n  pull_request\n");
        let source = parse_travis("language: python\npython:\n  - 3.8\n  - 3.9\ninstall:\n  - python setup.py develop\nscript:\n  - python -m pytest\n").unwrap();
        let types: Vec<_> = lint(&text, &LintContext::new(Some(source))).iter().map(|i| i.issue_type).collect();
        assert_eq!(types, [IssueType::MissingSymbol]);
        assert!(within("on", "on") && within("on.push", "on") && within("jobs[0]", "jobs"));
        assert!(!within("onward", "on") && within("anything", ""));
    }

    #[test]
    fn secrets_context_always_has_github_token() {
        let ctx = LintContext::default().with_secrets(["", "PYPI_TOKEN"]);
        assert!(ctx.has_secret("GITHUB_TOKEN"));
        assert!(ctx.has_secret("PYPI_TOKEN"));
        assert_eq!(ctx.secrets().len(), 2);
        assert!(ctx.logic_skipped());
    }

    #[test]
    fn ordering_puts_unlocated_last() {
        let mut issues = vec![
            Issue::new(IssueType::MissingTask, "jobs", "m", "e"),
            Issue::new(IssueType::TrailingZero, "b", "m", "e").at_line(3),
            Issue::new(IssueType::TrailingZero, "a", "m", "e").at_line(3),
            Issue::new(IssueType::UnsupportedKey, "z", "m", "e").at_line(1),
        ];
        sort_issues(&mut issues);
        let order: Vec<_> = issues.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(order, ["z", "a", "b", "jobs"]);
    }
}
