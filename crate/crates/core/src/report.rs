//! Per-case scoring of candidate translations and the aggregate report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lint::{lint, Category, Issue, IssueType, LintContext};
use crate::llm::{simulate_build, RefinementState};
use crate::metrics::{
    build_success_rate, crystal_bleu, median, text_similarity, tokenize, trivially_shared_ngrams, BuildOutcome, Ratio,
    SharedNgramSet, DEFAULT_K, DEFAULT_N_MAX,
};
use crate::mining::TranslationRecord;
use crate::yaml::parse_travis;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub n_max: usize,
    pub k: usize,
    pub workers: usize,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            k: DEFAULT_K,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub issues: Vec<Issue>,
    pub build: BuildOutcome,
    /// Similarity to the reference translation; absent without one.
    pub cs: Option<f64>,
    pub cb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Build success rate rounded to three decimals; absent for an empty run.
    pub bsr: Option<f64>,
    pub successes: usize,
    pub total: usize,
    pub cs_median: Option<f64>,
    pub cb_median: Option<f64>,
    pub issue_counts: BTreeMap<IssueType, usize>,
    pub category_counts: BTreeMap<Category, usize>,
}

impl Aggregates {
    pub fn from_cases(cases: &[CaseReport]) -> Self {
        let outcomes: Vec<BuildOutcome> = cases.iter().map(|c| c.build.clone()).collect();
        let ratio = build_success_rate(&outcomes).ok();
        let mut issue_counts = BTreeMap::new();
        let mut category_counts = BTreeMap::new();
        for issue in cases.iter().flat_map(|c| &c.issues) {
            *issue_counts.entry(issue.issue_type).or_insert(0) += 1;
            *category_counts.entry(issue.category).or_insert(0) += 1;
        }
        let cs: Vec<f64> = cases.iter().filter_map(|c| c.cs).collect();
        let cb: Vec<f64> = cases.iter().filter_map(|c| c.cb).collect();
        Self {
            bsr: ratio.map(Ratio::rounded),
            successes: ratio.map_or(0, |r| r.successes),
            total: cases.len(),
            cs_median: median(&cs),
            cb_median: median(&cb),
            issue_counts,
            category_counts,
        }
    }

    fn agrees_with(&self, other: &Aggregates) -> bool {
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
            (a, b) => a.is_none() && b.is_none(),
        };
        close(self.bsr, other.bsr)
            && close(self.cs_median, other.cs_median)
            && close(self.cb_median, other.cb_median)
            && self.successes == other.successes
            && self.total == other.total
            && self.issue_counts == other.issue_counts
            && self.category_counts == other.category_counts
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("candidate {0:?} has no matching record")]
    OrphanCandidate(String),
    #[error("duplicate record id {0:?}")]
    DuplicateRecord(String),
    #[error("report is malformed: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("report aggregates do not match its cases")]
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub cases: Vec<CaseReport>,
    pub aggregates: Aggregates,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(cases: Vec<CaseReport>, notes: Vec<String>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            aggregates: Aggregates::from_cases(&cases),
            cases,
            notes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report and checks its aggregates against its cases.
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: Report = serde_json::from_str(text)?;
        if !report.aggregates.agrees_with(&Aggregates::from_cases(&report.cases)) {
            return Err(ReportError::Inconsistent);
        }
        Ok(report)
    }

    pub fn to_text(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut out = String::new();
        for case in &self.cases {
            let status = if case.build.is_success() { "ok" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:<6} {}  issues={}  cs={}  cb={}",
                status,
                case.case_id,
                case.issues.len(),
                fmt_opt(case.cs),
                fmt_opt(case.cb)
            );
            for issue in &case.issues {
                let _ = writeln!(out, "         {issue}");
            }
        }
        let a = &self.aggregates;
        let bsr = a.bsr.map_or_else(|| "n/a".to_string(), |b| format!("{b:.3}"));
        let _ = writeln!(out, "build success rate: {bsr} ({}/{})", a.successes, a.total);
        let _ = writeln!(out, "median cosine similarity: {}", fmt_opt(a.cs_median));
        let _ = writeln!(out, "median CrystalBLEU: {}", fmt_opt(a.cb_median));
        for (t, n) in &a.issue_counts {
            let _ = writeln!(out, "  {t}: {n}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

/// Lints, builds and compares one candidate against its record.
pub fn score_case(
    record: &TranslationRecord,
    candidate: Option<&str>,
    base: &LintContext,
    shared: &SharedNgramSet,
) -> CaseReport {
    let mut ctx = base.clone();
    ctx.source = parse_travis(&record.source_text).ok();
    let Some(candidate) = candidate else {
        return CaseReport {
            case_id: record.id.clone(),
            issues: Vec::new(),
            build: BuildOutcome::failure(record.id.clone(), vec!["no candidate translation".into()]),
            cs: None,
            cb: None,
            refinement: None,
        };
    };
    let has_reference = !record.target_text.trim().is_empty();
    CaseReport {
        case_id: record.id.clone(),
        issues: lint(candidate, &ctx),
        build: simulate_build(&record.id, candidate, &ctx),
        cs: has_reference
            .then(|| text_similarity(candidate, &record.target_text).ok())
            .flatten(),
        cb: has_reference.then(|| crystal_bleu(&tokenize(candidate), &tokenize(&record.target_text), shared)),
        refinement: None,
    }
}

/// Scores every record. Records without a candidate count as failed builds;
/// candidates without a record are an error. Shared n-grams come from the
/// reference translations.
pub fn score_corpus(
    records: &[TranslationRecord],
    candidates: &BTreeMap<String, String>,
    base: &LintContext,
    params: ScoreParams,
) -> Result<Report, ReportError> {
    let mut ids = BTreeSet::new();
    for r in records {
        if !ids.insert(r.id.as_str()) {
            return Err(ReportError::DuplicateRecord(r.id.clone()));
        }
    }
    let references: Vec<Vec<String>> = records
        .iter()
        .filter(|r| !r.target_text.trim().is_empty())
        .map(|r| tokenize(&r.target_text))
        .collect();
    let shared = trivially_shared_ngrams(&references, params.n_max, params.k);
    score_with_shared(records, candidates, base, &shared, params.workers)
}

/// Like [`score_corpus`] with a precomputed shared n-gram set, e.g. one
/// loaded from a cache keyed by [`crate::metrics::corpus_digest`].
pub fn score_with_shared(
    records: &[TranslationRecord],
    candidates: &BTreeMap<String, String>,
    base: &LintContext,
    shared: &SharedNgramSet,
    workers: usize,
) -> Result<Report, ReportError> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    if let Some(orphan) = candidates.keys().find(|id| !ids.contains(id.as_str())) {
        return Err(ReportError::OrphanCandidate(orphan.clone()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let cases = pool.install(|| {
        records
            .par_iter()
            .map(|r| score_case(r, candidates.get(&r.id).map(String::as_str), base, shared))
            .collect()
    });
    let mut notes = Vec::new();
    let missing = records.iter().filter(|r| !candidates.contains_key(&r.id)).count();
    if missing > 0 {
        notes.push(format!("{missing} record(s) had no candidate and count as failed builds"));
    }
    Ok(Report::new(cases, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOURCE: &str = "language: c\nscript: make test\n";
    const GOOD: &str = "on: [push, pull_request]\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n      - run: make test\n";

    fn record(id: &str) -> TranslationRecord {
        TranslationRecord {
            id: id.into(),
            source_text: SOURCE.into(),
            target_text: GOOD.into(),
            migration_commit: String::new(),
            follow_up_commits: vec![],
        }
    }

    #[test]
    fn scoring_and_round_trip() {
        let records = [record("a"), record("b")];
        let candidates = BTreeMap::from([
            ("a".to_string(), GOOD.to_string()),
            ("b".to_string(), GOOD.replace("@v4", "@v1")),
        ]);
        let report = score_corpus(&records, &candidates, &LintContext::default(), ScoreParams::default()).unwrap();
        assert_eq!(report.aggregates.bsr, Some(0.5));
        assert_eq!(report.aggregates.issue_counts[&IssueType::ObsoleteAction], 1);
        assert_eq!(report.cases[0].cs, Some(1.0));
        assert!(report.cases[1].cs.unwrap() < 1.0);
        assert_eq!(Report::from_json(&report.to_json()).unwrap(), report);
        assert!(report.to_text().contains("build success rate: 0.500 (1/2)"));
    }

    #[test]
    fn tampered_aggregates_are_rejected() {
        let candidates = BTreeMap::from([("a".to_string(), GOOD.to_string())]);
        let mut report = score_corpus(&[record("a")], &candidates, &LintContext::default(), ScoreParams::default()).unwrap();
        report.aggregates.successes = 0;
        assert!(matches!(Report::from_json(&report.to_json()), Err(ReportError::Inconsistent)));
    }

    #[test]
    fn orphans_and_missing_candidates() {
        let candidates = BTreeMap::from([("zzz".to_string(), GOOD.to_string())]);
        assert!(matches!(
            score_corpus(&[record("a")], &candidates, &LintContext::default(), ScoreParams::default()),
            Err(ReportError::OrphanCandidate(id)) if id == "zzz"
        ));
        let report = score_corpus(&[record("a")], &BTreeMap::new(), &LintContext::default(), ScoreParams::default()).unwrap();
        assert_eq!(report.aggregates.bsr, Some(0.0));
        assert_eq!(report.notes.len(), 1);
        assert!(matches!(
            score_corpus(&[record("a"), record("a")], &BTreeMap::new(), &LintContext::default(), ScoreParams::default()),
            Err(ReportError::DuplicateRecord(_))
        ));
    }

    #[test]
    fn empty_corpus() {
        let report = score_corpus(&[], &BTreeMap::new(), &LintContext::default(), ScoreParams::default()).unwrap();
        assert_eq!(report.aggregates.bsr, None);
        assert_eq!(report.aggregates.cs_median, None);
    }
}
