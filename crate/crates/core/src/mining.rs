//! Migration-commit detection, one-to-one translation records and effort
//! metrics over repository-history fixtures.
//!
//! A fixture is a JSON Lines file, one commit per line:
//! `{sha, message, timestamp, files: [{path, kind, added, deleted, blob_ref}]}`,
//! next to a `blobs/` directory holding file contents named by `blob_ref`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use regex::RegexSet;
use serde::{Deserialize, Serialize};

static MIGRATION_PATTERNS: LazyLock<RegexSet> = LazyLock::new(|| {
    RegexSet::new([
        r"(?i)migrate.*travis",
        r"(?i)move.*travis",
        r"(?i)replace.*travis",
        r"(?i)switch.*travis",
    ])
    .unwrap()
});

pub const TRAVIS_FILE: &str = ".travis.yml";
pub const WORKFLOW_DIR: &str = ".github/workflows/";
/// Width of the effort histogram buckets (1–30, 31–60, …).
pub const BUCKET_WIDTH: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum MiningError {
    #[error("commit {sha}: no content for {path}")]
    MissingBlob { sha: String, path: String },
    #[error("{path}:{line}: {message}")]
    BadFixture { path: String, line: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("no effort reports to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Removed,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub kind: ChangeKind,
    pub added: usize,
    pub deleted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitInfo {
    pub sha: String,
    pub message: String,
    pub timestamp: DateTime<Utc>,
    #[serde(rename = "files", default)]
    pub file_changes: Vec<FileChange>,
}

impl CommitInfo {
    fn change(&self, path: &str) -> Option<&FileChange> {
        self.file_changes.iter().find(|f| f.path == path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub id: String,
    pub source_text: String,
    #[serde(default)]
    pub target_text: String,
    #[serde(default)]
    pub migration_commit: String,
    /// Later commits touching the workflow file, restricted to that file.
    #[serde(default)]
    pub follow_up_commits: Vec<CommitInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffortReport {
    pub source_size: usize,
    pub target_size: usize,
    pub attempts: usize,
    pub change_sizes: Vec<(usize, usize)>,
}

/// File contents addressed by `blob_ref`. Implementations must tolerate
/// concurrent reads.
pub trait BlobStore: Sync {
    fn blob(&self, blob_ref: &str) -> Option<String>;
}

impl BlobStore for HashMap<String, String> {
    fn blob(&self, blob_ref: &str) -> Option<String> {
        self.get(blob_ref).cloned()
    }
}

/// Blobs stored as files in a directory.
#[derive(Debug, Clone)]
pub struct BlobDir(pub PathBuf);

impl BlobStore for BlobDir {
    fn blob(&self, blob_ref: &str) -> Option<String> {
        if blob_ref.contains("..") || blob_ref.starts_with('/') {
            return None;
        }
        fs::read_to_string(self.0.join(blob_ref)).ok()
    }
}

/// Where commit histories come from. Only a fixture-backed source ships; a
/// code-host client would implement the same interface.
pub trait HistorySource {
    fn id(&self) -> String;
    fn commits(&self) -> Result<Vec<CommitInfo>, MiningError>;
    fn blobs(&self) -> &dyn BlobStore;
}

/// A `history.jsonl` file with its sibling `blobs/` directory.
#[derive(Debug, Clone)]
pub struct FixtureHistory {
    pub history: PathBuf,
    blobs: BlobDir,
}

impl FixtureHistory {
    pub fn new(history: impl Into<PathBuf>) -> Self {
        let history = history.into();
        let dir = history.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self {
            blobs: BlobDir(dir.join("blobs")),
            history,
        }
    }
}

impl HistorySource for FixtureHistory {
    /// The repository directory name, or the file stem for a bare file.
    fn id(&self) -> String {
        let stem = self.history.file_stem().and_then(|s| s.to_str()).unwrap_or("repo");
        if stem == "history" {
            if let Some(dir) = self.history.parent().and_then(Path::file_name).and_then(|s| s.to_str()) {
                return dir.to_string();
            }
        }
        stem.to_string()
    }

    fn commits(&self) -> Result<Vec<CommitInfo>, MiningError> {
        load_history(&self.history)
    }

    fn blobs(&self) -> &dyn BlobStore {
        &self.blobs
    }
}

pub fn load_history(path: &Path) -> Result<Vec<CommitInfo>, MiningError> {
    let text = fs::read_to_string(path).map_err(|e| MiningError::Io(path.display().to_string(), e))?;
    parse_history(&text, &path.display().to_string())
}

pub fn parse_history(text: &str, origin: &str) -> Result<Vec<CommitInfo>, MiningError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MiningError::BadFixture {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn is_migration_commit(message: &str) -> bool {
    MIGRATION_PATTERNS.is_match(message)
}

fn is_workflow_file(path: &str) -> bool {
    path.starts_with(WORKFLOW_DIR) && (path.ends_with(".yml") || path.ends_with(".yaml"))
}

fn content(blobs: &dyn BlobStore, commit: &CommitInfo, change: &FileChange) -> Result<String, MiningError> {
    let missing = || MiningError::MissingBlob {
        sha: commit.sha.clone(),
        path: change.path.clone(),
    };
    blobs.blob(change.blob_ref.as_deref().ok_or_else(missing)?).ok_or_else(missing)
}

/// Builds the record for the first migration commit that adds workflow
/// files. `None` when there is no such commit, no prior Travis file, or the
/// commit adds more than one workflow.
pub fn extract_record(
    id: &str,
    history: &[CommitInfo],
    blobs: &dyn BlobStore,
) -> Result<Option<TranslationRecord>, MiningError> {
    let found = history.iter().enumerate().find_map(|(i, c)| {
        let added: Vec<&FileChange> = c
            .file_changes
            .iter()
            .filter(|f| f.kind == ChangeKind::Added && is_workflow_file(&f.path))
            .collect();
        (is_migration_commit(&c.message) && !added.is_empty()).then_some((i, added))
    });
    let Some((at, added)) = found else { return Ok(None) };
    if added.len() != 1 {
        return Ok(None);
    }
    let migration = &history[at];
    let workflow = added[0];

    let travis = history[..at]
        .iter()
        .rev()
        .find_map(|c| c.change(TRAVIS_FILE).map(|f| (c, f)))
        .filter(|(_, f)| f.kind != ChangeKind::Removed);
    let Some((travis_commit, travis_change)) = travis else { return Ok(None) };
    let source_text = content(blobs, travis_commit, travis_change)?;

    let mut follow_ups = Vec::new();
    let mut last = (migration, workflow);
    for commit in &history[at + 1..] {
        let Some(change) = commit.change(&workflow.path) else { continue };
        if change.kind == ChangeKind::Removed {
            break;
        }
        follow_ups.push(CommitInfo {
            file_changes: vec![change.clone()],
            ..commit.clone()
        });
        last = (commit, change);
    }
    let target_text = content(blobs, last.0, last.1)?;
    Ok(Some(TranslationRecord {
        id: id.to_string(),
        source_text,
        target_text,
        migration_commit: migration.sha.clone(),
        follow_up_commits: follow_ups,
    }))
}

/// Extracts one record per history on `workers` threads, in input order.
pub fn mine_all<S: HistorySource + Sync>(
    sources: &[S],
    workers: usize,
) -> Vec<Result<Option<TranslationRecord>, MiningError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        sources
            .par_iter()
            .map(|s| extract_record(&s.id(), &s.commits()?, s.blobs()))
            .collect()
    })
}

/// Time from the migration commit to the last follow-up, when there are any.
pub fn stabilization_time(record: &TranslationRecord, history: &[CommitInfo]) -> Option<Duration> {
    let start = history.iter().find(|c| c.sha == record.migration_commit)?.timestamp;
    let end = record.follow_up_commits.last()?.timestamp;
    Some(end - start)
}

/// Line counts include blank and comment lines.
pub fn effort_metrics(record: &TranslationRecord) -> EffortReport {
    EffortReport {
        source_size: record.source_text.lines().count(),
        target_size: record.target_text.lines().count(),
        attempts: 1 + record.follow_up_commits.len(),
        change_sizes: record
            .follow_up_commits
            .iter()
            .map(|c| {
                c.file_changes
                    .iter()
                    .fold((0, 0), |(a, d), f| (a + f.added, d + f.deleted))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub low: usize,
    pub high: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortSummary {
    pub records: usize,
    pub mean_source_size: f64,
    pub mean_target_size: f64,
    pub multi_commit_fraction: f64,
    pub three_plus_fraction: f64,
    /// Means over all follow-up commits; `None` when there are none.
    pub mean_added_per_change: Option<f64>,
    pub mean_deleted_per_change: Option<f64>,
    pub source_size_histogram: Vec<Bucket>,
    pub target_size_histogram: Vec<Bucket>,
}

fn histogram(values: impl Iterator<Item = usize>) -> Vec<Bucket> {
    let mut counts: Vec<usize> = Vec::new();
    for v in values {
        let idx = v.saturating_sub(1) / BUCKET_WIDTH;
        if counts.len() <= idx {
            counts.resize(idx + 1, 0);
        }
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bucket {
            low: i * BUCKET_WIDTH + 1,
            high: (i + 1) * BUCKET_WIDTH,
            count,
        })
        .collect()
}

pub fn aggregate_effort(reports: &[EffortReport]) -> Result<EffortSummary, MiningError> {
    if reports.is_empty() {
        return Err(MiningError::Empty);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EffortReport) -> usize| reports.iter().map(f).sum::<usize>() as f64 / n;
    let fraction = |min: usize| reports.iter().filter(|r| r.attempts >= min).count() as f64 / n;
    let changes: Vec<(usize, usize)> = reports.iter().flat_map(|r| r.change_sizes.iter().copied()).collect();
    let change_mean = |f: fn(&(usize, usize)) -> usize| {
        (!changes.is_empty()).then(|| changes.iter().map(f).sum::<usize>() as f64 / changes.len() as f64)
    };
    Ok(EffortSummary {
        records: reports.len(),
        mean_source_size: mean(|r| r.source_size),
        mean_target_size: mean(|r| r.target_size),
        multi_commit_fraction: fraction(2),
        three_plus_fraction: fraction(3),
        mean_added_per_change: change_mean(|c| c.0),
        mean_deleted_per_change: change_mean(|c| c.1),
        source_size_histogram: histogram(reports.iter().map(|r| r.source_size)),
        target_size_histogram: histogram(reports.iter().map(|r| r.target_size)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn commit(sha: &str, message: &str, day: u32, files: Vec<FileChange>) -> CommitInfo {
        CommitInfo {
            sha: sha.into(),
            message: message.into(),
            timestamp: format!("2021-03-{day:02}T12:00:00Z").parse().unwrap(),
            file_changes: files,
        }
    }

    fn change(path: &str, kind: ChangeKind, added: usize, deleted: usize, blob: &str) -> FileChange {
        FileChange {
            path: path.into(),
            kind,
            added,
            deleted,
            blob_ref: Some(blob.into()),
        }
    }

    fn blobs() -> HashMap<String, String> {
        HashMap::from([
            ("t1".to_string(), "language: python\nscript: pytest\n".to_string()),
            ("w1".to_string(), "on: push\n".to_string()),
            ("w2".to_string(), "on: push\njobs: {}\n".to_string()),
        ])
    }

    #[test]
    fn migration_messages() {
        assert!(is_migration_commit("Migrate CI from Travis to GitHub Actions"));
        assert!(is_migration_commit("switch to travis alternatives"));
        assert!(is_migration_commit("MOVE off TRAVIS"));
        assert!(!is_migration_commit("Fix flaky test"));
        assert!(!is_migration_commit("travis: migrate to xenial"));
    }

    #[test]
    fn record_with_follow_up() {
        let history = vec![
            commit("a", "init", 1, vec![change(".travis.yml", ChangeKind::Added, 2, 0, "t1")]),
            commit("b", "Migrate from Travis", 2, vec![
                change(".github/workflows/ci.yml", ChangeKind::Added, 1, 0, "w1"),
                change(".travis.yml", ChangeKind::Removed, 0, 2, "t1"),
            ]),
            commit("c", "fix ci", 4, vec![change(".github/workflows/ci.yml", ChangeKind::Modified, 1, 0, "w2")]),
        ];
        let rec = extract_record("repo", &history, &blobs()).unwrap().unwrap();
        assert_eq!(rec.migration_commit, "b");
        assert_eq!(rec.source_text, "language: python\nscript: pytest\n");
        assert_eq!(rec.target_text, "on: push\njobs: {}\n");
        assert_eq!(
            effort_metrics(&rec),
            EffortReport { source_size: 2, target_size: 2, attempts: 2, change_sizes: vec![(1, 0)] }
        );
        assert_eq!(stabilization_time(&rec, &history), Some(Duration::days(2)));
    }

    #[test]
    fn two_workflows_is_not_one_to_one() {
        let history = vec![
            commit("a", "init", 1, vec![change(".travis.yml", ChangeKind::Added, 2, 0, "t1")]),
            commit("b", "Replace Travis", 2, vec![
                change(".github/workflows/a.yml", ChangeKind::Added, 1, 0, "w1"),
                change(".github/workflows/b.yml", ChangeKind::Added, 1, 0, "w1"),
            ]),
        ];
        assert_eq!(extract_record("repo", &history, &blobs()).unwrap(), None);
        assert_eq!(extract_record("repo", &history[..1], &blobs()).unwrap(), None);
    }

    #[test]
    fn missing_blob_names_commit_and_path() {
        let history = vec![
            commit("a", "init", 1, vec![change(".travis.yml", ChangeKind::Added, 2, 0, "nope")]),
            commit("b", "migrate travis", 2, vec![change(".github/workflows/ci.yml", ChangeKind::Added, 1, 0, "w1")]),
        ];
        let err = extract_record("repo", &history, &blobs()).unwrap_err();
        assert_eq!(err.to_string(), "commit a: no content for .travis.yml");
    }

    #[test]
    fn effort_examples() {
        let rec = TranslationRecord {
            id: "r".into(),
            source_text: "x\n".repeat(38),
            target_text: "y\n".repeat(58),
            migration_commit: "m".into(),
            follow_up_commits: vec![],
        };
        assert_eq!(
            effort_metrics(&rec),
            EffortReport { source_size: 38, target_size: 58, attempts: 1, change_sizes: vec![] }
        );
        assert_eq!(effort_metrics(&TranslationRecord { source_text: "a\n\n# c\n".into(), ..rec }).source_size, 3);
    }

    #[test]
    fn aggregation() {
        let one = EffortReport { source_size: 38, target_size: 58, attempts: 1, change_sizes: vec![] };
        let three = EffortReport { source_size: 10, target_size: 70, attempts: 3, change_sizes: vec![(12, 7), (12, 7)] };
        let s = aggregate_effort(std::slice::from_ref(&one)).unwrap();
        assert_eq!((s.mean_source_size, s.mean_target_size, s.multi_commit_fraction), (38.0, 58.0, 0.0));
        assert_eq!(s.mean_added_per_change, None);
        let s = aggregate_effort(&[one, three]).unwrap();
        assert_eq!(s.multi_commit_fraction, 0.5);
        assert_eq!(s.three_plus_fraction, 0.5);
        assert_eq!(s.mean_added_per_change, Some(12.0));
        assert_eq!(s.source_size_histogram, [Bucket { low: 1, high: 30, count: 1 }, Bucket { low: 31, high: 60, count: 1 }]);
        assert_eq!(s.target_size_histogram.len(), 3);
        assert!(matches!(aggregate_effort(&[]), Err(MiningError::Empty)));
    }

    #[test]
    fn fixture_lines_parse() {
        let line = r#"{"sha":"a","message":"m","timestamp":"2021-03-01T00:00:00Z","files":[{"path":".travis.yml","kind":"added","added":3,"deleted":0,"blob_ref":"t"}]}"#;
        let commits = parse_history(&format!("{line}\n\n{line}\n"), "h").unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].file_changes[0].kind, ChangeKind::Added);
        assert!(matches!(parse_history("{", "h"), Err(MiningError::BadFixture { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn summary_fractions_are_ordered(attempts in prop::collection::vec(1usize..6, 1..30)) {
            let reports: Vec<EffortReport> = attempts
                .iter()
                .map(|&a| EffortReport { source_size: 1, target_size: 1, attempts: a, change_sizes: vec![(1, 1); a - 1] })
                .collect();
            let s = aggregate_effort(&reports).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.multi_commit_fraction));
            prop_assert!(s.multi_commit_fraction >= s.three_plus_fraction);
            for r in &reports {
                prop_assert_eq!(r.change_sizes.len(), r.attempts - 1);
            }
        }
    }
}
