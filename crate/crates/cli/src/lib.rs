//! Command-line driver: `transpile`, `lint`, `score`, `refine`, `mine` and
//! `effort`. Exit codes: 0 success, 1 blocking lint issues, 2 usage or
//! input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ci_porter_core::data::{ActionRegistry, PackageTable};
use ci_porter_core::lint::{has_blocking, lint, Issue, LintContext};
use ci_porter_core::llm::{
    refine_batch, Case, GuidelineSet, HttpProvider, ModelSettings, Provider, RefineConfig, RunStrategy,
    ScriptedProvider, SimulatedBuild, StrategyInputs,
};
use ci_porter_core::metrics::{corpus_digest, tokenize, trivially_shared_ngrams, SharedNgramSet};
use ci_porter_core::mining::{aggregate_effort, effort_metrics, mine_all, EffortReport, FixtureHistory, TranslationRecord};
use ci_porter_core::report::{score_with_shared, Report, ScoreParams};
use ci_porter_core::transpile::{transpile, TranspileOptions, TranspileWarning};
use ci_porter_core::yaml::{parse_travis, render_workflow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOCKING: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ci-porter", version, about = "Travis CI to GitHub Actions migration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Basic,
    OneShot,
    Guideline,
    GuidelineIr,
    Ir,
}

impl From<StrategyArg> for RunStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Basic => RunStrategy::Basic,
            StrategyArg::OneShot => RunStrategy::OneShot,
            StrategyArg::Guideline => RunStrategy::Guideline,
            StrategyArg::GuidelineIr => RunStrategy::GuidelineIr,
            StrategyArg::Ir => RunStrategy::Ir,
        }
    }
}

/// Overrides for the bundled data tables.
#[derive(Debug, Args)]
struct DataArgs {
    /// Action registry YAML replacing the bundled one.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Package table YAML replacing the bundled one.
    #[arg(long)]
    packages: Option<PathBuf>,
}

impl DataArgs {
    fn registry(&self) -> Result<ActionRegistry> {
        match &self.registry {
            Some(path) => Ok(ActionRegistry::from_yaml(&read(path)?).with_context(|| path.display().to_string())?),
            None => Ok(ActionRegistry::default()),
        }
    }

    fn packages(&self) -> Result<PackageTable> {
        match &self.packages {
            Some(path) => Ok(PackageTable::from_yaml(&read(path)?).with_context(|| path.display().to_string())?),
            None => Ok(PackageTable::bundled()),
        }
    }

    fn lint_context(&self, secrets: &[String]) -> Result<LintContext> {
        let mut ctx = LintContext::default().with_secrets(secrets.iter().cloned());
        ctx.action_registry = self.registry()?;
        ctx.package_table = self.packages()?;
        Ok(ctx)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translate a .travis.yml into a GitHub Actions workflow.
    Transpile {
        #[arg(long)]
        source: PathBuf,
        /// Write the workflow here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Format of the warnings printed on standard error.
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Fail on architectures GitHub-hosted runners lack instead of warning.
        #[arg(long)]
        strict_arch: bool,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Check a workflow for known migration issues.
    Lint {
        #[arg(long)]
        candidate: PathBuf,
        /// Travis configuration the workflow was translated from; enables
        /// the consistency checks.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Repository secrets, comma separated.
        #[arg(long, value_delimiter = ',')]
        secrets: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Build-check and compare candidate translations against a corpus.
    Score {
        /// Translation records, one JSON object per line.
        #[arg(long)]
        records: PathBuf,
        /// Directory with one `<id>.yml` candidate per record.
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, value_delimiter = ',')]
        secrets: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Directory caching shared n-gram sets by corpus digest.
        #[arg(long)]
        ngram_cache: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Translate records with a model and refine failing builds.
    Refine {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value = "guideline-ir")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long, value_enum, default_value = "mock")]
        provider: ProviderKind,
        /// Scripted responses named `<id>.<iteration>.txt` for the mock provider.
        #[arg(long)]
        mock_dir: Option<PathBuf>,
        #[arg(long, default_value = "default")]
        model: String,
        /// HTTP request timeout in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
        /// Guideline rules YAML replacing the bundled set.
        #[arg(long)]
        guidelines: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        secrets: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Extract translation records from repository-history fixtures.
    Mine {
        /// `history.jsonl` files, each next to its `blobs/` directory.
        #[arg(required = true)]
        histories: Vec<PathBuf>,
        /// Records output (JSON Lines); standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Summarize the migration effort recorded in translation records.
    Effort {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_records(path: &Path) -> Result<Vec<TranslationRecord>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}: not a translation record", path.display(), i + 1))
        })
        .collect()
}

fn load_candidates(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut candidates = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let path = entry?.path();
        let id = match (path.file_stem(), path.extension()) {
            (Some(stem), Some(ext)) if ext == "yml" || ext == "yaml" => stem.to_string_lossy().into_owned(),
            _ => continue,
        };
        if candidates.insert(id.clone(), read(&path)?).is_some() {
            bail!("two candidate files for {id:?} in {}", dir.display());
        }
    }
    Ok(candidates)
}

fn shared_ngrams(records: &[TranslationRecord], params: ScoreParams, cache: Option<&Path>) -> Result<SharedNgramSet> {
    let corpus: Vec<Vec<String>> = records
        .iter()
        .filter(|r| !r.target_text.trim().is_empty())
        .map(|r| tokenize(&r.target_text))
        .collect();
    let Some(dir) = cache else {
        return Ok(trivially_shared_ngrams(&corpus, params.n_max, params.k));
    };
    let file = dir.join(format!("{}.json", corpus_digest(&corpus, params.n_max, params.k)));
    if let Ok(text) = fs::read_to_string(&file) {
        if let Ok(set) = serde_json::from_str(&text) {
            return Ok(set);
        }
    }
    let set = trivially_shared_ngrams(&corpus, params.n_max, params.k);
    fs::create_dir_all(dir)?;
    fs::write(&file, serde_json::to_string(&set)?)?;
    Ok(set)
}

fn render_report(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
    }
}

#[derive(Serialize)]
struct LintOutput<'a> {
    blocking: usize,
    issues: &'a [Issue],
}

fn run_command(command: Command) -> Result<i32> {
    match command {
        Command::Transpile {
            source,
            out,
            format,
            strict_arch,
            data,
        } => {
            let config = parse_travis(&read(&source)?)
                .with_context(|| source.display().to_string())?;
            let opts = TranspileOptions {
                strict_arch,
                action_registry: data.registry()?,
                package_table: data.packages()?,
                ..TranspileOptions::default()
            };
            let (wf, warnings) = transpile(&config, &opts)?;
            let text = render_workflow(&wf)?;
            emit(out.as_deref(), &text)?;
            print_warnings(&warnings, format)?;
            Ok(EXIT_OK)
        }
        Command::Lint {
            candidate,
            source,
            secrets,
            format,
            out,
            data,
        } => {
            let mut ctx = data.lint_context(&secrets)?;
            if let Some(source) = &source {
                ctx.source = Some(
                    parse_travis(&read(source)?)
                        .with_context(|| source.display().to_string())?,
                );
            }
            let issues = lint(&read(&candidate)?, &ctx);
            let blocking = issues.iter().filter(|i| i.is_blocking()).count();
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&LintOutput { blocking, issues: &issues })? + "\n",
                Format::Text => {
                    let mut t: String = issues.iter().map(|i| format!("{}: {i}\n", candidate.display())).collect();
                    t.push_str(&format!("{} issue(s), {blocking} blocking\n", issues.len()));
                    t
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(if has_blocking(&issues) { EXIT_BLOCKING } else { EXIT_OK })
        }
        Command::Score {
            records,
            candidate,
            secrets,
            format,
            out,
            workers,
            ngram_cache,
            data,
        } => {
            let records = load_records(&records)?;
            let candidates = load_candidates(&candidate)?;
            let ctx = data.lint_context(&secrets)?;
            let params = ScoreParams {
                workers,
                ..ScoreParams::default()
            };
            let shared = shared_ngrams(&records, params, ngram_cache.as_deref())?;
            let report = score_with_shared(&records, &candidates, &ctx, &shared, workers)?;
            emit(out.as_deref(), &render_report(&report, format))?;
            Ok(EXIT_OK)
        }
        Command::Refine {
            records,
            strategy,
            max_iters,
            provider,
            mock_dir,
            model,
            timeout,
            guidelines,
            secrets,
            format,
            out,
            workers,
            data,
        } => {
            let records = load_records(&records)?;
            let provider: Box<dyn Provider> = match provider {
                ProviderKind::Mock => {
                    let dir = mock_dir.context("--provider mock needs --mock-dir")?;
                    Box::new(ScriptedProvider::from_dir(&dir)?)
                }
                ProviderKind::Http => {
                    Box::new(HttpProvider::from_env(Duration::from_secs(timeout))?)
                }
            };
            let guidelines = match &guidelines {
                Some(path) => GuidelineSet::from_yaml(&read(path)?)
                    .with_context(|| path.display().to_string())?,
                None => GuidelineSet::default(),
            };
            let ctx = data.lint_context(&secrets)?;
            let cases: Vec<Case> = records.iter().map(Case::from).collect();
            let inputs = StrategyInputs {
                guidelines,
                example_pool: records.clone(),
            };
            let config = RefineConfig {
                strategy: strategy.into(),
                max_iters,
                settings: ModelSettings {
                    model,
                    ..ModelSettings::default()
                },
                workers,
            };
            let result = refine_batch(provider.as_ref(), &SimulatedBuild { base: ctx.clone() }, &cases, &inputs, &config);
            let candidates: BTreeMap<String, String> = result
                .states
                .iter()
                .filter_map(|s| s.candidate().map(|c| (s.case_id.clone(), c.to_string())))
                .collect();
            let shared = shared_ngrams(&records, ScoreParams::default(), None)?;
            let mut report = score_with_shared(&records, &candidates, &ctx, &shared, workers)?;
            for (case, state) in report.cases.iter_mut().zip(result.states) {
                if case.build.is_success() != state.last_outcome.as_ref().is_some_and(|o| o.is_success()) {
                    bail!("case {}: build verdict changed between refinement and scoring", case.case_id);
                }
                if !candidates.contains_key(&case.case_id) {
                    case.build = state.last_outcome.clone().unwrap_or(case.build.clone());
                }
                case.refinement = Some(state);
            }
            let mut report = Report::new(report.cases, Vec::new());
            report.notes.push(format!(
                "strategy {}, {} refinement round(s), {} provider call(s), fixed after each round: {:?}",
                config.strategy, result.iterations_run, result.provider_calls, result.fixed_after
            ));
            emit(out.as_deref(), &render_report(&report, format))?;
            Ok(EXIT_OK)
        }
        Command::Mine { histories, out, workers } => {
            let sources: Vec<FixtureHistory> = histories.iter().map(FixtureHistory::new).collect();
            let mut lines = String::new();
            for (path, result) in histories.iter().zip(mine_all(&sources, workers)) {
                match result.with_context(|| path.display().to_string())? {
                    Some(record) => {
                        lines.push_str(&serde_json::to_string(&record)?);
                        lines.push('\n');
                    }
                    None => eprintln!("{}: no one-to-one migration found", path.display()),
                }
            }
            emit(out.as_deref(), &lines)?;
            Ok(EXIT_OK)
        }
        Command::Effort { records, format, out } => {
            let records = load_records(&records)?;
            let reports: Vec<EffortReport> = records.iter().map(effort_metrics).collect();
            let summary = aggregate_effort(&reports)?;
            let text = match format {
                Format::Json => {
                    let per_record: BTreeMap<&str, &EffortReport> =
                        records.iter().map(|r| r.id.as_str()).zip(&reports).collect();
                    serde_json::to_string_pretty(&serde_json::json!({
                        "records": per_record,
                        "summary": summary,
                    }))? + "\n"
                }
                Format::Text => {
                    let mut t = String::new();
                    for (r, e) in records.iter().zip(&reports) {
                        t.push_str(&format!(
                            "{}: source {} lines, target {} lines, {} attempt(s), changes {:?}\n",
                            r.id, e.source_size, e.target_size, e.attempts, e.change_sizes
                        ));
                    }
                    t.push_str(&format!(
                        "{} record(s); {:.1}% needed more than one commit, {:.1}% three or more\n",
                        summary.records,
                        summary.multi_commit_fraction * 100.0,
                        summary.three_plus_fraction * 100.0
                    ));
                    t
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
    }
}

fn print_warnings(warnings: &[TranspileWarning], format: Format) -> Result<()> {
    let mut stderr = std::io::stderr().lock();
    match format {
        Format::Json => writeln!(stderr, "{}", serde_json::to_string(warnings)?)?,
        Format::Text => {
            for w in warnings {
                writeln!(stderr, "{w}")?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.yml"), "on: push\n").unwrap();
        fs::write(dir.path().join("b.yaml"), "on: pull_request\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let c = load_candidates(dir.path()).unwrap();
        assert_eq!(c.keys().collect::<Vec<_>>(), ["a", "b"]);
        fs::write(dir.path().join("a.yaml"), "on: push\n").unwrap();
        assert!(load_candidates(dir.path()).unwrap_err().to_string().contains("\"a\""));
    }

    #[test]
    fn record_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        fs::write(&path, "{\"id\": \"a\", \"source_text\": \"x\"}\n\nnot json\n").unwrap();
        let err = format!("{:#}", load_records(&path).unwrap_err());
        assert!(err.contains("r.jsonl:3"), "{err}");
    }

    #[test]
    fn strategy_names_match_core() {
        for arg in StrategyArg::value_variants() {
            let name = arg.to_possible_value().unwrap().get_name().to_string();
            assert_eq!(RunStrategy::from(*arg).as_str(), name);
        }
    }

    #[test]
    fn bad_arguments_exit_with_usage_code() {
        assert_eq!(run(["ci-porter", "lint", "--format", "xml", "--candidate", "x"]), EXIT_USAGE);
        assert_eq!(run(["ci-porter", "effort", "--records", "/nonexistent"]), EXIT_USAGE);
    }
}
