//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is always printed; exits non-zero on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ci_porter_core::lint::{lint, IssueType, LintContext};
use ci_porter_core::llm::{
    refine_batch, Case, FnProvider, GuidelineSet, ProviderError, ProviderRequest, ProviderResponse, RefineConfig,
    RefineResult, RefinementStatus, RunStrategy, SimulatedBuild, StrategyInputs,
};
use ci_porter_core::metrics::{
    build_success_rate, cosine_similarity, crystal_bleu, trivially_shared_ngrams, BuildOutcome, SharedNgramSet,
    TokenVector, PRECISION_FLOOR,
};
use ci_porter_core::mining::{effort_metrics, extract_record, is_migration_commit, load_history, BlobDir, TranslationRecord};
use ci_porter_core::model::{normalize_command, ActionRef, Job, Matrix, Step, VersionLiteral, Workflow};
use ci_porter_core::transpile::{transpile, TranspileOptions, WarningCode};
use ci_porter_core::yaml::{check_syntax, parse_travis, parse_workflow, render_workflow};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

// 1. Golden transpilation of the two-version Python example.
fn golden_transpile() -> Check {
    let dir = fixtures().join("python_matrix");
    let config = parse_travis(&read(&dir.join(".travis.yml"))?).map_err(|e| e.to_string())?;
    let opts = TranspileOptions::default();
    let (wf, warnings) = transpile(&config, &opts).map_err(|e| e.to_string())?;

    let triggers: BTreeSet<&str> = wf.triggers.keys().map(String::as_str).collect();
    ensure(triggers == BTreeSet::from(["push", "pull_request"]), || format!("triggers {triggers:?}"))?;
    ensure(wf.jobs.len() == 1, || format!("{} jobs", wf.jobs.len()))?;
    let job = wf.jobs.values().next().unwrap();
    let matrix = job.strategy_matrix.as_ref().ok_or("no matrix")?;
    let versions: Vec<&str> = matrix.axes.get("python-version").ok_or("no python-version axis")?.iter().map(|v| v.raw_text.as_str()).collect();
    ensure(versions == ["3.8", "3.9"], || format!("python-version {versions:?}"))?;

    let registry = &opts.action_registry;
    let steps = &job.steps;
    ensure(steps.len() == 4, || format!("{} steps", steps.len()))?;
    ensure(steps[0].action().is_some_and(|a| registry.is("checkout", a)), || "step 1 is not checkout".into())?;
    ensure(steps[1].action().is_some_and(|a| registry.is("setup-python", a)), || "step 2 is not setup-python".into())?;
    let runs: Vec<&str> = steps[2..].iter().flat_map(|s| s.commands()).map(|c| c.normalized.as_str()).collect();
    ensure(runs == ["python setup.py develop", "python -m pytest"], || format!("commands {runs:?}"))?;
    ensure(warnings.iter().any(|w| w.code == WarningCode::DroppedNotifications), || "no dropped_notifications warning".into())?;

    let text = render_workflow(&wf).map_err(|e| e.to_string())?;
    let again = render_workflow(&transpile(&config, &opts).map_err(|e| e.to_string())?.0).map_err(|e| e.to_string())?;
    ensure(text == again, || "two runs rendered different bytes".into())?;
    let golden = read(&dir.join("expected.yml"))?;
    ensure(text == golden, || format!("output differs from expected.yml:\n{text}"))?;
    Ok(format!("{} bytes, {} warning(s)", text.len(), warnings.len()))
}

// 2. Taxonomy corpus: one seeded issue type per fixture plus clean files.
fn taxonomy_corpus() -> Check {
    let root = fixtures().join("lint");
    let mut dirs: Vec<PathBuf> = fs::read_dir(&root)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    dirs.sort();
    let (mut correct, mut seeded, mut clean, mut false_blocking) = (0, 0, 0, 0);
    let mut covered = BTreeSet::new();
    let mut failures = Vec::new();
    for dir in dirs {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let source = parse_travis(&read(&dir.join("source.travis.yml"))?).map_err(|e| format!("{name}: {e}"))?;
        let issues = lint(&read(&dir.join("candidate.yml"))?, &LintContext::new(Some(source)));
        let found: BTreeSet<IssueType> = issues.iter().map(|i| i.issue_type).collect();
        if name.starts_with("clean_") {
            clean += 1;
            let blocking = issues.iter().filter(|i| i.is_blocking()).count();
            false_blocking += blocking;
            if blocking > 0 {
                failures.push(format!("{name}: {found:?}"));
            }
            continue;
        }
        seeded += 1;
        let expected: IssueType = name
            .split_once('_')
            .map(|(_, t)| t)
            .ok_or_else(|| format!("bad fixture name {name}"))?
            .parse()
            .map_err(|e| format!("{name}: {e}"))?;
        covered.insert(expected);
        if found == BTreeSet::from([expected]) {
            correct += 1;
        } else {
            failures.push(format!("{name}: found {found:?}"));
        }
    }
    ensure(seeded == 17 && covered.len() == 17 && clean == 3, || format!("corpus has {seeded} seeded ({} types), {clean} clean", covered.len()))?;
    ensure(correct == 17 && false_blocking == 0, || failures.join("; "))?;
    Ok(format!("{correct}/{seeded} types identified, {false_blocking} false blocking issues on {clean} clean files"))
}

/// Clipped n-gram counting by exhaustive pairwise comparison.
fn oracle_bleu(cand: &[String], refr: &[String], shared: &[Vec<String>], n_max: usize) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let grams = |toks: &[String], n: usize| -> Vec<Vec<String>> {
        if toks.len() < n {
            return vec![];
        }
        (0..=toks.len() - n)
            .map(|i| toks[i..i + n].to_vec())
            .filter(|g| !shared.contains(g))
            .collect()
    };
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let c = grams(cand, n);
        let r = grams(refr, n);
        let mut distinct: Vec<&Vec<String>> = Vec::new();
        for g in &c {
            if !distinct.contains(&g) {
                distinct.push(g);
            }
        }
        let clipped: usize = distinct
            .iter()
            .map(|g| {
                let in_c = c.iter().filter(|x| x == g).count();
                let in_r = r.iter().filter(|x| x == g).count();
                in_c.min(in_r)
            })
            .sum();
        let p = if c.is_empty() { 0.0 } else { clipped as f64 / c.len() as f64 };
        log_sum += p.max(PRECISION_FLOOR).ln();
    }
    let (lc, lr) = (cand.len() as f64, refr.len() as f64);
    let bp = if lc > lr { 1.0 } else { (1.0 - lr / lc).exp() };
    bp * (log_sum / n_max as f64).exp()
}

/// The k most frequent n-grams per order by exhaustive counting; ties go to
/// the lexicographically smaller n-gram.
fn oracle_shared(corpus: &[Vec<String>], n_max: usize, k: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let mut counts: Vec<(Vec<String>, usize)> = Vec::new();
        for doc in corpus {
            for w in doc.windows(n) {
                match counts.iter_mut().find(|(g, _)| g.as_slice() == w) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((w.to_vec(), 1)),
                }
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out.extend(counts.into_iter().take(k).map(|(g, _)| g));
    }
    out
}

// 3. Metric arithmetic.
#[allow(clippy::approx_constant)] // 0.7071 is the pinned hand value
fn metric_arithmetic() -> Check {
    let outcomes = |ok: usize, total: usize| -> Vec<BuildOutcome> {
        (0..total)
            .map(|i| if i < ok { BuildOutcome::success(format!("c{i}")) } else { BuildOutcome::failure(format!("c{i}"), vec![]) })
            .collect()
    };
    let low = build_success_rate(&outcomes(59, 229)).map_err(|e| e.to_string())?;
    let high = build_success_rate(&outcomes(173, 229)).map_err(|e| e.to_string())?;
    ensure(low.rounded() == 0.258 && high.rounded() == 0.755, || format!("bsr {} / {}", low.rounded(), high.rounded()))?;

    let v = TokenVector::from_text("on: push jobs: build runs-on ubuntu-latest push");
    let identity = cosine_similarity(&v, &v).map_err(|e| e.to_string())?;
    ensure(identity == 1.0, || format!("identity cosine {identity}"))?;
    let hand = cosine_similarity(&TokenVector::from_tokens(["x", "y"]), &TokenVector::from_tokens(["x"])).map_err(|e| e.to_string())?;
    ensure((hand - 0.7071).abs() <= 1e-4, || format!("{{x,y}}.{{x}} = {hand}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vocab = ["on", "push", "jobs", "run", "uses", "steps", "-", ":", "build", "test"];
    let seq = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.gen_range(1..=20);
        (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect()
    };
    let corpus: Vec<Vec<String>> = (0..8).map(|_| seq(&mut rng)).collect();
    let (n_max, k) = (4, 3);
    let shared = trivially_shared_ngrams(&corpus, n_max, k);
    let brute_shared = oracle_shared(&corpus, n_max, k);
    ensure(shared.ngrams == brute_shared.iter().cloned().collect(), || "shared n-gram sets differ".into())?;
    let empty = SharedNgramSet::empty(n_max);
    let mut worst: f64 = 0.0;
    let mut substantive = 0;
    for i in 0..25 {
        // References are edited copies of the candidate so that n-grams
        // actually match; every fifth pair is unrelated.
        let c = seq(&mut rng);
        let r: Vec<String> = if i % 5 == 4 {
            seq(&mut rng)
        } else {
            let mut edited = Vec::new();
            for t in &c {
                if rng.gen_bool(0.1) {
                    continue;
                }
                edited.push(if rng.gen_bool(0.15) { vocab[rng.gen_range(0..vocab.len())].to_string() } else { t.clone() });
            }
            edited
        };
        let (set, list): (&SharedNgramSet, &[Vec<String>]) = if i % 2 == 0 { (&shared, &brute_shared) } else { (&empty, &[]) };
        let got = crystal_bleu(&c, &r, set);
        let want = oracle_bleu(&c, &r, list, n_max);
        worst = worst.max((got - want).abs());
        if want > 0.05 {
            substantive += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("crystal_bleu off by {worst:e}"))?;
    // Guard against a vacuous comparison where every score is floored.
    ensure(substantive >= 5, || format!("only {substantive} pairs scored above 0.05"))?;
    Ok(format!("bsr {low} and {high}; cos(x,y|x) = {hand:.4}; max |cb - oracle| = {worst:.1e} over 25 pairs ({substantive} above 0.05)"))
}

const FIXED: &str = "on: [push, pull_request]\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n      - run: make test\n";
const FAULTY: &str = "on: [push, pull_request]\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v1\n      - run: make test\n";

/// A mock that turns clean once a case reaches its scheduled iteration,
/// and counts calls independently of the pipeline.
fn scheduled(schedule: BTreeMap<String, Option<usize>>, calls: &AtomicUsize) -> impl Fn(&ProviderRequest) -> Result<ProviderResponse, ProviderError> + Send + Sync + '_ {
    move |r: &ProviderRequest| {
        calls.fetch_add(1, Ordering::SeqCst);
        let fixed = schedule.get(&r.case_id).copied().flatten().is_some_and(|at| r.iteration >= at);
        Ok(ProviderResponse { content: if fixed { FIXED } else { FAULTY }.to_string() })
    }
}

fn refine_cases(n: usize) -> Vec<Case> {
    (0..n).map(|i| Case { id: format!("case{i:02}"), source_text: "language: c\nscript: make test\n".into() }).collect()
}

fn run_refine(schedule: BTreeMap<String, Option<usize>>, cases: &[Case], max_iters: usize) -> (RefineResult, usize) {
    let calls = AtomicUsize::new(0);
    let provider = FnProvider(scheduled(schedule, &calls));
    let config = RefineConfig { strategy: RunStrategy::Ir, max_iters, workers: 4, ..RefineConfig::default() };
    let result = refine_batch(&provider, &SimulatedBuild::default(), cases, &StrategyInputs::default(), &config);
    (result, calls.load(Ordering::SeqCst))
}

// 4. Refinement-loop contract.
fn refinement_contract() -> Check {
    let max_iters = 5;
    let bound = |cases: usize| cases * (max_iters + 1);

    // (a) case01 is fixed at iteration 2; case00 at 1 keeps the loop going.
    let cases = refine_cases(2);
    let schedule = BTreeMap::from([("case00".to_string(), Some(1)), ("case01".to_string(), Some(2))]);
    let (a, calls_a) = run_refine(schedule, &cases, max_iters);
    let late = &a.states[1];
    ensure(late.status == RefinementStatus::Fixed && late.iteration == 2, || format!("(a) {:?} at iteration {}", late.status, late.iteration))?;

    // (b) a provider that repeats the same faulty text.
    let cases = refine_cases(3);
    let (b, calls_b) = run_refine(cases.iter().map(|c| (c.id.clone(), None)).collect(), &cases, max_iters);
    ensure(b.iterations_run <= 2 && b.states.iter().all(|s| s.status == RefinementStatus::Exhausted), || format!("(b) ran {} iterations", b.iterations_run))?;

    // (c) fixed-set monotonicity under a random schedule.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = refine_cases(10);
    let schedule: BTreeMap<String, Option<usize>> = cases
        .iter()
        .map(|c| (c.id.clone(), if rng.gen_bool(0.8) { Some(rng.gen_range(0..=4)) } else { None }))
        .collect();
    let (c, calls_c) = run_refine(schedule, &cases, max_iters);
    ensure(c.fixed_after.windows(2).all(|w| w[0] <= w[1]), || format!("(c) fixed counts {:?}", c.fixed_after))?;
    for state in &c.states {
        let first_fix = state.trace.iter().position(|t| t.outcome.is_success());
        let consistent = match first_fix {
            Some(i) => i + 1 == state.trace.len() && state.status == RefinementStatus::Fixed,
            None => state.status == RefinementStatus::Exhausted,
        };
        ensure(consistent, || format!("(c) {} attempted again after being fixed", state.case_id))?;
    }
    for (it, &count) in c.fixed_after.iter().enumerate() {
        let by_trace = c.states.iter().filter(|s| s.trace.iter().any(|t| t.iteration <= it && t.outcome.is_success())).count();
        ensure(by_trace == count, || format!("(c) iteration {it}: {count} reported, {by_trace} in traces"))?;
    }

    // (d) provider call budget, counted by the mock itself.
    for (name, r, calls, n) in [("a", &a, calls_a, 2), ("b", &b, calls_b, 3), ("c", &c, calls_c, 10)] {
        ensure(calls == r.provider_calls && calls <= bound(n), || format!("(d) run {name}: {calls} calls, {} reported, bound {}", r.provider_calls, bound(n)))?;
    }
    Ok(format!(
        "fixed at 2 -> iteration 2; repeat halts after {} round(s); fixed counts {:?}; calls {calls_a}/{calls_b}/{calls_c}",
        b.iterations_run, c.fixed_after
    ))
}

// 5. Strategy ordering on the 20-case suite.
fn strategy_ordering() -> Check {
    let dir = fixtures().join("strategy_suite");
    let records: Vec<TranslationRecord> = read(&dir.join("records.jsonl"))?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    #[derive(serde::Deserialize)]
    struct Plan {
        fault: Option<IssueType>,
        refine_at: Option<usize>,
    }
    let plan: BTreeMap<String, Plan> = serde_json::from_str(&read(&dir.join("plan.json"))?).map_err(|e| e.to_string())?;
    let mut responses = BTreeMap::new();
    for r in &records {
        let naive = read(&dir.join(format!("responses/{}.naive.yml", r.id)))?;
        let fixed = read(&dir.join(format!("responses/{}.fixed.yml", r.id)))?;
        responses.insert(r.id.clone(), (naive, fixed));
    }
    ensure(records.len() == 20 && plan.len() == 20, || format!("{} records", records.len()))?;

    // Guidelines fix the faults whose rule appears in the prompt, for the
    // three kinds the mock model "knows"; refinement fixes the scheduled
    // cases once the error output names their fault.
    let guidelines = GuidelineSet::default();
    let guided = [IssueType::TrailingZero, IssueType::UnsupportedExpression, IssueType::UnspecifiedDefault];
    let rule_for = |t: IssueType| guidelines.rules.iter().find(|r| r.issue_type == t).map(|r| r.rule.clone());
    let provider = FnProvider(|req: &ProviderRequest| {
        let p = &plan[&req.case_id];
        let (naive, fixed) = &responses[&req.case_id];
        let prompt = req.prompt();
        let fixes = match p.fault {
            None => true,
            Some(fault) if req.iteration == 0 => guided.contains(&fault) && rule_for(fault).is_some_and(|r| prompt.contains(&r)),
            Some(fault) => p.refine_at.is_some_and(|at| req.iteration >= at) && prompt.contains(fault.as_str()),
        };
        Ok(ProviderResponse { content: if fixes { fixed } else { naive }.clone() })
    });
    let cases: Vec<Case> = records.iter().map(Case::from).collect();
    let inputs = StrategyInputs { guidelines: guidelines.clone(), example_pool: records.clone() };
    let bsr = |strategy: RunStrategy| -> Result<f64, String> {
        let config = RefineConfig { strategy, max_iters: 5, workers: 4, ..RefineConfig::default() };
        let result = refine_batch(&provider, &SimulatedBuild::default(), &cases, &inputs, &config);
        Ok(build_success_rate(&result.outcomes()).map_err(|e| e.to_string())?.value())
    };
    let (basic, guideline, guideline_ir) = (bsr(RunStrategy::Basic)?, bsr(RunStrategy::Guideline)?, bsr(RunStrategy::GuidelineIr)?);
    ensure(guideline > basic && guideline_ir >= guideline, || format!("basic {basic}, guideline {guideline}, guideline+IR {guideline_ir}"))?;
    Ok(format!("BSR basic {basic:.3} < guideline {guideline:.3} <= guideline+IR {guideline_ir:.3}"))
}

// 6. Mining and effort on the 12-commit history.
fn mining_and_effort() -> Check {
    let dir = fixtures().join("history");
    let history = load_history(&dir.join("history.jsonl")).map_err(|e| e.to_string())?;
    ensure(history.len() == 12, || format!("{} commits", history.len()))?;
    let matches: Vec<&str> = history.iter().filter(|c| is_migration_commit(&c.message)).map(|c| c.sha.as_str()).collect();
    ensure(matches == ["c05", "c09", "c11"], || format!("matches {matches:?}"))?;
    let record = extract_record("history", &history, &BlobDir(dir.join("blobs")))
        .map_err(|e| e.to_string())?
        .ok_or("no record extracted")?;
    ensure(record.migration_commit == "c05", || format!("migration commit {}", record.migration_commit))?;
    ensure(record.source_text == read(&dir.join("blobs/travis-v2"))? && record.target_text == read(&dir.join("blobs/wf-v3"))?, || "record text mismatch".into())?;
    let effort = effort_metrics(&record);
    ensure(effort.attempts == 3 && effort.change_sizes == [(12, 7), (12, 7)], || format!("{effort:?}"))?;
    for msg in ["travis: migrate away from the deprecated sudo key", "Travis CI config: migrate to jobs.include"] {
        ensure(!is_migration_commit(msg), || format!("{msg:?} matched"))?;
    }
    Ok(format!("3 matches {matches:?}; attempts {}; change sizes {:?}", effort.attempts, effort.change_sizes))
}

fn random_version(rng: &mut ChaCha8Rng, trailing_zero: bool) -> VersionLiteral {
    let major = rng.gen_range(1..=20);
    let raw = if trailing_zero {
        if rng.gen_bool(0.2) { format!("{major}.0") } else { format!("{major}.{}0", rng.gen_range(1..=9)) }
    } else {
        match rng.gen_range(0..3) {
            0 => format!("{major}"),
            1 => format!("{major}.{}", rng.gen_range(1..=9)),
            _ => format!("{major}.{}.{}", rng.gen_range(0..=9), rng.gen_range(0..=20)),
        }
    };
    if rng.gen_bool(0.3) { VersionLiteral::quoted(raw) } else { VersionLiteral::plain(raw) }
}

fn random_workflow(rng: &mut ChaCha8Rng) -> Workflow {
    let axes_pool = ["python-version", "node-version", "go-version", "ruby-version", "toolchain"];
    let mut jobs = IndexMap::new();
    for j in 0..rng.gen_range(1..=3) {
        let mut matrix = Matrix::default();
        let n_axes = rng.gen_range(1..=3);
        for axis in &axes_pool[..n_axes] {
            let mut values: Vec<VersionLiteral> = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let tz = rng.gen_bool(0.4);
                    random_version(rng, tz)
                })
                .collect();
            values.push(random_version(rng, true));
            matrix.axes.insert(axis.to_string(), values);
        }
        if rng.gen_bool(0.4) {
            matrix.include.push(IndexMap::from([(axes_pool[0].to_string(), random_version(rng, true))]));
        }
        let mut job = Job::new(["ubuntu-latest", "macos-latest", "windows-latest"][rng.gen_range(0..3)]);
        job.strategy_matrix = Some(matrix);
        job.steps.push(Step::uses(ActionRef::new("actions/checkout", "v4")));
        job.steps.push(Step::uses(ActionRef::new("actions/setup-python", "v5")).with_arg("python-version", "${{ matrix.python-version }}"));
        job.steps.push(Step::run(vec![normalize_command(&format!("make test-{j}")).unwrap()]));
        jobs.insert(format!("job{j}"), job);
    }
    Workflow {
        name: Some("CI".into()),
        triggers: IndexMap::from([("push".to_string(), None), ("pull_request".to_string(), None)]),
        jobs,
    }
}

fn raw_texts(wf: &Workflow) -> Vec<String> {
    wf.jobs
        .values()
        .filter_map(|j| j.strategy_matrix.as_ref())
        .flat_map(|m| {
            m.axes
                .values()
                .flatten()
                .chain(m.include.iter().flat_map(|row| row.values()))
                .map(|v| v.raw_text.clone())
                .collect::<Vec<_>>()
        })
        .collect()
}

// 7. Render -> parse keeps every version literal intact.
fn render_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut literals = 0;
    for i in 0..100 {
        let wf = random_workflow(&mut rng);
        let text = render_workflow(&wf).map_err(|e| format!("workflow {i}: {e}"))?;
        let back = parse_workflow(&text).map_err(|e| format!("workflow {i}: {e}\n{text}"))?;
        let (want, got) = (raw_texts(&wf), raw_texts(&back));
        ensure(want == got, || format!("workflow {i}: {want:?} became {got:?}\n{text}"))?;
        let findings = check_syntax(&text);
        ensure(findings.is_empty(), || format!("workflow {i}: {findings:?}"))?;
        literals += want.len();
    }
    Ok(format!("100 workflows, {literals} version literals preserved, no syntax findings"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("golden transpilation", golden_transpile, Duration::from_secs(1)),
        ("taxonomy corpus", taxonomy_corpus, Duration::from_secs(2)),
        ("metric arithmetic", metric_arithmetic, Duration::from_secs(5)),
        ("refinement-loop contract", refinement_contract, Duration::from_secs(5)),
        ("strategy ordering", strategy_ordering, Duration::from_secs(10)),
        ("mining and effort", mining_and_effort, Duration::from_secs(1)),
        ("render round trip", render_round_trip, Duration::from_secs(3)),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let verdict = match (&result, elapsed <= *limit) {
            (Ok(detail), true) => format!("PASS  {detail}"),
            (Ok(_), false) => format!("FAIL  took longer than {limit:?}"),
            (Err(e), _) => format!("FAIL  {e}"),
        };
        if !verdict.starts_with("PASS") {
            failed += 1;
        }
        println!("criterion {}: {name} [{:.3}s, limit {}s] {verdict}", i + 1, elapsed.as_secs_f64(), limit.as_secs());
    }
    // Nothing above opens a socket: the providers are in-process mocks and
    // all inputs are fixture files.
    let total = started.elapsed();
    let offline_ok = failed == 0 && total <= Duration::from_secs(60);
    println!(
        "criterion 8: end-to-end offline [{:.3}s, limit 60s] {}",
        total.as_secs_f64(),
        if offline_ok { "PASS  all checks ran against fixtures and mock providers" } else { "FAIL" }
    );
    if failed == 0 && offline_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
