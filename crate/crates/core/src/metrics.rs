//! Build success rate, term-frequency cosine similarity and CrystalBLEU.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Precision used for an n-gram order with no surviving or matching n-grams.
pub const PRECISION_FLOOR: f64 = 1e-9;
pub const DEFAULT_N_MAX: usize = 4;
pub const DEFAULT_K: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("metric is undefined on empty input")]
    EmptyInput,
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOutcome {
    pub case_id: String,
    pub status: BuildStatus,
    pub messages: Vec<String>,
}

impl BuildOutcome {
    pub fn success(case_id: impl Into<String>) -> Self {
        Self {
            case_id: case_id.into(),
            status: BuildStatus::Success,
            messages: Vec::new(),
        }
    }

    /// A failed build always carries at least one message.
    pub fn failure(case_id: impl Into<String>, mut messages: Vec<String>) -> Self {
        if messages.is_empty() {
            messages.push("build failed".into());
        }
        Self {
            case_id: case_id.into(),
            status: BuildStatus::Failure,
            messages,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == BuildStatus::Success
    }
}

/// An exact success ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub successes: usize,
    pub total: usize,
}

impl Ratio {
    pub fn value(self) -> f64 {
        self.successes as f64 / self.total as f64
    }

    /// The ratio rounded half away from zero to three decimals.
    pub fn rounded(self) -> f64 {
        if self.total == 0 {
            return f64::NAN;
        }
        let thousandths = (self.successes * 1000 * 2 + self.total) / (self.total * 2);
        thousandths as f64 / 1000.0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ({}/{})", self.rounded(), self.successes, self.total)
    }
}

pub fn build_success_rate(outcomes: &[BuildOutcome]) -> Result<Ratio, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(Ratio {
        successes: outcomes.iter().filter(|o| o.is_success()).count(),
        total: outcomes.len(),
    })
}

/// Characters trimmed from token edges. A leading `-` is kept so that
/// options such as `-m` survive; a trailing one is list or key noise.
const LEADING: &[char] = &[':', ',', '"', '\'', '[', ']', '{', '}'];
const TRAILING: &[char] = &[':', ',', '"', '\'', '[', ']', '{', '}', '-'];

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            if raw.chars().all(|c| c.is_ascii_punctuation()) {
                return Some(raw.to_string());
            }
            let token = raw.trim_start_matches(LEADING).trim_end_matches(TRAILING);
            (!token.is_empty()).then(|| token.to_string())
        })
        .collect()
}

/// Term-frequency vector; zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVector {
    pub counts: BTreeMap<String, usize>,
}

impl TokenVector {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut counts = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.into()).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_tokens(tokenize(text))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn squared_norm(&self) -> u64 {
        self.counts.values().map(|&c| (c * c) as u64).sum()
    }

    fn dot(&self, other: &Self) -> u64 {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .filter_map(|(t, &c)| large.counts.get(t).map(|&d| (c * d) as u64))
            .sum()
    }
}

pub fn cosine_similarity(a: &TokenVector, b: &TokenVector) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::ZeroVector);
    }
    // One square root over exact integer products keeps CS(a, a) exactly 1.
    let cs = a.dot(b) as f64 / ((a.squared_norm() as f64) * (b.squared_norm() as f64)).sqrt();
    Ok(cs.clamp(0.0, 1.0))
}

/// Convenience: cosine similarity of two documents after tokenization.
pub fn text_similarity(a: &str, b: &str) -> Result<f64, MetricError> {
    cosine_similarity(&TokenVector::from_text(a), &TokenVector::from_text(b))
}

/// The most frequent n-grams of a corpus, excluded from CrystalBLEU.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedNgramSet {
    pub n_max: usize,
    pub k: usize,
    pub ngrams: BTreeSet<Vec<String>>,
}

impl SharedNgramSet {
    pub fn empty(n_max: usize) -> Self {
        Self {
            n_max,
            k: 0,
            ngrams: BTreeSet::new(),
        }
    }

    pub fn contains(&self, gram: &[String]) -> bool {
        self.ngrams.contains(gram)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn without_shared<'a>(counts: HashMap<&'a [String], usize>, shared: &SharedNgramSet) -> HashMap<&'a [String], usize> {
    counts.into_iter().filter(|(g, _)| !shared.contains(g)).collect()
}

/// For each order 1..=n_max, the k most frequent n-grams across the corpus;
/// ties go to the lexicographically smaller n-gram.
pub fn trivially_shared_ngrams(corpus: &[Vec<String>], n_max: usize, k: usize) -> SharedNgramSet {
    let mut ngrams = BTreeSet::new();
    for n in 1..=n_max {
        let mut totals: HashMap<&[String], usize> = HashMap::new();
        for doc in corpus {
            for (gram, c) in ngram_counts(doc, n) {
                *totals.entry(gram).or_insert(0) += c;
            }
        }
        let mut ranked: Vec<(&[String], usize)> = totals.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ngrams.extend(ranked.into_iter().take(k).map(|(g, _)| g.to_vec()));
    }
    SharedNgramSet { n_max, k, ngrams }
}

/// Stable digest of a corpus and the parameters, for caching shared sets.
pub fn corpus_digest(corpus: &[Vec<String>], n_max: usize, k: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("n_max={n_max};k={k};docs={}\n", corpus.len()));
    for doc in corpus {
        for token in doc {
            hasher.update((token.len() as u64).to_le_bytes());
            hasher.update(token.as_bytes());
        }
        hasher.update(b"\xff");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// BLEU over orders 1..=shared.n_max with uniform weights and the standard
/// brevity penalty, after removing shared n-grams from both sides.
pub fn crystal_bleu(candidate: &[String], reference: &[String], shared: &SharedNgramSet) -> f64 {
    if candidate.is_empty() || reference.is_empty() || shared.n_max == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=shared.n_max {
        let cand = without_shared(ngram_counts(candidate, n), shared);
        let refs = without_shared(ngram_counts(reference, n), shared);
        let total: usize = cand.values().sum();
        let precision = if total == 0 {
            PRECISION_FLOOR
        } else {
            let clipped: usize = cand
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
            (clipped as f64 / total as f64).max(PRECISION_FLOOR)
        };
        log_sum += precision.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * (log_sum / shared.n_max as f64).exp()
}

/// Median of finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}
