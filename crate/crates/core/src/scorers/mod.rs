//! Pairwise mention-coreference scorers.
//!
//! Every scorer is symmetric and deterministic for a fixed configuration:
//!
//! - [`LemmaScorer`]: λ-weighted Jaccard overlap of trigger lemmas and
//!   sentence lemmas.
//! - [`MatrixScorer`]: lookups into an externally computed [`ScoreMatrix`]
//!   (cross-encoder or BERTScore outputs).
//! - [`CombinedScorer`]: λ-weighted blend of a trigger-level and a
//!   context-level matrix, using the same combiner as the lemma scorer.
//! - [`RandomScorer`]: hash-derived uniform scores, the no-ranking baseline.

mod matrix;
mod spec;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::Mention;
use crate::real::Real;
use crate::seeds;

pub use matrix::{MatrixError, ScoreMatrix};
pub use spec::{ScorerSpec, SpecError};

pub const DEFAULT_LAMBDA: f64 = 0.7;

pub trait PairwiseScorer<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError>;
}

impl<T: Real, S: PairwiseScorer<T> + ?Sized> PairwiseScorer<T> for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        (**self).score(target, candidate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    MissingPair { a: String, b: String },
    NonFinite { what: &'static str },
    InvalidLambda(f64),
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::MissingPair { a, b } => {
                write!(f, "no score for pair ({a}, {b}) and no default score configured")
            }
            ScoreError::NonFinite { what } => write!(f, "non-finite {what}"),
            ScoreError::InvalidLambda(l) => write!(f, "lambda must lie in [0, 1], got {l}"),
        }
    }
}

impl std::error::Error for ScoreError {}

/// Trigger-versus-context weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LambdaConfig<T: Real> {
    lambda: T,
}

impl<T: Real> LambdaConfig<T> {
    pub fn new(lambda: T) -> Result<Self, ScoreError> {
        if !(lambda >= T::zero() && lambda <= T::one()) {
            return Err(ScoreError::InvalidLambda(lambda.as_f64()));
        }
        Ok(LambdaConfig { lambda })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
}

impl<T: Real> Default for LambdaConfig<T> {
    fn default() -> Self {
        LambdaConfig {
            lambda: T::of(DEFAULT_LAMBDA),
        }
    }
}

/// |a ∩ b| / |a ∪ b|. Two empty sets score 1, one empty set scores 0.
pub fn jaccard<T: Real, S: Eq + Hash>(a: &HashSet<S>, b: &HashSet<S>) -> T {
    if a.is_empty() && b.is_empty() {
        return T::one();
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    T::of_usize(inter) / T::of_usize(union)
}

/// Jaccard over sorted, deduplicated slices.
pub fn jaccard_sorted<T: Real, S: Ord>(a: &[S], b: &[S]) -> T {
    if a.is_empty() && b.is_empty() {
        return T::one();
    }
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    T::of_usize(inter) / T::of_usize(a.len() + b.len() - inter)
}

/// λ·trigger + (1 − λ)·context, evaluated as `context + λ·(trigger − context)`
/// and clamped to the interval spanned by the two inputs.
pub fn combined_score<T: Real>(
    trigger_score: T,
    context_score: T,
    cfg: LambdaConfig<T>,
) -> Result<T, ScoreError> {
    if !trigger_score.is_finite() {
        return Err(ScoreError::NonFinite {
            what: "trigger score",
        });
    }
    if !context_score.is_finite() {
        return Err(ScoreError::NonFinite {
            what: "context score",
        });
    }
    let raw = context_score + cfg.lambda * (trigger_score - context_score);
    let lo = trigger_score.min(context_score);
    let hi = trigger_score.max(context_score);
    Ok(raw.max(lo).min(hi))
}

fn sorted_set(lemmas: &[String]) -> Vec<&str> {
    let mut set: Vec<&str> = lemmas.iter().map(String::as_str).collect();
    set.sort_unstable();
    set.dedup();
    set
}

/// Lemma similarity of two mentions over deduplicated lemma sets.
pub fn lemma_score<T: Real>(target: &Mention, candidate: &Mention, cfg: LambdaConfig<T>) -> T {
    let trigger = jaccard_sorted::<T, _>(
        &sorted_set(&target.trigger_lemmas),
        &sorted_set(&candidate.trigger_lemmas),
    );
    let context = jaccard_sorted::<T, _>(
        &sorted_set(&target.sentence_lemmas),
        &sorted_set(&candidate.sentence_lemmas),
    );
    combined_score(trigger, context, cfg).expect("jaccard values are finite")
}

/// `trigger [SEP] sentence tokens`, the text fed to sentence-level
/// embedding scorers.
pub fn build_bert_sentence(mention: &Mention) -> String {
    let mut out = String::with_capacity(
        mention.trigger_text.len() + 7 + mention.sentence_tokens.iter().map(|t| t.len() + 1).sum::<usize>(),
    );
    out.push_str(&mention.trigger_text);
    out.push_str(" [SEP]");
    for token in &mention.sentence_tokens {
        out.push(' ');
        out.push_str(token);
    }
    out
}

/// Uniform value in `[0, 1)` derived from the seed and the unordered id pair.
pub fn random_score<T: Real>(seed: u64, a: &Mention, b: &Mention) -> T {
    random_pair_score(seed, &a.mention_id, &b.mention_id)
}

pub fn random_pair_score<T: Real>(seed: u64, a: &str, b: &str) -> T {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let h = seeds::mix_index(
        seeds::mix_index(seed, seeds::fnv1a(lo.as_bytes())),
        seeds::fnv1a(hi.as_bytes()),
    );
    let value = T::of(seeds::unit_f64(h));
    // f32 rounding can reach 1.0.
    if value >= T::one() {
        T::one() - T::epsilon()
    } else {
        value
    }
}

#[derive(Debug, Clone, Default)]
struct InternedLemmas {
    trigger: Vec<u32>,
    sentence: Vec<u32>,
}

/// Lemma-overlap scorer. [`LemmaScorer::indexed`] interns the lemma sets of
/// a corpus up front; mentions outside the index are scored from their
/// strings with identical results.
#[derive(Debug, Clone)]
pub struct LemmaScorer<T: Real> {
    cfg: LambdaConfig<T>,
    index: Arc<HashMap<String, InternedLemmas>>,
}

impl<T: Real> LemmaScorer<T> {
    pub fn new(cfg: LambdaConfig<T>) -> Self {
        LemmaScorer {
            cfg,
            index: Arc::default(),
        }
    }

    pub fn indexed<'a>(cfg: LambdaConfig<T>, mentions: impl IntoIterator<Item = &'a Mention>) -> Self {
        let mut vocab: HashMap<&str, u32> = HashMap::new();
        let mut intern = |lemmas: &'a [String]| {
            let mut ids: Vec<u32> = lemmas
                .iter()
                .map(|l| {
                    let next = vocab.len() as u32;
                    *vocab.entry(l.as_str()).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        };
        let mut index = HashMap::new();
        for m in mentions {
            let entry = InternedLemmas {
                trigger: intern(&m.trigger_lemmas),
                sentence: intern(&m.sentence_lemmas),
            };
            index.insert(m.mention_id.clone(), entry);
        }
        LemmaScorer {
            cfg,
            index: Arc::new(index),
        }
    }

    pub fn config(&self) -> LambdaConfig<T> {
        self.cfg
    }
}

impl<T: Real> PairwiseScorer<T> for LemmaScorer<T> {
    fn name(&self) -> &str {
        "lemma"
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        match (
            self.index.get(&target.mention_id),
            self.index.get(&candidate.mention_id),
        ) {
            (Some(a), Some(b)) => combined_score(
                jaccard_sorted(&a.trigger, &b.trigger),
                jaccard_sorted(&a.sentence, &b.sentence),
                self.cfg,
            ),
            _ => Ok(lemma_score(target, candidate, self.cfg)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixScorer<T: Real> {
    matrix: Arc<ScoreMatrix<T>>,
}

impl<T: Real> MatrixScorer<T> {
    pub fn new(matrix: Arc<ScoreMatrix<T>>) -> Self {
        MatrixScorer { matrix }
    }
}

impl<T: Real> PairwiseScorer<T> for MatrixScorer<T> {
    fn name(&self) -> &str {
        "matrix"
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        self.matrix.matrix_score(target, candidate)
    }
}

/// λ-weighted blend of trigger-level and context-level matrix scores.
#[derive(Debug, Clone)]
pub struct CombinedScorer<T: Real> {
    trigger: Arc<ScoreMatrix<T>>,
    context: Arc<ScoreMatrix<T>>,
    cfg: LambdaConfig<T>,
}

impl<T: Real> CombinedScorer<T> {
    pub fn new(trigger: Arc<ScoreMatrix<T>>, context: Arc<ScoreMatrix<T>>, cfg: LambdaConfig<T>) -> Self {
        CombinedScorer {
            trigger,
            context,
            cfg,
        }
    }
}

impl<T: Real> PairwiseScorer<T> for CombinedScorer<T> {
    fn name(&self) -> &str {
        "combined"
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        combined_score(
            self.trigger.matrix_score(target, candidate)?,
            self.context.matrix_score(target, candidate)?,
            self.cfg,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomScorer {
    pub seed: u64,
}

impl<T: Real> PairwiseScorer<T> for RandomScorer {
    fn name(&self) -> &str {
        "random"
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        Ok(random_score(self.seed, target, candidate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lemma,
    Matrix,
    Combined,
    Random,
}

impl ScorerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScorerKind::Lemma => "lemma",
            ScorerKind::Matrix => "matrix",
            ScorerKind::Combined => "combined",
            ScorerKind::Random => "random",
        }
    }

    /// Whether the scorer reads λ.
    pub fn uses_lambda(&self) -> bool {
        matches!(self, ScorerKind::Lemma | ScorerKind::Combined)
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma" => Ok(ScorerKind::Lemma),
            "matrix" => Ok(ScorerKind::Matrix),
            "combined" => Ok(ScorerKind::Combined),
            "random" => Ok(ScorerKind::Random),
            other => Err(format!(
                "unknown scorer `{other}` (expected lemma, matrix, combined or random)"
            )),
        }
    }
}

/// Closed set of scorers, so simulations can be re-seeded per replicate.
#[derive(Debug, Clone)]
pub enum Scorer<T: Real> {
    Lemma(LemmaScorer<T>),
    Matrix(MatrixScorer<T>),
    Combined(CombinedScorer<T>),
    Random(RandomScorer),
}

impl<T: Real> Scorer<T> {
    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Lemma(_) => ScorerKind::Lemma,
            Scorer::Matrix(_) => ScorerKind::Matrix,
            Scorer::Combined(_) => ScorerKind::Combined,
            Scorer::Random(_) => ScorerKind::Random,
        }
    }

    pub fn lambda(&self) -> Option<T> {
        match self {
            Scorer::Lemma(s) => Some(s.cfg.lambda),
            Scorer::Combined(s) => Some(s.cfg.lambda),
            _ => None,
        }
    }

    /// Copy of this scorer whose random stream starts from `seed`.
    /// Deterministic scorers are returned unchanged.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            Scorer::Random(_) => Scorer::Random(RandomScorer { seed }),
            other => other.clone(),
        }
    }

    /// Same scorer with a different λ; scorers without λ are unchanged.
    pub fn with_lambda(&self, cfg: LambdaConfig<T>) -> Self {
        match self {
            Scorer::Lemma(s) => Scorer::Lemma(LemmaScorer {
                cfg,
                index: Arc::clone(&s.index),
            }),
            Scorer::Combined(s) => Scorer::Combined(CombinedScorer { cfg, ..s.clone() }),
            other => other.clone(),
        }
    }
}

impl<T: Real> PairwiseScorer<T> for Scorer<T> {
    fn name(&self) -> &str {
        self.kind().as_str()
    }

    fn score(&self, target: &Mention, candidate: &Mention) -> Result<T, ScoreError> {
        match self {
            Scorer::Lemma(s) => s.score(target, candidate),
            Scorer::Matrix(s) => s.score(target, candidate),
            Scorer::Combined(s) => s.score(target, candidate),
            Scorer::Random(s) => s.score(target, candidate),
        }
    }
}
