//! Gold-driven annotation simulation.
//!
//! The human is replaced by [`GoldOracle`]: for each target, it accepts the
//! highest-ranked presented cluster sharing the target's gold id, otherwise
//! the target starts a new cluster. When the coreferent cluster was pruned
//! away, the new singleton fragments the gold cluster; later mentions may
//! link to any fragment. With [`SimOptions::oracle_repair`] the target is
//! instead placed in its oldest gold-matching cluster (still counted as a
//! miss).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster_store::ClusterStore;
use crate::corpus::{Mention, TopicLevel};
use crate::metrics;
use crate::real::Real;
use crate::scorers::{LambdaConfig, PairwiseScorer, ScoreError, Scorer};
use crate::seeds::{self, PRUNE_STREAM, SCORER_STREAM};
use crate::workflow::{
    apply_decision, index_mentions, prune_top_k, rank_candidates, review, Decision, DecisionKind,
    DecisionRecord, GoldOracle, PruneConfig, WorkflowError,
};

pub const DEFAULT_REPLICATES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    MissingGold(String),
    Workflow(WorkflowError),
    EmptyGrid(&'static str),
    InvalidGrid(String),
    NoReplicates,
    ScorerWithoutLambda(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::MissingGold(id) => {
                write!(f, "mention `{id}` has no gold_cluster_id; simulation needs gold labels")
            }
            SimError::Workflow(e) => write!(f, "{e}"),
            SimError::EmptyGrid(which) => write!(f, "{which} grid is empty"),
            SimError::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            SimError::NoReplicates => write!(f, "replicates must be at least 1"),
            SimError::ScorerWithoutLambda(name) => {
                write!(f, "scorer `{name}` has no λ to tune (use lemma or combined)")
            }
        }
    }
}

impl std::error::Error for SimError {}

impl From<WorkflowError> for SimError {
    fn from(value: WorkflowError) -> Self {
        SimError::Workflow(value)
    }
}

impl From<ScoreError> for SimError {
    fn from(value: ScoreError) -> Self {
        SimError::InvalidGrid(value.to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub oracle_repair: bool,
    pub topic_level: TopicLevel,
}

/// Per-target trace entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target_id: String,
    pub presented_count: usize,
    /// 1-based rank of the accepted candidate.
    pub hit_rank: Option<usize>,
    /// Whether any cluster in the store (before pruning) shared the
    /// target's gold id.
    pub had_coreferent_in_store: bool,
    pub comparisons: usize,
}

/// Result of one topic, with the final store and decision log.
#[derive(Debug, Clone)]
pub struct TopicTrace {
    pub records: Vec<TargetRecord>,
    pub store: ClusterStore,
    pub decisions: Vec<DecisionRecord>,
}

pub fn simulate_topic<T: Real, S: PairwiseScorer<T> + ?Sized>(
    mentions: &[Mention],
    scorer: &S,
    prune: &PruneConfig<T>,
    opts: &SimOptions,
) -> Result<Vec<TargetRecord>, SimError> {
    simulate_topic_traced(mentions, scorer, prune, opts).map(|t| t.records)
}

/// Simulates one topic in the given traversal order. The Bernoulli draw for
/// fractional k is keyed by the target's position in `mentions`.
pub fn simulate_topic_traced<T: Real, S: PairwiseScorer<T> + ?Sized>(
    mentions: &[Mention],
    scorer: &S,
    prune: &PruneConfig<T>,
    opts: &SimOptions,
) -> Result<TopicTrace, SimError> {
    if let Some(m) = mentions.iter().find(|m| m.gold().is_none()) {
        return Err(SimError::MissingGold(m.mention_id.clone()));
    }
    let topic = mentions
        .first()
        .map_or("", |m| m.topic_key(opts.topic_level))
        .to_string();
    let index = index_mentions(mentions);
    let mut store = ClusterStore::new(topic, opts.topic_level);
    let mut decisions = Vec::with_capacity(mentions.len());
    let mut records = Vec::with_capacity(mentions.len());

    for (position, target) in mentions.iter().enumerate() {
        let gold = target.gold();
        let (presented, decision, had, repair_to) = {
            let candidates = store.candidates_for(target).map_err(WorkflowError::from)?;
            let oracle = GoldOracle::new(&store, &index);
            let first_match = candidates
                .iter()
                .find(|c| oracle.cluster_gold(&c.cluster_id) == gold)
                .map(|c| c.cluster_id.clone());
            let ranked = rank_candidates(target, &candidates, &index, scorer)?;
            let presented = prune_top_k(&ranked, prune, position as u64);
            let mut oracle = oracle;
            let decision = review(target, &presented, &mut oracle)?;
            (presented, decision, first_match.is_some(), first_match)
        };

        let hit_rank = decision.hit_rank(&presented);
        records.push(TargetRecord {
            target_id: target.mention_id.clone(),
            presented_count: presented.len(),
            hit_rank,
            had_coreferent_in_store: had,
            comparisons: decision.reviewed_count,
        });

        let decision = match (hit_rank, repair_to) {
            (None, Some(cluster_id)) if opts.oracle_repair => Decision {
                kind: DecisionKind::Repair { cluster_id },
                ..decision
            },
            _ => decision,
        };
        apply_decision(&mut store, target, &decision, &presented, &mut decisions)?;
    }

    Ok(TopicTrace {
        records,
        store,
        decisions,
    })
}

/// Configuration echo carried by every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunConfig<T: Real> {
    pub scorer: String,
    /// `null` in JSON when unlimited.
    pub k: T,
    pub lambda: Option<T>,
    pub seed: u64,
    pub oracle_repair: bool,
    pub topic_level: TopicLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunResult<T: Real> {
    pub config: RunConfig<T>,
    pub recall: T,
    pub hits: usize,
    pub eligible: usize,
    pub total_comparisons: u64,
    pub records: Vec<TargetRecord>,
}

/// Runs every topic independently (in parallel) and concatenates the
/// records in topic order.
pub fn simulate_corpus<T: Real, S: PairwiseScorer<T> + ?Sized>(
    partition: &BTreeMap<String, Vec<Mention>>,
    scorer: &S,
    prune: &PruneConfig<T>,
    opts: &SimOptions,
) -> Result<RunResult<T>, SimError> {
    let traces = simulate_corpus_traced(partition, scorer, prune, opts)?;
    let records: Vec<TargetRecord> = traces.into_iter().flat_map(|(_, t)| t.records).collect();
    Ok(RunResult {
        config: RunConfig {
            scorer: scorer.name().to_string(),
            k: prune.k,
            lambda: None,
            seed: prune.seed,
            oracle_repair: opts.oracle_repair,
            topic_level: opts.topic_level,
        },
        recall: metrics::recall(&records),
        hits: metrics::hits(&records),
        eligible: metrics::eligible(&records),
        total_comparisons: metrics::comparisons(&records),
        records,
    })
}

/// Per-topic traces in topic order. Each topic's Bernoulli stream is derived
/// from the prune seed and the topic id.
pub fn simulate_corpus_traced<T: Real, S: PairwiseScorer<T> + ?Sized>(
    partition: &BTreeMap<String, Vec<Mention>>,
    scorer: &S,
    prune: &PruneConfig<T>,
    opts: &SimOptions,
) -> Result<Vec<(String, TopicTrace)>, SimError> {
    let topics: Vec<(&String, &Vec<Mention>)> = partition.iter().collect();
    topics
        .par_iter()
        .map(|(topic, mentions)| {
            simulate_topic_traced(mentions, scorer, &prune.for_topic(topic), opts)
                .map(|t| ((*topic).clone(), t))
        })
        .collect()
}

/// Seeds used by a run derived from one user seed.
pub fn run_seeds(seed: u64) -> (u64, u64) {
    (
        seeds::derive_seed(seed, SCORER_STREAM),
        seeds::derive_seed(seed, PRUNE_STREAM),
    )
}

/// One full run from a single user-facing seed: the scorer's random stream
/// and the pruning stream are split from it.
pub fn run_seeded<T: Real>(
    partition: &BTreeMap<String, Vec<Mention>>,
    scorer: &Scorer<T>,
    k: T,
    seed: u64,
    opts: &SimOptions,
) -> Result<RunResult<T>, SimError> {
    let (scorer_seed, prune_seed) = run_seeds(seed);
    let scorer = scorer.reseeded(scorer_seed);
    let prune = PruneConfig::new(k, prune_seed)?;
    let mut result = simulate_corpus(partition, &scorer, &prune, opts)?;
    result.config.seed = seed;
    result.config.lambda = scorer.lambda();
    Ok(result)
}

/// One sample of the recall/comparisons tradeoff curve, averaged over
/// replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvePoint<T: Real> {
    pub k: T,
    pub recall: T,
    pub comparisons: T,
    pub replicates: usize,
}

/// `start, start + step, …, end` with the count rounded from the span, so
/// float accumulation never drops the last point.
pub fn linear_grid<T: Real>(start: f64, end: f64, step: f64) -> Result<Vec<T>, SimError> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(SimError::InvalidGrid("bounds and step must be finite".into()));
    }
    if end < start {
        return Err(SimError::InvalidGrid(format!("end {end} is below start {start}")));
    }
    if step <= 0.0 {
        return Err(SimError::InvalidGrid(format!("step must be positive, got {step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // Rounding to 12 decimals turns 0.30000000000000004 back into 0.3.
    Ok((0..count)
        .map(|i| T::of(((start + i as f64 * step) * 1e12).round() / 1e12))
        .collect())
}

pub fn k_grid<T: Real>(k_min: f64, k_max: f64, step: f64) -> Result<Vec<T>, SimError> {
    if k_min < 1.0 {
        return Err(SimError::InvalidGrid(format!("k must be at least 1, got {k_min}")));
    }
    linear_grid(k_min, k_max, step)
}

/// 2.0, 2.5, …, 20.0 (37 points).
pub fn default_k_grid<T: Real>() -> Vec<T> {
    k_grid(2.0, 20.0, 0.5).expect("static grid is valid")
}

/// For each k, runs `replicates` simulations with seeds
/// `base_seed..base_seed + replicates` and averages recall and comparisons.
pub fn sweep_k<T: Real>(
    partition: &BTreeMap<String, Vec<Mention>>,
    scorer: &Scorer<T>,
    k_grid: &[T],
    replicates: usize,
    base_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<CurvePoint<T>>, SimError> {
    if k_grid.is_empty() {
        return Err(SimError::EmptyGrid("k"));
    }
    if replicates == 0 {
        return Err(SimError::NoReplicates);
    }
    let cells: Vec<(usize, u64)> = (0..k_grid.len())
        .flat_map(|i| (0..replicates as u64).map(move |r| (i, base_seed.wrapping_add(r))))
        .collect();
    let runs: Vec<(T, u64)> = cells
        .par_iter()
        .map(|(i, seed)| {
            run_seeded(partition, scorer, k_grid[*i], *seed, opts)
                .map(|r| (r.recall, r.total_comparisons))
        })
        .collect::<Result<_, _>>()?;

    let n = T::of_usize(replicates);
    Ok(k_grid
        .iter()
        .zip(runs.chunks(replicates))
        .map(|(k, reps)| {
            let recall = reps.iter().fold(T::zero(), |acc, (r, _)| acc + *r) / n;
            let total: u64 = reps.iter().map(|(_, c)| *c).sum();
            CurvePoint {
                k: *k,
                recall,
                comparisons: T::of(total as f64) / n,
                replicates,
            }
        })
        .collect())
}

/// Trapezoidal area under recall against `ln(1 + comparisons)`, divided by
/// the curve's own x-span. A curve with no span scores its mean recall.
pub fn normalized_auc<T: Real>(points: &[CurvePoint<T>]) -> T {
    if points.is_empty() {
        return T::zero();
    }
    let mut xy: Vec<(T, T)> = points
        .iter()
        .map(|p| (p.comparisons.ln_1p(), p.recall))
        .collect();
    xy.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });
    let span = xy[xy.len() - 1].0 - xy[0].0;
    if span <= T::zero() {
        return xy.iter().fold(T::zero(), |acc, p| acc + p.1) / T::of_usize(xy.len());
    }
    let two = T::one() + T::one();
    let area = xy
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / two);
    area / span
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LambdaCurve<T: Real> {
    pub lambda: T,
    pub auc: T,
    pub points: Vec<CurvePoint<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LambdaReport<T: Real> {
    pub scorer: String,
    pub lambda_star: T,
    pub curves: Vec<LambdaCurve<T>>,
}

/// Sweeps k for every λ and picks the λ with the largest
/// [`normalized_auc`]; ties go to the smaller λ.
pub fn tune_lambda<T: Real>(
    partition: &BTreeMap<String, Vec<Mention>>,
    scorer: &Scorer<T>,
    lambda_grid: &[T],
    k_grid: &[T],
    replicates: usize,
    base_seed: u64,
    opts: &SimOptions,
) -> Result<LambdaReport<T>, SimError> {
    if !scorer.kind().uses_lambda() {
        return Err(SimError::ScorerWithoutLambda(scorer.name().to_string()));
    }
    if lambda_grid.is_empty() {
        return Err(SimError::EmptyGrid("lambda"));
    }
    if k_grid.is_empty() {
        return Err(SimError::EmptyGrid("k"));
    }
    let mut lambdas = lambda_grid.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    lambdas.dedup();

    let mut curves = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let tuned = scorer.with_lambda(LambdaConfig::new(lambda)?);
        let points = sweep_k(partition, &tuned, k_grid, replicates, base_seed, opts)?;
        curves.push(LambdaCurve {
            lambda,
            auc: normalized_auc(&points),
            points,
        });
    }
    let best = curves
        .iter()
        .fold(None::<&LambdaCurve<T>>, |best, c| match best {
            Some(b) if b.auc >= c.auc => Some(b),
            _ => Some(c),
        })
        .expect("grid is non-empty");
    Ok(LambdaReport {
        scorer: scorer.name().to_string(),
        lambda_star: best.lambda,
        curves,
    })
}
