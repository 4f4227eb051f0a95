//! The rank → prune → review → apply loop shared by the simulator and the
//! annotation service.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cluster_store::{Cluster, ClusterStore, StoreError};
use crate::corpus::{Mention, TopicLevel};
use crate::real::Real;
use crate::scorers::{PairwiseScorer, ScoreError};
use crate::seeds;

pub type MentionIndex<'a> = HashMap<&'a str, &'a Mention>;

pub fn index_mentions<'a>(mentions: impl IntoIterator<Item = &'a Mention>) -> MentionIndex<'a> {
    mentions
        .into_iter()
        .map(|m| (m.mention_id.as_str(), m))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkflowError {
    Score {
        target: String,
        candidate: String,
        source: ScoreError,
    },
    Store(StoreError),
    UnknownMention(String),
    NotPresented(String),
    ReviewedCount {
        expected: usize,
        found: usize,
    },
    TargetMismatch {
        expected: String,
        found: String,
    },
    InvalidK(f64),
    Replay(String),
}

impl fmt::Display for WorkflowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkflowError::Score {
                target,
                candidate,
                source,
            } => write!(f, "scoring ({target}, {candidate}) failed: {source}"),
            WorkflowError::Store(e) => write!(f, "{e}"),
            WorkflowError::UnknownMention(id) => write!(f, "unknown mention `{id}`"),
            WorkflowError::NotPresented(id) => write!(f, "cluster `{id}` was not presented"),
            WorkflowError::ReviewedCount { expected, found } => {
                write!(f, "reviewed_count must be {expected}, got {found}")
            }
            WorkflowError::TargetMismatch { expected, found } => {
                write!(f, "decision is for `{found}` but the current target is `{expected}`")
            }
            WorkflowError::InvalidK(k) => write!(f, "k must be at least 1, got {k}"),
            WorkflowError::Replay(msg) => write!(f, "replay diverged: {msg}"),
        }
    }
}

impl std::error::Error for WorkflowError {}

impl From<StoreError> for WorkflowError {
    fn from(value: StoreError) -> Self {
        WorkflowError::Store(value)
    }
}

/// A candidate cluster with its mean pairwise score against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RankedCandidate<T: Real> {
    pub cluster_id: String,
    pub score: T,
    /// 1-based.
    pub rank: usize,
}

/// Scores each cluster by the mean of `scorer(target, m)` over its mentions
/// and sorts by score descending, then creation order, then id.
pub fn rank_candidates<T: Real, S: PairwiseScorer<T> + ?Sized>(
    target: &Mention,
    clusters: &[&Cluster],
    mentions: &MentionIndex<'_>,
    scorer: &S,
) -> Result<Vec<RankedCandidate<T>>, WorkflowError> {
    let mut scored: Vec<(T, &Cluster)> = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mut sum = T::zero();
        for id in &cluster.mention_ids {
            let other = mentions
                .get(id.as_str())
                .ok_or_else(|| WorkflowError::UnknownMention(id.clone()))?;
            let s = scorer
                .score(target, other)
                .map_err(|source| WorkflowError::Score {
                    target: target.mention_id.clone(),
                    candidate: id.clone(),
                    source,
                })?;
            sum = sum + s;
        }
        let mean = sum / T::of_usize(cluster.mention_ids.len());
        if !mean.is_finite() {
            return Err(WorkflowError::Score {
                target: target.mention_id.clone(),
                candidate: cluster.cluster_id.clone(),
                source: ScoreError::NonFinite { what: "cluster score" },
            });
        }
        scored.push((mean, cluster));
    }
    scored.sort_by(|(sa, ca), (sb, cb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(ca.created_seq.cmp(&cb.created_seq))
            .then_with(|| ca.cluster_id.cmp(&cb.cluster_id))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, c))| RankedCandidate {
            cluster_id: c.cluster_id.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}

/// Top-k pruning with fractional k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PruneConfig<T: Real> {
    pub k: T,
    pub seed: u64,
}

impl<T: Real> PruneConfig<T> {
    pub fn new(k: T, seed: u64) -> Result<Self, WorkflowError> {
        if !(k >= T::one()) {
            return Err(WorkflowError::InvalidK(k.as_f64()));
        }
        Ok(PruneConfig { k, seed })
    }

    /// Never prunes.
    pub fn unlimited(seed: u64) -> Self {
        PruneConfig {
            k: T::infinity(),
            seed,
        }
    }

    /// Config whose Bernoulli stream is specific to one topic.
    pub fn for_topic(&self, topic_id: &str) -> Self {
        PruneConfig {
            k: self.k,
            seed: seeds::derive_seed(self.seed, topic_id),
        }
    }

    /// ⌊k⌋ plus one with probability frac(k), capped at `available`.
    pub fn presented_count(&self, available: usize, draw_index: u64) -> usize {
        if !self.k.is_finite() {
            return available;
        }
        let base = self.k.floor().to_usize().unwrap_or(usize::MAX);
        let frac = self.k.fract().as_f64();
        let extra = frac > 0.0 && {
            let u = seeds::unit_f64(seeds::mix_index(self.seed, draw_index));
            u < frac
        };
        base.saturating_add(usize::from(extra)).min(available)
    }
}

/// Keeps a prefix of `ranked`; see [`PruneConfig::presented_count`].
pub fn prune_top_k<T: Real>(
    ranked: &[RankedCandidate<T>],
    cfg: &PruneConfig<T>,
    draw_index: u64,
) -> Vec<RankedCandidate<T>> {
    ranked[..cfg.presented_count(ranked.len(), draw_index)].to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionKind {
    Accept { cluster_id: String },
    NewCluster,
    /// Simulator-only: after a miss, the target is placed in its gold
    /// cluster without counting as a hit.
    Repair { cluster_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub target_id: String,
    #[serde(flatten)]
    pub kind: DecisionKind,
    pub reviewed_count: usize,
}

impl Decision {
    /// Rank of the accepted candidate, if any.
    pub fn hit_rank<T: Real>(&self, presented: &[RankedCandidate<T>]) -> Option<usize> {
        match &self.kind {
            DecisionKind::Accept { cluster_id } => presented
                .iter()
                .find(|c| &c.cluster_id == cluster_id)
                .map(|c| c.rank),
            _ => None,
        }
    }
}

/// What a reviewer settled on after looking at the presented list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    Accept(String),
    NewCluster,
}

/// A human or an oracle deciding coreference for one target.
pub trait DecisionSource<T: Real> {
    fn choose(&mut self, target: &Mention, presented: &[RankedCandidate<T>]) -> Choice;
}

impl<T: Real, F> DecisionSource<T> for F
where
    F: FnMut(&Mention, &[RankedCandidate<T>]) -> Choice,
{
    fn choose(&mut self, target: &Mention, presented: &[RankedCandidate<T>]) -> Choice {
        self(target, presented)
    }
}

/// Accepts the highest-ranked presented cluster sharing the target's gold
/// id, which is what a reviewer inspecting candidates in order would do.
pub struct GoldOracle<'a> {
    store: &'a ClusterStore,
    mentions: &'a MentionIndex<'a>,
}

impl<'a> GoldOracle<'a> {
    pub fn new(store: &'a ClusterStore, mentions: &'a MentionIndex<'a>) -> Self {
        GoldOracle { store, mentions }
    }

    /// Gold id of a cluster, read from its first mention.
    pub fn cluster_gold(&self, cluster_id: &str) -> Option<&'a str> {
        let cluster = self.store.cluster(cluster_id)?;
        let first = self.mentions.get(cluster.mention_ids[0].as_str())?;
        first.gold()
    }
}

impl<T: Real> DecisionSource<T> for GoldOracle<'_> {
    fn choose(&mut self, target: &Mention, presented: &[RankedCandidate<T>]) -> Choice {
        let Some(gold) = target.gold() else {
            return Choice::NewCluster;
        };
        presented
            .iter()
            .find(|c| self.cluster_gold(&c.cluster_id) == Some(gold))
            .map_or(Choice::NewCluster, |c| Choice::Accept(c.cluster_id.clone()))
    }
}

/// Runs one review: candidates are inspected in rank order, and every
/// inspected candidate up to and including an accepted one counts as
/// reviewed.
pub fn review<T: Real, D: DecisionSource<T> + ?Sized>(
    target: &Mention,
    presented: &[RankedCandidate<T>],
    source: &mut D,
) -> Result<Decision, WorkflowError> {
    let decision = match source.choose(target, presented) {
        Choice::Accept(cluster_id) => {
            let rank = presented
                .iter()
                .find(|c| c.cluster_id == cluster_id)
                .map(|c| c.rank)
                .ok_or_else(|| WorkflowError::NotPresented(cluster_id.clone()))?;
            Decision {
                target_id: target.mention_id.clone(),
                kind: DecisionKind::Accept { cluster_id },
                reviewed_count: rank,
            }
        }
        Choice::NewCluster => Decision {
            target_id: target.mention_id.clone(),
            kind: DecisionKind::NewCluster,
            reviewed_count: presented.len(),
        },
    };
    Ok(decision)
}

/// Checks an externally submitted decision against the presented list:
/// accepting rank `r` requires `reviewed_count == r`, a new cluster requires
/// `reviewed_count == presented.len()`.
pub fn validate_decision<T: Real>(
    decision: &Decision,
    target_id: &str,
    presented: &[RankedCandidate<T>],
) -> Result<(), WorkflowError> {
    if decision.target_id != target_id {
        return Err(WorkflowError::TargetMismatch {
            expected: target_id.to_string(),
            found: decision.target_id.clone(),
        });
    }
    let expected = match &decision.kind {
        DecisionKind::Accept { cluster_id } => decision
            .hit_rank(presented)
            .ok_or_else(|| WorkflowError::NotPresented(cluster_id.clone()))?,
        DecisionKind::NewCluster => presented.len(),
        DecisionKind::Repair { cluster_id } => {
            return Err(WorkflowError::NotPresented(cluster_id.clone()))
        }
    };
    if decision.reviewed_count != expected {
        return Err(WorkflowError::ReviewedCount {
            expected,
            found: decision.reviewed_count,
        });
    }
    Ok(())
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// 0-based position in the log.
    pub seq: u64,
    pub topic_id: String,
    #[serde(flatten)]
    pub decision: Decision,
    /// Cluster the target ended up in.
    pub assigned_cluster_id: String,
    pub presented: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

/// Applies a decision to the store and appends it to `log`. Returns the
/// cluster the target now belongs to.
pub fn apply_decision<T: Real>(
    store: &mut ClusterStore,
    target: &Mention,
    decision: &Decision,
    presented: &[RankedCandidate<T>],
    log: &mut Vec<DecisionRecord>,
) -> Result<String, WorkflowError> {
    let assigned = match &decision.kind {
        DecisionKind::Accept { cluster_id } | DecisionKind::Repair { cluster_id } => {
            store.merge(target, cluster_id)?;
            cluster_id.clone()
        }
        DecisionKind::NewCluster => store.create_singleton(target)?,
    };
    log.push(DecisionRecord {
        seq: log.len() as u64,
        topic_id: store.topic_id().to_string(),
        decision: decision.clone(),
        assigned_cluster_id: assigned.clone(),
        presented: presented.iter().map(|c| c.cluster_id.clone()).collect(),
        timestamp_ms: None,
    });
    Ok(assigned)
}

/// Rebuilds per-topic stores from a decision log, checking that every
/// assigned cluster id comes out the same.
pub fn replay(
    mentions: &MentionIndex<'_>,
    level: TopicLevel,
    records: &[DecisionRecord],
) -> Result<BTreeMap<String, ClusterStore>, WorkflowError> {
    let mut stores: BTreeMap<String, ClusterStore> = BTreeMap::new();
    for record in records {
        let target = mentions
            .get(record.decision.target_id.as_str())
            .ok_or_else(|| WorkflowError::UnknownMention(record.decision.target_id.clone()))?;
        let store = stores
            .entry(record.topic_id.clone())
            .or_insert_with(|| ClusterStore::new(record.topic_id.clone(), level));
        let assigned = match &record.decision.kind {
            DecisionKind::Accept { cluster_id } | DecisionKind::Repair { cluster_id } => {
                store.merge(target, cluster_id)?;
                cluster_id.clone()
            }
            DecisionKind::NewCluster => store.create_singleton(target)?,
        };
        if assigned != record.assigned_cluster_id {
            return Err(WorkflowError::Replay(format!(
                "record {} assigned `{}`, replay produced `{assigned}`",
                record.seq, record.assigned_cluster_id
            )));
        }
    }
    Ok(stores)
}
