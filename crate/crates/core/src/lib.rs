//! Event-coreference annotation engine.
//!
//! Each target mention is compared against the clusters already annotated in
//! its topic. Candidate clusters are ranked by the mean pairwise score between
//! the target and the cluster's mentions, pruned to the top `k` (fractional `k`
//! adds one more candidate with probability equal to its fractional part), and
//! reviewed one at a time until a coreferent cluster is accepted.
//!
//! The same rank → prune → decide loop drives both the gold-oracle simulator,
//! which measures the recall / annotation-effort tradeoff, and the live
//! annotation service in `evcoref-server`.
//!
//! Scoring and metric code is generic over the scalar type ([`Real`], with
//! implementations for `f32` and `f64`). The aliases at the crate root fix the
//! scalar to `f64`, which is what the CLI and service use.

pub mod cluster_store;
pub mod corpus;
pub mod metrics;
pub mod real;
pub mod scorers;
pub mod seeds;
pub mod simulator;
pub mod synthetic;
pub mod workflow;

pub use cluster_store::{Cluster, ClusterExport, ClusterStore, StoreError};
pub use corpus::{
    corpus_stats, parse_mentions, parse_mentions_report, partition_by_topic, write_mentions,
    CorpusError, CorpusStats, Mention, ParseReport, TopicLevel,
};
pub use real::Real;
pub use scorers::{PairwiseScorer, ScoreError, ScorerKind};
pub use simulator::{SimError, SimOptions, TargetRecord};
pub use workflow::{Choice, Decision, DecisionKind, DecisionRecord, DecisionSource, WorkflowError};

/// Scalar used by the CLI and the annotation service.
pub type Score = f64;

pub type LambdaConfigF64 = scorers::LambdaConfig<f64>;
pub type LambdaConfigF32 = scorers::LambdaConfig<f32>;
pub type ScoreMatrixF64 = scorers::ScoreMatrix<f64>;
pub type ScorerF64 = scorers::Scorer<f64>;
pub type ScorerF32 = scorers::Scorer<f32>;
pub type PruneConfigF64 = workflow::PruneConfig<f64>;
pub type RankedCandidateF64 = workflow::RankedCandidate<f64>;
pub type RunResultF64 = simulator::RunResult<f64>;
pub type CurvePointF64 = simulator::CurvePoint<f64>;
pub type LambdaReportF64 = simulator::LambdaReport<f64>;
