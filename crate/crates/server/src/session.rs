//! One annotation session: corpus, scorer, per-topic stores and the
//! decision log that persists them.
//!
//! On disk a session is a directory holding `manifest.json`,
//! `decisions.jsonl` and, for corpora posted inline, `corpus.jsonl`. Opening
//! a session replays the log through the same ranking and validation as live
//! decisions, so a diverging log is rejected rather than silently applied.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use evcoref_core::scorers::{Scorer, ScorerSpec};
use evcoref_core::simulator::run_seeds;
use evcoref_core::workflow::{
    apply_decision, index_mentions, prune_top_k, rank_candidates, validate_decision, GoldOracle,
    PruneConfig, RankedCandidate,
};
use evcoref_core::{
    metrics, parse_mentions, partition_by_topic, ClusterExport, ClusterStore, Decision,
    DecisionKind, DecisionRecord, Mention, TargetRecord, TopicLevel,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const INLINE_CORPUS_FILE: &str = "corpus.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub enum SessionError {
    NotFound(String),
    /// Decision for something other than the current target, or after the
    /// corpus is exhausted.
    Conflict(String),
    Invalid(String),
    Storage(String),
    Internal(String),
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionError::NotFound(id) => write!(f, "unknown session `{id}`"),
            SessionError::Conflict(msg)
            | SessionError::Invalid(msg)
            | SessionError::Storage(msg)
            | SessionError::Internal(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for SessionError {}

fn storage(path: &Path, e: impl fmt::Display) -> SessionError {
    SessionError::Storage(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub scorer: ScorerSpec,
    pub k: f64,
    pub seed: u64,
    #[serde(default)]
    pub topic_level: TopicLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub session_id: String,
    pub created_ms: u64,
    /// Absolute path, or `corpus.jsonl` inside the session directory when
    /// `inline_corpus` is set.
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub inline_corpus: bool,
    pub corpus_sha256: String,
    pub mentions: usize,
    pub config: SessionConfig,
}

/// Where a new session's corpus comes from.
pub enum CorpusInput {
    Path(PathBuf),
    Inline(Vec<Mention>),
}

#[derive(Debug, Clone, Serialize)]
pub struct MentionView {
    pub mention_id: String,
    pub doc_id: String,
    pub topic_id: String,
    pub sentence_tokens: Vec<String>,
    pub trigger_start: usize,
    /// Exclusive.
    pub trigger_end: usize,
    pub trigger_text: String,
}

impl From<&Mention> for MentionView {
    fn from(m: &Mention) -> Self {
        let span = m.trigger_span();
        MentionView {
            mention_id: m.mention_id.clone(),
            doc_id: m.doc_id.clone(),
            topic_id: m.topic_id.clone(),
            sentence_tokens: m.sentence_tokens.clone(),
            trigger_start: span.start,
            trigger_end: span.end,
            trigger_text: m.trigger_text.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateView {
    pub cluster_id: String,
    pub rank: usize,
    pub score: f64,
    pub mentions: Vec<MentionView>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
    pub comparisons_so_far: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NextView {
    pub session_id: String,
    pub target: MentionView,
    pub candidates: Vec<CandidateView>,
    pub progress: Progress,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionOutcome {
    pub assigned_cluster_id: String,
    pub finished: bool,
    pub progress: Progress,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionMetrics {
    pub session_id: String,
    pub comparisons: u64,
    pub done: usize,
    pub total: usize,
    /// Only reported when every mention carries a gold label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eligible: Option<usize>,
    pub records: Vec<TargetRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionExport {
    pub session_id: String,
    pub topics: Vec<ClusterExport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub manifest: Manifest,
    pub progress: Progress,
}

struct Pending {
    presented: Vec<RankedCandidate<f64>>,
    had_coreferent: bool,
}

pub struct Session {
    dir: PathBuf,
    manifest: Manifest,
    topics: Vec<(String, Vec<Mention>)>,
    scorer: Scorer<f64>,
    prune: PruneConfig<f64>,
    stores: BTreeMap<String, ClusterStore>,
    topic_idx: usize,
    position: usize,
    log: Vec<DecisionRecord>,
    records: Vec<TargetRecord>,
    pending: Option<Pending>,
    gold_complete: bool,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Session {
    /// Creates the session directory and an empty log.
    pub fn create(
        root: &Path,
        session_id: &str,
        corpus: CorpusInput,
        config: SessionConfig,
    ) -> Result<Session, SessionError> {
        config
            .scorer
            .check()
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        if !(config.k >= 1.0) {
            return Err(SessionError::Invalid(format!("k must be at least 1, got {}", config.k)));
        }
        let dir = root.join(session_id);
        let (bytes, corpus_path, inline) = match corpus {
            CorpusInput::Path(path) => {
                let bytes = fs::read(&path).map_err(|e| {
                    SessionError::Invalid(format!("cannot read corpus {}: {e}", path.display()))
                })?;
                let path = fs::canonicalize(&path).unwrap_or(path);
                (bytes, path, false)
            }
            CorpusInput::Inline(mentions) => {
                let mut bytes = Vec::new();
                evcoref_core::write_mentions(&mut bytes, &mentions)
                    .map_err(|e| SessionError::Internal(e.to_string()))?;
                (bytes, PathBuf::from(INLINE_CORPUS_FILE), true)
            }
        };
        let mentions = parse_mentions(bytes.as_slice())
            .map_err(|e| SessionError::Invalid(format!("corpus: {e}")))?;
        if mentions.is_empty() {
            return Err(SessionError::Invalid("corpus has no mentions".into()));
        }
        let manifest = Manifest {
            session_id: session_id.to_string(),
            created_ms: now_ms(),
            corpus_path,
            inline_corpus: inline,
            corpus_sha256: sha256_hex(&bytes),
            mentions: mentions.len(),
            config,
        };
        let session = Session::build(dir.clone(), manifest, mentions)?;

        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        if inline {
            let path = dir.join(INLINE_CORPUS_FILE);
            fs::write(&path, &bytes).map_err(|e| storage(&path, e))?;
        }
        let path = dir.join(DECISIONS_FILE);
        File::create(&path).map_err(|e| storage(&path, e))?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(&session.manifest)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        fs::write(&path, json).map_err(|e| storage(&path, e))?;
        Ok(session)
    }

    /// Loads a session directory and replays its decision log.
    pub fn open(dir: &Path) -> Result<Session, SessionError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| storage(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| storage(&path, e))?;
        let corpus_path = if manifest.inline_corpus {
            dir.join(&manifest.corpus_path)
        } else {
            manifest.corpus_path.clone()
        };
        let bytes = fs::read(&corpus_path).map_err(|e| storage(&corpus_path, e))?;
        let digest = sha256_hex(&bytes);
        if digest != manifest.corpus_sha256 {
            return Err(SessionError::Storage(format!(
                "corpus {} changed since the session was created (sha256 {digest}, expected {})",
                corpus_path.display(),
                manifest.corpus_sha256
            )));
        }
        let mentions = parse_mentions(bytes.as_slice()).map_err(|e| storage(&corpus_path, e))?;
        let mut session = Session::build(dir.to_path_buf(), manifest, mentions)?;
        session.replay_log()?;
        Ok(session)
    }

    fn build(dir: PathBuf, manifest: Manifest, mentions: Vec<Mention>) -> Result<Session, SessionError> {
        let config = &manifest.config;
        let gold_complete = mentions.iter().all(|m| m.gold().is_some());
        let scorer = config
            .scorer
            .build::<f64>(&mentions)
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        let (scorer_seed, prune_seed) = run_seeds(config.seed);
        let prune = PruneConfig::new(config.k, prune_seed).map_err(|e| SessionError::Invalid(e.to_string()))?;
        let topics: Vec<(String, Vec<Mention>)> =
            partition_by_topic(&mentions, config.topic_level).into_iter().collect();
        let mut session = Session {
            dir,
            manifest,
            topics,
            scorer: scorer.reseeded(scorer_seed),
            prune,
            stores: BTreeMap::new(),
            topic_idx: 0,
            position: 0,
            log: Vec::new(),
            records: Vec::new(),
            pending: None,
            gold_complete,
        };
        session.skip_empty_topics();
        Ok(session)
    }

    fn replay_log(&mut self) -> Result<(), SessionError> {
        let path = self.dir.join(DECISIONS_FILE);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(storage(&path, e)),
        };
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| storage(&path, e))?;
        let mut valid_bytes = 0usize;
        for (idx, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                valid_bytes += line.len() + 1;
                continue;
            }
            let record: DecisionRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) if idx + 1 == lines.len() => {
                    // A torn final write; drop it so later appends stay
                    // line-aligned.
                    log::warn!("{}: dropping incomplete last line ({e})", path.display());
                    let file = OpenOptions::new().write(true).open(&path).map_err(|e| storage(&path, e))?;
                    file.set_len(valid_bytes as u64).map_err(|e| storage(&path, e))?;
                    break;
                }
                Err(e) => return Err(storage(&path, format!("line {}: {e}", idx + 1))),
            };
            let assigned = self
                .apply(record.decision.clone(), record.timestamp_ms)
                .map_err(|e| storage(&path, format!("line {}: {e}", idx + 1)))?;
            if assigned.assigned_cluster_id != record.assigned_cluster_id {
                return Err(storage(
                    &path,
                    format!(
                        "line {}: replay assigned `{}`, log says `{}`",
                        idx + 1,
                        assigned.assigned_cluster_id,
                        record.assigned_cluster_id
                    ),
                ));
            }
            valid_bytes += line.len() + 1;
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.manifest.session_id
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn is_finished(&self) -> bool {
        self.topic_idx >= self.topics.len()
    }

    pub fn progress(&self) -> Progress {
        Progress {
            done: self.records.len(),
            total: self.manifest.mentions,
            comparisons_so_far: metrics::comparisons(&self.records),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            manifest: self.manifest.clone(),
            progress: self.progress(),
        }
    }

    fn skip_empty_topics(&mut self) {
        while self.topic_idx < self.topics.len() && self.position >= self.topics[self.topic_idx].1.len() {
            self.topic_idx += 1;
            self.position = 0;
        }
    }

    fn current_target(&self) -> Option<&Mention> {
        self.topics
            .get(self.topic_idx)
            .and_then(|(_, ms)| ms.get(self.position))
    }

    /// Ranks and prunes candidates for the current target once and caches
    /// the result until a decision is applied.
    fn ensure_pending(&mut self) -> Result<(), SessionError> {
        if self.pending.is_some() || self.is_finished() {
            return Ok(());
        }
        let level = self.manifest.config.topic_level;
        let (topic, mentions) = &self.topics[self.topic_idx];
        let target = &mentions[self.position];
        let store = self
            .stores
            .entry(topic.clone())
            .or_insert_with(|| ClusterStore::new(topic.clone(), level));
        let index = index_mentions(mentions);
        let candidates = store
            .candidates_for(target)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let had_coreferent = match target.gold() {
            Some(gold) if self.gold_complete => {
                let oracle = GoldOracle::new(store, &index);
                candidates
                    .iter()
                    .any(|c| oracle.cluster_gold(&c.cluster_id) == Some(gold))
            }
            _ => false,
        };
        let ranked = rank_candidates(target, &candidates, &index, &self.scorer)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let presented = prune_top_k(&ranked, &self.prune.for_topic(topic), self.position as u64);
        self.pending = Some(Pending {
            presented,
            had_coreferent,
        });
        Ok(())
    }

    /// The current target and its candidates, or `None` once every mention
    /// has a decision.
    pub fn next(&mut self) -> Result<Option<NextView>, SessionError> {
        self.ensure_pending()?;
        let Some(target) = self.current_target() else {
            return Ok(None);
        };
        let (topic, mentions) = &self.topics[self.topic_idx];
        let index = index_mentions(mentions);
        let store = &self.stores[topic];
        let pending = self.pending.as_ref().expect("pending computed above");
        let candidates = pending
            .presented
            .iter()
            .map(|c| CandidateView {
                cluster_id: c.cluster_id.clone(),
                rank: c.rank,
                score: c.score,
                mentions: store
                    .cluster(&c.cluster_id)
                    .map(|cl| {
                        cl.mention_ids
                            .iter()
                            .filter_map(|id| index.get(id.as_str()).map(|m| MentionView::from(*m)))
                            .collect()
                    })
                    .unwrap_or_default(),
            })
            .collect();
        Ok(Some(NextView {
            session_id: self.manifest.session_id.clone(),
            target: MentionView::from(target),
            candidates,
            progress: self.progress(),
        }))
    }

    /// Validates and applies a decision for the current target without
    /// touching the log file.
    fn apply(&mut self, decision: Decision, timestamp_ms: Option<u64>) -> Result<DecisionOutcome, SessionError> {
        self.ensure_pending()?;
        let Some(target) = self.current_target() else {
            return Err(SessionError::Conflict(
                "session is finished; no target awaits a decision".into(),
            ));
        };
        if decision.target_id != target.mention_id {
            return Err(SessionError::Conflict(format!(
                "decision is for `{}` but the current target is `{}`",
                decision.target_id, target.mention_id
            )));
        }
        if let DecisionKind::Repair { .. } = decision.kind {
            return Err(SessionError::Invalid("kind must be accept or new_cluster".into()));
        }
        let pending = self.pending.as_ref().expect("pending computed above");
        validate_decision(&decision, &target.mention_id, &pending.presented)
            .map_err(|e| SessionError::Invalid(e.to_string()))?;

        let (topic, mentions) = &self.topics[self.topic_idx];
        let target = &mentions[self.position];
        let store = self.stores.get_mut(topic).expect("store created with pending");
        let assigned = apply_decision(store, target, &decision, &pending.presented, &mut self.log)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        if let Some(last) = self.log.last_mut() {
            last.timestamp_ms = timestamp_ms;
        }
        self.records.push(TargetRecord {
            target_id: target.mention_id.clone(),
            presented_count: pending.presented.len(),
            hit_rank: decision.hit_rank(&pending.presented),
            had_coreferent_in_store: pending.had_coreferent,
            comparisons: decision.reviewed_count,
        });
        self.pending = None;
        self.position += 1;
        self.skip_empty_topics();
        Ok(DecisionOutcome {
            assigned_cluster_id: assigned,
            finished: self.is_finished(),
            progress: self.progress(),
        })
    }

    /// Applies a decision and appends it to the log. The log line is written
    /// and synced before the reply, so an acknowledged decision survives a
    /// crash.
    pub fn submit(&mut self, decision: Decision) -> Result<DecisionOutcome, SessionError> {
        let outcome = self.apply(decision, Some(now_ms()))?;
        let record = self.log.last().expect("apply appends a record");
        let path = self.dir.join(DECISIONS_FILE);
        let mut line = serde_json::to_vec(record).map_err(|e| SessionError::Internal(e.to_string()))?;
        line.push(b'\n');
        let write = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .and_then(|mut f| {
                f.write_all(&line)?;
                f.sync_data()
            });
        if let Err(e) = write {
            // Keep memory consistent with disk.
            let reopened = Session::open(&self.dir)?;
            *self = reopened;
            return Err(storage(&path, e));
        }
        Ok(outcome)
    }

    pub fn metrics(&self) -> SessionMetrics {
        let gold = self.gold_complete;
        SessionMetrics {
            session_id: self.manifest.session_id.clone(),
            comparisons: metrics::comparisons(&self.records),
            done: self.records.len(),
            total: self.manifest.mentions,
            recall: gold.then(|| metrics::recall(&self.records)),
            hits: gold.then(|| metrics::hits(&self.records)),
            eligible: gold.then(|| metrics::eligible(&self.records)),
            records: self.records.clone(),
        }
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            session_id: self.manifest.session_id.clone(),
            topics: self.stores.values().map(ClusterStore::export).collect(),
        }
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.log
    }
}
