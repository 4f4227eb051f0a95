//! Per-topic store of annotated event clusters.
//!
//! Clusters are disjoint and never removed, so the cluster vector doubles as
//! creation order. Cluster ids are `c1`, `c2`, … in creation order within a
//! store.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Mention, TopicLevel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: String,
    pub mention_ids: Vec<String>,
    pub created_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreError {
    TopicMismatch { expected: String, found: String },
    AlreadyClustered { mention_id: String, cluster_id: String },
    UnknownCluster(String),
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::TopicMismatch { expected, found } => {
                write!(f, "mention belongs to topic `{found}`, store holds `{expected}`")
            }
            StoreError::AlreadyClustered {
                mention_id,
                cluster_id,
            } => write!(f, "mention `{mention_id}` is already in cluster `{cluster_id}`"),
            StoreError::UnknownCluster(id) => write!(f, "unknown cluster `{id}`"),
        }
    }
}

impl std::error::Error for StoreError {}

/// Serialized form of a store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterExport {
    pub topic_id: String,
    pub clusters: Vec<ExportedCluster>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedCluster {
    pub cluster_id: String,
    pub mention_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterStore {
    topic_id: String,
    level: TopicLevel,
    clusters: Vec<Cluster>,
    /// mention id -> position in `clusters`
    index: HashMap<String, usize>,
}

impl ClusterStore {
    pub fn new(topic_id: impl Into<String>, level: TopicLevel) -> Self {
        ClusterStore {
            topic_id: topic_id.into(),
            level,
            clusters: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.index.len()
    }

    pub fn cluster(&self, cluster_id: &str) -> Option<&Cluster> {
        self.position(cluster_id).map(|i| &self.clusters[i])
    }

    pub fn cluster_of(&self, mention_id: &str) -> Option<&Cluster> {
        self.index.get(mention_id).map(|i| &self.clusters[*i])
    }

    fn position(&self, cluster_id: &str) -> Option<usize> {
        // Ids are `c{seq}` with seq = position + 1; fall back to a scan for
        // anything else.
        cluster_id
            .strip_prefix('c')
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
            .filter(|i| self.clusters.get(*i).is_some_and(|c| c.cluster_id == cluster_id))
            .or_else(|| self.clusters.iter().position(|c| c.cluster_id == cluster_id))
    }

    fn check_unclustered(&self, target: &Mention) -> Result<(), StoreError> {
        let found = target.topic_key(self.level);
        if found != self.topic_id {
            return Err(StoreError::TopicMismatch {
                expected: self.topic_id.clone(),
                found: found.to_string(),
            });
        }
        if let Some(c) = self.cluster_of(&target.mention_id) {
            return Err(StoreError::AlreadyClustered {
                mention_id: target.mention_id.clone(),
                cluster_id: c.cluster_id.clone(),
            });
        }
        Ok(())
    }

    /// Every cluster in the store, in creation order.
    pub fn candidates_for(&self, target: &Mention) -> Result<Vec<&Cluster>, StoreError> {
        self.check_unclustered(target)?;
        Ok(self.clusters.iter().collect())
    }

    pub fn merge(&mut self, target: &Mention, cluster_id: &str) -> Result<(), StoreError> {
        self.check_unclustered(target)?;
        let pos = self
            .position(cluster_id)
            .ok_or_else(|| StoreError::UnknownCluster(cluster_id.to_string()))?;
        self.clusters[pos].mention_ids.push(target.mention_id.clone());
        self.index.insert(target.mention_id.clone(), pos);
        Ok(())
    }

    pub fn create_singleton(&mut self, target: &Mention) -> Result<String, StoreError> {
        self.check_unclustered(target)?;
        let seq = self.clusters.len() as u64 + 1;
        let cluster_id = format!("c{seq}");
        self.index.insert(target.mention_id.clone(), self.clusters.len());
        self.clusters.push(Cluster {
            cluster_id: cluster_id.clone(),
            mention_ids: vec![target.mention_id.clone()],
            created_seq: seq,
        });
        Ok(cluster_id)
    }

    /// Checks disjointness, index consistency and creation order.
    pub fn audit(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        let mut last_seq = 0;
        for (pos, cluster) in self.clusters.iter().enumerate() {
            if cluster.mention_ids.is_empty() {
                return Err(format!("cluster {} is empty", cluster.cluster_id));
            }
            if cluster.created_seq <= last_seq {
                return Err(format!("cluster {} breaks creation order", cluster.cluster_id));
            }
            last_seq = cluster.created_seq;
            for id in &cluster.mention_ids {
                if !seen.insert(id.as_str()) {
                    return Err(format!("mention {id} appears twice"));
                }
                if self.index.get(id) != Some(&pos) {
                    return Err(format!("index entry for {id} is stale"));
                }
            }
        }
        if seen.len() != self.index.len() {
            return Err("index holds mentions outside any cluster".to_string());
        }
        Ok(())
    }

    pub fn export(&self) -> ClusterExport {
        ClusterExport {
            topic_id: self.topic_id.clone(),
            clusters: self
                .clusters
                .iter()
                .map(|c| ExportedCluster {
                    cluster_id: c.cluster_id.clone(),
                    mention_ids: c.mention_ids.clone(),
                })
                .collect(),
        }
    }
}
