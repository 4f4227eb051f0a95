//! Naive reference simulator used as an oracle against the engine.
//!
//! Written from the annotation procedure directly: flat vectors, no store,
//! no shared ranking or pruning code. Only the seed mixing functions are
//! reused since they define the random streams.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use evcoref_core::seeds;
use evcoref_core::Mention;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefRecord {
    pub target_id: String,
    pub presented_count: usize,
    pub hit_rank: Option<usize>,
    pub had_coreferent_in_store: bool,
    pub comparisons: usize,
}

pub fn set_jaccard(a: &[String], b: &[String]) -> f64 {
    let a: HashSet<&String> = a.iter().collect();
    let b: HashSet<&String> = b.iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|x| b.contains(*x)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn ref_lemma(lambda: f64) -> impl Fn(&Mention, &Mention) -> f64 {
    move |a, b| {
        let t = set_jaccard(&a.trigger_lemmas, &b.trigger_lemmas);
        let c = set_jaccard(&a.sentence_lemmas, &b.sentence_lemmas);
        (c + lambda * (t - c)).max(t.min(c)).min(t.max(c))
    }
}

fn presented(k: f64, available: usize, topic_seed: u64, position: usize) -> usize {
    if k.is_infinite() {
        return available;
    }
    let mut n = k.floor() as usize;
    let frac = k - k.floor();
    if frac > 0.0 && seeds::unit_f64(seeds::mix_index(topic_seed, position as u64)) < frac {
        n += 1;
    }
    n.min(available)
}

pub struct RefRun {
    pub records: Vec<RefRecord>,
    /// Final clusters per topic as mention ids, in creation order.
    pub clusters: BTreeMap<String, Vec<Vec<String>>>,
}

/// Simulates every topic in key order with the gold oracle.
pub fn reference_run(
    partition: &BTreeMap<String, Vec<Mention>>,
    score: &dyn Fn(&Mention, &Mention) -> f64,
    k: f64,
    prune_seed: u64,
) -> RefRun {
    let mut out = Vec::new();
    let mut final_clusters = BTreeMap::new();
    for (topic, mentions) in partition {
        let topic_seed = seeds::derive_seed(prune_seed, topic);
        // clusters[i] = member positions, in creation order
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (pos, target) in mentions.iter().enumerate() {
            let gold = target.gold_cluster_id.as_deref().unwrap();
            let cluster_gold =
                |c: &Vec<usize>| mentions[c[0]].gold_cluster_id.as_deref().unwrap().to_string();
            let had = clusters.iter().any(|c| cluster_gold(c) == gold);
            let mut ranked: Vec<(f64, usize)> = clusters
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    let mut sum = 0.0;
                    for m in c {
                        sum += score(target, &mentions[*m]);
                    }
                    (sum / c.len() as f64, ci)
                })
                .collect();
            // Stable: equal scores keep creation order.
            ranked.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
            let n = presented(k, ranked.len(), topic_seed, pos);
            let hit = ranked[..n]
                .iter()
                .position(|(_, ci)| cluster_gold(&clusters[*ci]) == gold);
            out.push(RefRecord {
                target_id: target.mention_id.clone(),
                presented_count: n,
                hit_rank: hit.map(|r| r + 1),
                had_coreferent_in_store: had,
                comparisons: hit.map_or(n, |r| r + 1),
            });
            match hit {
                Some(r) => {
                    let ci = ranked[r].1;
                    clusters[ci].push(pos);
                }
                None => clusters.push(vec![pos]),
            }
        }
        final_clusters.insert(
            topic.clone(),
            clusters
                .iter()
                .map(|c| c.iter().map(|m| mentions[*m].mention_id.clone()).collect())
                .collect(),
        );
    }
    RefRun {
        records: out,
        clusters: final_clusters,
    }
}

pub fn ref_recall(records: &[RefRecord]) -> f64 {
    let eligible = records.iter().filter(|r| r.had_coreferent_in_store).count();
    if eligible == 0 {
        return 1.0;
    }
    records.iter().filter(|r| r.hit_rank.is_some()).count() as f64 / eligible as f64
}
