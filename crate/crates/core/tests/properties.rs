use std::collections::BTreeMap;
use std::sync::Arc;

use evcoref_core::cluster_store::ClusterStore;
use evcoref_core::scorers::{
    LambdaConfig, LemmaScorer, MatrixScorer, RandomScorer, ScoreMatrix, Scorer,
};
use evcoref_core::simulator::{run_seeded, simulate_corpus_traced, SimOptions};
use evcoref_core::synthetic::{generate, pair_matrix, SplitMix, SyntheticConfig};
use evcoref_core::workflow::{
    index_mentions, prune_top_k, rank_candidates, replay, PruneConfig, RankedCandidate,
};
use evcoref_core::{
    corpus_stats, parse_mentions, partition_by_topic, write_mentions, Mention, PairwiseScorer,
    TopicLevel,
};
use proptest::prelude::*;

fn corpus() -> impl Strategy<Value = Vec<Mention>> {
    (1usize..5, 1usize..60, 0.0f64..1.0, 2usize..7, 1usize..10, any::<u64>()).prop_map(
        |(topics, mentions, singleton_rate, max_cluster, trigger_pool, seed)| {
            generate(&SyntheticConfig {
                topics,
                mentions,
                docs_per_topic: 3,
                singleton_rate,
                max_cluster,
                trigger_pool,
                trigger_fidelity: 0.7,
                seed,
            })
        },
    )
}

fn k_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1u32..8).prop_map(f64::from),
        1.0f64..8.0,
        Just(f64::INFINITY),
    ]
}

fn shuffled(mentions: &[Mention], seed: u64) -> Vec<Mention> {
    let mut out = mentions.to_vec();
    SplitMix::new(seed).shuffle(&mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scorers_symmetric_and_bounded(ms in corpus(), lambda in 0.0f64..=1.0, seed in any::<u64>()) {
        let lemma = LemmaScorer::<f64>::new(LambdaConfig::new(lambda).unwrap());
        let random = RandomScorer { seed };
        for a in ms.iter().take(12) {
            for b in ms.iter().take(12) {
                let (l1, l2) = (lemma.score(a, b).unwrap(), lemma.score(b, a).unwrap());
                prop_assert_eq!(l1, l2);
                prop_assert!((0.0..=1.0).contains(&l1));
                let r1: f64 = random.score(a, b).unwrap();
                let r2: f64 = random.score(b, a).unwrap();
                prop_assert_eq!(r1, r2);
                prop_assert!((0.0..1.0).contains(&r1));
            }
        }
    }

    #[test]
    fn indexed_lemma_matches_plain(ms in corpus(), lambda in 0.0f64..=1.0) {
        let cfg = LambdaConfig::new(lambda).unwrap();
        let plain = LemmaScorer::<f64>::new(cfg);
        let indexed = LemmaScorer::<f64>::indexed(cfg, &ms);
        for a in ms.iter().take(10) {
            for b in ms.iter().take(10) {
                prop_assert_eq!(plain.score(a, b).unwrap(), indexed.score(a, b).unwrap());
            }
        }
    }

    #[test]
    fn pruned_list_is_a_prefix(n in 0usize..30, k in k_value(), seed in any::<u64>(), draw in any::<u64>()) {
        let ranked: Vec<RankedCandidate<f64>> = (0..n)
            .map(|i| RankedCandidate { cluster_id: format!("c{i}"), score: 1.0 / (i + 1) as f64, rank: i + 1 })
            .collect();
        let cfg = PruneConfig::new(k, seed).unwrap();
        let kept = prune_top_k(&ranked, &cfg, draw);
        prop_assert_eq!(&kept[..], &ranked[..kept.len()]);
        if k.is_finite() {
            prop_assert!(kept.len() >= n.min(k.floor() as usize));
            prop_assert!(kept.len() <= n.min(k.ceil() as usize));
        } else {
            prop_assert_eq!(kept.len(), n);
        }
    }

    #[test]
    fn partition_ignores_input_order(ms in corpus(), seed in any::<u64>()) {
        let a = partition_by_topic(&ms, TopicLevel::Topic);
        let b = partition_by_topic(&shuffled(&ms, seed), TopicLevel::Topic);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn simulation_ignores_input_order(ms in corpus(), seed in any::<u64>(), k in k_value()) {
        let scorer = Scorer::Lemma(LemmaScorer::new(LambdaConfig::default()));
        let a = run_seeded(&partition_by_topic(&ms, TopicLevel::Topic), &scorer, k, 3, &SimOptions::default()).unwrap();
        let b = run_seeded(&partition_by_topic(&shuffled(&ms, seed), TopicLevel::Topic), &scorer, k, 3, &SimOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ranking_ignores_candidate_order(ms in corpus(), seed in any::<u64>()) {
        let part = partition_by_topic(&ms, TopicLevel::Topic);
        let group = part.values().next().unwrap();
        prop_assume!(group.len() >= 2);
        let (target, rest) = group.split_last().unwrap();
        let mut store = ClusterStore::new(target.topic_id.clone(), TopicLevel::Topic);
        for m in rest {
            store.create_singleton(m).unwrap();
        }
        let index = index_mentions(rest);
        let scorer = RandomScorer { seed };
        let forward: Vec<_> = store.clusters().iter().collect();
        let mut backward = forward.clone();
        backward.reverse();
        let a: Vec<RankedCandidate<f64>> = rank_candidates(target, &forward, &index, &scorer).unwrap();
        let b: Vec<RankedCandidate<f64>> = rank_candidates(target, &backward, &index, &scorer).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn positive_affine_transform_keeps_results(ms in corpus(), scale in 0.01f64..10.0, shift in -5.0f64..5.0, k in k_value()) {
        let lemma = LemmaScorer::<f64>::new(LambdaConfig::default());
        let base = pair_matrix::<f64>(&ms, TopicLevel::Topic, |a, b| lemma.score(a, b).unwrap());
        // Round to a coarse grid so the transform itself introduces no ties
        // or tie breaks through float error.
        let q = |x: f64| (x * 64.0).round();
        let plain = pair_matrix::<f64>(&ms, TopicLevel::Topic, |a, b| q(base.get(&a.mention_id, &b.mention_id).unwrap()));
        let moved = pair_matrix::<f64>(&ms, TopicLevel::Topic, |a, b| {
            q(base.get(&a.mention_id, &b.mention_id).unwrap()) * scale.round().max(1.0) + shift.round()
        });
        let part = partition_by_topic(&ms, TopicLevel::Topic);
        let run = |m: ScoreMatrix<f64>| {
            run_seeded(&part, &Scorer::Matrix(MatrixScorer::new(Arc::new(m))), k, 9, &SimOptions::default())
                .unwrap()
                .records
        };
        prop_assert_eq!(run(plain), run(moved));
    }

    #[test]
    fn monotone_transform_with_singleton_clusters(ms in corpus(), seed in any::<u64>()) {
        // With one mention per cluster, ranking depends only on the order of
        // pairwise scores.
        let part = partition_by_topic(&ms, TopicLevel::Topic);
        let group = part.values().next().unwrap();
        prop_assume!(group.len() >= 2);
        let (target, rest) = group.split_last().unwrap();
        let mut store = ClusterStore::new(target.topic_id.clone(), TopicLevel::Topic);
        for m in rest {
            store.create_singleton(m).unwrap();
        }
        let index = index_mentions(rest);
        let clusters: Vec<_> = store.clusters().iter().collect();
        let random = RandomScorer { seed };
        let stretched = |a: &Mention, b: &Mention| -> f64 {
            let s: f64 = random.score(a, b).unwrap();
            (s * 4.0).exp() - 3.0
        };
        struct F<G>(G);
        impl<G: Fn(&Mention, &Mention) -> f64 + Send + Sync> PairwiseScorer<f64> for F<G> {
            fn name(&self) -> &str { "f" }
            fn score(&self, a: &Mention, b: &Mention) -> Result<f64, evcoref_core::ScoreError> { Ok((self.0)(a, b)) }
        }
        let ids = |r: Vec<RankedCandidate<f64>>| r.into_iter().map(|c| c.cluster_id).collect::<Vec<_>>();
        let a = ids(rank_candidates(target, &clusters, &index, &random).unwrap());
        let b = ids(rank_candidates(target, &clusters, &index, &F(stretched)).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn jsonl_round_trip(ms in corpus()) {
        let mut buf = Vec::new();
        write_mentions(&mut buf, &ms).unwrap();
        prop_assert_eq!(parse_mentions(buf.as_slice()).unwrap(), ms);
    }

    #[test]
    fn stats_match_brute_force(ms in corpus()) {
        let stats = corpus_stats(&ms, TopicLevel::Topic).unwrap();
        let mut pairs = 0u64;
        let mut positive = 0u64;
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                if ms[i].topic_id == ms[j].topic_id {
                    pairs += 1;
                    if ms[i].gold_cluster_id == ms[j].gold_cluster_id {
                        positive += 1;
                    }
                }
            }
        }
        let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
        for m in &ms {
            *sizes.entry(m.gold_cluster_id.as_deref().unwrap()).or_default() += 1;
        }
        prop_assert_eq!(stats.mentions, ms.len());
        prop_assert_eq!(stats.pairs_within_topic, pairs);
        prop_assert_eq!(stats.positive_pairs, positive);
        prop_assert_eq!(stats.clusters, sizes.len());
        prop_assert_eq!(stats.singletons, sizes.values().filter(|n| **n == 1).count());
    }

    #[test]
    fn stores_stay_pure_and_replayable(ms in corpus(), k in k_value(), seed in any::<u64>(), repair in any::<bool>()) {
        let part = partition_by_topic(&ms, TopicLevel::Topic);
        let opts = SimOptions { oracle_repair: repair, topic_level: TopicLevel::Topic };
        let scorer = RandomScorer { seed };
        let traces = simulate_corpus_traced::<f64, _>(&part, &scorer, &PruneConfig::new(k, seed).unwrap(), &opts).unwrap();
        let index = index_mentions(&ms);
        for (topic, trace) in &traces {
            prop_assert!(trace.store.audit().is_ok());
            prop_assert_eq!(trace.store.mention_count(), part[topic].len());
            for c in trace.store.clusters() {
                let gold = index[c.mention_ids[0].as_str()].gold();
                prop_assert!(c.mention_ids.iter().all(|m| index[m.as_str()].gold() == gold));
            }
            let rebuilt = replay(&index, TopicLevel::Topic, &trace.decisions).unwrap();
            if let Some(store) = rebuilt.get(topic) {
                prop_assert_eq!(store, &trace.store);
            }
            for r in &trace.records {
                prop_assert!(r.comparisons <= r.presented_count);
                prop_assert!(r.hit_rank.is_none() || r.had_coreferent_in_store);
                if !k.is_finite() {
                    prop_assert_eq!(r.hit_rank.is_some(), r.had_coreferent_in_store);
                }
            }
        }
    }
}

#[test]
fn nonlinear_transform_can_reorder_multi_mention_clusters() {
    use evcoref_core::synthetic::mention;
    struct Table(fn(f64) -> f64);
    impl PairwiseScorer<f64> for Table {
        fn name(&self) -> &str {
            "table"
        }
        fn score(&self, _: &Mention, b: &Mention) -> Result<f64, evcoref_core::ScoreError> {
            let raw = match b.mention_id.as_str() {
                "a1" => 1.0,
                "a2" => 0.0,
                _ => 0.6,
            };
            Ok((self.0)(raw))
        }
    }
    let ms: Vec<Mention> = ["a1", "a2", "b1"].iter().map(|id| mention(id, "t", "g", &["x"], &["x"])).collect();
    let mut store = ClusterStore::new("t", TopicLevel::Topic);
    let a = store.create_singleton(&ms[0]).unwrap();
    store.merge(&ms[1], &a).unwrap();
    store.create_singleton(&ms[2]).unwrap();
    let index = index_mentions(&ms);
    let target = mention("q", "t", "g", &["x"], &["x"]);
    let clusters: Vec<_> = store.clusters().iter().collect();
    let top = |f: fn(f64) -> f64| rank_candidates(&target, &clusters, &index, &Table(f)).unwrap()[0].cluster_id.clone();
    assert_eq!(top(|x| x), "c2");
    assert_eq!(top(|x| x * x * x), "c1");
}
