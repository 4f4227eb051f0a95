#[path = "support/reference.rs"]
mod reference;

use evcoref_core::scorers::{random_pair_score, LambdaConfig, LemmaScorer, RandomScorer, Scorer};
use evcoref_core::simulator::{run_seeded, run_seeds, simulate_corpus_traced, SimOptions};
use evcoref_core::workflow::PruneConfig;
use evcoref_core::synthetic::{fixture_suite, generate, SyntheticConfig};
use evcoref_core::{partition_by_topic, Mention, TargetRecord, TopicLevel};
use reference::{ref_lemma, ref_recall, reference_run, RefRecord};

fn as_ref(records: &[TargetRecord]) -> Vec<RefRecord> {
    records
        .iter()
        .map(|r| RefRecord {
            target_id: r.target_id.clone(),
            presented_count: r.presented_count,
            hit_rank: r.hit_rank,
            had_coreferent_in_store: r.had_coreferent_in_store,
            comparisons: r.comparisons,
        })
        .collect()
}

fn check(mentions: &[Mention], seed: u64, ks: &[f64]) {
    let part = partition_by_topic(mentions, TopicLevel::Topic);
    let (scorer_seed, prune_seed) = run_seeds(seed);
    let lemma = Scorer::Lemma(LemmaScorer::indexed(LambdaConfig::default(), mentions));
    let random = Scorer::Random(RandomScorer { seed: 0 });
    let ref_random = move |a: &Mention, b: &Mention| random_pair_score::<f64>(scorer_seed, &a.mention_id, &b.mention_id);
    for &k in ks {
        for (scorer, oracle) in [
            (&lemma, &ref_lemma(0.7) as &dyn Fn(&Mention, &Mention) -> f64),
            (&random, &ref_random as &dyn Fn(&Mention, &Mention) -> f64),
        ] {
            let got = run_seeded(&part, scorer, k, seed, &SimOptions::default()).unwrap();
            let want = reference_run(&part, oracle, k, prune_seed);
            assert_eq!(as_ref(&got.records), want.records, "scorer {:?} k {k}", scorer.kind());
            assert_eq!(got.recall, ref_recall(&want.records));
            assert_eq!(
                got.total_comparisons,
                want.records.iter().map(|r| r.comparisons as u64).sum::<u64>()
            );
            let traced = simulate_corpus_traced(
                &part,
                &scorer.reseeded(scorer_seed),
                &PruneConfig::new(k, prune_seed).unwrap(),
                &SimOptions::default(),
            )
            .unwrap();
            for (topic, trace) in traced {
                let clusters: Vec<Vec<String>> =
                    trace.store.clusters().iter().map(|c| c.mention_ids.clone()).collect();
                assert_eq!(clusters, want.clusters[&topic]);
            }
        }
    }
}

#[test]
fn matches_reference_on_fixture_suite() {
    for (i, (_, mentions)) in fixture_suite().iter().enumerate() {
        check(mentions, i as u64, &[1.0, 2.0, 3.5, 10.0, f64::INFINITY]);
    }
}

#[test]
fn matches_reference_on_many_topics() {
    let mentions = generate(&SyntheticConfig {
        topics: 40,
        mentions: 1200,
        seed: 77,
        ..SyntheticConfig::default()
    });
    check(&mentions, 5, &[2.0, 2.5, 3.5]);
}
