use evcoref_core::scorers::{LambdaConfig, LemmaScorer, Scorer};
use evcoref_core::simulator::{default_k_grid, run_seeded, sweep_k, SimOptions};
use evcoref_core::synthetic::{generate, SyntheticConfig};
use evcoref_core::{partition_by_topic, TopicLevel};

#[test]
fn f32_and_f64_runs_agree_on_integer_k() {
    let ms = generate(&SyntheticConfig::default());
    let part = partition_by_topic(&ms, TopicLevel::Topic);
    let s64 = Scorer::<f64>::Lemma(LemmaScorer::new(LambdaConfig::default()));
    let s32 = Scorer::<f32>::Lemma(LemmaScorer::new(LambdaConfig::default()));
    let opts = SimOptions::default();
    for k in [1.0, 2.0, 5.0] {
        let a = run_seeded(&part, &s64, k, 1, &opts).unwrap();
        let b = run_seeded(&part, &s32, k as f32, 1, &opts).unwrap();
        assert!((a.recall - f64::from(b.recall)).abs() < 0.05, "k {k}");
        assert!((0.0..=1.0).contains(&b.recall));
    }
    let curve = sweep_k(&part, &s32, &default_k_grid::<f32>(), 2, 0, &opts).unwrap();
    assert_eq!(curve.len(), 37);
}
