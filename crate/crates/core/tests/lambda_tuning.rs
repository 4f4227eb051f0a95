use evcoref_core::scorers::{LambdaConfig, LemmaScorer, Scorer};
use evcoref_core::simulator::{default_k_grid, linear_grid, tune_lambda, SimOptions};
use evcoref_core::synthetic::{sentence_signal_corpus, trigger_signal_corpus};
use evcoref_core::{partition_by_topic, Mention, TopicLevel};

fn lambda_star(mentions: &[Mention]) -> f64 {
    let part = partition_by_topic(mentions, TopicLevel::Topic);
    let scorer = Scorer::Lemma(LemmaScorer::indexed(LambdaConfig::default(), mentions));
    let report = tune_lambda(
        &part,
        &scorer,
        &linear_grid(0.0, 1.0, 0.1).unwrap(),
        &default_k_grid(),
        2,
        0,
        &SimOptions::default(),
    )
    .unwrap();
    for c in &report.curves {
        eprintln!("lambda {:.1} auc {:.6}", c.lambda, c.auc);
    }
    report.lambda_star
}

#[test]
fn trigger_determined_corpus_prefers_high_lambda() {
    let star = lambda_star(&trigger_signal_corpus(12));
    assert!(star >= 0.8 - 1e-9, "lambda* = {star}");
}

#[test]
fn sentence_determined_corpus_prefers_low_lambda() {
    let star = lambda_star(&sentence_signal_corpus(12));
    assert!(star <= 0.5 + 1e-9, "lambda* = {star}");
}
