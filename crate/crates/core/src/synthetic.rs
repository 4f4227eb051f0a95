//! Synthetic corpora for tests, benchmarks and sanity checks.
//!
//! Everything here is deterministic in its seed. The generated mentions pass
//! corpus validation, so they can be written out as JSONL and fed to the CLI.

use crate::corpus::{partition_by_topic, Mention, TopicLevel};
use crate::real::Real;
use crate::scorers::ScoreMatrix;
use crate::seeds;

/// Minimal mention: the sentence tokens are the sentence lemmas, and the
/// trigger starts at the first occurrence of its first lemma (or 0).
pub fn mention(id: &str, topic: &str, gold: &str, trigger: &[&str], sentence: &[&str]) -> Mention {
    let sentence_tokens: Vec<String> = sentence.iter().map(|s| s.to_string()).collect();
    let trigger_start = trigger
        .first()
        .and_then(|t| sentence.iter().position(|s| s == t))
        .unwrap_or(0);
    Mention {
        mention_id: id.to_string(),
        doc_id: format!("{topic}-doc"),
        topic_id: topic.to_string(),
        subtopic_id: topic.to_string(),
        sentence_id: 0,
        trigger_start,
        trigger_text: trigger.join(" "),
        trigger_lemmas: trigger.iter().map(|s| s.to_string()).collect(),
        sentence_lemmas: sentence_tokens.clone(),
        sentence_tokens,
        gold_cluster_id: Some(gold.to_string()),
        extra: Default::default(),
    }
}

/// Small counter-based generator over the engine's mixing function.
#[derive(Debug, Clone)]
pub struct SplitMix {
    state: u64,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(1);
        seeds::mix_index(self.state, 0x5eed)
    }

    /// Uniform integer in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        seeds::unit_f64(self.next_u64())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            items.swap(i, self.below(i + 1));
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub mentions: usize,
    pub docs_per_topic: usize,
    /// Probability that a new gold cluster is a singleton.
    pub singleton_rate: f64,
    pub max_cluster: usize,
    /// Number of distinct trigger lemmas per topic; small pools make
    /// unrelated clusters look alike.
    pub trigger_pool: usize,
    /// Probability that a mention uses its cluster's main trigger lemma.
    pub trigger_fidelity: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            topics: 3,
            mentions: 60,
            docs_per_topic: 4,
            singleton_rate: 0.4,
            max_cluster: 6,
            trigger_pool: 12,
            trigger_fidelity: 0.75,
            seed: 1,
        }
    }
}

/// Random corpus with mixed cluster sizes and noisy lemmas.
pub fn generate(cfg: &SyntheticConfig) -> Vec<Mention> {
    let mut rng = SplitMix::new(cfg.seed);
    let topics = cfg.topics.max(1);
    let mut out = Vec::with_capacity(cfg.mentions);
    for t in 0..topics {
        let quota = cfg.mentions / topics + usize::from(t < cfg.mentions % topics);
        let topic = format!("t{t}");
        // Gold cluster sizes.
        let mut sizes = Vec::new();
        let mut total = 0;
        while total < quota {
            let size = if rng.unit() < cfg.singleton_rate {
                1
            } else {
                2 + rng.below(cfg.max_cluster.max(2) - 1)
            };
            let size = size.min(quota - total);
            sizes.push(size);
            total += size;
        }
        let mut slots: Vec<(usize, usize)> = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, n)| (0..*n).map(move |j| (g, j)))
            .collect();
        rng.shuffle(&mut slots);

        let pool = cfg.trigger_pool.max(1);
        let main_trigger: Vec<usize> = (0..sizes.len()).map(|_| rng.below(pool)).collect();
        for (idx, (g, _)) in slots.into_iter().enumerate() {
            let trig = if rng.unit() < cfg.trigger_fidelity {
                main_trigger[g]
            } else {
                rng.below(pool)
            };
            let trigger = format!("{topic}v{trig}");
            let mut sentence: Vec<String> = Vec::new();
            for _ in 0..rng.below(3) {
                sentence.push(format!("{topic}w{}", rng.below(40)));
            }
            sentence.push(trigger.clone());
            for _ in 0..2 {
                sentence.push(format!("{topic}g{g}c{}", rng.below(5)));
            }
            for _ in 0..4 {
                sentence.push(format!("{topic}w{}", rng.below(40)));
            }
            let trigger_start = sentence.iter().position(|s| *s == trigger).unwrap();
            let mut m = mention(
                &format!("{topic}-m{idx:03}"),
                &topic,
                &format!("{topic}-g{g}"),
                &[trigger.as_str()],
                &[],
            );
            m.doc_id = format!("{topic}-d{}", rng.below(cfg.docs_per_topic.max(1)));
            m.sentence_id = rng.below(30);
            m.trigger_start = trigger_start;
            m.sentence_tokens = sentence.clone();
            m.sentence_lemmas = sentence;
            out.push(m);
        }
    }
    out
}

/// Corpora of 20 to 500 mentions with varied topic counts and cluster
/// shapes.
pub fn fixture_suite() -> Vec<(String, Vec<Mention>)> {
    let shapes: [(usize, usize, f64, usize, usize); 12] = [
        (20, 1, 0.3, 4, 6),
        (24, 2, 0.6, 3, 4),
        (40, 1, 0.1, 8, 5),
        (60, 3, 0.4, 6, 10),
        (80, 2, 0.2, 10, 8),
        (100, 4, 0.5, 5, 12),
        (150, 3, 0.35, 7, 15),
        (200, 5, 0.3, 9, 20),
        (250, 2, 0.45, 6, 12),
        (300, 6, 0.25, 12, 25),
        (400, 8, 0.4, 8, 30),
        (500, 10, 0.3, 10, 30),
    ];
    shapes
        .iter()
        .enumerate()
        .map(|(i, (n, topics, singleton_rate, max_cluster, pool))| {
            let cfg = SyntheticConfig {
                topics: *topics,
                mentions: *n,
                docs_per_topic: 3 + i % 4,
                singleton_rate: *singleton_rate,
                max_cluster: *max_cluster,
                trigger_pool: *pool,
                trigger_fidelity: 0.6 + 0.03 * i as f64,
                seed: 1000 + i as u64,
            };
            (format!("synthetic-{n}-{topics}t"), generate(&cfg))
        })
        .collect()
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn build(id: String, topic: &str, gold: String, sentence_id: usize, trigger: &[String], context: &[String]) -> Mention {
    let sentence: Vec<String> = trigger.iter().chain(context).cloned().collect();
    let mut m = mention(&id, topic, &gold, &[], &[]);
    m.sentence_id = sentence_id;
    m.trigger_start = 0;
    m.trigger_text = trigger.join(" ");
    m.trigger_lemmas = trigger.to_vec();
    m.sentence_tokens = sentence.clone();
    m.sentence_lemmas = sentence;
    m
}

/// Corpus whose gold clusters are determined by the trigger lemmas while
/// sentence contexts mislead.
///
/// Each topic holds `decoys` singleton clusters followed by a two-mention
/// cluster `A`. The second `A` mention shares its trigger with the first but
/// its sentence context with the decoys. Trigger sets overlap 5/7 across
/// clusters, so the coreferent cluster only outranks the decoys when
/// λ exceeds roughly 0.725.
pub fn trigger_signal_corpus(topics: usize) -> Vec<Mention> {
    let mut out = Vec::new();
    for t in 0..topics {
        let topic = format!("trig{t}");
        let shared = words(&format!("{topic}s"), 5);
        let x = words(&format!("{topic}x"), 16);
        let y = words(&format!("{topic}y"), 16);
        let decoys = 3 + t % 2;
        let mut seq = 0;
        for i in 0..decoys {
            let mut trig = shared.clone();
            trig.push(format!("{topic}d{i}"));
            out.push(build(format!("{topic}-d{i}"), &topic, format!("{topic}-D{i}"), seq, &trig, &x));
            seq += 1;
        }
        let mut trig = shared.clone();
        trig.push(format!("{topic}a"));
        out.push(build(format!("{topic}-a1"), &topic, format!("{topic}-A"), seq, &trig, &y));
        out.push(build(format!("{topic}-a2"), &topic, format!("{topic}-A"), seq + 1, &trig, &x));
    }
    out
}

/// Mirror of [`trigger_signal_corpus`]: sentence contexts determine the
/// clusters while triggers mislead. The coreferent cluster wins only for
/// λ below roughly 0.46.
pub fn sentence_signal_corpus(topics: usize) -> Vec<Mention> {
    let mut out = Vec::new();
    for t in 0..topics {
        let topic = format!("sent{t}");
        let z = words(&format!("{topic}z"), 16);
        let decoy_trigger = vec![format!("{topic}q")];
        let decoys = 3 + t % 2;
        let mut seq = 0;
        for i in 0..decoys {
            let w = words(&format!("{topic}w{i}_"), 16);
            out.push(build(format!("{topic}-d{i}"), &topic, format!("{topic}-D{i}"), seq, &decoy_trigger, &w));
            seq += 1;
        }
        out.push(build(
            format!("{topic}-a1"),
            &topic,
            format!("{topic}-A"),
            seq,
            &[format!("{topic}p")],
            &z,
        ));
        out.push(build(format!("{topic}-a2"), &topic, format!("{topic}-A"), seq + 1, &decoy_trigger, &z));
    }
    out
}

/// Score matrix over every within-topic pair.
pub fn pair_matrix<T: Real>(
    mentions: &[Mention],
    level: TopicLevel,
    score: impl Fn(&Mention, &Mention) -> f64,
) -> ScoreMatrix<T> {
    let mut matrix = ScoreMatrix::new();
    for group in partition_by_topic(mentions, level).values() {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                matrix
                    .insert(&a.mention_id, &b.mention_id, T::of(score(a, b)), 0)
                    .expect("fresh pairs never conflict");
            }
        }
    }
    matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_mentions, write_mentions};

    #[test]
    fn generated_corpora_validate() {
        for (name, mentions) in fixture_suite() {
            let mut buf = Vec::new();
            write_mentions(&mut buf, &mentions).unwrap();
            let parsed = parse_mentions(buf.as_slice()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(parsed, mentions, "{name}");
        }
        for corpus in [trigger_signal_corpus(4), sentence_signal_corpus(4)] {
            let mut buf = Vec::new();
            write_mentions(&mut buf, &corpus).unwrap();
            assert_eq!(parse_mentions(buf.as_slice()).unwrap(), corpus);
        }
    }

    #[test]
    fn suite_covers_size_range() {
        let suite = fixture_suite();
        assert!(suite.len() >= 10);
        assert_eq!(suite.first().unwrap().1.len(), 20);
        assert_eq!(suite.last().unwrap().1.len(), 500);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = SyntheticConfig { seed: 2, ..cfg.clone() };
        assert_ne!(generate(&cfg), generate(&other));
    }
}
