//! Mention data model, JSONL ingestion and corpus statistics.
//!
//! A corpus is a JSONL stream with one [`Mention`] object per line. Lemmas
//! arrive precomputed; the engine never tokenizes or lemmatizes. Fields the
//! engine does not know about are kept in [`Mention::extra`] and written back
//! out unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// One annotated event trigger with its sentence context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub mention_id: String,
    pub doc_id: String,
    pub topic_id: String,
    /// Defaults to `topic_id` when absent from the input.
    #[serde(default)]
    pub subtopic_id: String,
    pub sentence_id: usize,
    /// Token index of the first trigger token within the sentence.
    pub trigger_start: usize,
    pub trigger_text: String,
    #[serde(default)]
    pub trigger_lemmas: Vec<String>,
    pub sentence_tokens: Vec<String>,
    pub sentence_lemmas: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_cluster_id: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Mention {
    pub fn trigger_token_count(&self) -> usize {
        self.trigger_text.split_whitespace().count()
    }

    /// Token range of the trigger inside `sentence_tokens`.
    pub fn trigger_span(&self) -> Range<usize> {
        self.trigger_start..self.trigger_start + self.trigger_token_count()
    }

    pub fn topic_key(&self, level: TopicLevel) -> &str {
        match level {
            TopicLevel::Topic => &self.topic_id,
            TopicLevel::Subtopic => &self.subtopic_id,
        }
    }

    pub fn gold(&self) -> Option<&str> {
        self.gold_cluster_id.as_deref()
    }

    fn traversal_key(&self) -> (&str, usize, usize, &str) {
        (
            &self.doc_id,
            self.sentence_id,
            self.trigger_start,
            &self.mention_id,
        )
    }
}

/// Which gold grouping scopes candidate retrieval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicLevel {
    #[default]
    Topic,
    Subtopic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    Io(String),
    Json {
        line: usize,
        message: String,
    },
    MissingField {
        line: usize,
        field: &'static str,
    },
    Invalid {
        line: usize,
        field: &'static str,
        message: String,
    },
    LengthMismatch {
        line: usize,
        tokens: usize,
        lemmas: usize,
    },
    DuplicateId {
        line: usize,
        mention_id: String,
        first_line: usize,
    },
    MissingGold {
        mention_id: String,
    },
    GoldSpansTopics {
        gold_cluster_id: String,
        first_topic: String,
        second_topic: String,
    },
}

impl CorpusError {
    /// 1-based input line the error refers to, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Json { line, .. }
            | CorpusError::MissingField { line, .. }
            | CorpusError::Invalid { line, .. }
            | CorpusError::LengthMismatch { line, .. }
            | CorpusError::DuplicateId { line, .. } => Some(*line),
            _ => None,
        }
    }
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::Io(msg) => write!(f, "i/o error: {msg}"),
            CorpusError::Json { line, message } => write!(f, "line {line}: malformed JSON: {message}"),
            CorpusError::MissingField { line, field } => {
                write!(f, "line {line}: missing required field `{field}`")
            }
            CorpusError::Invalid {
                line,
                field,
                message,
            } => write!(f, "line {line}: invalid `{field}`: {message}"),
            CorpusError::LengthMismatch {
                line,
                tokens,
                lemmas,
            } => write!(
                f,
                "line {line}: `sentence_lemmas` has {lemmas} entries but `sentence_tokens` has {tokens}"
            ),
            CorpusError::DuplicateId {
                line,
                mention_id,
                first_line,
            } => write!(
                f,
                "line {line}: duplicate mention_id `{mention_id}` (first seen on line {first_line})"
            ),
            CorpusError::MissingGold { mention_id } => {
                write!(f, "mention `{mention_id}` has no gold_cluster_id")
            }
            CorpusError::GoldSpansTopics {
                gold_cluster_id,
                first_topic,
                second_topic,
            } => write!(
                f,
                "gold cluster `{gold_cluster_id}` spans topics `{first_topic}` and `{second_topic}`"
            ),
        }
    }
}

impl std::error::Error for CorpusError {}

impl From<std::io::Error> for CorpusError {
    fn from(value: std::io::Error) -> Self {
        CorpusError::Io(value.to_string())
    }
}

/// Parsed mentions plus non-fatal findings.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub mentions: Vec<Mention>,
    pub warnings: Vec<String>,
}

const REQUIRED_FIELDS: [&str; 8] = [
    "mention_id",
    "doc_id",
    "topic_id",
    "sentence_id",
    "trigger_start",
    "trigger_text",
    "sentence_tokens",
    "sentence_lemmas",
];

/// Parses a JSONL corpus, validating every mention. Blank lines are skipped.
pub fn parse_mentions<R: BufRead>(reader: R) -> Result<Vec<Mention>, CorpusError> {
    parse_mentions_report(reader).map(|r| {
        for w in &r.warnings {
            log::warn!("{w}");
        }
        r.mentions
    })
}

pub fn parse_mentions_report<R: BufRead>(reader: R) -> Result<ParseReport, CorpusError> {
    let mut report = ParseReport::default();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let mention = parse_line(text, line_no, &mut report.warnings)?;
        if let Some(first_line) = seen.get(&mention.mention_id) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                mention_id: mention.mention_id,
                first_line: *first_line,
            });
        }
        seen.insert(mention.mention_id.clone(), line_no);
        report.mentions.push(mention);
    }

    let with_gold = report
        .mentions
        .iter()
        .filter(|m| m.gold_cluster_id.is_some())
        .count();
    if with_gold > 0 && with_gold < report.mentions.len() {
        report.warnings.push(format!(
            "{} of {} mentions lack gold_cluster_id; the corpus cannot be simulated",
            report.mentions.len() - with_gold,
            report.mentions.len()
        ));
    }
    Ok(report)
}

fn parse_line(text: &str, line: usize, warnings: &mut Vec<String>) -> Result<Mention, CorpusError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::Json {
        line,
        message: e.to_string(),
    })?;
    let Some(object) = value.as_object() else {
        return Err(CorpusError::Json {
            line,
            message: "expected a JSON object".to_string(),
        });
    };
    for field in REQUIRED_FIELDS {
        if object.get(field).is_none_or(Value::is_null) {
            return Err(CorpusError::MissingField { line, field });
        }
    }
    let mut mention: Mention = serde_json::from_value(value).map_err(|e| CorpusError::Json {
        line,
        message: e.to_string(),
    })?;

    if mention.subtopic_id.is_empty() {
        mention.subtopic_id = mention.topic_id.clone();
    }
    for (field, value) in [
        ("mention_id", &mention.mention_id),
        ("doc_id", &mention.doc_id),
        ("topic_id", &mention.topic_id),
    ] {
        if value.is_empty() {
            return Err(CorpusError::Invalid {
                line,
                field,
                message: "must be non-empty".to_string(),
            });
        }
    }
    if mention.trigger_text.trim().is_empty() {
        return Err(CorpusError::Invalid {
            line,
            field: "trigger_text",
            message: "must be non-empty".to_string(),
        });
    }
    if mention.sentence_tokens.is_empty() {
        return Err(CorpusError::Invalid {
            line,
            field: "sentence_tokens",
            message: "must be non-empty".to_string(),
        });
    }
    if mention.sentence_lemmas.len() != mention.sentence_tokens.len() {
        return Err(CorpusError::LengthMismatch {
            line,
            tokens: mention.sentence_tokens.len(),
            lemmas: mention.sentence_lemmas.len(),
        });
    }
    let span = mention.trigger_span();
    if span.end > mention.sentence_tokens.len() {
        return Err(CorpusError::Invalid {
            line,
            field: "trigger_start",
            message: format!(
                "trigger tokens {}..{} exceed sentence length {}",
                span.start,
                span.end,
                mention.sentence_tokens.len()
            ),
        });
    }
    if mention.trigger_lemmas.is_empty() {
        mention.trigger_lemmas = mention
            .trigger_text
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        warnings.push(format!(
            "line {line}: `{}` has no trigger_lemmas; using lowercased trigger tokens",
            mention.mention_id
        ));
    }
    lowercase_all(&mut mention.trigger_lemmas);
    lowercase_all(&mut mention.sentence_lemmas);
    Ok(mention)
}

fn lowercase_all(lemmas: &mut [String]) {
    for lemma in lemmas.iter_mut() {
        if lemma.chars().any(char::is_uppercase) {
            *lemma = lemma.to_lowercase();
        }
    }
}

/// Writes mentions as JSONL, one object per line.
pub fn write_mentions<W: Write>(mut writer: W, mentions: &[Mention]) -> std::io::Result<()> {
    for mention in mentions {
        serde_json::to_writer(&mut writer, mention)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Groups mentions by topic key, each group in document-then-position order:
/// `(doc_id, sentence_id, trigger_start, mention_id)`.
pub fn partition_by_topic(
    mentions: &[Mention],
    level: TopicLevel,
) -> BTreeMap<String, Vec<Mention>> {
    let mut parts: BTreeMap<String, Vec<Mention>> = BTreeMap::new();
    for mention in mentions {
        parts
            .entry(mention.topic_key(level).to_string())
            .or_default()
            .push(mention.clone());
    }
    for group in parts.values_mut() {
        group.sort_by(|a, b| a.traversal_key().cmp(&b.traversal_key()));
    }
    parts
}

/// Counts in the shape of the usual ECR corpus statistics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub topics: usize,
    pub documents: usize,
    pub mentions: usize,
    pub clusters: usize,
    pub singletons: usize,
    /// Unordered mention pairs within the same topic.
    pub pairs_within_topic: u64,
    /// Within-topic pairs sharing a gold cluster.
    pub positive_pairs: u64,
}

fn choose2(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

pub fn corpus_stats(mentions: &[Mention], level: TopicLevel) -> Result<CorpusStats, CorpusError> {
    let mut topic_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut documents: BTreeSet<&str> = BTreeSet::new();
    // gold id -> (topic, size)
    let mut clusters: BTreeMap<&str, (&str, usize)> = BTreeMap::new();

    for mention in mentions {
        let gold = mention.gold().ok_or_else(|| CorpusError::MissingGold {
            mention_id: mention.mention_id.clone(),
        })?;
        let topic = mention.topic_key(level);
        *topic_sizes.entry(topic).or_default() += 1;
        documents.insert(&mention.doc_id);
        let entry = clusters.entry(gold).or_insert((topic, 0));
        if entry.0 != topic {
            return Err(CorpusError::GoldSpansTopics {
                gold_cluster_id: gold.to_string(),
                first_topic: entry.0.to_string(),
                second_topic: topic.to_string(),
            });
        }
        entry.1 += 1;
    }

    Ok(CorpusStats {
        topics: topic_sizes.len(),
        documents: documents.len(),
        mentions: mentions.len(),
        clusters: clusters.len(),
        singletons: clusters.values().filter(|(_, n)| *n == 1).count(),
        pairs_within_topic: topic_sizes.values().map(|n| choose2(*n)).sum(),
        positive_pairs: clusters.values().map(|(_, n)| choose2(*n)).sum(),
    })
}
