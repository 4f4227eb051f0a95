//! Precomputed pairwise scores.
//!
//! Two file formats are accepted, detected from the first non-blank line:
//!
//! ```text
//! mention_id_a,mention_id_b,score      (CSV; the header line is optional)
//! {"a": "m1", "b": "m2", "score": 0.9} (JSONL)
//! ```
//!
//! Keys are unordered pairs. Listing a pair twice is allowed only when both
//! entries carry the same score.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::Deserialize;

use super::ScoreError;
use crate::corpus::Mention;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixError {
    Io(String),
    Parse {
        line: usize,
        message: String,
    },
    NonFinite {
        line: usize,
    },
    Conflict {
        line: usize,
        a: String,
        b: String,
        first: f64,
        second: f64,
    },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::Io(msg) => write!(f, "i/o error: {msg}"),
            MatrixError::Parse { line, message } => write!(f, "line {line}: {message}"),
            MatrixError::NonFinite { line } => write!(f, "line {line}: score is not a finite number"),
            MatrixError::Conflict {
                line,
                a,
                b,
                first,
                second,
            } => write!(
                f,
                "line {line}: pair ({a}, {b}) has conflicting scores {first} and {second}"
            ),
        }
    }
}

impl std::error::Error for MatrixError {}

impl From<std::io::Error> for MatrixError {
    fn from(value: std::io::Error) -> Self {
        MatrixError::Io(value.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScoreMatrix<T: Real> {
    ids: HashMap<String, u32>,
    scores: HashMap<(u32, u32), T>,
    default_score: Option<T>,
}

#[derive(Deserialize)]
struct JsonPair {
    a: String,
    b: String,
    score: f64,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn new() -> Self {
        ScoreMatrix {
            ids: HashMap::new(),
            scores: HashMap::new(),
            default_score: None,
        }
    }

    pub fn with_default(mut self, default_score: Option<T>) -> Self {
        self.default_score = default_score;
        self
    }

    pub fn default_score(&self) -> Option<T> {
        self.default_score
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn intern(&mut self, id: &str) -> u32 {
        if let Some(i) = self.ids.get(id) {
            return *i;
        }
        let next = self.ids.len() as u32;
        self.ids.insert(id.to_string(), next);
        next
    }

    fn key(a: u32, b: u32) -> (u32, u32) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Inserts a pair score. `line` is only used for error reporting.
    pub fn insert(&mut self, a: &str, b: &str, score: T, line: usize) -> Result<(), MatrixError> {
        if !score.is_finite() {
            return Err(MatrixError::NonFinite { line });
        }
        let key = Self::key(self.intern(a), self.intern(b));
        if let Some(prev) = self.scores.get(&key) {
            if *prev != score {
                return Err(MatrixError::Conflict {
                    line,
                    a: a.to_string(),
                    b: b.to_string(),
                    first: prev.as_f64(),
                    second: score.as_f64(),
                });
            }
            return Ok(());
        }
        self.scores.insert(key, score);
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        let ia = self.ids.get(a)?;
        let ib = self.ids.get(b)?;
        self.scores.get(&Self::key(*ia, *ib)).copied()
    }

    /// Score for the unordered pair, falling back to the default score.
    pub fn matrix_score(&self, a: &Mention, b: &Mention) -> Result<T, ScoreError> {
        self.get(&a.mention_id, &b.mention_id)
            .or(self.default_score)
            .ok_or_else(|| ScoreError::MissingPair {
                a: a.mention_id.clone(),
                b: b.mention_id.clone(),
            })
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Self, MatrixError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let first = text.lines().map(str::trim).find(|l| !l.is_empty());
        match first {
            Some(l) if l.starts_with('{') => Self::load_jsonl(&text),
            Some(_) => Self::load_csv(&text),
            None => Ok(Self::new()),
        }
    }

    fn load_jsonl(text: &str) -> Result<Self, MatrixError> {
        let mut matrix = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let pair: JsonPair = serde_json::from_str(raw).map_err(|e| MatrixError::Parse {
                line,
                message: e.to_string(),
            })?;
            matrix.insert(&pair.a, &pair.b, T::of(pair.score), line)?;
        }
        Ok(matrix)
    }

    fn load_csv(text: &str) -> Result<Self, MatrixError> {
        let mut matrix = Self::new();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| MatrixError::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if idx == 0 && record.get(0) == Some("mention_id_a") {
                continue;
            }
            if record.len() != 3 {
                return Err(MatrixError::Parse {
                    line,
                    message: format!("expected 3 columns, found {}", record.len()),
                });
            }
            let score: f64 = record[2].parse().map_err(|_| MatrixError::Parse {
                line,
                message: format!("`{}` is not a number", &record[2]),
            })?;
            matrix.insert(&record[0], &record[1], T::of(score), line)?;
        }
        Ok(matrix)
    }

    /// Writes the CSV form, rows sorted by id pair.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        let mut names: Vec<&str> = vec![""; self.ids.len()];
        for (name, i) in &self.ids {
            names[*i as usize] = name;
        }
        let mut rows: Vec<(&str, &str, T)> = self
            .scores
            .iter()
            .map(|((a, b), s)| {
                let (x, y) = (names[*a as usize], names[*b as usize]);
                if x <= y {
                    (x, y, *s)
                } else {
                    (y, x, *s)
                }
            })
            .collect();
        rows.sort_by(|l, r| (l.0, l.1).cmp(&(r.0, r.1)));
        writeln!(writer, "mention_id_a,mention_id_b,score")?;
        for (a, b, s) in rows {
            writeln!(writer, "{a},{b},{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headerless_single_row_is_symmetric() {
        let m = ScoreMatrix::<f64>::load("m1,m2,0.9\n".as_bytes()).unwrap();
        assert_eq!(m.get("m1", "m2"), Some(0.9));
        assert_eq!(m.get("m2", "m1"), Some(0.9));
    }

    #[test]
    fn header_and_jsonl() {
        let csv = "mention_id_a,mention_id_b,score\nm1,m2,0.25\n";
        assert_eq!(ScoreMatrix::<f32>::load(csv.as_bytes()).unwrap().get("m2", "m1"), Some(0.25));
        let jsonl = "{\"a\":\"m1\",\"b\":\"m2\",\"score\":0.5}\n\n{\"a\":\"m3\",\"b\":\"m1\",\"score\":1}\n";
        let m = ScoreMatrix::<f64>::load(jsonl.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.get("m1", "m3"), Some(1.0));
    }

    #[test]
    fn conflicting_duplicate_rejected() {
        let err = ScoreMatrix::<f64>::load("m1,m2,0.9\nm2,m1,0.8\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MatrixError::Conflict { line: 2, .. }), "{err:?}");
        // Agreeing duplicates are fine.
        assert!(ScoreMatrix::<f64>::load("m1,m2,0.9\nm2,m1,0.9\n".as_bytes()).is_ok());
    }

    #[test]
    fn bad_rows() {
        assert!(matches!(
            ScoreMatrix::<f64>::load("m1,m2,abc\n".as_bytes()),
            Err(MatrixError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ScoreMatrix::<f64>::load("m1,m2,NaN\n".as_bytes()),
            Err(MatrixError::NonFinite { line: 1 })
        ));
        assert!(matches!(
            ScoreMatrix::<f64>::load("{\"a\":\"m1\"}\n".as_bytes()),
            Err(MatrixError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_pair_and_default() {
        use crate::synthetic::mention;
        let a = mention("m1", "t", "g", &["x"], &["x"]);
        let b = mention("m9", "t", "g", &["x"], &["x"]);
        let m = ScoreMatrix::<f64>::load("m1,m2,0.9\n".as_bytes()).unwrap();
        assert!(matches!(m.matrix_score(&a, &b), Err(ScoreError::MissingPair { .. })));
        let m = m.with_default(Some(0.1));
        assert_eq!(m.matrix_score(&a, &b).unwrap(), 0.1);
    }

    #[test]
    fn write_then_load() {
        let m = ScoreMatrix::<f64>::load("b,a,0.125\nc,a,0.5\n".as_bytes()).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "mention_id_a,mention_id_b,score\na,b,0.125\na,c,0.5\n"
        );
        let again = ScoreMatrix::<f64>::load(out.as_slice()).unwrap();
        assert_eq!(again.get("a", "c"), Some(0.5));
    }
}
