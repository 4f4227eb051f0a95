use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CombinedScorer, LambdaConfig, LemmaScorer, MatrixError, MatrixScorer, RandomScorer,
    ScoreMatrix, Scorer, ScorerKind, DEFAULT_LAMBDA,
};
use crate::corpus::Mention;
use crate::real::Real;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

/// Serializable description of a scorer, as given on the command line or
/// in a session request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Score matrix for `matrix`, trigger-level matrix for `combined`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    /// Context-level matrix for `combined`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_matrix: Option<PathBuf>,
    /// Score used for pairs missing from a matrix. Without it a missing
    /// pair is an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_score: Option<f64>,
}

impl ScorerSpec {
    pub fn new(kind: ScorerKind) -> Self {
        ScorerSpec {
            kind,
            lambda: DEFAULT_LAMBDA,
            matrix: None,
            context_matrix: None,
            default_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    InvalidLambda(f64),
    MissingMatrix { kind: ScorerKind, field: &'static str },
    UnexpectedMatrix { kind: ScorerKind, field: &'static str },
    Matrix { path: PathBuf, source: MatrixError },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::InvalidLambda(l) => write!(f, "lambda must lie in [0, 1], got {l}"),
            SpecError::MissingMatrix { kind, field } => {
                write!(f, "scorer `{kind}` needs a score matrix (`{field}`)")
            }
            SpecError::UnexpectedMatrix { kind, field } => {
                write!(f, "scorer `{kind}` does not read a matrix; drop `{field}`")
            }
            SpecError::Matrix { path, source } => {
                write!(f, "cannot load matrix {}: {source}", path.display())
            }
        }
    }
}

impl std::error::Error for SpecError {}

fn load_matrix<T: Real>(path: &Path, default_score: Option<f64>) -> Result<Arc<ScoreMatrix<T>>, SpecError> {
    let wrap = |source| SpecError::Matrix {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|e| wrap(MatrixError::from(e)))?;
    let matrix = ScoreMatrix::load(file).map_err(wrap)?;
    Ok(Arc::new(matrix.with_default(default_score.map(T::of))))
}

impl ScorerSpec {
    /// Checks which matrices the scorer kind needs, without loading them.
    pub fn check(&self) -> Result<(), SpecError> {
        let kind = self.kind;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(SpecError::InvalidLambda(self.lambda));
        }
        let needs = match kind {
            ScorerKind::Lemma | ScorerKind::Random => (false, false),
            ScorerKind::Matrix => (true, false),
            ScorerKind::Combined => (true, true),
        };
        for (needed, present, field) in [
            (needs.0, self.matrix.is_some(), "matrix"),
            (needs.1, self.context_matrix.is_some(), "context_matrix"),
        ] {
            match (needed, present) {
                (true, false) => return Err(SpecError::MissingMatrix { kind, field }),
                (false, true) => return Err(SpecError::UnexpectedMatrix { kind, field }),
                _ => {}
            }
        }
        Ok(())
    }

    /// Builds the scorer; `mentions` primes the lemma cache. Random scorers
    /// start from seed 0 and are meant to be reseeded per run.
    pub fn build<T: Real>(&self, mentions: &[Mention]) -> Result<Scorer<T>, SpecError> {
        self.check()?;
        let cfg = LambdaConfig::new(T::of(self.lambda)).map_err(|_| SpecError::InvalidLambda(self.lambda))?;
        let path = |p: &Option<PathBuf>| p.clone().expect("checked above");
        Ok(match self.kind {
            ScorerKind::Lemma => Scorer::Lemma(LemmaScorer::indexed(cfg, mentions)),
            ScorerKind::Random => Scorer::Random(RandomScorer { seed: 0 }),
            ScorerKind::Matrix => Scorer::Matrix(MatrixScorer::new(load_matrix(
                &path(&self.matrix),
                self.default_score,
            )?)),
            ScorerKind::Combined => Scorer::Combined(CombinedScorer::new(
                load_matrix(&path(&self.matrix), self.default_score)?,
                load_matrix(&path(&self.context_matrix), self.default_score)?,
                cfg,
            )),
        })
    }
}
