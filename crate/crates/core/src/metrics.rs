//! Recall and Comparisons over simulation traces, and curve export.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::real::Real;
use crate::simulator::{CurvePoint, TargetRecord};

/// Targets whose coreferent cluster made it into the presented list,
/// over targets that had one in the store. No eligible targets gives 1.
pub fn recall<T: Real>(records: &[TargetRecord]) -> T {
    let eligible = records.iter().filter(|r| r.had_coreferent_in_store).count();
    if eligible == 0 {
        return T::one();
    }
    T::of_usize(hits(records)) / T::of_usize(eligible)
}

pub fn hits(records: &[TargetRecord]) -> usize {
    records.iter().filter(|r| r.hit_rank.is_some()).count()
}

pub fn eligible(records: &[TargetRecord]) -> usize {
    records.iter().filter(|r| r.had_coreferent_in_store).count()
}

pub fn comparisons(records: &[TargetRecord]) -> u64 {
    records.iter().map(|r| r.comparisons as u64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
}

impl FromStr for CurveFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(CurveFormat::Csv),
            "json" => Ok(CurveFormat::Json),
            other => Err(format!("unknown curve format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug)]
pub enum CurveError {
    Io(std::io::Error),
    Parse { line: usize, message: String },
}

impl fmt::Display for CurveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveError::Io(e) => write!(f, "i/o error: {e}"),
            CurveError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for CurveError {}

impl From<std::io::Error> for CurveError {
    fn from(value: std::io::Error) -> Self {
        CurveError::Io(value)
    }
}

pub const CURVE_CSV_HEADER: &str = "k,recall,comparisons,replicates";

fn sorted_by_k<T: Real>(points: &[CurvePoint<T>]) -> Vec<&CurvePoint<T>> {
    let mut sorted: Vec<&CurvePoint<T>> = points.iter().collect();
    sorted.sort_by(|a, b| a.k.partial_cmp(&b.k).unwrap_or(Ordering::Equal));
    sorted
}

/// Writes curve points sorted by k. CSV uses six decimals for recall and
/// comparisons; JSON is an array of point objects.
pub fn export_curves<T: Real, W: Write>(
    points: &[CurvePoint<T>],
    format: CurveFormat,
    mut out: W,
) -> Result<(), CurveError> {
    let sorted = sorted_by_k(points);
    match format {
        CurveFormat::Csv => {
            writeln!(out, "{CURVE_CSV_HEADER}")?;
            for p in sorted {
                writeln!(out, "{},{:.6},{:.6},{}", p.k, p.recall, p.comparisons, p.replicates)?;
            }
        }
        CurveFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &sorted).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn parse_curves<T: Real, R: BufRead>(
    format: CurveFormat,
    reader: R,
) -> Result<Vec<CurvePoint<T>>, CurveError> {
    match format {
        CurveFormat::Json => serde_json::from_reader(reader).map_err(|e| CurveError::Parse {
            line: e.line(),
            message: e.to_string(),
        }),
        CurveFormat::Csv => {
            let mut points = Vec::new();
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                let line_no = idx + 1;
                if idx == 0 {
                    if line.trim() != CURVE_CSV_HEADER {
                        return Err(CurveError::Parse {
                            line: 1,
                            message: format!("expected header `{CURVE_CSV_HEADER}`"),
                        });
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                let bad = |message: String| CurveError::Parse {
                    line: line_no,
                    message,
                };
                if fields.len() != 4 {
                    return Err(bad(format!("expected 4 fields, found {}", fields.len())));
                }
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map(T::of)
                        .map_err(|_| bad(format!("`{s}` is not a number")))
                };
                points.push(CurvePoint {
                    k: num(fields[0])?,
                    recall: num(fields[1])?,
                    comparisons: num(fields[2])?,
                    replicates: fields[3]
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("`{}` is not a count", fields[3])))?,
                });
            }
            Ok(points)
        }
    }
}
