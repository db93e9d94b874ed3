//! Prediction records and accuracy reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GdcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProb {
    pub label: String,
    pub prob: f64,
}

/// One classified embedding, written as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub true_label: String,
    pub predicted: String,
    /// 1-based rank of the true label among all model classes; `None` when the
    /// model has no such class.
    pub true_rank: Option<usize>,
    pub top_k: Vec<LabelProb>,
}

pub fn write_prediction<W: Write>(w: &mut W, record: &PredictionRecord) -> Result<()> {
    serde_json::to_writer(&mut *w, record).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| GdcError::Parse { line: i + 1, reason: e.to_string() })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub label: String,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    pub true_label: String,
    pub predicted: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub top1: f64,
    pub top5: f64,
    /// Sorted by label.
    pub per_class: Vec<ClassAccuracy>,
    /// Ten most frequent (true, predicted) error pairs.
    pub confused: Vec<Confusion>,
}

pub const CONFUSED_PAIRS: usize = 10;

pub fn evaluate(records: &[PredictionRecord]) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(GdcError::EmptyInput("no prediction records"));
    }
    let mut top1 = 0usize;
    let mut top5 = 0usize;
    let mut per_class: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in records {
        let hit = r.predicted == r.true_label;
        let entry = per_class.entry(&r.true_label).or_default();
        entry.0 += 1;
        if hit {
            top1 += 1;
            entry.1 += 1;
        } else {
            *pairs.entry((&r.true_label, &r.predicted)).or_default() += 1;
        }
        if matches!(r.true_rank, Some(rank) if rank <= 5) {
            top5 += 1;
        }
    }
    let total = records.len();
    let per_class = per_class
        .into_iter()
        .map(|(label, (n, c))| ClassAccuracy {
            label: label.to_string(),
            total: n,
            correct: c,
            accuracy: c as f64 / n as f64,
        })
        .collect();
    let mut confused: Vec<Confusion> = pairs
        .into_iter()
        .map(|((t, p), count)| Confusion { true_label: t.to_string(), predicted: p.to_string(), count })
        .collect();
    // BTreeMap order breaks count ties by (true, predicted).
    confused.sort_by_key(|c| std::cmp::Reverse(c.count));
    confused.truncate(CONFUSED_PAIRS);
    Ok(EvalReport { total, top1: top1 as f64 / total as f64, top5: top5 as f64 / total as f64, per_class, confused })
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "total: {}", self.total);
        let _ = writeln!(out, "top-1 accuracy: {:.6}", self.top1);
        let _ = writeln!(out, "top-5 accuracy: {:.6}", self.top5);
        let width = self.per_class.iter().map(|c| c.label.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "\n{:<width$}  {:>7}  {:>7}  {:>8}", "class", "total", "correct", "accuracy");
        for c in &self.per_class {
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}  {:>8.4}", c.label, c.total, c.correct, c.accuracy);
        }
        if !self.confused.is_empty() {
            let _ = writeln!(out, "\nmost confused (true -> predicted):");
            for c in &self.confused {
                let _ = writeln!(out, "  {} -> {}: {}", c.true_label, c.predicted, c.count);
            }
        }
        out
    }
}
