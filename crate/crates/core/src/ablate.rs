//! Regularization and reference-count sweeps evaluated on a held-out archive.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::archive::EmbeddingArchive;
use crate::error::{ErrorKind, GdcError, Result};
use crate::gmm::{fit_archive, GdcModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Accuracy(f64),
    /// The fit broke down numerically; carries the error description.
    Failed(String),
}

impl Outcome {
    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Outcome::Accuracy(a) => Some(*a),
            Outcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRow {
    pub eps: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub n: usize,
    pub trials: usize,
    pub outcome: Outcome,
}

/// Top-1 accuracy of `model` on every row of `heldout`. Rows whose class is
/// unknown to the model count as errors.
pub fn heldout_accuracy<T: Real>(model: &GdcModel<T>, heldout: &EmbeddingArchive) -> Result<f64> {
    if heldout.dim() != model.dim() {
        return Err(GdcError::DimensionMismatch { expected: model.dim(), found: heldout.dim() });
    }
    let total = heldout.total_rows();
    if total == 0 {
        return Err(GdcError::EmptyInput("held-out archive has no rows"));
    }
    let mut correct = 0usize;
    let d = heldout.dim();
    for block in heldout.classes() {
        let truth = model.index_of(&block.label);
        let rows = block.rows_as::<T>();
        for e in rows.chunks_exact(d) {
            if Some(model.classify(e)?) == truth {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / total as f64)
}

fn fit_outcome<T: Real>(refs: &EmbeddingArchive, heldout: &EmbeddingArchive, eps: T) -> Result<Outcome> {
    match fit_archive(refs, eps) {
        Ok(model) => Ok(Outcome::Accuracy(heldout_accuracy(&model, heldout)?)),
        Err(e) if e.kind() == ErrorKind::Numerical => Ok(Outcome::Failed(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Refits at each regularization value. Numerical breakdowns become
/// [`Outcome::Failed`] rows instead of aborting the sweep.
pub fn ablate_eps<T: Real>(
    refs: &EmbeddingArchive,
    heldout: &EmbeddingArchive,
    eps_list: &[f64],
) -> Result<Vec<EpsRow>> {
    if eps_list.is_empty() {
        return Err(GdcError::EmptyInput("eps list"));
    }
    eps_list.iter().map(|&eps| Ok(EpsRow { eps, outcome: fit_outcome(refs, heldout, T::lit(eps))? })).collect()
}

/// Keeps `n` seeded rows of every class, without replacement, in original order.
pub fn subsample<R: Rng + ?Sized>(archive: &EmbeddingArchive, n: usize, rng: &mut R) -> Result<EmbeddingArchive> {
    let d = archive.dim();
    let mut out = EmbeddingArchive::new(d)?;
    for block in archive.classes() {
        let available = block.n_rows(d);
        if n > available {
            return Err(GdcError::InsufficientSamples { label: block.label.clone(), requested: n, available });
        }
        let mut picks = index::sample(rng, available, n).into_vec();
        picks.sort_unstable();
        let values = picks.iter().flat_map(|&r| block.row(r, d).iter().copied()).collect();
        out.push_class(block.label.clone(), values)?;
    }
    Ok(out)
}

/// Fits on seeded subsets of `n` references per class for each `n`, averaging
/// held-out accuracy over `trials` independent subsets.
pub fn ablate_n<T: Real>(
    refs: &EmbeddingArchive,
    heldout: &EmbeddingArchive,
    n_list: &[usize],
    eps: f64,
    seed: u64,
    trials: usize,
) -> Result<Vec<CountRow>> {
    if n_list.is_empty() {
        return Err(GdcError::EmptyInput("n list"));
    }
    if trials == 0 {
        return Err(GdcError::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(GdcError::InvalidArgument("reference count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let mut sum = 0.0;
        let mut failure = None;
        for _ in 0..trials {
            let subset = subsample(refs, n, &mut rng)?;
            match fit_outcome(&subset, heldout, T::lit(eps))? {
                Outcome::Accuracy(a) => sum += a,
                Outcome::Failed(msg) => {
                    failure = Some(msg);
                    break;
                }
            }
        }
        let outcome = match failure {
            Some(msg) => Outcome::Failed(msg),
            None => Outcome::Accuracy(sum / trials as f64),
        };
        rows.push(CountRow { n, trials, outcome });
    }
    Ok(rows)
}

fn render_outcome(o: &Outcome) -> String {
    match o {
        Outcome::Accuracy(a) => format!("{a:.4}"),
        Outcome::Failed(msg) => format!("FAILED({msg})"),
    }
}

pub fn render_eps_table(rows: &[EpsRow]) -> String {
    let mut out = String::from("eps         accuracy\n");
    for r in rows {
        let _ = writeln!(out, "{:<10e}  {}", r.eps, render_outcome(&r.outcome));
    }
    out
}

pub fn render_n_table(rows: &[CountRow]) -> String {
    let mut out = String::from("n       trials  accuracy\n");
    for r in rows {
        let _ = writeln!(out, "{:<6}  {:>6}  {}", r.n, r.trials, render_outcome(&r.outcome));
    }
    out
}
