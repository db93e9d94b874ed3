//! The classifier: k class Gaussians plus priors, scored with Bayes' rule in
//! the log domain.

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::archive::EmbeddingArchive;
use crate::error::{GdcError, Result};
use crate::gaussian::{fit_class, ClassGaussian};
use crate::scalar::Real;

/// Rows scored together in [`GdcModel::classify_batch`]; each precision factor
/// is streamed once per block.
const BATCH_BLOCK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GdcModel<T> {
    components: Vec<ClassGaussian<T>>,
    priors: Vec<T>,
    log_priors: Vec<T>,
    d: usize,
}

/// Posterior over the classes of a model for one embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    /// `log π_i + log p(e | y_i)`.
    pub log_joint: Vec<T>,
    pub probs: Vec<T>,
    pub predicted: usize,
    /// All classes as `(index, prob)`, most probable first, ties by index.
    pub ranked: Vec<(usize, T)>,
}

impl<T: Real> Posterior<T> {
    /// Normalizes log-joints with a max-shifted log-sum-exp.
    pub fn from_log_joint(log_joint: Vec<T>) -> Self {
        assert!(!log_joint.is_empty(), "posterior over zero classes");
        let mut predicted = 0;
        for (i, v) in log_joint.iter().enumerate() {
            if *v > log_joint[predicted] {
                predicted = i;
            }
        }
        let lse = log_sum_exp(&log_joint);
        let probs: Vec<T> = log_joint.iter().map(|v| (*v - lse).exp()).collect();
        let mut ranked: Vec<(usize, T)> = probs.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| {
            log_joint[b.0].partial_cmp(&log_joint[a.0]).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
        });
        Self { log_joint, probs, predicted, ranked }
    }

    pub fn top_k(&self, k: usize) -> &[(usize, T)] {
        &self.ranked[..k.min(self.ranked.len())]
    }

    /// 1-based rank of class `index`.
    pub fn rank_of(&self, index: usize) -> Option<usize> {
        self.ranked.iter().position(|(i, _)| *i == index).map(|p| p + 1)
    }
}

/// `log Σ exp(x_i)`, shifted by the maximum.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|v| (*v - max).exp()).sum::<T>().ln()
}

impl<T: Real> GdcModel<T> {
    /// Builds a model from fitted components. `priors` default to uniform and
    /// are normalized to sum to one. Component ids are reset to their position.
    pub fn assemble(mut components: Vec<ClassGaussian<T>>, priors: Option<&[T]>) -> Result<Self> {
        if components.is_empty() {
            return Err(GdcError::EmptyModel);
        }
        let d = components[0].dim();
        let mut seen = HashSet::new();
        for c in &components {
            if c.dim() != d {
                return Err(GdcError::DimensionMismatch { expected: d, found: c.dim() });
            }
            if !seen.insert(c.label.as_str()) {
                return Err(GdcError::DuplicateLabel(c.label.clone()));
            }
        }
        let k = components.len();
        let priors = match priors {
            None => vec![T::one() / T::from_count(k); k],
            Some(p) => {
                if p.len() != k {
                    return Err(GdcError::DimensionMismatch { expected: k, found: p.len() });
                }
                if let Some(index) = p.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
                    return Err(GdcError::NegativePrior { index });
                }
                let total: T = p.iter().copied().sum();
                if !(total > T::zero()) {
                    return Err(GdcError::DegeneratePriors);
                }
                p.iter().map(|v| *v / total).collect()
            }
        };
        for (i, c) in components.iter_mut().enumerate() {
            c.class_id = i;
        }
        Ok(Self::from_normalized(components, priors, d))
    }

    /// Used by the model reader: priors are taken as stored, without renormalizing.
    pub(crate) fn from_normalized(components: Vec<ClassGaussian<T>>, priors: Vec<T>, d: usize) -> Self {
        let log_priors = priors.iter().map(|p| p.ln()).collect();
        Self { components, priors, log_priors, d }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ClassGaussian<T>] {
        &self.components
    }

    pub fn priors(&self) -> &[T] {
        &self.priors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|c| c.label.as_str())
    }

    pub fn label(&self, index: usize) -> &str {
        &self.components[index].label
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.components.iter().position(|c| c.label == label)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.d {
            return Err(GdcError::DimensionMismatch { expected: self.d, found: len });
        }
        Ok(())
    }

    pub fn log_joint(&self, e: &[T]) -> Result<Vec<T>> {
        self.check_dim(e.len())?;
        let mut scratch = vec![T::zero(); self.d];
        Ok(self
            .components
            .iter()
            .zip(&self.log_priors)
            .map(|(c, lp)| *lp + c.log_density_with(e, &mut scratch))
            .collect())
    }

    pub fn posterior(&self, e: &[T]) -> Result<Posterior<T>> {
        Ok(Posterior::from_log_joint(self.log_joint(e)?))
    }

    /// Bayes decision: index of the largest log-joint, lowest index on ties.
    pub fn classify(&self, e: &[T]) -> Result<usize> {
        let lj = self.log_joint(e)?;
        let mut best = 0;
        for (i, v) in lj.iter().enumerate() {
            if *v > lj[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Posteriors for every row of a row-major `M x d` block, in input order.
    /// Identical, bit for bit, to calling [`GdcModel::posterior`] per row.
    pub fn classify_batch(&self, rows: &[T]) -> Result<Vec<Posterior<T>>> {
        if !rows.len().is_multiple_of(self.d) {
            return Err(GdcError::DimensionMismatch { expected: self.d, found: rows.len() % self.d });
        }
        let m = rows.len() / self.d;
        let k = self.k();
        let mut out = Vec::with_capacity(m);
        let mut scratch = vec![T::zero(); BATCH_BLOCK * self.d];
        let mut dens = [T::zero(); BATCH_BLOCK];
        let mut joints = vec![T::zero(); BATCH_BLOCK * k];
        for block in rows.chunks(BATCH_BLOCK * self.d) {
            let rows_in_block = block.len() / self.d;
            let dens = &mut dens[..rows_in_block];
            for (ci, (c, lp)) in self.components.iter().zip(&self.log_priors).enumerate() {
                c.block_log_density(block, &mut scratch, dens);
                for (r, v) in dens.iter().enumerate() {
                    joints[r * k + ci] = *lp + *v;
                }
            }
            for r in 0..rows_in_block {
                out.push(Posterior::from_log_joint(joints[r * k..(r + 1) * k].to_vec()));
            }
        }
        Ok(out)
    }
}

/// Fits one component per archive class and assembles them with uniform priors.
/// Errors are annotated with the offending class label.
pub fn fit_archive<T: Real>(archive: &EmbeddingArchive, eps: T) -> Result<GdcModel<T>> {
    let d = archive.dim();
    let components = archive
        .classes()
        .iter()
        .enumerate()
        .map(|(i, block)| {
            fit_class(&block.rows_as::<T>(), d, eps, i, block.label.clone())
                .map_err(|e| GdcError::in_class(block.label.clone(), e))
        })
        .collect::<Result<Vec<_>>>()?;
    GdcModel::assemble(components, None)
}

/// Replaces `per_class` seeded reference rows of every class with distinct
/// seeded rows of the same class from `real`. Row counts are unchanged.
pub fn inject_real(
    references: &EmbeddingArchive,
    real: &EmbeddingArchive,
    per_class: usize,
    seed: u64,
) -> Result<EmbeddingArchive> {
    if references.dim() != real.dim() {
        return Err(GdcError::DimensionMismatch { expected: references.dim(), found: real.dim() });
    }
    let ref_labels: HashSet<&str> = references.labels().collect();
    let real_labels: HashSet<&str> = real.labels().collect();
    if let Some(l) = ref_labels.symmetric_difference(&real_labels).next() {
        return Err(GdcError::LabelMismatch((*l).to_string()));
    }
    let d = references.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = references.clone();
    for block in out.classes_mut() {
        let source = real.class(&block.label).expect("label sets checked");
        let n_ref = block.n_rows(d);
        let n_real = source.n_rows(d);
        if per_class > n_real {
            return Err(GdcError::InsufficientRealSamples {
                label: block.label.clone(),
                requested: per_class,
                available: n_real,
            });
        }
        if per_class > n_ref {
            return Err(GdcError::InsufficientSamples {
                label: block.label.clone(),
                requested: per_class,
                available: n_ref,
            });
        }
        if per_class == 0 {
            continue;
        }
        let targets = index::sample(&mut rng, n_ref, per_class);
        let picks = index::sample(&mut rng, n_real, per_class);
        for (t, p) in targets.iter().zip(picks.iter()) {
            block.values[t * d..(t + 1) * d].copy_from_slice(source.row(p, d));
        }
    }
    Ok(out)
}
