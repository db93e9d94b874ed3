//! Synthetic Gaussian archives for trying the pipeline without an encoder.

use std::path::Path;

use gdc_core::archive::{self, EmbeddingArchive};
use gdc_core::{GdcError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub rows: usize,
    pub heldout_rows: usize,
    pub separation: f64,
    pub seed: u64,
}

/// Each class gets a random mean (scaled by `separation`) and its own
/// per-axis standard deviations in `[0.5, 1.5)`.
pub fn generate(spec: &SynthSpec) -> Result<(EmbeddingArchive, EmbeddingArchive)> {
    if spec.classes == 0 || spec.dim == 0 || spec.rows == 0 {
        return Err(GdcError::InvalidArgument("classes, dim and rows must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut refs = EmbeddingArchive::new(spec.dim)?;
    let mut held = EmbeddingArchive::new(spec.dim)?;
    for c in 0..spec.classes {
        let mean: Vec<f64> = (0..spec.dim).map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal)).collect();
        let scale: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(0.5..1.5)).collect();
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
            (0..n * spec.dim)
                .map(|i| {
                    let j = i % spec.dim;
                    (mean[j] + scale[j] * rng.sample::<f64, _>(StandardNormal)) as f32
                })
                .collect()
        };
        let label = format!("class_{c:03}");
        refs.push_class(label.clone(), draw(spec.rows, &mut rng))?;
        held.push_class(label, draw(spec.heldout_rows, &mut rng))?;
    }
    Ok((refs, held))
}

pub fn run(spec: &SynthSpec, out: &Path, heldout_out: Option<&Path>) -> Result<String> {
    let (refs, held) = generate(spec)?;
    archive::save_embeddings(&refs, out)?;
    if let Some(p) = heldout_out {
        archive::save_embeddings(&held, p)?;
    }
    Ok(format!(
        "wrote {} classes x {} rows (d = {}){}\n",
        spec.classes,
        spec.rows,
        spec.dim,
        if heldout_out.is_some() {
            format!(" and {} held-out rows per class", spec.heldout_rows)
        } else {
            String::new()
        }
    ))
}
