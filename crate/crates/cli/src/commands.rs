use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use gdc_core::ablate;
use gdc_core::archive::{self, EmbeddingArchive};
use gdc_core::eval::{self, LabelProb, PredictionRecord};
use gdc_core::{bench, gmm, normality, GdcError, Result};

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

pub fn manifest(labels: &Path, templates: Option<&Path>, per_template: usize, seed: u64, out: &Path) -> Result<String> {
    let labels = read_lines(labels)?;
    let templates = match templates {
        Some(p) => archive::parse_templates(&fs::read_to_string(p)?),
        None => archive::default_templates(),
    };
    let manifest = archive::expand_manifest(&labels, &templates, per_template, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    archive::write_manifest(&manifest, &mut w)?;
    w.flush()?;
    Ok(format!(
        "wrote {} records for {} classes x {} templates ({} images, {} per class)\n",
        manifest.entries.len(),
        labels.len(),
        templates.len(),
        manifest.total_images(),
        manifest.per_class_target
    ))
}

pub fn fit(embeddings: &Path, eps: f64, out: &Path) -> Result<String> {
    let refs = archive::load_embeddings(embeddings)?;
    let model = gmm::fit_archive::<f64>(&refs, eps)?;
    archive::save_model(&model, out)?;
    let mut s = format!("k = {}, d = {}, eps = {:e}\n", model.k(), model.dim(), eps);
    for c in model.components() {
        let _ = writeln!(s, "  {}: N = {}", c.label, c.n_ref);
    }
    Ok(s)
}

pub fn classify(model_path: &Path, embeddings: &Path, top_k: usize, out: &Path) -> Result<String> {
    let model = archive::load_model(model_path)?;
    let data = archive::load_embeddings(embeddings)?;
    if data.dim() != model.dim() {
        return Err(GdcError::DimensionMismatch { expected: model.dim(), found: data.dim() });
    }
    let top_k = top_k.clamp(1, model.k());
    let mut w = BufWriter::new(File::create(out)?);
    let mut index = 0usize;
    let mut correct = 0usize;
    for block in data.classes() {
        let truth = model.index_of(&block.label);
        for post in model.classify_batch(&block.rows_as::<f64>())? {
            let predicted = model.label(post.predicted).to_string();
            if predicted == block.label {
                correct += 1;
            }
            let record = PredictionRecord {
                index,
                true_label: block.label.clone(),
                predicted,
                true_rank: truth.and_then(|t| post.rank_of(t)),
                top_k: post
                    .top_k(top_k)
                    .iter()
                    .map(|(i, p)| LabelProb { label: model.label(*i).to_string(), prob: *p })
                    .collect(),
            };
            eval::write_prediction(&mut w, &record)?;
            index += 1;
        }
    }
    w.flush()?;
    let acc = if index > 0 { correct as f64 / index as f64 } else { 0.0 };
    Ok(format!("classified {index} embeddings against {} classes; top-1 accuracy {acc:.4}\n", model.k()))
}

pub fn eval(predictions: &Path) -> Result<String> {
    let records = eval::read_predictions(File::open(predictions)?)?;
    Ok(eval::evaluate(&records)?.render())
}

pub fn audit(embeddings: &Path, components: usize, alpha: f64) -> Result<String> {
    let data = archive::load_embeddings(embeddings)?;
    Ok(normality::audit::<f64>(&data, components, alpha)?.render())
}

fn load_pair(embeddings: &Path, heldout: &Path) -> Result<(EmbeddingArchive, EmbeddingArchive)> {
    let refs = archive::load_embeddings(embeddings)?;
    let held = archive::load_embeddings(heldout)?;
    if refs.dim() != held.dim() {
        return Err(GdcError::DimensionMismatch { expected: refs.dim(), found: held.dim() });
    }
    Ok((refs, held))
}

pub fn ablate_eps(embeddings: &Path, heldout: &Path, eps: &[f64]) -> Result<String> {
    let (refs, held) = load_pair(embeddings, heldout)?;
    Ok(ablate::render_eps_table(&ablate::ablate_eps::<f64>(&refs, &held, eps)?))
}

pub fn ablate_n(embeddings: &Path, heldout: &Path, n: &[usize], eps: f64, seed: u64, trials: usize) -> Result<String> {
    let (refs, held) = load_pair(embeddings, heldout)?;
    Ok(ablate::render_n_table(&ablate::ablate_n::<f64>(&refs, &held, n, eps, seed, trials)?))
}

pub fn bench(model_path: &Path, embeddings: &Path, repetitions: usize) -> Result<String> {
    let model = archive::load_model(model_path)?;
    let data = archive::load_embeddings(embeddings)?;
    if data.dim() != model.dim() {
        return Err(GdcError::DimensionMismatch { expected: model.dim(), found: data.dim() });
    }
    let rows: Vec<f64> = data.classes().iter().flat_map(|c| c.rows_as::<f64>()).collect();
    Ok(bench::run_bench(&model, &rows, repetitions)?.render())
}

pub fn inject(embeddings: &Path, real: &Path, per_class: usize, seed: u64, out: &Path) -> Result<String> {
    let refs = archive::load_embeddings(embeddings)?;
    let real = archive::load_embeddings(real)?;
    let injected = gmm::inject_real(&refs, &real, per_class, seed)?;
    archive::save_embeddings(&injected, out)?;
    Ok(format!(
        "replaced {per_class} rows in each of {} classes ({} rows total)\n",
        injected.classes().len(),
        injected.total_rows()
    ))
}
