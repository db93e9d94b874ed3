//! Interchange formats.
//!
//! Embedding archive (`GDCE`), little-endian:
//!
//! ```text
//! magic  "GDCE"            4 bytes
//! version u16 = 1
//! dtype   u8  = 0          single precision
//! d       u32
//! per class:
//!   label_len u16 (> 0), label UTF-8
//!   rows      u32
//!   rows * d  f32, row-major
//! end marker  u32 = 0      (a zero label length)
//! ```
//!
//! Model file (`GDCM`), little-endian, doubles stored raw:
//!
//! ```text
//! magic "GDCM", version u16 = 1, d u32, k u32, eps f64
//! per class: label_len u16, label, prior f64, n_ref u32,
//!            mean d x f64, packed lower W d(d+1)/2 x f64, log_det_cov f64
//! ```
//!
//! Readers validate everything and report byte offsets; nothing is repaired.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdcError, Result};
use crate::gaussian::ClassGaussian;
use crate::gmm::GdcModel;
use crate::linalg::{packed_len, LowerTriangular};
use crate::scalar::Real;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GDCE";
pub const MODEL_MAGIC: &[u8; 4] = b"GDCM";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;

const PRIOR_SUM_TOL: f64 = 1e-12;

/// The eight caption templates used for prompt augmentation.
pub const DEFAULT_TEMPLATES: &str = include_str!("../resources/templates.txt");

pub fn default_templates() -> Vec<String> {
    parse_templates(DEFAULT_TEMPLATES)
}

/// One template per non-blank line.
pub fn parse_templates(text: &str) -> Vec<String> {
    text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    pub label: String,
    /// Row-major `rows x d`.
    pub values: Vec<f32>,
}

impl ClassBlock {
    pub fn n_rows(&self, d: usize) -> usize {
        self.values.len() / d
    }

    pub fn row(&self, r: usize, d: usize) -> &[f32] {
        &self.values[r * d..(r + 1) * d]
    }

    /// Rows upcast to the working precision.
    pub fn rows_as<T: Real>(&self) -> Vec<T> {
        self.values.iter().map(|v| T::from_f32(*v).expect("f32 representable")).collect()
    }
}

/// Named classes of single-precision embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArchive {
    d: usize,
    classes: Vec<ClassBlock>,
}

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.len() > u16::MAX as usize {
        return Err(GdcError::InvalidLabel(label.to_string()));
    }
    Ok(())
}

impl EmbeddingArchive {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 || d > u32::MAX as usize {
            return Err(GdcError::DimensionMismatch { expected: 1, found: d });
        }
        Ok(Self { d, classes: Vec::new() })
    }

    pub fn push_class(&mut self, label: impl Into<String>, values: Vec<f32>) -> Result<()> {
        let label = label.into();
        validate_label(&label)?;
        if self.classes.iter().any(|c| c.label == label) {
            return Err(GdcError::DuplicateLabel(label));
        }
        if !values.len().is_multiple_of(self.d) {
            return Err(GdcError::DimensionMismatch { expected: self.d, found: values.len() % self.d });
        }
        if values.len() / self.d > u32::MAX as usize {
            return Err(GdcError::InvalidArgument(format!("class `{label}` has too many rows")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GdcError::NonFinite { context: format!("class `{label}`") });
        }
        self.classes.push(ClassBlock { label, values });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> &[ClassBlock] {
        &self.classes
    }

    pub(crate) fn classes_mut(&mut self) -> &mut [ClassBlock] {
        &mut self.classes
    }

    pub fn class(&self, label: &str) -> Option<&ClassBlock> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.label.as_str())
    }

    pub fn total_rows(&self) -> usize {
        self.classes.iter().map(|c| c.n_rows(self.d)).sum()
    }

    /// Every row with its class index, in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f32])> {
        self.classes.iter().enumerate().flat_map(move |(i, c)| c.values.chunks_exact(self.d).map(move |r| (i, r)))
    }
}

// ---------------------------------------------------------------------------
// Byte-level reading.

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, context: impl FnOnce() -> String) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.buf.len() => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(GdcError::TruncatedFile { offset: self.offset(), context: context() }),
        }
    }

    fn u8(&mut self, ctx: &str) -> Result<u8> {
        Ok(self.take(1, || ctx.to_string())?[0])
    }

    fn u16(&mut self, ctx: &str) -> Result<u16> {
        let b = self.take(2, || ctx.to_string())?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, ctx: &str) -> Result<u32> {
        let b = self.take(4, || ctx.to_string())?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, ctx: &str) -> Result<f64> {
        let off = self.offset();
        let b = self.take(8, || ctx.to_string())?;
        let v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(GdcError::NonFiniteValue { offset: off, context: ctx.to_string() });
        }
        Ok(v)
    }

    fn f64_block(&mut self, n: usize, ctx: &str) -> Result<Vec<f64>> {
        let start = self.offset();
        let bytes =
            n.checked_mul(8).ok_or_else(|| GdcError::Malformed { offset: start, reason: "size overflow".into() })?;
        let raw = self.take(bytes, || ctx.to_string())?;
        raw.chunks_exact(8)
            .enumerate()
            .map(|(i, b)| {
                let v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(GdcError::NonFiniteValue { offset: start + 8 * i as u64, context: ctx.to_string() })
                }
            })
            .collect()
    }

    fn label(&mut self, len: u16) -> Result<String> {
        let off = self.offset();
        let raw = self.take(len as usize, || "label".to_string())?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| GdcError::Malformed { offset: off, reason: "label is not valid UTF-8".into() })
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let found = self.take(4, || "magic".to_string())?;
        if found != expected {
            return Err(GdcError::BadMagic { offset: 0, found: found.to_vec() });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let off = self.offset();
        let version = self.u16("version")?;
        if version != FORMAT_VERSION {
            return Err(GdcError::UnsupportedVersion { offset: off, version });
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(GdcError::Malformed {
                offset: self.offset(),
                reason: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn write_label<W: Write>(w: &mut W, label: &str) -> Result<()> {
    validate_label(label)?;
    w.write_all(&(label.len() as u16).to_le_bytes())?;
    w.write_all(label.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Embeddings.

pub fn write_embeddings<W: Write>(archive: &EmbeddingArchive, w: &mut W) -> Result<()> {
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[DTYPE_F32])?;
    w.write_all(&(archive.d as u32).to_le_bytes())?;
    for c in &archive.classes {
        write_label(w, &c.label)?;
        w.write_all(&(c.n_rows(archive.d) as u32).to_le_bytes())?;
        for v in &c.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.write_all(&0u32.to_le_bytes())?;
    Ok(())
}

pub fn read_embeddings<R: Read>(r: &mut R) -> Result<EmbeddingArchive> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_embeddings(&buf)
}

pub fn decode_embeddings(buf: &[u8]) -> Result<EmbeddingArchive> {
    let mut cur = Cursor::new(buf);
    cur.magic(EMBEDDING_MAGIC)?;
    cur.version()?;
    let dtype_off = cur.offset();
    let dtype = cur.u8("dtype")?;
    if dtype != DTYPE_F32 {
        return Err(GdcError::Malformed { offset: dtype_off, reason: format!("unsupported dtype {dtype}") });
    }
    let d_off = cur.offset();
    let d = cur.u32("dimension")? as usize;
    if d == 0 {
        return Err(GdcError::FileDimensionMismatch { offset: d_off, reason: "dimension is zero".into() });
    }
    let mut archive = EmbeddingArchive { d, classes: Vec::new() };
    let mut seen = HashSet::new();
    loop {
        let label_off = cur.offset();
        let len = cur.u16("label length or end marker")?;
        if len == 0 {
            let hi = cur.u16("end marker")?;
            if hi != 0 {
                return Err(GdcError::Malformed { offset: label_off, reason: "bad end marker".into() });
            }
            break;
        }
        let label = cur.label(len)?;
        if !seen.insert(label.clone()) {
            return Err(GdcError::Malformed { offset: label_off, reason: format!("duplicate label `{label}`") });
        }
        let rows = cur.u32(&format!("row count of class `{label}`"))? as usize;
        let start = cur.offset();
        let n_values = rows
            .checked_mul(d)
            .ok_or_else(|| GdcError::FileDimensionMismatch { offset: start, reason: "rows x d overflows".into() })?;
        let bytes = n_values
            .checked_mul(4)
            .ok_or_else(|| GdcError::FileDimensionMismatch { offset: start, reason: "block size overflows".into() })?;
        let raw = cur.take(bytes, || format!("rows of class `{label}`"))?;
        let mut values = Vec::with_capacity(n_values);
        for (i, b) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(GdcError::NonFiniteValue {
                    offset: start + 4 * i as u64,
                    context: format!("class `{label}`, row {}, column {}", i / d, i % d),
                });
            }
            values.push(v);
        }
        archive.classes.push(ClassBlock { label, values });
    }
    cur.finish()?;
    Ok(archive)
}

pub fn save_embeddings(archive: &EmbeddingArchive, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(archive, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingArchive> {
    read_embeddings(&mut File::open(path)?)
}

// ---------------------------------------------------------------------------
// Models.

pub fn write_model<W: Write>(model: &GdcModel<f64>, w: &mut W) -> Result<()> {
    let eps = model.components()[0].eps;
    if model.components().iter().any(|c| c.eps.to_bits() != eps.to_bits()) {
        return Err(GdcError::InvalidArgument("components were fitted with different eps".into()));
    }
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(model.dim() as u32).to_le_bytes())?;
    w.write_all(&(model.k() as u32).to_le_bytes())?;
    w.write_all(&eps.to_le_bytes())?;
    for (c, prior) in model.components().iter().zip(model.priors()) {
        write_label(w, &c.label)?;
        w.write_all(&prior.to_le_bytes())?;
        let n_ref = u32::try_from(c.n_ref).map_err(|_| GdcError::InvalidArgument("n_ref exceeds u32".into()))?;
        w.write_all(&n_ref.to_le_bytes())?;
        for v in &c.mean {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in c.inv_factor.packed() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&c.log_det_cov.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<GdcModel<f64>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_model(&buf)
}

pub fn decode_model(buf: &[u8]) -> Result<GdcModel<f64>> {
    let mut cur = Cursor::new(buf);
    cur.magic(MODEL_MAGIC)?;
    cur.version()?;
    let d_off = cur.offset();
    let d = cur.u32("dimension")? as usize;
    if d == 0 {
        return Err(GdcError::FileDimensionMismatch { offset: d_off, reason: "dimension is zero".into() });
    }
    let k_off = cur.offset();
    let k = cur.u32("class count")? as usize;
    if k == 0 {
        return Err(GdcError::FileDimensionMismatch { offset: k_off, reason: "class count is zero".into() });
    }
    let eps_off = cur.offset();
    let eps = cur.f64("eps")?;
    if eps < 0.0 {
        return Err(GdcError::Malformed { offset: eps_off, reason: "negative eps".into() });
    }
    let mut components = Vec::with_capacity(k.min(4096));
    let mut priors = Vec::with_capacity(k.min(4096));
    let mut seen = HashSet::new();
    for class_id in 0..k {
        let label_off = cur.offset();
        let len = cur.u16("label length")?;
        if len == 0 {
            return Err(GdcError::Malformed { offset: label_off, reason: "empty label".into() });
        }
        let label = cur.label(len)?;
        if !seen.insert(label.clone()) {
            return Err(GdcError::Malformed { offset: label_off, reason: format!("duplicate label `{label}`") });
        }
        let prior_off = cur.offset();
        let prior = cur.f64(&format!("prior of `{label}`"))?;
        if prior < 0.0 {
            return Err(GdcError::Malformed { offset: prior_off, reason: format!("negative prior for `{label}`") });
        }
        let n_off = cur.offset();
        let n_ref = cur.u32(&format!("n_ref of `{label}`"))? as usize;
        if n_ref == 0 {
            return Err(GdcError::Malformed { offset: n_off, reason: format!("n_ref is zero for `{label}`") });
        }
        let mean = cur.f64_block(d, &format!("mean of `{label}`"))?;
        let w_off = cur.offset();
        let packed = cur.f64_block(packed_len(d), &format!("precision factor of `{label}`"))?;
        let w = LowerTriangular::from_packed(d, packed)?;
        if let Some(i) = w.diagonal().position(|v| !(v > 0.0)) {
            return Err(GdcError::Malformed {
                offset: w_off,
                reason: format!("non-positive diagonal entry {i} in precision factor of `{label}`"),
            });
        }
        let log_det_cov = cur.f64(&format!("log_det_cov of `{label}`"))?;
        priors.push(prior);
        components.push(ClassGaussian { class_id, label, mean, inv_factor: Arc::new(w), log_det_cov, n_ref, eps });
    }
    cur.finish()?;
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > PRIOR_SUM_TOL {
        return Err(GdcError::Malformed { offset: 0, reason: format!("priors sum to {total}") });
    }
    Ok(GdcModel::from_normalized(components, priors, d))
}

pub fn save_model(model: &GdcModel<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GdcModel<f64>> {
    read_model(&mut File::open(path)?)
}

// ---------------------------------------------------------------------------
// Generation manifest.

/// One generation job: `count` images of `label` from `prompt`, seeded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub prompt: String,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationManifest {
    pub entries: Vec<ManifestEntry>,
    pub templates: Vec<String>,
    /// Images per class, `templates.len() * per_template`.
    pub per_class_target: usize,
}

impl GenerationManifest {
    pub fn total_images(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }
}

pub const PLACEHOLDER: &str = "{}";

/// Crosses every label with every template, substituting the label for `{}`.
/// Each entry gets its own seed drawn from a stream keyed by `seed`.
pub fn expand_manifest(
    labels: &[String],
    templates: &[String],
    per_template: usize,
    seed: u64,
) -> Result<GenerationManifest> {
    if labels.is_empty() {
        return Err(GdcError::EmptyInput("labels"));
    }
    if templates.is_empty() {
        return Err(GdcError::EmptyInput("templates"));
    }
    if per_template == 0 {
        return Err(GdcError::InvalidArgument("per_template must be at least 1".into()));
    }
    for t in templates {
        match t.matches(PLACEHOLDER).count() {
            0 => return Err(GdcError::MissingPlaceholder(t.clone())),
            1 => {}
            _ => return Err(GdcError::RepeatedPlaceholder(t.clone())),
        }
    }
    let mut seen = HashSet::new();
    for l in labels {
        validate_label(l)?;
        if l.contains(PLACEHOLDER) {
            return Err(GdcError::InvalidLabel(l.clone()));
        }
        if !seen.insert(l.as_str()) {
            return Err(GdcError::DuplicateLabel(l.clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut entries = Vec::with_capacity(labels.len() * templates.len());
    for label in labels {
        for template in templates {
            let entry_seed = loop {
                let s = rng.next_u64();
                if used.insert(s) {
                    break s;
                }
            };
            entries.push(ManifestEntry {
                label: label.clone(),
                prompt: template.replacen(PLACEHOLDER, label, 1),
                count: per_template,
                seed: entry_seed,
            });
        }
    }
    Ok(GenerationManifest { entries, templates: templates.to_vec(), per_class_target: templates.len() * per_template })
}

/// One JSON object per line: `{"label", "prompt", "count", "seed"}`.
pub fn write_manifest<W: Write>(manifest: &GenerationManifest, w: &mut W) -> Result<()> {
    for e in &manifest.entries {
        serde_json::to_writer(&mut *w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest<R: Read>(r: R) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|e| GdcError::Parse { line: i + 1, reason: e.to_string() })?;
        out.push(entry);
    }
    Ok(out)
}
