mod common;

use common::*;
use gdc_core::archive::{self, EmbeddingArchive, FORMAT_VERSION};
use gdc_core::eval::{self, LabelProb, PredictionRecord};
use gdc_core::gmm::fit_archive;
use gdc_core::GdcError;
use proptest::prelude::*;
use rand::Rng;

fn sample_archive(seed: u64, d: usize, classes: &[(&str, usize)]) -> EmbeddingArchive {
    let mut rng = rng(seed);
    let mut a = EmbeddingArchive::new(d).unwrap();
    for (label, n) in classes {
        a.push_class(*label, (0..n * d).map(|_| rng.random_range(-3.0f32..3.0)).collect()).unwrap();
    }
    a
}

fn model_bytes(a: &EmbeddingArchive, eps: f64) -> Vec<u8> {
    let mut out = Vec::new();
    archive::write_model(&fit_archive::<f64>(a, eps).unwrap(), &mut out).unwrap();
    out
}

#[test]
fn embeddings_survive_the_file_system() {
    let a = sample_archive(51, 7, &[("tench", 12), ("goldfish", 9), ("great white shark", 10)]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("refs.gdce");
    archive::save_embeddings(&a, &path).unwrap();
    let back = archive::load_embeddings(&path).unwrap();
    assert_eq!(back, a);
    let mut first = Vec::new();
    archive::write_embeddings(&a, &mut first).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn model_round_trip_is_bitwise() {
    let a = sample_archive(52, 3, &[("a", 20), ("b", 25)]);
    let bytes = model_bytes(&a, 1e-8);
    let model = archive::decode_model(&bytes).unwrap();
    let mut again = Vec::new();
    archive::write_model(&model, &mut again).unwrap();
    assert_eq!(bytes, again);
    // Header: magic, version, d, k, eps.
    assert_eq!(&bytes[..4], b"GDCM");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), FORMAT_VERSION);
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
    assert_eq!(f64::from_le_bytes(bytes[14..22].try_into().unwrap()), 1e-8);
    let per_class = 2 + 1 + 8 + 4 + 3 * 8 + 6 * 8 + 8;
    assert_eq!(bytes.len(), 22 + 2 * per_class);
}

#[test]
fn fitting_is_deterministic() {
    let a = sample_archive(53, 5, &[("x", 30), ("y", 30)]);
    assert_eq!(model_bytes(&a, 1e-6), model_bytes(&a, 1e-6));
}

#[test]
fn reloaded_model_scores_identically() {
    let a = sample_archive(54, 6, &[("p", 40), ("q", 40), ("r", 40)]);
    let model = fit_archive::<f64>(&a, 1e-8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gdcm");
    archive::save_model(&model, &path).unwrap();
    let loaded = archive::load_model(&path).unwrap();
    assert_eq!(loaded.labels().collect::<Vec<_>>(), vec!["p", "q", "r"]);
    let mut rng = rng(55);
    for _ in 0..100 {
        let e: Vec<f64> = (0..6).map(|_| rng.random_range(-4.0..4.0)).collect();
        assert_eq!(model.posterior(&e).unwrap(), loaded.posterior(&e).unwrap());
    }
}

#[test]
fn version_bump_is_rejected() {
    let a = sample_archive(56, 2, &[("a", 2)]);
    let mut emb = Vec::new();
    archive::write_embeddings(&a, &mut emb).unwrap();
    emb[4] = 2;
    assert!(matches!(archive::decode_embeddings(&emb), Err(GdcError::UnsupportedVersion { offset: 4, version: 2 })));
    let mut model = model_bytes(&sample_archive(57, 2, &[("a", 5)]), 1e-8);
    model[4] = 2;
    assert!(matches!(archive::decode_model(&model), Err(GdcError::UnsupportedVersion { offset: 4, version: 2 })));
}

#[test]
fn damaged_model_files_are_rejected() {
    let a = sample_archive(58, 2, &[("a", 6), ("b", 6)]);
    let bytes = model_bytes(&a, 1e-8);
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(archive::decode_model(&magic), Err(GdcError::BadMagic { offset: 0, .. })));
    assert!(matches!(archive::decode_model(&bytes[..bytes.len() - 3]), Err(GdcError::TruncatedFile { .. })));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(archive::decode_model(&trailing), Err(GdcError::Malformed { .. })));
    // First prior sits right after the header and the one-byte label.
    let prior_at = 22 + 2 + 1;
    let mut prior = bytes.clone();
    prior[prior_at..prior_at + 8].copy_from_slice(&0.9f64.to_le_bytes());
    assert!(matches!(archive::decode_model(&prior), Err(GdcError::Malformed { offset: 0, .. })));
    let mut nan = bytes.clone();
    nan[prior_at..prior_at + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(archive::decode_model(&nan).is_err());
    let mut zero_d = bytes;
    zero_d[6..10].copy_from_slice(&0u32.to_le_bytes());
    assert!(matches!(archive::decode_model(&zero_d), Err(GdcError::FileDimensionMismatch { offset: 6, .. })));
}

#[test]
fn mixed_eps_models_cannot_be_written() {
    let a = fit_archive::<f64>(&sample_archive(59, 2, &[("a", 6)]), 1e-8).unwrap();
    let b = fit_archive::<f64>(&sample_archive(60, 2, &[("b", 6)]), 1e-4).unwrap();
    let comps = vec![a.components()[0].clone(), b.components()[0].clone()];
    let mixed = gdc_core::GdcModel::assemble(comps, None).unwrap();
    assert!(archive::write_model(&mixed, &mut Vec::new()).is_err());
}

#[test]
fn manifest_file_round_trip() {
    let labels: Vec<String> = ["tench", "goldfish"].iter().map(|s| s.to_string()).collect();
    let m = archive::expand_manifest(&labels, &archive::default_templates(), 30, 3).unwrap();
    assert_eq!(m.entries.len(), 16);
    assert_eq!(m.total_images(), 480);
    let seeds: std::collections::HashSet<u64> = m.entries.iter().map(|e| e.seed).collect();
    assert_eq!(seeds.len(), 16);
    let mut buf = Vec::new();
    archive::write_manifest(&m, &mut buf).unwrap();
    assert_eq!(archive::read_manifest(&buf[..]).unwrap(), m.entries);
    let again = archive::expand_manifest(&labels, &archive::default_templates(), 30, 3).unwrap();
    assert_eq!(again, m);
}

#[test]
fn predictions_tally() {
    let rec = |i: usize, t: &str, p: &str, rank: usize| PredictionRecord {
        index: i,
        true_label: t.into(),
        predicted: p.into(),
        true_rank: Some(rank),
        top_k: vec![LabelProb { label: p.into(), prob: 0.9 }],
    };
    let records = vec![rec(0, "a", "a", 1), rec(1, "a", "b", 2), rec(2, "b", "b", 1), rec(3, "b", "a", 7)];
    let mut buf = Vec::new();
    records.iter().for_each(|r| eval::write_prediction(&mut buf, r).unwrap());
    let back = eval::read_predictions(&buf[..]).unwrap();
    assert_eq!(back, records);
    let report = eval::evaluate(&back).unwrap();
    assert_eq!(report.total, 4);
    assert_eq!(report.top1, 0.5);
    assert_eq!(report.top5, 0.75);
    assert_eq!(report.per_class.iter().map(|c| c.correct).collect::<Vec<_>>(), vec![1, 1]);
    assert_eq!(report.confused.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_archive_round_trips(
        d in 1usize..10,
        blocks in prop::collection::vec(("[a-z ]{1,12}", 0usize..6), 0..5),
        seed in any::<u64>(),
    ) {
        let mut rng = rng(seed);
        let mut a = EmbeddingArchive::new(d).unwrap();
        let mut seen = std::collections::HashSet::new();
        for (label, n) in blocks {
            if label.trim().is_empty() || !seen.insert(label.clone()) {
                continue;
            }
            let values = (0..n * d).map(|_| f32::from_bits(rng.random::<u32>() & 0x3fff_ffff)).collect();
            if a.push_class(label, values).is_err() {
                continue;
            }
        }
        let mut bytes = Vec::new();
        archive::write_embeddings(&a, &mut bytes).unwrap();
        let back = archive::decode_embeddings(&bytes).unwrap();
        let mut again = Vec::new();
        archive::write_embeddings(&back, &mut again).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn truncation_is_always_detected(cut in 0usize..100) {
        let a = sample_archive(61, 3, &[("a", 3), ("b", 4)]);
        let mut bytes = Vec::new();
        archive::write_embeddings(&a, &mut bytes).unwrap();
        let cut = cut % bytes.len();
        prop_assert!(archive::decode_embeddings(&bytes[..cut]).is_err());
    }
}
