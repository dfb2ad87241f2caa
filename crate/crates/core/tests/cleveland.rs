use std::path::PathBuf;

use resgru_core::data::{load_cleveland, plan_folds, ColumnKind, Dataset, PrepConfig, Preprocessor};
use resgru_core::eval::{run_cv, CvOptions, Protocol};
use resgru_core::model::{ModelConfig, TrainedModel, Variant};

fn cleveland() -> Dataset {
    load_cleveland(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/processed.cleveland.data")).unwrap()
}

#[test]
fn file_has_expected_size_and_prevalence() {
    let ds = cleveland();
    assert_eq!(ds.len(), 303);
    assert_eq!(ds.positives(), 139);
    let missing: Vec<(String, usize)> = ds
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| (c.name.clone(), ds.rows.iter().filter(|r| r[j].is_none()).count()))
        .filter(|(_, n)| *n > 0)
        .collect();
    assert_eq!(missing, vec![("ca".to_string(), 4), ("thal".to_string(), 2)]);
}

#[test]
fn full_fit_encodes_to_28_columns() {
    let ds = cleveland();
    let mut prep = Preprocessor::new(&ds.schema, &PrepConfig::default()).unwrap();
    let x = prep.fit_transform(&ds.rows).unwrap();
    assert_eq!(x.shape(), (303, 28));
    let stats = prep.fitted().unwrap();
    let cp: Vec<&String> = stats.encoded.iter().filter(|n| n.starts_with("cp=")).collect();
    assert_eq!(cp.len(), 4);
    // Binary categoricals keep both indicators.
    assert_eq!(stats.encoded.iter().filter(|n| n.starts_with("sex=")).count(), 2);
    assert_eq!(stats.encoded.iter().filter(|n| n.starts_with("thal=")).count(), 3);
    assert!(x.is_finite());
}

#[test]
fn treating_a_categorical_as_numeric_narrows_the_encoding() {
    let ds = cleveland();
    let mut cfg = PrepConfig::default();
    cfg.kinds.insert("ca".into(), ColumnKind::Numeric);
    let mut prep = Preprocessor::new(&ds.schema, &cfg).unwrap();
    assert_eq!(prep.fit_transform(&ds.rows).unwrap().cols(), 28 - 4 + 1);
}

#[test]
fn fitted_statistics_ignore_every_non_training_row() {
    let ds = cleveland();
    for seed in [0, 7] {
        let plan = plan_folds(&ds.y, 5, seed).unwrap();
        for fold in &plan.folds {
            let mut prep = Preprocessor::new(&ds.schema, &PrepConfig::default()).unwrap();
            prep.fit_transform(&ds.select_rows(&fold.train)).unwrap();
            let mut poisoned = ds.clone();
            for &i in fold.test.iter().chain(&fold.validation) {
                poisoned.rows[i].iter_mut().for_each(|c| *c = c.map(|v| v * -313.0 + 1e6));
            }
            let mut again = Preprocessor::new(&ds.schema, &PrepConfig::default()).unwrap();
            again.fit_transform(&poisoned.select_rows(&fold.train)).unwrap();
            assert_eq!(prep.fitted(), again.fitted());
        }
    }
}

#[test]
fn kept_fold_model_survives_a_save_load_cycle() {
    let ds = cleveland();
    let cfg = ModelConfig {
        d_model: 8,
        blocks: 1,
        attn_layers: 1,
        heads: 2,
        epochs: 2,
        ..ModelConfig::default()
    };
    let opts = CvOptions {
        keep_models: true,
        ..CvOptions::default()
    };
    let (_, results) = run_cv(&ds, &Protocol::default(), &cfg, Variant::Full, &[3], &opts).unwrap();
    let r = &results[0];
    let model = r.model.as_ref().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fold0.bin");
    model.save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    let p = loaded.predict_raw(&ds.select_rows(&r.test_indices)).unwrap();
    assert_eq!(p, r.test_probs);
    assert_eq!(loaded.threshold, r.record.tau);
}
