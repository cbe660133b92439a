use std::sync::Arc;

use bsg_core::ceci::{
    checkpoint, dataset_mse, examples_from_samples, train, train_with_observer, CeciModel, DecayMode, Example,
    TrainConfig,
};
use bsg_core::dataset::{split, synthetic_samples, FeatureMatrix, SynthConfig};
use bsg_core::error::ModelError;
use bsg_core::{ClassCatalog, NodeId};
use ndarray::Array2;

fn corpus(count: i64, seed: u64) -> (Arc<ClassCatalog>, Vec<Example>, Vec<Example>) {
    let catalog = Arc::new(ClassCatalog::default_catalog());
    let config = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let samples = synthetic_samples(&config, count, 3, 0.5, &catalog).unwrap();
    let parts = split(samples, seed).unwrap();
    (
        catalog,
        examples_from_samples(&parts.train).unwrap(),
        examples_from_samples(&parts.val).unwrap(),
    )
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        hidden: 32,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn two_hundred_epochs_halve_train_mse() {
    let (catalog, tr, va) = corpus(60, 11);
    let (model, log) = train(&tr, &va, &catalog, &quick(200)).unwrap();
    assert_eq!(log.epochs.len(), 200);
    let final_train = dataset_mse(&model, &tr, 24).unwrap();
    assert!(
        final_train < 0.5 * log.initial_train_mse,
        "train mse {final_train} vs initial {}",
        log.initial_train_mse
    );
    assert!(model.is_quantized());
    let best = log.best_epoch.unwrap();
    assert!(log.epochs.iter().all(|r| r.val_mse >= log.epochs[best].val_mse));
}

#[test]
fn returned_model_is_best_validation_epoch() {
    let (catalog, tr, va) = corpus(30, 5);
    let (model, log) = train(&tr, &va, &catalog, &quick(25)).unwrap();
    let val = dataset_mse(&model, &va, 24).unwrap();
    // quantization moves the value by f32 rounding only
    let best = log.best_val_mse().unwrap();
    assert!((val - best).abs() <= 1e-3 * best.max(1.0), "{val} vs {best}");
}

#[test]
fn training_is_deterministic() {
    let (catalog, tr, va) = corpus(20, 1);
    let (m1, l1) = train(&tr, &va, &catalog, &quick(6)).unwrap();
    let (m2, l2) = train(&tr, &va, &catalog, &quick(6)).unwrap();
    let strip = |l: &bsg_core::ceci::TrainLog| {
        l.epochs
            .iter()
            .map(|r| (r.epoch, r.train_mse.to_bits(), r.val_mse.to_bits(), r.param_norm.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&l1), strip(&l2));
    assert_eq!(l1.best_epoch, l2.best_epoch);
    assert_eq!(checkpoint::to_bytes(&m1).unwrap(), checkpoint::to_bytes(&m2).unwrap());
}

#[test]
fn zero_epochs_returns_initial_model() {
    let (catalog, tr, va) = corpus(12, 2);
    let config = quick(0);
    let (model, log) = train(&tr, &va, &catalog, &config).unwrap();
    assert!(log.epochs.is_empty());
    assert_eq!(log.best_epoch, None);
    assert_eq!(model, CeciModel::new(&catalog, config.hidden, config.dropout, config.seed).unwrap());
}

#[test]
fn empty_splits_rejected() {
    let (catalog, tr, va) = corpus(12, 2);
    assert!(matches!(train(&[], &va, &catalog, &quick(1)), Err(ModelError::EmptySplit(_))));
    assert!(matches!(train(&tr, &[], &catalog, &quick(1)), Err(ModelError::EmptySplit(_))));
}

fn zero_examples(classes: usize, k: usize) -> Vec<Example> {
    (0..k)
        .map(|i| {
            let rows = 2 + i % 3;
            let fm = FeatureMatrix {
                row_ids: (0..rows).map(|r| NodeId::new(format!("n{r}"))).collect(),
                values: Array2::zeros((rows, classes)),
                edges: (1..rows).map(|r| (0, r)).collect(),
            };
            Example {
                input: fm.clone(),
                target: fm,
            }
        })
        .collect()
}

#[test]
fn weight_decay_shrinks_norm_on_zero_information_data() {
    let catalog = ClassCatalog::new(["a", "b", "c", "d"]).unwrap();
    let data = zero_examples(4, 10);
    let config = TrainConfig {
        epochs: 30,
        batch_size: 4,
        weight_decay: 0.5,
        hidden: 8,
        ..TrainConfig::default()
    };
    let mut norms = Vec::new();
    let (_, log) = train_with_observer(&data, &data, &catalog, &config, |r| norms.push(r.param_norm)).unwrap();
    assert_eq!(norms.len(), 30);
    let mut prev = log.initial_param_norm;
    for n in norms {
        assert!(n < prev, "{n} !< {prev}");
        prev = n;
    }
    assert!(prev < log.initial_param_norm * 0.95);
}

#[test]
fn lr_schedule_mode_leaves_zero_information_model_untouched() {
    let catalog = ClassCatalog::new(["a", "b", "c"]).unwrap();
    let data = zero_examples(3, 6);
    let config = TrainConfig {
        epochs: 5,
        batch_size: 3,
        weight_decay: 0.5,
        decay_mode: DecayMode::LrSchedule,
        hidden: 4,
        ..TrainConfig::default()
    };
    let (_, log) = train(&data, &data, &catalog, &config).unwrap();
    assert!(log.epochs.iter().all(|r| r.param_norm == log.initial_param_norm));
}

#[test]
fn invalid_config_rejected() {
    let (catalog, tr, va) = corpus(12, 2);
    for bad in [
        TrainConfig { batch_size: 0, ..quick(1) },
        TrainConfig { dropout: 1.0, ..quick(1) },
        TrainConfig { learning_rate: f64::NAN, ..quick(1) },
    ] {
        assert!(matches!(train(&tr, &va, &catalog, &bad), Err(ModelError::Config(_))));
    }
}
