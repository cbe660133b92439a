use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{build_batch, build_inference_batch, loss, CeciModel, Mode, DEFAULT_HIDDEN};
use crate::catalog::ClassCatalog;
use crate::dataset::{encode, DatasetSample, FeatureMatrix};
use crate::error::ModelError;
use crate::rng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// How `weight_decay` is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Decoupled weight decay: `p ← p − lr·wd·p` after every Adam step.
    #[default]
    WeightDecay,
    /// Time-based learning-rate schedule `lr / (1 + wd·t)`, no weight decay.
    LrSchedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            batch_size: 24,
            learning_rate: 0.01,
            weight_decay: 5e-6,
            decay_mode: DecayMode::WeightDecay,
            dropout: 0.5,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

/// One supervised pair: partial-graph features and ground-truth features.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: FeatureMatrix,
    pub target: FeatureMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_ms: f64,
    pub param_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Eval-mode MSE of the untrained model on the training split.
    pub initial_train_mse: f64,
    /// Validation MSE of the untrained model.
    pub initial_val_mse: f64,
    pub initial_param_norm: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    pub fn best_val_mse(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_mse)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,wall_ms,param_norm\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:.3},{}\n",
                r.epoch, r.train_mse, r.val_mse, r.wall_ms, r.param_norm
            ));
        }
        out
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(model: &CeciModel) -> Self {
        let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut CeciModel, grads: &[&[f64]], config: &TrainConfig) {
        self.t += 1;
        let t = self.t as f64;
        let (lr, wd) = match config.decay_mode {
            DecayMode::WeightDecay => (config.learning_rate, config.weight_decay),
            DecayMode::LrSchedule => (config.learning_rate / (1.0 + config.weight_decay * (t - 1.0)), 0.0),
        };
        let bc1 = 1.0 - BETA1.powf(t);
        let bc2 = 1.0 - BETA2.powf(t);
        for (k, p) in model.parameters_mut().into_iter().enumerate() {
            let g = grads[k];
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + wd * p[i]);
            }
        }
    }
}

/// Eval-mode MSE of `model` over all entries of `examples`.
pub fn dataset_mse(model: &CeciModel, examples: &[Example], batch_size: usize) -> Result<f64, ModelError> {
    let mut sq = 0.0;
    let mut count = 0usize;
    for chunk in examples.chunks(batch_size.max(1)) {
        let inputs: Vec<&FeatureMatrix> = chunk.iter().map(|e| &e.input).collect();
        let batch = build_inference_batch(&inputs)?;
        let pred = model.predict(&batch)?;
        let mut row = 0;
        for e in chunk {
            let n = e.target.rows();
            let block = pred.slice(ndarray::s![row..row + n, ..]).to_owned();
            sq += loss(&block, &e.target.values)? * block.len() as f64;
            count += block.len();
            row += n;
        }
    }
    Ok(if count == 0 { 0.0 } else { sq / count as f64 })
}

/// One example per partial: (encoded partial, encoded ground truth).
pub fn examples_from_samples(samples: &[DatasetSample]) -> Result<Vec<Example>, ModelError> {
    let mut out = Vec::new();
    for s in samples {
        let target = encode(&s.ground_truth).map_err(|e| ModelError::Shape(format!("{}: {e}", s.source_id)))?;
        for p in &s.partials {
            let input = encode(p).map_err(|e| ModelError::Shape(format!("{}: {e}", s.source_id)))?;
            out.push(Example {
                input,
                target: target.clone(),
            });
        }
    }
    Ok(out)
}

/// [`train_with_observer`] without an observer.
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    catalog: &ClassCatalog,
    config: &TrainConfig,
) -> Result<(CeciModel, TrainLog), ModelError> {
    train_with_observer(train_set, val_set, catalog, config, |_| {})
}

/// Mini-batch Adam on MSE. Returns the parameters of the epoch with the
/// lowest validation MSE (quantized to `f32`), and calls `observe` after
/// every completed epoch.
pub fn train_with_observer(
    train_set: &[Example],
    val_set: &[Example],
    catalog: &ClassCatalog,
    config: &TrainConfig,
    mut observe: impl FnMut(&EpochRecord),
) -> Result<(CeciModel, TrainLog), ModelError> {
    config.check()?;
    if train_set.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptySplit("validation"));
    }
    let mut model = CeciModel::new(catalog, config.hidden, config.dropout, config.seed)?;
    let mut log = TrainLog {
        initial_train_mse: dataset_mse(&model, train_set, config.batch_size)?,
        initial_val_mse: dataset_mse(&model, val_set, config.batch_size)?,
        initial_param_norm: model.parameter_norm(),
        ..TrainLog::default()
    };
    let mut best: Option<(f64, CeciModel)> = None;
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut rng::derive(config.seed, &format!("shuffle-{epoch}")));
        let mut dropout_rng = rng::derive(config.seed, &format!("dropout-{epoch}"));
        let mut sq = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let pairs: Vec<(&FeatureMatrix, &FeatureMatrix)> = chunk
                .iter()
                .map(|&i| (&train_set[i].input, &train_set[i].target))
                .collect();
            let batch = build_batch(&pairs)?;
            let pass = model.forward(&batch, Mode::Train, &mut dropout_rng)?;
            let target = batch.targets.as_ref().expect("training batch has targets");
            let batch_loss = loss(&pass.output, target)?;
            if !batch_loss.is_finite() {
                return Err(ModelError::Diverged { epoch, loss: batch_loss });
            }
            sq += batch_loss * pass.output.len() as f64;
            count += pass.output.len();
            let grads = model.backward(&batch, &pass)?;
            adam.step(&mut model, &grads.slices(), config);
            model.update_running_stats(&pass.batch_stats);
        }
        let train_mse = sq / count as f64;
        let val_mse = dataset_mse(&model, val_set, config.batch_size)?;
        if !val_mse.is_finite() || !model.is_finite() {
            return Err(ModelError::Diverged { epoch, loss: val_mse });
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            param_norm: model.parameter_norm(),
        };
        observe(&record);
        log.epochs.push(record);
        if best.as_ref().is_none_or(|(b, _)| val_mse < *b) {
            best = Some((val_mse, model.clone()));
            log.best_epoch = Some(epoch);
        }
    }
    let mut model = best.map_or(model, |(_, m)| m);
    model.quantize();
    Ok((model, log))
}
