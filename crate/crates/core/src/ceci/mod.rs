//! CECI: a five-layer graph convolutional network mapping partial-graph
//! histograms of the building and room nodes to predicted full histograms.
//!
//! Layers 1–4 compute `Dropout(ReLU(BatchNorm(Â H W + b)))`; layer 5 is the
//! linear map `Â H W + b`. Gradients are computed by hand in [`CeciModel::backward`].

mod batch;
pub mod checkpoint;
mod train;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::Rng as _;

use crate::catalog::ClassCatalog;
use crate::dataset::encode;
use crate::error::ModelError;
use crate::graph::{NodeId, SceneGraph};
use crate::rng::{self, Rng};

pub use batch::{build_batch, build_inference_batch, GraphBatch, NormalizedAdjacency};
pub use train::{
    dataset_mse, examples_from_samples, train, train_with_observer, DecayMode, EpochRecord, Example,
    TrainConfig, TrainLog,
};

pub const LAYERS: usize = 5;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct GcnLayer {
    /// in × out
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout; outputs are not clamped.
    Train,
    /// Running statistics, no dropout, outputs clamped at 0.
    Eval,
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Clone, Debug)]
struct LayerCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Batch-norm output before ReLU.
    normed: Array2<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)); `None` when dropout is off.
    mask: Option<Array2<f64>>,
}

/// Mean and unbiased variance of one batch-norm input, for running-stat updates.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    pub biased_var: Array1<f64>,
    pub unbiased_var: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub output: Array2<f64>,
    /// Train mode only.
    pub batch_stats: Vec<BatchStats>,
    cache: Option<(Vec<LayerCache>, Array2<f64>)>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub gammas: Vec<Array1<f64>>,
    pub betas: Vec<Array1<f64>>,
}

impl Gradients {
    /// Flat views in [`CeciModel::parameters`] order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(LAYERS * 4);
        for l in 0..LAYERS {
            out.push(self.weights[l].as_slice().expect("standard layout"));
            out.push(self.biases[l].as_slice().expect("standard layout"));
            if l < LAYERS - 1 {
                out.push(self.gammas[l].as_slice().expect("standard layout"));
                out.push(self.betas[l].as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|g| *g == 0.0))
    }
}

/// Mean squared error over all entries.
pub fn loss(prediction: &Array2<f64>, target: &Array2<f64>) -> Result<f64, ModelError> {
    if prediction.dim() != target.dim() {
        return Err(ModelError::Shape(format!(
            "prediction {:?} vs target {:?}",
            prediction.dim(),
            target.dim()
        )));
    }
    if prediction.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = Zip::from(prediction)
        .and(target)
        .fold(0.0, |acc, p, t| acc + (p - t) * (p - t));
    Ok(sq / prediction.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CeciModel {
    pub layers: Vec<GcnLayer>,
    /// One per hidden layer (the output layer has none).
    pub norms: Vec<BatchNorm>,
    pub dropout: f64,
    pub fingerprint: [u8; 32],
}

fn snap(x: f64) -> f64 {
    x as f32 as f64
}

impl CeciModel {
    /// Glorot-uniform weights, zero biases, γ = 1, β = 0.
    pub fn new(catalog: &ClassCatalog, hidden: usize, dropout: f64, seed: u64) -> Result<Self, ModelError> {
        Self::with_dims(catalog.len(), hidden, dropout, catalog.fingerprint(), seed)
    }

    pub fn with_dims(
        classes: usize,
        hidden: usize,
        dropout: f64,
        fingerprint: [u8; 32],
        seed: u64,
    ) -> Result<Self, ModelError> {
        if classes == 0 || hidden == 0 {
            return Err(ModelError::Config("classes and hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(ModelError::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = rng::derive(seed, "init");
        let dims = Self::layer_dims(classes, hidden);
        let layers = dims
            .iter()
            .map(|&(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let u = Uniform::new_inclusive(-limit, limit);
                GcnLayer {
                    weight: Array2::from_shape_simple_fn((fan_in, fan_out), || snap(u.sample(&mut rng))),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layers,
            norms: (0..LAYERS - 1).map(|_| BatchNorm::new(hidden)).collect(),
            dropout,
            fingerprint,
        })
    }

    fn layer_dims(classes: usize, hidden: usize) -> [(usize, usize); LAYERS] {
        [
            (classes, hidden),
            (hidden, hidden),
            (hidden, hidden),
            (hidden, hidden),
            (hidden, classes),
        ]
    }

    pub fn classes(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint)
    }

    pub fn check_catalog(&self, catalog: &ClassCatalog) -> Result<(), ModelError> {
        if catalog.len() != self.classes() {
            return Err(ModelError::Shape(format!(
                "model has {} classes, catalog has {}",
                self.classes(),
                catalog.len()
            )));
        }
        if catalog.fingerprint() != self.fingerprint {
            return Err(ModelError::CatalogMismatch {
                model: self.fingerprint_hex()[..12].to_owned(),
                catalog: catalog.fingerprint_hex()[..12].to_owned(),
            });
        }
        Ok(())
    }

    /// Trainable parameters: per layer `W, b` then (hidden layers) `γ, β`.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(LAYERS * 4);
        for l in 0..LAYERS {
            out.push(self.layers[l].weight.as_slice().expect("standard layout"));
            out.push(self.layers[l].bias.as_slice().expect("standard layout"));
            if l < LAYERS - 1 {
                out.push(self.norms[l].gamma.as_slice().expect("standard layout"));
                out.push(self.norms[l].beta.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(LAYERS * 4);
        let mut norms = self.norms.iter_mut();
        for layer in self.layers.iter_mut() {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            if let Some(norm) = norms.next() {
                out.push(norm.gamma.as_slice_mut().expect("standard layout"));
                out.push(norm.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// L2 norm over all trainable parameters.
    pub fn parameter_norm(&self) -> f64 {
        self.parameters()
            .iter()
            .flat_map(|p| p.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|x| x.is_finite()))
            && self
                .norms
                .iter()
                .all(|n| n.running_mean.iter().chain(n.running_var.iter()).all(|x| x.is_finite()))
    }

    /// Rounds every stored value to the nearest `f32`, the checkpoint precision.
    pub fn quantize(&mut self) {
        for p in self.parameters_mut() {
            p.iter_mut().for_each(|x| *x = snap(*x));
        }
        for n in &mut self.norms {
            n.running_mean.mapv_inplace(snap);
            n.running_var.mapv_inplace(snap);
        }
    }

    pub fn is_quantized(&self) -> bool {
        self.parameters()
            .iter()
            .flat_map(|p| p.iter())
            .chain(self.norms.iter().flat_map(|n| n.running_mean.iter().chain(n.running_var.iter())))
            .all(|&x| snap(x) == x)
    }

    fn check_batch(&self, batch: &GraphBatch) -> Result<(), ModelError> {
        if batch.classes() != self.classes() {
            return Err(ModelError::Shape(format!(
                "batch has {} classes, model expects {}",
                batch.classes(),
                self.classes()
            )));
        }
        if batch.adjacency.size() != batch.rows() {
            return Err(ModelError::Shape("adjacency size differs from row count".into()));
        }
        Ok(())
    }

    /// Eval-mode prediction (clamped at 0).
    pub fn predict(&self, batch: &GraphBatch) -> Result<Array2<f64>, ModelError> {
        let mut unused = rng::seeded(0);
        Ok(self.forward(batch, Mode::Eval, &mut unused)?.output)
    }

    /// Runs the network. `rng` drives dropout in train mode and is untouched in eval mode.
    pub fn forward(&self, batch: &GraphBatch, mode: Mode, rng: &mut Rng) -> Result<ForwardPass, ModelError> {
        self.check_batch(batch)?;
        let q = batch.rows() as f64;
        let mut h = batch.features.clone();
        let mut caches = Vec::with_capacity(LAYERS - 1);
        let mut stats = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = batch.adjacency.matmul(h.dot(&layer.weight).view());
            z += &layer.bias;
            if l == LAYERS - 1 {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFinite { layer: l + 1 });
                }
                let (output, cache) = match mode {
                    Mode::Train => (z.clone(), Some((caches, h))),
                    Mode::Eval => (z.mapv(|v| v.max(0.0)), None),
                };
                return Ok(ForwardPass {
                    output,
                    batch_stats: stats,
                    cache,
                });
            }
            let norm = &self.norms[l];
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = z.var_axis(Axis(0), 0.0);
                    let unbiased = if batch.rows() > 1 { &var * (q / (q - 1.0)) } else { var.clone() };
                    stats.push(BatchStats {
                        mean: mean.clone(),
                        biased_var: var.clone(),
                        unbiased_var: unbiased,
                    });
                    (mean, var)
                }
                Mode::Eval => (norm.running_mean.clone(), norm.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = (&z - &mean) * &inv_std;
            let normed = &xhat * &norm.gamma + &norm.beta;
            let mut act = normed.mapv(|v| v.max(0.0));
            let mask = match mode {
                Mode::Train if self.dropout > 0.0 => {
                    let keep = 1.0 - self.dropout;
                    let m = Array2::from_shape_simple_fn(act.dim(), || {
                        if rng.gen_bool(keep) {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    act *= &m;
                    Some(m)
                }
                _ => None,
            };
            if act.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { layer: l + 1 });
            }
            if mode == Mode::Train {
                caches.push(LayerCache {
                    input: std::mem::replace(&mut h, act),
                    xhat,
                    inv_std,
                    normed,
                    mask,
                });
            } else {
                h = act;
            }
        }
        unreachable!("output layer returns")
    }

    /// Exact gradients of the MSE loss for a train-mode pass over `batch`.
    pub fn backward(&self, batch: &GraphBatch, pass: &ForwardPass) -> Result<Gradients, ModelError> {
        let (caches, last_input) = pass.cache.as_ref().ok_or(ModelError::NoCache)?;
        let target = batch
            .targets
            .as_ref()
            .ok_or_else(|| ModelError::Shape("batch has no targets".into()))?;
        if target.dim() != pass.output.dim() {
            return Err(ModelError::Shape("target/output mismatch".into()));
        }
        let scale = 2.0 / pass.output.len() as f64;
        let mut dz = (&pass.output - target) * scale;

        let mut weights = vec![Array2::zeros((0, 0)); LAYERS];
        let mut biases = vec![Array1::zeros(0); LAYERS];
        let mut gammas = vec![Array1::zeros(0); LAYERS - 1];
        let mut betas = vec![Array1::zeros(0); LAYERS - 1];
        let q = batch.rows() as f64;

        for l in (0..LAYERS).rev() {
            let input = if l == LAYERS - 1 { last_input } else { &caches[l].input };
            // Z = Â (H W) + b, Â symmetric
            let g = batch.adjacency.matmul(dz.view());
            weights[l] = input.t().dot(&g);
            biases[l] = dz.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut da = g.dot(&self.layers[l].weight.t());
            // back through layer l-1's dropout, ReLU and batch norm
            let c = &caches[l - 1];
            let norm = &self.norms[l - 1];
            if let Some(mask) = &c.mask {
                da *= mask;
            }
            Zip::from(&mut da).and(&c.normed).for_each(|d, &y| {
                if y <= 0.0 {
                    *d = 0.0;
                }
            });
            gammas[l - 1] = (&da * &c.xhat).sum_axis(Axis(0));
            betas[l - 1] = da.sum_axis(Axis(0));
            let dxhat = &da * &norm.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &c.xhat).sum_axis(Axis(0));
            dz = (&dxhat * q - &sum_dxhat - &c.xhat * &sum_dxhat_xhat) * &(&c.inv_std / q);
        }
        Ok(Gradients {
            weights,
            biases,
            gammas,
            betas,
        })
    }

    /// Folds train-mode batch statistics into the running averages.
    pub fn update_running_stats(&mut self, stats: &[BatchStats]) {
        for (norm, s) in self.norms.iter_mut().zip(stats) {
            norm.running_mean = &norm.running_mean * (1.0 - BN_MOMENTUM) + &s.mean * BN_MOMENTUM;
            norm.running_var = &norm.running_var * (1.0 - BN_MOMENTUM) + &s.unbiased_var * BN_MOMENTUM;
        }
    }
}

/// Predicted histograms (E″ × O″, before rounding) for every building and room node.
pub fn predict_histograms(
    model: &CeciModel,
    partial: &SceneGraph,
    catalog: &ClassCatalog,
) -> Result<BTreeMap<NodeId, Vec<f64>>, ModelError> {
    model.check_catalog(catalog)?;
    if partial.catalog().labels() != catalog.labels() {
        return Err(ModelError::CatalogMismatch {
            model: model.fingerprint_hex()[..12].to_owned(),
            catalog: partial.catalog().fingerprint_hex()[..12].to_owned(),
        });
    }
    let features = encode(partial).map_err(|e| match e {
        crate::error::DatasetError::Graph(g) => ModelError::Graph(g),
        other => ModelError::Shape(other.to_string()),
    })?;
    let batch = build_inference_batch(&[&features])?;
    let out = model.predict(&batch)?;
    Ok(features
        .row_ids
        .into_iter()
        .zip(out.outer_iter())
        .map(|(id, row)| (id, row.to_vec()))
        .collect())
}
