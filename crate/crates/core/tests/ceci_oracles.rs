use bsg_core::ceci::{build_batch, loss, CeciModel, GraphBatch, Mode, NormalizedAdjacency, BN_EPS, LAYERS};
use bsg_core::dataset::FeatureMatrix;
use bsg_core::rng;
use bsg_core::NodeId;
use ndarray::{array, Array1, Array2};
use rand::Rng;

fn features(values: Array2<f64>, edges: Vec<(usize, usize)>) -> FeatureMatrix {
    FeatureMatrix {
        row_ids: (0..values.nrows()).map(|i| NodeId::new(format!("n{i}"))).collect(),
        values,
        edges,
    }
}

fn random_model(classes: usize, hidden: usize, dropout: f64, seed: u64) -> CeciModel {
    let mut m = CeciModel::with_dims(classes, hidden, dropout, [0; 32], seed).unwrap();
    let mut r = rng::derive(seed, "perturb");
    for p in m.parameters_mut() {
        for x in p.iter_mut() {
            *x += r.gen_range(-0.5..0.5);
        }
    }
    m
}

fn random_batch(classes: usize, nodes: usize, seed: u64) -> GraphBatch {
    let mut r = rng::derive(seed, "batch");
    let x = Array2::from_shape_simple_fn((nodes, classes), || r.gen_range(0..4) as f64);
    let y = Array2::from_shape_simple_fn((nodes, classes), || r.gen_range(0..5) as f64);
    let edges: Vec<(usize, usize)> = (1..nodes).map(|i| (0, i)).collect();
    let input = features(x, edges.clone());
    let target = features(y, edges);
    build_batch(&[(&input, &target)]).unwrap()
}

fn train_loss(model: &CeciModel, batch: &GraphBatch, dropout_seed: u64) -> f64 {
    let pass = model.forward(batch, Mode::Train, &mut rng::seeded(dropout_seed)).unwrap();
    loss(&pass.output, batch.targets.as_ref().unwrap()).unwrap()
}

/// Max relative error between analytic and central-difference gradients.
fn gradient_check(model: &CeciModel, batch: &GraphBatch, dropout_seed: u64, eps: f64) -> (f64, usize) {
    let pass = model.forward(batch, Mode::Train, &mut rng::seeded(dropout_seed)).unwrap();
    let grads = model.backward(batch, &pass).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let tensors = model.parameters().len();
    for t in 0..tensors {
        for i in 0..analytic[t].len() {
            let mut plus = model.clone();
            plus.parameters_mut()[t][i] += eps;
            let mut minus = model.clone();
            minus.parameters_mut()[t][i] -= eps;
            let numeric = (train_loss(&plus, batch, dropout_seed) - train_loss(&minus, batch, dropout_seed)) / (2.0 * eps);
            let g = analytic[t][i];
            let rel = (g - numeric).abs() / (g.abs() + 1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

#[test]
fn gradients_match_central_differences() {
    let mut r = rng::seeded(2024);
    for trial in 0..24u64 {
        let classes = r.gen_range(1..=5);
        let hidden = r.gen_range(1..=4);
        let nodes = r.gen_range(1..=3);
        let dropout = if trial % 2 == 0 { 0.0 } else { 0.3 };
        let model = random_model(classes, hidden, dropout, trial);
        assert!(model.parameter_count() <= 200);
        let batch = random_batch(classes, nodes, trial);
        let (worst, checked) = gradient_check(&model, &batch, trial, 1e-4);
        assert_eq!(checked, model.parameter_count());
        assert!(worst < 1e-4, "trial {trial}: n={classes} h={hidden} q={nodes} worst rel err {worst:e}");
    }
}

#[test]
fn zero_residual_gives_zero_gradients() {
    // zero input, zero biases, β = 0 → every hidden activation is 0 and the
    // output is b5 = 0, which equals an all-zero target
    let model = CeciModel::with_dims(3, 4, 0.0, [0; 32], 5).unwrap();
    let fm = features(Array2::zeros((3, 3)), vec![(0, 1), (0, 2)]);
    let batch = build_batch(&[(&fm, &fm)]).unwrap();
    let pass = model.forward(&batch, Mode::Train, &mut rng::seeded(0)).unwrap();
    assert_eq!(loss(&pass.output, batch.targets.as_ref().unwrap()).unwrap(), 0.0);
    assert!(model.backward(&batch, &pass).unwrap().is_zero());
}

#[test]
fn output_bias_gradient_tracks_residual_under_scaled_targets() {
    let model = random_model(3, 3, 0.0, 77);
    let base = random_batch(3, 3, 77);
    let mut scaled = base.clone();
    scaled.targets = scaled.targets.map(|t| t * 2.0);
    for batch in [&base, &scaled] {
        let pass = model.forward(batch, Mode::Train, &mut rng::seeded(0)).unwrap();
        let grads = model.backward(batch, &pass).unwrap();
        let eps = 1e-5;
        for j in 0..3 {
            let mut plus = model.clone();
            plus.layers[LAYERS - 1].bias[j] += eps;
            let mut minus = model.clone();
            minus.layers[LAYERS - 1].bias[j] -= eps;
            let numeric = (train_loss(&plus, batch, 0) - train_loss(&minus, batch, 0)) / (2.0 * eps);
            assert!((grads.biases[LAYERS - 1][j] - numeric).abs() < 1e-7);
        }
    }
    // db5 = Σ_rows 2(Ŷ − Y)/(Q·n), so doubling Y shifts it by −2/(Q·n)·Σ_rows Y
    let g = |b: &GraphBatch| {
        let pass = model.forward(b, Mode::Train, &mut rng::seeded(0)).unwrap();
        model.backward(b, &pass).unwrap().biases[LAYERS - 1].clone()
    };
    let y = base.targets.as_ref().unwrap();
    let shift = g(&scaled) - g(&base);
    for j in 0..3 {
        let expected = -2.0 / 9.0 * (0..3).map(|r| y[[r, j]]).sum::<f64>();
        assert!((shift[j] - expected).abs() < 1e-12);
    }
}

fn mm(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

#[test]
fn hand_computed_eval_forward() {
    // n = 2 classes, h = 2, one graph of two linked nodes: Â = [[½, ½], [½, ½]]
    let mut model = CeciModel::with_dims(2, 2, 0.5, [0; 32], 0).unwrap();
    let ws = [
        array![[1.0, -0.5], [0.25, 2.0]],
        array![[0.5, 1.0], [-1.0, 0.75]],
        array![[1.5, 0.0], [0.5, -0.25]],
        array![[-0.5, 1.0], [1.0, 1.0]],
        array![[2.0, -1.0], [0.5, 0.5]],
    ];
    let bs = [array![0.1, -0.2], array![0.0, 0.3], array![-0.1, 0.1], array![0.2, 0.0], array![0.05, -0.3]];
    for l in 0..LAYERS {
        model.layers[l].weight = ws[l].clone();
        model.layers[l].bias = bs[l].clone();
    }
    for (l, n) in model.norms.iter_mut().enumerate() {
        n.gamma = array![1.0 + 0.1 * l as f64, 0.9];
        n.beta = array![0.05, -0.1 * l as f64];
        n.running_mean = array![0.2, -0.1];
        n.running_var = array![1.5, 0.5 + 0.25 * l as f64];
    }
    let x = array![[3.0, 1.0], [1.0, 0.0]];
    let fm = features(x.clone(), vec![(0, 1)]);
    let batch = build_batch(&[(&fm, &fm)]).unwrap();
    let out = model.predict(&batch).unwrap();

    let a = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let to_vec = |m: &Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let mut h = to_vec(&x);
    for l in 0..LAYERS {
        let mut z = mm(&a, &mm(&h, &to_vec(&ws[l])));
        for row in z.iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += bs[l][j];
            }
        }
        if l < LAYERS - 1 {
            let n = &model.norms[l];
            for row in z.iter_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    let xhat = (*v - n.running_mean[j]) / (n.running_var[j] + BN_EPS).sqrt();
                    *v = (n.gamma[j] * xhat + n.beta[j]).max(0.0);
                }
            }
        } else {
            for row in z.iter_mut() {
                for v in row.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        h = z;
    }
    for i in 0..2 {
        for j in 0..2 {
            assert!((out[[i, j]] - h[i][j]).abs() < 1e-10, "{out:?} vs {h:?}");
        }
    }
}

#[test]
fn zero_input_eval_gives_zero_output() {
    let catalog = bsg_core::ClassCatalog::default_catalog();
    let model = CeciModel::new(&catalog, 16, 0.5, 1).unwrap();
    let fm = features(Array2::zeros((4, 45)), vec![(0, 1), (0, 2), (0, 3)]);
    let batch = build_batch(&[(&fm, &fm)]).unwrap();
    assert!(model.predict(&batch).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn train_and_eval_agree_without_dropout_when_stats_frozen() {
    let mut model = random_model(4, 3, 0.0, 12);
    let batch = random_batch(4, 3, 12);
    let pass = model.forward(&batch, Mode::Train, &mut rng::seeded(0)).unwrap();
    for (norm, s) in model.norms.iter_mut().zip(&pass.batch_stats) {
        norm.running_mean = s.mean.clone();
        norm.running_var = s.biased_var.clone();
    }
    let eval = model.predict(&batch).unwrap();
    let clamped = pass.output.mapv(|v| v.max(0.0));
    for (a, b) in eval.iter().zip(clamped.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn eval_forward_is_pure() {
    let model = random_model(5, 4, 0.5, 3);
    let batch = random_batch(5, 3, 3);
    let a = model.predict(&batch).unwrap();
    let b = model.predict(&batch).unwrap();
    assert_eq!(a.as_slice().unwrap(), b.as_slice().unwrap());
}

#[test]
fn adjacency_symmetric_nonnegative_spectral_radius_at_most_one() {
    let mut r = rng::seeded(99);
    for _ in 0..50 {
        let n = r.gen_range(1..9);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
        for _ in 0..r.gen_range(0..6) {
            if n > 1 {
                edges.push((r.gen_range(1..n), r.gen_range(1..n)));
            }
        }
        let a = NormalizedAdjacency::from_edges(n, &edges).to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!(a[[i, j]] >= 0.0);
                assert!((a[[i, j]] - a[[j, i]]).abs() < 1e-15);
            }
        }
        // power iteration on a non-negative symmetric matrix
        let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = a.dot(&v);
            lambda = w.dot(&w).sqrt();
            if lambda == 0.0 {
                break;
            }
            v = w / lambda;
        }
        assert!(lambda <= 1.0 + 1e-9, "spectral radius {lambda}");
    }
}

#[test]
fn permutation_equivariance() {
    let model = random_model(4, 4, 0.0, 21);
    let mut r = rng::seeded(21);
    let x = Array2::from_shape_simple_fn((4, 4), || r.gen_range(0..4) as f64);
    let edges = vec![(0, 1), (0, 2), (0, 3), (1, 3)];
    let perm = [0usize, 3, 1, 2]; // new row i holds old row perm[i]
    let inv: Vec<usize> = (0..4).map(|old| perm.iter().position(|&p| p == old).unwrap()).collect();
    let px = Array2::from_shape_fn((4, 4), |(i, j)| x[[perm[i], j]]);
    let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (inv[a], inv[b])).collect();
    let fa = features(x, edges);
    let fb = features(px, pedges);
    let ba = build_batch(&[(&fa, &fa)]).unwrap();
    let bb = build_batch(&[(&fb, &fb)]).unwrap();
    for mode in [Mode::Eval, Mode::Train] {
        let oa = model.forward(&ba, mode, &mut rng::seeded(0)).unwrap().output;
        let ob = model.forward(&bb, mode, &mut rng::seeded(0)).unwrap().output;
        for i in 0..4 {
            for j in 0..4 {
                assert!((ob[[i, j]] - oa[[perm[i], j]]).abs() < 1e-12);
            }
        }
    }
}
