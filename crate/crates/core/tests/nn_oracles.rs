use fedwarm_core::nn::{
    argmax, backward, forward, gradient_check, gradient_check_with, init_weights, predict, sgd_step,
    sgd_step_in_place, softmax, softmax_cross_entropy, Layer, Matrix, ModelSpec, ModelWeights,
};
use fedwarm_core::nn::Batch;
use fedwarm_core::rng;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(rows: usize, cols: usize, classes: usize, seed: u64) -> Batch {
    let mut r = rng::stream(seed, "test-batch", &[]);
    let data = (0..rows * cols).map(|_| r.random::<f32>()).collect();
    let labels = (0..rows).map(|_| r.random_range(0..classes)).collect();
    Batch::new(Matrix::new(rows, cols, data).unwrap(), labels).unwrap()
}

fn mlp(dims: &[usize]) -> ModelSpec {
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        if i > 0 {
            layers.push(Layer::Relu);
        }
        layers.push(Layer::Dense { in_dim: w[0], out_dim: w[1] });
    }
    ModelSpec::new(layers, vec![dims[0]], *dims.last().unwrap()).unwrap()
}

fn small_conv(side: usize, classes: usize) -> ModelSpec {
    let out = side - 2;
    ModelSpec::new(
        vec![
            Layer::Conv2d { in_channels: 1, out_channels: 2, kernel_size: 3, stride: 1 },
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense { in_dim: 2 * out * out, out_dim: classes },
        ],
        vec![1, side, side],
        classes,
    )
    .unwrap()
}

/// Straightforward nested-loop forward pass in f64, written independently of
/// the library kernels. Dense weights are input-major (`w[i * out + o]`),
/// conv weights `[out][in][ky][kx]`, biases follow the weights.
fn naive_forward(spec: &ModelSpec, params: &[f32], x: &[f32]) -> Vec<f64> {
    let mut shape = spec.input_shape.clone();
    let mut act: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut off = 0;
    for layer in &spec.layers {
        match *layer {
            Layer::Dense { in_dim, out_dim } => {
                let mut y = vec![0.0; out_dim];
                for o in 0..out_dim {
                    let mut s = params[off + in_dim * out_dim + o] as f64;
                    for i in 0..in_dim {
                        s += act[i] * params[off + i * out_dim + o] as f64;
                    }
                    y[o] = s;
                }
                off += in_dim * out_dim + out_dim;
                act = y;
                shape = vec![out_dim];
            }
            Layer::Conv2d { in_channels, out_channels, kernel_size: k, stride } => {
                let (h, w) = (shape[1], shape[2]);
                let (oh, ow) = ((h - k) / stride + 1, (w - k) / stride + 1);
                let nw = out_channels * in_channels * k * k;
                let mut y = vec![0.0; out_channels * oh * ow];
                for o in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut s = params[off + nw + o] as f64;
                            for c in 0..in_channels {
                                for ky in 0..k {
                                    for kx in 0..k {
                                        let wv = params[off + ((o * in_channels + c) * k + ky) * k + kx] as f64;
                                        let xv = act[(c * h + oy * stride + ky) * w + ox * stride + kx];
                                        s += wv * xv;
                                    }
                                }
                            }
                            y[(o * oh + oy) * ow + ox] = s;
                        }
                    }
                }
                off += nw + out_channels;
                act = y;
                shape = vec![out_channels, oh, ow];
            }
            Layer::Relu => act.iter_mut().for_each(|v| *v = v.max(0.0)),
            Layer::Flatten => shape = vec![shape.iter().product()],
        }
    }
    act
}

#[test]
fn zero_weights_give_zero_logits() {
    let spec = mlp(&[6, 5, 3]);
    let w = ModelWeights::zeros(&spec).unwrap();
    let batch = random_batch(4, 6, 3, 1);
    let (logits, _) = forward(&spec, &w, &batch).unwrap();
    assert!(logits.data.iter().all(|&v| v == 0.0));
}

#[test]
fn identity_dense_passes_inputs_through() {
    let spec = mlp(&[4, 4]);
    let mut w = ModelWeights::zeros(&spec).unwrap();
    for i in 0..4 {
        w.params[i * 4 + i] = 1.0;
    }
    let batch = random_batch(3, 4, 4, 2);
    let (logits, _) = forward(&spec, &w, &batch).unwrap();
    assert_eq!(logits.data, batch.inputs.data);
}

#[test]
fn forward_matches_naive_reference() {
    for (spec, cols) in [
        (mlp(&[12, 7, 5, 3]), 12),
        (small_conv(7, 3), 49),
        (
            ModelSpec::new(
                vec![
                    Layer::Conv2d { in_channels: 2, out_channels: 3, kernel_size: 3, stride: 2 },
                    Layer::Relu,
                    Layer::Conv2d { in_channels: 3, out_channels: 2, kernel_size: 2, stride: 1 },
                    Layer::Relu,
                    Layer::Dense { in_dim: 2 * 3 * 3, out_dim: 4 },
                ],
                vec![2, 9, 9],
                4,
            )
            .unwrap(),
            162,
        ),
    ] {
        let mut w = init_weights(&spec, 11).unwrap();
        let mut r = rng::stream(3, "bias", &[]);
        for p in w.params.iter_mut() {
            *p += r.random_range(-0.1..0.1);
        }
        let batch = random_batch(5, cols, spec.num_classes, 4);
        let (logits, _) = forward(&spec, &w, &batch).unwrap();
        for row in 0..5 {
            let expected = naive_forward(&spec, &w.params, batch.inputs.row(row));
            for (a, e) in logits.row(row).iter().zip(&expected) {
                assert!((*a as f64 - e).abs() < 1e-6 * (1.0 + e.abs()), "{a} vs {e}");
            }
        }
    }
}

#[test]
fn input_shape_mismatch_reports_dimensions() {
    let spec = mlp(&[6, 3]);
    let w = init_weights(&spec, 1).unwrap();
    let err = forward(&spec, &w, &random_batch(2, 5, 3, 1)).unwrap_err();
    assert!(err.to_string().contains("5 features") && err.to_string().contains("(6)"), "{err}");
}

#[test]
fn logit_gradient_matches_finite_differences() {
    let mut r = rng::stream(5, "logits", &[]);
    let (rows, cols) = (4, 6);
    let data: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-3.0..3.0)).collect();
    let labels = vec![0, 5, 2, 2];
    let logits = Matrix::new(rows, cols, data).unwrap();
    let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
    let eps = 1e-6;
    for j in 0..rows * cols {
        let mut up = logits.clone();
        up.data[j] += eps;
        let mut down = logits.clone();
        down.data[j] -= eps;
        let numeric = (softmax_cross_entropy(&up, &labels).unwrap().0
            - softmax_cross_entropy(&down, &labels).unwrap().0)
            / (2.0 * eps);
        let rel = (grad.data[j] - numeric).abs() / grad.data[j].abs().max(numeric.abs()).max(1e-8);
        assert!(rel < 1e-5, "logit {j}: {} vs {numeric}", grad.data[j]);
    }
}

#[test]
fn zero_logit_gradient_gives_zero_parameter_gradient() {
    let spec = mlp(&[6, 5, 3]);
    let w = init_weights(&spec, 3).unwrap();
    let batch = random_batch(4, 6, 3, 3);
    let (_, cache) = forward(&spec, &w, &batch).unwrap();
    let g = backward(&spec, &w, &cache, &Matrix::filled(4, 3, 0.0)).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn single_dense_gradient_is_outer_product() {
    let spec = mlp(&[5, 3]);
    let w = init_weights(&spec, 9).unwrap();
    let batch = random_batch(1, 5, 3, 9);
    let (_, cache) = forward(&spec, &w, &batch).unwrap();
    let g_logits = Matrix::new(1, 3, vec![0.5, -1.0, 0.25]).unwrap();
    let g = backward(&spec, &w, &cache, &g_logits).unwrap();
    for i in 0..5 {
        for o in 0..3 {
            assert_eq!(g[i * 3 + o], batch.inputs.data[i] * g_logits.data[o]);
        }
    }
    assert_eq!(&g[15..], &g_logits.data[..]);
}

#[test]
fn backward_rejects_stale_or_foreign_cache() {
    let spec = mlp(&[6, 5, 3]);
    let w = init_weights(&spec, 3).unwrap();
    let batch = random_batch(4, 6, 3, 3);
    let (_, cache) = forward(&spec, &w, &batch).unwrap();
    let g = Matrix::filled(4, 3, 0.1f32);
    let moved = sgd_step(&w, &vec![1.0; w.len()], 0.1).unwrap();
    assert!(backward(&spec, &moved, &cache, &g).is_err());
    assert!(backward(&spec, &w, &cache, &Matrix::filled(3, 3, 0.1)).is_err());
    let other = mlp(&[6, 4, 3]);
    let ow = init_weights(&other, 3).unwrap();
    assert!(backward(&other, &ow, &cache, &g).is_err());
}

#[test]
fn gradcheck_small_mlp() {
    let spec = mlp(&[16, 8, 4]);
    let w = init_weights(&spec, 21).unwrap();
    let err = gradient_check(&spec, &w, &random_batch(4, 16, 4, 21), 1e-4).unwrap();
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn gradcheck_conv() {
    let spec = small_conv(8, 3);
    let w = init_weights(&spec, 22).unwrap();
    let err = gradient_check(&spec, &w, &random_batch(4, 64, 3, 22), 1e-4).unwrap();
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn gradcheck_zero_objective_is_exact() {
    let spec = mlp(&[16, 8, 4]);
    let w = init_weights(&spec, 21).unwrap();
    let batch = random_batch(4, 16, 4, 21);
    let err = gradient_check_with(&spec, &w, &batch.inputs, 1e-4, |logits| {
        Ok((0.0, Matrix::filled(logits.rows, logits.cols, 0.0)))
    })
    .unwrap();
    assert_eq!(err, 0.0);
}

#[test]
fn gradcheck_rejects_bad_epsilon() {
    let spec = mlp(&[4, 2]);
    let w = init_weights(&spec, 1).unwrap();
    let b = random_batch(2, 4, 2, 1);
    assert!(gradient_check(&spec, &w, &b, 0.0).is_err());
    assert!(gradient_check(&spec, &w, &b, 0.02).is_err());
}

#[test]
fn frozen_first_layer_is_bitwise_constant() {
    let spec = mlp(&[6, 5, 3]);
    let w0 = init_weights(&spec, 4).unwrap().with_frozen_prefix(1).unwrap();
    let batch = random_batch(8, 6, 3, 4);
    let (logits, cache) = forward(&spec, &w0, &batch).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &batch.labels).unwrap();
    let grad = backward(&spec, &w0, &cache, &g).unwrap();
    let w1 = sgd_step(&w0, &grad, 0.5).unwrap();
    assert_eq!(w1.layer_slice(0), w0.layer_slice(0));
    assert_ne!(w1.layer_slice(1), w0.layer_slice(1));
}

#[test]
fn predict_is_rowwise_argmax() {
    assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
    assert_eq!(argmax(&[0.5, 0.5]), 0);
    let spec = mlp(&[6, 5, 4]);
    let w = init_weights(&spec, 6).unwrap();
    let batch = random_batch(3, 6, 4, 6);
    let preds = predict(&spec, &w, &batch.inputs).unwrap();
    for (r, p) in preds.iter().enumerate() {
        let reference = naive_forward(&spec, &w.params, batch.inputs.row(r));
        let mut best = 0;
        for c in 1..reference.len() {
            if reference[c] > reference[best] {
                best = c;
            }
        }
        assert_eq!(*p, best);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn softmax_rows_are_distributions(vals in prop::collection::vec(-50.0f32..50.0, 12)) {
        let logits = Matrix::new(3, 4, vals).unwrap();
        let p = softmax(&logits);
        for r in 0..3 {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
            prop_assert!(p.row(r).iter().all(|&v| v >= 0.0 && v <= 1.0));
        }
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 3]).unwrap();
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn gradients_verify_on_random_topologies(
        hidden in 2usize..8,
        classes in 2usize..5,
        seed in 0u64..1000,
    ) {
        let spec = mlp(&[5, hidden, classes]);
        let w = init_weights(&spec, seed).unwrap();
        let err = gradient_check(&spec, &w, &random_batch(3, 5, classes, seed), 1e-4).unwrap();
        prop_assert!(err < 1e-4, "max relative error {}", err);
    }

    #[test]
    fn training_is_deterministic_and_respects_freeze(seed in 0u64..1000, steps in 1usize..6) {
        let spec = mlp(&[6, 5, 3]);
        let run = || {
            let mut w = init_weights(&spec, seed).unwrap().with_frozen_prefix(1).unwrap();
            let frozen = w.frozen_slice().to_vec();
            for s in 0..steps {
                let batch = random_batch(4, 6, 3, seed * 31 + s as u64);
                let (logits, cache) = forward(&spec, &w, &batch).unwrap();
                let (_, g) = softmax_cross_entropy(&logits, &batch.labels).unwrap();
                let grad = backward(&spec, &w, &cache, &g).unwrap();
                sgd_step_in_place(&mut w, &grad, 0.3).unwrap();
                assert_eq!(w.frozen_slice(), &frozen[..]);
            }
            w
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn param_count_depends_only_on_spec(seed_a in 0u64..100, seed_b in 0u64..100) {
        let spec = small_conv(6, 2);
        prop_assert_eq!(init_weights(&spec, seed_a).unwrap().len(), init_weights(&spec, seed_b).unwrap().len());
        prop_assert_eq!(init_weights(&spec, seed_a).unwrap().len(), spec.param_count().unwrap());
    }
}
