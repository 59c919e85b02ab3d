mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skelimg_core::tinycnn::{
    gradient_check, init_model, load_model, save_model, sgd_step, softmax_cross_entropy, train,
    CnnConfig, CnnError, Dataset, Gradients, Sgd, Tensor, SAMPLES_PER_LAYER,
};

fn random_tensor(rng: &mut impl Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let logits = random_tensor(&mut rng, vec![4, 5]);
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-5;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= eps;
            let numeric = (softmax_cross_entropy(&plus, &labels).unwrap().0
                - softmax_cross_entropy(&minus, &labels).unwrap().0)
                / (2.0 * eps);
            let exact = grad.data()[i];
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs());
            assert!(rel < 1e-6, "entry {i}: {exact} vs {numeric}");
        }
    }
}

#[test]
fn gradient_check_tiny_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..5 {
        let model = common::tiny_model(seed);
        let batch = random_tensor(&mut rng, vec![4, 8, 10, 3]);
        let report = gradient_check(&model, &batch, &[0, 1, 2, 1], 1e-5, seed).unwrap();
        for (layer, param) in report.layers.iter().zip(model.params()) {
            assert_eq!(layer.checked, param.len().min(SAMPLES_PER_LAYER), "{}", layer.name);
        }
        assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
    }
}

#[test]
fn gradient_check_zero_input() {
    let model = common::tiny_model(9);
    let zero = Tensor::zeros(vec![3, 8, 10, 3]);
    let report = gradient_check(&model, &zero, &[2, 0, 1], 1e-5, 1).unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn gradient_check_samples_large_layers() {
    // conv2 here has 3*3*6*12 = 648 weights, more than the sample size
    let mut cfg = CnnConfig::new((12, 12, 2), 3);
    cfg.conv_filters = [6, 12, 4];
    cfg.hidden_units = 5;
    let mut model = init_model(&cfg).unwrap();
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        if i % 2 == 1 {
            p.data_mut().iter_mut().for_each(|v| *v = 0.1);
        }
    }
    let batch = random_tensor(&mut ChaCha8Rng::seed_from_u64(3), vec![2, 12, 12, 2]);
    let report = gradient_check(&model, &batch, &[0, 2], 1e-5, 4).unwrap();
    assert_eq!(report.layers[2].checked, SAMPLES_PER_LAYER);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut model = common::tiny_model(0);
    let batch = random_tensor(&mut ChaCha8Rng::seed_from_u64(4), vec![2, 8, 10, 3]);
    let fwd = model.forward(&batch, true).unwrap();
    let grads = model.backward(&fwd, &Tensor::zeros(vec![2, 3])).unwrap();
    for (g, p) in grads.tensors.iter().zip(model.params()) {
        assert_eq!(g.shape(), p.shape());
        assert!(g.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn inference_forward_cannot_backprop() {
    let mut model = common::tiny_model(0);
    let batch = Tensor::zeros(vec![1, 8, 10, 3]);
    let fwd = model.forward(&batch, false).unwrap();
    assert!(matches!(
        model.backward(&fwd, &Tensor::zeros(vec![1, 3])),
        Err(CnnError::MissingCache)
    ));
    assert!(matches!(
        model.forward(&Tensor::zeros(vec![1, 8, 9, 3]), false),
        Err(CnnError::ShapeMismatch(_))
    ));
}

#[test]
fn dropout_gradients_follow_the_seed() {
    let model = common::tiny_model(5);
    let batch = random_tensor(&mut ChaCha8Rng::seed_from_u64(5), vec![3, 8, 10, 3]);
    let grads = |dropout_seed: u64| {
        let mut m = model.clone();
        m.reseed_dropout(dropout_seed);
        let fwd = m.forward(&batch, true).unwrap();
        let (_, d) = softmax_cross_entropy(&fwd.logits, &[0, 1, 2]).unwrap();
        m.backward(&fwd, &d).unwrap()
    };
    assert_eq!(grads(7), grads(7));
    assert_ne!(grads(7), grads(8));
}

#[test]
fn sgd_examples() {
    let model = common::tiny_model(1);
    let mut grads = Gradients::zeros_like(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for g in &mut grads.tensors {
        g.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }

    let mut unchanged = model.clone();
    sgd_step(&mut unchanged, &grads, 0.0);
    assert_eq!(unchanged.params(), model.params());

    let mut once = model.clone();
    sgd_step(&mut once, &grads, 0.1);
    let mut twice = model.clone();
    sgd_step(&mut twice, &grads, 0.05);
    sgd_step(&mut twice, &grads, 0.05);
    for (a, b) in once.params().iter().zip(twice.params()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
    for ((p, q), g) in once.params().iter().zip(model.params()).zip(&grads.tensors) {
        for ((x, w), d) in p.data().iter().zip(q.data()).zip(g.data()) {
            assert_eq!(*x, w - 0.1 * d);
        }
    }

    // momentum: v1 = g, v2 = 0.9 g + g, w2 = w - lr (v1 + v2)
    let mut opt = Sgd::new(0.1, 0.9);
    let mut m = model.clone();
    opt.step(&mut m, &grads);
    opt.step(&mut m, &grads);
    for ((p, q), g) in m.params().iter().zip(model.params()).zip(&grads.tensors) {
        for ((x, w), d) in p.data().iter().zip(q.data()).zip(g.data()) {
            assert!((x - (w - 0.1 * (d + 1.9 * d))).abs() < 1e-14);
        }
    }
}

#[test]
fn default_network_shapes_for_stacked_tsrji() {
    let model = init_model(&CnnConfig::new((49, 100, 12), 60)).unwrap();
    // conv1 keeps 49x100, pool -> 24x50, conv2 keeps it, pool -> 12x25,
    // stride-2 conv3 -> ceil(12/2) x ceil(25/2) = 6x13 with 128 channels
    assert_eq!(model.flat_features(), 6 * 13 * 128);
    let shapes: Vec<Vec<usize>> = model.params().iter().map(|p| p.shape().to_vec()).collect();
    assert_eq!(
        shapes,
        vec![
            vec![3, 3, 12, 32],
            vec![32],
            vec![3, 3, 32, 64],
            vec![64],
            vec![3, 3, 64, 128],
            vec![128],
            vec![9984, 256],
            vec![256],
            vec![256, 60],
            vec![60],
        ]
    );
    let logits = model.logits(&Tensor::zeros(vec![2, 49, 100, 12])).unwrap();
    assert_eq!(logits.shape(), &[2, 60]);
}

#[test]
fn init_is_seeded_and_bounded() {
    let cfg = CnnConfig::new((8, 10, 3), 3);
    let a = init_model(&cfg).unwrap();
    assert_eq!(a.params(), init_model(&cfg).unwrap().params());
    let b = init_model(&CnnConfig { seed: 1, ..cfg.clone() }).unwrap();
    assert_ne!(a.params(), b.params());
    let fan_in = [27.0, 288.0, 576.0, a.flat_features() as f64, 256.0];
    for (layer, fan) in fan_in.iter().enumerate() {
        let bound = (6.0 / fan).sqrt();
        assert!(a.params()[2 * layer].data().iter().all(|v| v.abs() <= bound));
        assert!(a.params()[2 * layer + 1].data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let model = common::tiny_model(3);
    let bytes = save_model(&model);
    let back = load_model(&bytes).unwrap();
    assert_eq!(back.params(), model.params());
    assert_eq!(back.config(), model.config());
    let batch = random_tensor(&mut ChaCha8Rng::seed_from_u64(7), vec![2, 8, 10, 3]);
    assert_eq!(back.predict_scores(&batch).unwrap(), model.predict_scores(&batch).unwrap());

    let corrupt = |b: &[u8]| matches!(load_model(b), Err(CnnError::CorruptCheckpoint(_)));
    assert!(corrupt(&bytes[..bytes.len() - 8]));
    assert!(corrupt(b"not a checkpoint\n"));
    let text_end = bytes.windows(4).position(|w| w == b"end\n").unwrap();
    let header = String::from_utf8(bytes[..text_end].to_vec()).unwrap();
    let payload = &bytes[text_end..];
    let edited = |from: &str, to: &str| {
        let mut b = header.replacen(from, to, 1).into_bytes();
        b.extend_from_slice(payload);
        b
    };
    assert!(corrupt(&edited("hidden_units=4", "hidden_units=5")));
    assert!(corrupt(&edited("kernel=3\n", "")));
    let count = format!("param_values={}", model.param_count());
    assert!(corrupt(&edited(&count, "param_values=1")));
}

fn toy_data(n: usize, seed: u64) -> Dataset {
    // class c lights up row band c of an 8x10 image
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % 3;
        labels.push(c);
        for y in 0..8 {
            for _x in 0..10 {
                for _ch in 0..3 {
                    let on = if y / 3 == c { 1.0 } else { 0.0 };
                    data.push(on + rng.random_range(-0.05..0.05));
                }
            }
        }
    }
    Dataset::new(Tensor::new(vec![n, 8, 10, 3], data).unwrap(), labels).unwrap()
}

fn toy_config() -> CnnConfig {
    let mut cfg = CnnConfig::new((8, 10, 3), 3);
    cfg.conv_filters = [4, 4, 4];
    cfg.hidden_units = 16;
    cfg.batch_size = 8;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.9;
    cfg.epochs = 60;
    cfg.seed = 1;
    cfg
}

#[test]
fn overfits_eight_samples() {
    let data = toy_data(8, 1);
    let (model, history) = train(&toy_config(), &data, None).unwrap();
    assert_eq!(history.epochs.last().unwrap().train_acc, 1.0, "{history:?}");
    let preds = model.predict_scores(&data.inputs).unwrap().argmax_rows();
    assert_eq!(preds, data.labels);
}

#[test]
fn training_is_deterministic() {
    let data = toy_data(12, 2);
    let mut cfg = toy_config();
    cfg.epochs = 5;
    cfg.dropout_rate = 0.5;
    let (a, ha) = train(&cfg, &data, Some(&data)).unwrap();
    let (b, hb) = train(&cfg, &data, Some(&data)).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.params(), b.params());
    assert!(ha.epochs.iter().all(|e| e.val_acc.is_some()));
    let (c, _) = train(&CnnConfig { seed: 2, ..cfg }, &data, None).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let data = toy_data(9, 3);
    let mut cfg = toy_config();
    cfg.learning_rate = 0.0;
    cfg.epochs = 4;
    let (model, history) = train(&cfg, &data, None).unwrap();
    let first = history.epochs[0].loss;
    assert!(history.epochs.iter().all(|e| e.loss == first));
    assert_eq!(model.params(), init_model(&cfg).unwrap().params());
}

#[test]
fn loss_mostly_decreases() {
    let data = toy_data(24, 4);
    let mut cfg = toy_config();
    cfg.epochs = 10;
    cfg.momentum = 0.0;
    cfg.learning_rate = 0.02;
    cfg.batch_size = 24;
    let (_, history) = train(&cfg, &data, None).unwrap();
    let losses: Vec<f64> = history.epochs.iter().map(|e| e.loss).collect();
    let down = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down >= 8, "{losses:?}");
    assert!(losses[9] < losses[0]);
    assert!(history.to_csv().starts_with("epoch,loss,train_acc,val_acc\n1,"));
}

#[test]
fn training_input_errors() {
    let cfg = toy_config();
    let empty = Dataset::new(Tensor::zeros(vec![0, 8, 10, 3]), vec![]).unwrap();
    assert!(matches!(train(&cfg, &empty, None), Err(CnnError::EmptyTrainingSet)));
    let mut bad = toy_data(3, 5);
    bad.labels[1] = 3;
    assert!(matches!(train(&cfg, &bad, None), Err(CnnError::BadLabel { label: 3, classes: 3 })));
    let wrong = Dataset::new(Tensor::zeros(vec![2, 8, 8, 3]), vec![0, 1]).unwrap();
    assert!(matches!(train(&cfg, &wrong, None), Err(CnnError::ShapeMismatch(_))));
}
