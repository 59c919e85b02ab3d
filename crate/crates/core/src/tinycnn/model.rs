use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{CnnConfig, Plan, PARAM_NAMES};
use super::layers::{
    conv_backward, conv_forward, gemm, maxpool_backward, maxpool_forward, relu_backward,
    relu_inplace,
};
use super::{softmax_rows, CnnError, Tensor};

const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

/// Network weights plus the dropout random state.
#[derive(Debug, Clone)]
pub struct CnnModel {
    config: CnnConfig,
    plan: Plan,
    params: Vec<Tensor>,
    rng: ChaCha8Rng,
}

/// Per-parameter gradients, in the same order as [`CnnModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(model: &CnnModel) -> Self {
        Gradients {
            tensors: model
                .params
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }
}

/// Activations kept by a training-mode forward pass for [`CnnModel::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    input: Tensor,
    conv1: Vec<f64>,
    pool1: Vec<f64>,
    arg1: Vec<usize>,
    conv2: Vec<f64>,
    pool2: Vec<f64>,
    arg2: Vec<usize>,
    conv3: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Tensor,
    pub cache: Option<Cache>,
}

/// Builds a model with He-style uniform weights in
/// `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]` and zero biases.
pub fn init_model(cfg: &CnnConfig) -> Result<CnnModel, CnnError> {
    let plan = Plan::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INIT_STREAM);
    let params = plan
        .param_shapes()
        .into_iter()
        .map(|shape| {
            if shape.len() == 1 {
                return Tensor::zeros(shape);
            }
            let fan_in: usize = shape[..shape.len() - 1].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            Tensor::new(shape, data).expect("shape product matches")
        })
        .collect();
    Ok(CnnModel::with_params(cfg.clone(), plan, params))
}

impl CnnModel {
    fn with_params(config: CnnConfig, plan: Plan, params: Vec<Tensor>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(DROPOUT_STREAM);
        CnnModel {
            config,
            plan,
            params,
            rng,
        }
    }

    /// Rebuilds a model from stored parameters, checking their shapes.
    pub fn from_params(config: CnnConfig, params: Vec<Tensor>) -> Result<Self, CnnError> {
        let plan = Plan::new(&config)?;
        let shapes = plan.param_shapes();
        if shapes.len() != params.len()
            || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape())
        {
            return Err(CnnError::ShapeMismatch(
                "parameter shapes do not match config".into(),
            ));
        }
        Ok(Self::with_params(config, plan, params))
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    /// Width of the flattened feature map entering the hidden layer.
    pub fn flat_features(&self) -> usize {
        self.plan.flat
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names() -> &'static [&'static str] {
        &PARAM_NAMES
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Reseeds the dropout stream.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.rng.set_stream(DROPOUT_STREAM);
    }

    /// Adjusts the dropout rate, e.g. to zero for gradient checking.
    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<(), CnnError> {
        let mut cfg = self.config.clone();
        cfg.dropout_rate = rate;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize, CnnError> {
        let (h, w, c) = self.config.input_shape;
        match batch.shape() {
            [n, bh, bw, bc] if (*bh, *bw, *bc) == (h, w, c) => Ok(*n),
            other => Err(CnnError::ShapeMismatch(format!(
                "expected batch of shape [N, {h}, {w}, {c}], got {other:?}"
            ))),
        }
    }

    /// Runs the network on an `N x H x W x C` batch. In training mode dropout
    /// is applied to the hidden layer and activations are cached.
    pub fn forward(&mut self, batch: &Tensor, training: bool) -> Result<Forward, CnnError> {
        let n = self.check_batch(batch)?;
        let mask = if training && self.config.dropout_rate > 0.0 {
            let p = self.config.dropout_rate;
            let keep = 1.0 / (1.0 - p);
            Some(
                (0..n * self.plan.hidden)
                    .map(|_| if self.rng.random::<f64>() >= p { keep } else { 0.0 })
                    .collect(),
            )
        } else {
            None
        };
        let (logits, cache) = self.run(batch, n, mask);
        Ok(Forward {
            logits,
            cache: training.then_some(cache),
        })
    }

    /// Inference-mode logits.
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor, CnnError> {
        let n = self.check_batch(batch)?;
        Ok(self.run(batch, n, None).0)
    }

    /// Softmax probabilities with dropout disabled, computed in chunks to
    /// bound memory.
    pub fn predict_scores(&self, batch: &Tensor) -> Result<Tensor, CnnError> {
        const CHUNK: usize = 128;
        let n = self.check_batch(batch)?;
        let k = self.plan.classes;
        let mut out = Vec::with_capacity(n * k);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let rows: Vec<usize> = (start..end).collect();
            let logits = self.logits(&batch.gather_rows(&rows))?;
            out.extend(softmax_rows(&logits).into_data());
            start = end;
        }
        Tensor::new(vec![n, k], out)
    }

    fn run(&self, batch: &Tensor, n: usize, mask: Option<Vec<f64>>) -> (Tensor, Cache) {
        let [g1, g2, g3] = self.plan.conv;
        let [q1, q2] = self.plan.pool;
        let p = &self.params;
        let (hid, classes, flat) = (self.plan.hidden, self.plan.classes, self.plan.flat);

        let mut conv1 = vec![0.0; n * g1.out_len()];
        let mut pool1 = vec![0.0; n * q1.out_len()];
        let mut arg1 = vec![0; n * q1.out_len()];
        let mut conv2 = vec![0.0; n * g2.out_len()];
        let mut pool2 = vec![0.0; n * q2.out_len()];
        let mut arg2 = vec![0; n * q2.out_len()];
        let mut conv3 = vec![0.0; n * flat];
        let mut cols = vec![0.0; [g1, g2, g3].iter().map(|g| g.out_pixels() * g.patch_len()).max().unwrap_or(0)];

        for i in 0..n {
            let x = batch.row(i);
            let a1 = &mut conv1[i * g1.out_len()..][..g1.out_len()];
            conv_forward(&g1, x, p[0].data(), p[1].data(), a1, &mut cols);
            relu_inplace(a1);
            let o1 = &mut pool1[i * q1.out_len()..][..q1.out_len()];
            maxpool_forward(&q1, a1, o1, &mut arg1[i * q1.out_len()..][..q1.out_len()]);

            let a2 = &mut conv2[i * g2.out_len()..][..g2.out_len()];
            conv_forward(&g2, o1, p[2].data(), p[3].data(), a2, &mut cols);
            relu_inplace(a2);
            let o2 = &mut pool2[i * q2.out_len()..][..q2.out_len()];
            maxpool_forward(&q2, a2, o2, &mut arg2[i * q2.out_len()..][..q2.out_len()]);

            let a3 = &mut conv3[i * flat..][..flat];
            conv_forward(&g3, o2, p[4].data(), p[5].data(), a3, &mut cols);
            relu_inplace(a3);
        }

        let mut hidden = Vec::with_capacity(n * hid);
        for _ in 0..n {
            hidden.extend_from_slice(p[7].data());
        }
        gemm(n, flat, hid, &conv3, false, p[6].data(), false, 1.0, &mut hidden);
        relu_inplace(&mut hidden);

        let dropped = match &mask {
            Some(m) => hidden.iter().zip(m).map(|(h, m)| h * m).collect(),
            None => hidden.clone(),
        };

        let mut logits = Vec::with_capacity(n * classes);
        for _ in 0..n {
            logits.extend_from_slice(p[9].data());
        }
        gemm(n, hid, classes, &dropped, false, p[8].data(), false, 1.0, &mut logits);

        let cache = Cache {
            input: batch.clone(),
            conv1,
            pool1,
            arg1,
            conv2,
            pool2,
            arg2,
            conv3,
            hidden,
            mask,
            dropped,
        };
        (
            Tensor::new(vec![n, classes], logits).expect("logit shape"),
            cache,
        )
    }

    /// Gradients of the loss with respect to every parameter, given the
    /// loss gradient at the logits.
    pub fn backward(&self, fwd: &Forward, dlogits: &Tensor) -> Result<Gradients, CnnError> {
        let cache = fwd.cache.as_ref().ok_or(CnnError::MissingCache)?;
        let n = cache.input.rows();
        let (hid, classes, flat) = (self.plan.hidden, self.plan.classes, self.plan.flat);
        if dlogits.shape() != [n, classes] {
            return Err(CnnError::ShapeMismatch(format!(
                "logit gradient shape {:?}, expected [{n}, {classes}]",
                dlogits.shape()
            )));
        }
        let p = &self.params;
        let mut grads = Gradients::zeros_like(self);
        let dl = dlogits.data();

        {
            let [.., fc1w, fc1b, fc2w, fc2b] = &mut grads.tensors[..] else {
                unreachable!()
            };
            gemm(hid, n, classes, &cache.dropped, true, dl, false, 0.0, fc2w.data_mut());
            column_sums(dl, classes, fc2b.data_mut());

            let mut dh = vec![0.0; n * hid];
            gemm(n, classes, hid, dl, false, p[8].data(), true, 0.0, &mut dh);
            if let Some(m) = &cache.mask {
                dh.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
            }
            relu_backward(&cache.hidden, &mut dh);
            gemm(flat, n, hid, &cache.conv3, true, &dh, false, 0.0, fc1w.data_mut());
            column_sums(&dh, hid, fc1b.data_mut());

            let mut d3 = vec![0.0; n * flat];
            gemm(n, hid, flat, &dh, false, p[6].data(), true, 0.0, &mut d3);
            relu_backward(&cache.conv3, &mut d3);
            self.backward_convs(cache, &d3, &mut grads, n);
        }
        Ok(grads)
    }

    fn backward_convs(&self, cache: &Cache, d3: &[f64], grads: &mut Gradients, n: usize) {
        let [g1, g2, g3] = self.plan.conv;
        let [q1, q2] = self.plan.pool;
        let p = &self.params;
        let mut cols = vec![0.0; [g1, g2, g3].iter().map(|g| g.out_pixels() * g.patch_len()).max().unwrap_or(0)];
        let mut dp2 = vec![0.0; q2.out_len()];
        let mut da2 = vec![0.0; q2.in_len()];
        let mut dp1 = vec![0.0; q1.out_len()];
        let mut da1 = vec![0.0; q1.in_len()];

        let [w1, b1, w2, b2, w3, b3, ..] = &mut grads.tensors[..] else {
            unreachable!()
        };
        for i in 0..n {
            let pool2 = &cache.pool2[i * q2.out_len()..][..q2.out_len()];
            let dout3 = &d3[i * g3.out_len()..][..g3.out_len()];
            conv_backward(&g3, pool2, dout3, p[4].data(), w3.data_mut(), b3.data_mut(), Some(&mut dp2), &mut cols);
            maxpool_backward(&dp2, &cache.arg2[i * q2.out_len()..][..q2.out_len()], &mut da2);
            relu_backward(&cache.conv2[i * g2.out_len()..][..g2.out_len()], &mut da2);

            let pool1 = &cache.pool1[i * q1.out_len()..][..q1.out_len()];
            conv_backward(&g2, pool1, &da2, p[2].data(), w2.data_mut(), b2.data_mut(), Some(&mut dp1), &mut cols);
            maxpool_backward(&dp1, &cache.arg1[i * q1.out_len()..][..q1.out_len()], &mut da1);
            relu_backward(&cache.conv1[i * g1.out_len()..][..g1.out_len()], &mut da1);

            conv_backward(&g1, cache.input.row(i), &da1, p[0].data(), w1.data_mut(), b1.data_mut(), None, &mut cols);
        }
    }
}

fn column_sums(m: &[f64], cols: usize, out: &mut [f64]) {
    out.fill(0.0);
    for row in m.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// `w <- w - lr * g` for every parameter.
pub fn sgd_step(model: &mut CnnModel, grads: &Gradients, lr: f64) {
    for (param, grad) in model.params.iter_mut().zip(&grads.tensors) {
        for (w, g) in param.data_mut().iter_mut().zip(grad.data()) {
            *w -= lr * g;
        }
    }
}

/// SGD with optional classical momentum.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Option<Gradients>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: None,
        }
    }

    pub fn step(&mut self, model: &mut CnnModel, grads: &Gradients) {
        if self.momentum == 0.0 {
            sgd_step(model, grads, self.lr);
            return;
        }
        let v = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(model));
        v.scale(self.momentum);
        v.add_assign(grads);
        sgd_step(model, v, self.lr);
    }
}
