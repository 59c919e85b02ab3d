//! Analytic gradients against central finite differences.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PARAM_NAMES;
use super::model::CnnModel;
use super::{softmax_cross_entropy, CnnError, Tensor};

/// Parameters sampled per tensor; smaller tensors are checked in full.
pub const SAMPLES_PER_LAYER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
    pub max_rel_error: f64,
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares backprop gradients of the mean cross-entropy with
/// `(f(w + eps) - f(w - eps)) / 2 eps`, dropout disabled, on up to
/// [`SAMPLES_PER_LAYER`] parameters of every tensor chosen with `seed`.
pub fn gradient_check(
    model: &CnnModel,
    batch: &Tensor,
    labels: &[usize],
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport, CnnError> {
    let mut model = model.clone();
    model.set_dropout_rate(0.0)?;

    let fwd = model.forward(batch, true)?;
    let (_, dlogits) = softmax_cross_entropy(&fwd.logits, labels)?;
    let analytic = model.backward(&fwd, &dlogits)?;

    let loss_at = |m: &CnnModel| -> Result<f64, CnnError> {
        Ok(softmax_cross_entropy(&m.logits(batch)?, labels)?.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(PARAM_NAMES.len());
    for (layer, name) in PARAM_NAMES.iter().enumerate() {
        let len = model.params()[layer].len();
        let picks: Vec<usize> = if len <= SAMPLES_PER_LAYER {
            (0..len).collect()
        } else {
            sample(&mut rng, len, SAMPLES_PER_LAYER).into_vec()
        };
        let mut worst = 0.0f64;
        for &i in &picks {
            let original = model.params()[layer].data()[i];
            model.params_mut()[layer].data_mut()[i] = original + epsilon;
            let plus = loss_at(&model)?;
            model.params_mut()[layer].data_mut()[i] = original - epsilon;
            let minus = loss_at(&model)?;
            model.params_mut()[layer].data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.tensors[layer].data()[i];
            worst = worst.max(relative_error(exact, numeric));
        }
        layers.push(LayerCheck {
            name,
            checked: picks.len(),
            max_rel_error: worst,
        });
    }
    let max_rel_error = layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        layers,
        max_rel_error,
    })
}
