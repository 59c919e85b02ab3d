//! A small convolutional network trained from scratch on skeleton images.

mod checkpoint;
mod config;
mod gradcheck;
mod layers;
mod model;
mod tensor;
mod train;

use thiserror::Error;

pub use checkpoint::{load_model, save_model};
pub use config::{CnnConfig, ConvGeom, Plan, PoolGeom, PARAM_NAMES};
pub use gradcheck::{gradient_check, GradCheckReport, LayerCheck, SAMPLES_PER_LAYER};
pub use model::{init_model, sgd_step, Cache, CnnModel, Forward, Gradients, Sgd};
pub use tensor::Tensor;
pub use train::{train, train_with, Dataset, EpochStats, TrainHistory};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward needs a training-mode forward pass")]
    MissingCache,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let k = logits.row_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`), and
/// its gradient `(softmax - onehot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), CnnError> {
    let n = logits.rows();
    let k = logits.row_len();
    if logits.shape().len() != 2 || labels.len() != n {
        return Err(CnnError::ShapeMismatch(format!(
            "logits {:?} vs {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(CnnError::BadLabel { label, classes: k });
    }
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (row, &label) in grad.data_mut().chunks_exact_mut(k).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += log_sum - (row[label] - max);
        for v in row.iter_mut() {
            *v = (*v - max - log_sum).exp() / n as f64;
        }
        row[label] -= 1.0 / n as f64;
    }
    Ok((loss / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::zeros(vec![3, 5]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 3, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
        assert!((grad.data()[1] - 0.2 / 3.0).abs() < 1e-15);
        assert!((grad.data()[0] - (0.2 - 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn confident_true_class_has_tiny_loss() {
        let logits = Tensor::new(vec![1, 3], vec![50.0, 0.0, 0.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((0.0..1e-20).contains(&loss));
    }

    #[test]
    fn bad_label_rejected() {
        let logits = Tensor::zeros(vec![1, 3]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(CnnError::BadLabel { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let logits = Tensor::new(vec![1, 2], vec![1000.0, 1000.0]).unwrap();
        assert_eq!(softmax_rows(&logits).data(), &[0.5, 0.5]);
    }
}
