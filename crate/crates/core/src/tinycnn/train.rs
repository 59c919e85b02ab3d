use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{init_model, CnnModel, Gradients, Sgd};
use super::{softmax_cross_entropy, CnnConfig, CnnError, Tensor};
use crate::repr::SkeletonImage;

const SHUFFLE_STREAM: u64 = 2;
/// Samples per forward/backward pass inside one mini-batch. Bounds memory
/// for large batches without changing the gradient.
const MICRO_BATCH: usize = 64;

/// Inputs `N x H x W x C` with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self, CnnError> {
        if inputs.shape().len() != 4 || inputs.rows() != labels.len() {
            return Err(CnnError::ShapeMismatch(format!(
                "inputs {:?} vs {} labels",
                inputs.shape(),
                labels.len()
            )));
        }
        Ok(Dataset { inputs, labels })
    }

    /// Widens the images to `f64`; all images must share a shape.
    pub fn from_images(images: &[&SkeletonImage], labels: Vec<usize>) -> Result<Self, CnnError> {
        let Some(first) = images.first() else {
            return Dataset::new(Tensor::zeros(vec![0, 0, 0, 0]), labels);
        };
        let (h, w, c) = first.shape();
        let mut data = Vec::with_capacity(images.len() * h * w * c);
        for img in images {
            if img.shape() != (h, w, c) {
                return Err(CnnError::ShapeMismatch(format!(
                    "image {:?} vs {:?}",
                    img.shape(),
                    (h, w, c)
                )));
            }
            data.extend(img.data.iter().map(|&v| v as f64));
        }
        Dataset::new(Tensor::new(vec![images.len(), h, w, c], data)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.gather_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the training set, dropout off, after the epoch.
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    /// `epoch,loss,train_acc,val_acc` with a header row; missing validation
    /// accuracy is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_acc.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.loss, e.train_acc, val);
        }
        out
    }
}

/// Loss and accuracy with dropout disabled.
pub(crate) fn measure(model: &CnnModel, data: &Dataset) -> Result<(f64, f64), CnnError> {
    let scores = model.predict_scores(&data.inputs)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (i, (&label, pred)) in data.labels.iter().zip(scores.argmax_rows()).enumerate() {
        loss -= scores.row(i)[label].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(pred == label);
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_data(cfg: &CnnConfig, data: &Dataset) -> Result<(), CnnError> {
    let (h, w, c) = cfg.input_shape;
    if data.inputs.shape()[1..] != [h, w, c] {
        return Err(CnnError::ShapeMismatch(format!(
            "data {:?} vs configured input {:?}",
            data.inputs.shape(),
            cfg.input_shape
        )));
    }
    if let Some(&label) = data.labels.iter().find(|&&l| l >= cfg.num_classes) {
        return Err(CnnError::BadLabel {
            label,
            classes: cfg.num_classes,
        });
    }
    Ok(())
}

/// Mini-batch SGD for `cfg.epochs` epochs with a seeded shuffle per epoch.
pub fn train(
    cfg: &CnnConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
) -> Result<(CnnModel, TrainHistory), CnnError> {
    train_with(cfg, train_set, val_set, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    cfg: &CnnConfig,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(CnnModel, TrainHistory), CnnError> {
    if train_set.is_empty() {
        return Err(CnnError::EmptyTrainingSet);
    }
    check_data(cfg, train_set)?;
    if let Some(val) = val_set {
        check_data(cfg, val)?;
    }

    let mut model = init_model(cfg)?;
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let batch = cfg.batch_size.min(train_set.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for rows in order.chunks(batch) {
            let mut grads = Gradients::zeros_like(&model);
            for micro in rows.chunks(MICRO_BATCH) {
                let part = train_set.subset(micro);
                let fwd = model.forward(&part.inputs, true)?;
                let (_, mut dlogits) = softmax_cross_entropy(&fwd.logits, &part.labels)?;
                let weight = micro.len() as f64 / rows.len() as f64;
                dlogits.data_mut().iter_mut().for_each(|v| *v *= weight);
                grads.add_assign(&model.backward(&fwd, &dlogits)?);
            }
            opt.step(&mut model, &grads);
        }

        let (loss, train_acc) = measure(&model, train_set)?;
        let val_acc = match val_set {
            Some(v) if !v.is_empty() => Some(measure(&model, v)?.1),
            _ => None,
        };
        let stats = EpochStats {
            epoch,
            loss,
            train_acc,
            val_acc,
        };
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok((model, history))
}
