//! Plumbing shared by the subcommands: loading, encoding, training, scoring.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Array3;
use rayon::prelude::*;

use skelimg_core::ingest::{read_skeleton_file, scan_dir, select_bodies};
use skelimg_core::repr::{encode, read_tensor_file};
use skelimg_core::synth::generate;
use skelimg_core::tinycnn::{load_model, save_model, train_with};
use skelimg_core::{
    kinect25_topology, CnnConfig, CnnModel, Dataset, DatasetIndex, DatasetKind, EncodeConfig,
    Representation, SampleMeta, ScoreTable, SkeletonImage, SkeletonSequence, SynthSpec, Tensor, TrainHistory,
};

/// One encoded image with the metadata of its sequence.
#[derive(Debug, Clone)]
pub struct Sample {
    pub meta: SampleMeta,
    pub image: Array3<f32>,
}

/// Encoded images grouped by image kind tag, each group sorted by name.
pub type Encoded = BTreeMap<String, Vec<Sample>>;

pub fn index_root(root: &Path, kind: DatasetKind) -> Result<DatasetIndex> {
    let (index, skipped) =
        scan_dir(root, kind).with_context(|| format!("indexing {}", root.display()))?;
    for s in &skipped {
        eprintln!("skipping {}: {}", s.name, s.reason);
    }
    if index.entries.is_empty() {
        bail!("no usable .skeleton files in {}", root.display());
    }
    Ok(index)
}

pub fn load_sequences(index: &DatasetIndex) -> Result<Vec<SkeletonSequence>> {
    let topology = kinect25_topology();
    index
        .entries
        .par_iter()
        .map(|e| {
            read_skeleton_file(&e.path, &topology)
                .with_context(|| format!("reading {}", e.path.display()))
        })
        .collect()
}

pub fn synth_sequences(spec: &SynthSpec) -> Result<Vec<SkeletonSequence>> {
    let data = generate(spec, &kinect25_topology()).context("generating synthetic data")?;
    Ok(data.into_iter().map(|(seq, _)| seq).collect())
}

/// Body-selects and encodes every sequence, in input order.
pub fn encode_sequences(
    seqs: &[SkeletonSequence],
    repr: Representation,
    cfg: &EncodeConfig,
) -> Result<Vec<SkeletonImage>> {
    let topology = kinect25_topology();
    let per_seq: Vec<Vec<SkeletonImage>> = seqs
        .par_iter()
        .map(|seq| {
            let selected = select_bodies(seq, cfg.persons)
                .with_context(|| format!("selecting bodies of {}", seq.meta.source_name))?;
            encode(&selected, &topology, repr, cfg)
                .with_context(|| format!("encoding {}", seq.meta.source_name))
        })
        .collect::<Result<_>>()?;
    Ok(per_seq.into_iter().flatten().collect())
}

pub fn group(images: Vec<SkeletonImage>) -> Encoded {
    let mut out = Encoded::new();
    for img in images {
        out.entry(img.kind.to_string()).or_default().push(Sample {
            meta: img.source_meta,
            image: img.data,
        });
    }
    for samples in out.values_mut() {
        samples.sort_by(|a, b| a.meta.source_name.cmp(&b.meta.source_name));
    }
    out
}

pub fn tensor_path(dir: &Path, name: &str, kind: &str) -> PathBuf {
    dir.join(format!("{name}.{kind}.skt"))
}

/// Reads every `.skt` tensor in `dir`, taking metadata from the file names.
pub fn read_encoded(dir: &Path) -> Result<Encoded> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "skt") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        bail!("no encoded tensors (.skt) in {}", dir.display());
    }
    let loaded: Vec<_> = paths
        .par_iter()
        .map(|path| -> Result<(String, Sample)> {
            let (image, kind) =
                read_tensor_file(path).with_context(|| format!("reading {}", path.display()))?;
            let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let name = file.split('.').next().unwrap_or_default();
            let meta = skelimg_core::ingest::parse_ntu_filename(name)
                .with_context(|| format!("tensor {}", path.display()))?;
            Ok((kind.to_string(), Sample { meta, image }))
        })
        .collect::<Result<_>>()?;
    let mut out = Encoded::new();
    for (kind, sample) in loaded {
        out.entry(kind).or_default().push(sample);
    }
    Ok(out)
}

pub fn label_of(meta: &SampleMeta) -> Result<usize> {
    if meta.action_id == 0 {
        bail!("{}: no action id to derive a label from", meta.source_name);
    }
    Ok(meta.action_id as usize - 1)
}

pub fn to_dataset(samples: &[Sample], rows: &[usize]) -> Result<Dataset> {
    let Some(&first) = rows.first() else {
        bail!("no samples selected");
    };
    let shape = samples[first].image.dim();
    let mut data = Vec::with_capacity(rows.len() * samples[first].image.len());
    let mut labels = Vec::with_capacity(rows.len());
    for &r in rows {
        let s = &samples[r];
        if s.image.dim() != shape {
            bail!(
                "{}: image shape {:?} differs from {:?}",
                s.meta.source_name,
                s.image.dim(),
                shape
            );
        }
        data.extend(s.image.iter().map(|&v| v as f64));
        labels.push(label_of(&s.meta)?);
    }
    let (h, w, c) = shape;
    Ok(Dataset::new(Tensor::new(vec![rows.len(), h, w, c], data)?, labels)?)
}

/// User overrides on top of [`CnnConfig::new`] defaults.
#[derive(Debug, Clone, Default)]
pub struct CnnOverrides {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub momentum: Option<f64>,
    pub dropout: Option<f64>,
    pub filters: Option<[usize; 3]>,
    pub hidden: Option<usize>,
    pub classes: Option<usize>,
    pub seed: u64,
}

impl CnnOverrides {
    pub fn config(&self, input_shape: (usize, usize, usize), observed_classes: usize) -> CnnConfig {
        let mut cfg = CnnConfig::new(input_shape, self.classes.unwrap_or(observed_classes));
        cfg.seed = self.seed;
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.batch {
            cfg.batch_size = v;
        }
        if let Some(v) = self.momentum {
            cfg.momentum = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout_rate = v;
        }
        if let Some(v) = self.filters {
            cfg.conv_filters = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden_units = v;
        }
        cfg
    }
}

/// Class count implied by the largest action id across all groups.
pub fn observed_classes(encoded: &Encoded) -> usize {
    encoded
        .values()
        .flatten()
        .map(|s| s.meta.action_id as usize)
        .max()
        .unwrap_or(0)
}

pub fn train_group(
    kind: &str,
    samples: &[Sample],
    rows: &[usize],
    overrides: &CnnOverrides,
    classes: usize,
) -> Result<(CnnModel, TrainHistory)> {
    let data = to_dataset(samples, rows)?;
    let shape = samples[rows[0]].image.dim();
    let cfg = overrides.config(shape, classes);
    let (model, history) = train_with(&cfg, &data, None, |e| {
        eprintln!(
            "[{kind}] epoch {}/{} loss {:.5} train_acc {:.4}",
            e.epoch, cfg.epochs, e.loss, e.train_acc
        );
    })
    .with_context(|| format!("training on {kind} images"))?;
    Ok((model, history))
}

pub fn score_group(model: &CnnModel, samples: &[Sample], rows: &[usize]) -> Result<ScoreTable> {
    let data = to_dataset(samples, rows)?;
    let scores = model.predict_scores(&data.inputs)?;
    let names = rows.iter().map(|&r| samples[r].meta.source_name.clone()).collect();
    Ok(ScoreTable::new(names, data.labels, scores)?)
}

pub fn checkpoint_path(dir: &Path, kind: &str) -> PathBuf {
    dir.join(format!("model.{kind}.ckpt"))
}

pub fn write_checkpoint(dir: &Path, kind: &str, model: &CnnModel) -> Result<()> {
    let path = checkpoint_path(dir, kind);
    std::fs::write(&path, save_model(model)).with_context(|| format!("writing {}", path.display()))
}

/// Every `model.<kind>.ckpt` in `dir`, keyed by kind.
pub fn read_checkpoints(dir: &Path) -> Result<BTreeMap<String, CnnModel>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let Some(file) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(kind) = file.strip_prefix("model.").and_then(|f| f.strip_suffix(".ckpt")) {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let model = load_model(&bytes).with_context(|| format!("loading {}", path.display()))?;
            out.insert(kind.to_string(), model);
        }
    }
    if out.is_empty() {
        bail!("no model.<kind>.ckpt checkpoints in {}", dir.display());
    }
    Ok(out)
}
