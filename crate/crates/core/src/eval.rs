//! Split protocols, accuracy reports and late score fusion.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{DatasetIndex, DatasetKind};
use crate::repr::png_bytes;
use crate::skeleton::SampleMeta;
use crate::tinycnn::Tensor;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("protocol defines no {0}")]
    EmptyProtocol(&'static str),
    #[error("{protocol} split leaves the {side} side empty")]
    EmptySide { protocol: String, side: &'static str },
    #[error("bad protocol config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("nothing to fuse")]
    EmptyFusion,
    #[error("row {row} is not a probability vector (sum {sum})")]
    NotProbabilities { row: usize, sum: f64 },
    #[error("{scores} score rows but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("score file: {0}")]
    ScoreFormat(String),
    #[error("png: {0}")]
    Png(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn matches(self, n: u32) -> bool {
        n.is_multiple_of(2) == (self == Parity::Even)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SplitProtocol {
    CrossSubject { train_performers: BTreeSet<u32> },
    CrossView { test_cameras: BTreeSet<u32> },
    CrossSetup { train_parity: Parity },
}

const NTU60_CROSS_SUBJECT: &str = include_str!("../protocols/ntu60_cross_subject.cfg");
const NTU120_CROSS_SUBJECT: &str = include_str!("../protocols/ntu120_cross_subject.cfg");
const CROSS_VIEW: &str = include_str!("../protocols/cross_view.cfg");
const CROSS_SETUP: &str = include_str!("../protocols/cross_setup.cfg");

fn id_set(key: &str, value: &str) -> Result<BTreeSet<u32>, EvalError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse()
                .map_err(|_| EvalError::Config(format!("{key}: {v:?} is not an id")))
        })
        .collect()
}

impl SplitProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            SplitProtocol::CrossSubject { .. } => "cross-subject",
            SplitProtocol::CrossView { .. } => "cross-view",
            SplitProtocol::CrossSetup { .. } => "cross-setup",
        }
    }

    /// The shipped default for a protocol name (`cross-subject`, `cross-view`,
    /// `cross-setup`, or the short forms `xsub`, `xview`, `xset`). Synthetic
    /// data uses the NTU 60 subject list.
    pub fn default_for(name: &str, kind: DatasetKind) -> Result<Self, EvalError> {
        let text = match (name, kind) {
            ("cross-subject" | "xsub", DatasetKind::Ntu120) => NTU120_CROSS_SUBJECT,
            ("cross-subject" | "xsub", _) => NTU60_CROSS_SUBJECT,
            ("cross-view" | "xview", _) => CROSS_VIEW,
            ("cross-setup" | "xset", _) => CROSS_SETUP,
            _ => return Err(EvalError::Config(format!("unknown protocol {name:?}"))),
        };
        Self::parse(text)
    }

    /// Reads a `key = value` protocol file; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut fields = HashMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| EvalError::Config(format!("expected key = value, got {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| EvalError::Config(format!("missing {k}")))
        };
        let protocol = match get("protocol")? {
            "cross-subject" => SplitProtocol::CrossSubject {
                train_performers: id_set("train_performers", get("train_performers")?)?,
            },
            "cross-view" => SplitProtocol::CrossView {
                test_cameras: id_set("test_cameras", get("test_cameras")?)?,
            },
            "cross-setup" => SplitProtocol::CrossSetup {
                train_parity: match get("train_parity")? {
                    "even" => Parity::Even,
                    "odd" => Parity::Odd,
                    other => {
                        return Err(EvalError::Config(format!(
                            "train_parity must be even or odd, got {other:?}"
                        )))
                    }
                },
            },
            other => return Err(EvalError::Config(format!("unknown protocol {other:?}"))),
        };
        protocol.validate()?;
        Ok(protocol)
    }

    /// The config-file form accepted by [`SplitProtocol::parse`].
    pub fn to_config(&self) -> String {
        let join = |s: &BTreeSet<u32>| s.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let body = match self {
            SplitProtocol::CrossSubject { train_performers } => {
                format!("train_performers = {}", join(train_performers))
            }
            SplitProtocol::CrossView { test_cameras } => {
                format!("test_cameras = {}", join(test_cameras))
            }
            SplitProtocol::CrossSetup { train_parity } => format!(
                "train_parity = {}",
                if *train_parity == Parity::Even { "even" } else { "odd" }
            ),
        };
        format!("protocol = {}\n{body}\n", self.name())
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match self {
            SplitProtocol::CrossSubject { train_performers } if train_performers.is_empty() => {
                Err(EvalError::EmptyProtocol("train performers"))
            }
            SplitProtocol::CrossView { test_cameras } if test_cameras.is_empty() => {
                Err(EvalError::EmptyProtocol("test cameras"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_train(&self, meta: &SampleMeta) -> bool {
        match self {
            SplitProtocol::CrossSubject { train_performers } => {
                train_performers.contains(&meta.performer_id)
            }
            SplitProtocol::CrossView { test_cameras } => !test_cameras.contains(&meta.camera_id),
            SplitProtocol::CrossSetup { train_parity } => train_parity.matches(meta.setup_id),
        }
    }
}

impl fmt::Display for SplitProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitProtocol {
    type Err = EvalError;

    /// A protocol name with the NTU 60 defaults; see [`SplitProtocol::default_for`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::default_for(s, DatasetKind::Ntu60)
    }
}

/// Positions into the split input, each side in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_metas<'a>(
    metas: impl IntoIterator<Item = &'a SampleMeta>,
    protocol: &SplitProtocol,
) -> Result<Split, EvalError> {
    protocol.validate()?;
    let mut out = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, meta) in metas.into_iter().enumerate() {
        if protocol.is_train(meta) {
            out.train.push(i);
        } else {
            out.test.push(i);
        }
    }
    for (side, rows) in [("train", &out.train), ("test", &out.test)] {
        if rows.is_empty() {
            return Err(EvalError::EmptySide {
                protocol: protocol.to_string(),
                side,
            });
        }
    }
    Ok(out)
}

/// Splits index entries; positions refer to `index.entries`.
pub fn split(index: &DatasetIndex, protocol: &SplitProtocol) -> Result<Split, EvalError> {
    split_metas(index.metas(), protocol)
}

/// Rows may drift this far from summing to one, e.g. after rounding in an
/// externally produced score file.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

fn check_probabilities(scores: &Tensor) -> Result<(), EvalError> {
    for row in 0..scores.rows() {
        let r = scores.row(row);
        let sum: f64 = r.iter().sum();
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(EvalError::NotProbabilities { row, sum });
        }
    }
    Ok(())
}

/// Unweighted elementwise mean of equally shaped `N x K` score matrices.
pub fn late_fusion(score_sets: &[Tensor]) -> Result<Tensor, EvalError> {
    let first = score_sets.first().ok_or(EvalError::EmptyFusion)?;
    if first.shape().len() != 2 {
        return Err(EvalError::ShapeMismatch(format!(
            "scores must be N x K, got {:?}",
            first.shape()
        )));
    }
    for s in score_sets {
        if s.shape() != first.shape() {
            return Err(EvalError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                s.shape(),
                first.shape()
            )));
        }
        check_probabilities(s)?;
    }
    let m = score_sets.len() as f64;
    let mut data = vec![0.0; first.len()];
    for s in score_sets {
        for (acc, v) in data.iter_mut().zip(s.data()) {
            *acc += v;
        }
    }
    data.iter_mut().for_each(|v| *v /= m);
    Tensor::new(first.shape().to_vec(), data).map_err(|e| EvalError::ShapeMismatch(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    /// `None` for classes absent from the test labels.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub macro_accuracy: f64,
    pub overall_accuracy: f64,
    pub protocol: Option<SplitProtocol>,
}

/// Scores the row-wise argmax (ties to the smaller class) against `labels`.
/// The class count is the score width.
pub fn evaluate(scores: &Tensor, labels: &[usize]) -> Result<EvalReport, EvalError> {
    if scores.shape().len() != 2 {
        return Err(EvalError::ShapeMismatch(format!(
            "scores must be N x K, got {:?}",
            scores.shape()
        )));
    }
    if scores.rows() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.rows(),
            labels: labels.len(),
        });
    }
    let k = scores.row_len();
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(EvalError::BadLabel { label, classes: k });
    }

    let mut confusion = vec![vec![0usize; k]; k];
    for (&label, pred) in labels.iter().zip(scores.argmax_rows()) {
        confusion[label][pred] += 1;
    }
    let per_class_accuracy: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect();
    let present: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
    let macro_accuracy = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let overall_accuracy = if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    };
    Ok(EvalReport {
        confusion,
        per_class_accuracy,
        macro_accuracy,
        overall_accuracy,
        protocol: None,
    })
}

/// Side length in pixels of one confusion cell in the heat map.
const HEATMAP_CELL: usize = 8;

impl EvalReport {
    pub fn with_protocol(mut self, protocol: SplitProtocol) -> Self {
        self.protocol = Some(protocol);
        self
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn test_count(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// K rows of K integers, no header.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Grayscale heat map of the row-normalized confusion matrix: white is
    /// the whole class, black is nothing. Rows without samples stay black.
    pub fn confusion_png(&self) -> Result<Vec<u8>, EvalError> {
        let k = self.num_classes();
        let side = k * HEATMAP_CELL;
        let mut pixels = vec![0u8; side * side];
        for (r, row) in self.confusion.iter().enumerate() {
            let total: usize = row.iter().sum();
            for (c, &count) in row.iter().enumerate() {
                let level = if total == 0 {
                    0
                } else {
                    (255.0 * count as f64 / total as f64).round() as u8
                };
                for y in r * HEATMAP_CELL..(r + 1) * HEATMAP_CELL {
                    let line = &mut pixels[y * side..][..side];
                    line[c * HEATMAP_CELL..(c + 1) * HEATMAP_CELL].fill(level);
                }
            }
        }
        png_bytes(side, side, png::ColorType::Grayscale, &pixels)
            .map_err(|e| EvalError::Png(e.to_string()))
    }

    /// `protocol,overall,macro` as one line; `none` when no protocol is set.
    pub fn summary_line(&self) -> String {
        let protocol = self.protocol.as_ref().map_or("none", SplitProtocol::name);
        format!("{protocol},{},{}", self.overall_accuracy, self.macro_accuracy)
    }

    /// `class,samples,correct,accuracy` with 1-based action ids; accuracy is
    /// empty for classes without samples.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,samples,correct,accuracy\n");
        for (c, row) in self.confusion.iter().enumerate() {
            let acc = self.per_class_accuracy[c]
                .map(|a| a.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", c + 1, row.iter().sum::<usize>(), row[c], acc);
        }
        out
    }

    /// Writes `confusion.csv`, `confusion.png`, `summary.csv` and
    /// `per_class.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), EvalError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| EvalError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let files: [(&str, Vec<u8>); 4] = [
            ("confusion.csv", self.confusion_csv().into_bytes()),
            ("confusion.png", self.confusion_png()?),
            ("summary.csv", format!("{}\n", self.summary_line()).into_bytes()),
            ("per_class.csv", self.per_class_csv().into_bytes()),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(())
    }
}

/// Per-sample class probabilities in the interchange format: one CSV row per
/// sample with `source_name`, `true_label`, then the K probabilities. Labels
/// are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub names: Vec<String>,
    pub labels: Vec<usize>,
    pub scores: Tensor,
}

impl ScoreTable {
    pub fn new(names: Vec<String>, labels: Vec<usize>, scores: Tensor) -> Result<Self, EvalError> {
        if scores.shape().len() != 2 || names.len() != scores.rows() || labels.len() != scores.rows() {
            return Err(EvalError::ShapeMismatch(format!(
                "{} names, {} labels, scores {:?}",
                names.len(),
                labels.len(),
                scores.shape()
            )));
        }
        Ok(ScoreTable {
            names,
            labels,
            scores,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for (i, name) in self.names.iter().enumerate() {
            let mut record = vec![name.clone(), self.labels[i].to_string()];
            record.extend(self.scores.row(i).iter().map(f64::to_string));
            w.write_record(&record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV of UTF-8 fields")
    }

    /// Parses the interchange format. A leading row whose first field is
    /// `source_name` is taken as a header and skipped.
    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let bad = |line: usize, msg: String| EvalError::ScoreFormat(format!("line {line}: {msg}"));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let (mut names, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
        let mut width = None;
        for (i, record) in reader.records().enumerate() {
            let line = i + 1;
            let record = record.map_err(|e| bad(line, e.to_string()))?;
            if i == 0 && record.get(0) == Some("source_name") {
                continue;
            }
            if record.len() < 3 {
                return Err(bad(line, "need a name, a label and at least one score".into()));
            }
            let k = record.len() - 2;
            if *width.get_or_insert(k) != k {
                return Err(bad(line, format!("{k} scores, earlier rows have {}", width.unwrap_or(0))));
            }
            names.push(record[0].to_string());
            labels.push(
                record[1]
                    .parse()
                    .map_err(|_| bad(line, format!("bad label {:?}", &record[1])))?,
            );
            for field in record.iter().skip(2) {
                data.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| bad(line, format!("bad score {field:?}")))?,
                );
            }
        }
        let k = width.ok_or_else(|| EvalError::ScoreFormat("no rows".into()))?;
        let scores = Tensor::new(vec![names.len(), k], data)
            .map_err(|e| EvalError::ScoreFormat(e.to_string()))?;
        ScoreTable::new(names, labels, scores)
    }

    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text)
            .map_err(|e| EvalError::ScoreFormat(format!("{}: {e}", path.display())))
    }

    pub fn evaluate(&self) -> Result<EvalReport, EvalError> {
        evaluate(&self.scores, &self.labels)
    }
}

/// Fuses tables that may list samples in different orders. Rows follow the
/// first table; every table must cover the same samples with the same labels.
pub fn fuse_tables(tables: &[ScoreTable]) -> Result<ScoreTable, EvalError> {
    let first = tables.first().ok_or(EvalError::EmptyFusion)?;
    let mut aligned = Vec::with_capacity(tables.len());
    for t in tables {
        if t.names.len() != first.names.len() {
            return Err(EvalError::ShapeMismatch(format!(
                "{} samples vs {}",
                t.names.len(),
                first.names.len()
            )));
        }
        let position: HashMap<&str, usize> =
            t.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let rows = first
            .names
            .iter()
            .zip(&first.labels)
            .map(|(name, &label)| match position.get(name.as_str()) {
                Some(&r) if t.labels[r] == label => Ok(r),
                Some(&r) => Err(EvalError::ShapeMismatch(format!(
                    "{name}: label {} vs {label}",
                    t.labels[r]
                ))),
                None => Err(EvalError::ShapeMismatch(format!("{name} missing from a score table"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        aligned.push(t.scores.gather_rows(&rows));
    }
    let scores = late_fusion(&aligned)?;
    ScoreTable::new(first.names.clone(), first.labels.clone(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::new(vec![rows, cols], v.to_vec()).unwrap()
    }

    #[test]
    fn fusion_mean() {
        let f = late_fusion(&[t(1, 2, &[0.6, 0.4]), t(1, 2, &[0.2, 0.8])]).unwrap();
        assert!((f.data()[0] - 0.4).abs() < 1e-15 && (f.data()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn fusion_errors() {
        assert!(matches!(late_fusion(&[]), Err(EvalError::EmptyFusion)));
        assert!(matches!(
            late_fusion(&[t(1, 2, &[0.5, 0.5]), t(2, 1, &[1.0, 1.0])]),
            Err(EvalError::ShapeMismatch(_))
        ));
        assert!(matches!(
            late_fusion(&[t(1, 2, &[0.9, 0.9])]),
            Err(EvalError::NotProbabilities { row: 0, .. })
        ));
    }

    #[test]
    fn all_class_zero_predictions() {
        let scores = t(4, 2, &[0.9, 0.1, 0.6, 0.4, 0.5, 0.5, 0.7, 0.3]);
        let r = evaluate(&scores, &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 0], vec![2, 0]]);
        assert_eq!((r.macro_accuracy, r.overall_accuracy), (0.5, 0.5));
    }

    #[test]
    fn absent_class_excluded_from_macro() {
        let scores = t(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let r = evaluate(&scores, &[0, 1, 1]).unwrap();
        assert_eq!(r.per_class_accuracy, vec![Some(1.0), Some(0.5), None]);
        assert_eq!(r.macro_accuracy, 0.75);
        assert!(r.per_class_csv().ends_with("3,0,0,\n"));
    }

    #[test]
    fn evaluate_errors() {
        let scores = t(2, 2, &[0.5; 4]);
        assert!(matches!(evaluate(&scores, &[0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(evaluate(&scores, &[0, 2]), Err(EvalError::BadLabel { .. })));
    }

    #[test]
    fn shipped_protocols_parse() {
        for name in ["cross-subject", "cross-view", "cross-setup", "xsub", "xview", "xset"] {
            for kind in [DatasetKind::Ntu60, DatasetKind::Ntu120, DatasetKind::Synthetic] {
                let p = SplitProtocol::default_for(name, kind).unwrap();
                assert_eq!(SplitProtocol::parse(&p.to_config()).unwrap(), p);
            }
        }
        let SplitProtocol::CrossSubject { train_performers } =
            SplitProtocol::default_for("xsub", DatasetKind::Ntu120).unwrap()
        else {
            panic!("expected cross-subject");
        };
        assert_eq!(train_performers.len(), 53);
    }

    #[test]
    fn protocol_config_errors() {
        assert!(SplitProtocol::parse("protocol = cross-setup\ntrain_parity = both").is_err());
        assert!(matches!(
            SplitProtocol::parse("protocol = cross-view\ntest_cameras ="),
            Err(EvalError::EmptyProtocol(_))
        ));
        assert!(SplitProtocol::parse("protocol = cross-subject").is_err());
        assert!("leave-one-out".parse::<SplitProtocol>().is_err());
    }

    #[test]
    fn summary_line_format() {
        let r = evaluate(&t(1, 2, &[0.2, 0.8]), &[1]).unwrap();
        assert_eq!(r.summary_line(), "none,1,1");
        let r = r.with_protocol("xview".parse().unwrap());
        assert_eq!(r.summary_line(), "cross-view,1,1");
    }

    #[test]
    fn score_csv_round_trip_and_header() {
        let table = ScoreTable::new(
            vec!["S001C001P001R001A001".into(), "S001C001P001R001A002".into()],
            vec![0, 1],
            t(2, 2, &[0.25, 0.75, 1.0 / 3.0, 2.0 / 3.0]),
        )
        .unwrap();
        let csv = table.to_csv();
        assert_eq!(ScoreTable::from_csv(&csv).unwrap(), table);
        let with_header = format!("source_name,true_label,p1,p2\n{csv}");
        assert_eq!(ScoreTable::from_csv(&with_header).unwrap(), table);
        assert!(ScoreTable::from_csv("a,0,0.5\nb,1,0.5,0.5\n").is_err());
        assert!(ScoreTable::from_csv("a,x,0.5,0.5\n").is_err());
    }

    #[test]
    fn fuse_tables_aligns_by_name() {
        let a = ScoreTable::new(
            vec!["a".into(), "b".into()],
            vec![0, 1],
            t(2, 2, &[0.8, 0.2, 0.4, 0.6]),
        )
        .unwrap();
        let b = ScoreTable::new(
            vec!["b".into(), "a".into()],
            vec![1, 0],
            t(2, 2, &[0.2, 0.8, 0.6, 0.4]),
        )
        .unwrap();
        let f = fuse_tables(&[a.clone(), b]).unwrap();
        assert_eq!(f.names, a.names);
        assert!((f.scores.data()[0] - 0.7).abs() < 1e-15);
        assert!((f.scores.data()[3] - 0.7).abs() < 1e-15);

        let c = ScoreTable::new(vec!["a".into(), "c".into()], vec![0, 1], t(2, 2, &[0.5; 4])).unwrap();
        assert!(fuse_tables(&[a, c]).is_err());
    }

    #[test]
    fn heatmap_dimensions() {
        let r = evaluate(&t(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]), &[0, 1]).unwrap();
        let png = r.confusion_png().unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(png));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (24, 24));
        assert_eq!(buf[0], 255);
        assert_eq!(buf[8 * 24 + 8 * 2], 255);
        assert_eq!(buf[8 * 24 + 8], 0);
    }
}
