//! NTU RGB+D skeleton files, file-name metadata, body selection and dataset
//! indexing.
//!
//! Only the first three fields (x, y, z) of each joint line are consumed. Real
//! NTU files carry depth/colour projections, orientation and tracking state
//! after them; those are skipped.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::skeleton::{Body, BodyId, Frame, SampleMeta, SkeletonSequence, SkeletonTopology};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed sample name {name:?}: cannot parse {field} field")]
    MalformedName { name: String, field: &'static str },
    #[error("truncated file at frame {frame}")]
    Truncated { frame: usize },
    #[error("frame {frame}, line {line}: non-numeric field {text:?}")]
    NonNumeric {
        frame: usize,
        line: usize,
        text: String,
    },
    #[error("frame {frame}: expected {expected} joints, found {found}")]
    JointCountMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("no frame contains a body")]
    NoBodies,
    #[error("max_bodies must be at least 1")]
    NoBodySlots,
    #[error("duplicate sample name {0:?}")]
    DuplicateName(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

const NAME_FIELDS: [(char, &str); 5] = [
    ('S', "setup"),
    ('C', "camera"),
    ('P', "performer"),
    ('R', "replication"),
    ('A', "action"),
];

/// Parses `SsssCcccPpppRrrrAaaa[.ext]`, e.g. `S001C002P003R002A013.skeleton`.
/// Any directory prefix is ignored.
pub fn parse_ntu_filename(name: &str) -> Result<SampleMeta, IngestError> {
    let file = name.rsplit(['/', '\\']).next().unwrap_or(name);
    let stem = file.split('.').next().unwrap_or(file);
    let malformed = |field| IngestError::MalformedName {
        name: name.to_string(),
        field,
    };

    let mut ids = [0u32; 5];
    let bytes = stem.as_bytes();
    for (i, &(tag, field)) in NAME_FIELDS.iter().enumerate() {
        let start = i * 4;
        let chunk = bytes.get(start..start + 4).ok_or_else(|| malformed(field))?;
        if chunk[0] != tag as u8 || !chunk[1..].iter().all(u8::is_ascii_digit) {
            return Err(malformed(field));
        }
        ids[i] = std::str::from_utf8(&chunk[1..])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(field))?;
    }
    if bytes.len() != 20 {
        return Err(malformed("trailing"));
    }
    Ok(SampleMeta {
        setup_id: ids[0],
        camera_id: ids[1],
        performer_id: ids[2],
        replication_id: ids[3],
        action_id: ids[4],
        source_name: stem.to_string(),
    })
}

/// Line cursor that tracks line numbers and the frame being read.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    frame: usize,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str, IngestError> {
        loop {
            let (i, text) = self.inner.next().ok_or(IngestError::Truncated {
                frame: self.frame.max(1),
            })?;
            self.line = i + 1;
            if !text.trim().is_empty() {
                return Ok(text);
            }
        }
    }

    fn field<T: FromStr>(&self, text: &str) -> Result<T, IngestError> {
        text.parse().map_err(|_| IngestError::NonNumeric {
            frame: self.frame,
            line: self.line,
            text: text.to_string(),
        })
    }

    fn next_count(&mut self) -> Result<usize, IngestError> {
        let text = self.next_line()?;
        let first = text.split_whitespace().next().unwrap_or("");
        self.field(first)
    }
}

/// Parses NTU skeleton text. Frame numbers in errors are 1-based. The
/// returned metadata is empty; see [`read_skeleton_file`].
pub fn parse_skeleton_file(
    content: &str,
    topology: &SkeletonTopology,
) -> Result<SkeletonSequence, IngestError> {
    let mut lines = Lines {
        inner: content.lines().enumerate(),
        frame: 0,
        line: 0,
    };
    let frame_count = lines.next_count()?;
    if frame_count == 0 {
        return Err(IngestError::EmptySequence);
    }

    let mut frames = Vec::with_capacity(frame_count);
    for t in 0..frame_count {
        lines.frame = t + 1;
        let body_count = lines.next_count()?;
        let mut bodies = Vec::with_capacity(body_count);
        for _ in 0..body_count {
            let info = lines.next_line()?;
            let id_text = info.split_whitespace().next().unwrap_or("");
            let body_id: BodyId = lines.field(id_text)?;

            let joint_count = lines.next_count()?;
            if joint_count != topology.joint_count() {
                return Err(IngestError::JointCountMismatch {
                    frame: t + 1,
                    expected: topology.joint_count(),
                    found: joint_count,
                });
            }
            let mut joints = Vec::with_capacity(joint_count);
            for _ in 0..joint_count {
                let text = lines.next_line()?;
                let mut fields = text.split_whitespace();
                let mut p = [0.0f64; 3];
                for v in &mut p {
                    let f = fields.next().unwrap_or("");
                    *v = lines.field(f)?;
                    if !v.is_finite() {
                        return Err(IngestError::NonNumeric {
                            frame: t + 1,
                            line: lines.line,
                            text: f.to_string(),
                        });
                    }
                }
                joints.push(p);
            }
            bodies.push(Body { body_id, joints });
        }
        frames.push(Frame {
            bodies,
            timestamp_index: t,
        });
    }
    Ok(SkeletonSequence {
        frames,
        meta: SampleMeta::default(),
    })
}

/// Reads and parses a `.skeleton` file, taking metadata from its name when
/// the name follows the NTU convention.
pub fn read_skeleton_file(
    path: &Path,
    topology: &SkeletonTopology,
) -> Result<SkeletonSequence, IngestError> {
    let content = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut seq = parse_skeleton_file(&content, topology)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    seq.meta = parse_ntu_filename(name).unwrap_or_else(|_| SampleMeta {
        source_name: name.split('.').next().unwrap_or(name).to_string(),
        ..SampleMeta::default()
    });
    Ok(seq)
}

/// Writes a sequence in the NTU text layout with the 10-field body-info line
/// and 12-field joint lines of the real files. Coordinates use the shortest
/// representation that parses back to the same `f64`.
pub fn write_skeleton_file(seq: &SkeletonSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", seq.frames.len());
    for frame in &seq.frames {
        let _ = writeln!(out, "{}", frame.bodies.len());
        for body in &frame.bodies {
            let _ = writeln!(out, "{} 0 0 1 0 1 0 0 0 2", body.body_id);
            let _ = writeln!(out, "{}", body.joints.len());
            for p in &body.joints {
                let _ = writeln!(out, "{} {} {} 0 0 0 0 0 0 0 0 2", p[0], p[1], p[2]);
            }
        }
    }
    out
}

struct Candidate {
    id: BodyId,
    presence: usize,
    energy: f64,
}

/// Keeps `max_bodies` body slots per frame.
///
/// Bodies are ranked by the number of frames they appear in, then by motion
/// energy (sum of squared joint displacements between consecutive frames
/// where the body is present in both), then by smaller id. All-zero bodies
/// count as absent. Slots with no body in a frame are filled with zeros.
pub fn select_bodies(
    seq: &SkeletonSequence,
    max_bodies: usize,
) -> Result<SkeletonSequence, IngestError> {
    if max_bodies == 0 {
        return Err(IngestError::NoBodySlots);
    }
    if seq.frames.is_empty() {
        return Err(IngestError::EmptySequence);
    }

    let mut stats: BTreeMap<BodyId, Candidate> = BTreeMap::new();
    for (t, frame) in seq.frames.iter().enumerate() {
        let mut seen = HashSet::new();
        for body in &frame.bodies {
            if body.is_all_zero() || !seen.insert(body.body_id) {
                continue;
            }
            let entry = stats.entry(body.body_id).or_insert(Candidate {
                id: body.body_id,
                presence: 0,
                energy: 0.0,
            });
            entry.presence += 1;
            if t > 0 {
                if let Some(prev) = find(&seq.frames[t - 1], body.body_id) {
                    entry.energy += motion_energy(prev, body);
                }
            }
        }
    }

    let mut ranked: Vec<Candidate> = stats.into_values().collect();
    ranked.sort_by(|a, b| {
        b.presence
            .cmp(&a.presence)
            .then(b.energy.total_cmp(&a.energy))
            .then(a.id.cmp(&b.id))
    });
    let chosen: Vec<BodyId> = ranked.iter().take(max_bodies).map(|c| c.id).collect();

    let joint_count = seq
        .frames
        .iter()
        .flat_map(|f| f.bodies.first())
        .map(|b| b.joints.len())
        .next()
        .ok_or(IngestError::NoBodies)?;

    let frames = seq
        .frames
        .iter()
        .map(|frame| {
            let bodies = (0..max_bodies)
                .map(|slot| match chosen.get(slot) {
                    Some(&id) => find(frame, id)
                        .cloned()
                        .unwrap_or_else(|| Body::zeros(id, joint_count)),
                    None => Body::zeros(0, joint_count),
                })
                .collect();
            Frame {
                bodies,
                timestamp_index: frame.timestamp_index,
            }
        })
        .collect();

    Ok(SkeletonSequence {
        frames,
        meta: seq.meta.clone(),
    })
}

fn find(frame: &Frame, id: BodyId) -> Option<&Body> {
    frame
        .bodies
        .iter()
        .find(|b| b.body_id == id && !b.is_all_zero())
}

fn motion_energy(prev: &Body, cur: &Body) -> f64 {
    prev.joints
        .iter()
        .zip(&cur.joints)
        .map(|(a, b)| (0..3).map(|k| (b[k] - a[k]).powi(2)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Ntu60,
    Ntu120,
    Synthetic,
}

impl DatasetKind {
    pub fn max_action(self) -> Option<u32> {
        match self {
            DatasetKind::Ntu60 => Some(60),
            DatasetKind::Ntu120 => Some(120),
            DatasetKind::Synthetic => None,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Ntu60 => "ntu60",
            DatasetKind::Ntu120 => "ntu120",
            DatasetKind::Synthetic => "synthetic",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ntu60" => Ok(DatasetKind::Ntu60),
            "ntu120" => Ok(DatasetKind::Ntu120),
            "synthetic" => Ok(DatasetKind::Synthetic),
            other => Err(format!("unknown dataset kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub meta: SampleMeta,
    pub path: PathBuf,
}

/// Sorted by `source_name`; names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub kind: DatasetKind,
    pub entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

/// Indexes every parseable sample name. Unparseable names, and action ids
/// beyond what `kind` allows, land in the skipped list.
pub fn build_index<S: AsRef<str>>(
    names: &[S],
    kind: DatasetKind,
) -> Result<(DatasetIndex, Vec<Skipped>), IngestError> {
    let mut by_name: BTreeMap<String, IndexEntry> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut listed = HashSet::new();
    for name in names {
        let name = name.as_ref();
        if !listed.insert(name) {
            return Err(IngestError::DuplicateName(name.to_string()));
        }
        let meta = match parse_ntu_filename(name) {
            Ok(meta) => meta,
            Err(e) => {
                skipped.push(Skipped {
                    name: name.to_string(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Some(max) = kind.max_action() {
            if meta.action_id == 0 || meta.action_id > max {
                skipped.push(Skipped {
                    name: name.to_string(),
                    reason: format!("action {} outside 1..={max}", meta.action_id),
                });
                continue;
            }
        }
        if by_name.contains_key(&meta.source_name) {
            return Err(IngestError::DuplicateName(meta.source_name));
        }
        by_name.insert(
            meta.source_name.clone(),
            IndexEntry {
                meta,
                path: PathBuf::from(name),
            },
        );
    }
    Ok((
        DatasetIndex {
            kind,
            entries: by_name.into_values().collect(),
        },
        skipped,
    ))
}

/// Indexes the `.skeleton` files directly inside `root`.
pub fn scan_dir(
    root: &Path,
    kind: DatasetKind,
) -> Result<(DatasetIndex, Vec<Skipped>), IngestError> {
    let io = |source| IngestError::Io {
        path: root.to_path_buf(),
        source,
    };
    let mut names = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".skeleton") {
            names.push(name);
        }
    }
    names.sort();
    let (mut index, skipped) = build_index(&names, kind)?;
    for entry in &mut index.entries {
        entry.path = root.join(&entry.path);
    }
    Ok((index, skipped))
}

impl DatasetIndex {
    /// `source_name,setup,camera,performer,replication,action`, one line per
    /// entry, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let m = &e.meta;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m.source_name, m.setup_id, m.camera_id, m.performer_id, m.replication_id, m.action_id
            );
        }
        out
    }

    pub fn metas(&self) -> impl Iterator<Item = &SampleMeta> {
        self.entries.iter().map(|e| &e.meta)
    }
}
