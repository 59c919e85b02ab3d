//! Skeleton image representations.
//!
//! Every builder follows the same pipeline per person: arrange joints along a
//! chain, optionally subtract a reference joint, min-max normalize each
//! coordinate channel, resize the time axis, then stack persons along the
//! channel axis.
//!
//! | builder | rows | coordinates |
//! |---|---|---|
//! | [`build_tsrji`] | depth-first chain (49 for Kinect) | relative to one of four reference joints |
//! | [`build_tssi`] | depth-first chain | absolute |
//! | [`build_du`] | joints 1..=25 | absolute |
//! | [`build_refjoints`] | joints 1..=25 | relative to each reference joint, stacked |
//! | [`build_motion`] | joints 1..=25 | frame-to-frame differences |
//! | [`build_random_order`] | seeded permutation of joints | absolute |

mod chain;
mod export;
mod matrix;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array3, Axis};
use thiserror::Error;

pub use chain::{depth_first_chain, identity_chain, random_chain, Chain};
pub use export::{
    quantize, quantize_to_png, read_tensor, read_tensor_file, write_tensor, write_tensor_file,
};
pub(crate) use export::png_bytes;
pub use matrix::{
    assemble_matrix, motion_matrix, normalize_minmax, reference_transform, resize_temporal,
};

use crate::skeleton::{kinect, JointId, SampleMeta, SkeletonSequence, SkeletonTopology, TopologyViolation};

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("invalid topology: {0}")]
    InvalidTopology(#[from] TopologyViolation),
    #[error("frame {frame} has no body in slot {slot}")]
    MissingBodySlot { frame: usize, slot: usize },
    #[error("motion images need at least 2 frames, got {frames}")]
    TooShort { frames: usize },
    #[error("non-finite value in matrix")]
    NonFinite,
    #[error("empty time axis or zero target width")]
    EmptyAxis,
    #[error("persons must be at least 1")]
    NoPersons,
    #[error("cannot stack images of shape {expected:?} and {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("nothing to stack")]
    EmptyStack,
    #[error("reference joint {0} is not in the topology")]
    BadReference(JointId),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which representation an image holds. Stacked images list their parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ImageKind {
    TsrjiA,
    TsrjiB,
    TsrjiC,
    TsrjiD,
    Du,
    Tssi,
    RefJoints,
    Motion,
    Random,
    Stacked(Vec<ImageKind>),
}

impl ImageKind {
    pub const TSRJI: [ImageKind; 4] = [
        ImageKind::TsrjiA,
        ImageKind::TsrjiB,
        ImageKind::TsrjiC,
        ImageKind::TsrjiD,
    ];

    fn push_parts(&self, out: &mut Vec<ImageKind>) {
        match self {
            ImageKind::Stacked(parts) => parts.iter().for_each(|p| p.push_parts(out)),
            other => out.push(other.clone()),
        }
    }
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            ImageKind::TsrjiA => "tsrji_a",
            ImageKind::TsrjiB => "tsrji_b",
            ImageKind::TsrjiC => "tsrji_c",
            ImageKind::TsrjiD => "tsrji_d",
            ImageKind::Du => "du",
            ImageKind::Tssi => "tssi",
            ImageKind::RefJoints => "refjoints",
            ImageKind::Motion => "motion",
            ImageKind::Random => "random",
            ImageKind::Stacked(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                return Ok(());
            }
        };
        f.write_str(tag)
    }
}

impl FromStr for ImageKind {
    type Err = ReprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains('+') {
            return s
                .split('+')
                .map(str::parse)
                .collect::<Result<Vec<_>, _>>()
                .map(ImageKind::Stacked);
        }
        Ok(match s {
            "tsrji_a" => ImageKind::TsrjiA,
            "tsrji_b" => ImageKind::TsrjiB,
            "tsrji_c" => ImageKind::TsrjiC,
            "tsrji_d" => ImageKind::TsrjiD,
            "du" => ImageKind::Du,
            "tssi" => ImageKind::Tssi,
            "refjoints" => ImageKind::RefJoints,
            "motion" => ImageKind::Motion,
            "random" => ImageKind::Random,
            other => return Err(ReprError::Format(format!("unknown image kind {other:?}"))),
        })
    }
}

/// An `H x W x C` array with values in `[0, 1]`. Width is time.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonImage {
    pub data: Array3<f32>,
    pub kind: ImageKind,
    pub persons: usize,
    pub source_meta: SampleMeta,
}

impl SkeletonImage {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }
}

/// The four stable joints whose positions are subtracted in TSRJI images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceJointSet {
    pub left_shoulder: JointId,
    pub right_shoulder: JointId,
    pub left_hip: JointId,
    pub right_hip: JointId,
}

impl ReferenceJointSet {
    /// Kinect v2 numbering: shoulders 5 and 9, hips 13 and 17.
    pub const KINECT25: ReferenceJointSet = ReferenceJointSet {
        left_shoulder: kinect::SHOULDER_LEFT,
        right_shoulder: kinect::SHOULDER_RIGHT,
        left_hip: kinect::HIP_LEFT,
        right_hip: kinect::HIP_RIGHT,
    };

    /// In image order a, b, c, d.
    pub fn as_array(&self) -> [JointId; 4] {
        [
            self.left_shoulder,
            self.right_shoulder,
            self.left_hip,
            self.right_hip,
        ]
    }

    pub fn check(&self, topology: &SkeletonTopology) -> Result<(), ReprError> {
        let refs = self.as_array();
        for (i, &r) in refs.iter().enumerate() {
            if !topology.contains(r) || refs[..i].contains(&r) {
                return Err(ReprError::BadReference(r));
            }
        }
        Ok(())
    }
}

impl Default for ReferenceJointSet {
    fn default() -> Self {
        Self::KINECT25
    }
}

/// Settings shared by every builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeConfig {
    pub target_frames: usize,
    pub persons: usize,
    pub refs: ReferenceJointSet,
    /// Seed for the random joint order baseline.
    pub seed: u64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            target_frames: 100,
            persons: 2,
            refs: ReferenceJointSet::KINECT25,
            seed: 0,
        }
    }
}

fn finish_person(m: &Array3<f64>, target: usize) -> Result<Array3<f32>, ReprError> {
    let normalized = normalize_minmax(m)?;
    let resized = resize_temporal(&normalized, target)?;
    Ok(resized.mapv(|v| v as f32))
}

fn concat_channels(parts: &[Array3<f32>]) -> Array3<f32> {
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(2), &views).expect("parts share rows and width")
}

/// Builds one image from a chain, normalizing and resizing each person
/// separately before stacking them.
pub fn build_chain_image(
    seq: &SkeletonSequence,
    chain: &Chain,
    reference: Option<JointId>,
    kind: ImageKind,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    if cfg.persons == 0 {
        return Err(ReprError::NoPersons);
    }
    let parts = (0..cfg.persons)
        .map(|slot| {
            let m = assemble_matrix(seq, slot, chain, reference)?;
            finish_person(&m, cfg.target_frames)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SkeletonImage {
        data: concat_channels(&parts),
        kind,
        persons: cfg.persons,
        source_meta: seq.meta.clone(),
    })
}

/// The four reference-joint images over the depth-first chain, in order
/// left shoulder, right shoulder, left hip, right hip. `seq` must already
/// carry `cfg.persons` body slots per frame.
pub fn build_tsrji(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<[SkeletonImage; 4], ReprError> {
    cfg.refs.check(topology)?;
    let chain = depth_first_chain(topology)?;
    let refs = cfg.refs.as_array();
    let [a, b, c, d] = [0, 1, 2, 3].map(|i| {
        build_chain_image(seq, &chain, Some(refs[i]), ImageKind::TSRJI[i].clone(), cfg)
    });
    Ok([a?, b?, c?, d?])
}

/// Depth-first chain, absolute coordinates.
pub fn build_tssi(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    let chain = depth_first_chain(topology)?;
    build_chain_image(seq, &chain, None, ImageKind::Tssi, cfg)
}

/// Joints in index order, absolute coordinates.
pub fn build_du(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    build_chain_image(seq, &identity_chain(topology), None, ImageKind::Du, cfg)
}

/// Joints in index order relative to each of the four reference joints,
/// the four results stacked along channels.
pub fn build_refjoints(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    cfg.refs.check(topology)?;
    let chain = identity_chain(topology);
    let parts = cfg
        .refs
        .as_array()
        .iter()
        .map(|&r| build_chain_image(seq, &chain, Some(r), ImageKind::RefJoints, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut img = stack(&parts)?;
    img.kind = ImageKind::RefJoints;
    Ok(img)
}

/// Frame-to-frame joint differences in index order; needs two frames.
pub fn build_motion(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    if cfg.persons == 0 {
        return Err(ReprError::NoPersons);
    }
    let chain = identity_chain(topology);
    let parts = (0..cfg.persons)
        .map(|slot| finish_person(&motion_matrix(seq, slot, &chain)?, cfg.target_frames))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SkeletonImage {
        data: concat_channels(&parts),
        kind: ImageKind::Motion,
        persons: cfg.persons,
        source_meta: seq.meta.clone(),
    })
}

/// Like [`build_du`] with the joints permuted by `cfg.seed`.
pub fn build_random_order(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    cfg: &EncodeConfig,
) -> Result<SkeletonImage, ReprError> {
    let chain = random_chain(topology, cfg.seed);
    build_chain_image(seq, &chain, None, ImageKind::Random, cfg)
}

/// Concatenates images along the channel axis.
pub fn stack(images: &[SkeletonImage]) -> Result<SkeletonImage, ReprError> {
    let first = images.first().ok_or(ReprError::EmptyStack)?;
    if images.len() == 1 {
        return Ok(first.clone());
    }
    let (h, w, _) = first.shape();
    for img in &images[1..] {
        let (h2, w2, _) = img.shape();
        if (h2, w2) != (h, w) {
            return Err(ReprError::ShapeMismatch {
                expected: (h, w),
                found: (h2, w2),
            });
        }
    }
    let mut kinds = Vec::new();
    images.iter().for_each(|i| i.kind.push_parts(&mut kinds));
    let data: Vec<Array3<f32>> = images.iter().map(|i| i.data.clone()).collect();
    Ok(SkeletonImage {
        data: concat_channels(&data),
        kind: ImageKind::Stacked(kinds),
        persons: first.persons,
        source_meta: first.source_meta.clone(),
    })
}

/// Representation selector used by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Du,
    Tssi,
    RefJoints,
    TsrjiStacked,
    /// The four single-reference images, each for its own network.
    TsrjiLate,
    TsrjiA,
    TsrjiB,
    TsrjiC,
    TsrjiD,
    Motion,
    Random,
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "du" => Representation::Du,
            "tssi" => Representation::Tssi,
            "refjoints" => Representation::RefJoints,
            "tsrji-stacked" => Representation::TsrjiStacked,
            "tsrji-late" => Representation::TsrjiLate,
            "tsrji-a" => Representation::TsrjiA,
            "tsrji-b" => Representation::TsrjiB,
            "tsrji-c" => Representation::TsrjiC,
            "tsrji-d" => Representation::TsrjiD,
            "motion" => Representation::Motion,
            "random" => Representation::Random,
            other => return Err(format!("unknown representation {other:?}")),
        })
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Du => "du",
            Representation::Tssi => "tssi",
            Representation::RefJoints => "refjoints",
            Representation::TsrjiStacked => "tsrji-stacked",
            Representation::TsrjiLate => "tsrji-late",
            Representation::TsrjiA => "tsrji-a",
            Representation::TsrjiB => "tsrji-b",
            Representation::TsrjiC => "tsrji-c",
            Representation::TsrjiD => "tsrji-d",
            Representation::Motion => "motion",
            Representation::Random => "random",
        })
    }
}

/// Encodes a body-selected sequence. Returns four images for
/// [`Representation::TsrjiLate`] and one otherwise.
pub fn encode(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    repr: Representation,
    cfg: &EncodeConfig,
) -> Result<Vec<SkeletonImage>, ReprError> {
    let single = |i: usize| -> Result<Vec<SkeletonImage>, ReprError> {
        let images = build_tsrji(seq, topology, cfg)?;
        Ok(images.into_iter().skip(i).take(1).collect())
    };
    match repr {
        Representation::Du => Ok(vec![build_du(seq, topology, cfg)?]),
        Representation::Tssi => Ok(vec![build_tssi(seq, topology, cfg)?]),
        Representation::RefJoints => Ok(vec![build_refjoints(seq, topology, cfg)?]),
        Representation::TsrjiStacked => Ok(vec![stack(&build_tsrji(seq, topology, cfg)?)?]),
        Representation::TsrjiLate => Ok(build_tsrji(seq, topology, cfg)?.into()),
        Representation::TsrjiA => single(0),
        Representation::TsrjiB => single(1),
        Representation::TsrjiC => single(2),
        Representation::TsrjiD => single(3),
        Representation::Motion => Ok(vec![build_motion(seq, topology, cfg)?]),
        Representation::Random => Ok(vec![build_random_order(seq, topology, cfg)?]),
    }
}
