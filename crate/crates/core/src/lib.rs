//! Skeleton image representations for 3D action recognition.
//!
//! A skeleton sequence is encoded as a joint-by-time image whose rows follow
//! a depth-first walk of the joint tree and whose values are joint positions
//! relative to one of four stable reference joints (shoulders and hips). The
//! crate also provides the usual baseline encodings, a small convolutional
//! network trained from scratch, NTU RGB+D split protocols, metrics and late
//! score fusion.

pub mod eval;
pub mod ingest;
pub mod repr;
pub mod skeleton;
pub mod synth;
pub mod tinycnn;

pub use eval::{evaluate, late_fusion, split, EvalError, EvalReport, ScoreTable, SplitProtocol};
pub use ingest::{DatasetIndex, DatasetKind, IngestError};
pub use repr::{EncodeConfig, ImageKind, ReferenceJointSet, ReprError, Representation, SkeletonImage};
pub use skeleton::{
    kinect25_topology, validate_topology, Body, Frame, JointId, SampleMeta, SkeletonSequence,
    SkeletonTopology,
};
pub use synth::{SynthError, SynthSpec};
pub use tinycnn::{CnnConfig, CnnError, CnnModel, Dataset, Tensor, TrainHistory};
