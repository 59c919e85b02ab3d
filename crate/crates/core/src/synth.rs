//! Seeded synthetic skeleton actions.
//!
//! Each class animates a standing Kinect-25 pose by swinging one limb group
//! sinusoidally, with the limb group and frequency depending on the class.
//! Performers differ in body scale, position, and motion phase; cameras
//! differ in yaw. Metadata cycles performers over 1..=10, cameras over 1..=3
//! and setups over 1..=4 so every split protocol has both sides populated.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ingest::write_skeleton_file;
use crate::skeleton::{kinect, Body, Frame, SampleMeta, SkeletonSequence, SkeletonTopology};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("synthetic poses are defined for the 25-joint Kinect skeleton only")]
    UnsupportedTopology,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub frames: usize,
    /// Standard deviation of per-coordinate Gaussian noise, meters.
    pub noise_std: f64,
    pub seed: u64,
    /// 1 or 2.
    pub persons: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 4,
            samples_per_class: 40,
            frames: 60,
            noise_std: 0.01,
            seed: 7,
            persons: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.num_classes < 2 {
            return bad(format!("num_classes {} < 2", self.num_classes));
        }
        if self.num_classes > 999 {
            return bad("num_classes must fit a three-digit action id".into());
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if self.frames < 2 {
            return bad(format!("frames {} < 2", self.frames));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be finite and >= 0", self.noise_std));
        }
        if !(1..=2).contains(&self.persons) {
            return bad(format!("persons {} not in 1..=2", self.persons));
        }
        Ok(())
    }

    /// Parses `key = value` lines (`#` starts a comment). Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut spec = SynthSpec::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SynthError::InvalidSpec(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || SynthError::InvalidSpec(format!("bad value for {key}: {value:?}"));
            match key {
                "num_classes" => spec.num_classes = value.parse().map_err(|_| bad())?,
                "samples_per_class" => spec.samples_per_class = value.parse().map_err(|_| bad())?,
                "frames" => spec.frames = value.parse().map_err(|_| bad())?,
                "noise_std" => spec.noise_std = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "persons" => spec.persons = value.parse().map_err(|_| bad())?,
                other => return Err(SynthError::InvalidSpec(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

// Standing pose, meters, spine base at the origin, y up.
const NEUTRAL_POSE: [[f64; 3]; 25] = [
    [0.0, 0.0, 0.0],       // 1 spine base
    [0.0, 0.30, 0.0],      // 2 spine mid
    [0.0, 0.62, 0.0],      // 3 neck
    [0.0, 0.75, 0.01],     // 4 head
    [-0.18, 0.52, 0.0],    // 5 shoulder left
    [-0.22, 0.28, 0.0],    // 6 elbow left
    [-0.24, 0.05, 0.02],   // 7 wrist left
    [-0.24, -0.03, 0.03],  // 8 hand left
    [0.18, 0.52, 0.0],     // 9 shoulder right
    [0.22, 0.28, 0.0],     // 10 elbow right
    [0.24, 0.05, 0.02],    // 11 wrist right
    [0.24, -0.03, 0.03],   // 12 hand right
    [-0.08, -0.02, 0.0],   // 13 hip left
    [-0.09, -0.45, 0.01],  // 14 knee left
    [-0.09, -0.85, 0.0],   // 15 ankle left
    [-0.09, -0.90, 0.10],  // 16 foot left
    [0.08, -0.02, 0.0],    // 17 hip right
    [0.09, -0.45, 0.01],   // 18 knee right
    [0.09, -0.85, 0.0],    // 19 ankle right
    [0.09, -0.90, 0.10],   // 20 foot right
    [0.0, 0.55, 0.0],      // 21 spine shoulder
    [-0.24, -0.10, 0.04],  // 22 hand tip left
    [-0.20, -0.05, 0.05],  // 23 thumb left
    [0.24, -0.10, 0.04],   // 24 hand tip right
    [0.20, -0.05, 0.05],   // 25 thumb right
];

struct LimbGroup {
    /// (joint index, amplitude weight)
    joints: &'static [(usize, f64)],
    direction: [f64; 3],
}

const LIMB_GROUPS: [LimbGroup; 5] = [
    LimbGroup {
        joints: &[(6, 0.5), (7, 1.0), (8, 1.1), (22, 1.2), (23, 1.1)],
        direction: [-0.3, 1.0, 0.6],
    },
    LimbGroup {
        joints: &[(10, 0.5), (11, 1.0), (12, 1.1), (24, 1.2), (25, 1.1)],
        direction: [0.3, 1.0, 0.6],
    },
    LimbGroup {
        joints: &[(14, 0.5), (15, 1.0), (16, 1.1)],
        direction: [0.0, 0.3, 1.0],
    },
    LimbGroup {
        joints: &[(18, 0.5), (19, 1.0), (20, 1.1)],
        direction: [0.0, 0.3, 1.0],
    },
    LimbGroup {
        joints: &[(3, 0.3), (4, 0.8)],
        direction: [1.0, -0.2, 0.5],
    },
];

const AMPLITUDE: f64 = 0.25;
const PERFORMERS: u32 = 10;
const CAMERAS: u32 = 3;
const SETUPS: u32 = 4;

/// Metadata for the `s`-th sample of class `class`.
fn sample_meta(class: usize, s: usize) -> SampleMeta {
    let mut meta = SampleMeta {
        setup_id: (s as u32 % SETUPS) + 1,
        camera_id: (s as u32 % CAMERAS) + 1,
        performer_id: (s as u32 % PERFORMERS) + 1,
        // lcm(10, 3, 4) = 60 samples before the other ids repeat
        replication_id: (s / 60) as u32 + 1,
        action_id: class as u32 + 1,
        source_name: String::new(),
    };
    meta.source_name = meta.ntu_name();
    meta
}

fn pose(class: usize, person: usize, meta: &SampleMeta, t: usize, frames: usize) -> Vec<[f64; 3]> {
    let group = &LIMB_GROUPS[class % LIMB_GROUPS.len()];
    let cycles = 1.0 + (class / LIMB_GROUPS.len()) as f64 * 0.75;
    let p = meta.performer_id as f64;
    let phase = 0.15 * p + 0.5 * PI * person as f64;
    let scale = 0.95 + 0.01 * p;
    let yaw = (meta.camera_id as f64 - 2.0) * 20f64.to_radians();
    let origin = [
        0.2 * (p % 3.0 - 1.0) + person as f64,
        0.0,
        2.5 + 0.05 * p,
    ];
    let mirror = if person == 1 { -1.0 } else { 1.0 };

    let swing = AMPLITUDE * (2.0 * PI * cycles * t as f64 / frames as f64 + phase).sin();
    let mut joints: Vec<[f64; 3]> = NEUTRAL_POSE.to_vec();
    for &(joint, weight) in group.joints {
        let d = group.direction;
        let p = &mut joints[joint - 1];
        p[0] += swing * weight * d[0];
        p[1] += swing * weight * d[1];
        p[2] += swing * weight * d[2];
    }
    let (sin, cos) = yaw.sin_cos();
    joints
        .into_iter()
        .map(|[x, y, z]| {
            let (x, y, z) = (mirror * x * scale, y * scale, z * scale);
            [
                cos * x + sin * z + origin[0],
                y + origin[1],
                -sin * x + cos * z + origin[2],
            ]
        })
        .collect()
}

/// Generates `num_classes * samples_per_class` labelled sequences, ordered
/// by class then sample. Labels are `action_id - 1`.
pub fn generate(
    spec: &SynthSpec,
    topology: &SkeletonTopology,
) -> Result<Vec<(SkeletonSequence, usize)>, SynthError> {
    spec.validate()?;
    if topology.joint_count() != kinect::JOINT_COUNT {
        return Err(SynthError::UnsupportedTopology);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    let mut out = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for class in 0..spec.num_classes {
        for s in 0..spec.samples_per_class {
            let meta = sample_meta(class, s);
            let frames = (0..spec.frames)
                .map(|t| {
                    let bodies = (0..spec.persons)
                        .map(|person| {
                            let mut joints = pose(class, person, &meta, t, spec.frames);
                            if spec.noise_std > 0.0 {
                                for v in joints.iter_mut().flatten() {
                                    *v += noise.sample(&mut rng);
                                }
                            }
                            Body {
                                body_id: person as u64 + 1,
                                joints,
                            }
                        })
                        .collect();
                    Frame {
                        bodies,
                        timestamp_index: t,
                    }
                })
                .collect();
            out.push((SkeletonSequence { frames, meta }, class));
        }
    }
    Ok(out)
}

/// Writes each sequence as `<source_name>.skeleton` under `dir`.
pub fn write_fixtures(dir: &Path, samples: &[(SkeletonSequence, usize)]) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir)?;
    for (seq, _) in samples {
        let path = dir.join(format!("{}.skeleton", seq.meta.source_name));
        std::fs::write(path, write_skeleton_file(seq))?;
    }
    Ok(())
}
