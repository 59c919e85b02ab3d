#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use skelimg_core::tinycnn::{init_model, CnnConfig, CnnModel};
use skelimg_core::{Body, Frame, JointId, SampleMeta, SkeletonSequence, SkeletonTopology};

/// A random tree on `1..=n` joints with a random root, random labels and a
/// random order of children at every joint.
pub fn random_tree(rng: &mut impl Rng, max_nodes: usize) -> SkeletonTopology {
    let n = rng.random_range(1..=max_nodes);
    let mut labels: Vec<usize> = (1..=n).collect();
    labels.shuffle(rng);
    let mut edges: Vec<(JointId, JointId)> = (1..n)
        .map(|i| {
            let parent = labels[rng.random_range(0..i)];
            (JointId::new(parent).unwrap(), JointId::new(labels[i]).unwrap())
        })
        .collect();
    edges.shuffle(rng);
    SkeletonTopology::from_edges(n, JointId::new(labels[0]).unwrap(), edges)
}

/// Recursive Euler tour over an adjacency built straight from the edge list.
pub fn euler_tour(topology: &SkeletonTopology) -> Vec<usize> {
    fn visit(joint: usize, children: &[Vec<usize>], out: &mut Vec<usize>) {
        out.push(joint);
        for &c in &children[joint] {
            visit(c, children, out);
            out.push(joint);
        }
    }
    let mut children = vec![Vec::new(); topology.joint_count() + 1];
    for &(p, c) in topology.edges() {
        children[p.index()].push(c.index());
    }
    let mut out = Vec::new();
    visit(topology.root().index(), &children, &mut out);
    out
}

pub fn meta(action: u32) -> SampleMeta {
    let mut m = SampleMeta {
        setup_id: 1,
        camera_id: 1,
        performer_id: 1,
        replication_id: 1,
        action_id: action,
        source_name: String::new(),
    };
    m.source_name = m.ntu_name();
    m
}

/// `persons` bodies with uniformly random joints in a 2 m cube.
pub fn random_sequence(rng: &mut impl Rng, frames: usize, persons: usize) -> SkeletonSequence {
    SkeletonSequence {
        frames: (0..frames)
            .map(|t| Frame {
                bodies: (0..persons)
                    .map(|p| Body {
                        body_id: p as u64 + 1,
                        joints: (0..25)
                            .map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0)))
                            .collect(),
                    })
                    .collect(),
                timestamp_index: t,
            })
            .collect(),
        meta: meta(1),
    }
}

/// The tiny gradient-check network: 8x10x3 input, 2/2/2 filters, 4 hidden
/// units, 3 classes. Biases are set to small positive values so that no
/// unit sits exactly on the ReLU kink, where the loss is not differentiable
/// and central differences disagree with any one-sided derivative.
pub fn tiny_model(seed: u64) -> CnnModel {
    let mut cfg = CnnConfig::new((8, 10, 3), 3);
    cfg.conv_filters = [2, 2, 2];
    cfg.hidden_units = 4;
    cfg.seed = seed;
    let mut model = init_model(&cfg).unwrap();
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        if i % 2 == 1 {
            for (k, v) in p.data_mut().iter_mut().enumerate() {
                *v = 0.05 + 0.01 * k as f64;
            }
        }
    }
    model
}
