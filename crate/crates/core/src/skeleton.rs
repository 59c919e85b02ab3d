//! Joint graphs, bodies, frames and sequences.
//!
//! Joint indices are 1-based throughout the public API, matching the usual
//! Kinect v2 / NTU RGB+D numbering. Zero-based storage stays private.

use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// A 1-based joint index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointId(u16);

impl JointId {
    /// Returns `None` for index 0.
    pub fn new(index: usize) -> Option<Self> {
        if index == 0 || index > u16::MAX as usize {
            None
        } else {
            Some(JointId(index as u16))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand used by the built-in tables; panics on 0.
pub(crate) const fn j(index: u16) -> JointId {
    assert!(index > 0);
    JointId(index)
}

/// First tree invariant found broken by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyViolation {
    #[error("joint id {joint} is outside 1..={joint_count}")]
    BadJointId { joint: usize, joint_count: usize },
    #[error("cycle found through joint {at}")]
    Cycle { at: JointId },
    #[error("joint {joint} is disconnected from the root")]
    Disconnected { joint: JointId },
    #[error("expected {expected} edges for a tree, found {found}")]
    EdgeCount { expected: usize, found: usize },
}

/// A rooted joint tree. Edges are `(parent, child)` pairs and the child order
/// of each joint is the order in which its edges appear.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkeletonTopology {
    joint_count: usize,
    root: JointId,
    edges: Vec<(JointId, JointId)>,
    children: Vec<Vec<JointId>>,
}

impl SkeletonTopology {
    /// Builds a topology without checking tree invariants; see
    /// [`validate_topology`]. Edges referencing joints outside
    /// `1..=joint_count` are kept but do not enter the adjacency lists.
    pub fn from_edges(joint_count: usize, root: JointId, edges: Vec<(JointId, JointId)>) -> Self {
        let mut children = vec![Vec::new(); joint_count];
        for &(parent, child) in &edges {
            if parent.index() <= joint_count && child.index() <= joint_count {
                children[parent.slot()].push(child);
            }
        }
        SkeletonTopology {
            joint_count,
            root,
            edges,
            children,
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn root(&self) -> JointId {
        self.root
    }

    pub fn edges(&self) -> &[(JointId, JointId)] {
        &self.edges
    }

    /// Ordered children of `joint`. Empty for out-of-range joints.
    pub fn children(&self, joint: JointId) -> &[JointId] {
        self.children
            .get(joint.slot())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, joint: JointId) -> bool {
        joint.index() <= self.joint_count
    }

    /// True when `a` and `b` are joined by an edge, in either direction.
    pub fn is_edge(&self, a: JointId, b: JointId) -> bool {
        self.edges
            .iter()
            .any(|&(p, c)| (p == a && c == b) || (p == b && c == a))
    }

    pub fn joints(&self) -> impl ExactSizeIterator<Item = JointId> {
        (1..=self.joint_count as u16).map(JointId)
    }

    /// Hash of the full value, child order included.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut hasher);
        hasher.finish()
    }
}

/// Checks that `topology` is a tree rooted at its root, with every edge
/// pointing away from the root.
pub fn validate_topology(topology: &SkeletonTopology) -> Result<(), TopologyViolation> {
    let n = topology.joint_count;
    let bad = |joint: JointId| TopologyViolation::BadJointId {
        joint: joint.index(),
        joint_count: n,
    };
    if !topology.contains(topology.root) {
        return Err(bad(topology.root));
    }
    for &(parent, child) in &topology.edges {
        if !topology.contains(parent) {
            return Err(bad(parent));
        }
        if !topology.contains(child) {
            return Err(bad(child));
        }
    }

    let mut seen = vec![false; n];
    let mut stack = vec![topology.root];
    seen[topology.root.slot()] = true;
    while let Some(joint) = stack.pop() {
        for &child in topology.children(joint) {
            if seen[child.slot()] {
                return Err(TopologyViolation::Cycle { at: child });
            }
            seen[child.slot()] = true;
            stack.push(child);
        }
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        return Err(TopologyViolation::Disconnected {
            joint: JointId(slot as u16 + 1),
        });
    }
    if topology.edges.len() != n - 1 {
        return Err(TopologyViolation::EdgeCount {
            expected: n - 1,
            found: topology.edges.len(),
        });
    }
    Ok(())
}

/// Kinect v2 joint numbering (1-based) as used by NTU RGB+D.
pub mod kinect {
    use super::{j, JointId};

    pub const SPINE_BASE: JointId = j(1);
    pub const SPINE_MID: JointId = j(2);
    pub const NECK: JointId = j(3);
    pub const HEAD: JointId = j(4);
    pub const SHOULDER_LEFT: JointId = j(5);
    pub const ELBOW_LEFT: JointId = j(6);
    pub const WRIST_LEFT: JointId = j(7);
    pub const HAND_LEFT: JointId = j(8);
    pub const SHOULDER_RIGHT: JointId = j(9);
    pub const ELBOW_RIGHT: JointId = j(10);
    pub const WRIST_RIGHT: JointId = j(11);
    pub const HAND_RIGHT: JointId = j(12);
    pub const HIP_LEFT: JointId = j(13);
    pub const KNEE_LEFT: JointId = j(14);
    pub const ANKLE_LEFT: JointId = j(15);
    pub const FOOT_LEFT: JointId = j(16);
    pub const HIP_RIGHT: JointId = j(17);
    pub const KNEE_RIGHT: JointId = j(18);
    pub const ANKLE_RIGHT: JointId = j(19);
    pub const FOOT_RIGHT: JointId = j(20);
    pub const SPINE_SHOULDER: JointId = j(21);
    pub const HAND_TIP_LEFT: JointId = j(22);
    pub const THUMB_LEFT: JointId = j(23);
    pub const HAND_TIP_RIGHT: JointId = j(24);
    pub const THUMB_RIGHT: JointId = j(25);

    pub const JOINT_COUNT: usize = 25;
}

// Parent/child pairs in traversal order. Rooted at the spine mid joint; the
// spine shoulder visits neck, left arm, right arm, and the spine base visits
// the left leg before the right leg.
const KINECT25_EDGES: [(u16, u16); 24] = [
    (2, 21),
    (21, 3),
    (3, 4),
    (21, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 22),
    (22, 23),
    (21, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (12, 24),
    (24, 25),
    (2, 1),
    (1, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (1, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

/// The 25-joint Kinect v2 tree rooted at joint 2.
pub fn kinect25_topology() -> SkeletonTopology {
    let edges = KINECT25_EDGES
        .iter()
        .map(|&(p, c)| (JointId(p), JointId(c)))
        .collect();
    SkeletonTopology::from_edges(kinect::JOINT_COUNT, kinect::SPINE_MID, edges)
}

/// Tracker-assigned body identifier.
pub type BodyId = u64;

/// One tracked body in one frame; positions in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub body_id: BodyId,
    pub joints: Vec<[f64; 3]>,
}

impl Body {
    pub fn zeros(body_id: BodyId, joint_count: usize) -> Self {
        Body {
            body_id,
            joints: vec![[0.0; 3]; joint_count],
        }
    }

    /// Position of a 1-based joint. Panics if the joint is out of range.
    pub fn position(&self, joint: JointId) -> [f64; 3] {
        self.joints[joint.slot()]
    }

    pub fn is_all_zero(&self) -> bool {
        self.joints.iter().all(|p| p.iter().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub bodies: Vec<Body>,
    pub timestamp_index: usize,
}

/// Capture metadata. Zero means "unknown" for synthetic data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SampleMeta {
    pub setup_id: u32,
    pub camera_id: u32,
    pub performer_id: u32,
    pub replication_id: u32,
    pub action_id: u32,
    pub source_name: String,
}

impl SampleMeta {
    /// NTU-style name `SsssCcccPpppRrrrAaaa` built from the ids.
    pub fn ntu_name(&self) -> String {
        format!(
            "S{:03}C{:03}P{:03}R{:03}A{:03}",
            self.setup_id, self.camera_id, self.performer_id, self.replication_id, self.action_id
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequenceError {
    #[error("sequence has no frames")]
    Empty,
    #[error("frame {frame}: body has {found} joints, topology has {expected}")]
    JointCount {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame}: non-finite coordinate")]
    NonFinite { frame: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub frames: Vec<Frame>,
    pub meta: SampleMeta,
}

impl SkeletonSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks the body invariants against `topology`.
    pub fn check(&self, topology: &SkeletonTopology) -> Result<(), SequenceError> {
        if self.frames.is_empty() {
            return Err(SequenceError::Empty);
        }
        for (t, frame) in self.frames.iter().enumerate() {
            for body in &frame.bodies {
                if body.joints.len() != topology.joint_count() {
                    return Err(SequenceError::JointCount {
                        frame: t,
                        expected: topology.joint_count(),
                        found: body.joints.len(),
                    });
                }
                if body.joints.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(SequenceError::NonFinite { frame: t });
                }
            }
        }
        Ok(())
    }

    /// Copy with every joint of every body shifted by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let mut out = self.clone();
        for body in out.frames.iter_mut().flat_map(|f| f.bodies.iter_mut()) {
            for p in &mut body.joints {
                for axis in 0..3 {
                    p[axis] += offset[axis];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo(n: usize, root: usize, edges: &[(usize, usize)]) -> SkeletonTopology {
        SkeletonTopology::from_edges(
            n,
            JointId::new(root).unwrap(),
            edges
                .iter()
                .map(|&(a, b)| (JointId::new(a).unwrap(), JointId::new(b).unwrap()))
                .collect(),
        )
    }

    #[test]
    fn kinect25_is_a_tree() {
        let t = kinect25_topology();
        assert_eq!(t.joint_count(), 25);
        assert_eq!(t.edges().len(), 24);
        assert_eq!(t.root(), kinect::SPINE_MID);
        assert_eq!(validate_topology(&t), Ok(()));
        assert_eq!(t, kinect25_topology());
        assert_eq!(t.fingerprint(), kinect25_topology().fingerprint());
    }

    #[test]
    fn three_cycle_is_reported() {
        let t = topo(3, 1, &[(1, 2), (2, 3), (3, 1)]);
        assert!(matches!(
            validate_topology(&t),
            Err(TopologyViolation::Cycle { .. })
        ));
    }

    #[test]
    fn missing_edge_is_disconnected() {
        let t = topo(3, 1, &[(1, 2)]);
        assert_eq!(
            validate_topology(&t),
            Err(TopologyViolation::Disconnected {
                joint: JointId::new(3).unwrap()
            })
        );
    }

    #[test]
    fn out_of_range_joint() {
        let t = topo(2, 1, &[(1, 5)]);
        assert_eq!(
            validate_topology(&t),
            Err(TopologyViolation::BadJointId {
                joint: 5,
                joint_count: 2
            })
        );
    }

    #[test]
    fn child_order_is_part_of_the_value() {
        let a = topo(3, 1, &[(1, 2), (1, 3)]);
        let b = topo(3, 1, &[(1, 3), (1, 2)]);
        assert_ne!(a, b);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn joint_id_zero_rejected() {
        assert!(JointId::new(0).is_none());
        assert_eq!(JointId::new(7).unwrap().index(), 7);
    }

    #[test]
    fn ntu_name_formatting() {
        let meta = SampleMeta {
            setup_id: 1,
            camera_id: 2,
            performer_id: 3,
            replication_id: 2,
            action_id: 13,
            source_name: String::new(),
        };
        assert_eq!(meta.ntu_name(), "S001C002P003R002A013");
    }
}
