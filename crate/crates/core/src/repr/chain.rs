use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ReprError;
use crate::skeleton::{validate_topology, JointId, SkeletonTopology};

/// An ordering of joints used as the rows of a skeleton image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    joints: Vec<JointId>,
    topology: u64,
}

impl Chain {
    pub fn joints(&self) -> &[JointId] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Fingerprint of the topology this chain was built from.
    pub fn topology_fingerprint(&self) -> u64 {
        self.topology
    }

    /// True when every consecutive pair of joints shares an edge.
    pub fn is_edge_walk(&self, topology: &SkeletonTopology) -> bool {
        self.joints.windows(2).all(|w| topology.is_edge(w[0], w[1]))
    }

    /// True when every joint of `topology` occurs at least once.
    pub fn covers(&self, topology: &SkeletonTopology) -> bool {
        let mut seen = vec![false; topology.joint_count()];
        for j in &self.joints {
            if let Some(s) = seen.get_mut(j.index() - 1) {
                *s = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Depth-first traversal from the root that records a joint again every
/// time the walk returns to it, visiting children in topology order. The
/// result starts and ends at the root and has `2 * edges + 1` entries.
pub fn depth_first_chain(topology: &SkeletonTopology) -> Result<Chain, ReprError> {
    validate_topology(topology)?;
    let root = topology.root();
    let mut joints = Vec::with_capacity(2 * topology.edges().len() + 1);
    // (joint, index of the next child to visit)
    let mut stack: Vec<(JointId, usize)> = vec![(root, 0)];
    joints.push(root);
    while let Some(top) = stack.last_mut() {
        let (joint, next) = *top;
        match topology.children(joint).get(next) {
            Some(&child) => {
                top.1 += 1;
                joints.push(child);
                stack.push((child, 0));
            }
            None => {
                stack.pop();
                if let Some(&(parent, _)) = stack.last() {
                    joints.push(parent);
                }
            }
        }
    }
    Ok(Chain {
        joints,
        topology: topology.fingerprint(),
    })
}

/// Joints `1..=joint_count` in index order.
pub fn identity_chain(topology: &SkeletonTopology) -> Chain {
    Chain {
        joints: topology.joints().collect(),
        topology: topology.fingerprint(),
    }
}

/// A seeded permutation of all joints.
pub fn random_chain(topology: &SkeletonTopology, seed: u64) -> Chain {
    let mut joints: Vec<JointId> = topology.joints().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    joints.shuffle(&mut rng);
    Chain {
        joints,
        topology: topology.fingerprint(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::kinect25_topology;

    #[test]
    fn single_edge() {
        let one = JointId::new(1).unwrap();
        let two = JointId::new(2).unwrap();
        let t = SkeletonTopology::from_edges(2, one, vec![(one, two)]);
        let chain = depth_first_chain(&t).unwrap();
        let idx: Vec<usize> = chain.joints().iter().map(|j| j.index()).collect();
        assert_eq!(idx, [1, 2, 1]);
    }

    #[test]
    fn single_joint() {
        let one = JointId::new(1).unwrap();
        let t = SkeletonTopology::from_edges(1, one, vec![]);
        assert_eq!(depth_first_chain(&t).unwrap().len(), 1);
    }

    #[test]
    fn invalid_topology_rejected() {
        let one = JointId::new(1).unwrap();
        let t = SkeletonTopology::from_edges(3, one, vec![(one, JointId::new(2).unwrap())]);
        assert!(matches!(
            depth_first_chain(&t),
            Err(ReprError::InvalidTopology(_))
        ));
    }

    #[test]
    fn random_chain_is_seeded_permutation() {
        let t = kinect25_topology();
        let a = random_chain(&t, 11);
        assert_eq!(a, random_chain(&t, 11));
        assert_ne!(a, random_chain(&t, 12));
        let mut idx: Vec<usize> = a.joints().iter().map(|j| j.index()).collect();
        idx.sort_unstable();
        assert_eq!(idx, (1..=25).collect::<Vec<_>>());
    }

    #[test]
    fn identity_chain_order() {
        let t = kinect25_topology();
        let c = identity_chain(&t);
        assert!(c.joints().iter().enumerate().all(|(i, j)| j.index() == i + 1));
        assert!(c.covers(&t));
        assert!(!c.is_edge_walk(&t));
    }
}
