mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use skelimg_core::repr::{depth_first_chain, random_chain};
use skelimg_core::{kinect25_topology, JointId, SkeletonTopology};

#[test]
fn kinect_chain_matches_published_order() {
    let expected = [
        2, 21, 3, 4, 3, 21, 5, 6, 7, 8, 22, 23, 22, 8, 7, 6, 5, 21, 9, 10, 11, 12, 24, 25, 24, 12,
        11, 10, 9, 21, 2, 1, 13, 14, 15, 16, 15, 14, 13, 1, 17, 18, 19, 20, 19, 18, 17, 1, 2,
    ];
    let chain = depth_first_chain(&kinect25_topology()).unwrap();
    let got: Vec<usize> = chain.joints().iter().map(|j| j.index()).collect();
    assert_eq!(got, expected);
}

#[test]
fn matches_recursive_oracle_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let t = common::random_tree(&mut rng, 12);
        let chain = depth_first_chain(&t).unwrap();
        let got: Vec<usize> = chain.joints().iter().map(|j| j.index()).collect();
        assert_eq!(got, common::euler_tour(&t), "{t:?}");
        assert_eq!(chain.len(), 2 * t.edges().len() + 1);
        assert!(chain.is_edge_walk(&t));
        assert!(chain.covers(&t));
        assert_eq!(chain.joints().first(), chain.joints().last());
    }
}

#[test]
fn each_edge_walked_once_each_way() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let t = common::random_tree(&mut rng, 12);
        let chain = depth_first_chain(&t).unwrap();
        let mut steps: Vec<(JointId, JointId)> =
            chain.joints().windows(2).map(|w| (w[0], w[1])).collect();
        steps.sort();
        let mut expected: Vec<(JointId, JointId)> =
            t.edges().iter().flat_map(|&(p, c)| [(p, c), (c, p)]).collect();
        expected.sort();
        assert_eq!(steps, expected);
    }
}

#[test]
fn child_order_changes_the_chain() {
    let j = |i| JointId::new(i).unwrap();
    let a = SkeletonTopology::from_edges(3, j(1), vec![(j(1), j(2)), (j(1), j(3))]);
    let b = SkeletonTopology::from_edges(3, j(1), vec![(j(1), j(3)), (j(1), j(2))]);
    let ca = depth_first_chain(&a).unwrap();
    let cb = depth_first_chain(&b).unwrap();
    assert_ne!(ca.joints(), cb.joints());
    assert_ne!(ca.topology_fingerprint(), cb.topology_fingerprint());
}

#[test]
fn cyclic_and_disconnected_rejected() {
    let j = |i| JointId::new(i).unwrap();
    let cycle = SkeletonTopology::from_edges(3, j(1), vec![(j(1), j(2)), (j(2), j(3)), (j(3), j(1))]);
    assert!(depth_first_chain(&cycle).is_err());
    let split = SkeletonTopology::from_edges(4, j(1), vec![(j(1), j(2)), (j(3), j(4))]);
    assert!(depth_first_chain(&split).is_err());
}

#[test]
fn random_order_is_a_seeded_permutation() {
    let t = kinect25_topology();
    let a = random_chain(&t, 5);
    assert_eq!(a, random_chain(&t, 5));
    assert_ne!(a, random_chain(&t, 6));
    let mut sorted: Vec<usize> = a.joints().iter().map(|j| j.index()).collect();
    sorted.sort();
    assert_eq!(sorted, (1..=25).collect::<Vec<_>>());
}
