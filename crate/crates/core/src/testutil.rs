//! Shared helpers for unit tests.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::generic::sample_member;
use crate::model::{ClassSpec, FinStructure};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn specs() -> Vec<ClassSpec> {
    vec![ClassSpec::k0(3), ClassSpec::kp([3], 3).unwrap(), ClassSpec::kp([3, 4], 4).unwrap(), ClassSpec::k0(2).with_point_order()]
}

/// A random member of one of [`specs`] with at most `max_size` points.
pub fn structure(max_size: usize) -> impl Strategy<Value = FinStructure> {
    (0..specs().len(), 0..=max_size, any::<u64>()).prop_map(|(i, m, seed)| sample_member(&specs()[i], m, &mut rng(seed)))
}

/// Whether two structures on the same points have the same partitions,
/// compared subset pair by subset pair.
pub fn same_partitions(a: &FinStructure, b: &FinStructure) -> bool {
    if a.size() != b.size() || a.tracked_arities() != b.tracked_arities() {
        return false;
    }
    (1..=a.tracked_arities()).all(|n| {
        let subs: Vec<Vec<usize>> = crate::subset::Combinations::new(a.size(), n).collect();
        subs.iter().all(|x| subs.iter().all(|y| (a.class_of(x) == a.class_of(y)) == (b.class_of(x) == b.class_of(y))))
    })
}

/// A random amalgamation problem: `B1` sampled, `A` induced on a random
/// subset of at most `max_a` points, `B2` grown from `A` by random one-point
/// extensions and then shuffled.
pub fn amalgam_problem(spec: &ClassSpec, max_a: usize, max_b: usize, seed: u64) -> crate::amalgam::AmalgamProblem {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut r = rng(seed);
    let m1 = r.gen_range(0..=max_b);
    let b1 = sample_member(spec, m1, &mut r);
    let ma = r.gen_range(0..=max_a.min(m1));
    let mut pts: Vec<usize> = (0..m1).collect();
    pts.shuffle(&mut r);
    let glue1 = pts[..ma].to_vec();
    let a = b1.induced(&glue1).unwrap();
    let m2 = r.gen_range(ma..=max_b.max(ma));
    let mut b2 = a.clone();
    while b2.size() < m2 {
        b2 = crate::generic::sample_one_point_extension(&b2, &mut r);
    }
    let mut perm: Vec<usize> = (0..m2).collect();
    perm.shuffle(&mut r);
    let b2 = b2.relabel(&perm).unwrap();
    let glue2 = (0..ma).map(|i| perm[i]).collect();
    crate::amalgam::AmalgamProblem { a, b1, b2, glue1, glue2 }
}
