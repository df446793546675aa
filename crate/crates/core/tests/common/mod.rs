//! Oracles and generators shared by the integration tests. Subsets here are
//! bitmasks in increasing numeric order, independent of the library's ranking.

#![allow(dead_code)]

use std::collections::BTreeMap;

use eqrel::amalgam::AmalgamProblem;
use eqrel::generic::{sample_member, sample_one_point_extension};
use eqrel::{ClassSpec, FinStructure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn masks(m: usize, n: usize) -> Vec<u32> {
    (0u32..1 << m).filter(|x| x.count_ones() as usize == n).collect()
}

pub fn points(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// All set partitions of `len` items as restricted growth strings.
pub fn set_partitions(len: usize) -> Vec<Vec<u32>> {
    fn rec(len: usize, top: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for l in 0..=top {
            cur.push(l);
            rec(len, top + u32::from(l == top), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, 0, &mut Vec::new(), &mut out);
    out
}

pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..m {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Relabels a label sequence to first-appearance form.
pub fn normalize(labels: &[u32]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let k = map.len() as u32;
            *map.entry(*l).or_insert(k)
        })
        .collect()
}

/// A structure's partitions in bitmask order, one normalized sequence per arity.
pub fn partitions_of(s: &FinStructure) -> Vec<Vec<u32>> {
    (1..=s.tracked_arities())
        .map(|n| normalize(&masks(s.size(), n).iter().map(|&x| s.class_of_points(&points(x))).collect::<Vec<_>>()))
        .collect()
}

/// Smallest image of an unordered labeling under all point permutations.
pub fn canonical_partitions(m: usize, parts: &[Vec<u32>], perms: &[Vec<usize>]) -> Vec<Vec<u32>> {
    let per_arity: Vec<(Vec<u32>, BTreeMap<u32, usize>)> = (1..=parts.len())
        .map(|n| {
            let ms = masks(m, n);
            let idx = ms.iter().enumerate().map(|(i, &x)| (x, i)).collect();
            (ms, idx)
        })
        .collect();
    perms
        .iter()
        .map(|p| {
            parts
                .iter()
                .zip(&per_arity)
                .map(|(labels, (ms, idx))| {
                    let mut out = vec![0; labels.len()];
                    for (i, &x) in ms.iter().enumerate() {
                        let y = points(x).iter().fold(0u32, |acc, &q| acc | 1 << p[q]);
                        out[idx[&y]] = labels[i];
                    }
                    normalize(&out)
                })
                .collect::<Vec<_>>()
        })
        .min()
        .unwrap_or_default()
}

/// A random amalgamation problem: `B1` sampled, `A` induced on a random subset
/// of it, `B2` grown from `A` by random one-point extensions, then shuffled.
pub fn amalgam_problem(spec: &ClassSpec, max_a: usize, max_b: usize, r: &mut ChaCha8Rng) -> AmalgamProblem {
    let m1 = r.gen_range(0..=max_b);
    let b1 = sample_member(spec, m1, r);
    let ma = r.gen_range(0..=max_a.min(m1));
    let mut pts: Vec<usize> = (0..m1).collect();
    pts.shuffle(r);
    let glue1 = pts[..ma].to_vec();
    let a = b1.induced(&glue1).unwrap();
    let m2 = r.gen_range(ma..=max_b.max(ma));
    let mut b2 = a.clone();
    while b2.size() < m2 {
        b2 = sample_one_point_extension(&b2, r);
    }
    let mut perm: Vec<usize> = (0..m2).collect();
    perm.shuffle(r);
    let b2 = b2.relabel(&perm).unwrap();
    let glue2 = (0..ma).map(|i| perm[i]).collect();
    AmalgamProblem { a, b1, b2, glue1, glue2 }
}
