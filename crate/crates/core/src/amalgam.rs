//! Amalgamation for `K_0`, `K_P` and the point-ordered variant.
//!
//! The amalgam of `B1` and `B2` over `A` lives on `B1`'s points `0..|B1|`
//! followed by the private points of `B2` in increasing order. For each
//! arity the partition is the finest closure of: the classes of `B1`, the
//! classes of `B2` (identified over `A`), the group of all crossing subsets
//! (those meeting both private parts), and the extra merges of the
//! respective class. Every result is checked: it must validate and contain
//! `B1` and `B2` as induced substructures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::closure::UnionFind;
use crate::error::{input, Error, Result};
use crate::iso::is_embedding;
use crate::model::{validate, ClassSpec, FinStructure};
use crate::subset::{self, for_each_combination, for_each_sub_selection};

#[derive(Clone, Debug)]
pub struct AmalgamProblem {
    pub a: FinStructure,
    pub b1: FinStructure,
    pub b2: FinStructure,
    /// Embedding of `a` into `b1`.
    pub glue1: Vec<usize>,
    /// Embedding of `a` into `b2`.
    pub glue2: Vec<usize>,
}

impl AmalgamProblem {
    /// The problem of jointly embedding `b1` and `b2`.
    pub fn joint(b1: FinStructure, b2: FinStructure) -> Self {
        AmalgamProblem { a: FinStructure::empty(b1.spec().clone()), b1, b2, glue1: vec![], glue2: vec![] }
    }
}

/// Which extra merges apply on top of the crossing rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmalgamRule {
    /// Finest closure of the sides and the crossing group.
    K0,
    /// Additionally ties the crossing group and single-class sides to an existing class.
    Kp,
}

#[derive(Clone, Debug)]
pub struct Amalgam {
    pub structure: FinStructure,
    /// Images of `B1`'s points (always the identity).
    pub embed1: Vec<usize>,
    /// Images of `B2`'s points.
    pub embed2: Vec<usize>,
}

pub fn amalgamate_k0(p: &AmalgamProblem) -> Result<FinStructure> {
    if !p.b1.spec().ordered_arities().is_empty() {
        return input("K_0 amalgamation takes structures without class orders");
    }
    amalgamate(p, AmalgamRule::K0).map(|a| a.structure)
}

pub fn amalgamate_kp(spec: &ClassSpec, p: &AmalgamProblem) -> Result<FinStructure> {
    if p.b1.spec() != spec {
        return input("problem structures do not belong to the given class spec");
    }
    amalgamate(p, AmalgamRule::Kp).map(|a| a.structure)
}

/// Amalgamation of point-ordered structures: relations as for `K_0` (or `K_P`
/// when the spec orders some arity), points merged so that between
/// consecutive points of `A` the private points of `B1` come first.
pub fn amalgamate_point_order(p: &AmalgamProblem) -> Result<FinStructure> {
    if p.b1.point_order().is_none() || p.b2.point_order().is_none() {
        return input("point-order amalgamation needs point orders on both sides");
    }
    amalgamate(p, default_rule(p.b1.spec())).map(|a| a.structure)
}

pub fn joint_embed(spec: &ClassSpec, b1: &FinStructure, b2: &FinStructure) -> Result<FinStructure> {
    if b1.spec() != spec {
        return input("structures do not belong to the given class spec");
    }
    amalgamate(&AmalgamProblem::joint(b1.clone(), b2.clone()), default_rule(spec)).map(|a| a.structure)
}

/// `K0` for unordered specs, `Kp` otherwise.
pub fn default_rule(spec: &ClassSpec) -> AmalgamRule {
    if spec.ordered_arities().is_empty() {
        AmalgamRule::K0
    } else {
        AmalgamRule::Kp
    }
}

pub fn amalgamate(p: &AmalgamProblem, rule: AmalgamRule) -> Result<Amalgam> {
    let spec = p.b1.spec();
    if p.a.spec() != spec || p.b2.spec() != spec {
        return input("A, B1 and B2 must share one class spec");
    }
    if !is_embedding(&p.a, &p.b1, &p.glue1) {
        return input("glue1 is not an embedding of A into B1");
    }
    if !is_embedding(&p.a, &p.b2, &p.glue2) {
        return input("glue2 is not an embedding of A into B2");
    }
    let (m1, m2, ma) = (p.b1.size(), p.b2.size(), p.a.size());
    let mc = m1 + m2 - ma;

    let mut phi2 = vec![usize::MAX; m2];
    for (x, &y) in p.glue2.iter().enumerate() {
        phi2[y] = p.glue1[x];
    }
    let mut next = m1;
    for slot in phi2.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let mut private1 = vec![true; m1];
    for &g in &p.glue1 {
        private1[g] = false;
    }

    let tracked = spec.tracked(mc);
    let mut labels = Vec::with_capacity(tracked);
    let mut orders = BTreeMap::new();
    let mut buf = Vec::new();
    for n in 1..=tracked {
        let total = subset::count(mc, n);
        let mut uf = UnionFind::new(total);
        // seeds from B1 (same colex ranks) and B2
        let mut first1 = vec![usize::MAX; p.b1.class_count(n)];
        if n <= p.b1.tracked_arities() {
            for (r, &c) in p.b1.labels(n).iter().enumerate() {
                let f = &mut first1[c as usize];
                if *f == usize::MAX {
                    *f = r;
                } else {
                    uf.union(*f, r);
                }
            }
        }
        let mut first2 = vec![usize::MAX; p.b2.class_count(n)];
        if n <= p.b2.tracked_arities() {
            for_each_combination(m2, n, |s| {
                buf.clear();
                buf.extend(s.iter().map(|&x| phi2[x]));
                buf.sort_unstable();
                let r = subset::rank(&buf);
                let c = p.b2.class_of(s) as usize;
                if first2[c] == usize::MAX {
                    first2[c] = r;
                } else {
                    uf.union(first2[c], r);
                }
            });
        }
        let crossing = crossing_ranks(n, m1, mc, &private1);
        uf.union_all(&crossing);
        let cross = crossing.first().copied();

        if rule == AmalgamRule::Kp {
            let lex_b1 = (n <= m1).then(|| subset::rank(&(0..n).collect::<Vec<_>>()));
            let lex_b2 = (n <= m2).then(|| sorted_rank(&phi2[..n]));
            let lex_a = (n <= ma).then(|| sorted_rank(&p.glue1[..n]));
            let single = |b: &FinStructure| n <= b.tracked_arities() && b.class_count(n) == 1;
            let sides = [(single(&p.b1), lex_b1, lex_b2, m2), (single(&p.b2), lex_b2, lex_b1, m1)];
            let mut tied = false;
            for (is_single, own, other, other_size) in sides {
                if !is_single {
                    continue;
                }
                tied = true;
                let own = own.expect("single-class side has n-subsets");
                if let Some(c) = cross {
                    uf.union(own, c);
                }
                if n <= other_size {
                    let target = lex_a.or(other).expect("other side has n-subsets");
                    uf.union(own, target);
                }
            }
            if let (Some(c), false) = (cross, tied) {
                if n <= m1.max(m2) {
                    let target = lex_b1.or(lex_b2).expect("some side has n-subsets");
                    uf.union(c, target);
                }
            }
        }
        // implied by the crossing group; kept as a guard
        if n > m1.max(m2) {
            for r in 1..total {
                uf.union(0, r);
            }
        }

        let lab: Vec<u32> = uf.labels().into_iter().map(|l| l as u32).collect();
        if spec.is_ordered(n) {
            let order = merge_class_orders(n, p, &lab, &first1, &first2)?;
            orders.insert(n, order);
        }
        labels.push(lab);
    }

    let point_order = match (p.b1.point_order(), p.b2.point_order()) {
        (Some(o1), Some(o2)) => {
            let seq2: Vec<usize> = o2.iter().map(|&x| phi2[x]).collect();
            let merged = merge_orders(o1, &seq2, |&x| x < m1 && !private1[x])
                .map_err(|(a, b)| Error::Input(format!("point order conflict on A: points {a} and {b} are ordered oppositely")))?;
            Some(merged)
        }
        (None, None) => None,
        _ => return input("only one side carries a point order"),
    };

    let c = FinStructure::from_labels(spec.clone(), mc, labels, orders, point_order)
        .map_err(|e| Error::Internal(format!("amalgam construction failed: {e}")))?;
    let embed1: Vec<usize> = (0..m1).collect();
    check_postconditions(&c, p, &embed1, &phi2)?;
    Ok(Amalgam { structure: c, embed1, embed2: phi2 })
}

fn sorted_rank(points: &[usize]) -> usize {
    let mut v = points.to_vec();
    v.sort_unstable();
    subset::rank(&v)
}

/// Ranks of the n-subsets of the amalgam meeting both private parts.
fn crossing_ranks(n: usize, m1: usize, mc: usize, private1: &[bool]) -> Vec<usize> {
    let fresh: Vec<usize> = (m1..mc).collect();
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(n);
    for q in 1..=n.min(fresh.len()) {
        for_each_sub_selection(&fresh, q, |fs| {
            for_each_combination(m1, n - q, |old| {
                if !old.iter().any(|&x| private1[x]) {
                    return;
                }
                buf.clear();
                buf.extend_from_slice(old);
                buf.extend_from_slice(fs);
                out.push(subset::rank(&buf));
            });
        });
    }
    out.sort_unstable();
    out
}

fn merge_class_orders(n: usize, p: &AmalgamProblem, lab: &[u32], first1: &[usize], first2: &[usize]) -> Result<Vec<u32>> {
    let classes = lab.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut from1 = vec![None; classes];
    let mut from2 = vec![None; classes];
    for (c, &r) in first1.iter().enumerate() {
        let l = lab[r] as usize;
        if from1[l].replace(c as u32).is_some() {
            return Err(Error::Internal(format!("arity {n}: amalgam merges two classes of B1")));
        }
    }
    for (c, &r) in first2.iter().enumerate() {
        let l = lab[r] as usize;
        if from2[l].replace(c as u32).is_some() {
            return Err(Error::Internal(format!("arity {n}: amalgam merges two classes of B2")));
        }
    }
    let seq1: Vec<u32> = p.b1.class_order(n).unwrap_or(&[]).iter().map(|&c| lab[first1[c as usize]]).collect();
    let seq2: Vec<u32> = p.b2.class_order(n).unwrap_or(&[]).iter().map(|&c| lab[first2[c as usize]]).collect();
    let mut merged = merge_orders(&seq1, &seq2, |&l| from1[l as usize].is_some() && from2[l as usize].is_some())
        .map_err(|(x, y)| Error::OrderConflict { arity: n, first: from1[x as usize].unwrap(), second: from1[y as usize].unwrap() })?;
    // classes made only of crossing subsets go last
    merged.extend((0..classes as u32).filter(|&l| from1[l as usize].is_none() && from2[l as usize].is_none()));
    Ok(merged)
}

/// Merges two linear orders that agree on their shared elements. Between
/// consecutive shared elements (and in the two open end intervals) the
/// private elements of the first order precede those of the second.
/// On disagreement returns a pair ordered one way in `first` and the other in `second`.
pub fn merge_orders<T: Copy + PartialEq>(first: &[T], second: &[T], shared: impl Fn(&T) -> bool) -> std::result::Result<Vec<T>, (T, T)> {
    let s1: Vec<T> = first.iter().copied().filter(|x| shared(x)).collect();
    let s2: Vec<T> = second.iter().copied().filter(|x| shared(x)).collect();
    if let Some(i) = (0..s1.len().min(s2.len())).find(|&i| s1[i] != s2[i]) {
        return Err((s1[i], s2[i]));
    }
    let bucket = |seq: &[T]| {
        let mut out: Vec<Vec<T>> = vec![Vec::new(); s1.len() + 1];
        let mut k = 0;
        for x in seq {
            if shared(x) {
                k += 1;
            } else {
                out[k].push(*x);
            }
        }
        out
    };
    let (p1, p2) = (bucket(first), bucket(second));
    let mut out = Vec::with_capacity(first.len() + second.len() - s1.len());
    for k in 0..=s1.len() {
        out.extend_from_slice(&p1[k]);
        out.extend_from_slice(&p2[k]);
        if k < s1.len() {
            out.push(s1[k]);
        }
    }
    Ok(out)
}

fn check_postconditions(c: &FinStructure, p: &AmalgamProblem, embed1: &[usize], embed2: &[usize]) -> Result<()> {
    let report = validate(c, c.spec());
    if !report.ok {
        return Err(Error::Internal(format!("amalgam fails validation: {:?}", report.violations)));
    }
    if c.induced_unchecked(embed1) != p.b1 {
        return Err(Error::Internal(format!("B1 is not an induced substructure of the amalgam {c:?}")));
    }
    if c.induced_unchecked(embed2) != p.b2 {
        return Err(Error::Internal(format!("B2 is not an induced substructure of the amalgam {c:?}")));
    }
    Ok(())
}
