//! Finite members of the classes `K_0` and `K_P`.
//!
//! A structure on points `0..m` carries, for every arity `n <= min(m, max_arity)`,
//! a partition of its n-subsets into `E_n`-classes. For `n` in the ordered set
//! `P` the classes are linearly ordered. An optional linear order on points
//! supports the ordered variant `K_0^<`.
//!
//! Class identifiers are canonical: within each arity they are `0..k`, numbered
//! by the lexicographically least member subset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::subset::{self, for_each_combination};

const UNSET: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ClassSpec {
    ordered_arities: BTreeSet<usize>,
    max_arity: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_point_order: bool,
}

#[derive(Deserialize)]
struct RawSpec {
    #[serde(default)]
    ordered_arities: Vec<usize>,
    max_arity: usize,
    #[serde(default)]
    allow_point_order: bool,
}

impl TryFrom<RawSpec> for ClassSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ClassSpec::new(raw.ordered_arities, raw.max_arity, raw.allow_point_order)
    }
}

impl ClassSpec {
    pub fn new(ordered_arities: impl IntoIterator<Item = usize>, max_arity: usize, allow_point_order: bool) -> Result<Self> {
        let ordered_arities: BTreeSet<usize> = ordered_arities.into_iter().collect();
        if max_arity == 0 {
            return input("max_arity must be positive");
        }
        for &n in &ordered_arities {
            if n <= 2 {
                return input(format!("arity {n} cannot carry a class order (P excludes 0, 1 and 2)"));
            }
            if n > max_arity {
                return input(format!("ordered arity {n} exceeds max_arity {max_arity}"));
            }
        }
        Ok(ClassSpec { ordered_arities, max_arity, allow_point_order })
    }

    /// The unordered class `K_0`, tracked up to `max_arity`.
    pub fn k0(max_arity: usize) -> Self {
        ClassSpec::new([], max_arity, false).expect("valid spec")
    }

    pub fn kp(ordered: impl IntoIterator<Item = usize>, max_arity: usize) -> Result<Self> {
        ClassSpec::new(ordered, max_arity, false)
    }

    pub fn with_point_order(mut self) -> Self {
        self.allow_point_order = true;
        self
    }

    pub fn ordered_arities(&self) -> &BTreeSet<usize> {
        &self.ordered_arities
    }

    pub fn is_ordered(&self, n: usize) -> bool {
        self.ordered_arities.contains(&n)
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn allow_point_order(&self) -> bool {
        self.allow_point_order
    }

    /// Number of arities carrying data on a universe of `m` points.
    pub fn tracked(&self, m: usize) -> usize {
        m.min(self.max_arity)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FinStructure {
    spec: ClassSpec,
    size: usize,
    /// `relations[n - 1][colex rank]` is the class of that n-subset.
    relations: Vec<Vec<u32>>,
    class_counts: Vec<u32>,
    /// Class ids from least to greatest.
    class_orders: BTreeMap<usize, Vec<u32>>,
    /// Position of each class id in `class_orders`.
    order_rank: BTreeMap<usize, Vec<u32>>,
    /// Points from least to greatest.
    point_order: Option<Vec<usize>>,
    point_rank: Option<Vec<usize>>,
}

impl fmt::Debug for FinStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("FinStructure");
        d.field("size", &self.size);
        for n in 1..=self.relations.len() {
            let classes = self.members(n);
            d.field(&format!("E{n}"), &classes);
        }
        for (n, o) in &self.class_orders {
            d.field(&format!("<{n}"), o);
        }
        if let Some(p) = &self.point_order {
            d.field("point_order", p);
        }
        d.finish()
    }
}

impl FinStructure {
    pub fn empty(spec: ClassSpec) -> Self {
        let point_order = spec.allow_point_order.then(Vec::new);
        FinStructure {
            spec,
            size: 0,
            relations: Vec::new(),
            class_counts: Vec::new(),
            class_orders: BTreeMap::new(),
            order_rank: BTreeMap::new(),
            point_rank: point_order.clone(),
            point_order,
        }
    }

    /// Builds a structure from arbitrary per-subset labels.
    ///
    /// `labels[n - 1]` lists a label for every n-subset in colex rank order;
    /// equal labels mean equal classes. `orders[n]` lists the distinct labels
    /// of arity `n` from least to greatest and must be present exactly for the
    /// ordered arities. The result is canonically relabeled.
    pub fn from_labels(
        spec: ClassSpec,
        size: usize,
        labels: Vec<Vec<u32>>,
        orders: BTreeMap<usize, Vec<u32>>,
        point_order: Option<Vec<usize>>,
    ) -> Result<Self> {
        let tracked = spec.tracked(size);
        if labels.len() != tracked {
            return input(format!("expected relation data for arities 1..={tracked}, got {}", labels.len()));
        }
        let mut relations = Vec::with_capacity(tracked);
        let mut class_counts = Vec::with_capacity(tracked);
        let mut class_orders = BTreeMap::new();
        for (i, raw) in labels.into_iter().enumerate() {
            let n = i + 1;
            if raw.len() != subset::count(size, n) {
                return input(format!("arity {n}: expected {} subsets, got {}", subset::count(size, n), raw.len()));
            }
            let (canon, remap) = canonical_labels(size, n, &raw);
            class_counts.push(remap.len() as u32);
            if spec.is_ordered(n) {
                let Some(order) = orders.get(&n) else {
                    return input(format!("arity {n} is ordered but no class order was given"));
                };
                let mut seen = BTreeSet::new();
                let mut mapped = Vec::with_capacity(order.len());
                for l in order {
                    let Some(&id) = remap.get(l) else {
                        return input(format!("arity {n}: order mentions unknown class label {l}"));
                    };
                    if !seen.insert(id) {
                        return input(format!("arity {n}: order lists class label {l} twice"));
                    }
                    mapped.push(id);
                }
                if mapped.len() != remap.len() {
                    return input(format!("arity {n}: order is not total on the classes"));
                }
                class_orders.insert(n, mapped);
            }
            relations.push(canon);
        }
        if let Some(n) = orders.keys().find(|&&n| !(spec.is_ordered(n) && n <= tracked)) {
            return input(format!("class order given for arity {n}, which is not an ordered tracked arity"));
        }
        let point_order = match point_order {
            Some(po) => {
                if !spec.allow_point_order {
                    return input("point order given but the class spec does not allow one");
                }
                if !is_permutation(&po, size) {
                    return input("point order is not a permutation of the universe");
                }
                Some(po)
            }
            None if spec.allow_point_order => return input("class spec requires a point order"),
            None => None,
        };
        Ok(Self::assemble(spec, size, relations, class_counts, class_orders, point_order))
    }

    /// Like [`FinStructure::from_labels`] but with labels supplied by a callback on sorted subsets.
    pub fn from_fn(
        spec: ClassSpec,
        size: usize,
        mut label: impl FnMut(usize, &[usize]) -> u32,
        orders: BTreeMap<usize, Vec<u32>>,
        point_order: Option<Vec<usize>>,
    ) -> Result<Self> {
        let tracked = spec.tracked(size);
        let mut labels = Vec::with_capacity(tracked);
        for n in 1..=tracked {
            let mut v = vec![0u32; subset::count(size, n)];
            for_each_combination(size, n, |s| v[subset::rank(s)] = label(n, s));
            labels.push(v);
        }
        Self::from_labels(spec, size, labels, orders, point_order)
    }

    /// Wraps raw data without any checking. Intended for exercising [`validate`].
    pub fn from_raw_parts(
        spec: ClassSpec,
        size: usize,
        relations: Vec<Vec<u32>>,
        class_orders: BTreeMap<usize, Vec<u32>>,
        point_order: Option<Vec<usize>>,
    ) -> Self {
        let class_counts = relations.iter().map(|r| r.iter().copied().max().map_or(0, |m| m.saturating_add(1))).collect();
        Self::assemble(spec, size, relations, class_counts, class_orders, point_order)
    }

    fn assemble(
        spec: ClassSpec,
        size: usize,
        relations: Vec<Vec<u32>>,
        class_counts: Vec<u32>,
        class_orders: BTreeMap<usize, Vec<u32>>,
        point_order: Option<Vec<usize>>,
    ) -> Self {
        let order_rank = class_orders
            .iter()
            .map(|(&n, order)| {
                let len = class_counts.get(n - 1).copied().unwrap_or(0) as usize;
                let mut rank = vec![UNSET; len.max(order.len())];
                for (pos, &c) in order.iter().enumerate() {
                    if let Some(slot) = rank.get_mut(c as usize) {
                        *slot = pos as u32;
                    }
                }
                (n, rank)
            })
            .collect();
        let point_rank = point_order.as_ref().map(|po| {
            let mut r = vec![usize::MAX; size.max(po.len())];
            for (pos, &p) in po.iter().enumerate() {
                if let Some(slot) = r.get_mut(p) {
                    *slot = pos;
                }
            }
            r
        });
        FinStructure { spec, size, relations, class_counts, class_orders, order_rank, point_order, point_rank }
    }

    pub fn spec(&self) -> &ClassSpec {
        &self.spec
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Highest arity with relation data.
    pub fn tracked_arities(&self) -> usize {
        self.relations.len()
    }

    /// Class of a strictly increasing n-subset.
    #[inline]
    pub fn class_of(&self, subset: &[usize]) -> u32 {
        self.relations[subset.len() - 1][subset::rank(subset)]
    }

    /// Class of an n-subset given in any order.
    pub fn class_of_points(&self, points: &[usize]) -> u32 {
        let mut s = points.to_vec();
        s.sort_unstable();
        self.class_of(&s)
    }

    #[inline]
    pub fn class_of_rank(&self, n: usize, rank: usize) -> u32 {
        self.relations[n - 1][rank]
    }

    /// Per-subset class labels of arity `n` in colex rank order.
    pub fn labels(&self, n: usize) -> &[u32] {
        &self.relations[n - 1]
    }

    pub fn class_count(&self, n: usize) -> usize {
        self.class_counts.get(n.wrapping_sub(1)).copied().unwrap_or(0) as usize
    }

    pub fn class_order(&self, n: usize) -> Option<&[u32]> {
        self.class_orders.get(&n).map(Vec::as_slice)
    }

    pub fn class_orders(&self) -> &BTreeMap<usize, Vec<u32>> {
        &self.class_orders
    }

    /// Position of `class` in the order `<_n`, if `n` is ordered.
    #[inline]
    pub fn order_rank(&self, n: usize, class: u32) -> Option<u32> {
        self.order_rank.get(&n).map(|r| r[class as usize])
    }

    pub fn point_order(&self) -> Option<&[usize]> {
        self.point_order.as_deref()
    }

    #[inline]
    pub fn point_rank(&self, p: usize) -> Option<usize> {
        self.point_rank.as_ref().map(|r| r[p])
    }

    /// Member subsets of each class of arity `n`, classes in id order, members in lex order.
    pub fn members(&self, n: usize) -> Vec<Vec<Vec<usize>>> {
        let mut out = vec![Vec::new(); self.class_count(n)];
        if n == 0 || n > self.relations.len() {
            return out;
        }
        for_each_combination(self.size, n, |s| {
            let c = self.class_of(s) as usize;
            if c >= out.len() {
                out.resize(c + 1, Vec::new());
            }
            out[c].push(s.to_vec());
        });
        out
    }

    /// The substructure on `points`, relabeled so that `points[i]` becomes `i`.
    pub fn induced(&self, points: &[usize]) -> Result<FinStructure> {
        let mut seen = vec![false; self.size];
        for &p in points {
            if p >= self.size {
                return input(format!("point {p} outside universe of size {}", self.size));
            }
            if std::mem::replace(&mut seen[p], true) {
                return input(format!("point {p} listed twice"));
            }
        }
        Ok(self.induced_unchecked(points))
    }

    pub(crate) fn induced_unchecked(&self, points: &[usize]) -> FinStructure {
        let k = points.len();
        let tracked = self.spec.tracked(k);
        let mut relations = Vec::with_capacity(tracked);
        let mut class_counts = Vec::with_capacity(tracked);
        let mut class_orders = BTreeMap::new();
        let mut image = Vec::with_capacity(tracked);
        for n in 1..=tracked {
            let mut remap: Vec<(u32, u32)> = Vec::new();
            let mut labels = vec![0u32; subset::count(k, n)];
            for_each_combination(k, n, |s| {
                image.clear();
                image.extend(s.iter().map(|&i| points[i]));
                image.sort_unstable();
                let old = self.class_of(&image);
                let id = match remap.iter().find(|(o, _)| *o == old) {
                    Some(&(_, id)) => id,
                    None => {
                        let id = remap.len() as u32;
                        remap.push((old, id));
                        id
                    }
                };
                labels[subset::rank(s)] = id;
            });
            if self.spec.is_ordered(n) {
                let mut present: Vec<(u32, u32)> = remap.iter().map(|&(old, id)| (self.order_rank(n, old).unwrap_or(UNSET), id)).collect();
                present.sort_unstable();
                class_orders.insert(n, present.into_iter().map(|(_, id)| id).collect());
            }
            class_counts.push(remap.len() as u32);
            relations.push(labels);
        }
        let point_order = self.point_rank.as_ref().map(|rank| {
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by_key(|&i| rank[points[i]]);
            idx
        });
        Self::assemble(self.spec.clone(), k, relations, class_counts, class_orders, point_order)
    }

    /// The structure obtained by renaming point `p` to `perm[p]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<FinStructure> {
        if !is_permutation(perm, self.size) {
            return input("relabeling is not a permutation of the universe");
        }
        let mut inverse = vec![0; self.size];
        for (p, &q) in perm.iter().enumerate() {
            inverse[q] = p;
        }
        Ok(self.induced_unchecked(&inverse))
    }

    /// The quotient `C(S, n) / E_n` as a sequence of class ids: in `<_n` order
    /// for ordered arities, otherwise in canonical id order.
    pub fn class_sort(&self, n: usize) -> Result<Vec<u32>> {
        if n == 0 || n > self.size {
            return input(format!("arity {n} exceeds universe size {}", self.size));
        }
        if n > self.relations.len() {
            return input(format!("arity {n} is not tracked (max_arity {})", self.spec.max_arity));
        }
        Ok(match self.class_orders.get(&n) {
            Some(o) => o.clone(),
            None => (0..self.class_count(n) as u32).collect(),
        })
    }

    /// Replaces the point order; the spec must allow one.
    pub fn with_point_order(&self, order: Vec<usize>) -> Result<FinStructure> {
        if !self.spec.allow_point_order {
            return input("class spec does not allow a point order");
        }
        if !is_permutation(&order, self.size) {
            return input("point order is not a permutation of the universe");
        }
        let mut s = self.clone();
        s.point_rank = None;
        s.point_order = None;
        let rel = std::mem::take(&mut s.relations);
        Ok(Self::assemble(s.spec, s.size, rel, s.class_counts, s.class_orders, Some(order)))
    }
}

pub(crate) fn is_permutation(p: &[usize], m: usize) -> bool {
    if p.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    p.iter().all(|&x| x < m && !std::mem::replace(&mut seen[x], true))
}

/// Relabels by first appearance in lexicographic subset order.
/// Returns the new labels (colex-indexed) and the raw→canonical map.
fn canonical_labels(size: usize, n: usize, raw: &[u32]) -> (Vec<u32>, BTreeMap<u32, u32>) {
    let mut remap = BTreeMap::new();
    let mut out = vec![0u32; raw.len()];
    for_each_combination(size, n, |s| {
        let r = subset::rank(s);
        let next = remap.len() as u32;
        out[r] = *remap.entry(raw[r]).or_insert(next);
    });
    (out, remap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    PartitionNotTotal,
    ArityExceedsUniverse,
    ArityExceedsMax,
    NonCanonicalLabels,
    OrderOutsideP,
    OrderMissing,
    OrderIrreflexive,
    OrderNotTotal,
    OrderUnknownClass,
    PointOrderNotAllowed,
    PointOrderInvalid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub axiom: Axiom,
    pub arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<u32>,
}

impl Violation {
    fn new(axiom: Axiom, arity: Option<usize>) -> Self {
        Violation { axiom, arity, subsets: Vec::new(), classes: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, axiom: Axiom) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }
}

/// Checks `s` against the axioms of the class described by `spec`. Never fails;
/// every problem found is listed in the report.
pub fn validate(s: &FinStructure, spec: &ClassSpec) -> ValidationReport {
    let mut v = Vec::new();
    let m = s.size;
    let expected = spec.tracked(m);
    for (i, labels) in s.relations.iter().enumerate() {
        let n = i + 1;
        if n > m {
            v.push(Violation::new(Axiom::ArityExceedsUniverse, Some(n)));
            continue;
        }
        if n > spec.max_arity {
            v.push(Violation::new(Axiom::ArityExceedsMax, Some(n)));
            continue;
        }
        if labels.len() != subset::count(m, n) {
            v.push(Violation::new(Axiom::PartitionNotTotal, Some(n)));
            continue;
        }
        // ids must be 0..k by first appearance in lex order
        let mut next = 0u32;
        let mut bad = None;
        for_each_combination(m, n, |sub| {
            let c = s.class_of(sub);
            if c == next {
                next += 1;
            } else if c > next && bad.is_none() {
                bad = Some((sub.to_vec(), c));
            }
        });
        if let Some((sub, c)) = bad {
            let mut viol = Violation::new(Axiom::NonCanonicalLabels, Some(n));
            viol.subsets.push(sub);
            viol.classes.push(c);
            v.push(viol);
        }
    }
    for n in s.relations.len() + 1..=expected {
        v.push(Violation::new(Axiom::PartitionNotTotal, Some(n)));
    }
    for (&n, order) in &s.class_orders {
        if !spec.is_ordered(n) || n > s.relations.len() {
            v.push(Violation::new(Axiom::OrderOutsideP, Some(n)));
            continue;
        }
        let k = s.class_count(n) as u32;
        let mut seen = BTreeSet::new();
        for &c in order {
            if c >= k {
                let mut viol = Violation::new(Axiom::OrderUnknownClass, Some(n));
                viol.classes.push(c);
                v.push(viol);
            } else if !seen.insert(c) {
                let mut viol = Violation::new(Axiom::OrderIrreflexive, Some(n));
                viol.classes.push(c);
                v.push(viol);
            }
        }
        let missing: Vec<u32> = (0..k).filter(|c| !seen.contains(c)).collect();
        if !missing.is_empty() {
            let mut viol = Violation::new(Axiom::OrderNotTotal, Some(n));
            viol.classes = missing;
            v.push(viol);
        }
    }
    for &n in spec.ordered_arities() {
        if n <= s.relations.len() && n <= m && !s.class_orders.contains_key(&n) {
            v.push(Violation::new(Axiom::OrderMissing, Some(n)));
        }
    }
    if let Some(po) = &s.point_order {
        if !spec.allow_point_order {
            v.push(Violation::new(Axiom::PointOrderNotAllowed, None));
        }
        if !is_permutation(po, m) {
            v.push(Violation::new(Axiom::PointOrderInvalid, None));
        }
    } else if spec.allow_point_order {
        v.push(Violation::new(Axiom::PointOrderInvalid, None));
    }
    ValidationReport { ok: v.is_empty(), violations: v }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::testutil::{same_partitions, structure};

    fn two_points_split() -> FinStructure {
        FinStructure::from_labels(ClassSpec::k0(3), 2, vec![vec![0, 1], vec![0]], BTreeMap::new(), None).unwrap()
    }

    #[test]
    fn two_singletons_and_one_pair_class_is_valid() {
        let s = two_points_split();
        assert!(validate(&s, s.spec()).ok);
        assert_eq!(s.class_count(1), 2);
        assert_eq!(s.class_count(2), 1);
    }

    #[test]
    fn relation_data_above_universe_is_reported() {
        let s = FinStructure::from_raw_parts(ClassSpec::k0(3), 2, vec![vec![0, 1], vec![0], vec![0]], BTreeMap::new(), None);
        let r = validate(&s, s.spec());
        assert!(!r.ok);
        assert!(r.has(Axiom::ArityExceedsUniverse));
    }

    #[test]
    fn class_order_relating_a_class_to_itself_is_reported() {
        let spec = ClassSpec::kp([3], 3).unwrap();
        let rel = vec![vec![0; 4], vec![0; 6], vec![0, 1, 1, 1]];
        let s = FinStructure::from_raw_parts(spec.clone(), 4, rel, BTreeMap::from([(3, vec![0, 1, 0])]), None);
        let r = validate(&s, &spec);
        assert!(r.has(Axiom::OrderIrreflexive));
    }

    #[test]
    fn missing_and_foreign_orders_are_reported() {
        let spec = ClassSpec::kp([3], 3).unwrap();
        let rel = vec![vec![0; 3], vec![0; 3], vec![0]];
        let s = FinStructure::from_raw_parts(spec.clone(), 3, rel.clone(), BTreeMap::new(), None);
        assert!(validate(&s, &spec).has(Axiom::OrderMissing));
        let t = FinStructure::from_raw_parts(spec.clone(), 3, rel, BTreeMap::from([(2, vec![0]), (3, vec![0])]), None);
        assert!(validate(&t, &spec).has(Axiom::OrderOutsideP));
    }

    #[test]
    fn non_canonical_labels_are_reported() {
        let s = FinStructure::from_raw_parts(ClassSpec::k0(1), 2, vec![vec![1, 0]], BTreeMap::new(), None);
        assert!(validate(&s, s.spec()).has(Axiom::NonCanonicalLabels));
    }

    #[test]
    fn point_order_requirements() {
        let spec = ClassSpec::k0(1).with_point_order();
        let s = FinStructure::from_raw_parts(spec.clone(), 2, vec![vec![0, 0]], BTreeMap::new(), None);
        assert!(validate(&s, &spec).has(Axiom::PointOrderInvalid));
        let t = FinStructure::from_raw_parts(ClassSpec::k0(1), 2, vec![vec![0, 0]], BTreeMap::new(), Some(vec![1, 0]));
        assert!(validate(&t, t.spec()).has(Axiom::PointOrderNotAllowed));
    }

    #[test]
    fn spec_rejects_orders_on_low_or_untracked_arities() {
        assert!(ClassSpec::kp([2], 3).is_err());
        assert!(ClassSpec::kp([4], 3).is_err());
        assert!(ClassSpec::new([], 0, false).is_err());
    }

    #[test]
    fn from_labels_canonicalizes() {
        let s = FinStructure::from_labels(ClassSpec::k0(1), 3, vec![vec![7, 3, 7]], BTreeMap::new(), None).unwrap();
        assert_eq!(s.labels(1), &[0, 1, 0]);
    }

    #[test]
    fn induced_restricts_and_relabels() {
        let s = FinStructure::from_labels(ClassSpec::k0(1), 3, vec![vec![0, 1, 1]], BTreeMap::new(), None).unwrap();
        let t = s.induced(&[1, 2]).unwrap();
        assert_eq!(t.size(), 2);
        assert_eq!(t.class_count(1), 1);
        assert_eq!(s.induced(&[]).unwrap(), FinStructure::empty(s.spec().clone()));
        assert!(s.induced(&[0, 3]).is_err());
        assert!(s.induced(&[1, 1]).is_err());
    }

    #[test]
    fn class_sort_follows_the_stored_order() {
        let spec = ClassSpec::kp([3], 3).unwrap();
        let labels = vec![vec![0; 4], vec![0; 6], vec![5, 9, 9, 5]];
        let s = FinStructure::from_labels(spec, 4, labels, BTreeMap::from([(3, vec![9, 5])]), None).unwrap();
        let sorted = s.class_sort(3).unwrap();
        assert_eq!(sorted.len(), 2);
        // oracle: classes of the 3-subsets, deduplicated, sorted by stored rank
        let mut classes: Vec<u32> = crate::subset::Combinations::new(4, 3).map(|x| s.class_of(&x)).collect();
        classes.sort_by_key(|&c| s.order_rank(3, c));
        classes.dedup();
        assert_eq!(sorted, classes);
        assert_eq!(s.class_sort(2).unwrap().len(), 1);
        assert!(s.class_sort(5).is_err());
        assert!(s.class_sort(0).is_err());
    }

    #[test]
    fn relabel_rejects_non_permutations() {
        let s = two_points_split();
        assert!(s.relabel(&[0, 0]).is_err());
        let r = s.relabel(&[1, 0]).unwrap();
        assert!(validate(&r, r.spec()).ok);
    }

    fn rebuilt(s: &FinStructure, u: &[usize]) -> FinStructure {
        // independent restriction: raw labels are the parent's class ids
        let k = u.len();
        let tracked = s.spec().tracked(k);
        let mut labels = Vec::new();
        for n in 1..=tracked {
            let mut v = vec![0u32; subset::count(k, n)];
            for sub in subset::Combinations::new(k, n) {
                let mut img: Vec<usize> = sub.iter().map(|&i| u[i]).collect();
                img.sort_unstable();
                v[subset::rank(&sub)] = s.class_of(&img);
            }
            labels.push(v);
        }
        let orders = s
            .class_orders()
            .iter()
            .filter(|(&n, _)| n <= tracked)
            .map(|(&n, o)| {
                let present: BTreeSet<u32> = labels[n - 1].iter().copied().collect();
                (n, o.iter().copied().filter(|c| present.contains(c)).collect())
            })
            .collect();
        let po = s.point_order().map(|po| {
            let pos: Vec<usize> = po.iter().filter_map(|p| u.iter().position(|x| x == p)).collect();
            pos
        });
        FinStructure::from_labels(s.spec().clone(), k, labels, orders, po).unwrap()
    }

    proptest! {
        #[test]
        fn induced_substructures_validate(s in structure(6), mask in any::<u32>()) {
            let u: Vec<usize> = (0..s.size()).filter(|i| mask >> i & 1 == 1).collect();
            let t = s.induced(&u).unwrap();
            prop_assert!(validate(&t, s.spec()).ok);
            prop_assert_eq!(&t, &rebuilt(&s, &u));
        }

        #[test]
        fn sampled_members_validate(s in structure(6)) {
            prop_assert!(validate(&s, s.spec()).ok);
            prop_assert_eq!(s.induced(&(0..s.size()).collect::<Vec<_>>()).unwrap(), s);
        }

        #[test]
        fn relabel_twice_with_inverse_is_identity(s in structure(5), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..s.size()).collect();
            perm.shuffle(&mut crate::testutil::rng(seed));
            let mut inv = vec![0; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inv[p] = i;
            }
            let r = s.relabel(&perm).unwrap();
            prop_assert!(validate(&r, s.spec()).ok);
            prop_assert!(same_partitions(&r.relabel(&inv).unwrap(), &s));
        }
    }

    /// The 2n-ary relation "same class" on tuples of distinct points is
    /// invariant under permuting either tuple and under swapping the tuples.
    #[test]
    fn tuple_relation_is_symmetric() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for m in 1..=5 {
            for _ in 0..5 {
                let s = crate::generic::sample_member(&ClassSpec::k0(3), m, &mut rng);
                for n in 1..=s.tracked_arities() {
                    let tuples = tuples_of(m, n);
                    let e = |x: &[usize], y: &[usize]| s.class_of_points(x) == s.class_of_points(y);
                    for x in &tuples {
                        for y in &tuples {
                            assert_eq!(e(x, y), e(y, x));
                            for sigma in tuples_of(n, n) {
                                let xs: Vec<usize> = sigma.iter().map(|&i| x[i]).collect();
                                assert_eq!(e(x, y), e(&xs, y));
                            }
                        }
                    }
                }
            }
        }
    }

    fn tuples_of(m: usize, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|t: Vec<usize>| (0..m).filter(|p| !t.contains(p)).map(|p| [t.clone(), vec![p]].concat()).collect::<Vec<_>>())
                .collect();
        }
        out
    }
}
