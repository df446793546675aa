//! Enumeration of small members, one-point extensions, the bounded extension
//! property, and saturation towards the generic structure.
//!
//! A structure `M` is *k-saturated* when for every `B` with `|B| <= k`, every
//! `A <= B` and every embedding of `A` into `M` some embedding of `B` into `M`
//! extends it. Adding points one at a time shows this is equivalent to the
//! one-point version (`|B| = |A| + 1`), which is what the checker tests:
//! for each subset `U` of `M` with `|U| < k` it compares the one-point
//! extensions of `M|U` realized in `M` with all one-point extensions of the
//! class.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amalgam::{amalgamate, AmalgamProblem, AmalgamRule};
use crate::error::{input, Error, Result};
use crate::iso::{canonical_form, CanonicalKey};
use crate::model::{ClassSpec, FinStructure};
use crate::subset::{self, for_each_combination, Combinations};

/// Guards for exhaustive enumeration. Member counts grow roughly like a
/// product of Bell numbers of `C(size, n)`; size 4 with all arities is a
/// few thousand types, size 5 is out of reach once arities 2 and 3 are tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub max_size: usize,
    pub max_arity: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits { max_size: 5, max_arity: 4 }
    }
}

/// Labelings of the new subsets of one arity: restricted growth strings over
/// `k` existing classes plus fresh ones (`k`, `k + 1`, ...).
fn growth_strings(len: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(len: usize, k: u32, fresh: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for l in 0..=k + fresh {
            cur.push(l);
            rec(len, k, fresh + u32::from(l == k + fresh), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, k, 0, &mut Vec::with_capacity(len), &mut out);
    out
}

/// All ways of inserting `fresh` new labels (in any relative order) into `base`.
fn insertions(base: &[u32], fresh: &[u32]) -> Vec<Vec<u32>> {
    let mut acc = vec![base.to_vec()];
    for &f in fresh {
        acc = acc
            .into_iter()
            .flat_map(|seq| {
                (0..=seq.len()).map(move |pos| {
                    let mut s = seq.clone();
                    s.insert(pos, f);
                    s
                })
            })
            .collect();
    }
    acc
}

/// All members on `|A| + 1` points whose restriction to `0..|A|` is `A`.
/// Distinct results are non-isomorphic over `A`.
pub fn one_point_extensions(spec: &ClassSpec, a: &FinStructure) -> Result<Vec<FinStructure>> {
    if a.spec() != spec {
        return input("structure does not belong to the given class spec");
    }
    let m = a.size();
    let tracked = spec.tracked(m + 1);
    // per arity: (labels for the new subsets, class order or None)
    let mut per_arity: Vec<Vec<(Vec<u32>, Option<Vec<u32>>)>> = Vec::with_capacity(tracked);
    for n in 1..=tracked {
        let k = if n <= a.tracked_arities() { a.class_count(n) as u32 } else { 0 };
        let q = subset::count(m, n - 1);
        let mut options = Vec::new();
        for g in growth_strings(q, k) {
            if spec.is_ordered(n) {
                let fresh_count = g.iter().copied().max().map_or(0, |x| (x + 1).saturating_sub(k));
                let fresh: Vec<u32> = (k..k + fresh_count).collect();
                let base = a.class_order(n).map(<[u32]>::to_vec).unwrap_or_default();
                for order in insertions(&base, &fresh) {
                    options.push((g.clone(), Some(order)));
                }
            } else {
                options.push((g, None));
            }
        }
        per_arity.push(options);
    }
    let point_orders: Vec<Option<Vec<usize>>> = match a.point_order() {
        Some(po) => (0..=m)
            .map(|pos| {
                let mut o = po.to_vec();
                o.insert(pos, m);
                Some(o)
            })
            .collect(),
        None => vec![None],
    };

    let mut out = Vec::new();
    let mut idx = vec![0usize; tracked];
    loop {
        for po in &point_orders {
            let mut labels = Vec::with_capacity(tracked);
            let mut orders = BTreeMap::new();
            for n in 1..=tracked {
                let (g, order) = &per_arity[n - 1][idx[n - 1]];
                let mut lab = if n <= a.tracked_arities() { a.labels(n).to_vec() } else { Vec::new() };
                lab.extend_from_slice(g);
                labels.push(lab);
                if let Some(o) = order {
                    orders.insert(n, o.clone());
                }
            }
            out.push(FinStructure::from_labels(spec.clone(), m + 1, labels, orders, po.clone())?);
        }
        // odometer over arities
        let mut i = 0;
        loop {
            if i == tracked {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < per_arity[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// One representative per isomorphism type of members of the given size,
/// sorted by canonical key.
pub fn enumerate_members(spec: &ClassSpec, size: usize, limits: EnumerationLimits) -> Result<Vec<FinStructure>> {
    if size > limits.max_size {
        return Err(Error::Refused(format!(
            "size {size} exceeds the enumeration guard {} (member counts grow super-exponentially)",
            limits.max_size
        )));
    }
    if spec.tracked(size) > limits.max_arity {
        return Err(Error::Refused(format!("{} tracked arities exceed the enumeration guard {}", spec.tracked(size), limits.max_arity)));
    }
    let mut level: Vec<FinStructure> = vec![FinStructure::empty(spec.clone())];
    for _ in 0..size {
        let exts: Vec<Vec<FinStructure>> = level.par_iter().map(|a| one_point_extensions(spec, a)).collect::<Result<_>>()?;
        let mut by_key: BTreeMap<CanonicalKey, FinStructure> = BTreeMap::new();
        for s in exts.into_iter().flatten() {
            by_key.entry(canonical_form(&s)).or_insert(s);
        }
        level = by_key.into_values().collect();
    }
    Ok(level)
}

/// A one-point extension type over an embedded copy that `M` does not realize.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingExtension {
    /// The embedded copy of `A` in `M`, in order (`A`'s point `i` is `base[i]`).
    pub base: Vec<usize>,
    /// `B`, with `A` on points `0..|A|` and the new point last.
    #[serde(with = "structure_serde")]
    pub extension: FinStructure,
}

mod structure_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::json::StructureDoc;
    use crate::model::FinStructure;

    pub fn serialize<S: Serializer>(s: &FinStructure, ser: S) -> Result<S::Ok, S::Error> {
        StructureDoc::from(s).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<FinStructure, D::Error> {
        StructureDoc::deserialize(de)?.into_structure().map_err(serde::de::Error::custom)
    }
}

fn realizes(m: &FinStructure, base: &[usize], ext: &FinStructure) -> bool {
    let mut pts = base.to_vec();
    pts.push(0);
    (0..m.size()).filter(|p| !base.contains(p)).any(|p| {
        *pts.last_mut().unwrap() = p;
        m.induced_unchecked(&pts) == *ext
    })
}

/// Every one-point extension over a copy of size `< k` that `m` fails to
/// realize, ordered by (extension size, canonical key, copy).
pub fn check_extension_property(m: &FinStructure, k: usize) -> Vec<MissingExtension> {
    let spec = m.spec();
    let mut missing = Vec::new();
    for s in 0..k.min(m.size() + 1) {
        let bases: Vec<Vec<usize>> = Combinations::new(m.size(), s).collect();
        let induced: Vec<FinStructure> = bases.par_iter().map(|u| m.induced_unchecked(u)).collect();
        let mut distinct: Vec<&FinStructure> = induced.iter().collect::<HashSet<_>>().into_iter().collect();
        distinct.sort_by_key(|a| canonical_form(a));
        let ext_table: HashMap<&FinStructure, Vec<FinStructure>> =
            distinct.par_iter().map(|&a| (a, one_point_extensions(spec, a).expect("same spec"))).collect();
        let found: Vec<Vec<MissingExtension>> = bases
            .par_iter()
            .zip(induced.par_iter())
            .map(|(u, a)| {
                let mut realized = HashSet::new();
                let mut pts = u.clone();
                pts.push(0);
                for p in (0..m.size()).filter(|p| !u.contains(p)) {
                    *pts.last_mut().unwrap() = p;
                    realized.insert(m.induced_unchecked(&pts));
                }
                ext_table[a]
                    .iter()
                    .filter(|e| !realized.contains(*e))
                    .map(|e| MissingExtension { base: u.clone(), extension: e.clone() })
                    .collect()
            })
            .collect();
        missing.extend(found.into_iter().flatten());
    }
    let mut keyed: Vec<(usize, CanonicalKey, MissingExtension)> =
        missing.into_par_iter().map(|x| (x.extension.size(), canonical_form(&x.extension), x)).collect();
    keyed.sort_by(|a, b| (a.0, &a.1, &a.2.base).cmp(&(b.0, &b.1, &b.2.base)));
    keyed.into_iter().map(|(_, _, x)| x).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildStep {
    pub base: Vec<usize>,
    /// Size of the structure after this step.
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct GenericApproximation {
    pub structure: FinStructure,
    /// The certified level, or `None` if the point budget ran out first.
    pub saturation_level: Option<usize>,
    /// Extensions still missing when the budget ran out (empty when certified).
    pub missing: Vec<MissingExtension>,
    pub build_log: Vec<BuildStep>,
}

impl GenericApproximation {
    pub fn is_certified(&self) -> bool {
        self.saturation_level.is_some()
    }
}

/// How `saturate` realizes a missing extension `A <= B` over a copy of `A` in `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Realization {
    /// The finest amalgam of `M` and `B` over `A`. Every class of `B` outside
    /// `A` becomes a new class of `M`, so the class count grows without bound
    /// and saturation at level 3 or more does not terminate.
    Finest(AmalgamRule),
    /// A coarser amalgam: classes of `B` outside `A` are identified with
    /// existing classes of `M` not meeting the copy (new classes only when none
    /// fit), and subsets meeting both private parts get existing classes.
    /// Among `candidates` seeded random completions, the one realizing the most
    /// pending extensions is kept.
    Reuse { seed: u64, candidates: usize },
}

impl Default for Realization {
    fn default() -> Self {
        Realization::Reuse { seed: 0, candidates: 8 }
    }
}

/// Extends `m` one point at a time until it is `k`-saturated or `point_budget`
/// points are used. Missing extensions are processed in checker order; each
/// one still missing when its turn comes is realized by an amalgam of `m` and
/// the extension over the embedded copy.
pub fn saturate(m: &FinStructure, k: usize, point_budget: usize) -> Result<GenericApproximation> {
    saturate_with(m, k, point_budget, Realization::default())
}

pub fn saturate_with(m: &FinStructure, k: usize, point_budget: usize, how: Realization) -> Result<GenericApproximation> {
    if point_budget < m.size() {
        return input(format!("budget {point_budget} is below the current size {}", m.size()));
    }
    let mut rng = match how {
        Realization::Reuse { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
        Realization::Finest(_) => ChaCha8Rng::seed_from_u64(0),
    };
    let mut cur = m.clone();
    let mut log = Vec::new();
    loop {
        let missing = check_extension_property(&cur, k);
        if missing.is_empty() {
            return Ok(GenericApproximation { structure: cur, saturation_level: Some(k), missing, build_log: log });
        }
        for (i, miss) in missing.iter().enumerate() {
            if realizes(&cur, &miss.base, &miss.extension) {
                continue;
            }
            if cur.size() + 1 > point_budget {
                let missing = check_extension_property(&cur, k);
                return Ok(GenericApproximation { structure: cur, saturation_level: None, missing, build_log: log });
            }
            cur = match how {
                Realization::Finest(rule) => {
                    let problem = AmalgamProblem {
                        a: cur.induced_unchecked(&miss.base),
                        b1: cur.clone(),
                        b2: miss.extension.clone(),
                        glue1: miss.base.clone(),
                        glue2: (0..miss.base.len()).collect(),
                    };
                    amalgamate(&problem, rule)?.structure
                }
                Realization::Reuse { candidates, .. } => {
                    let pending = &missing[i + 1..missing.len().min(i + 1 + PENDING_WINDOW)];
                    let mut best: Option<(usize, FinStructure)> = None;
                    for _ in 0..candidates.max(1) {
                        let c = reuse_amalgam(&cur, &miss.base, &miss.extension, &mut rng)?;
                        let score = pending.iter().filter(|p| realized_by_last(&c, &p.base, &p.extension)).count();
                        if best.as_ref().is_none_or(|(b, _)| score > *b) {
                            best = Some((score, c));
                        }
                    }
                    best.expect("at least one candidate").1
                }
            };
            log.push(BuildStep { base: miss.base.clone(), size: cur.size() });
        }
    }
}

const PENDING_WINDOW: usize = 4096;

fn realized_by_last(c: &FinStructure, base: &[usize], ext: &FinStructure) -> bool {
    let mut pts = base.to_vec();
    pts.push(c.size() - 1);
    c.induced_unchecked(&pts) == *ext
}

/// `m` plus one new point `p` such that `base ++ [p]` induces `ext`, built by
/// reusing classes of `m`. The result is an amalgam of `m` and `ext` over
/// `ext | 0..|base|`.
fn reuse_amalgam(m: &FinStructure, base: &[usize], ext: &FinStructure, rng: &mut ChaCha8Rng) -> Result<FinStructure> {
    let spec = m.spec();
    let size = m.size();
    let s = base.len();
    let tracked = spec.tracked(size + 1);
    let mut labels = Vec::with_capacity(tracked);
    let mut orders = BTreeMap::new();
    for n in 1..=tracked {
        let old_tracked = n <= m.tracked_arities();
        let mut lab: Vec<u32> = if old_tracked { m.labels(n).to_vec() } else { Vec::new() };
        let mut count = if old_tracked { m.class_count(n) as u32 } else { 0 };
        let mut order: Vec<u32> = m.class_order(n).map(<[u32]>::to_vec).unwrap_or_default();

        // classes of ext on A mapped to classes of m on the copy
        let mut to_m: BTreeMap<u32, u32> = BTreeMap::new();
        if n <= s {
            for_each_combination(s, n, |t| {
                let img: Vec<usize> = {
                    let mut v: Vec<usize> = t.iter().map(|&i| base[i]).collect();
                    v.sort_unstable();
                    v
                };
                to_m.insert(ext.class_of(t), m.class_of(&img));
            });
        }
        let on_copy: HashSet<u32> = to_m.values().copied().collect();
        // classes of ext met by the new point but not by A
        let mut fresh: Vec<u32> = Vec::new();
        if n <= s + 1 {
            for_each_combination(s, n - 1, |t| {
                let mut v = t.to_vec();
                v.push(s);
                let c = ext.class_of(&v);
                if !to_m.contains_key(&c) && !fresh.contains(&c) {
                    fresh.push(c);
                }
            });
        }
        if spec.is_ordered(n) {
            let ext_order = ext.class_order(n).unwrap_or(&[]);
            fresh.sort_by_key(|c| ext_order.iter().position(|x| x == c));
            for &c in &fresh {
                let pos = ext_order.iter().position(|&x| x == c).unwrap();
                let rank_of = |id: u32, order: &[u32]| order.iter().position(|&x| x == id).unwrap();
                // lower bound: rank in m of the previous ext class; upper: next class of A
                let lo = ext_order[..pos].iter().rev().find_map(|x| to_m.get(x)).map(|&id| rank_of(id, &order));
                let hi = ext_order[pos + 1..]
                    .iter()
                    .find_map(|x| if fresh.contains(x) { None } else { to_m.get(x) })
                    .map(|&id| rank_of(id, &order));
                let start = lo.map_or(0, |r| r + 1);
                let end = hi.unwrap_or(order.len());
                let options: Vec<u32> = order[start..end.max(start)]
                    .iter()
                    .copied()
                    .filter(|id| !on_copy.contains(id) && !to_m.values().any(|v| v == id))
                    .collect();
                let id = match options.choose(rng) {
                    Some(&id) => id,
                    None => {
                        let id = count;
                        count += 1;
                        order.insert(start, id);
                        id
                    }
                };
                to_m.insert(c, id);
            }
        } else {
            let mut free: Vec<u32> = (0..count).filter(|id| !on_copy.contains(id)).collect();
            free.shuffle(rng);
            for &c in &fresh {
                let id = free.pop().unwrap_or_else(|| {
                    count += 1;
                    count - 1
                });
                to_m.insert(c, id);
            }
        }
        if count == 0 {
            count = 1;
            if spec.is_ordered(n) {
                order.push(0);
            }
        }
        let q = subset::count(size, n - 1);
        let base_pos: HashMap<usize, usize> = base.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        for r in 0..q {
            let t = subset::unrank(r, n - 1);
            let local: Option<Vec<usize>> = t.iter().map(|p| base_pos.get(p).copied()).collect();
            let id = match local {
                Some(mut v) => {
                    v.sort_unstable();
                    v.push(s);
                    to_m[&ext.class_of(&v)]
                }
                None => rng.gen_range(0..count),
            };
            lab.push(id);
        }
        if spec.is_ordered(n) {
            orders.insert(n, order);
        }
        labels.push(lab);
    }
    let point_order = match (m.point_order(), ext.point_order()) {
        (Some(po), Some(eo)) => {
            let at = eo.iter().position(|&x| x == s).unwrap();
            let lo = eo[..at].last().map(|&i| m.point_rank(base[i]).unwrap() + 1).unwrap_or(0);
            let hi = eo.get(at + 1).map(|&i| m.point_rank(base[i]).unwrap()).unwrap_or(size);
            let mut o = po.to_vec();
            o.insert(rng.gen_range(lo..=hi), size);
            Some(o)
        }
        _ => None,
    };
    let c = FinStructure::from_labels(spec.clone(), size + 1, labels, orders, point_order)?;
    let all: Vec<usize> = (0..size).collect();
    if c.induced_unchecked(&all) != *m || !realized_by_last(&c, base, ext) {
        return Err(Error::Internal("class-reusing amalgam does not contain both factors".into()));
    }
    Ok(c)
}

/// A random member of the given size: per arity a random number of classes,
/// uniform labels, and a random class order where needed.
pub fn sample_member(spec: &ClassSpec, size: usize, rng: &mut impl Rng) -> FinStructure {
    let tracked = spec.tracked(size);
    let mut labels = Vec::with_capacity(tracked);
    let mut orders = BTreeMap::new();
    for n in 1..=tracked {
        let total = subset::count(size, n);
        let k = rng.gen_range(1..=total.min(6)) as u32;
        let lab: Vec<u32> = (0..total).map(|_| rng.gen_range(0..k)).collect();
        if spec.is_ordered(n) {
            let mut used: Vec<u32> = lab.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            used.shuffle(rng);
            orders.insert(n, used);
        }
        labels.push(lab);
    }
    let point_order = spec.allow_point_order().then(|| {
        let mut p: Vec<usize> = (0..size).collect();
        p.shuffle(rng);
        p
    });
    FinStructure::from_labels(spec.clone(), size, labels, orders, point_order).expect("sampled data is well formed")
}

/// A random one-point extension of `a` (new point last).
pub fn sample_one_point_extension(a: &FinStructure, rng: &mut impl Rng) -> FinStructure {
    let spec = a.spec();
    let m = a.size();
    let tracked = spec.tracked(m + 1);
    let mut labels = Vec::with_capacity(tracked);
    let mut orders = BTreeMap::new();
    for n in 1..=tracked {
        let k = if n <= a.tracked_arities() { a.class_count(n) as u32 } else { 0 };
        let mut lab = if n <= a.tracked_arities() { a.labels(n).to_vec() } else { Vec::new() };
        let mut fresh = 0u32;
        for _ in 0..subset::count(m, n - 1) {
            let l = if k + fresh == 0 { 0 } else { rng.gen_range(0..=k + fresh) };
            if l == k + fresh {
                fresh += 1;
            }
            lab.push(l);
        }
        if spec.is_ordered(n) {
            let mut order = a.class_order(n).map(<[u32]>::to_vec).unwrap_or_default();
            for f in k..k + fresh {
                let pos = rng.gen_range(0..=order.len());
                order.insert(pos, f);
            }
            orders.insert(n, order);
        }
        labels.push(lab);
    }
    let point_order = a.point_order().map(|po| {
        let mut o = po.to_vec();
        o.insert(rng.gen_range(0..=m), m);
        o
    });
    FinStructure::from_labels(spec.clone(), m + 1, labels, orders, point_order).expect("sampled data is well formed")
}

/// A finite partial map on the `E_arity`-classes of a host structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    pub arity: usize,
    pub pairs: Vec<(u32, u32)>,
}

#[derive(Clone, Debug)]
pub struct ClassMapRealization {
    pub structure: FinStructure,
    /// Per map: host class id → class id in `structure`.
    pub class_names: Vec<BTreeMap<u32, u32>>,
    /// Point map on `structure`: an isomorphism between induced substructures
    /// inducing every class map on the named classes.
    pub partial_iso: Vec<(usize, usize)>,
    /// An automorphism of `structure` inducing every class map. Exists only
    /// when every map on an ordered arity is the identity on its domain: a
    /// finite linear order has no other automorphism.
    pub automorphism: Option<Vec<usize>>,
}

/// Realizes partial maps on class sorts by disjoint representative blocks.
///
/// For each map of arity `i`, every class in its domain or range gets an
/// `i`-block of fresh points; these blocks form `Ω_i`. Inside `Ω_i` all
/// `j`-subsets (`j != i`) form one class, and all `i`-subsets meeting two
/// blocks form one class. Subsets meeting two different `Ω`s form one class
/// per arity. Named classes keep the host's order; the auxiliary classes
/// come after them.
pub fn realize_class_maps(host: &FinStructure, maps: &[ClassMap]) -> Result<ClassMapRealization> {
    let spec = host.spec();
    let mut seen_arity = std::collections::BTreeSet::new();
    for map in maps {
        let i = map.arity;
        if i == 0 || i > host.tracked_arities() {
            return input(format!("arity {i} is not tracked in the host"));
        }
        if !map.pairs.is_empty() && !seen_arity.insert(i) {
            return input(format!("two maps act on arity {i}"));
        }
        let k = host.class_count(i) as u32;
        let mut dom = HashSet::new();
        let mut rng_set = HashSet::new();
        for &(v, w) in &map.pairs {
            if v >= k || w >= k {
                return input(format!("arity {i}: class {} is not a host class", v.max(w)));
            }
            if !dom.insert(v) || !rng_set.insert(w) {
                return input(format!("arity {i}: map is not an injective function"));
            }
        }
        if spec.is_ordered(i) {
            for &(v, w) in &map.pairs {
                for &(v2, w2) in &map.pairs {
                    let before = host.order_rank(i, v) < host.order_rank(i, v2);
                    if before != (host.order_rank(i, w) < host.order_rank(i, w2)) {
                        return input(format!("arity {i}: map does not respect <_{i} ({v}->{w}, {v2}->{w2})"));
                    }
                }
            }
        }
    }

    // layout: one Ω per nonempty map
    struct Omega {
        arity: usize,
        start: usize,
        classes: Vec<u32>,
    }
    let mut omegas: Vec<(usize, Omega)> = Vec::new();
    let mut size = 0;
    for (t, map) in maps.iter().enumerate() {
        if map.pairs.is_empty() {
            continue;
        }
        let mut classes: Vec<u32> = map.pairs.iter().flat_map(|&(v, w)| [v, w]).collect();
        classes.sort_unstable();
        classes.dedup();
        if spec.is_ordered(map.arity) {
            classes.sort_by_key(|&c| host.order_rank(map.arity, c));
        }
        let om = Omega { arity: map.arity, start: size, classes };
        size += om.classes.len() * om.arity;
        omegas.push((t, om));
    }
    let omega_of = |p: usize| omegas.iter().position(|(_, o)| p >= o.start && p < o.start + o.classes.len() * o.arity).unwrap();

    const NAMED: u32 = 1 << 20;
    let label = |n: usize, s: &[usize]| -> u32 {
        let t = omega_of(s[0]);
        if s.iter().any(|&p| omega_of(p) != t) {
            return 0;
        }
        let o = &omegas[t].1;
        if n != o.arity {
            return 2 + t as u32;
        }
        let block = (s[0] - o.start) / o.arity;
        if s.iter().all(|&p| (p - o.start) / o.arity == block) {
            NAMED + block as u32
        } else {
            1
        }
    };
    let tracked = spec.tracked(size);
    let mut orders = BTreeMap::new();
    for n in spec.ordered_arities().iter().copied().filter(|&n| n <= tracked) {
        let mut present = std::collections::BTreeSet::new();
        for_each_combination(size, n, |s| {
            present.insert(label(n, s));
        });
        let mut order: Vec<u32> = present.iter().copied().filter(|&l| l >= NAMED).collect();
        order.extend(present.iter().copied().filter(|&l| l < NAMED));
        orders.insert(n, order);
    }
    let point_order = spec.allow_point_order().then(|| (0..size).collect());
    let f = FinStructure::from_fn(spec.clone(), size, label, orders, point_order)?;

    let mut class_names = vec![BTreeMap::new(); maps.len()];
    let mut partial_iso = Vec::new();
    let mut perm: Vec<usize> = (0..size).collect();
    let mut has_automorphism = true;
    for (t, o) in &omegas {
        let block = |l: usize| o.start + l * o.arity..o.start + (l + 1) * o.arity;
        for (l, &c) in o.classes.iter().enumerate() {
            let pts: Vec<usize> = block(l).collect();
            class_names[*t].insert(c, f.class_of(&pts));
        }
        let pos = |c: u32| o.classes.iter().position(|&x| x == c).unwrap();
        let pairs = &maps[*t].pairs;
        for &(v, w) in pairs {
            partial_iso.extend(block(pos(v)).zip(block(pos(w))));
        }
        if spec.is_ordered(o.arity) && pairs.iter().any(|(v, w)| v != w) {
            has_automorphism = false;
            continue;
        }
        // extend the partial injection on positions to a permutation
        let mut target: Vec<Option<usize>> = vec![None; o.classes.len()];
        for &(v, w) in pairs {
            target[pos(v)] = Some(pos(w));
        }
        let taken: HashSet<usize> = target.iter().flatten().copied().collect();
        let mut free = (0..o.classes.len()).filter(|x| !taken.contains(x));
        for l in 0..o.classes.len() {
            let dst = match target[l] {
                Some(d) => d,
                None => free.next().unwrap(),
            };
            for (p, q) in block(l).zip(block(dst)) {
                perm[p] = q;
            }
        }
    }
    partial_iso.sort_unstable();
    let automorphism = has_automorphism.then_some(perm);

    if let Some(a) = &automorphism {
        if !crate::iso::is_automorphism(&f, a) {
            return Err(Error::Internal("constructed permutation is not an automorphism".into()));
        }
    }
    let (dom, img): (Vec<usize>, Vec<usize>) = partial_iso.iter().copied().unzip();
    if f.induced_unchecked(&dom) != f.induced_unchecked(&img) {
        return Err(Error::Internal("constructed point map is not a partial isomorphism".into()));
    }
    Ok(ClassMapRealization { structure: f, class_names, partial_iso, automorphism })
}
