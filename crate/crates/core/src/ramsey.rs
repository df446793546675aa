//! The witness structure against the Ramsey property, its enumeration
//! coloring, convexity of `E_1`-classes under a point order, and detection
//! of `<_n`-increasing sequences of type `Z/4Z`.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::iso::{canonical_form_labeled, copies, for_each_embedding, CanonicalKey, Constraints};
use crate::model::{ClassSpec, FinStructure};
use crate::subset::{for_each_combination, Combinations};

/// `B` on `6n` points: blocks `a1 < a2 < a3 < a4 < b1 < b2` of `n` points
/// each (block `i` is `i*n..(i+1)*n`).
#[derive(Clone, Debug)]
pub struct RamseyWitness {
    pub structure: FinStructure,
    pub n: usize,
    /// `B` restricted to the first four blocks.
    pub pattern: FinStructure,
    /// The two designated copies of the pattern: blocks 1-4 and blocks 3-6.
    pub copies: [Vec<usize>; 2],
}

impl RamseyWitness {
    pub fn block(&self, i: usize) -> Vec<usize> {
        (i * self.n..(i + 1) * self.n).collect()
    }
}

/// Builds the witness. For `n = 1` the spec must allow a point order (unless
/// arity 1 is ordered); for `n > 1`, `n` must be an ordered arity. Arity `2n`
/// must be tracked and unordered.
///
/// For `n = 1` the six points get distinct `E_1`-classes, the pairs `a1a2`
/// and `b1b2` share an `E_2`-class and every other pair has its own, and all
/// larger subsets form one class per arity. For larger `n` the blocks get
/// increasing `E_n`-classes (non-block `n`-subsets in one class above them),
/// the `2n`-subsets `a1a2` and `b1b2` share a class `V`, `a3a4` has its own
/// class `W`, all other `2n`-subsets share one class, and every other arity
/// is a single class.
pub fn build_witness_b(spec: &ClassSpec, n: usize) -> Result<RamseyWitness> {
    if n == 0 {
        return input("n must be positive");
    }
    if spec.is_ordered(2 * n) {
        return Err(Error::Refused(format!(
            "arity {} is ordered: the witness needs class(a1a2) = class(b1b2) != class(a3a4) while its two copies are isomorphic, which forces the {}-classes into a cycle",
            2 * n,
            2 * n
        )));
    }
    if spec.max_arity() < 2 * n {
        return input(format!("max_arity {} does not track arity {}", spec.max_arity(), 2 * n));
    }
    if !spec.is_ordered(n) && !(n == 1 && spec.allow_point_order()) {
        return input(format!("n = {n} needs arity {n} ordered (or n = 1 with a point order)"));
    }
    let size = 6 * n;
    let label = |k: usize, s: &[usize]| -> u32 {
        let blk = |p: usize| p / n;
        let same_block = |s: &[usize]| s.iter().all(|&p| blk(p) == blk(s[0]));
        if k == n {
            if same_block(s) {
                return blk(s[0]) as u32;
            }
            return 6;
        }
        if k == 2 * n {
            let (lo, hi) = (&s[..n], &s[n..]);
            if same_block(lo) && same_block(hi) {
                let pair = (blk(lo[0]), blk(hi[0]));
                match pair {
                    (0, 1) | (4, 5) => return 0,
                    (2, 3) => return 1,
                    (i, j) if n == 1 => return (2 + 6 * i + j) as u32,
                    _ => {}
                }
            }
            return 2;
        }
        0
    };
    let tracked = spec.tracked(size);
    let mut orders = BTreeMap::new();
    for k in spec.ordered_arities().iter().copied().filter(|&k| k <= tracked) {
        let mut present = std::collections::BTreeSet::new();
        for_each_combination(size, k, |s| {
            present.insert(label(k, s));
        });
        // block classes in block order, anything else after them
        orders.insert(k, present.into_iter().collect());
    }
    let point_order = spec.allow_point_order().then(|| (0..size).collect());
    let structure = FinStructure::from_fn(spec.clone(), size, label, orders, point_order)?;
    let copies = [(0..4 * n).collect::<Vec<_>>(), (2 * n..6 * n).collect()];
    let pattern = structure.induced(&copies[0])?;
    if structure.induced(&copies[1])? != pattern {
        return Err(Error::Internal("the designated copies of the witness are not isomorphic".into()));
    }
    Ok(RamseyWitness { structure, n, pattern, copies })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Green,
}

/// Colors of all copies of the pattern in an ambient structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CopyColoring {
    pub n: usize,
    /// Arity-`2n` class ids of the ambient structure, first to last.
    pub enumeration: Vec<u32>,
    /// Sorted image set of each copy and its color.
    pub colors: BTreeMap<Vec<usize>, Color>,
}

impl CopyColoring {
    pub fn color_of(&self, image: &[usize]) -> Option<Color> {
        let mut key = image.to_vec();
        key.sort_unstable();
        self.colors.get(&key).copied()
    }

    pub fn red_count(&self) -> usize {
        self.colors.values().filter(|&&c| c == Color::Red).count()
    }
}

fn class_of_blocks(c: &FinStructure, emb: &[usize], first: usize, n: usize) -> u32 {
    let mut s: Vec<usize> = emb[first * n..(first + 2) * n].to_vec();
    s.sort_unstable();
    c.class_of(&s)
}

/// Colors each copy of `pattern` (four `n`-blocks) in `c` red iff the class
/// of its first two blocks comes strictly before the class of its last two in
/// `enumeration`, and green otherwise (ties included).
pub fn enumeration_coloring(c: &FinStructure, pattern: &FinStructure, n: usize, enumeration: &[u32]) -> Result<CopyColoring> {
    if pattern.size() != 4 * n {
        return input(format!("pattern must have {} points", 4 * n));
    }
    if 2 * n > c.tracked_arities() {
        return input(format!("arity {} is not tracked in C", 2 * n));
    }
    let k = c.class_count(2 * n);
    let mut pos = vec![usize::MAX; k];
    for (i, &cls) in enumeration.iter().enumerate() {
        if cls as usize >= k || pos[cls as usize] != usize::MAX {
            return input(format!("enumeration entry {cls} is not a fresh arity-{} class of C", 2 * n));
        }
        pos[cls as usize] = i;
    }
    if let Some(missing) = pos.iter().position(|&p| p == usize::MAX) {
        return input(format!("enumeration misses arity-{} class {missing}", 2 * n));
    }
    let mut colors = BTreeMap::new();
    for emb in copies(pattern, c) {
        let first = pos[class_of_blocks(c, &emb, 0, n) as usize];
        let last = pos[class_of_blocks(c, &emb, 2, n) as usize];
        let mut img = emb.clone();
        img.sort_unstable();
        colors.insert(img, if first < last { Color::Red } else { Color::Green });
    }
    Ok(CopyColoring { n, enumeration: enumeration.to_vec(), colors })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoVerdict {
    pub embeddings_checked: usize,
    /// An embedding of `B` whose two designated copies got the same color.
    pub violation: Option<Vec<usize>>,
}

impl MonoVerdict {
    pub fn no_monochromatic_copy(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks every embedding of the witness into `c`.
pub fn check_no_mono(c: &FinStructure, witness: &RamseyWitness, coloring: &CopyColoring) -> Result<MonoVerdict> {
    let mut checked = 0;
    let mut missing = None;
    let violation = for_each_embedding(&witness.structure, c, &Constraints::default(), |emb| {
        checked += 1;
        let image = |copy: &[usize]| copy.iter().map(|&p| emb[p]).collect::<Vec<_>>();
        let (i1, i2) = (image(&witness.copies[0]), image(&witness.copies[1]));
        match (coloring.color_of(&i1), coloring.color_of(&i2)) {
            (Some(x), Some(y)) if x == y => ControlFlow::Break(emb.to_vec()),
            (Some(_), Some(_)) => ControlFlow::Continue(()),
            _ => {
                missing = Some(i1);
                ControlFlow::Break(Vec::new())
            }
        }
    });
    if let Some(img) = missing {
        return input(format!("coloring does not cover the copy {img:?}"));
    }
    Ok(MonoVerdict { embeddings_checked: checked, violation })
}

/// All `(a, b, c)` with `a < b < c` in the point order, `a` and `c` in one
/// `E_1`-class and `b` outside it; listed in point-order positions.
pub fn forbidden_triple_scan(c: &FinStructure) -> Result<Vec<[usize; 3]>> {
    let Some(order) = c.point_order() else {
        return input("structure has no point order");
    };
    let cls = |p: usize| c.class_of(&[p]);
    let mut out = Vec::new();
    for (i, &a) in order.iter().enumerate() {
        for (j, &b) in order.iter().enumerate().skip(i + 1) {
            if cls(a) == cls(b) {
                continue;
            }
            for &z in &order[j + 1..] {
                if cls(z) == cls(a) {
                    out.push([a, b, z]);
                }
            }
        }
    }
    Ok(out)
}

/// Whether every `E_1`-class occupies an interval of the point order.
pub fn e1_classes_convex(c: &FinStructure) -> Result<bool> {
    let Some(order) = c.point_order() else {
        return input("structure has no point order");
    };
    let mut closed = std::collections::HashSet::new();
    let mut prev: Option<u32> = None;
    for &p in order {
        let k = c.class_of(&[p]);
        if prev != Some(k) {
            if !closed.insert(k) {
                return Ok(false);
            }
            prev = Some(k);
        }
    }
    Ok(true)
}

/// Six pairwise disjoint sorted `n`-subsets.
pub type Z4Sequence = [Vec<usize>; 6];

/// Colors on the classes of the ambient structure (`colors[k - 1][class]`),
/// used to compare isomorphism types in an expansion.
pub type Signature<'a> = Option<&'a [Vec<u32>]>;

fn block_type(m: &FinStructure, blocks: &[&Vec<usize>], sig: Signature) -> CanonicalKey {
    let pts: Vec<usize> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
    let sub = m.induced_unchecked(&pts);
    let n = blocks[0].len();
    let cells: Vec<Vec<usize>> = (0..blocks.len()).map(|i| (i * n..(i + 1) * n).collect()).collect();
    let colors = sig.map(|col| induced_colors(m, &sub, &pts, col));
    canonical_form_labeled(&sub, &cells, colors.as_deref())
}

fn induced_colors(m: &FinStructure, sub: &FinStructure, pts: &[usize], col: &[Vec<u32>]) -> Vec<Vec<u32>> {
    (1..=sub.tracked_arities())
        .map(|k| {
            let mut out = vec![0; sub.class_count(k)];
            for_each_combination(sub.size(), k, |s| {
                let mut img: Vec<usize> = s.iter().map(|&i| pts[i]).collect();
                img.sort_unstable();
                out[sub.class_of(s) as usize] = col.get(k - 1).map_or(0, |c| c[m.class_of(&img) as usize]);
            });
            out
        })
        .collect()
}

fn union_class(m: &FinStructure, x: &[usize], y: &[usize]) -> u32 {
    let mut s: Vec<usize> = x.iter().chain(y).copied().collect();
    s.sort_unstable();
    m.class_of(&s)
}

fn check_arities(m: &FinStructure, n: usize) -> Result<()> {
    if n == 0 || !m.spec().is_ordered(n) {
        return input(format!("arity {n} is not ordered"));
    }
    if 2 * n > m.spec().max_arity() {
        return input(format!("arity {} is not tracked (max_arity {})", 2 * n, m.spec().max_arity()));
    }
    Ok(())
}

/// Finds `<_n`-increasing sequences of type `Z/4Z` (at most `limit`), in
/// lexicographic order of (class ranks, blocks). Isomorphism types of block
/// tuples are taken block by block; with a signature they also compare colors.
pub fn z4_find(m: &FinStructure, n: usize, sig: Signature, limit: usize) -> Result<Vec<Z4Sequence>> {
    check_arities(m, n)?;
    // With <_2n present, equal types of (b0..b3) and (b2..b5) give
    // class(b0b1) < class(b2b3) iff class(b2b3) < class(b4b5) = class(b0b1).
    if m.size() < 6 * n || limit == 0 || m.spec().is_ordered(2 * n) {
        return Ok(Vec::new());
    }
    let mut subsets: Vec<(u32, Vec<usize>)> =
        Combinations::new(m.size(), n).map(|s| (m.order_rank(n, m.class_of(&s)).unwrap(), s)).collect();
    subsets.sort();
    let mut found = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut pair_type: BTreeMap<(usize, usize), CanonicalKey> = BTreeMap::new();
    dfs(m, sig, &subsets, &mut stack, &mut pair_type, &mut found, limit);
    for seq in &found {
        if !verify_z4(m, seq, sig) {
            return Err(Error::Internal(format!("search returned a sequence that does not verify: {seq:?}")));
        }
    }
    Ok(found)
}

fn dfs(
    m: &FinStructure,
    sig: Signature,
    subsets: &[(u32, Vec<usize>)],
    stack: &mut Vec<usize>,
    pair_type: &mut BTreeMap<(usize, usize), CanonicalKey>,
    found: &mut Vec<Z4Sequence>,
    limit: usize,
) -> bool {
    let depth = stack.len();
    if depth == 6 {
        let b = |i: usize| &subsets[stack[i]].1;
        if block_type(m, &[b(0), b(1), b(2), b(3)], sig) == block_type(m, &[b(2), b(3), b(4), b(5)], sig) {
            found.push(std::array::from_fn(|i| b(i).clone()));
            return found.len() >= limit;
        }
        return false;
    }
    let start = stack.last().map_or(0, |&i| subsets[i..].iter().position(|s| s.0 > subsets[i].0).map_or(subsets.len(), |p| i + p));
    for idx in start..subsets.len() {
        let cand = &subsets[idx].1;
        if stack.iter().any(|&j| subsets[j].1.iter().any(|p| cand.contains(p))) {
            continue;
        }
        let b = |i: usize| &subsets[stack[i]].1;
        let mut ptype = |x: usize, y: usize, stack: &[usize]| {
            let (i, j) = (stack[x], if y < stack.len() { stack[y] } else { idx });
            pair_type.entry((i, j)).or_insert_with(|| block_type(m, &[&subsets[i].1, &subsets[j].1], sig)).clone()
        };
        let ok = match depth {
            2 => ptype(0, 1, stack) == ptype(1, 2, stack),
            3 => ptype(2, 3, stack) == ptype(0, 1, stack) && union_class(m, b(2), cand) != union_class(m, b(0), b(1)),
            4 => ptype(3, 4, stack) == ptype(1, 2, stack),
            5 => ptype(4, 5, stack) == ptype(2, 3, stack) && union_class(m, b(4), cand) == union_class(m, b(0), b(1)),
            _ => true,
        };
        if !ok {
            continue;
        }
        stack.push(idx);
        let stop = dfs(m, sig, subsets, stack, pair_type, found, limit);
        stack.pop();
        if stop {
            return true;
        }
    }
    false
}

/// Independent re-check of one sequence via block-respecting embeddings of
/// induced substructures.
pub fn verify_z4(m: &FinStructure, seq: &Z4Sequence, sig: Signature) -> bool {
    let n = seq[0].len();
    if seq.iter().any(|b| b.len() != n || b.windows(2).any(|w| w[0] >= w[1]) || b.iter().any(|&p| p >= m.size())) {
        return false;
    }
    let mut all: Vec<usize> = seq.iter().flatten().copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    let ranks: Vec<u32> = seq.iter().map(|b| m.order_rank(n, m.class_of(b)).unwrap()).collect();
    if ranks.windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    let same_type = |xs: &[usize], ys: &[usize]| {
        let pts_x: Vec<usize> = xs.iter().flat_map(|&i| seq[i].iter().copied()).collect();
        let pts_y: Vec<usize> = ys.iter().flat_map(|&i| seq[i].iter().copied()).collect();
        let (sx, sy) = (m.induced_unchecked(&pts_x), m.induced_unchecked(&pts_y));
        let allowed: Vec<Vec<usize>> = (0..pts_x.len()).map(|p| (p / n * n..(p / n + 1) * n).collect()).collect();
        let cons = Constraints { allowed: Some(allowed) };
        let colors_ok = |emb: &[usize]| match sig {
            None => true,
            Some(col) => {
                let mut ok = true;
                for k in 1..=sx.tracked_arities() {
                    for_each_combination(sx.size(), k, |s| {
                        let mut a: Vec<usize> = s.iter().map(|&i| pts_x[i]).collect();
                        let mut b: Vec<usize> = s.iter().map(|&i| pts_y[emb[i]]).collect();
                        a.sort_unstable();
                        b.sort_unstable();
                        let c = &col[k - 1];
                        ok &= c[m.class_of(&a) as usize] == c[m.class_of(&b) as usize];
                    });
                }
                ok
            }
        };
        for_each_embedding(&sx, &sy, &cons, |emb| if colors_ok(emb) { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }).is_some()
    };
    let cls = |i: usize, j: usize| union_class(m, &seq[i], &seq[j]);
    same_type(&[0, 1], &[1, 2])
        && same_type(&[0, 1], &[2, 3])
        && same_type(&[0, 1, 2, 3], &[2, 3, 4, 5])
        && cls(0, 1) == cls(4, 5)
        && cls(0, 1) != cls(2, 3)
}
