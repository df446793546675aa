//! Isomorphism, embeddings and automorphisms by backtracking.
//!
//! Partial point maps are extended one source point at a time. A new point is
//! checked against the point order and then, arity by arity starting at 1,
//! against every subset it completes: class equality must be preserved and
//! reflected (a partial bijection between source and target classes is kept
//! on a trail) and class orders must be preserved.

use std::ops::ControlFlow;

use crate::model::FinStructure;
use crate::subset::for_each_sub_selection;

const NONE: u32 = u32::MAX;

/// An injective point map from `source` into `target` that preserves and
/// reflects class equality, class orders and the point order.
pub type Embedding = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub Vec<u8>);

/// Optional restrictions on an embedding search.
#[derive(Clone, Debug, Default)]
pub struct Constraints {
    /// `allowed[i]`, when present, lists the permitted images of source point `i`.
    pub allowed: Option<Vec<Vec<usize>>>,
}

impl Constraints {
    /// Fixes the images of some source points.
    pub fn fixing(source_size: usize, target_size: usize, fixed: &[(usize, usize)]) -> Self {
        let mut allowed: Vec<Vec<usize>> = vec![(0..target_size).collect(); source_size];
        for &(s, t) in fixed {
            allowed[s] = vec![t];
        }
        Constraints { allowed: Some(allowed) }
    }
}

struct Search<'a> {
    src: &'a FinStructure,
    dst: &'a FinStructure,
    map: Vec<usize>,
    used: Vec<bool>,
    fwd: Vec<Vec<u32>>,
    rev: Vec<Vec<u32>>,
    assigned: Vec<Vec<u32>>,
    trail: Vec<(usize, u32, u32)>,
    scratch: Vec<usize>,
    use_point_order: bool,
}

impl<'a> Search<'a> {
    fn new(src: &'a FinStructure, dst: &'a FinStructure) -> Self {
        let arities = src.tracked_arities();
        Search {
            src,
            dst,
            map: Vec::with_capacity(src.size()),
            used: vec![false; dst.size()],
            fwd: (1..=arities).map(|n| vec![NONE; src.class_count(n)]).collect(),
            rev: (1..=arities).map(|n| vec![NONE; dst.class_count(n)]).collect(),
            assigned: vec![Vec::new(); arities],
            trail: Vec::new(),
            scratch: Vec::new(),
            use_point_order: src.point_order().is_some() && dst.point_order().is_some(),
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (i, cs, cd) = self.trail.pop().unwrap();
            self.fwd[i][cs as usize] = NONE;
            self.rev[i][cd as usize] = NONE;
            self.assigned[i].pop();
        }
    }

    /// Tries to map the next source point to `t`; on failure leaves state untouched.
    fn try_push(&mut self, t: usize) -> bool {
        let i = self.map.len();
        if self.use_point_order {
            let ri = self.src.point_rank(i).unwrap();
            let rt = self.dst.point_rank(t).unwrap();
            for (k, &mk) in self.map.iter().enumerate() {
                if (self.src.point_rank(k).unwrap() < ri) != (self.dst.point_rank(mk).unwrap() < rt) {
                    return false;
                }
            }
        }
        let mark = self.trail.len();
        let prev: Vec<usize> = (0..i).collect();
        let mut ok = true;
        for n in 1..=self.src.tracked_arities().min(i + 1) {
            let ordered = self.src.spec().is_ordered(n);
            let src = self.src;
            let dst = self.dst;
            let map = &self.map;
            let fwd = &mut self.fwd[n - 1];
            let rev = &mut self.rev[n - 1];
            let assigned = &mut self.assigned[n - 1];
            let trail = &mut self.trail;
            let scratch = &mut self.scratch;
            let mut src_sub = Vec::with_capacity(n);
            for_each_sub_selection(&prev, n - 1, |rest| {
                if !ok {
                    return;
                }
                src_sub.clear();
                src_sub.extend_from_slice(rest);
                src_sub.push(i);
                scratch.clear();
                scratch.extend(rest.iter().map(|&k| map[k]));
                scratch.push(t);
                scratch.sort_unstable();
                let cs = src.class_of(&src_sub);
                let cd = dst.class_of(scratch);
                let (f, r) = (fwd[cs as usize], rev[cd as usize]);
                if f == NONE && r == NONE {
                    if ordered {
                        let rs = src.order_rank(n, cs).unwrap();
                        let rd = dst.order_rank(n, cd).unwrap();
                        for &other in assigned.iter() {
                            let os = src.order_rank(n, other).unwrap();
                            let od = dst.order_rank(n, fwd[other as usize]).unwrap();
                            if (rs < os) != (rd < od) {
                                ok = false;
                                return;
                            }
                        }
                    }
                    fwd[cs as usize] = cd;
                    rev[cd as usize] = cs;
                    assigned.push(cs);
                    trail.push((n - 1, cs, cd));
                } else if f != cd || r != cs {
                    ok = false;
                }
            });
            if !ok {
                break;
            }
        }
        if !ok {
            self.undo_to(mark);
            return false;
        }
        self.map.push(t);
        self.used[t] = true;
        true
    }

    fn run<B>(&mut self, cons: &Constraints, visit: &mut impl FnMut(&[usize]) -> ControlFlow<B>) -> ControlFlow<B> {
        let i = self.map.len();
        if i == self.src.size() {
            return visit(&self.map);
        }
        let candidates: Vec<usize> = match &cons.allowed {
            Some(a) => a[i].clone(),
            None => (0..self.dst.size()).collect(),
        };
        for t in candidates {
            if t >= self.used.len() || self.used[t] {
                continue;
            }
            let mark = self.trail.len();
            if !self.try_push(t) {
                continue;
            }
            let r = self.run(cons, visit);
            self.map.pop();
            self.used[t] = false;
            self.undo_to(mark);
            r?;
        }
        ControlFlow::Continue(())
    }
}

/// Visits every embedding of `src` into `dst` in lexicographic order of maps.
pub fn for_each_embedding<B>(
    src: &FinStructure,
    dst: &FinStructure,
    cons: &Constraints,
    mut visit: impl FnMut(&[usize]) -> ControlFlow<B>,
) -> Option<B> {
    if src.size() > dst.size() || src.spec().tracked(src.size()) > dst.tracked_arities() {
        return None;
    }
    if src.point_order().is_some() != dst.point_order().is_some() && src.point_order().is_some() {
        return None;
    }
    let mut search = Search::new(src, dst);
    match search.run(cons, &mut visit) {
        ControlFlow::Break(b) => Some(b),
        ControlFlow::Continue(()) => None,
    }
}

/// All embeddings of `a` into `c`, sorted lexicographically.
pub fn embeddings(a: &FinStructure, c: &FinStructure) -> Vec<Embedding> {
    embeddings_with(a, c, &Constraints::default())
}

pub fn embeddings_with(a: &FinStructure, c: &FinStructure, cons: &Constraints) -> Vec<Embedding> {
    let mut out = Vec::new();
    for_each_embedding::<()>(a, c, cons, |m| {
        out.push(m.to_vec());
        ControlFlow::Continue(())
    });
    out
}

pub fn first_embedding(a: &FinStructure, c: &FinStructure, cons: &Constraints) -> Option<Embedding> {
    for_each_embedding(a, c, cons, |m| ControlFlow::Break(m.to_vec()))
}

/// Copies of `a` in `c`: embeddings deduplicated by image set. Each copy is the
/// lexicographically first embedding with that image.
pub fn copies(a: &FinStructure, c: &FinStructure) -> Vec<Embedding> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for_each_embedding::<()>(a, c, &Constraints::default(), |m| {
        let mut img = m.to_vec();
        img.sort_unstable();
        if seen.insert(img) {
            out.push(m.to_vec());
        }
        ControlFlow::Continue(())
    });
    out
}

/// The full automorphism group as an explicit sorted list of permutations.
pub fn automorphisms(s: &FinStructure) -> Vec<Vec<usize>> {
    embeddings(s, s)
}

/// Whether `map` is an embedding of `a` into `c`.
pub fn is_embedding(a: &FinStructure, c: &FinStructure, map: &[usize]) -> bool {
    if map.len() != a.size() || map.iter().any(|&t| t >= c.size()) {
        return false;
    }
    let allowed = map.iter().map(|&t| vec![t]).collect();
    first_embedding(a, c, &Constraints { allowed: Some(allowed) }).is_some()
}

pub fn is_automorphism(s: &FinStructure, perm: &[usize]) -> bool {
    is_embedding(s, s, perm)
}

pub fn isomorphic(a: &FinStructure, b: &FinStructure) -> bool {
    a.size() == b.size() && first_embedding(a, b, &Constraints::default()).is_some()
}

/// Canonical form: the lexicographically least code over all point orderings.
pub fn canonical_form(s: &FinStructure) -> CanonicalKey {
    canonical_form_with_cells(s, &[(0..s.size()).collect()])
}

/// Canonical form over orderings that list the points of `cells[0]` first
/// (in any order), then those of `cells[1]`, and so on. Two structures with
/// corresponding cell sequences get equal keys iff some isomorphism maps each
/// cell onto the corresponding cell.
pub fn canonical_form_with_cells(s: &FinStructure, cells: &[Vec<usize>]) -> CanonicalKey {
    canonical_form_labeled(s, cells, None)
}

/// Like [`canonical_form_with_cells`], with subset labels replaced by
/// absolute colors (`colors[n - 1][class]`) when given.
pub fn canonical_form_labeled(s: &FinStructure, cells: &[Vec<usize>], colors: Option<&[Vec<u32>]>) -> CanonicalKey {
    let mut c = Canon { s, colors, order: Vec::with_capacity(s.size()), used: vec![false; s.size()], best: None, code: Vec::new() };
    let arities = s.tracked_arities();
    let relabel = (1..=arities).map(|n| vec![NONE; s.class_count(n)]).collect::<Vec<_>>();
    let next = vec![0u32; arities];
    let cell_of_pos: Vec<usize> = cells.iter().enumerate().flat_map(|(i, c)| std::iter::repeat_n(i, c.len())).collect();
    c.dfs(cells, &cell_of_pos, relabel, next);
    let mut key = Vec::new();
    key.extend_from_slice(&(s.size() as u32).to_le_bytes());
    key.extend_from_slice(&(arities as u32).to_le_bytes());
    for v in c.best.unwrap_or_default() {
        key.extend_from_slice(&v.to_le_bytes());
    }
    CanonicalKey(key)
}

struct Canon<'a> {
    s: &'a FinStructure,
    colors: Option<&'a [Vec<u32>]>,
    order: Vec<usize>,
    used: Vec<bool>,
    best: Option<Vec<u32>>,
    code: Vec<u32>,
}

impl Canon<'_> {
    /// Code segment contributed by placing `v` at the next position.
    fn segment(&self, v: usize, relabel: &mut [Vec<u32>], next: &mut [u32]) -> Vec<u32> {
        let j = self.order.len();
        let s = self.s;
        let mut seg = Vec::new();
        if let Some(r) = s.point_rank(v) {
            seg.push(r as u32);
        }
        let positions: Vec<usize> = (0..j).collect();
        let mut pts = Vec::new();
        for n in 1..=s.tracked_arities().min(j + 1) {
            let ordered = s.spec().is_ordered(n);
            for_each_sub_selection(&positions, n - 1, |rest| {
                pts.clear();
                pts.extend(rest.iter().map(|&p| self.order[p]));
                pts.push(v);
                pts.sort_unstable();
                let c = s.class_of(&pts);
                let label = if let Some(col) = self.colors {
                    col[n - 1][c as usize]
                } else if ordered {
                    s.order_rank(n, c).unwrap()
                } else {
                    let slot = &mut relabel[n - 1][c as usize];
                    if *slot == NONE {
                        *slot = next[n - 1];
                        next[n - 1] += 1;
                    }
                    *slot
                };
                seg.push(label);
            });
        }
        seg
    }

    fn dfs(&mut self, cells: &[Vec<usize>], cell_of_pos: &[usize], relabel: Vec<Vec<u32>>, next: Vec<u32>) {
        let j = self.order.len();
        if j == self.s.size() {
            if self.best.as_ref().is_none_or(|b| self.code < *b) {
                self.best = Some(self.code.clone());
            }
            return;
        }
        let cell = &cells[cell_of_pos[j]];
        let mut children: Vec<(Vec<u32>, usize, Vec<Vec<u32>>, Vec<u32>)> = Vec::new();
        for &v in cell {
            if self.used[v] {
                continue;
            }
            let mut rl = relabel.clone();
            let mut nx = next.clone();
            let seg = self.segment(v, &mut rl, &mut nx);
            match children.first() {
                Some((best, ..)) if seg > *best => continue,
                Some((best, ..)) if seg < *best => children.clear(),
                _ => {}
            }
            children.push((seg, v, rl, nx));
        }
        let Some((seg, ..)) = children.first() else { return };
        // prune against the best complete code found so far
        let start = self.code.len();
        if let Some(best) = &self.best {
            let mut cand = self.code.clone();
            cand.extend_from_slice(seg);
            if cand.as_slice() > &best[..cand.len()] {
                return;
            }
        }
        for (seg, v, rl, nx) in children {
            self.code.extend_from_slice(&seg);
            self.order.push(v);
            self.used[v] = true;
            self.dfs(cells, cell_of_pos, rl, nx);
            self.used[v] = false;
            self.order.pop();
            self.code.truncate(start);
        }
    }
}
