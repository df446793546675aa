//! Colored expansions, bounded searches for extensions of partial
//! isomorphisms (and permorphisms), and certificates for the failure of the
//! extension property in the presence of class orders.
//!
//! The search decides an instance `(A, p_1..p_r)` completely up to a bound on
//! `|B|`: it tries `|B| = |A|, |A| + 1, ...` and, for each size, backtracks over
//! permutations `σ_j` of `B` extending `p_j`. The subsets of `B` are linked by
//! a union-find (`S ~ σ_j(S)`); a choice is consistent iff no component meets
//! two differently colored subsets of `A`. Components avoiding `A` receive one
//! extra color per arity, so the coloring of `B` never needs to be searched.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::amalgam::joint_embed;
use crate::error::{input, Error, Result};
use crate::generic::saturate;
use crate::iso::{first_embedding, for_each_embedding, Constraints};
use crate::model::{ClassSpec, FinStructure};
use crate::subset::{self, for_each_combination, for_each_sub_selection};

/// A `K0` member with a color on every class. Each subset carries exactly one
/// color, namely that of its class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColoredStructure {
    base: FinStructure,
    /// `colors[n - 1][class]`.
    colors: Vec<Vec<u32>>,
    /// Number of available colors per arity.
    palette: Vec<u32>,
}

impl ColoredStructure {
    pub fn new(base: FinStructure, colors: Vec<Vec<u32>>, palette: Vec<u32>) -> Result<Self> {
        if !base.spec().ordered_arities().is_empty() || base.point_order().is_some() {
            return input("colored structures expand orderless members");
        }
        let t = base.tracked_arities();
        if colors.len() != t || palette.len() != t {
            return input(format!("expected colors and palette for arities 1..={t}"));
        }
        for n in 1..=t {
            let cs = &colors[n - 1];
            if cs.len() != base.class_count(n) {
                return input(format!("arity {n}: expected {} class colors, got {}", base.class_count(n), cs.len()));
            }
            let mut seen = vec![false; palette[n - 1] as usize];
            for &c in cs {
                if c >= palette[n - 1] {
                    return input(format!("arity {n}: color {c} outside the palette of size {}", palette[n - 1]));
                }
                if std::mem::replace(&mut seen[c as usize], true) {
                    return input(format!("arity {n}: color {c} is used by two classes"));
                }
            }
        }
        Ok(ColoredStructure { base, colors, palette })
    }

    pub fn base(&self) -> &FinStructure {
        &self.base
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }

    pub fn colors(&self) -> &[Vec<u32>] {
        &self.colors
    }

    pub fn palette(&self) -> &[u32] {
        &self.palette
    }

    /// Color of a sorted subset.
    pub fn color_of(&self, subset: &[usize]) -> u32 {
        self.colors[subset.len() - 1][self.base.class_of(subset) as usize]
    }

    pub fn into_base(self) -> FinStructure {
        self.base
    }

    fn color_of_rank(&self, n: usize, r: usize) -> u32 {
        self.colors[n - 1][self.base.class_of_rank(n, r) as usize]
    }
}

/// Colors class `i` of arity `n` with `P_{n,i}`.
pub fn color_expand(m: &FinStructure) -> Result<ColoredStructure> {
    if !m.spec().ordered_arities().is_empty() || m.point_order().is_some() {
        return input("color expansion needs an orderless structure");
    }
    let t = m.tracked_arities();
    let colors = (1..=t).map(|n| (0..m.class_count(n) as u32).collect()).collect();
    let palette = (1..=t).map(|n| m.class_count(n) as u32).collect();
    ColoredStructure::new(m.clone(), colors, palette)
}

/// A finite injective partial point map, optionally paired with a palette
/// permutation per arity (`chi[n][c]` is the image of color `c`; arities
/// without an entry are fixed).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialMap {
    pub pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<BTreeMap<usize, Vec<u32>>>,
}

impl PartialMap {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        PartialMap { pairs, chi: None }
    }

    pub fn with_chi(pairs: Vec<(usize, usize)>, chi: BTreeMap<usize, Vec<u32>>) -> Self {
        PartialMap { pairs, chi: Some(chi) }
    }

    fn chi_is_identity(&self) -> bool {
        self.chi.as_ref().is_none_or(|c| c.values().all(|p| p.iter().enumerate().all(|(i, &x)| i as u32 == x)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EppaCertificate {
    /// `B` contains `A` on its first points; `extensions[j]` extends map `j`.
    Found {
        structure: ColoredStructure,
        extensions: Vec<Vec<usize>>,
    },
    /// No extension with at most `bound` points.
    Exhausted {
        bound: usize,
    },
    Refuted {
        reason: String,
    },
}

impl EppaCertificate {
    pub fn is_found(&self) -> bool {
        matches!(self, EppaCertificate::Found { .. })
    }
}

/// Per-arity palette permutations, extended by the extra color (fixed).
type Chi = Vec<Vec<u32>>;

fn checked_chi(a: &ColoredStructure, map: &PartialMap, n_arities: usize) -> Result<Chi> {
    let mut out: Chi = (1..=n_arities).map(|n| (0..=a.palette.get(n - 1).copied().unwrap_or(0)).collect()).collect();
    if let Some(chi) = &map.chi {
        for (&n, perm) in chi {
            if n == 0 || n > a.base.tracked_arities() {
                return input(format!("chi acts on arity {n}, which has no palette"));
            }
            let k = a.palette[n - 1];
            if perm.len() != k as usize {
                return input(format!("chi on arity {n} must permute {k} colors"));
            }
            let mut seen = vec![false; k as usize];
            for &c in perm {
                if c >= k || std::mem::replace(&mut seen[c as usize], true) {
                    return input(format!("chi on arity {n} is not a permutation of the palette"));
                }
            }
            out[n - 1][..k as usize].copy_from_slice(perm);
        }
    }
    Ok(out)
}

/// Input checks shared by both searches; returns `Some(reason)` when the maps
/// are well formed but not color-compatible.
fn check_maps(a: &ColoredStructure, maps: &[PartialMap], chis: &[Chi]) -> Result<Option<String>> {
    let m = a.size();
    for (j, map) in maps.iter().enumerate() {
        let mut dom = vec![false; m];
        let mut img = vec![false; m];
        for &(x, y) in &map.pairs {
            if x >= m || y >= m {
                return input(format!("map {j}: point {} outside A", x.max(y)));
            }
            if std::mem::replace(&mut dom[x], true) || std::mem::replace(&mut img[y], true) {
                return input(format!("map {j} is not an injective function"));
            }
        }
        let xs: Vec<usize> = map.pairs.iter().map(|p| p.0).collect();
        let ys: Vec<usize> = map.pairs.iter().map(|p| p.1).collect();
        if a.base.induced_unchecked(&xs) != a.base.induced_unchecked(&ys) && map.chi.is_none() {
            return input(format!("map {j} is not a partial isomorphism of A"));
        }
        let idx: Vec<usize> = (0..xs.len()).collect();
        let mut reason = None;
        for n in 1..=a.base.tracked_arities().min(xs.len()) {
            for_each_sub_selection(&idx, n, |sel| {
                if reason.is_some() {
                    return;
                }
                let mut s: Vec<usize> = sel.iter().map(|&i| xs[i]).collect();
                let mut t: Vec<usize> = sel.iter().map(|&i| ys[i]).collect();
                s.sort_unstable();
                t.sort_unstable();
                let (cs, ct) = (a.color_of(&s), a.color_of(&t));
                if chis[j][n - 1][cs as usize] != ct {
                    reason = Some(format!(
                        "map {j} sends {s:?} (color {cs}) to {t:?} (color {ct}); required color {}",
                        chis[j][n - 1][cs as usize]
                    ));
                }
            });
        }
        if reason.is_some() {
            return Ok(reason);
        }
    }
    Ok(None)
}

/// Union-find over subsets where every component carries at most one color.
struct ColorUf {
    parent: Vec<usize>,
    size: Vec<u32>,
    color: Vec<Option<u32>>,
    trail: Vec<(usize, usize, Option<u32>)>,
}

impl ColorUf {
    fn new(fixed: Vec<Option<u32>>) -> Self {
        let len = fixed.len();
        ColorUf { parent: (0..len).collect(), size: vec![1; len], color: fixed, trail: Vec::new() }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let merged = match (self.color[ra], self.color[rb]) {
            (Some(x), Some(y)) if x != y => return false,
            (x, y) => x.or(y),
        };
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.trail.push((rb, ra, self.color[ra]));
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.color[ra] = merged;
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (child, root, old) = self.trail.pop().unwrap();
            self.parent[child] = child;
            self.size[root] -= self.size[child];
            self.color[root] = old;
        }
    }

    fn color_of(&self, x: usize) -> Option<u32> {
        self.color[self.find(x)]
    }
}

/// Union-find over subsets where each node stores a palette permutation
/// relative to its parent (`color(node) = rel(node)(color(parent))`) and each
/// root stores the set of colors it may still take.
struct PermUf {
    parent: Vec<usize>,
    size: Vec<u32>,
    rel: Vec<Vec<u32>>,
    mask: Vec<u64>,
    trail: Vec<PermChange>,
}

enum PermChange {
    Link { child: usize, root: usize, old_mask: u64 },
    Mask { root: usize, old_mask: u64 },
}

fn compose(outer: &[u32], inner: &[u32]) -> Vec<u32> {
    inner.iter().map(|&x| outer[x as usize]).collect()
}

fn invert(p: &[u32]) -> Vec<u32> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x as usize] = i as u32;
    }
    inv
}

impl PermUf {
    /// `widths[x]` is the palette size (with the extra color) of node `x`.
    fn new(fixed: &[Option<u32>], widths: &[usize]) -> Self {
        let len = fixed.len();
        PermUf {
            parent: (0..len).collect(),
            size: vec![1; len],
            rel: widths.iter().map(|&w| (0..w as u32).collect()).collect(),
            mask: fixed
                .iter()
                .zip(widths)
                .map(|(f, &w)| match f {
                    Some(c) => 1u64 << c,
                    None => (1u64 << w) - 1,
                })
                .collect(),
            trail: Vec::new(),
        }
    }

    /// Root and the permutation `π` with `color(x) = π(color(root))`.
    fn find(&self, mut x: usize) -> (usize, Vec<u32>) {
        let mut pi = self.rel[x].clone();
        while self.parent[x] != x {
            x = self.parent[x];
            pi = compose(&pi, &self.rel[x]);
        }
        (x, pi)
    }

    fn restrict(&mut self, root: usize, mask: u64) -> bool {
        let new = self.mask[root] & mask;
        if new == 0 {
            return false;
        }
        if new != self.mask[root] {
            self.trail.push(PermChange::Mask { root, old_mask: self.mask[root] });
            self.mask[root] = new;
        }
        true
    }

    /// Records `color(b) = chi(color(a))`.
    fn union(&mut self, a: usize, b: usize, chi: &[u32]) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        // color(rb) = rho(color(ra)) with rho = pb^-1 . chi . pa
        let rho = compose(&invert(&pb), &compose(chi, &pa));
        if ra == rb {
            let mut ok_mask = 0u64;
            for x in 0..rho.len() {
                if rho[x] as usize == x {
                    ok_mask |= 1 << x;
                }
            }
            return self.restrict(ra, ok_mask);
        }
        let pulled = (0..rho.len()).filter(|&x| self.mask[rb] >> rho[x] & 1 == 1).fold(0u64, |m, x| m | 1 << x);
        if self.mask[ra] & pulled == 0 {
            return false;
        }
        let (root, child, rel) = if self.size[ra] >= self.size[rb] { (ra, rb, rho) } else { (rb, ra, invert(&rho)) };
        let child_mask = self.mask[child];
        let pulled_to_root = (0..rel.len()).filter(|&x| child_mask >> rel[x] & 1 == 1).fold(0u64, |m, x| m | 1 << x);
        self.trail.push(PermChange::Link { child, root, old_mask: self.mask[root] });
        self.parent[child] = root;
        self.size[root] += self.size[child];
        self.rel[child] = rel;
        self.mask[root] &= pulled_to_root;
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                PermChange::Link { child, root, old_mask } => {
                    self.parent[child] = child;
                    self.size[root] -= self.size[child];
                    let w = self.rel[child].len() as u32;
                    self.rel[child] = (0..w).collect();
                    self.mask[root] = old_mask;
                }
                PermChange::Mask { root, old_mask } => self.mask[root] = old_mask,
            }
        }
    }

    /// Final color of `x`: components free of constraints take the extra color.
    fn color_of(&self, x: usize, extra: u32) -> u32 {
        let (r, pi) = self.find(x);
        let full = (1u64 << pi.len()) - 1;
        let c = if self.mask[r] == full { extra } else { self.mask[r].trailing_zeros() };
        pi[c as usize]
    }
}

trait Links {
    fn mark(&self) -> usize;
    fn undo_to(&mut self, mark: usize);
    fn link(&mut self, a: usize, b: usize, chi: &[u32]) -> bool;
    fn final_color(&self, x: usize, extra: u32) -> u32;
}

impl Links for ColorUf {
    fn mark(&self) -> usize {
        self.trail.len()
    }
    fn undo_to(&mut self, mark: usize) {
        ColorUf::undo_to(self, mark)
    }
    fn link(&mut self, a: usize, b: usize, _chi: &[u32]) -> bool {
        self.union(a, b)
    }
    fn final_color(&self, x: usize, extra: u32) -> u32 {
        self.color_of(x).unwrap_or(extra)
    }
}

impl Links for PermUf {
    fn mark(&self) -> usize {
        self.trail.len()
    }
    fn undo_to(&mut self, mark: usize) {
        PermUf::undo_to(self, mark)
    }
    fn link(&mut self, a: usize, b: usize, chi: &[u32]) -> bool {
        self.union(a, b, chi)
    }
    fn final_color(&self, x: usize, extra: u32) -> u32 {
        self.color_of(x, extra)
    }
}

/// Subset indexing for a universe of `size` points.
struct Layout {
    size: usize,
    arities: usize,
    offset: Vec<usize>,
}

impl Layout {
    fn new(size: usize, arities: usize) -> Self {
        let mut offset = vec![0];
        for n in 1..=arities {
            offset.push(offset[n - 1] + subset::count(size, n));
        }
        Layout { size, arities, offset }
    }

    fn total(&self) -> usize {
        self.offset[self.arities]
    }

    fn index(&self, sorted: &[usize]) -> usize {
        self.offset[sorted.len() - 1] + subset::rank(sorted)
    }
}

struct SearchState<'a, L: Links> {
    a: &'a ColoredStructure,
    chis: &'a [Chi],
    layout: Layout,
    uf: L,
    sigma: Vec<Vec<Option<usize>>>,
    image_used: Vec<Vec<bool>>,
    assigned: Vec<Vec<usize>>,
    touched: Vec<u32>,
}

impl<L: Links> SearchState<'_, L> {
    fn assign(&mut self, j: usize, x: usize, y: usize) -> bool {
        let mark = self.uf.mark();
        let mut ok = true;
        let mut s = Vec::new();
        let mut t = Vec::new();
        for n in 1..=self.layout.arities.min(self.assigned[j].len() + 1) {
            let sigma = &self.sigma[j];
            let layout = &self.layout;
            let uf = &mut self.uf;
            let chi = &self.chis[j][n - 1];
            for_each_sub_selection(&self.assigned[j], n - 1, |rest| {
                if !ok {
                    return;
                }
                s.clear();
                s.extend_from_slice(rest);
                s.push(x);
                t.clear();
                t.extend(rest.iter().map(|&p| sigma[p].unwrap()));
                t.push(y);
                s.sort_unstable();
                t.sort_unstable();
                ok = uf.link(layout.index(&s), layout.index(&t), chi);
            });
            if !ok {
                break;
            }
        }
        if !ok {
            self.uf.undo_to(mark);
            return false;
        }
        self.sigma[j][x] = Some(y);
        self.image_used[j][y] = true;
        self.assigned[j].push(x);
        self.touched[x] += 1;
        self.touched[y] += 1;
        true
    }

    fn unassign(&mut self, j: usize, x: usize, mark: usize) {
        let y = self.sigma[j][x].take().unwrap();
        self.image_used[j][y] = false;
        self.assigned[j].pop();
        self.touched[x] -= 1;
        self.touched[y] -= 1;
        self.uf.undo_to(mark);
    }

    fn run(&mut self, j: usize, x: usize) -> bool {
        if j == self.sigma.len() {
            return true;
        }
        if x == self.layout.size {
            return self.run(j + 1, 0);
        }
        if self.sigma[j][x].is_some() {
            return self.run(j, x + 1);
        }
        let base = self.a.size();
        let mut first_fresh_seen = false;
        for y in 0..self.layout.size {
            if self.image_used[j][y] {
                continue;
            }
            if y >= base && y != x && self.touched[y] == 0 {
                // untouched new points are interchangeable
                if first_fresh_seen {
                    continue;
                }
                first_fresh_seen = true;
            }
            let mark = self.uf.mark();
            if self.assign(j, x, y) {
                if self.run(j, x + 1) {
                    return true;
                }
                self.unassign(j, x, mark);
            }
        }
        false
    }
}

fn search_size<L: Links>(
    a: &ColoredStructure,
    maps: &[PartialMap],
    chis: &[Chi],
    size: usize,
    make: impl Fn(&[Option<u32>], &[usize]) -> L,
) -> Option<(ColoredStructure, Vec<Vec<usize>>)> {
    let spec = a.base.spec();
    let arities = spec.tracked(size);
    let layout = Layout::new(size, arities);
    let mut fixed = vec![None; layout.total()];
    let mut widths = vec![0; layout.total()];
    for n in 1..=arities {
        let in_a = if n <= a.base.tracked_arities() { subset::count(a.size(), n) } else { 0 };
        for r in 0..subset::count(size, n) {
            let i = layout.offset[n - 1] + r;
            widths[i] = chis.first().map_or(a.palette.get(n - 1).copied().unwrap_or(0) as usize + 1, |c| c[n - 1].len());
            if r < in_a {
                fixed[i] = Some(a.color_of_rank(n, r));
            }
        }
    }
    let uf = make(&fixed, &widths);
    let mut st = SearchState {
        a,
        chis,
        layout,
        uf,
        sigma: vec![vec![None; size]; maps.len()],
        image_used: vec![vec![false; size]; maps.len()],
        assigned: vec![Vec::new(); maps.len()],
        touched: vec![0; size],
    };
    for (j, map) in maps.iter().enumerate() {
        for &(x, y) in &map.pairs {
            if !st.assign(j, x, y) {
                return None;
            }
        }
    }
    if !st.run(0, 0) {
        return None;
    }
    let extra = |n: usize| a.palette.get(n - 1).copied().unwrap_or(0);
    let color = |n: usize, s: &[usize]| st.uf.final_color(st.layout.index(s), extra(n));
    let base = FinStructure::from_fn(spec.clone(), size, |n, s| color(n, s), BTreeMap::new(), None).ok()?;
    let mut colors: Vec<Vec<u32>> = (1..=arities).map(|n| vec![0; base.class_count(n)]).collect();
    for n in 1..=arities {
        for_each_combination(size, n, |s| colors[n - 1][base.class_of(s) as usize] = color(n, s));
    }
    let palette = (1..=arities).map(|n| extra(n) + 1).collect();
    let b = ColoredStructure::new(base, colors, palette).ok()?;
    let ext = st.sigma.iter().map(|s| s.iter().map(|y| y.unwrap()).collect()).collect();
    Some((b, ext))
}

fn bounded_search<L: Links>(
    a: &ColoredStructure,
    maps: &[PartialMap],
    chis: &[Chi],
    bound: usize,
    make: impl Fn(&[Option<u32>], &[usize]) -> L + Copy,
) -> Result<EppaCertificate> {
    if bound < a.size() {
        return input(format!("bound {bound} is below |A| = {}", a.size()));
    }
    for size in a.size()..=bound {
        if let Some((structure, extensions)) = search_size(a, maps, chis, size, make) {
            let cert = EppaCertificate::Found { structure, extensions };
            if !verify_certificate(a, maps, &cert)? {
                return Err(Error::Internal("search produced a certificate that does not verify".into()));
            }
            return Ok(cert);
        }
    }
    Ok(EppaCertificate::Exhausted { bound })
}

/// Searches for `B ⊇ A` with `|B| <= bound` on which every map extends to a
/// color-preserving automorphism.
pub fn eppa_search(a: &ColoredStructure, maps: &[PartialMap], bound: usize) -> Result<EppaCertificate> {
    if let Some(j) = maps.iter().position(|m| !m.chi_is_identity()) {
        return input(format!("map {j} carries a non-identity chi; use permorphism_search"));
    }
    let arities = a.base.spec().tracked(bound);
    let chis: Vec<Chi> = maps.iter().map(|m| checked_chi(a, m, arities)).collect::<Result<_>>()?;
    if let Some(reason) = check_maps(a, maps, &chis)? {
        return Ok(EppaCertificate::Refuted { reason });
    }
    bounded_search(a, maps, &chis, bound, |fixed, _| ColorUf::new(fixed.to_vec()))
}

/// Like [`eppa_search`], but map `j` must extend to a `chi_j`-permorphism:
/// a subset of color `c` goes to a subset of color `chi_j(c)`.
pub fn permorphism_search(a: &ColoredStructure, maps: &[PartialMap], bound: usize) -> Result<EppaCertificate> {
    let arities = a.base.spec().tracked(bound);
    if a.palette.iter().any(|&k| k >= 63) {
        return input("palettes above 62 colors are not supported");
    }
    let chis: Vec<Chi> = maps.iter().map(|m| checked_chi(a, m, arities)).collect::<Result<_>>()?;
    if let Some(reason) = check_maps(a, maps, &chis)? {
        return Ok(EppaCertificate::Refuted { reason });
    }
    bounded_search(a, maps, &chis, bound, PermUf::new)
}

/// Re-checks a certificate without the search code: `B` restricted to the
/// points of `A` is `A` with its colors, each extension extends its map, and
/// the iso-embed backtracking confirms it as an automorphism of the base that
/// moves colors by `chi`.
pub fn verify_certificate(a: &ColoredStructure, maps: &[PartialMap], cert: &EppaCertificate) -> Result<bool> {
    let EppaCertificate::Found { structure: b, extensions } = cert else {
        return Ok(false);
    };
    if extensions.len() != maps.len() || b.size() < a.size() {
        return Ok(false);
    }
    let pts: Vec<usize> = (0..a.size()).collect();
    if b.base.induced(&pts)? != a.base {
        return Ok(false);
    }
    for n in 1..=a.base.tracked_arities() {
        let mut ok = true;
        for_each_combination(a.size(), n, |s| ok &= a.color_of(s) == b.color_of(s));
        if !ok {
            return Ok(false);
        }
    }
    let arities = b.base.tracked_arities();
    for (map, sigma) in maps.iter().zip(extensions) {
        if map.pairs.iter().any(|&(x, y)| sigma.get(x) != Some(&y)) {
            return Ok(false);
        }
        let cons = Constraints { allowed: Some(sigma.iter().map(|&y| vec![y]).collect()) };
        if first_embedding(&b.base, &b.base, &cons).is_none() {
            return Ok(false);
        }
        let chi = checked_chi(a, map, arities)?;
        for n in 1..=arities {
            let mut ok = true;
            for_each_combination(b.size(), n, |s| {
                let mut t: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
                t.sort_unstable();
                ok &= chi[n - 1].get(b.color_of(s) as usize).copied().unwrap_or(b.color_of(s)) == b.color_of(&t);
            });
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Three pairwise disjoint `n`-subsets with `class(a) <_n class(b) <_n class(c)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderWitness {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EppaFailure {
    pub n: usize,
    pub witness: OrderWitness,
    /// The partial isomorphism fixing `a` and taking `b` to `c` pointwise.
    pub phi: Vec<(usize, usize)>,
    /// Extra points allowed beyond the witness.
    pub bound: usize,
    /// Number of finite substructures `F ⊇ witness` examined.
    pub substructures: usize,
    /// Automorphisms listed across all `F`, each fixing every ordered class.
    pub automorphisms_checked: u64,
    /// Every automorphism of every `F` fixes each ordered class sort pointwise.
    pub analytic: bool,
    /// No `F` has an automorphism extending `phi`.
    pub exhaustive: bool,
}

impl EppaFailure {
    pub fn certified(&self) -> bool {
        self.analytic && self.exhaustive
    }
}

/// Finds the first automorphism of `f` that moves some class of an ordered
/// arity, as `(automorphism, arity, class)`.
pub fn order_rigidity_violation(f: &FinStructure) -> Option<(Vec<usize>, usize, u32)> {
    let ordered: Vec<usize> = f.spec().ordered_arities().iter().copied().filter(|&n| n <= f.tracked_arities()).collect();
    let reps: Vec<(usize, Vec<Vec<usize>>)> =
        ordered.iter().map(|&n| (n, f.members(n).into_iter().map(|mut m| m.swap_remove(0)).collect())).collect();
    for_each_embedding(f, f, &Constraints::default(), |sigma| {
        for (n, rep) in &reps {
            for (c, s) in rep.iter().enumerate() {
                let mut t: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
                t.sort_unstable();
                if f.class_of(&t) != c as u32 {
                    return ControlFlow::Break((sigma.to_vec(), *n, c as u32));
                }
            }
        }
        ControlFlow::Continue(())
    })
}

/// Certifies that the map fixing `a` and taking `b` to `c` extends to an
/// automorphism of no finite `F` with `witness ⊆ F ⊆ M` and at most `bound`
/// points outside the witness, checked both through order rigidity and by
/// direct search.
pub fn verify_eppa_failure(m: &FinStructure, witness: &OrderWitness, bound: usize) -> Result<EppaFailure> {
    let n = witness.a.len();
    let spec = m.spec();
    if !spec.is_ordered(n) || n > m.tracked_arities() {
        return input(format!("arity {n} is not an ordered tracked arity"));
    }
    let blocks = [&witness.a, &witness.b, &witness.c];
    let mut all: Vec<usize> = Vec::new();
    for blk in blocks {
        if blk.len() != n || blk.windows(2).any(|w| w[0] >= w[1]) || blk.iter().any(|&p| p >= m.size()) {
            return input("witness blocks must be sorted n-subsets of M of equal size");
        }
        all.extend_from_slice(blk);
    }
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return input("witness blocks must be pairwise disjoint");
    }
    let rank = |blk: &Vec<usize>| m.order_rank(n, m.class_of(blk)).unwrap();
    let (ra, rb, rc) = (rank(&witness.a), rank(&witness.b), rank(&witness.c));
    if !(ra < rb && rb < rc) {
        return input(format!("witness classes must be strictly increasing in <_{n}; got ranks {ra}, {rb}, {rc}"));
    }
    let phi: Vec<(usize, usize)> =
        witness.a.iter().map(|&x| (x, x)).chain(witness.b.iter().copied().zip(witness.c.iter().copied())).collect();
    let (xs, ys): (Vec<usize>, Vec<usize>) = phi.iter().copied().unzip();
    if m.induced_unchecked(&xs) != m.induced_unchecked(&ys) {
        return input("the map fixing a and taking b to c is not a partial isomorphism of M");
    }

    let rest: Vec<usize> = (0..m.size()).filter(|p| all.binary_search(p).is_err()).collect();
    let mut substructures = 0;
    let mut automorphisms_checked = 0u64;
    let mut analytic = true;
    let mut exhaustive = true;
    for extra in 0..=bound.min(rest.len()) {
        for_each_sub_selection(&rest, extra, |more| {
            let mut pts = all.clone();
            pts.extend_from_slice(more);
            pts.sort_unstable();
            let f = m.induced_unchecked(&pts);
            substructures += 1;
            let pos = |p: usize| pts.binary_search(&p).unwrap();
            // (i) every automorphism fixes all ordered classes
            for_each_embedding::<()>(&f, &f, &Constraints::default(), |sigma| {
                automorphisms_checked += 1;
                for &k in spec.ordered_arities().iter().filter(|&&k| k <= f.tracked_arities()) {
                    for_each_combination(f.size(), k, |s| {
                        let mut t: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
                        t.sort_unstable();
                        analytic &= f.class_of(s) == f.class_of(&t);
                    });
                }
                ControlFlow::Continue(())
            });
            // (ii) no automorphism extends phi
            let fixed: Vec<(usize, usize)> = phi.iter().map(|&(x, y)| (pos(x), pos(y))).collect();
            let cons = Constraints::fixing(f.size(), f.size(), &fixed);
            if first_embedding(&f, &f, &cons).is_some() {
                exhaustive = false;
            }
        });
    }
    Ok(EppaFailure { n, witness: witness.clone(), phi, bound, substructures, automorphisms_checked, analytic, exhaustive })
}

/// Three `n`-blocks with classes `a < b < c`; every other `n`-subset lies in
/// one class above them and every other arity is a single class. Without
/// ordered arities the block classes are merely distinct.
pub fn order_witness_structure(spec: &ClassSpec, n: usize) -> Result<FinStructure> {
    if n == 0 || n > spec.max_arity() {
        return input(format!("arity {n} is not available (max_arity {})", spec.max_arity()));
    }
    if spec.allow_point_order() {
        return input("the witness structure carries no point order");
    }
    let size = 3 * n;
    let label = |k: usize, s: &[usize]| -> u32 {
        if k != n {
            return 0;
        }
        let blk = s[0] / n;
        if s.iter().all(|&p| p / n == blk) {
            blk as u32
        } else {
            3
        }
    };
    let mut orders = BTreeMap::new();
    for &k in spec.ordered_arities().iter().filter(|&&k| k <= spec.tracked(size)) {
        let mixed = k == n && n > 1;
        orders.insert(
            k,
            if k != n {
                vec![0]
            } else if mixed {
                vec![0, 1, 2, 3]
            } else {
                vec![0, 1, 2]
            },
        );
    }
    FinStructure::from_fn(spec.clone(), size, label, orders, None)
}

/// The witness structure joined with a level-2 generic approximation; the
/// witness blocks come after the approximation's points.
pub fn canonical_failure_instance(spec: &ClassSpec, n: usize) -> Result<(FinStructure, OrderWitness)> {
    if !spec.is_ordered(n) {
        return input(format!("arity {n} is not ordered in the class spec"));
    }
    let approx = saturate(&FinStructure::empty(spec.clone()), 2, 64)?;
    let w = order_witness_structure(spec, n)?;
    let m = joint_embed(spec, &approx.structure, &w)?;
    let off = approx.structure.size();
    let block = |i: usize| (off + i * n..off + (i + 1) * n).collect();
    Ok((m, OrderWitness { a: block(0), b: block(1), c: block(2) }))
}

/// The orderless counterpart: the same map on the witness structure of a
/// `K0`-style spec, as a permorphism of the colored expansion swapping the
/// colors of `b` and `c`. An automorphism of the base found this way extends
/// the map.
pub fn orderless_analogue(max_arity: usize, n: usize, bound: usize) -> Result<EppaCertificate> {
    let spec = ClassSpec::k0(max_arity);
    let w = order_witness_structure(&spec, n)?;
    let a = color_expand(&w)?;
    let blk = |i: usize| -> Vec<usize> { (i * n..(i + 1) * n).collect() };
    let pairs: Vec<(usize, usize)> = blk(0).into_iter().map(|x| (x, x)).chain(blk(1).into_iter().zip(blk(2))).collect();
    let (cb, cc) = (a.color_of(&blk(1)), a.color_of(&blk(2)));
    let mut perm: Vec<u32> = (0..a.palette()[n - 1]).collect();
    perm.swap(cb as usize, cc as usize);
    let map = PartialMap::with_chi(pairs, BTreeMap::from([(n, perm)]));
    permorphism_search(&a, &[map], bound)
}
