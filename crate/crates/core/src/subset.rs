//! Combinatorics of n-element subsets.
//!
//! Subsets are strictly increasing slices of points. Relation data is stored
//! per arity in colexicographic rank order: the rank of `{c_1 < ... < c_n}` is
//! `sum_i C(c_i, i)`. Colex ranks have the property that the subsets of
//! `{0, .., m-1}` occupy exactly the ranks `0..C(m, n)`, so appending points
//! to a universe never moves existing data.

use std::sync::OnceLock;

const MAX_N: usize = 1024;
const MAX_K: usize = 64;

fn table() -> &'static Vec<u64> {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0u64; (MAX_N + 1) * (MAX_K + 1)];
        for n in 0..=MAX_N {
            t[n * (MAX_K + 1)] = 1;
            for k in 1..=MAX_K.min(n) {
                let a = t[(n - 1) * (MAX_K + 1) + k - 1];
                let b = if k < n { t[(n - 1) * (MAX_K + 1) + k] } else { 0 };
                t[n * (MAX_K + 1) + k] = a.saturating_add(b);
            }
        }
        t
    })
}

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    if n <= MAX_N && k <= MAX_K {
        return table()[n * (MAX_K + 1) + k];
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Number of n-subsets of an m-set as a `usize`; panics if it does not fit.
pub fn count(m: usize, n: usize) -> usize {
    let c = binomial(m, n);
    usize::try_from(c).ok().filter(|_| c != u64::MAX).expect("subset count overflow")
}

/// Colex rank of a strictly increasing subset.
#[inline]
pub fn rank(subset: &[usize]) -> usize {
    subset.iter().enumerate().map(|(i, &c)| binomial(c, i + 1) as usize).sum()
}

/// Inverse of [`rank`] for subsets of size `n`.
pub fn unrank(mut r: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for i in (1..=n).rev() {
        // largest c with C(c, i) <= r
        let mut c = i - 1;
        while binomial(c + 1, i) as usize <= r {
            c += 1;
        }
        r -= binomial(c, i) as usize;
        out[i - 1] = c;
    }
    out
}

/// Lexicographic iterator over the `k`-subsets of `0..m`.
#[derive(Clone, Debug)]
pub struct Combinations {
    m: usize,
    cur: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(m: usize, k: usize) -> Self {
        Combinations { m, cur: (0..k).collect(), done: k > m }
    }

    /// Advance to the next subset in place; returns `None` when exhausted.
    pub fn next_ref(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        Some(&self.cur)
    }

    fn advance(&mut self) {
        let k = self.cur.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.cur[i] < self.m - k + i {
                self.cur[i] += 1;
                for j in i + 1..k {
                    self.cur[j] = self.cur[j - 1] + 1;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        self.advance();
        Some(out)
    }
}

/// Calls `f` on every `k`-subset of `0..m` in lexicographic order, without allocating per subset.
pub fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut c = Combinations::new(m, k);
    while let Some(s) = c.next_ref() {
        f(s);
        c.advance();
    }
}

/// Calls `f` on every `k`-subset of `items` (kept in the order of `items`).
pub fn for_each_sub_selection<T: Copy>(items: &[T], k: usize, mut f: impl FnMut(&[T])) {
    let mut buf = Vec::with_capacity(k);
    for_each_combination(items.len(), k, |idx| {
        buf.clear();
        buf.extend(idx.iter().map(|&i| items[i]));
        f(&buf);
    });
}
