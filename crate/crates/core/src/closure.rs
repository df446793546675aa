//! Finest equivalence relations generated by "these items belong together" constraints.

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind { parent: (0..len).collect(), size: vec![1; len] }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let p = self.parent[x];
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    /// Returns true if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    pub fn union_all(&mut self, items: &[usize]) {
        if let Some((&first, rest)) = items.split_first() {
            for &x in rest {
                self.union(first, x);
            }
        }
    }

    /// Block labels numbered by first occurrence.
    pub fn labels(&mut self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.len()];
        let mut next = 0;
        (0..self.len())
            .map(|x| {
                let r = self.find(x);
                if map[r] == usize::MAX {
                    map[r] = next;
                    next += 1;
                }
                map[r]
            })
            .collect()
    }
}

/// The finest partition of `0..items` in which every group lies inside one block.
/// Blocks are labeled by their least item.
pub fn finest_closure(items: usize, groups: &[Vec<usize>]) -> Vec<usize> {
    let mut uf = UnionFind::new(items);
    for g in groups {
        uf.union_all(g);
    }
    uf.labels()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_constraints_is_discrete() {
        assert_eq!(finest_closure(4, &[]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn transitive_chain() {
        // x=0, y=1, z=2
        assert_eq!(finest_closure(4, &[vec![0, 1], vec![1, 2]]), vec![0, 0, 0, 1]);
    }

    #[test]
    fn singleton_and_empty_groups_are_harmless() {
        assert_eq!(finest_closure(3, &[vec![], vec![2]]), vec![0, 1, 2]);
    }
}
