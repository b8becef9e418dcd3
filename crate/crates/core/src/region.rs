//! Fixed-width bitsets over domain point indices.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointSet {
    words: Vec<u64>,
    len: usize,
}

impl PointSet {
    pub fn empty(len: usize) -> Self {
        PointSet {
            words: vec![0; len.div_ceil(64).max(1)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Capacity (domain size), not the number of members.
    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "point {i} outside domain of size {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn union_with(&mut self, other: &PointSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &PointSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        PointSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
            len: self.len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Points of `self` not yet in `covered`, calling `f` on each.
    pub fn for_each_new(&self, covered: &PointSet, mut f: impl FnMut(usize)) {
        for (wi, (a, b)) in self.words.iter().zip(&covered.words).enumerate() {
            let mut w = a & !b;
            while w != 0 {
                f(wi * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
    }

    /// Total weight of the set under a point-mass vector.
    pub fn mass(&self, weights: &[f64]) -> f64 {
        self.iter().map(|i| weights[i]).sum()
    }
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops_across_word_boundary() {
        let a = PointSet::from_indices(130, [0, 63, 64, 129]);
        let b = PointSet::from_indices(130, [63, 64]);
        assert_eq!(a.count(), 4);
        assert!(b.is_subset(&a));
        assert!(!a.is_subset(&b));
        assert_eq!(a.difference(&b).iter().collect::<Vec<_>>(), vec![0, 129]);
        let mut seen = vec![];
        a.for_each_new(&b, |i| seen.push(i));
        assert_eq!(seen, vec![0, 129]);
        assert!(PointSet::from_indices(130, [1]).is_disjoint(&a));
    }
}
