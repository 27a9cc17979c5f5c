//! Multisets of remaining lifetimes.
//!
//! Contents of equal size are identified only by how many slots they remain
//! relevant, so every set of contents in the system (new arrivals, the
//! outside pool, the cache, downloads and discards) is a multiset of positive
//! integers. The representation is a dense count vector indexed by lifetime.

use std::cmp::Ordering;
use std::fmt;

/// Multiset of positive lifetimes stored as `counts[l]` = multiplicity of `l`.
///
/// `counts[0]` is always zero and the vector never has trailing zeros, so two
/// equal multisets always have identical representations.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct LifetimeMultiset {
    counts: Vec<u32>,
}

impl LifetimeMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a multiset from a list of lifetimes. Zero lifetimes are dropped.
    pub fn from_lifetimes<I: IntoIterator<Item = usize>>(lifetimes: I) -> Self {
        let mut m = Self::new();
        for l in lifetimes {
            m.insert(l);
        }
        m
    }

    /// Builds a multiset from a count vector indexed by lifetime.
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut m = Self {
            counts: counts.to_vec(),
        };
        if let Some(c) = m.counts.first_mut() {
            *c = 0;
        }
        m.trim();
        m
    }

    fn trim(&mut self) {
        while matches!(self.counts.last(), Some(0)) {
            self.counts.pop();
        }
    }

    /// Multiplicity of lifetime `l`.
    #[inline]
    pub fn count(&self, l: usize) -> u32 {
        self.counts.get(l).copied().unwrap_or(0)
    }

    /// Count vector indexed by lifetime (index 0 is always zero).
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn size(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Largest lifetime present, if any.
    pub fn max_lifetime(&self) -> Option<usize> {
        if self.counts.is_empty() {
            None
        } else {
            Some(self.counts.len() - 1)
        }
    }

    pub fn min_lifetime(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0)
    }

    pub fn insert(&mut self, l: usize) {
        self.insert_n(l, 1);
    }

    pub fn insert_n(&mut self, l: usize, n: u32) {
        if l == 0 || n == 0 {
            return;
        }
        if self.counts.len() <= l {
            self.counts.resize(l + 1, 0);
        }
        self.counts[l] += n;
    }

    /// Removes one copy of `l`. Returns false when `l` is absent.
    pub fn remove_one(&mut self, l: usize) -> bool {
        match self.counts.get_mut(l) {
            Some(c) if *c > 0 => {
                *c -= 1;
                self.trim();
                true
            }
            _ => false,
        }
    }

    /// Multiset sum.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Multiset difference, `None` when `other` is not contained in `self`.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let mut out = self.clone();
        if out.sub_assign(other) {
            Some(out)
        } else {
            None
        }
    }

    /// In-place difference. Leaves `self` untouched and returns false if
    /// `other` is not a sub-multiset.
    pub fn sub_assign(&mut self, other: &Self) -> bool {
        if !other.is_sub_multiset_of(self) {
            return false;
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a -= b;
        }
        self.trim();
        true
    }

    pub fn is_sub_multiset_of(&self, other: &Self) -> bool {
        self.counts.len() <= other.counts.len()
            && self.counts.iter().zip(&other.counts).all(|(a, b)| a <= b)
    }

    /// Reduces every lifetime by one slot and drops the elements that reach zero.
    pub fn decrement(&self) -> Self {
        let mut out = self.clone();
        out.decrement_in_place();
        out
    }

    pub fn decrement_in_place(&mut self) {
        if self.counts.len() <= 1 {
            self.counts.clear();
            return;
        }
        self.counts.remove(1);
        self.trim();
    }

    /// Number of elements with lifetime at least `x`.
    pub fn tail_count(&self, x: usize) -> usize {
        self.counts.iter().skip(x.max(1)).map(|&c| c as usize).sum()
    }

    /// Elements in ascending order, with repetition.
    pub fn iter_ascending(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize))
    }

    /// Elements in descending order, with repetition.
    pub fn iter_descending(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .rev()
            .flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize))
    }

    pub fn to_sorted_vec(&self) -> Vec<usize> {
        self.iter_ascending().collect()
    }

    /// Zero-padded elementwise order: after padding the smaller multiset with
    /// zeros and sorting both, every element of `self` is at most the matching
    /// element of `other`. Equivalent to comparing tail counts at every level.
    pub fn le_padded(&self, other: &Self) -> bool {
        let top = self.counts.len().max(other.counts.len());
        let mut tail_a = 0usize;
        let mut tail_b = 0usize;
        for x in (1..top).rev() {
            tail_a += self.count(x) as usize;
            tail_b += other.count(x) as usize;
            if tail_a > tail_b {
                return false;
            }
        }
        true
    }
}

impl PartialOrd for LifetimeMultiset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self == other {
            return Some(Ordering::Equal);
        }
        match (self.le_padded(other), other.le_padded(self)) {
            (true, _) => Some(Ordering::Less),
            (_, true) => Some(Ordering::Greater),
            _ => None,
        }
    }
}

impl fmt::Debug for LifetimeMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter_descending()).finish()
    }
}

impl FromIterator<usize> for LifetimeMultiset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::from_lifetimes(iter)
    }
}
