//! Canonical sets of origin-tagged element intervals.

use std::collections::BTreeMap;

use crate::schedule::Chunk;

/// A set of elements keyed by origin rank, stored as sorted, disjoint,
/// non-adjacent half-open intervals per origin.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ChunkSet {
    by_origin: BTreeMap<usize, Vec<(usize, usize)>>,
}

impl ChunkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.by_origin.is_empty()
    }

    /// Number of maximal intervals held.
    pub fn interval_count(&self) -> usize {
        self.by_origin.values().map(Vec::len).sum()
    }

    /// Total number of elements held.
    pub fn elements(&self) -> usize {
        self.by_origin
            .values()
            .flat_map(|v| v.iter())
            .map(|&(lo, hi)| hi - lo)
            .sum()
    }

    pub fn insert(&mut self, chunk: Chunk) {
        if chunk.lo >= chunk.hi {
            return;
        }
        let list = self.by_origin.entry(chunk.origin).or_default();
        // First interval that overlaps or touches [lo, hi).
        let start = list.partition_point(|&(_, hi)| hi < chunk.lo);
        let mut end = start;
        let (mut lo, mut hi) = (chunk.lo, chunk.hi);
        while end < list.len() && list[end].0 <= hi {
            lo = lo.min(list[end].0);
            hi = hi.max(list[end].1);
            end += 1;
        }
        list.splice(start..end, std::iter::once((lo, hi)));
    }

    pub fn union_with(&mut self, other: &ChunkSet) {
        for c in other.iter() {
            self.insert(c);
        }
    }

    /// True iff every element of `chunk` is held.
    pub fn contains(&self, chunk: &Chunk) -> bool {
        if chunk.lo >= chunk.hi {
            return true;
        }
        let Some(list) = self.by_origin.get(&chunk.origin) else {
            return false;
        };
        let i = list.partition_point(|&(_, hi)| hi <= chunk.lo);
        i < list.len() && list[i].0 <= chunk.lo && chunk.hi <= list[i].1
    }

    pub fn is_superset(&self, other: &ChunkSet) -> bool {
        other.iter().all(|c| self.contains(&c))
    }

    /// Elements of `self` not held by `other`.
    pub fn difference(&self, other: &ChunkSet) -> ChunkSet {
        let mut out = ChunkSet::new();
        for (&origin, mine) in &self.by_origin {
            let theirs = other.by_origin.get(&origin).map(Vec::as_slice).unwrap_or(&[]);
            let mut j = 0;
            for &(lo, hi) in mine {
                let mut cur = lo;
                while j < theirs.len() && theirs[j].1 <= cur {
                    j += 1;
                }
                let mut t = j;
                while cur < hi && t < theirs.len() && theirs[t].0 < hi {
                    let (tlo, thi) = theirs[t];
                    if tlo > cur {
                        out.insert(Chunk::new(origin, cur, tlo));
                    }
                    cur = cur.max(thi);
                    t += 1;
                }
                if cur < hi {
                    out.insert(Chunk::new(origin, cur, hi));
                }
            }
        }
        out
    }

    /// Held intervals as chunks, sorted by (origin, lo).
    pub fn iter(&self) -> impl Iterator<Item = Chunk> + '_ {
        self.by_origin
            .iter()
            .flat_map(|(&origin, v)| v.iter().map(move |&(lo, hi)| Chunk::new(origin, lo, hi)))
    }

    pub fn to_vec(&self) -> Vec<Chunk> {
        self.iter().collect()
    }
}

impl FromIterator<Chunk> for ChunkSet {
    fn from_iter<I: IntoIterator<Item = Chunk>>(iter: I) -> Self {
        let mut set = ChunkSet::new();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl Extend<Chunk> for ChunkSet {
    fn extend<I: IntoIterator<Item = Chunk>>(&mut self, iter: I) {
        for c in iter {
            self.insert(c);
        }
    }
}
