//! The user-side stash: real blocks not currently in the data tree.
//!
//! Ordered by `(pos, addr)` so that the blocks eligible for a bucket at
//! depth `i` on an eviction path — those whose labels share the path's
//! `i`-bit prefix — form one contiguous key range.

use std::collections::BTreeMap;
use std::ops::Bound;

/// A real block held by the user: address, position label (the primary
/// label for the two-choice construction) and payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StashEntry {
    pub pos: u64,
    pub addr: u64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Stash {
    map: BTreeMap<(u64, u64), Vec<u8>>,
}

impl Stash {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Inserts an entry. Panics in debug builds if `(pos, addr)` is already
    /// present: the tree invariant allows at most one entry per address.
    pub fn insert(&mut self, pos: u64, addr: u64, payload: Vec<u8>) {
        let old = self.map.insert((pos, addr), payload);
        debug_assert!(old.is_none(), "duplicate stash entry for addr {addr}");
    }

    pub fn remove(&mut self, pos: u64, addr: u64) -> Option<Vec<u8>> {
        self.map.remove(&(pos, addr))
    }

    pub fn contains(&self, pos: u64, addr: u64) -> bool {
        self.map.contains_key(&(pos, addr))
    }

    fn prefix_bounds(leaf: u64, depth: u32, height: u32) -> (u64, u64) {
        let span = height - depth;
        let lo = (leaf >> span) << span;
        (lo, lo + (1u64 << span))
    }

    /// Pops the `(pos, addr)`-smallest entry whose label shares the
    /// depth-`depth` prefix of `leaf`, if any.
    pub fn pop_first_in_prefix(
        &mut self,
        leaf: u64,
        depth: u32,
        height: u32,
    ) -> Option<StashEntry> {
        let (lo, hi) = Self::prefix_bounds(leaf, depth, height);
        let key = *self
            .map
            .range((Bound::Included((lo, 0)), Bound::Excluded((hi, 0))))
            .next()?
            .0;
        let payload = self.map.remove(&key).unwrap();
        Some(StashEntry {
            pos: key.0,
            addr: key.1,
            payload,
        })
    }

    /// Keys eligible for a bucket at `depth` on the path to `leaf`.
    pub fn eligible_keys(&self, leaf: u64, depth: u32, height: u32) -> Vec<(u64, u64)> {
        let (lo, hi) = Self::prefix_bounds(leaf, depth, height);
        self.map
            .range((Bound::Included((lo, 0)), Bound::Excluded((hi, 0))))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = StashEntry> + '_ {
        self.map.iter().map(|((pos, addr), payload)| StashEntry {
            pos: *pos,
            addr: *addr,
            payload: payload.clone(),
        })
    }

    /// Looks up an entry by address given candidate labels, trying them in
    /// order. The two-choice construction does not know which of a block's
    /// two labels is primary until it finds the block.
    pub fn remove_by_candidates(&mut self, addr: u64, labels: &[u64]) -> Option<(u64, Vec<u8>)> {
        for &pos in labels {
            if let Some(p) = self.map.remove(&(pos, addr)) {
                return Some((pos, p));
            }
        }
        None
    }
}
