//! Multi-word bitsets over dense integer ids.
//!
//! Used both for task subsets (the `I_η` of a surrogate model, the `s^k` of an
//! assignment plan) and for routing node sets in the oracle cache.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

const WORD_BITS: usize = 64;

/// Fixed-universe bitset. Two sets compare equal only if they share the same
/// universe size.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitSet {
    universe: usize,
    words: Vec<u64>,
}

/// A subset of the task ids of an instance.
pub type TaskSubset = BitSet;

/// A subset of routing node ids.
pub type NodeSet = BitSet;

impl BitSet {
    pub fn empty(universe: usize) -> Self {
        Self {
            universe,
            words: vec![0; universe.div_ceil(WORD_BITS)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for i in 0..universe {
            s.insert(i);
        }
        s
    }

    /// Builds a set from ids; panics if an id is outside the universe.
    pub fn from_ids<I: IntoIterator<Item = usize>>(universe: usize, ids: I) -> Self {
        let mut s = Self::empty(universe);
        for id in ids {
            s.insert(id);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, id: usize) {
        assert!(id < self.universe, "id {id} outside universe {}", self.universe);
        self.words[id / WORD_BITS] |= 1 << (id % WORD_BITS);
    }

    pub fn remove(&mut self, id: usize) {
        if id < self.universe {
            self.words[id / WORD_BITS] &= !(1 << (id % WORD_BITS));
        }
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.universe && self.words[id / WORD_BITS] & (1 << (id % WORD_BITS)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD_BITS + bit)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Label in the `{2,3}` style used for CSV headers (ids printed as-is).
    pub fn label(&self) -> String {
        let ids: Vec<String> = self.iter().map(|i| i.to_string()).collect();
        format!("{{{}}}", ids.join(","))
    }

    /// Ordering by cardinality, then lexicographically by sorted members.
    pub fn canonical_cmp(&self, other: &BitSet) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Display for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
