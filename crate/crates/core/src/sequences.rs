//! Canonical index sequences and their exhaustive enumeration.
//!
//! A sequence of length `p` is canonical when it starts at 1 and every entry
//! is at most one more than the running maximum. Every sequence over an
//! arbitrary alphabet is equivalent (up to a relabeling of values) to exactly
//! one canonical sequence, so canonical sequences index the equivalence
//! classes that the moment expansion sums over. Set partitions of `[n]` use
//! the same representation (block labels ordered by least element).

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the length of exhaustively enumerated sequences.
///
/// There are Bell(p) canonical sequences of length `p`; Bell(12) is already
/// about four million.
pub const DEFAULT_P_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("sequence must be nonempty")]
    Empty,
    #[error("sequence {0:?} is not canonical")]
    NotCanonical(Vec<u32>),
    #[error("length {p} exceeds the enumeration cap {cap}")]
    OverCap { p: usize, cap: usize },
}

/// A canonical sequence: `values[0] == 1` and each later value is at most the
/// running maximum plus one. Values are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct CanonicalSequence {
    values: Vec<u32>,
    distinct: u32,
}

impl CanonicalSequence {
    /// Validates `values` as a canonical sequence.
    pub fn new(values: Vec<u32>) -> Result<Self, SequenceError> {
        if values.is_empty() {
            return Err(SequenceError::Empty);
        }
        let mut max = 0u32;
        for &v in &values {
            if v == 0 || v > max + 1 {
                return Err(SequenceError::NotCanonical(values));
            }
            max = max.max(v);
        }
        Ok(Self {
            values,
            distinct: max,
        })
    }

    /// Caller guarantees canonicity.
    pub(crate) fn from_canonical_unchecked(values: Vec<u32>) -> Self {
        debug_assert!(Self::new(values.clone()).is_ok(), "{values:?}");
        let distinct = values.iter().copied().max().unwrap_or(0);
        Self { values, distinct }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Length `p`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of distinct values `s`; the values are exactly `1..=s`.
    pub fn distinct(&self) -> usize {
        self.distinct as usize
    }

    /// Number of positions holding `t`. Values outside `1..=s` have degree 0.
    pub fn degree(&self, t: u32) -> usize {
        self.values.iter().filter(|&&v| v == t).count()
    }

    /// Degrees of the values `1..=s`, in order.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.distinct()];
        for &v in &self.values {
            deg[v as usize - 1] += 1;
        }
        deg
    }

    /// True when some positions `j1 < j2 < j3 < j4` carry values `a, b, a, b`
    /// with `a != b`.
    pub fn is_crossing(&self) -> bool {
        is_crossing(&self.values)
    }

    /// Applies the block map of a partition: value `v` becomes `partition[v-1]`.
    ///
    /// The partition must be defined on `1..=s`. Canonical partitions map
    /// canonical sequences to canonical sequences.
    pub fn relabel(&self, partition: &CanonicalSequence) -> CanonicalSequence {
        assert_eq!(partition.len(), self.distinct(), "partition size must equal the number of distinct values");
        let values = self
            .values
            .iter()
            .map(|&v| partition.values[v as usize - 1])
            .collect();
        CanonicalSequence::from_canonical_unchecked(values)
    }
}

impl fmt::Display for CanonicalSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, v) in self.values.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl TryFrom<Vec<u32>> for CanonicalSequence {
    type Error = SequenceError;

    fn try_from(values: Vec<u32>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<CanonicalSequence> for Vec<u32> {
    fn from(seq: CanonicalSequence) -> Self {
        seq.values
    }
}

/// Maps a sequence over any alphabet to the canonical representative of its
/// equivalence class, relabeling values in order of first appearance.
pub fn canonicalize<T: Copy + Eq + Hash>(seq: &[T]) -> Result<CanonicalSequence, SequenceError> {
    if seq.is_empty() {
        return Err(SequenceError::Empty);
    }
    let mut labels: HashMap<T, u32> = HashMap::with_capacity(seq.len());
    let values = seq
        .iter()
        .map(|x| {
            let next = labels.len() as u32 + 1;
            *labels.entry(*x).or_insert(next)
        })
        .collect();
    Ok(CanonicalSequence::from_canonical_unchecked(values))
}

/// Crossing test on raw values. Checks every ordered pair of distinct values
/// for an interleaving `a .. b .. a .. b`.
pub(crate) fn is_crossing(values: &[u32]) -> bool {
    let mut alphabet: Vec<u32> = values.to_vec();
    alphabet.sort_unstable();
    alphabet.dedup();
    for &a in &alphabet {
        for &b in &alphabet {
            if a == b {
                continue;
            }
            let pattern = [a, b, a, b];
            let mut matched = 0;
            for &v in values {
                if v == pattern[matched] {
                    matched += 1;
                    if matched == 4 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// All canonical sequences of length `p` (optionally only those with exactly
/// `s` distinct values), in lexicographic order. Uses [`DEFAULT_P_CAP`].
pub fn enumerate_canonical(p: usize, s: Option<usize>) -> Result<Vec<CanonicalSequence>, SequenceError> {
    enumerate_canonical_capped(p, s, DEFAULT_P_CAP)
}

pub fn enumerate_canonical_capped(
    p: usize,
    s: Option<usize>,
    cap: usize,
) -> Result<Vec<CanonicalSequence>, SequenceError> {
    if p == 0 {
        return Err(SequenceError::Empty);
    }
    if p > cap {
        return Err(SequenceError::OverCap { p, cap });
    }
    let mut out = Vec::new();
    if let Some(s) = s {
        if s == 0 || s > p {
            return Ok(out);
        }
    }
    let mut buf = Vec::with_capacity(p);
    buf.push(1u32);
    grow(&mut buf, 1, p, s.map(|s| s as u32), &mut out);
    Ok(out)
}

fn grow(buf: &mut Vec<u32>, max: u32, p: usize, target: Option<u32>, out: &mut Vec<CanonicalSequence>) {
    if buf.len() == p {
        if target.is_none_or(|s| s == max) {
            out.push(CanonicalSequence {
                values: buf.clone(),
                distinct: max,
            });
        }
        return;
    }
    let remaining = (p - buf.len()) as u32;
    for v in 1..=max + 1 {
        let new_max = max.max(v);
        if let Some(s) = target {
            if new_max > s || new_max + remaining - 1 < s {
                continue;
            }
        }
        buf.push(v);
        grow(buf, new_max, p, target, out);
        buf.pop();
    }
}

/// All set partitions of `[n]` (optionally with exactly `q` blocks), each as
/// the canonical map from elements to block labels, blocks numbered by least
/// element. Uses [`DEFAULT_P_CAP`].
pub fn enumerate_partitions(n: usize, q: Option<usize>) -> Result<Vec<CanonicalSequence>, SequenceError> {
    enumerate_canonical(n, q)
}

pub fn enumerate_partitions_capped(
    n: usize,
    q: Option<usize>,
    cap: usize,
) -> Result<Vec<CanonicalSequence>, SequenceError> {
    enumerate_canonical_capped(n, q, cap)
}
