//! Walk graphs `g(i, alpha)` and their classification.
//!
//! For an `alpha`-sequence and an `i`-sequence of the same length `p`, the walk
//! graph is the bipartite directed multigraph with a down edge
//! `alpha_u -> i_u` and an up edge `i_u -> alpha_{u+1}` for each position `u`
//! (wrapping around, `alpha_{p+1} = alpha_1`). Alpha-vertices and i-vertices
//! live in disjoint namespaces.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequences::{self, canonicalize, CanonicalSequence, SequenceError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("sequence lengths differ: i has {i_len}, alpha has {alpha_len}")]
    LengthMismatch { i_len: usize, alpha_len: usize },
    #[error("alpha = {0} is a crossing sequence")]
    Crossing(CanonicalSequence),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// Up/down multiplicities between an alpha-vertex and an i-vertex.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCount {
    /// Down edges `a -> v`.
    pub down: u32,
    /// Up edges `v -> a`.
    pub up: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphClass {
    /// Every vertex pair carries as many up edges as down edges.
    Paired,
    /// Some vertex pair has up and down counts differing by exactly one.
    Single,
    /// Neither: all imbalances are at least two.
    Other,
}

impl fmt::Display for GraphClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphClass::Paired => "paired",
            GraphClass::Single => "single",
            GraphClass::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkGraph {
    alpha: CanonicalSequence,
    i_seq: CanonicalSequence,
    /// Dense `s x r` table indexed by `(a - 1) * r + (v - 1)`.
    edges: Vec<EdgeCount>,
}

impl WalkGraph {
    pub fn alpha(&self) -> &CanonicalSequence {
        &self.alpha
    }

    pub fn i_seq(&self) -> &CanonicalSequence {
        &self.i_seq
    }

    /// Number of steps `p`.
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Number of distinct alpha-vertices `s`.
    pub fn s(&self) -> usize {
        self.alpha.distinct()
    }

    /// Number of distinct i-vertices `r`.
    pub fn r(&self) -> usize {
        self.i_seq.distinct()
    }

    /// Multiplicities between alpha-vertex `a` and i-vertex `v` (both 1-based).
    pub fn edge(&self, a: u32, v: u32) -> EdgeCount {
        let (s, r) = (self.s() as u32, self.r() as u32);
        if a == 0 || v == 0 || a > s || v > r {
            return EdgeCount::default();
        }
        self.edges[((a - 1) * r + (v - 1)) as usize]
    }

    /// Nonzero entries of the edge multiset, ordered by `(a, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, EdgeCount)> + '_ {
        let r = self.r();
        self.edges.iter().enumerate().filter_map(move |(idx, &e)| {
            (e.down + e.up > 0).then(|| ((idx / r) as u32 + 1, (idx % r) as u32 + 1, e))
        })
    }

    pub fn classify(&self) -> GraphClass {
        let mut balanced = true;
        for e in &self.edges {
            match e.up.abs_diff(e.down) {
                0 => {}
                1 => return GraphClass::Single,
                _ => balanced = false,
            }
        }
        if balanced {
            GraphClass::Paired
        } else {
            GraphClass::Other
        }
    }

    /// Connectivity of the underlying undirected graph on `s + r` vertices.
    pub fn is_connected(&self) -> bool {
        let (s, r) = (self.s(), self.r());
        let mut dsu = Dsu::new(s + r);
        for (a, v, _) in self.edges() {
            dsu.union(a as usize - 1, s + v as usize - 1);
        }
        let root = dsu.find(0);
        (0..s + r).all(|x| dsu.find(x) == root)
    }

    /// Every down edge coincides with exactly one up edge and gluing those
    /// pairs leaves a tree with `p` edges and `p + 1` vertices.
    pub fn is_delta1(&self) -> bool {
        if self.s() + self.r() != self.len() + 1 {
            return false;
        }
        let simple_paired = self.edges.iter().all(|e| e.up == e.down && e.up <= 1);
        // p glued edges on p + 1 vertices: a tree iff connected.
        simple_paired && self.is_connected()
    }

    /// The minimal-distance pair of consecutive coincident same-direction
    /// edges, if any. Ties prefer down edges, then the earliest position.
    pub fn consecutive_violation(&self) -> Option<ConsecutivePair> {
        let alpha = self.alpha.values();
        let i = self.i_seq.values();
        let p = alpha.len();
        let next = |u: usize| alpha[(u + 1) % p];
        let mut best: Option<ConsecutivePair> = None;
        let mut consider = |cand: ConsecutivePair| {
            if best.is_none_or(|b| cand.distance() < b.distance()) {
                best = Some(cand);
            }
        };
        // Down edges (alpha_u, i_u); up edges join (alpha_{u+1}, i_u).
        for j1 in 0..p {
            for j2 in j1 + 1..p {
                let key = (alpha[j1], i[j1]);
                if (alpha[j2], i[j2]) == key && (j1..j2).all(|u| (next(u), i[u]) != key) {
                    consider(ConsecutivePair {
                        direction: EdgeDirection::Down,
                        first: j1 + 1,
                        second: j2 + 1,
                    });
                }
            }
        }
        for j1 in 0..p {
            for j2 in j1 + 1..p {
                let key = (next(j1), i[j1]);
                if (next(j2), i[j2]) == key && (j1 + 1..=j2).all(|u| (alpha[u], i[u]) != key) {
                    consider(ConsecutivePair {
                        direction: EdgeDirection::Up,
                        first: j1 + 1,
                        second: j2 + 1,
                    });
                }
            }
        }
        best
    }

    /// One line of JSON describing the graph, for debugging dumps.
    pub fn dump_record(&self) -> String {
        let record = GraphRecord {
            alpha: self.alpha.values().to_vec(),
            i: self.i_seq.values().to_vec(),
            class: self.classify(),
            edges: self
                .edges()
                .map(|(a, v, e)| EdgeRecord {
                    a,
                    v,
                    down: e.down,
                    up: e.up,
                })
                .collect(),
        };
        serde_json::to_string(&record).expect("graph record serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphRecord {
    pub alpha: Vec<u32>,
    pub i: Vec<u32>,
    pub class: GraphClass,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct EdgeRecord {
    pub a: u32,
    pub v: u32,
    pub down: u32,
    pub up: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeDirection {
    Down,
    Up,
}

/// Two coincident same-direction edges at 1-based positions `first < second`
/// with no opposite edge between them that coincides with them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsecutivePair {
    pub direction: EdgeDirection,
    pub first: usize,
    pub second: usize,
}

impl ConsecutivePair {
    pub fn distance(&self) -> usize {
        self.second - self.first
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let up = self.parent[cur];
            self.parent[cur] = root;
            cur = up;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn build_graph(i: &CanonicalSequence, alpha: &CanonicalSequence) -> Result<WalkGraph, GraphError> {
    if i.len() != alpha.len() {
        return Err(GraphError::LengthMismatch {
            i_len: i.len(),
            alpha_len: alpha.len(),
        });
    }
    let (s, r) = (alpha.distinct(), i.distinct());
    let a = alpha.values();
    let iv = i.values();
    let p = a.len();
    let mut edges = vec![EdgeCount::default(); s * r];
    let slot = |a: u32, v: u32| (a as usize - 1) * r + (v as usize - 1);
    for u in 0..p {
        edges[slot(a[u], iv[u])].down += 1;
        edges[slot(a[(u + 1) % p], iv[u])].up += 1;
    }
    Ok(WalkGraph {
        alpha: alpha.clone(),
        i_seq: i.clone(),
        edges,
    })
}

pub fn classify(g: &WalkGraph) -> GraphClass {
    g.classify()
}

/// False on length mismatch.
pub fn is_delta1(i: &CanonicalSequence, alpha: &CanonicalSequence) -> bool {
    build_graph(i, alpha).is_ok_and(|g| g.is_delta1())
}

pub fn count_consecutive_violations(g: &WalkGraph) -> Option<ConsecutivePair> {
    g.consecutive_violation()
}

/// The unique canonical `i` with `r = p + 1 - s` distinct values for which
/// `g(i, alpha)` is a tree-shaped paired graph; `None` when `alpha` crosses.
///
/// Built by recursion on `p`: split at the first return to `alpha_1` and glue
/// the two partners; otherwise, if `alpha_2` occurs once, insert a doubled
/// i-vertex; otherwise split out the excursion between the first two
/// occurrences of `alpha_2`.
pub fn delta1_partner(alpha: &CanonicalSequence) -> Option<CanonicalSequence> {
    if alpha.is_crossing() {
        return None;
    }
    let values = partner_values(alpha.values());
    Some(CanonicalSequence::from_canonical_unchecked(values))
}

/// `alpha` is canonical and non-crossing. Recursion on the length:
///
/// 1. `alpha_1` recurs at `j`: the walk splits into two closed walks at
///    `alpha_1` sharing no other vertex; their partners are concatenated on
///    disjoint `i`-vertices.
/// 2. `alpha_1` does not recur and `alpha_2` is visited once: drop `alpha_2`
///    and double the first `i`-vertex, so `alpha_2` hangs off it as a leaf.
/// 3. `alpha_1` does not recur and `alpha_2` is last visited at `k`: the
///    excursion `alpha_2 .. alpha_{k-1}` hangs off `alpha_2`, which hangs off
///    `i`-vertex 1 shared with the remainder `alpha_1, alpha_{k+1}, ..`.
///
/// Parts are relabeled with [`canonicalize`] before each recursive call.
fn partner_values(alpha: &[u32]) -> Vec<u32> {
    let p = alpha.len();
    if p == 1 {
        return vec![1];
    }
    let canon = |part: &[u32]| canonicalize(part).expect("nonempty").values().to_vec();

    if let Some(j) = (1..p).find(|&j| alpha[j] == alpha[0]) {
        let head = partner_values(&alpha[..j]);
        let tail = partner_values(&canon(&alpha[j..]));
        let shift = head.iter().copied().max().unwrap_or(0);
        let mut i = head;
        i.extend(tail.into_iter().map(|v| v + shift));
        return i;
    }

    match (2..p).rev().find(|&k| alpha[k] == alpha[1]) {
        None => {
            let mut reduced = Vec::with_capacity(p - 1);
            reduced.push(alpha[0]);
            reduced.extend_from_slice(&alpha[2..]);
            let inner = partner_values(&canon(&reduced));
            let mut i = Vec::with_capacity(p);
            i.push(inner[0]);
            i.extend_from_slice(&inner);
            i
        }
        Some(k) => {
            let excursion = partner_values(&canon(&alpha[1..k]));
            let mut rest_alpha = Vec::with_capacity(p - k);
            rest_alpha.push(alpha[0]);
            rest_alpha.extend_from_slice(&alpha[k + 1..]);
            let rest = partner_values(&canon(&rest_alpha));
            let excursion_size = excursion.iter().copied().max().unwrap_or(0);
            let mut i = Vec::with_capacity(p);
            i.push(1);
            i.extend(excursion.into_iter().map(|v| v + 1));
            i.extend(rest.into_iter().map(|v| if v == 1 { 1 } else { v + excursion_size }));
            i
        }
    }
}

/// All canonical `r`-sequences `i` for which `g(i, alpha)` is paired, built as
/// the images of the Δ₁ partner under the block maps of partitions of
/// `[p + 1 - s]` into `r` blocks.
pub fn paired_partners(alpha: &CanonicalSequence, r: usize) -> Result<Vec<CanonicalSequence>, GraphError> {
    let base = delta1_partner(alpha).ok_or_else(|| GraphError::Crossing(alpha.clone()))?;
    let size = base.distinct();
    if r == 0 || r > size {
        return Ok(Vec::new());
    }
    let partitions = sequences::enumerate_partitions_capped(size, Some(r), size)?;
    Ok(partitions.iter().map(|pi| base.relabel(pi)).collect())
}
