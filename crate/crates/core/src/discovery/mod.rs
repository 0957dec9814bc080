//! Skeleton search, orientation and the discovery pipelines.

use std::collections::BTreeMap;

use crate::mixed_graph::NodeId;

pub mod orient;
pub mod pipelines;
pub mod pool;
pub mod skeleton;

pub use orient::{orient, ConflictPolicy, OrientError, OrientMode, Oriented};
pub use pipelines::{
    default_gamma, estimate_moral_graph, fci, lfci, lfci_mb, meek_orient, pc, DiscoveryError, FciOptions, PcVariant,
    RunOutput, FCI_DEFAULT_MAX_NODES,
};
pub use pool::{pool, PoolStrategy};
pub use skeleton::{skeleton_search, Eta, SearchMode, SkeletonOptions, SkeletonState};

/// Separating sets recorded for deleted edges, keyed by the unordered pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SepRecord {
    map: BTreeMap<(NodeId, NodeId), Vec<NodeId>>,
}

fn key(i: NodeId, j: NodeId) -> (NodeId, NodeId) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl SepRecord {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `s` (sorted) for the pair, replacing any previous entry.
    pub fn insert(&mut self, i: NodeId, j: NodeId, s: &[NodeId]) {
        let mut s = s.to_vec();
        s.sort_unstable();
        self.map.insert(key(i, j), s);
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> Option<&[NodeId]> {
        self.map.get(&key(i, j)).map(Vec::as_slice)
    }

    pub fn contains_pair(&self, i: NodeId, j: NodeId) -> bool {
        self.map.contains_key(&key(i, j))
    }

    /// Is `v` in `SEP(i, j)`? `None` when the pair has no record.
    pub fn separates_with(&self, i: NodeId, j: NodeId, v: NodeId) -> Option<bool> {
        self.get(i, j).map(|s| s.binary_search(&v).is_ok())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), &[NodeId])> + '_ {
        self.map.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    /// Record with every node index mapped through `perm` (`v -> perm[v]`).
    pub fn relabel(&self, perm: &[NodeId]) -> SepRecord {
        let mut out = SepRecord::new();
        for ((i, j), s) in self.iter() {
            let mapped: Vec<NodeId> = s.iter().map(|&v| perm[v]).collect();
            out.insert(perm[i], perm[j], &mapped);
        }
        out
    }
}

/// Counters reported by every search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub n_tests: u64,
    /// Largest conditioning-set size at which any test ran.
    pub m_reach: usize,
    pub edges_removed_per_level: Vec<usize>,
    /// Orientation steps that hit an already-set opposite mark and were
    /// skipped (only under [`ConflictPolicy::Keep`]).
    pub orientation_conflicts: usize,
}
