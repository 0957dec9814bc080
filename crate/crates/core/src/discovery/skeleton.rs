//! Level-wise skeleton search.

use std::ops::ControlFlow;

use rayon::prelude::*;

use super::pipelines::DiscoveryError;
use super::pool::{pool, PoolStrategy};
use super::{RunStats, SepRecord};
use crate::citest::CiTester;
use crate::mixed_graph::{Mark, MixedGraph, NodeId};
use crate::subsets::for_each_subset;

/// Largest conditioning-set size searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eta {
    Bounded(usize),
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Pairs in order, deleting edges as soon as a separator is found.
    #[default]
    Sequential,
    /// All pairs of a level evaluated concurrently against the level
    /// snapshot, deletions applied afterwards.
    Batch,
}

#[derive(Clone, Debug)]
pub struct SkeletonOptions {
    pub strategy: PoolStrategy,
    pub eta: Eta,
    /// Starting graph (undirected); the complete graph when absent.
    pub initial: Option<MixedGraph>,
    pub mode: SearchMode,
}

impl SkeletonOptions {
    pub fn new(strategy: PoolStrategy, eta: Eta) -> Self {
        SkeletonOptions { strategy, eta, initial: None, mode: SearchMode::Sequential }
    }
}

/// Working graph `C` and the level snapshot `C_old` the pools read from.
#[derive(Clone, Debug)]
pub struct SkeletonState {
    pub c: MixedGraph,
    pub c_old: MixedGraph,
}

impl SkeletonState {
    pub fn new(initial: MixedGraph) -> Self {
        SkeletonState { c_old: initial.clone(), c: initial }
    }

    /// Refreshes the snapshot; called between levels only.
    pub fn snapshot(&mut self) {
        self.c_old = self.c.clone();
    }
}

/// Result of testing one pair at one level.
struct PairOutcome {
    pair: (NodeId, NodeId),
    tests: u64,
    separator: Option<Vec<NodeId>>,
}

fn test_pair(
    tester: &CiTester,
    i: NodeId,
    j: NodeId,
    candidates: &[NodeId],
    level: usize,
) -> Result<PairOutcome, DiscoveryError> {
    let mut tests = 0;
    let mut separator = None;
    let mut failure = None;
    let _ = for_each_subset(candidates, level, |s| {
        tests += 1;
        match tester.decide(i, j, s) {
            Ok(true) => {
                separator = Some(s.to_vec());
                ControlFlow::Break(())
            }
            Ok(false) => ControlFlow::Continue(()),
            Err(e) => {
                failure = Some(DiscoveryError::Tester { i, j, s: s.to_vec(), source: e });
                ControlFlow::Break(())
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(PairOutcome { pair: (i, j), tests, separator }),
    }
}

/// Level-wise removal of edges from the starting graph.
///
/// At level `ℓ` every adjacent pair is tested against the `ℓ`-subsets of its
/// pool, in lexicographic order; the first accepted independence deletes
/// the edge and records the separator. Pools read the snapshot taken at the
/// start of the level, so the result does not depend on pair order.
pub fn skeleton_search(
    tester: &CiTester,
    p: usize,
    opts: &SkeletonOptions,
) -> Result<(MixedGraph, SepRecord, RunStats), DiscoveryError> {
    let initial = match &opts.initial {
        Some(g) => {
            if g.n_nodes() != p {
                return Err(DiscoveryError::SizeMismatch { expected: p, found: g.n_nodes() });
            }
            g.skeleton()
        }
        None => MixedGraph::complete(p, Mark::Tail),
    };
    let mut state = SkeletonState::new(initial);
    let mut sep = SepRecord::new();
    let mut stats = RunStats::default();
    let max_level = match opts.eta {
        Eta::Bounded(e) => e,
        Eta::Unbounded => usize::MAX,
    };
    let mut level = 0usize;
    while level <= max_level {
        state.snapshot();
        let pairs: Vec<(NodeId, NodeId, Vec<NodeId>)> =
            state.c_old.edges().into_iter().map(|e| (e.a, e.b, pool(opts.strategy, &state.c_old, e.a, e.b))).collect();
        if !pairs.iter().any(|(_, _, pl)| pl.len() >= level) {
            break;
        }
        let outcomes: Vec<PairOutcome> = match opts.mode {
            SearchMode::Sequential => {
                let mut out = Vec::with_capacity(pairs.len());
                for (i, j, pl) in &pairs {
                    let o = test_pair(tester, *i, *j, pl, level)?;
                    if let Some(s) = &o.separator {
                        state.c.remove_edge(*i, *j);
                        sep.insert(*i, *j, s);
                    }
                    out.push(o);
                }
                out
            }
            SearchMode::Batch => {
                let out: Result<Vec<PairOutcome>, DiscoveryError> =
                    pairs.par_iter().map(|(i, j, pl)| test_pair(tester, *i, *j, pl, level)).collect();
                let out = out?;
                for o in &out {
                    if let Some(s) = &o.separator {
                        state.c.remove_edge(o.pair.0, o.pair.1);
                        sep.insert(o.pair.0, o.pair.1, s);
                    }
                }
                out
            }
        };
        let tests: u64 = outcomes.iter().map(|o| o.tests).sum();
        if tests > 0 {
            stats.m_reach = level;
        }
        stats.n_tests += tests;
        stats.edges_removed_per_level.push(outcomes.iter().filter(|o| o.separator.is_some()).count());
        level += 1;
    }
    Ok((state.c, sep, stats))
}
