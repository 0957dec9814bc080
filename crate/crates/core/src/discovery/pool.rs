//! Candidate pools for conditioning sets.

use std::collections::VecDeque;

use crate::mixed_graph::{mask_to_nodes, Mark, MixedGraph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolStrategy {
    /// `{k : D(i,k) + D(j,k) ≤ γ}` with distances in the level snapshot
    /// minus the edge `(i, j)`.
    Gamma(usize),
    /// Union of the snapshot adjacencies of `i` and `j`.
    Neighborhood,
    /// Possible-D-SEP of `i` in a partially oriented graph.
    PossibleDsep,
    /// Every other node.
    AllNodes,
}

/// Search pool for the pair `(i, j)` on the snapshot `c_old`.
///
/// `PossibleDsep` reads edge marks, so `c_old` should then be the
/// partially oriented graph.
pub fn pool(strategy: PoolStrategy, c_old: &MixedGraph, i: NodeId, j: NodeId) -> Vec<NodeId> {
    let p = c_old.n_nodes();
    match strategy {
        PoolStrategy::Gamma(gamma) => {
            assert!(gamma >= 1, "Gamma pools need gamma >= 1");
            gamma_pool(c_old, i, j, gamma)
        }
        PoolStrategy::Neighborhood => {
            let mut mask = vec![false; p];
            for &v in c_old.neighbors(i).iter().chain(c_old.neighbors(j)) {
                mask[v] = true;
            }
            mask[i] = false;
            mask[j] = false;
            mask_to_nodes(&mask)
        }
        PoolStrategy::PossibleDsep => {
            let mut mask = possible_dsep_mask(c_old, i);
            mask[i] = false;
            mask[j] = false;
            mask_to_nodes(&mask)
        }
        PoolStrategy::AllNodes => (0..p).filter(|&v| v != i && v != j).collect(),
    }
}

fn gamma_pool(c_old: &MixedGraph, i: NodeId, j: NodeId, gamma: usize) -> Vec<NodeId> {
    let di = c_old.bfs_distances(i, Some((i, j)));
    let dj = c_old.bfs_distances(j, Some((i, j)));
    (0..c_old.n_nodes())
        .filter(|&k| k != i && k != j && di[k] != usize::MAX && dj[k] != usize::MAX && di[k] + dj[k] <= gamma)
        .collect()
}

/// Possible-D-SEP of `i`: nodes reachable from `i` along paths on which
/// every interior node is a collider or forms a triangle with its path
/// neighbours. Searched over directed edge states, as is customary.
pub fn possible_dsep_mask(g: &MixedGraph, i: NodeId) -> Vec<bool> {
    let p = g.n_nodes();
    let mut reached = vec![false; p];
    // seen[prev * p + cur]
    let mut seen = vec![false; p * p];
    let mut queue: VecDeque<(NodeId, NodeId)> = VecDeque::new();
    for &v in g.neighbors(i) {
        reached[v] = true;
        seen[i * p + v] = true;
        queue.push_back((i, v));
    }
    while let Some((a, b)) = queue.pop_front() {
        for &c in g.neighbors(b) {
            if c == a || c == i || seen[b * p + c] {
                continue;
            }
            let collider = g.mark(b, a) == Some(Mark::Head) && g.mark(b, c) == Some(Mark::Head);
            if collider || g.is_adjacent(a, c) {
                seen[b * p + c] = true;
                reached[c] = true;
                queue.push_back((b, c));
            }
        }
    }
    reached[i] = false;
    reached
}
