//! m-separation, local graphs and local-graph separators, Markov blankets
//! and moral graphs.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::mixed_graph::{mask_to_nodes, nodes_to_mask, GraphError, Mark, MixedGraph, NodeId};
use crate::subsets::for_each_subset;

/// Node count above which the brute-force oracles refuse to run.
pub const BRUTE_FORCE_MAX_NODES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeparationError {
    #[error("conditioning set contains an endpoint ({0})")]
    InvalidConditioningSet(NodeId),
    #[error("graph has {0} nodes; brute force is limited to {1}")]
    GraphTooLarge(usize, usize),
    #[error("nodes {0} and {1} are adjacent")]
    AdjacentPair(NodeId, NodeId),
    #[error("minimum local separator of ({0}, {1}) exceeds the cap {2}")]
    CapExceeded(NodeId, NodeId, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `i ⟂ j | S` in the ancestral graph `g` (m-separation).
///
/// Reachability over (node, entered-with-arrowhead) states: a walk may pass
/// a non-collider outside `S` and a collider that is an ancestor of `S`.
pub fn m_separated(g: &MixedGraph, i: NodeId, j: NodeId, s: &[NodeId]) -> Result<bool, SeparationError> {
    if let Some(&bad) = s.iter().find(|&&v| v == i || v == j) {
        return Err(SeparationError::InvalidConditioningSet(bad));
    }
    Ok(!m_connected(g, i, j, s))
}

pub(crate) fn m_connected(g: &MixedGraph, i: NodeId, j: NodeId, s: &[NodeId]) -> bool {
    let p = g.n_nodes();
    let in_s = nodes_to_mask(p, s);
    let an_s = g.ancestor_mask(s);
    // visited[2 * v + head_in]
    let mut visited = vec![false; 2 * p];
    let mut queue: VecDeque<(NodeId, bool)> = VecDeque::new();
    for &v in g.neighbors(i) {
        let head = g.mark(v, i) == Some(Mark::Head);
        if v == j {
            return true;
        }
        if !visited[2 * v + head as usize] {
            visited[2 * v + head as usize] = true;
            queue.push_back((v, head));
        }
    }
    while let Some((v, head_in)) = queue.pop_front() {
        for &w in g.neighbors(v) {
            let collider = head_in && g.mark(v, w) == Some(Mark::Head);
            let passable = if collider { an_s[v] } else { !in_s[v] };
            if !passable {
                continue;
            }
            if w == j {
                return true;
            }
            let head = g.mark(w, v) == Some(Mark::Head);
            let key = 2 * w + head as usize;
            if !visited[key] {
                visited[key] = true;
                queue.push_back((w, head));
            }
        }
    }
    false
}

/// m-separation by enumerating every simple path and applying the blocking
/// rules literally. Test oracle for [`m_separated`].
pub fn m_separated_bruteforce(g: &MixedGraph, i: NodeId, j: NodeId, s: &[NodeId]) -> Result<bool, SeparationError> {
    let p = g.n_nodes();
    if p > BRUTE_FORCE_MAX_NODES {
        return Err(SeparationError::GraphTooLarge(p, BRUTE_FORCE_MAX_NODES));
    }
    if let Some(&bad) = s.iter().find(|&&v| v == i || v == j) {
        return Err(SeparationError::InvalidConditioningSet(bad));
    }
    let in_s = nodes_to_mask(p, s);
    let mut connected = false;
    g.for_each_simple_path(i, j, None, None, |path| {
        let open = (1..path.len() - 1).all(|t| {
            let (a, c, b) = (path[t - 1], path[t], path[t + 1]);
            if g.is_collider(a, c, b) {
                g.descendants(&[c]).iter().any(|&d| in_s[d])
            } else {
                !in_s[c]
            }
        });
        if open {
            connected = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(!connected)
}

/// Nodes lying on some simple path of at most `gamma` edges between `i`
/// and `j`, as a mask. `i` and `j` are always included.
pub fn local_node_mask(g: &MixedGraph, i: NodeId, j: NodeId, gamma: usize) -> Vec<bool> {
    let p = g.n_nodes();
    let mut mask = vec![false; p];
    mask[i] = true;
    mask[j] = true;
    // Nodes that can possibly qualify: d(i,v) + d(v,j) <= gamma.
    let di = g.bfs_distances(i, Some((i, j)));
    let dj = g.bfs_distances(j, Some((i, j)));
    let candidate = |v: NodeId| di[v] != usize::MAX && dj[v] != usize::MAX && di[v] + dj[v] <= gamma;
    let n_candidates = (0..p).filter(|&v| v != i && v != j && candidate(v)).count();
    if n_candidates == 0 {
        return mask;
    }
    let within: Vec<bool> = (0..p).map(|v| v == i || v == j || candidate(v)).collect();
    let mut found = 0usize;
    let _ = g.for_each_simple_path(i, j, Some(gamma), Some(&within), |path| {
        for &v in &path[1..path.len() - 1] {
            if !mask[v] {
                mask[v] = true;
                found += 1;
            }
        }
        if found == n_candidates {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    mask
}

/// The γ-local graph `G_γ(i, j)`: the subgraph induced by nodes on paths of
/// length at most γ between `i` and `j`. The induced graph keeps the parent's
/// node indexing; nodes outside the local set are isolated.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub anchor: (NodeId, NodeId),
    pub gamma: usize,
    pub nodes: Vec<NodeId>,
    pub mask: Vec<bool>,
    pub induced: MixedGraph,
}

impl LocalGraph {
    pub fn contains(&self, v: NodeId) -> bool {
        self.mask[v]
    }

    /// Does `s` m-separate the anchor pair inside the local graph?
    /// Members of `s` outside the local graph are isolated there and have
    /// no effect.
    pub fn separates(&self, s: &[NodeId]) -> bool {
        let (i, j) = self.anchor;
        !m_connected(&self.induced, i, j, s)
    }
}

pub fn local_graph(g: &MixedGraph, i: NodeId, j: NodeId, gamma: usize) -> LocalGraph {
    assert!(i != j, "local graph needs two distinct nodes");
    assert!(gamma >= 1, "gamma must be at least 1");
    let mask = local_node_mask(g, i, j, gamma);
    let induced = g.induced(&mask);
    LocalGraph { anchor: (i, j), gamma, nodes: mask_to_nodes(&mask), mask, induced }
}

/// `|P_γ(G, i, j)|`: number of simple paths of at most `gamma` edges.
pub fn count_short_paths(skel: &MixedGraph, i: NodeId, j: NodeId, gamma: usize) -> usize {
    let mut count = 0;
    let _ = skel.for_each_simple_path(i, j, Some(gamma), None, |_| {
        count += 1;
        ControlFlow::Continue(())
    });
    count
}

/// Every non-adjacent pair has at most `eta` simple paths of length ≤ `gamma`.
pub fn has_local_path_property(skel: &MixedGraph, eta: usize, gamma: usize) -> bool {
    let p = skel.n_nodes();
    for i in 0..p {
        for j in (i + 1)..p {
            if skel.is_adjacent(i, j) {
                continue;
            }
            let mut count = 0;
            let _ = skel.for_each_simple_path(i, j, Some(gamma), None, |_| {
                count += 1;
                if count > eta {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if count > eta {
                return false;
            }
        }
    }
    true
}

/// Smallest `eta` for which the skeleton has the `(eta, gamma)` local path
/// property (0 when no non-adjacent pair is joined by a short path).
pub fn local_path_count(skel: &MixedGraph, gamma: usize) -> usize {
    let p = skel.n_nodes();
    let mut worst = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if !skel.is_adjacent(i, j) {
                worst = worst.max(count_short_paths(skel, i, j, gamma));
            }
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeparatorQuery {
    pub i: NodeId,
    pub j: NodeId,
    /// `None` means unbounded: every simple path counts.
    pub gamma: Option<usize>,
    /// Largest separator size searched.
    pub eta: usize,
}

fn resolve_gamma(g: &MixedGraph, gamma: Option<usize>) -> usize {
    gamma.unwrap_or(g.n_nodes().max(1))
}

/// A minimum-cardinality γ-local-graph separator of size at most `eta`.
///
/// Candidates are subsets of `V_γ(i,j) \ {i,j}`, tried by size and then
/// lexicographically, so ties resolve deterministically.
pub fn find_local_separator(g: &MixedGraph, q: SeparatorQuery) -> Result<Option<Vec<NodeId>>, SeparationError> {
    if g.is_adjacent(q.i, q.j) {
        return Err(SeparationError::AdjacentPair(q.i, q.j));
    }
    let lg = local_graph(g, q.i, q.j, resolve_gamma(g, q.gamma));
    Ok(min_separator_in(&lg, q.eta))
}

fn min_separator_in(lg: &LocalGraph, eta: usize) -> Option<Vec<NodeId>> {
    let (i, j) = lg.anchor;
    let pool: Vec<NodeId> = lg.nodes.iter().copied().filter(|&v| v != i && v != j).collect();
    for size in 0..=eta.min(pool.len()) {
        let mut found = None;
        let _ = for_each_subset(&pool, size, |s| {
            if lg.separates(s) {
                found = Some(s.to_vec());
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Every γ-local-graph separator of `(i, j)` with at most `eta` nodes.
pub fn local_separators(g: &MixedGraph, i: NodeId, j: NodeId, gamma: usize, eta: usize) -> Vec<Vec<NodeId>> {
    let lg = local_graph(g, i, j, gamma);
    let pool: Vec<NodeId> = lg.nodes.iter().copied().filter(|&v| v != i && v != j).collect();
    let mut out = Vec::new();
    for size in 0..=eta.min(pool.len()) {
        let _ = for_each_subset(&pool, size, |s| {
            if lg.separates(s) {
                out.push(s.to_vec());
            }
            ControlFlow::Continue(())
        });
    }
    out
}

fn max_min_separator(
    g: &MixedGraph,
    gamma: usize,
    eta_cap: usize,
    include: impl Fn(NodeId, NodeId) -> bool,
) -> Result<usize, SeparationError> {
    let p = g.n_nodes();
    if p > BRUTE_FORCE_MAX_NODES {
        return Err(SeparationError::GraphTooLarge(p, BRUTE_FORCE_MAX_NODES));
    }
    let mut worst = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if g.is_adjacent(i, j) || !include(i, j) {
                continue;
            }
            let lg = local_graph(g, i, j, gamma);
            match min_separator_in(&lg, eta_cap) {
                Some(s) => worst = worst.max(s.len()),
                None => return Err(SeparationError::CapExceeded(i, j, eta_cap)),
            }
        }
    }
    Ok(worst)
}

/// `L(G, γ)`: the largest minimum local-separator size over non-adjacent pairs.
pub fn l_gamma(g: &MixedGraph, gamma: usize, eta_cap: usize) -> Result<usize, SeparationError> {
    max_min_separator(g, gamma, eta_cap, |_, _| true)
}

/// `L^mb(G, γ)`: as [`l_gamma`] but only over pairs in each other's
/// γ-local Markov blanket.
pub fn l_mb(g: &MixedGraph, gamma: usize, eta_cap: usize) -> Result<usize, SeparationError> {
    let blankets: Vec<Vec<bool>> =
        (0..g.n_nodes()).map(|v| nodes_to_mask(g.n_nodes(), &markov_blanket(g, v, Some(gamma)))).collect();
    max_min_separator(g, gamma, eta_cap, |i, j| blankets[j][i])
}

/// Nodes reachable from `start` along collider paths of at most `cap` edges
/// whose every node passes `allowed`. Returns a mask (start excluded).
fn collider_reach(g: &MixedGraph, start: NodeId, cap: usize, allowed: impl Fn(NodeId) -> bool) -> Vec<bool> {
    let p = g.n_nodes();
    let mut reached = vec![false; p];
    // Only states entered with an arrowhead can be extended.
    let mut extend_seen = vec![false; p];
    let mut queue: VecDeque<(NodeId, usize)> = VecDeque::new();
    for &v in g.neighbors(start) {
        if !allowed(v) {
            continue;
        }
        reached[v] = true;
        if g.mark(v, start) == Some(Mark::Head) && !extend_seen[v] {
            extend_seen[v] = true;
            queue.push_back((v, 1));
        }
    }
    while let Some((v, d)) = queue.pop_front() {
        if d >= cap {
            continue;
        }
        for &w in g.neighbors(v) {
            if w == start || !allowed(w) || g.mark(v, w) != Some(Mark::Head) {
                continue;
            }
            reached[w] = true;
            if g.mark(w, v) == Some(Mark::Head) && !extend_seen[w] {
                extend_seen[w] = true;
                queue.push_back((w, d + 1));
            }
        }
    }
    reached[start] = false;
    reached
}

/// `mb_γ(G, i)`: nodes joined to `i` by an edge or by a collider path of at
/// most `gamma` edges. `None` gives the full Markov blanket.
pub fn markov_blanket(g: &MixedGraph, i: NodeId, gamma: Option<usize>) -> Vec<NodeId> {
    let cap = gamma.unwrap_or(g.n_nodes());
    mask_to_nodes(&collider_reach(g, i, cap, |_| true))
}

/// Undirected graph joining every node to its (γ-local) Markov blanket.
pub fn moral_graph(g: &MixedGraph, gamma: Option<usize>) -> MixedGraph {
    let p = g.n_nodes();
    let mut m = MixedGraph::new(p);
    for i in 0..p {
        for j in markov_blanket(g, i, gamma) {
            if !m.is_adjacent(i, j) {
                m.add_edge(i, j, Mark::Tail, Mark::Tail).expect("fresh edge");
            }
        }
    }
    m
}

/// `D-SEP(i, j)`: nodes `v ≠ i` joined to `i` by a collider path whose nodes
/// all lie in `an({i, j})`.
pub fn dsep_set(g: &MixedGraph, i: NodeId, j: NodeId) -> Vec<NodeId> {
    let an = g.ancestor_mask(&[i, j]);
    mask_to_nodes(&collider_reach(g, i, g.n_nodes(), |v| an[v]))
}

/// Maximality of an ancestral graph via the D-SEP criterion: every
/// non-adjacent pair is separated by `D-SEP(i,j) \ {j}` or `D-SEP(j,i) \ {i}`.
pub fn is_maximal(g: &MixedGraph) -> Result<bool, SeparationError> {
    let p = g.n_nodes();
    for i in 0..p {
        for j in (i + 1)..p {
            if g.is_adjacent(i, j) {
                continue;
            }
            let s1: Vec<NodeId> = dsep_set(g, i, j).into_iter().filter(|&v| v != j).collect();
            if !m_connected(g, i, j, &s1) {
                continue;
            }
            let s2: Vec<NodeId> = dsep_set(g, j, i).into_iter().filter(|&v| v != i).collect();
            if !m_connected(g, i, j, &s2) {
                continue;
            }
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest graph accepted by [`is_maximal_bruteforce`].
pub const ALL_SUBSET_MAX_NODES: usize = 12;

/// Maximality by trying every conditioning subset. Oracle for [`is_maximal`].
pub fn is_maximal_bruteforce(g: &MixedGraph) -> Result<bool, SeparationError> {
    let p = g.n_nodes();
    if p > ALL_SUBSET_MAX_NODES {
        return Err(SeparationError::GraphTooLarge(p, ALL_SUBSET_MAX_NODES));
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if g.is_adjacent(i, j) {
                continue;
            }
            let others: Vec<NodeId> = (0..p).filter(|&v| v != i && v != j).collect();
            let separable = (0..1u32 << others.len()).any(|bits| {
                let s: Vec<NodeId> =
                    others.iter().enumerate().filter_map(|(k, &v)| (bits >> k & 1 == 1).then_some(v)).collect();
                !m_connected(g, i, j, &s)
            });
            if !separable {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
