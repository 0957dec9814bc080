//! End-to-end discovery pipelines.

use std::ops::ControlFlow;

use nalgebra::DMatrix;
use thiserror::Error;

use super::orient::{orient, orient_v_structures, ConflictPolicy, OrientError, OrientMode};
use super::pool::{pool, possible_dsep_mask, PoolStrategy};
use super::skeleton::{skeleton_search, Eta, SkeletonOptions};
use super::{RunStats, SepRecord};
use crate::citest::{CiError, CiTester, CovEstimate};
use crate::mixed_graph::{mask_to_nodes, Mark, MixedGraph, NodeId};
use crate::subsets::for_each_subset;

/// Node count above which [`fci`] needs `allow_large`.
pub const FCI_DEFAULT_MAX_NODES: usize = 40;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("test of {i} vs {j} given {s:?} failed: {source}")]
    Tester {
        i: NodeId,
        j: NodeId,
        s: Vec<NodeId>,
        #[source]
        source: CiError,
    },
    #[error(transparent)]
    Orient(#[from] OrientError),
    #[error("graph has {found} nodes, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("FCI with possible-D-SEP search on {0} nodes needs an explicit override (limit {FCI_DEFAULT_MAX_NODES})")]
    TooLargeForFci(usize),
    #[error("covariance plus ridge is not positive definite")]
    SingularAfterRidge,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Output of a pipeline: the (partially) oriented graph, separators, stats.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub graph: MixedGraph,
    pub sep: SepRecord,
    pub stats: RunStats,
}

fn policy_for(tester: &CiTester) -> ConflictPolicy {
    if tester.is_oracle() {
        ConflictPolicy::Error
    } else {
        ConflictPolicy::Keep
    }
}

/// Default locality `⌈ln p⌉` (at least 1).
pub fn default_gamma(p: usize) -> usize {
    ((p.max(2) as f64).ln().ceil() as usize).max(1)
}

/// lFCI: Gamma(γ)-pool skeleton search up to level η, then orientation
/// with the local discriminating-path rule.
pub fn lfci(tester: &CiTester, p: usize, eta: usize, gamma: usize) -> Result<RunOutput, DiscoveryError> {
    if gamma == 0 {
        return Err(DiscoveryError::InvalidParameter("gamma must be at least 1".into()));
    }
    let opts = SkeletonOptions::new(PoolStrategy::Gamma(gamma), Eta::Bounded(eta));
    let (skel, sep, mut stats) = skeleton_search(tester, p, &opts)?;
    let o = orient(&skel, &sep, OrientMode::LfciLocal(gamma), policy_for(tester))?;
    stats.orientation_conflicts = o.conflicts;
    Ok(RunOutput { graph: o.pag, sep, stats })
}

/// lFCI started from an (estimated) moral graph, levels `0..=η−1`.
///
/// Pairs already non-adjacent in `moral` get `adj(i) ∪ adj(j)` in the moral
/// graph as their separator record: outside each other's Markov blanket, no
/// common neighbour can be a collider.
pub fn lfci_mb(
    tester: &CiTester,
    p: usize,
    eta: usize,
    gamma: usize,
    moral: &MixedGraph,
) -> Result<RunOutput, DiscoveryError> {
    if gamma == 0 || eta == 0 {
        return Err(DiscoveryError::InvalidParameter("lfci_mb needs eta >= 1 and gamma >= 1".into()));
    }
    if moral.n_nodes() != p {
        return Err(DiscoveryError::SizeMismatch { expected: p, found: moral.n_nodes() });
    }
    let mut opts = SkeletonOptions::new(PoolStrategy::Gamma(gamma), Eta::Bounded(eta - 1));
    opts.initial = Some(moral.skeleton());
    let (skel, mut sep, mut stats) = skeleton_search(tester, p, &opts)?;
    for i in 0..p {
        for j in (i + 1)..p {
            if moral.is_adjacent(i, j) {
                continue;
            }
            let mut s: Vec<NodeId> =
                moral.neighbors(i).iter().chain(moral.neighbors(j)).copied().filter(|&v| v != i && v != j).collect();
            s.sort_unstable();
            s.dedup();
            sep.insert(i, j, &s);
        }
    }
    let o = orient(&skel, &sep, OrientMode::LfciLocal(gamma), policy_for(tester))?;
    stats.orientation_conflicts = o.conflicts;
    Ok(RunOutput { graph: o.pag, sep, stats })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FciOptions {
    /// Permit possible-D-SEP search above [`FCI_DEFAULT_MAX_NODES`] nodes.
    pub allow_large: bool,
    /// Largest conditioning set tried in the possible-D-SEP phase;
    /// unbounded when `None`.
    pub max_pdsep_size: Option<usize>,
}

/// FCI: neighbourhood skeleton, v-structures, possible-D-SEP re-testing,
/// then full orientation with the standard rules.
pub fn fci(tester: &CiTester, p: usize, opts: FciOptions) -> Result<RunOutput, DiscoveryError> {
    if p > FCI_DEFAULT_MAX_NODES && !opts.allow_large {
        return Err(DiscoveryError::TooLargeForFci(p));
    }
    let policy = policy_for(tester);
    let phase1 = SkeletonOptions::new(PoolStrategy::Neighborhood, Eta::Unbounded);
    let (mut skel, mut sep, mut stats) = skeleton_search(tester, p, &phase1)?;

    let partial = orient_v_structures(&skel, &sep, policy)?.pag;
    let pdsep: Vec<Vec<NodeId>> = (0..p).map(|v| mask_to_nodes(&possible_dsep_mask(&partial, v))).collect();
    let phase1_skel = skel.clone();
    let mut removed_phase2 = 0;
    for e in phase1_skel.edges() {
        let (i, j) = (e.a, e.b);
        let covered = pool(PoolStrategy::Neighborhood, &phase1_skel, i, j);
        let already_tested = |s: &[NodeId]| s.iter().all(|v| covered.binary_search(v).is_ok());
        'sides: for (a, b) in [(i, j), (j, i)] {
            let candidates: Vec<NodeId> = pdsep[a].iter().copied().filter(|&v| v != b).collect();
            let cap = opts.max_pdsep_size.unwrap_or(usize::MAX).min(candidates.len());
            for size in 1..=cap {
                let mut found = None;
                let mut failure = None;
                let mut tests = 0u64;
                let _ = for_each_subset(&candidates, size, |s| {
                    if already_tested(s) {
                        return ControlFlow::Continue(());
                    }
                    tests += 1;
                    match tester.decide(i, j, s) {
                        Ok(true) => {
                            found = Some(s.to_vec());
                            ControlFlow::Break(())
                        }
                        Ok(false) => ControlFlow::Continue(()),
                        Err(err) => {
                            failure = Some(DiscoveryError::Tester { i, j, s: s.to_vec(), source: err });
                            ControlFlow::Break(())
                        }
                    }
                });
                if let Some(err) = failure {
                    return Err(err);
                }
                if tests > 0 {
                    stats.m_reach = stats.m_reach.max(size);
                }
                stats.n_tests += tests;
                if let Some(s) = found {
                    skel.remove_edge(i, j);
                    sep.insert(i, j, &s);
                    removed_phase2 += 1;
                    break 'sides;
                }
            }
        }
    }
    stats.edges_removed_per_level.push(removed_phase2);
    let o = orient(&skel, &sep, OrientMode::Fci, policy)?;
    stats.orientation_conflicts = o.conflicts;
    Ok(RunOutput { graph: o.pag, sep, stats })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcVariant {
    /// Neighbourhood pools, unbounded.
    Standard,
    /// All-node pools up to the given level (rPC).
    Reduced(usize),
}

/// PC / rPC: skeleton search then Meek orientation to a CPDAG. Undirected
/// edges are `---`, directed edges `-->`.
pub fn pc(tester: &CiTester, p: usize, variant: PcVariant) -> Result<RunOutput, DiscoveryError> {
    let opts = match variant {
        PcVariant::Standard => SkeletonOptions::new(PoolStrategy::Neighborhood, Eta::Unbounded),
        PcVariant::Reduced(eta) => SkeletonOptions::new(PoolStrategy::AllNodes, Eta::Bounded(eta)),
    };
    let (skel, sep, mut stats) = skeleton_search(tester, p, &opts)?;
    let (cpdag, conflicts) = meek_orient(&skel, &sep);
    stats.orientation_conflicts = conflicts;
    Ok(RunOutput { graph: cpdag, sep, stats })
}

fn is_undirected(g: &MixedGraph, a: NodeId, b: NodeId) -> bool {
    g.mark(a, b) == Some(Mark::Tail) && g.mark(b, a) == Some(Mark::Tail)
}

fn direct(g: &mut MixedGraph, a: NodeId, b: NodeId) {
    g.set_mark(b, a, Mark::Head);
}

/// v-structures followed by Meek's rules 1–3. Returns the CPDAG and the
/// number of v-structure orientations skipped because the edge was already
/// directed the other way.
pub fn meek_orient(skel: &MixedGraph, sep: &SepRecord) -> (MixedGraph, usize) {
    let p = skel.n_nodes();
    let mut g = skel.skeleton();
    let mut conflicts = 0;
    for k in 0..p {
        let nb = g.neighbors(k).to_vec();
        for (x, &a) in nb.iter().enumerate() {
            for &b in &nb[x + 1..] {
                if g.is_adjacent(a, b) || sep.separates_with(a, b, k) != Some(false) {
                    continue;
                }
                for v in [a, b] {
                    if is_undirected(&g, v, k) {
                        direct(&mut g, v, k);
                    } else if !g.is_directed(v, k) {
                        conflicts += 1;
                    }
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for b in 0..p {
            let nb = g.neighbors(b).to_vec();
            for &c in &nb {
                if !is_undirected(&g, b, c) {
                    continue;
                }
                // R1: a -> b - c, a and c non-adjacent
                let r1 = nb.iter().any(|&a| a != c && g.is_directed(a, b) && !g.is_adjacent(a, c));
                // R2: b -> a -> c
                let r2 = nb.iter().any(|&a| a != c && g.is_directed(b, a) && g.is_directed(a, c));
                // R3: b - x -> c, b - y -> c, x and y non-adjacent
                let kites: Vec<NodeId> =
                    nb.iter().copied().filter(|&x| x != c && is_undirected(&g, b, x) && g.is_directed(x, c)).collect();
                let r3 = kites.iter().enumerate().any(|(t, &x)| kites[t + 1..].iter().any(|&y| !g.is_adjacent(x, y)));
                if r1 || r2 || r3 {
                    direct(&mut g, b, c);
                    changed = true;
                }
            }
        }
        if !changed {
            return (g, conflicts);
        }
    }
}

/// Support of the ridge-regularized precision matrix:
/// `i − j` iff `|Θ_ij| > τ·√(Θ_ii Θ_jj)`.
pub fn estimate_moral_graph(est: &CovEstimate, ridge: f64, tau: f64) -> Result<MixedGraph, DiscoveryError> {
    let p = est.sigma_hat.nrows();
    let m = &est.sigma_hat + DMatrix::identity(p, p) * ridge;
    let theta = m.cholesky().ok_or(DiscoveryError::SingularAfterRidge)?.inverse();
    let mut g = MixedGraph::new(p);
    for i in 0..p {
        for j in (i + 1)..p {
            if theta[(i, j)].abs() > tau * (theta[(i, i)] * theta[(j, j)]).sqrt() {
                g.add_edge(i, j, Mark::Tail, Mark::Tail).expect("fresh edge");
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, ids};
    use crate::separation::moral_graph;
    use Mark::*;

    #[test]
    fn lfci_on_search_pool_graph() {
        let (g, n) = fixtures::search_pool_graph();
        for gamma in [3, 4] {
            let t = CiTester::local_oracle(g.clone(), gamma);
            let out = lfci(&t, g.n_nodes(), 2, gamma).unwrap();
            assert_eq!(out.graph.skeleton(), g.skeleton());
            assert_eq!(out.sep.get(n["1"], n["8"]).unwrap(), ids(&n, &["4", "5"]).as_slice());
            assert!(out.stats.m_reach <= 2);
        }
    }

    #[test]
    fn fci_on_search_pool_graph_uses_full_separators() {
        let (g, n) = fixtures::search_pool_graph();
        let t = CiTester::graph_oracle(g.clone());
        let out = fci(&t, g.n_nodes(), FciOptions::default()).unwrap();
        assert_eq!(out.graph.skeleton(), g.skeleton());
        let s = out.sep.get(n["1"], n["8"]).unwrap();
        assert!(crate::separation::m_separated(&g, n["1"], n["8"], s).unwrap());
        assert!(s.len() >= 3);
    }

    #[test]
    fn independence_everywhere() {
        let t = CiTester::gauss_oracle(DMatrix::identity(4, 4), 1e-9);
        assert_eq!(lfci(&t, 4, 3, 2).unwrap().graph.n_edges(), 0);
        assert_eq!(fci(&t, 4, FciOptions::default()).unwrap().graph.n_edges(), 0);
        assert_eq!(pc(&t, 4, PcVariant::Standard).unwrap().graph.n_edges(), 0);
        let t = CiTester::graph_oracle(MixedGraph::new(4));
        let out = lfci_mb(&t, 4, 3, 2, &MixedGraph::new(4)).unwrap();
        assert_eq!(out.graph.n_edges(), 0);
        assert_eq!(out.stats.n_tests, 0);
        assert_eq!(t.count(), 0);
    }

    #[test]
    fn lfci_mb_with_true_moral_graph() {
        let (g, _) = fixtures::search_pool_graph();
        let t = CiTester::local_oracle(g.clone(), 4);
        let out = lfci_mb(&t, g.n_nodes(), 3, 4, &moral_graph(&g, None)).unwrap();
        assert_eq!(out.graph.skeleton(), g.skeleton());
        assert!(out.stats.m_reach <= 2);
    }

    #[test]
    fn pc_chain_and_collider() {
        let chain = MixedGraph::from_directed(3, [(0, 1), (1, 2)]).unwrap();
        let out = pc(&CiTester::graph_oracle(chain), 3, PcVariant::Standard).unwrap();
        assert!(is_undirected(&out.graph, 0, 1) && is_undirected(&out.graph, 1, 2));
        assert!(!out.graph.is_adjacent(0, 2));
        let vs = MixedGraph::from_directed(3, [(0, 2), (1, 2)]).unwrap();
        let out = pc(&CiTester::graph_oracle(vs.clone()), 3, PcVariant::Reduced(1)).unwrap();
        assert_eq!(out.graph, vs);
    }

    #[test]
    fn meek_rule_one_propagates() {
        let dag = MixedGraph::from_directed(4, [(0, 2), (1, 2), (2, 3)]).unwrap();
        let out = pc(&CiTester::graph_oracle(dag.clone()), 4, PcVariant::Standard).unwrap();
        assert_eq!(out.graph, dag);
    }

    #[test]
    fn moral_graph_estimate_of_v_structure() {
        // 0 -> 2 <- 1 with unit weights and noise
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 3.0]);
        let est = CovEstimate { sigma_hat: sigma, n: 1000 };
        let g = estimate_moral_graph(&est, 0.0, 0.01).unwrap();
        assert_eq!(g.n_edges(), 3);
        let diag = CovEstimate { sigma_hat: DMatrix::from_diagonal_element(3, 3, 2.0), n: 10 };
        assert_eq!(estimate_moral_graph(&diag, 0.0, 1e-6).unwrap().n_edges(), 0);
        let singular = CovEstimate { sigma_hat: DMatrix::zeros(2, 2), n: 10 };
        assert!(matches!(estimate_moral_graph(&singular, 0.0, 0.1), Err(DiscoveryError::SingularAfterRidge)));
    }

    #[test]
    fn discriminating_path_pipelines() {
        let (g, n) = fixtures::discriminating_path_graph();
        let fci_out = fci(&CiTester::graph_oracle(g.clone()), g.n_nodes(), FciOptions::default()).unwrap();
        assert!(fci_out.graph.is_directed(n["y"], n["j"]));
        let l = lfci(&CiTester::local_oracle(g.clone(), 5), g.n_nodes(), 6, 5).unwrap();
        assert_eq!(l.graph.mark(n["y"], n["j"]), Some(Circle));
        assert_eq!(l.graph.mark(n["j"], n["y"]), Some(Head));
    }
}
