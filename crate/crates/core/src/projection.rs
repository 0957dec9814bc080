//! Latent projection of DAGs onto MAGs and the maximally informative PAG.

use thiserror::Error;

use crate::discovery::{orient, ConflictPolicy, OrientMode, SepRecord};
use crate::mixed_graph::{nodes_to_mask, Mark, MixedGraph, NodeId};
use crate::separation::{dsep_set, is_maximal, m_connected, BRUTE_FORCE_MAX_NODES};

/// Largest DAG accepted by [`verify_pag`].
pub const VERIFY_MAX_NODES: usize = 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("input graph is not a DAG")]
    NotADag,
    #[error("graph has {0} nodes; limit is {1}")]
    GraphTooLarge(usize, usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid MAG: {0}")]
    InvalidMag(String),
}

/// Observed / latent / selection split of a DAG's nodes (each sorted).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub observed: Vec<NodeId>,
    pub latent: Vec<NodeId>,
    pub selection: Vec<NodeId>,
}

impl Partition {
    pub fn new(p: usize, latent: &[NodeId], selection: &[NodeId]) -> Result<Self, ProjectionError> {
        let mut role = vec![0u8; p];
        for (&v, tag) in latent.iter().map(|v| (v, 1u8)).chain(selection.iter().map(|v| (v, 2u8))) {
            if v >= p {
                return Err(ProjectionError::InvalidPartition(format!("node {v} out of range")));
            }
            if role[v] != 0 {
                return Err(ProjectionError::InvalidPartition(format!("node {v} listed twice")));
            }
            role[v] = tag;
        }
        let pick = |t: u8| (0..p).filter(|&v| role[v] == t).collect::<Vec<_>>();
        let part = Partition { observed: pick(0), latent: pick(1), selection: pick(2) };
        if part.observed.is_empty() {
            return Err(ProjectionError::InvalidPartition("no observed nodes".into()));
        }
        Ok(part)
    }

    pub fn all_observed(p: usize) -> Self {
        Partition { observed: (0..p).collect(), latent: Vec::new(), selection: Vec::new() }
    }

    pub fn n_nodes(&self) -> usize {
        self.observed.len() + self.latent.len() + self.selection.len()
    }
}

fn check_dag(dag: &MixedGraph, part: &Partition) -> Result<(), ProjectionError> {
    if !dag.is_dag() {
        return Err(ProjectionError::NotADag);
    }
    if part.n_nodes() != dag.n_nodes() {
        return Err(ProjectionError::InvalidPartition(format!(
            "partition covers {} nodes, graph has {}",
            part.n_nodes(),
            dag.n_nodes()
        )));
    }
    Ok(())
}

fn observed_labels(dag: &MixedGraph, part: &Partition) -> Vec<String> {
    part.observed.iter().map(|&v| dag.node_name(v)).collect()
}

/// Adds an edge between observed positions `a < b` with marks from the
/// ancestor relation in the DAG.
fn add_projected_edge(mag: &mut MixedGraph, dag: &MixedGraph, part: &Partition, a: usize, b: usize) {
    let (x, y) = (part.observed[a], part.observed[b]);
    let mark_at = |tip: NodeId, other: NodeId| {
        let mut seeds = part.selection.clone();
        seeds.push(other);
        if dag.ancestor_mask(&seeds)[tip] {
            Mark::Tail
        } else {
            Mark::Head
        }
    };
    mag.add_edge(a, b, mark_at(x, y), mark_at(y, x)).expect("fresh edge");
}

/// MAG over the observed nodes (re-indexed in ascending order).
///
/// Observed `i`, `j` are adjacent iff they are d-connected given
/// `(an({i, j} ∪ Z) ∩ X) \ {i, j} ∪ Z`; this set separates them whenever
/// any `Y ∪ Z` with `Y ⊆ X \ {i, j}` does.
pub fn latent_project(dag: &MixedGraph, part: &Partition) -> Result<MixedGraph, ProjectionError> {
    check_dag(dag, part)?;
    let q = part.observed.len();
    let observed_mask = nodes_to_mask(dag.n_nodes(), &part.observed);
    let mut mag = MixedGraph::new(q);
    for a in 0..q {
        for b in (a + 1)..q {
            let (x, y) = (part.observed[a], part.observed[b]);
            let mut seeds = part.selection.clone();
            seeds.extend([x, y]);
            let an = dag.ancestor_mask(&seeds);
            let cond: Vec<NodeId> = (0..dag.n_nodes())
                .filter(|&v| v != x && v != y && an[v] && observed_mask[v])
                .chain(part.selection.iter().copied())
                .collect();
            if m_connected(dag, x, y, &cond) {
                add_projected_edge(&mut mag, dag, part, a, b);
            }
        }
    }
    mag.set_labels(Some(observed_labels(dag, part)));
    Ok(mag)
}

/// Does some `Y ⊆ X \ {x, y}` make `x`, `y` d-separated given `Y ∪ Z`?
fn separable_by_subset(dag: &MixedGraph, part: &Partition, x: NodeId, y: NodeId) -> bool {
    let others: Vec<NodeId> = part.observed.iter().copied().filter(|&v| v != x && v != y).collect();
    (0..1u64 << others.len()).any(|bits| {
        let cond: Vec<NodeId> = others
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| (bits >> k & 1 == 1).then_some(v))
            .chain(part.selection.iter().copied())
            .collect();
        !m_connected(dag, x, y, &cond)
    })
}

/// [`latent_project`] by exhaustive subset search; test oracle.
pub fn latent_project_bruteforce(dag: &MixedGraph, part: &Partition) -> Result<MixedGraph, ProjectionError> {
    check_dag(dag, part)?;
    if dag.n_nodes() > BRUTE_FORCE_MAX_NODES {
        return Err(ProjectionError::GraphTooLarge(dag.n_nodes(), BRUTE_FORCE_MAX_NODES));
    }
    let q = part.observed.len();
    let mut mag = MixedGraph::new(q);
    for a in 0..q {
        for b in (a + 1)..q {
            if !separable_by_subset(dag, part, part.observed[a], part.observed[b]) {
                add_projected_edge(&mut mag, dag, part, a, b);
            }
        }
    }
    mag.set_labels(Some(observed_labels(dag, part)));
    Ok(mag)
}

/// A separator for every non-adjacent pair of a MAG.
pub fn mag_separators(mag: &MixedGraph) -> Result<SepRecord, ProjectionError> {
    let p = mag.n_nodes();
    let mut sep = SepRecord::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if mag.is_adjacent(i, j) {
                continue;
            }
            let an: Vec<NodeId> = mag.ancestors(&[i, j]).into_iter().filter(|&v| v != i && v != j).collect();
            let candidates = [
                an,
                dsep_set(mag, i, j).into_iter().filter(|&v| v != j).collect(),
                dsep_set(mag, j, i).into_iter().filter(|&v| v != i).collect(),
            ];
            match candidates.into_iter().find(|s| !m_connected(mag, i, j, s)) {
                Some(s) => sep.insert(i, j, &s),
                None => return Err(ProjectionError::InvalidMag(format!("{i} and {j} are not separable"))),
            }
        }
    }
    Ok(sep)
}

/// Maximally informative PAG of the Markov equivalence class of `mag`.
pub fn true_pag(mag: &MixedGraph) -> Result<MixedGraph, ProjectionError> {
    match mag.is_ancestral() {
        Ok(true) => {}
        Ok(false) => return Err(ProjectionError::InvalidMag("not ancestral".into())),
        Err(e) => return Err(ProjectionError::InvalidMag(e.to_string())),
    }
    if !is_maximal(mag).map_err(|e| ProjectionError::InvalidMag(e.to_string()))? {
        return Err(ProjectionError::InvalidMag("not maximal".into()));
    }
    let sep = mag_separators(mag)?;
    orient(&mag.skeleton(), &sep, OrientMode::Fci, ConflictPolicy::Error)
        .map(|o| o.pag)
        .map_err(|e| ProjectionError::InvalidMag(e.to_string()))
}

/// Brute-force check that `pag` (over the observed nodes) is consistent
/// with `dag` under `part`: adjacencies match subset separability, arrowheads
/// mark non-ancestors and tails mark ancestors.
pub fn verify_pag(pag: &MixedGraph, dag: &MixedGraph, part: &Partition) -> Result<bool, ProjectionError> {
    check_dag(dag, part)?;
    if dag.n_nodes() > VERIFY_MAX_NODES {
        return Err(ProjectionError::GraphTooLarge(dag.n_nodes(), VERIFY_MAX_NODES));
    }
    let q = part.observed.len();
    if pag.n_nodes() != q {
        return Ok(false);
    }
    for a in 0..q {
        for b in (a + 1)..q {
            let (x, y) = (part.observed[a], part.observed[b]);
            let separable = separable_by_subset(dag, part, x, y);
            if separable == pag.is_adjacent(a, b) {
                return Ok(false);
            }
            if separable {
                continue;
            }
            for (tip, at, other) in [(x, a, b), (y, b, a)] {
                let from = if tip == x { y } else { x };
                let mut seeds = part.selection.clone();
                seeds.push(from);
                let ancestor = dag.ancestor_mask(&seeds)[tip];
                match pag.mark(at, other) {
                    Some(Mark::Head) if ancestor => return Ok(false),
                    Some(Mark::Tail) if !ancestor => return Ok(false),
                    _ => {}
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use Mark::*;

    #[test]
    fn canonical_projections() {
        // x <- l -> y
        let dag = MixedGraph::from_directed(3, [(2, 0), (2, 1)]).unwrap();
        let part = Partition::new(3, &[2], &[]).unwrap();
        let mag = latent_project(&dag, &part).unwrap();
        assert!(mag.is_bidirected(0, 1));
        assert_eq!(mag, latent_project_bruteforce(&dag, &part).unwrap());
        // x -> s <- y with s selected
        let dag = MixedGraph::from_directed(3, [(0, 2), (1, 2)]).unwrap();
        let part = Partition::new(3, &[], &[2]).unwrap();
        let mag = latent_project(&dag, &part).unwrap();
        assert!(mag.is_undirected(0, 1));
        // identity
        let dag = MixedGraph::from_directed(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(latent_project(&dag, &Partition::all_observed(3)).unwrap(), dag);
    }

    #[test]
    fn projection_errors() {
        let bi = MixedGraph::from_edges(2, [(0, 1, Head, Head)]).unwrap();
        assert_eq!(latent_project(&bi, &Partition::all_observed(2)), Err(ProjectionError::NotADag));
        assert!(Partition::new(2, &[0, 1], &[]).is_err());
        assert!(Partition::new(2, &[0], &[0]).is_err());
    }

    #[test]
    fn true_pag_cases() {
        let bi = MixedGraph::from_edges(2, [(0, 1, Head, Head)]).unwrap();
        let pag = true_pag(&bi).unwrap();
        assert_eq!(pag.mark(0, 1), Some(Circle));
        assert_eq!(pag.mark(1, 0), Some(Circle));

        let vs = MixedGraph::from_directed(3, [(0, 2), (1, 2)]).unwrap();
        let pag = true_pag(&vs).unwrap();
        assert_eq!(pag.mark(2, 0), Some(Head));
        assert_eq!(pag.mark(0, 2), Some(Circle));
        assert_eq!(pag.mark(2, 1), Some(Head));

        let (g, n) = fixtures::discriminating_path_graph();
        let pag = true_pag(&g).unwrap();
        assert!(pag.is_directed(n["y"], n["j"]));

        let (nm, _) = fixtures::non_maximal_graph();
        assert!(matches!(true_pag(&nm), Err(ProjectionError::InvalidMag(_))));
    }

    #[test]
    fn verify_pag_cases() {
        // 0 -> 2 <- 1, 2 -> 3, latent 4 -> 0, 4 -> 3
        let dag = MixedGraph::from_directed(5, [(0, 2), (1, 2), (2, 3), (4, 0), (4, 3)]).unwrap();
        let part = Partition::new(5, &[4], &[]).unwrap();
        let mag = latent_project(&dag, &part).unwrap();
        let pag = true_pag(&mag).unwrap();
        assert!(verify_pag(&pag, &dag, &part).unwrap());
        assert!(verify_pag(&mag, &dag, &part).unwrap());
        // 2 is an ancestor of 3, so an arrowhead at 2 on (2, 3) is wrong
        let mut bad = pag.clone();
        bad.set_mark(2, 3, Head);
        assert!(!verify_pag(&bad, &dag, &part).unwrap());
        assert!(!verify_pag(&MixedGraph::new(4), &dag, &part).unwrap());
    }
}
