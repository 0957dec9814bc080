//! Comparison metrics between estimated and true graphs.

use crate::mixed_graph::MixedGraph;

use super::SimError;

/// Skeleton counts and derived precision/recall.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// 1 when nothing is predicted.
    pub precision: f64,
    /// 1 when the truth has no edges.
    pub recall: f64,
}

impl Metrics {
    pub fn f1(&self) -> f64 {
        if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        }
    }
}

fn check_sizes(est: &MixedGraph, truth: &MixedGraph) -> Result<(), SimError> {
    if est.n_nodes() != truth.n_nodes() {
        return Err(SimError::SizeMismatch { expected: truth.n_nodes(), found: est.n_nodes() });
    }
    Ok(())
}

pub fn skeleton_metrics(est: &MixedGraph, truth: &MixedGraph) -> Result<Metrics, SimError> {
    check_sizes(est, truth)?;
    let p = est.n_nodes();
    let mut m = Metrics::default();
    for a in 0..p {
        for b in (a + 1)..p {
            match (est.is_adjacent(a, b), truth.is_adjacent(a, b)) {
                (true, true) => m.true_positives += 1,
                (true, false) => m.false_positives += 1,
                (false, true) => m.false_negatives += 1,
                (false, false) => {}
            }
        }
    }
    let predicted = m.true_positives + m.false_positives;
    let actual = m.true_positives + m.false_negatives;
    m.precision = if predicted == 0 { 1.0 } else { m.true_positives as f64 / predicted as f64 };
    m.recall = if actual == 0 { 1.0 } else { m.true_positives as f64 / actual as f64 };
    Ok(m)
}

/// Adjacency mismatches, shared edges with a mark mismatch, and the
/// number of differing marks on shared edges.
fn counts(est: &MixedGraph, truth: &MixedGraph) -> (usize, usize, usize) {
    let p = est.n_nodes();
    let (mut adjacency, mut edges_with_diff, mut marks) = (0, 0, 0);
    for a in 0..p {
        for b in (a + 1)..p {
            match (est.is_adjacent(a, b), truth.is_adjacent(a, b)) {
                (true, true) => {
                    let d = usize::from(est.mark(a, b) != truth.mark(a, b))
                        + usize::from(est.mark(b, a) != truth.mark(b, a));
                    if d > 0 {
                        edges_with_diff += 1;
                    }
                    marks += d;
                }
                (false, false) => {}
                _ => adjacency += 1,
            }
        }
    }
    (adjacency, edges_with_diff, marks)
}

/// `(shd, edge_mark_diff)`.
pub fn shd_and_marks(est: &MixedGraph, truth: &MixedGraph) -> Result<(usize, usize), SimError> {
    check_sizes(est, truth)?;
    let (adj, edges, marks) = counts(est, truth);
    Ok((adj + edges, marks))
}

/// Additions and deletions cost 1; a shared edge costs 0.5 per differing mark.
pub fn dshd(est: &MixedGraph, truth: &MixedGraph) -> Result<f64, SimError> {
    check_sizes(est, truth)?;
    let (adj, _, marks) = counts(est, truth);
    Ok(adj as f64 + 0.5 * marks as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixed_graph::Mark::*;

    fn g(edges: &[(usize, usize, crate::Mark, crate::Mark)]) -> MixedGraph {
        MixedGraph::from_edges(4, edges.iter().copied()).unwrap()
    }

    #[test]
    fn skeleton_examples() {
        let truth = g(&[(0, 1, Tail, Head), (1, 2, Tail, Head)]);
        let m = skeleton_metrics(&truth, &truth).unwrap();
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
        let empty = skeleton_metrics(&MixedGraph::new(4), &truth).unwrap();
        assert_eq!((empty.precision, empty.recall), (1.0, 0.0));
        let full = skeleton_metrics(&MixedGraph::complete(4, Circle), &truth).unwrap();
        assert_eq!((full.precision, full.recall), (2.0 / 6.0, 1.0));
        assert!(matches!(skeleton_metrics(&MixedGraph::new(3), &truth), Err(SimError::SizeMismatch { .. })));
    }

    #[test]
    fn shd_examples() {
        let a = g(&[(0, 1, Tail, Head)]);
        assert_eq!(shd_and_marks(&a, &a).unwrap(), (0, 0));
        assert_eq!(shd_and_marks(&g(&[(0, 1, Head, Tail)]), &a).unwrap(), (1, 2));
        assert_eq!(shd_and_marks(&g(&[(0, 1, Circle, Head)]), &a).unwrap(), (1, 1));
        assert_eq!(shd_and_marks(&MixedGraph::new(4), &a).unwrap(), (1, 0));
    }

    #[test]
    fn dshd_examples() {
        let a = g(&[(0, 1, Tail, Head)]);
        assert_eq!(dshd(&a, &a).unwrap(), 0.0);
        assert_eq!(dshd(&g(&[(0, 1, Circle, Head)]), &a).unwrap(), 0.5);
        assert_eq!(dshd(&g(&[(0, 1, Head, Head)]), &a).unwrap(), 0.5);
        assert_eq!(dshd(&g(&[(0, 1, Head, Tail)]), &a).unwrap(), 1.0);
        assert_eq!(dshd(&g(&[(0, 1, Tail, Head), (2, 3, Tail, Tail)]), &a).unwrap(), 1.0);
    }
}
