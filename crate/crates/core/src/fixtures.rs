//! Small hand-built graphs used by tests, examples and the CLI.
//!
//! Each constructor returns the graph together with a name → index map so
//! callers can refer to nodes by the names used when drawing them.

use std::collections::HashMap;

use crate::mixed_graph::{Mark, MixedGraph, NodeId};

pub type Names = HashMap<&'static str, NodeId>;

fn build(names: &[&'static str], edges: &[(&'static str, &'static str, Mark, Mark)]) -> (MixedGraph, Names) {
    let map: Names = names.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut g = MixedGraph::new(names.len());
    for &(a, b, ma, mb) in edges {
        g.add_edge(map[a], map[b], ma, mb).expect("fixture edge");
    }
    g.set_labels(Some(names.iter().map(|s| s.to_string()).collect()));
    (g, map)
}

const D: (Mark, Mark) = (Mark::Tail, Mark::Head);
const B: (Mark, Mark) = (Mark::Head, Mark::Head);

fn e(a: &'static str, b: &'static str, m: (Mark, Mark)) -> (&'static str, &'static str, Mark, Mark) {
    (a, b, m.0, m.1)
}

/// DAG with four short (length ≤ 4) paths between `i` and `j` through a
/// shared middle node, plus one long path of length 6.
pub fn short_paths_graph() -> (MixedGraph, Names) {
    build(
        &["i", "j", "p11", "p12", "p13", "p21", "p22", "p41", "p42", "p43", "p44", "p45"],
        &[
            e("i", "p11", D),
            e("i", "p21", D),
            e("i", "p41", D),
            e("p11", "p12", D),
            e("p12", "p13", D),
            e("p13", "j", D),
            e("p21", "p12", D),
            e("p12", "p22", D),
            e("p22", "j", D),
            e("p41", "p42", D),
            e("p42", "p43", D),
            e("p43", "p44", D),
            e("p44", "p45", D),
            e("p45", "j", D),
        ],
    )
}

/// DAG on `i, j, 1..5` in which every node lies on a path of length at
/// most three between `i` and `j`; `{2, 3, 5}` separates them.
pub fn local_graph_example() -> (MixedGraph, Names) {
    build(
        &["i", "j", "1", "2", "3", "4", "5"],
        &[
            e("1", "i", D),
            e("1", "3", D),
            e("2", "3", D),
            e("2", "j", D),
            e("3", "i", D),
            e("3", "j", D),
            e("4", "i", D),
            e("4", "3", D),
            e("5", "3", D),
            e("5", "j", D),
        ],
    )
}

/// MAG with the discriminating path `(i, w, u, v, x, y, j)` for `y`.
/// `i` and `j` are separated by `{w, u, v, x, y}`.
pub fn discriminating_path_graph() -> (MixedGraph, Names) {
    build(
        &["i", "w", "u", "v", "x", "y", "j"],
        &[
            e("i", "w", B),
            e("u", "w", B),
            e("u", "v", B),
            e("x", "v", B),
            e("x", "y", B),
            e("w", "j", D),
            e("u", "j", D),
            e("v", "j", D),
            e("x", "j", D),
            e("y", "j", D),
        ],
    )
}

/// MAG contrasting neighborhood and local search pools for the pair `(1, 8)`.
///
/// Indices list the endpoints first, then `4, 5`, so that among the tied
/// minimum 3-local separators of `(1, 8)` the lexicographic search returns
/// `{4, 5}`.
pub fn search_pool_graph() -> (MixedGraph, Names) {
    build(
        &["1", "8", "4", "5", "2", "3", "6", "7", "a", "b", "c1", "c2", "c3"],
        &[
            e("1", "2", B),
            e("3", "2", B),
            e("7", "8", B),
            e("6", "7", B),
            e("2", "4", D),
            e("3", "4", D),
            e("7", "5", D),
            e("6", "5", D),
            e("5", "1", D),
            e("4", "8", D),
            e("a", "1", D),
            e("b", "8", D),
            e("c1", "a", D),
            e("c1", "c2", B),
            e("c2", "c3", D),
            e("c3", "b", D),
        ],
    )
}

/// `x -> y` plus the chain `x -> 1 -> 2 -> 3 -> y`.
pub fn extra_tests_graph() -> (MixedGraph, Names) {
    build(&["x", "y", "1", "2", "3"], &[e("x", "y", D), e("x", "1", D), e("1", "2", D), e("2", "3", D), e("3", "y", D)])
}

/// Ancestral but not maximal: `x <-> a <-> b <-> y` with `a -> y` and
/// `b -> x` forms an inducing path between the non-adjacent `x` and `y`.
pub fn non_maximal_graph() -> (MixedGraph, Names) {
    build(&["x", "a", "b", "y"], &[e("x", "a", B), e("a", "b", B), e("b", "y", B), e("a", "y", D), e("b", "x", D)])
}

/// Resolves names to sorted node ids.
pub fn ids(names: &Names, which: &[&str]) -> Vec<NodeId> {
    let mut v: Vec<NodeId> = which.iter().map(|s| names[s]).collect();
    v.sort_unstable();
    v
}
