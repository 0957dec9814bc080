//! Random graph families.
//!
//! Structure is drawn with integer-valued RNG calls only, so a seed gives
//! the same graph on every platform.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mixed_graph::{Mark, MixedGraph, NodeId};
use crate::separation::is_maximal;

/// Base random-graph models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseFamily {
    ErdosRenyi,
    /// Preferential attachment (one edge per new node) topped up with
    /// uniform edges to the target degree.
    PowerLaw,
    /// Ring lattice with `round(degree)` neighbours, rewiring probability 0.1.
    WattsStrogatz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Base(BaseFamily),
    /// A base graph overlaid with random edges whose own degree is at
    /// most `delta` per node.
    Hybrid {
        delta: usize,
        base: BaseFamily,
    },
}

impl Family {
    pub const ER: Family = Family::Base(BaseFamily::ErdosRenyi);
    pub const PL: Family = Family::Base(BaseFamily::PowerLaw);
    pub const WS: Family = Family::Base(BaseFamily::WattsStrogatz);

    /// Short name used in tables and config files.
    pub fn name(&self) -> String {
        match self {
            Family::Base(b) => b.name().to_string(),
            Family::Hybrid { delta, base } => format!("hybrid{delta}-{}", base.name()),
        }
    }

    /// Parses `er`, `pl`, `ws` or `hybrid<Δ>-<base>`.
    pub fn parse(s: &str) -> Option<Family> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(rest) = s.strip_prefix("hybrid") {
            let (d, base) = rest.split_once('-')?;
            return Some(Family::Hybrid { delta: d.parse().ok()?, base: BaseFamily::parse(base)? });
        }
        BaseFamily::parse(&s).map(Family::Base)
    }
}

impl BaseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BaseFamily::ErdosRenyi => "er",
            BaseFamily::PowerLaw => "pl",
            BaseFamily::WattsStrogatz => "ws",
        }
    }

    fn parse(s: &str) -> Option<BaseFamily> {
        match s {
            "er" | "erdos-renyi" | "erdosrenyi" => Some(BaseFamily::ErdosRenyi),
            "pl" | "power-law" | "powerlaw" => Some(BaseFamily::PowerLaw),
            "ws" | "watts-strogatz" | "wattsstrogatz" => Some(BaseFamily::WattsStrogatz),
            _ => None,
        }
    }
}

/// Family, size and target average degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphSpec {
    pub family: Family,
    pub p: usize,
    pub avg_degree: f64,
}

impl GraphSpec {
    pub fn new(family: Family, p: usize) -> Self {
        GraphSpec { family, p, avg_degree: 2.0 }
    }
}

type EdgeSet = BTreeSet<(NodeId, NodeId)>;

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

fn target_edges(p: usize, avg_degree: f64) -> usize {
    let max = p * (p - 1) / 2;
    ((p as f64 * avg_degree / 2.0).round() as usize).min(max)
}

fn add_uniform_edges(edges: &mut EdgeSet, p: usize, target: usize, rng: &mut ChaCha8Rng) {
    while edges.len() < target {
        let a = rng.random_range(0..p);
        let b = rng.random_range(0..p);
        if a != b {
            edges.insert(key(a, b));
        }
    }
}

fn erdos_renyi(p: usize, avg_degree: f64, rng: &mut ChaCha8Rng) -> EdgeSet {
    let mut edges = EdgeSet::new();
    add_uniform_edges(&mut edges, p, target_edges(p, avg_degree), rng);
    edges
}

fn power_law(p: usize, avg_degree: f64, rng: &mut ChaCha8Rng) -> EdgeSet {
    let mut edges = EdgeSet::new();
    // each node appears once per incident edge
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * p);
    for v in 1..p {
        let u = if endpoints.is_empty() { 0 } else { endpoints[rng.random_range(0..endpoints.len())] };
        edges.insert(key(u, v));
        endpoints.extend([u, v]);
    }
    add_uniform_edges(&mut edges, p, target_edges(p, avg_degree), rng);
    edges
}

fn watts_strogatz(p: usize, avg_degree: f64, rng: &mut ChaCha8Rng) -> EdgeSet {
    let k = ((avg_degree / 2.0).round() as usize).max(1).min((p - 1) / 2).max(1);
    let mut edges = EdgeSet::new();
    for v in 0..p {
        for d in 1..=k {
            let u = (v + d) % p;
            if u != v {
                edges.insert(key(v, u));
            }
        }
    }
    let lattice: Vec<(NodeId, NodeId)> = edges.iter().copied().collect();
    for (a, b) in lattice {
        if rng.random_range(0..10) != 0 {
            continue;
        }
        let w = rng.random_range(0..p);
        if w == a || edges.contains(&key(a, w)) {
            continue;
        }
        edges.remove(&(a, b));
        edges.insert(key(a, w));
    }
    edges
}

fn base_edges(base: BaseFamily, p: usize, avg_degree: f64, rng: &mut ChaCha8Rng) -> EdgeSet {
    match base {
        BaseFamily::ErdosRenyi => erdos_renyi(p, avg_degree, rng),
        BaseFamily::PowerLaw => power_law(p, avg_degree, rng),
        BaseFamily::WattsStrogatz => watts_strogatz(p, avg_degree, rng),
    }
}

/// Random overlay with per-node overlay degree at most `delta`.
fn bounded_degree_overlay(edges: &mut EdgeSet, p: usize, delta: usize, rng: &mut ChaCha8Rng) {
    let mut deg = vec![0usize; p];
    for _ in 0..(p * delta) {
        let a = rng.random_range(0..p);
        let b = rng.random_range(0..p);
        if a == b || deg[a] >= delta || deg[b] >= delta || edges.contains(&key(a, b)) {
            continue;
        }
        deg[a] += 1;
        deg[b] += 1;
        edges.insert(key(a, b));
    }
}

/// Orients undirected edges along a uniformly random node order.
pub fn orient_randomly(
    p: usize,
    edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    rng: &mut ChaCha8Rng,
) -> MixedGraph {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut rank = vec![0; p];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut g = MixedGraph::new(p);
    for (a, b) in edges {
        let (from, to) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
        g.add_edge(from, to, Mark::Tail, Mark::Head).expect("distinct edges");
    }
    g
}

/// Random DAG from `spec`, deterministic in `seed`.
pub fn generate_graph(spec: &GraphSpec, seed: u64) -> MixedGraph {
    assert!(spec.p >= 2, "need at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = match spec.family {
        Family::Base(b) => base_edges(b, spec.p, spec.avg_degree, &mut rng),
        Family::Hybrid { delta, base } => {
            let mut e = base_edges(base, spec.p, spec.avg_degree, &mut rng);
            bounded_degree_overlay(&mut e, spec.p, delta, &mut rng);
            e
        }
    };
    orient_randomly(spec.p, edges, &mut rng)
}

/// Random maximal ancestral graph without undirected edges.
///
/// Each pair is joined with probability `edge_prob`; joined pairs become
/// bidirected with probability `bidirected_prob` when that keeps the graph
/// ancestral, otherwise directed along a random order. Draws that are not
/// maximal are rejected.
pub fn random_ancestral_graph(p: usize, edge_prob: f64, bidirected_prob: f64, seed: u64) -> MixedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        let mut g = MixedGraph::new(p);
        let mut bidirected = Vec::new();
        for x in 0..p {
            for y in (x + 1)..p {
                if !rng.random_bool(edge_prob) {
                    continue;
                }
                let (a, b) = (order[x], order[y]);
                if rng.random_bool(bidirected_prob) {
                    bidirected.push((a, b));
                } else {
                    g.add_edge(a, b, Mark::Tail, Mark::Head).expect("fresh edge");
                }
            }
        }
        for (a, b) in bidirected {
            let an = g.ancestor_mask(&[b]);
            if an[a] {
                g.add_edge(a, b, Mark::Tail, Mark::Head).expect("fresh edge");
            } else {
                g.add_edge(a, b, Mark::Head, Mark::Head).expect("fresh edge");
            }
        }
        // a -> b added after bidirected edges may close an almost-directed cycle
        if g.is_ancestral() == Ok(true) && is_maximal(&g) == Ok(true) {
            return g;
        }
    }
}
