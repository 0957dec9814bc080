//! Mixed graphs with tail, head and circle edge marks.
//!
//! A single type covers DAGs, maximal ancestral graphs (MAGs) and partial
//! ancestral graphs (PAGs). Marks are stored per endpoint in a dense
//! `p × p` table so that "the mark at `x` on the edge `x *-* y`" is a
//! single lookup; orientation rules do little else.

use std::collections::VecDeque;
use std::fmt;
use std::ops::ControlFlow;

use thiserror::Error;

/// Dense node index in `0..p`.
pub type NodeId = usize;

/// Largest graph on which unbounded simple-path enumeration is allowed.
pub const MAX_UNCAPPED_PATH_NODES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mark {
    Tail,
    Head,
    Circle,
}

/// An edge `a *-* b` with the mark found at each endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub mark_at_a: Mark,
    pub mark_at_b: Mark,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphClass {
    Dag,
    Mag,
    Pag,
    Undirected,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("edge between {0} and {1} already present")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {node} out of range for graph with {p} nodes")]
    NodeOutOfRange { node: NodeId, p: usize },
    #[error("graph contains circle marks")]
    CircleMarkPresent,
    #[error("uncapped path enumeration refused on {0} nodes (limit {MAX_UNCAPPED_PATH_NODES})")]
    PathSearchTooLarge(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Reason a graph fails to be ancestral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AncestralViolation {
    /// Nodes of a directed cycle, in path order.
    DirectedCycle(Vec<NodeId>),
    /// Directed path `cycle[0] -> ... -> cycle[k]` closed by `cycle[k] <-> cycle[0]`.
    AlmostDirectedCycle(Vec<NodeId>),
    /// `a - b <-* c`: an endpoint of an undirected edge has an arrowhead into it.
    ArrowIntoUndirected { a: NodeId, b: NodeId, c: NodeId },
}

#[derive(Clone, Debug)]
pub struct MixedGraph {
    p: usize,
    /// `marks[at * p + other]` is the mark at `at` on the edge `at *-* other`.
    marks: Vec<Option<Mark>>,
    adj: Vec<Vec<NodeId>>,
    labels: Option<Vec<String>>,
}

impl PartialEq for MixedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.marks == other.marks
    }
}

impl Eq for MixedGraph {}

impl MixedGraph {
    /// Graph with `p` nodes and no edges.
    pub fn new(p: usize) -> Self {
        Self { p, marks: vec![None; p * p], adj: vec![Vec::new(); p], labels: None }
    }

    /// Complete graph with `mark` at every endpoint.
    pub fn complete(p: usize, mark: Mark) -> Self {
        let mut g = Self::new(p);
        for a in 0..p {
            for b in (a + 1)..p {
                g.insert_unchecked(a, b, mark, mark);
            }
        }
        g
    }

    /// Builds a graph from `(a, b, mark_at_a, mark_at_b)` tuples.
    pub fn from_edges(
        p: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId, Mark, Mark)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(p);
        for (a, b, ma, mb) in edges {
            g.add_edge(a, b, ma, mb)?;
        }
        Ok(g)
    }

    /// DAG from a list of `from -> to` pairs.
    pub fn from_directed(p: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self, GraphError> {
        Self::from_edges(p, edges.into_iter().map(|(a, b)| (a, b, Mark::Tail, Mark::Head)))
    }

    pub fn n_nodes(&self) -> usize {
        self.p
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<String>>) {
        if let Some(l) = &labels {
            assert_eq!(l.len(), self.p, "label count must equal node count");
        }
        self.labels = labels;
    }

    /// Human-readable name of a node: its label when present, else its index.
    pub fn node_name(&self, v: NodeId) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => v.to_string(),
        }
    }

    fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v >= self.p {
            Err(GraphError::NodeOutOfRange { node: v, p: self.p })
        } else {
            Ok(())
        }
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId, mark_at_a: Mark, mark_at_b: Mark) -> Result<(), GraphError> {
        self.check_node(a)?;
        self.check_node(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.is_adjacent(a, b) {
            return Err(GraphError::DuplicateEdge(a.min(b), a.max(b)));
        }
        self.insert_unchecked(a, b, mark_at_a, mark_at_b);
        Ok(())
    }

    fn insert_unchecked(&mut self, a: NodeId, b: NodeId, ma: Mark, mb: Mark) {
        self.marks[a * self.p + b] = Some(ma);
        self.marks[b * self.p + a] = Some(mb);
        let pos = self.adj[a].binary_search(&b).unwrap_err();
        self.adj[a].insert(pos, b);
        let pos = self.adj[b].binary_search(&a).unwrap_err();
        self.adj[b].insert(pos, a);
    }

    /// Removes the edge between `a` and `b`; returns whether one existed.
    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        if !self.is_adjacent(a, b) {
            return false;
        }
        self.marks[a * self.p + b] = None;
        self.marks[b * self.p + a] = None;
        if let Ok(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].remove(pos);
        }
        if let Ok(pos) = self.adj[b].binary_search(&a) {
            self.adj[b].remove(pos);
        }
        true
    }

    #[inline]
    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.marks[a * self.p + b].is_some()
    }

    /// Mark at `at` on the edge `at *-* other`, if the edge exists.
    #[inline]
    pub fn mark(&self, at: NodeId, other: NodeId) -> Option<Mark> {
        self.marks[at * self.p + other]
    }

    /// Overwrites the mark at `at` on an existing edge `at *-* other`.
    ///
    /// Panics if the edge is absent.
    pub fn set_mark(&mut self, at: NodeId, other: NodeId, mark: Mark) {
        let slot = &mut self.marks[at * self.p + other];
        assert!(slot.is_some(), "no edge between {at} and {other}");
        *slot = Some(mark);
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<Edge> {
        Some(Edge { a, b, mark_at_a: self.mark(a, b)?, mark_at_b: self.mark(b, a)? })
    }

    /// Sorted adjacency list of `v`.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `a -> b`
    #[inline]
    pub fn is_directed(&self, a: NodeId, b: NodeId) -> bool {
        self.mark(a, b) == Some(Mark::Tail) && self.mark(b, a) == Some(Mark::Head)
    }

    /// `a <-> b`
    #[inline]
    pub fn is_bidirected(&self, a: NodeId, b: NodeId) -> bool {
        self.mark(a, b) == Some(Mark::Head) && self.mark(b, a) == Some(Mark::Head)
    }

    /// `a - b`
    #[inline]
    pub fn is_undirected(&self, a: NodeId, b: NodeId) -> bool {
        self.mark(a, b) == Some(Mark::Tail) && self.mark(b, a) == Some(Mark::Tail)
    }

    pub fn parents(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().copied().filter(move |&u| self.is_directed(u, v))
    }

    pub fn children(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().copied().filter(move |&u| self.is_directed(v, u))
    }

    pub fn spouses(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj[v].iter().copied().filter(move |&u| self.is_bidirected(v, u))
    }

    /// All edges with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.n_edges());
        for a in 0..self.p {
            for &b in &self.adj[a] {
                if a < b {
                    out.push(self.edge(a, b).expect("adjacency list out of sync"));
                }
            }
        }
        out
    }

    pub fn has_circles(&self) -> bool {
        self.marks.contains(&Some(Mark::Circle))
    }

    /// Undirected graph with the same adjacencies.
    pub fn skeleton(&self) -> MixedGraph {
        let mut g = self.clone();
        for m in g.marks.iter_mut().flatten() {
            *m = Mark::Tail;
        }
        g
    }

    /// Same node set, keeping only edges with both endpoints in `keep`.
    pub fn induced(&self, keep: &[bool]) -> MixedGraph {
        let mut g = MixedGraph::new(self.p);
        g.labels = self.labels.clone();
        for e in self.edges() {
            if keep[e.a] && keep[e.b] {
                g.insert_unchecked(e.a, e.b, e.mark_at_a, e.mark_at_b);
            }
        }
        g
    }

    /// Copy with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[NodeId]) -> MixedGraph {
        assert_eq!(perm.len(), self.p);
        let mut g = MixedGraph::new(self.p);
        for e in self.edges() {
            g.insert_unchecked(perm[e.a], perm[e.b], e.mark_at_a, e.mark_at_b);
        }
        if let Some(l) = &self.labels {
            let mut nl = vec![String::new(); self.p];
            for (v, name) in l.iter().enumerate() {
                nl[perm[v]] = name.clone();
            }
            g.labels = Some(nl);
        }
        g
    }

    /// Subgraph over `nodes`, re-indexed to `0..nodes.len()` in the given order.
    pub fn subgraph(&self, nodes: &[NodeId]) -> MixedGraph {
        let mut index = vec![usize::MAX; self.p];
        for (k, &v) in nodes.iter().enumerate() {
            index[v] = k;
        }
        let mut g = MixedGraph::new(nodes.len());
        for e in self.edges() {
            let (ia, ib) = (index[e.a], index[e.b]);
            if ia != usize::MAX && ib != usize::MAX {
                g.insert_unchecked(ia, ib, e.mark_at_a, e.mark_at_b);
            }
        }
        if let Some(l) = &self.labels {
            g.labels = Some(nodes.iter().map(|&v| l[v].clone()).collect());
        }
        g
    }

    /// Mask of `an(S)`: nodes with a directed path into some seed, seeds included.
    pub fn ancestor_mask(&self, seeds: &[NodeId]) -> Vec<bool> {
        self.closure(seeds, |g, v, u| g.is_directed(u, v))
    }

    /// Mask of `de(S)`, seeds included.
    pub fn descendant_mask(&self, seeds: &[NodeId]) -> Vec<bool> {
        self.closure(seeds, |g, v, u| g.is_directed(v, u))
    }

    fn closure(&self, seeds: &[NodeId], step: impl Fn(&Self, NodeId, NodeId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.p];
        let mut stack: Vec<NodeId> = Vec::with_capacity(self.p);
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if !seen[u] && step(self, v, u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }

    /// `an(G, S)` as a sorted node list.
    pub fn ancestors(&self, seeds: &[NodeId]) -> Vec<NodeId> {
        mask_to_nodes(&self.ancestor_mask(seeds))
    }

    pub fn descendants(&self, seeds: &[NodeId]) -> Vec<NodeId> {
        mask_to_nodes(&self.descendant_mask(seeds))
    }

    /// Topological order of the directed part, or `None` if it has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: Vec<usize> = (0..self.p).map(|v| self.parents(v).count()).collect();
        let mut queue: VecDeque<NodeId> = (0..self.p).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.p);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in self.children(v).collect::<Vec<_>>() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == self.p).then_some(order)
    }

    fn find_directed_cycle(&self) -> Option<Vec<NodeId>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.p];
        let mut stack_path: Vec<NodeId> = Vec::new();
        fn dfs(g: &MixedGraph, v: NodeId, state: &mut [u8], path: &mut Vec<NodeId>) -> Option<Vec<NodeId>> {
            state[v] = 1;
            path.push(v);
            for c in g.children(v).collect::<Vec<_>>() {
                if state[c] == 1 {
                    let start = path.iter().position(|&x| x == c).unwrap();
                    return Some(path[start..].to_vec());
                }
                if state[c] == 0 {
                    if let Some(cyc) = dfs(g, c, state, path) {
                        return Some(cyc);
                    }
                }
            }
            path.pop();
            state[v] = 2;
            None
        }
        for v in 0..self.p {
            if state[v] == 0 {
                if let Some(c) = dfs(self, v, &mut state, &mut stack_path) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Directed path from `from` to `to` (breadth first), if any.
    pub fn directed_path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let mut prev = vec![usize::MAX; self.p];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for c in self.children(v) {
                if prev[c] == usize::MAX {
                    prev[c] = v;
                    queue.push_back(c);
                }
            }
        }
        None
    }

    /// First violation of ancestrality found, or `None` for an ancestral graph.
    pub fn ancestral_violation(&self) -> Result<Option<AncestralViolation>, GraphError> {
        if self.has_circles() {
            return Err(GraphError::CircleMarkPresent);
        }
        if let Some(cycle) = self.find_directed_cycle() {
            return Ok(Some(AncestralViolation::DirectedCycle(cycle)));
        }
        for a in 0..self.p {
            for b in self.spouses(a).collect::<Vec<_>>() {
                if let Some(path) = self.directed_path(a, b) {
                    return Ok(Some(AncestralViolation::AlmostDirectedCycle(path)));
                }
            }
        }
        for b in 0..self.p {
            let undirected: Vec<NodeId> = self.adj[b].iter().copied().filter(|&a| self.is_undirected(a, b)).collect();
            if let Some(&a) = undirected.first() {
                if let Some(&c) = self.adj[b].iter().find(|&&c| self.mark(b, c) == Some(Mark::Head)) {
                    return Ok(Some(AncestralViolation::ArrowIntoUndirected { a, b, c }));
                }
            }
        }
        Ok(None)
    }

    pub fn is_ancestral(&self) -> Result<bool, GraphError> {
        Ok(self.ancestral_violation()?.is_none())
    }

    /// Every edge is `->` and the graph is acyclic.
    pub fn is_dag(&self) -> bool {
        self.edges()
            .iter()
            .all(|e| matches!((e.mark_at_a, e.mark_at_b), (Mark::Tail, Mark::Head) | (Mark::Head, Mark::Tail)))
            && self.topological_order().is_some()
    }

    /// Most specific class the marks allow; `Mag` only asserts the mark
    /// alphabet, ancestrality and maximality are checked separately.
    pub fn class(&self) -> GraphClass {
        if self.has_circles() {
            GraphClass::Pag
        } else if self.marks.iter().flatten().all(|&m| m == Mark::Tail) {
            GraphClass::Undirected
        } else if self.is_dag() {
            GraphClass::Dag
        } else {
            GraphClass::Mag
        }
    }

    /// Breadth-first distances from `src`, optionally ignoring one edge.
    /// Unreachable nodes get `usize::MAX`.
    pub fn bfs_distances(&self, src: NodeId, skip_edge: Option<(NodeId, NodeId)>) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.p];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        let skip = |a: NodeId, b: NodeId| match skip_edge {
            Some((x, y)) => (a == x && b == y) || (a == y && b == x),
            None => false,
        };
        while let Some(v) = queue.pop_front() {
            for &u in &self.adj[v] {
                if dist[u] == usize::MAX && !skip(v, u) {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Visits every simple path between `from` and `to` with at most
    /// `max_len` edges, restricted to nodes in `within` when given.
    ///
    /// `max_len = None` is only accepted on graphs with at most
    /// [`MAX_UNCAPPED_PATH_NODES`] nodes.
    pub fn for_each_simple_path<F>(
        &self,
        from: NodeId,
        to: NodeId,
        max_len: Option<usize>,
        within: Option<&[bool]>,
        mut visit: F,
    ) -> Result<(), GraphError>
    where
        F: FnMut(&[NodeId]) -> ControlFlow<()>,
    {
        let cap = match max_len {
            Some(c) => c,
            None if self.p <= MAX_UNCAPPED_PATH_NODES => self.p,
            None => return Err(GraphError::PathSearchTooLarge(self.p)),
        };
        if from == to || cap == 0 {
            return Ok(());
        }
        // Prune with distances to `to` inside the allowed region.
        let allowed = |v: NodeId| within.is_none_or(|w| w[v]);
        if !allowed(from) || !allowed(to) {
            return Ok(());
        }
        let dist_to = {
            let mut dist = vec![usize::MAX; self.p];
            dist[to] = 0;
            let mut queue = VecDeque::from([to]);
            while let Some(v) = queue.pop_front() {
                for &u in &self.adj[v] {
                    if dist[u] == usize::MAX && allowed(u) {
                        dist[u] = dist[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
            dist
        };
        let mut on_path = vec![false; self.p];
        let mut path = vec![from];
        on_path[from] = true;
        let _ = self.simple_path_dfs(to, cap, &allowed, &dist_to, &mut on_path, &mut path, &mut visit);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn simple_path_dfs<F>(
        &self,
        to: NodeId,
        cap: usize,
        allowed: &impl Fn(NodeId) -> bool,
        dist_to: &[usize],
        on_path: &mut [bool],
        path: &mut Vec<NodeId>,
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[NodeId]) -> ControlFlow<()>,
    {
        let v = *path.last().unwrap();
        let used = path.len() - 1;
        for &u in &self.adj[v] {
            if on_path[u] || !allowed(u) {
                continue;
            }
            if u == to {
                path.push(u);
                let flow = visit(path);
                path.pop();
                flow?;
                continue;
            }
            if dist_to[u] == usize::MAX || used + 1 + dist_to[u] > cap {
                continue;
            }
            on_path[u] = true;
            path.push(u);
            let flow = self.simple_path_dfs(to, cap, allowed, dist_to, on_path, path, visit);
            path.pop();
            on_path[u] = false;
            flow?;
        }
        ControlFlow::Continue(())
    }

    /// Is `c` a collider on the consecutive triple `(a, c, b)`?
    #[inline]
    pub fn is_collider(&self, a: NodeId, c: NodeId, b: NodeId) -> bool {
        self.mark(c, a) == Some(Mark::Head) && self.mark(c, b) == Some(Mark::Head)
    }

    /// Visits discriminating paths `(i, ..., x, y, j)` for `y` with endpoint
    /// `j`, shortest interiors first within each branch.
    ///
    /// Every vertex strictly between `i` and `y` is a collider on the path
    /// and a parent of `j`; `i` is not adjacent to `j`; the path has at
    /// least three edges. Paths longer than `max_len` edges are skipped.
    pub fn for_each_discriminating_path<F>(&self, y: NodeId, j: NodeId, max_len: usize, mut visit: F) -> ControlFlow<()>
    where
        F: FnMut(&[NodeId]) -> ControlFlow<()>,
    {
        if !self.is_adjacent(y, j) {
            return ControlFlow::Continue(());
        }
        // `rev` holds the path backwards: j, y, x, ...
        let mut rev = vec![j, y];
        let mut on_path = vec![false; self.p];
        on_path[j] = true;
        on_path[y] = true;
        for &x in &self.adj[y] {
            if on_path[x] || !self.is_directed(x, j) || self.mark(x, y) != Some(Mark::Head) {
                continue;
            }
            on_path[x] = true;
            rev.push(x);
            let flow = self.disc_extend(j, max_len, &mut on_path, &mut rev, &mut visit);
            rev.pop();
            on_path[x] = false;
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn disc_extend<F>(
        &self,
        j: NodeId,
        max_len: usize,
        on_path: &mut [bool],
        rev: &mut Vec<NodeId>,
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[NodeId]) -> ControlFlow<()>,
    {
        // Invariant: the last node `c` of `rev` is a parent of `j` with an
        // arrowhead at `c` from its successor on the path.
        let c = *rev.last().unwrap();
        // Adding a predecessor makes the path `rev.len()` edges long.
        if rev.len() > max_len {
            return ControlFlow::Continue(());
        }
        for &a in &self.adj[c] {
            if on_path[a] || self.mark(c, a) != Some(Mark::Head) {
                continue;
            }
            if !self.is_adjacent(a, j) {
                rev.push(a);
                let path: Vec<NodeId> = rev.iter().rev().copied().collect();
                rev.pop();
                visit(&path)?;
            } else if self.is_directed(a, j) && rev.len() < max_len {
                // `a` becomes interior: needs the arrowhead from `c`.
                if self.mark(a, c) != Some(Mark::Head) {
                    continue;
                }
                on_path[a] = true;
                rev.push(a);
                let flow = self.disc_extend(j, max_len, on_path, rev, visit);
                rev.pop();
                on_path[a] = false;
                flow?;
            }
        }
        ControlFlow::Continue(())
    }

    /// All discriminating paths between `i` and `j` for `y`.
    pub fn discriminating_paths(
        &self,
        i: NodeId,
        j: NodeId,
        y: NodeId,
        max_len: Option<usize>,
    ) -> Result<Vec<Vec<NodeId>>, GraphError> {
        let cap = match max_len {
            Some(c) => c,
            None if self.p <= MAX_UNCAPPED_PATH_NODES => self.p,
            None => return Err(GraphError::PathSearchTooLarge(self.p)),
        };
        let mut out = Vec::new();
        let _ = self.for_each_discriminating_path(y, j, cap, |path| {
            if path[0] == i {
                out.push(path.to_vec());
            }
            ControlFlow::Continue(())
        });
        Ok(out)
    }
}

pub(crate) fn mask_to_nodes(mask: &[bool]) -> Vec<NodeId> {
    mask.iter().enumerate().filter_map(|(v, &m)| m.then_some(v)).collect()
}

pub(crate) fn nodes_to_mask(p: usize, nodes: &[NodeId]) -> Vec<bool> {
    let mut mask = vec![false; p];
    for &v in nodes {
        mask[v] = true;
    }
    mask
}

fn left_char(m: Mark) -> char {
    match m {
        Mark::Head => '<',
        Mark::Circle => 'o',
        Mark::Tail => '-',
    }
}

fn right_char(m: Mark) -> char {
    match m {
        Mark::Head => '>',
        Mark::Circle => 'o',
        Mark::Tail => '-',
    }
}

/// Edge symbol such as `o->` for the marks at the left and right endpoints.
pub fn edge_symbol(left: Mark, right: Mark) -> String {
    format!("{}-{}", left_char(left), right_char(right))
}

/// Text form: a `p=<count>` header, then one `a <l>-<r> b` line per edge.
pub fn serialize_graph(g: &MixedGraph) -> String {
    let mut out = format!("p={}\n", g.n_nodes());
    for e in g.edges() {
        out.push_str(&format!("{} {} {}\n", e.a, edge_symbol(e.mark_at_a, e.mark_at_b), e.b));
    }
    out
}

impl fmt::Display for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_graph(self))
    }
}

pub fn parse_graph(text: &str) -> Result<MixedGraph, ParseError> {
    let err = |line: usize, message: String| ParseError { line, message };
    let mut declared: Option<usize> = None;
    let mut edges: Vec<(usize, NodeId, NodeId, Mark, Mark)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p=") {
            let p = rest.trim().parse::<usize>().map_err(|e| err(lineno, format!("bad node count {rest:?}: {e}")))?;
            declared = Some(p);
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(err(lineno, format!("expected `<id> <mark> <id>`, got {line:?}")));
        }
        let a = tokens[0].parse::<NodeId>().map_err(|_| err(lineno, format!("bad node id {:?}", tokens[0])))?;
        let b = tokens[2].parse::<NodeId>().map_err(|_| err(lineno, format!("bad node id {:?}", tokens[2])))?;
        let chars: Vec<char> = tokens[1].chars().collect();
        if chars.len() != 3 || chars[1] != '-' {
            return Err(err(lineno, format!("bad edge token {:?}", tokens[1])));
        }
        let ma = match chars[0] {
            '<' => Mark::Head,
            'o' => Mark::Circle,
            '-' => Mark::Tail,
            c => return Err(err(lineno, format!("bad left mark {c:?}"))),
        };
        let mb = match chars[2] {
            '>' => Mark::Head,
            'o' => Mark::Circle,
            '-' => Mark::Tail,
            c => return Err(err(lineno, format!("bad right mark {c:?}"))),
        };
        edges.push((lineno, a, b, ma, mb));
    }
    let max_id = edges.iter().map(|e| e.1.max(e.2) + 1).max().unwrap_or(0);
    let p = match declared {
        Some(p) if p < max_id => {
            return Err(err(0, format!("p={p} but node {} is used", max_id - 1)));
        }
        Some(p) => p,
        None => max_id,
    };
    let mut g = MixedGraph::new(p);
    for (lineno, a, b, ma, mb) in edges {
        g.add_edge(a, b, ma, mb).map_err(|e| err(lineno, e.to_string()))?;
    }
    Ok(g)
}
