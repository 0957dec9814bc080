//! Edge-mark orientation: R0 (v-structures), then R1–R10 to a fixed point.
//!
//! Rule statements follow Zhang (2008), "On the completeness of orientation
//! rules for causal discovery in the presence of latent confounders and
//! selection bias". Under [`OrientMode::LfciLocal`] the discriminating-path
//! rule R4 is replaced by its local variant.

use std::collections::HashMap;
use std::ops::ControlFlow;

use thiserror::Error;

use super::SepRecord;
use crate::mixed_graph::{Mark, MixedGraph, NodeId};
use crate::separation::local_node_mask;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientMode {
    /// Unmodified R4 with full separators.
    Fci,
    /// R4 restricted to discriminating paths inside the γ-local graph of
    /// the path's endpoints, computed on the skeleton being oriented.
    LfciLocal(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConflictPolicy {
    /// Fail when a rule would overwrite a head with a tail or vice versa.
    #[default]
    Error,
    /// Keep the existing mark and count the conflict.
    Keep,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrientError {
    #[error("rule {rule} wants {wanted:?} at {at} on edge {at}-{other}, but it is already {existing:?}")]
    InconsistentSeparators { rule: &'static str, at: NodeId, other: NodeId, existing: Mark, wanted: Mark },
}

#[derive(Clone, Debug)]
pub struct Oriented {
    pub pag: MixedGraph,
    pub conflicts: usize,
    /// Unshielded triples skipped because their pair had no separator record.
    pub unrecorded_triples: usize,
}

/// Orients `skel` (any mark content; it is reset to circles) using the
/// recorded separators.
pub fn orient(
    skel: &MixedGraph,
    sep: &SepRecord,
    mode: OrientMode,
    policy: ConflictPolicy,
) -> Result<Oriented, OrientError> {
    let mut o = Orienter::new(skel, sep, mode, policy);
    o.rule0()?;
    o.closure()?;
    Ok(o.finish())
}

/// Applies only R0 to a circle-marked copy of `skel`.
pub fn orient_v_structures(
    skel: &MixedGraph,
    sep: &SepRecord,
    policy: ConflictPolicy,
) -> Result<Oriented, OrientError> {
    let mut o = Orienter::new(skel, sep, OrientMode::Fci, policy);
    o.rule0()?;
    Ok(o.finish())
}

/// Resets every edge to `o-o`.
pub fn circle_graph(skel: &MixedGraph) -> MixedGraph {
    let mut g = MixedGraph::new(skel.n_nodes());
    for e in skel.edges() {
        g.add_edge(e.a, e.b, Mark::Circle, Mark::Circle).expect("edge from a valid graph");
    }
    if let Some(l) = skel.labels() {
        g.set_labels(Some(l.to_vec()));
    }
    g
}

struct Orienter<'a> {
    g: MixedGraph,
    sep: &'a SepRecord,
    mode: OrientMode,
    policy: ConflictPolicy,
    conflicts: usize,
    unrecorded: usize,
    changed: bool,
    local_masks: HashMap<(NodeId, NodeId), Vec<bool>>,
}

impl<'a> Orienter<'a> {
    fn new(skel: &MixedGraph, sep: &'a SepRecord, mode: OrientMode, policy: ConflictPolicy) -> Self {
        Orienter {
            g: circle_graph(skel),
            sep,
            mode,
            policy,
            conflicts: 0,
            unrecorded: 0,
            changed: false,
            local_masks: HashMap::new(),
        }
    }

    fn finish(self) -> Oriented {
        Oriented { pag: self.g, conflicts: self.conflicts, unrecorded_triples: self.unrecorded }
    }

    fn m(&self, at: NodeId, other: NodeId) -> Mark {
        self.g.mark(at, other).expect("edge present")
    }

    /// Sets the mark at `at` on the edge to `other`. Only circles are
    /// overwritten.
    fn set(&mut self, rule: &'static str, at: NodeId, other: NodeId, wanted: Mark) -> Result<(), OrientError> {
        let existing = self.m(at, other);
        if existing == wanted {
            return Ok(());
        }
        if existing == Mark::Circle {
            self.g.set_mark(at, other, wanted);
            self.changed = true;
            return Ok(());
        }
        match self.policy {
            ConflictPolicy::Error => Err(OrientError::InconsistentSeparators { rule, at, other, existing, wanted }),
            ConflictPolicy::Keep => {
                self.conflicts += 1;
                Ok(())
            }
        }
    }

    fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.g.is_adjacent(a, b)
    }

    fn nbrs(&self, v: NodeId) -> Vec<NodeId> {
        self.g.neighbors(v).to_vec()
    }

    /// R0: unshielded `a *-* k *-* b` with `k ∉ SEP(a, b)` becomes `a *-> k <-* b`.
    fn rule0(&mut self) -> Result<(), OrientError> {
        let p = self.g.n_nodes();
        for k in 0..p {
            let nb = self.nbrs(k);
            for (x, &a) in nb.iter().enumerate() {
                for &b in &nb[x + 1..] {
                    if self.adjacent(a, b) {
                        continue;
                    }
                    match self.sep.separates_with(a, b, k) {
                        None => self.unrecorded += 1,
                        Some(true) => {}
                        Some(false) => {
                            self.set("R0", k, a, Mark::Head)?;
                            self.set("R0", k, b, Mark::Head)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn closure(&mut self) -> Result<(), OrientError> {
        loop {
            self.changed = false;
            self.rule1()?;
            self.rule2()?;
            self.rule3()?;
            self.rule4()?;
            if self.changed {
                continue;
            }
            self.rule5()?;
            self.rule6()?;
            self.rule7()?;
            self.rule8()?;
            self.rule9()?;
            self.rule10()?;
            if !self.changed {
                return Ok(());
            }
        }
    }

    /// R1: `a *-> b o-* c`, `a`, `c` non-adjacent ⇒ `b -> c`.
    fn rule1(&mut self) -> Result<(), OrientError> {
        for b in 0..self.g.n_nodes() {
            let nb = self.nbrs(b);
            for &a in &nb {
                if self.m(b, a) != Mark::Head {
                    continue;
                }
                for &c in &nb {
                    if c == a || self.adjacent(a, c) || self.m(b, c) != Mark::Circle {
                        continue;
                    }
                    self.set("R1", b, c, Mark::Tail)?;
                    self.set("R1", c, b, Mark::Head)?;
                }
            }
        }
        Ok(())
    }

    /// R2: `a -> b *-> c` or `a *-> b -> c`, with `a *-o c` ⇒ `a *-> c`.
    fn rule2(&mut self) -> Result<(), OrientError> {
        for a in 0..self.g.n_nodes() {
            for c in self.nbrs(a) {
                if self.m(c, a) != Mark::Circle {
                    continue;
                }
                let fires = self.nbrs(a).into_iter().any(|b| {
                    b != c
                        && self.adjacent(b, c)
                        && self.m(c, b) == Mark::Head
                        && self.m(b, a) == Mark::Head
                        && (self.m(a, b) == Mark::Tail || self.m(b, c) == Mark::Tail)
                });
                if fires {
                    self.set("R2", c, a, Mark::Head)?;
                }
            }
        }
        Ok(())
    }

    /// R3: `a *-> b <-* c`, `a *-o t o-* c`, `a`, `c` non-adjacent,
    /// `t *-o b` ⇒ `t *-> b`.
    fn rule3(&mut self) -> Result<(), OrientError> {
        for b in 0..self.g.n_nodes() {
            for t in self.nbrs(b) {
                if self.m(b, t) != Mark::Circle {
                    continue;
                }
                let cand: Vec<NodeId> = self
                    .nbrs(t)
                    .into_iter()
                    .filter(|&a| {
                        a != b && self.adjacent(a, b) && self.m(b, a) == Mark::Head && self.m(t, a) == Mark::Circle
                    })
                    .collect();
                let fires = cand.iter().enumerate().any(|(x, &a)| cand[x + 1..].iter().any(|&c| !self.adjacent(a, c)));
                if fires {
                    self.set("R3", b, t, Mark::Head)?;
                }
            }
        }
        Ok(())
    }

    fn local_mask(&mut self, i: NodeId, j: NodeId, gamma: usize) -> &[bool] {
        let key = if i < j { (i, j) } else { (j, i) };
        let g = &self.g;
        self.local_masks.entry(key).or_insert_with(|| local_node_mask(g, key.0, key.1, gamma))
    }

    /// R4 (discriminating paths) or its local variant.
    ///
    /// For `(i, ..., x, y, j)` with `y o-* j`: under `Fci`, `y ∈ SEP(i, j)`
    /// gives `y -> j` and otherwise `x <-> y <-> j`. Under `LfciLocal(γ)` the
    /// bidirected conclusion needs the whole path inside the γ-local graph
    /// of `(i, j)`; failing that, only the arrowhead at `j` is added.
    fn rule4(&mut self) -> Result<(), OrientError> {
        let p = self.g.n_nodes();
        for y in 0..p {
            for j in self.nbrs(y) {
                if self.m(y, j) != Mark::Circle {
                    continue;
                }
                let mut paths: Vec<Vec<NodeId>> = Vec::new();
                let _ = self.g.for_each_discriminating_path(y, j, p, |path| {
                    paths.push(path.to_vec());
                    ControlFlow::Continue(())
                });
                if paths.is_empty() {
                    continue;
                }
                paths.sort_by_key(|path| (path.len(), path.clone()));
                self.apply_r4(y, j, &paths)?;
            }
        }
        Ok(())
    }

    fn apply_r4(&mut self, y: NodeId, j: NodeId, paths: &[Vec<NodeId>]) -> Result<(), OrientError> {
        let mut undecided = false;
        for path in paths {
            let i = path[0];
            let x = path[path.len() - 3];
            let in_sep = match self.sep.separates_with(i, j, y) {
                Some(v) => v,
                None => {
                    self.unrecorded += 1;
                    continue;
                }
            };
            if in_sep {
                self.set("R4", y, j, Mark::Tail)?;
                self.set("R4", j, y, Mark::Head)?;
                return Ok(());
            }
            let local_ok = match self.mode {
                OrientMode::Fci => true,
                OrientMode::LfciLocal(gamma) => {
                    let mask = self.local_mask(i, j, gamma);
                    path.iter().all(|&v| mask[v])
                }
            };
            if local_ok {
                self.set("R4", x, y, Mark::Head)?;
                self.set("R4", y, x, Mark::Head)?;
                self.set("R4", y, j, Mark::Head)?;
                self.set("R4", j, y, Mark::Head)?;
                return Ok(());
            }
            undecided = true;
        }
        if undecided {
            self.set("R4", j, y, Mark::Head)?;
        }
        Ok(())
    }

    fn is_circle_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.m(a, b) == Mark::Circle && self.m(b, a) == Mark::Circle
    }

    /// R5: `a o-o b` closing an uncovered circle path `(a, c, ..., d, b)`
    /// with `a`, `d` and `b`, `c` non-adjacent ⇒ the edge and the path become
    /// tail–tail.
    fn rule5(&mut self) -> Result<(), OrientError> {
        let p = self.g.n_nodes();
        for a in 0..p {
            for b in self.nbrs(a) {
                if b < a || !self.is_circle_edge(a, b) {
                    continue;
                }
                if let Some(path) = self.uncovered_circle_path(a, b) {
                    self.set("R5", a, b, Mark::Tail)?;
                    self.set("R5", b, a, Mark::Tail)?;
                    for w in path.windows(2) {
                        self.set("R5", w[0], w[1], Mark::Tail)?;
                        self.set("R5", w[1], w[0], Mark::Tail)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn uncovered_circle_path(&self, a: NodeId, b: NodeId) -> Option<Vec<NodeId>> {
        let p = self.g.n_nodes();
        for &c in self.g.neighbors(a) {
            if c == b || self.adjacent(c, b) || !self.is_circle_edge(a, c) {
                continue;
            }
            let mut on = vec![false; p];
            on[a] = true;
            on[c] = true;
            let mut path = vec![a, c];
            let ok = |s: &Self, u: NodeId, v: NodeId| s.is_circle_edge(u, v);
            let last_ok = |s: &Self, prev: NodeId, _last: NodeId| !s.adjacent(a, prev);
            if self.uncovered_dfs(b, &mut on, &mut path, &ok, &last_ok) {
                return Some(path);
            }
        }
        None
    }

    /// DFS for a simple uncovered path extending `path` to `target` whose
    /// edges satisfy `edge_ok`. `end_ok(prev, target)` vets the final step.
    /// On success `path` holds the full path.
    fn uncovered_dfs(
        &self,
        target: NodeId,
        on: &mut [bool],
        path: &mut Vec<NodeId>,
        edge_ok: &impl Fn(&Self, NodeId, NodeId) -> bool,
        end_ok: &impl Fn(&Self, NodeId, NodeId) -> bool,
    ) -> bool {
        let v = *path.last().unwrap();
        let prev = path[path.len() - 2];
        for &w in self.g.neighbors(v) {
            if on[w] || self.adjacent(prev, w) || !edge_ok(self, v, w) {
                continue;
            }
            if w == target {
                if end_ok(self, v, w) {
                    path.push(w);
                    return true;
                }
                continue;
            }
            on[w] = true;
            path.push(w);
            if self.uncovered_dfs(target, on, path, edge_ok, end_ok) {
                return true;
            }
            path.pop();
            on[w] = false;
        }
        false
    }

    /// R6: `a --- b o-* c` ⇒ `b -* c`.
    fn rule6(&mut self) -> Result<(), OrientError> {
        for b in 0..self.g.n_nodes() {
            let nb = self.nbrs(b);
            let has_undirected =
                |s: &Self, c: NodeId| nb.iter().any(|&a| a != c && s.m(a, b) == Mark::Tail && s.m(b, a) == Mark::Tail);
            for &c in &nb {
                if self.m(b, c) == Mark::Circle && has_undirected(self, c) {
                    self.set("R6", b, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }

    /// R7: `a -o b o-* c`, `a`, `c` non-adjacent ⇒ `b -* c`.
    fn rule7(&mut self) -> Result<(), OrientError> {
        for b in 0..self.g.n_nodes() {
            let nb = self.nbrs(b);
            for &c in &nb {
                if self.m(b, c) != Mark::Circle {
                    continue;
                }
                let fires = nb.iter().any(|&a| {
                    a != c && !self.adjacent(a, c) && self.m(a, b) == Mark::Tail && self.m(b, a) == Mark::Circle
                });
                if fires {
                    self.set("R7", b, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }

    fn is_half_directed(&self, a: NodeId, c: NodeId) -> bool {
        // a o-> c
        self.m(a, c) == Mark::Circle && self.m(c, a) == Mark::Head
    }

    /// R8: `a -> b -> c` or `a -o b -> c`, with `a o-> c` ⇒ `a -> c`.
    fn rule8(&mut self) -> Result<(), OrientError> {
        for a in 0..self.g.n_nodes() {
            for c in self.nbrs(a) {
                if !self.is_half_directed(a, c) {
                    continue;
                }
                let fires = self.nbrs(a).into_iter().any(|b| {
                    b != c
                        && self.adjacent(b, c)
                        && self.m(a, b) == Mark::Tail
                        && matches!(self.m(b, a), Mark::Head | Mark::Circle)
                        && self.m(b, c) == Mark::Tail
                        && self.m(c, b) == Mark::Head
                });
                if fires {
                    self.set("R8", a, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }

    /// Edge `u *-* v` can sit on a potentially directed path from `u` to `v`.
    fn pd_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.m(u, v) != Mark::Head && self.m(v, u) != Mark::Tail
    }

    /// Is there an uncovered potentially directed path from `path[0]`
    /// through `path[1]` to `target`, avoiding `forbidden`?
    fn uncovered_pd_path(&self, first: NodeId, second: NodeId, target: NodeId, forbidden: Option<NodeId>) -> bool {
        if !self.pd_edge(first, second) {
            return false;
        }
        if second == target {
            return true;
        }
        let p = self.g.n_nodes();
        let mut on = vec![false; p];
        on[first] = true;
        on[second] = true;
        if let Some(f) = forbidden {
            on[f] = true;
        }
        let mut path = vec![first, second];
        self.uncovered_dfs(target, &mut on, &mut path, &|s: &Self, u, v| s.pd_edge(u, v), &|_, _, _| true)
    }

    /// R9: `a o-> c` with an uncovered p.d. path `(a, b, d, ..., c)` where
    /// `b`, `c` are non-adjacent ⇒ `a -> c`.
    fn rule9(&mut self) -> Result<(), OrientError> {
        for a in 0..self.g.n_nodes() {
            for c in self.nbrs(a) {
                if !self.is_half_directed(a, c) {
                    continue;
                }
                let fires = self
                    .nbrs(a)
                    .into_iter()
                    .any(|b| b != c && !self.adjacent(b, c) && self.uncovered_pd_path(a, b, c, None));
                if fires {
                    self.set("R9", a, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }

    /// R10: `a o-> c`, `b -> c <- d`, uncovered p.d. paths from `a` to `b`
    /// and from `a` to `d` whose second nodes `m`, `w` differ and are
    /// non-adjacent ⇒ `a -> c`.
    fn rule10(&mut self) -> Result<(), OrientError> {
        for a in 0..self.g.n_nodes() {
            for c in self.nbrs(a) {
                if !self.is_half_directed(a, c) {
                    continue;
                }
                let parents: Vec<NodeId> = self
                    .nbrs(c)
                    .into_iter()
                    .filter(|&b| b != a && self.m(b, c) == Mark::Tail && self.m(c, b) == Mark::Head)
                    .collect();
                if parents.len() < 2 {
                    continue;
                }
                // For each parent, the second nodes of uncovered p.d. paths from a.
                let nb_a: Vec<NodeId> = self.nbrs(a).into_iter().filter(|&m| m != c).collect();
                let starts: Vec<Vec<NodeId>> = parents
                    .iter()
                    .map(|&b| nb_a.iter().copied().filter(|&m| self.uncovered_pd_path(a, m, b, Some(c))).collect())
                    .collect();
                let mut fires = false;
                'outer: for x in 0..parents.len() {
                    for y in (x + 1)..parents.len() {
                        for &m in &starts[x] {
                            for &w in &starts[y] {
                                if m != w && !self.adjacent(m, w) {
                                    fires = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                if fires {
                    self.set("R10", a, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, ids};
    use crate::separation::{find_local_separator, SeparatorQuery};
    use Mark::*;

    fn record(pairs: &[((NodeId, NodeId), &[NodeId])]) -> SepRecord {
        let mut r = SepRecord::new();
        for &((i, j), s) in pairs {
            r.insert(i, j, s);
        }
        r
    }

    #[test]
    fn v_structure() {
        let skel = MixedGraph::from_edges(3, [(0, 2, Tail, Tail), (1, 2, Tail, Tail)]).unwrap();
        let out = orient(&skel, &record(&[((0, 1), &[])]), OrientMode::Fci, ConflictPolicy::Error).unwrap();
        assert_eq!(out.pag.edge(0, 2).map(|e| (e.mark_at_a, e.mark_at_b)), Some((Circle, Head)));
        assert_eq!(out.pag.edge(1, 2).map(|e| (e.mark_at_a, e.mark_at_b)), Some((Circle, Head)));
    }

    #[test]
    fn chain_stays_circles() {
        let skel = MixedGraph::from_edges(3, [(0, 1, Tail, Tail), (1, 2, Tail, Tail)]).unwrap();
        let out = orient(&skel, &record(&[((0, 2), &[1])]), OrientMode::Fci, ConflictPolicy::Error).unwrap();
        assert!(out.pag.edges().iter().all(|e| e.mark_at_a == Circle && e.mark_at_b == Circle));
    }

    #[test]
    fn rule1_propagates() {
        // 0 -> 2 <- 1, 2 - 3: R1 makes 2 -> 3
        let skel = MixedGraph::from_edges(4, [(0, 2, Tail, Tail), (1, 2, Tail, Tail), (2, 3, Tail, Tail)]).unwrap();
        let sep = record(&[((0, 1), &[]), ((0, 3), &[2]), ((1, 3), &[2])]);
        let out = orient(&skel, &sep, OrientMode::Fci, ConflictPolicy::Error).unwrap();
        assert!(out.pag.is_directed(2, 3));
    }

    fn discriminating_separators(g: &MixedGraph, gamma: Option<usize>) -> SepRecord {
        let p = g.n_nodes();
        let mut sep = SepRecord::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if g.is_adjacent(i, j) {
                    continue;
                }
                let q = SeparatorQuery { i, j, gamma, eta: p };
                let s = find_local_separator(g, q).unwrap().unwrap();
                sep.insert(i, j, &s);
            }
        }
        sep
    }

    #[test]
    fn discriminating_path_local_versus_full() {
        let (g, n) = fixtures::discriminating_path_graph();
        let (y, j) = (n["y"], n["j"]);

        let full = discriminating_separators(&g, None);
        assert_eq!(full.get(n["i"], j).unwrap(), ids(&n, &["w", "u", "v", "x", "y"]).as_slice());
        let fci = orient(&g.skeleton(), &full, OrientMode::Fci, ConflictPolicy::Error).unwrap().pag;
        assert!(fci.is_directed(y, j));

        let local = discriminating_separators(&g, Some(5));
        assert_eq!(local.get(n["i"], j).unwrap(), ids(&n, &["w", "u", "v", "x"]).as_slice());
        let lf = orient(&g.skeleton(), &local, OrientMode::LfciLocal(5), ConflictPolicy::Error).unwrap().pag;
        assert_eq!(lf.mark(y, j), Some(Circle));
        assert_eq!(lf.mark(j, y), Some(Head));

        // plain R4 on the local separators makes the inconsistent y <-> j
        let bad = orient(&g.skeleton(), &local, OrientMode::Fci, ConflictPolicy::Keep).unwrap().pag;
        assert!(bad.is_bidirected(y, j));
    }

    #[test]
    fn conflict_policies() {
        let skel = MixedGraph::from_edges(2, [(0, 1, Tail, Tail)]).unwrap();
        let sep = SepRecord::new();
        let mut strict = Orienter::new(&skel, &sep, OrientMode::Fci, ConflictPolicy::Error);
        strict.set("test", 1, 0, Head).unwrap();
        strict.set("test", 1, 0, Head).unwrap();
        assert!(matches!(
            strict.set("test", 1, 0, Tail),
            Err(OrientError::InconsistentSeparators { at: 1, existing: Head, wanted: Tail, .. })
        ));
        let mut lenient = Orienter::new(&skel, &sep, OrientMode::Fci, ConflictPolicy::Keep);
        lenient.set("test", 1, 0, Head).unwrap();
        lenient.set("test", 1, 0, Tail).unwrap();
        let out = lenient.finish();
        assert_eq!(out.conflicts, 1);
        assert_eq!(out.pag.mark(1, 0), Some(Head));
    }
}
