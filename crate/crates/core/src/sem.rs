//! Linear structural equation models over mixed graphs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::citest::partial_correlation;
use crate::mixed_graph::{Mark, MixedGraph, NodeId};
use crate::projection::{latent_project, Partition, ProjectionError};
use crate::separation::local_separators;

/// Largest graph accepted by the trek enumerators.
pub const TREK_MAX_NODES: usize = 10;

const PD_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemError {
    #[error("I - B is singular")]
    SingularSystem,
    #[error("could not keep Omega positive definite after {0} attempts")]
    NotPositiveDefinite(usize),
    #[error("variable {0} has zero variance")]
    ZeroVariance(NodeId),
    #[error("graph has {0} nodes; limit is {1}")]
    GraphTooLarge(usize, usize),
    #[error("trek operations do not support undirected edges")]
    UndirectedEdges,
    #[error("graph has a directed cycle")]
    Cyclic,
    #[error("|C| = {0} and |D| = {1} differ")]
    SizeMismatch(usize, usize),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("model file: {0}")]
    Parse(String),
}

/// `W = B W + ε`, `ε ~ N(0, Ω)`. `b[(i, j)]` is the coefficient of `j -> i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemModel {
    pub graph: MixedGraph,
    pub b: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

/// Distribution of directed edge coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightDist {
    /// Uniform magnitude on `[low, high)` with a random sign.
    SignedUniform { low: f64, high: f64 },
    /// Uniform on `(low, high)`.
    Uniform { low: f64, high: f64 },
    /// Normal with mean 0.
    Normal { sd: f64 },
}

impl WeightDist {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            WeightDist::SignedUniform { low, high } => {
                let mag = rng.random_range(low..high);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
            WeightDist::Uniform { low, high } => rng.random_range(low..high),
            WeightDist::Normal { sd } => Normal::new(0.0, sd).expect("valid sd").sample(rng),
        }
    }
}

fn is_pd(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}

/// Random SEM on `graph` with `|β| ∈ [weight_low, weight_high)`.
pub fn random_sem(
    graph: &MixedGraph,
    weight_low: f64,
    weight_high: f64,
    omega_diag_range: (f64, f64),
    seed: u64,
) -> Result<SemModel, SemError> {
    random_sem_with(graph, WeightDist::SignedUniform { low: weight_low, high: weight_high }, omega_diag_range, seed)
}

/// Random SEM with an arbitrary coefficient distribution.
///
/// Bidirected entries of Ω are `±[0.1, 0.5)·√(ω_ii ω_jj)`; undirected edges
/// are placed in the support of Ω⁻¹ on the undirected block. Off-diagonal
/// magnitudes are halved until the matrix is positive definite.
pub fn random_sem_with(
    graph: &MixedGraph,
    weights: WeightDist,
    omega_diag_range: (f64, f64),
    seed: u64,
) -> Result<SemModel, SemError> {
    let p = graph.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DMatrix::zeros(p, p);
    for e in graph.edges() {
        if graph.is_directed(e.a, e.b) {
            b[(e.b, e.a)] = weights.draw(&mut rng);
        } else if graph.is_directed(e.b, e.a) {
            b[(e.a, e.b)] = weights.draw(&mut rng);
        }
    }
    let diag: Vec<f64> = (0..p).map(|_| rng.random_range(omega_diag_range.0..omega_diag_range.1)).collect();
    let signed_offdiag = |rng: &mut ChaCha8Rng| {
        let v = rng.random_range(0.1..0.5);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    };

    let mut omega = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
    let bi: Vec<(NodeId, NodeId, f64)> = graph
        .edges()
        .into_iter()
        .filter(|e| e.mark_at_a == Mark::Head && e.mark_at_b == Mark::Head)
        .map(|e| (e.a, e.b, signed_offdiag(&mut rng) * (diag[e.a] * diag[e.b]).sqrt()))
        .collect();
    let un: Vec<(NodeId, NodeId, f64)> = graph
        .edges()
        .into_iter()
        .filter(|e| e.mark_at_a == Mark::Tail && e.mark_at_b == Mark::Tail)
        .map(|e| (e.a, e.b, signed_offdiag(&mut rng) / (diag[e.a] * diag[e.b]).sqrt()))
        .collect();

    if !bi.is_empty() {
        let mut scale = 1.0;
        let mut attempt = 0;
        loop {
            let mut trial = omega.clone();
            for &(a, c, v) in &bi {
                trial[(a, c)] = v * scale;
                trial[(c, a)] = v * scale;
            }
            if is_pd(&trial) {
                omega = trial;
                break;
            }
            attempt += 1;
            if attempt >= PD_ATTEMPTS {
                return Err(SemError::NotPositiveDefinite(PD_ATTEMPTS));
            }
            scale *= 0.5;
        }
    }
    if !un.is_empty() {
        // precision on the undirected block, inverted into Ω
        let mut nodes: Vec<NodeId> = un.iter().flat_map(|&(a, c, _)| [a, c]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let pos = |v: NodeId| nodes.binary_search(&v).unwrap();
        let k = nodes.len();
        let mut scale = 1.0;
        let mut attempt = 0;
        let block = loop {
            let mut prec = DMatrix::from_fn(k, k, |r, c| if r == c { 1.0 / diag[nodes[r]] } else { 0.0 });
            for &(a, c, v) in &un {
                prec[(pos(a), pos(c))] = v * scale;
                prec[(pos(c), pos(a))] = v * scale;
            }
            if let Some(ch) = prec.cholesky() {
                break ch.inverse();
            }
            attempt += 1;
            if attempt >= PD_ATTEMPTS {
                return Err(SemError::NotPositiveDefinite(PD_ATTEMPTS));
            }
            scale *= 0.5;
        };
        for r in 0..k {
            for c in 0..k {
                omega[(nodes[r], nodes[c])] = block[(r, c)];
            }
        }
    }
    Ok(SemModel { graph: graph.clone(), b, omega })
}

impl SemModel {
    fn i_minus_b(&self) -> DMatrix<f64> {
        DMatrix::identity(self.b.nrows(), self.b.ncols()) - &self.b
    }

    pub fn n_nodes(&self) -> usize {
        self.b.nrows()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for a in 0..p {
        for c in (a + 1)..p {
            let v = 0.5 * (m[(a, c)] + m[(c, a)]);
            m[(a, c)] = v;
            m[(c, a)] = v;
        }
    }
}

/// `Σ = (I−B)⁻¹ Ω (I−B)⁻ᵀ`, by two LU solves.
pub fn covariance(m: &SemModel) -> Result<DMatrix<f64>, SemError> {
    let lu = m.i_minus_b().lu();
    let y = lu.solve(&m.omega).ok_or(SemError::SingularSystem)?;
    let mut sigma = lu.solve(&y.transpose()).ok_or(SemError::SingularSystem)?;
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// `n` draws of `W = (I−B)⁻¹ ε`, one row per sample.
pub fn sample(m: &SemModel, n: usize, seed: u64) -> Result<DMatrix<f64>, SemError> {
    let p = m.n_nodes();
    let chol = m.omega.clone().cholesky().ok_or(SemError::NotPositiveDefinite(0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    let eps = chol.l() * z;
    let w = m.i_minus_b().lu().solve(&eps).ok_or(SemError::SingularSystem)?;
    Ok(w.transpose())
}

/// Correlation matrix of `sigma`.
pub fn standardize(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, SemError> {
    let p = sigma.nrows();
    let d: Vec<f64> = (0..p)
        .map(|v| if sigma[(v, v)] > 0.0 { Ok(sigma[(v, v)].sqrt()) } else { Err(SemError::ZeroVariance(v)) })
        .collect::<Result<_, _>>()?;
    Ok(DMatrix::from_fn(p, p, |r, c| if r == c { 1.0 } else { sigma[(r, c)] / (d[r] * d[c]) }))
}

/// The model of the standardized variables: `B̃ = D̃BD̃⁻¹`, `Ω̃ = D̃ΩD̃` with
/// `D̃ = diag(Σ)^{-1/2}`.
pub fn standardize_model(m: &SemModel) -> Result<SemModel, SemError> {
    let sigma = covariance(m)?;
    let p = m.n_nodes();
    let mut d = vec![0.0; p];
    for v in 0..p {
        if sigma[(v, v)] <= 0.0 {
            return Err(SemError::ZeroVariance(v));
        }
        d[v] = 1.0 / sigma[(v, v)].sqrt();
    }
    let b = DMatrix::from_fn(p, p, |r, c| d[r] * m.b[(r, c)] / d[c]);
    let omega = DMatrix::from_fn(p, p, |r, c| d[r] * m.omega[(r, c)] * d[c]);
    Ok(SemModel { graph: m.graph.clone(), b, omega })
}

/// `Λ Ω Λᵀ` with `Λ = Σ_{r=0}^{γ} Bʳ`: covariance carried by treks whose
/// sides have at most `gamma` edges each.
pub fn short_trek_cov(m: &SemModel, gamma: usize) -> DMatrix<f64> {
    let p = m.n_nodes();
    let mut lambda = DMatrix::identity(p, p);
    let mut power = DMatrix::identity(p, p);
    for _ in 0..gamma {
        power = &power * &m.b;
        if power.iter().all(|&x| x == 0.0) {
            break;
        }
        lambda += &power;
    }
    &lambda * &m.omega * lambda.transpose()
}

/// Largest singular value.
pub fn spectral_norm(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    b.singular_values().iter().copied().fold(0.0, f64::max)
}

/// The bound `‖Ω‖ β^{γ+1}(2 − β^{γ+1}) / (1 − β)²` on `‖Σ − Σ_H‖`.
pub fn short_trek_bound(omega_norm: f64, beta: f64, gamma: usize) -> f64 {
    let t = beta.powi(gamma as i32 + 1);
    omega_norm * t * (2.0 - t) / ((1.0 - beta) * (1.0 - beta))
}

/// A trek between `i` and `j`: directed paths from the top node(s) into
/// each endpoint, joined at a shared top or by a bidirected edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trek {
    /// Top first, ending at `i`.
    pub left: Vec<NodeId>,
    /// Bidirected edge `(s, t)` between the tops, if any.
    pub middle: Option<(NodeId, NodeId)>,
    /// Top first, ending at `j`.
    pub right: Vec<NodeId>,
}

impl Trek {
    pub fn len(&self) -> usize {
        self.left.len() + self.right.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn top(&self) -> (NodeId, NodeId) {
        (self.left[0], self.right[0])
    }
}

fn check_trek_graph(g: &MixedGraph) -> Result<(), SemError> {
    if g.n_nodes() > TREK_MAX_NODES {
        return Err(SemError::GraphTooLarge(g.n_nodes(), TREK_MAX_NODES));
    }
    if g.edges().iter().any(|e| e.mark_at_a == Mark::Tail && e.mark_at_b == Mark::Tail) {
        return Err(SemError::UndirectedEdges);
    }
    if g.topological_order().is_none() {
        return Err(SemError::Cyclic);
    }
    Ok(())
}

/// All directed paths ending at `v` with at most `max_len` edges, top first.
fn paths_into(g: &MixedGraph, v: NodeId, max_len: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut stack = vec![vec![v]];
    while let Some(rev) = stack.pop() {
        let mut path = rev.clone();
        path.reverse();
        out.push(path);
        if rev.len() > max_len {
            continue;
        }
        let head = *rev.last().unwrap();
        for u in g.parents(head) {
            let mut next = rev.clone();
            next.push(u);
            stack.push(next);
        }
    }
    out.retain(|p| p.len() <= max_len + 1);
    out
}

/// All treks between `i` and `j` with `|P_L| + |P_R| ≤ max_total_len`.
pub fn enumerate_treks(m: &SemModel, i: NodeId, j: NodeId, max_total_len: usize) -> Result<Vec<Trek>, SemError> {
    check_trek_graph(&m.graph)?;
    let g = &m.graph;
    let into_i = paths_into(g, i, max_total_len);
    let into_j = paths_into(g, j, max_total_len);
    let mut out = Vec::new();
    for left in &into_i {
        let s = left[0];
        for right in &into_j {
            if left.len() + right.len() - 2 > max_total_len {
                continue;
            }
            let t = right[0];
            if s == t {
                out.push(Trek { left: left.clone(), middle: None, right: right.clone() });
            } else if g.is_bidirected(s, t) {
                out.push(Trek { left: left.clone(), middle: Some((s, t)), right: right.clone() });
            }
        }
    }
    Ok(out)
}

/// `m_τ = β^L ω_{s,t} β^R`.
pub fn trek_monomial(m: &SemModel, t: &Trek) -> f64 {
    let side = |path: &[NodeId]| path.windows(2).map(|w| m.b[(w[1], w[0])]).product::<f64>();
    let (s, u) = t.top();
    side(&t.left) * m.omega[(s, u)] * side(&t.right)
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for a in 0..perm.len() {
        for c in (a + 1)..perm.len() {
            if perm[a] > perm[c] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut perm = rest.clone();
            perm.insert(pos, k - 1);
            out.push(perm);
        }
    }
    out
}

fn trek_systems_sum(m: &SemModel, c: &[NodeId], d: &[NodeId], require_disjoint_sides: bool) -> Result<f64, SemError> {
    check_trek_graph(&m.graph)?;
    if c.len() != d.len() {
        return Err(SemError::SizeMismatch(c.len(), d.len()));
    }
    let p = m.n_nodes();
    let mut total = 0.0;
    for perm in permutations(c.len()) {
        let choices: Vec<Vec<(Trek, f64)>> = (0..c.len())
            .map(|k| {
                enumerate_treks(m, c[k], d[perm[k]], 2 * p).map(|ts| {
                    ts.into_iter()
                        .map(|t| {
                            let w = trek_monomial(m, &t);
                            (t, w)
                        })
                        .filter(|(_, w)| *w != 0.0)
                        .collect()
                })
            })
            .collect::<Result<_, _>>()?;
        let mut left_used = vec![false; p];
        let mut right_used = vec![false; p];
        let sum = systems_rec(&choices, 0, &mut left_used, &mut right_used, require_disjoint_sides);
        total += permutation_sign(&perm) * sum;
    }
    Ok(total)
}

fn systems_rec(
    choices: &[Vec<(Trek, f64)>],
    k: usize,
    left_used: &mut [bool],
    right_used: &mut [bool],
    disjoint: bool,
) -> f64 {
    if k == choices.len() {
        return 1.0;
    }
    let mut sum = 0.0;
    for (t, w) in &choices[k] {
        if disjoint && (t.left.iter().any(|&v| left_used[v]) || t.right.iter().any(|&v| right_used[v])) {
            continue;
        }
        if disjoint {
            t.left.iter().for_each(|&v| left_used[v] = true);
            t.right.iter().for_each(|&v| right_used[v] = true);
        }
        sum += w * systems_rec(choices, k + 1, left_used, right_used, disjoint);
        if disjoint {
            t.left.iter().for_each(|&v| left_used[v] = false);
            t.right.iter().for_each(|&v| right_used[v] = false);
        }
    }
    sum
}

/// `det Σ(C, D)` as the signed sum of trek-system monomials over systems
/// without sided intersection.
pub fn det_via_treks(m: &SemModel, c: &[NodeId], d: &[NodeId]) -> Result<f64, SemError> {
    trek_systems_sum(m, c, d, true)
}

/// As [`det_via_treks`] but summing over every trek system, including
/// those with sided intersections.
pub fn det_via_all_trek_systems(m: &SemModel, c: &[NodeId], d: &[NodeId]) -> Result<f64, SemError> {
    trek_systems_sum(m, c, d, false)
}

/// `min_S |ρ(i, j | S)|` over γ-local-graph separators `S` of `(i, j)` in
/// `mag` with `|S| ≤ eta`; the marginal `|ρ(i, j)|` when there is none.
pub fn pair_local_residual(
    sigma_obs: &DMatrix<f64>,
    mag: &MixedGraph,
    i: NodeId,
    j: NodeId,
    gamma: usize,
    eta: usize,
) -> f64 {
    let mut best = f64::INFINITY;
    for s in local_separators(mag, i, j, gamma, eta) {
        if let Ok(r) = partial_correlation(sigma_obs, i, j, &s) {
            best = best.min(r.abs());
            if best < 1e-12 {
                break;
            }
        }
    }
    if best.is_infinite() {
        best = partial_correlation(sigma_obs, i, j, &[]).map(f64::abs).unwrap_or(0.0);
    }
    best
}

/// `ρ* = max_{(i,j) non-adjacent} min_S |ρ(i, j | S)|`, see
/// [`pair_local_residual`].
pub fn local_corr_residual_for(sigma_obs: &DMatrix<f64>, mag: &MixedGraph, gamma: usize, eta: usize) -> f64 {
    let p = mag.n_nodes();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            if !mag.is_adjacent(i, j) {
                worst = worst.max(pair_local_residual(sigma_obs, mag, i, j, gamma, eta));
            }
        }
    }
    worst
}

/// [`local_corr_residual_for`] on the projection of `m` under `part`.
pub fn local_corr_residual(m: &SemModel, part: &Partition, gamma: usize, eta: usize) -> Result<f64, SemError> {
    let mag = latent_project(&m.graph, part)?;
    let sigma = covariance(m)?;
    let obs = &part.observed;
    let sigma_obs = DMatrix::from_fn(obs.len(), obs.len(), |r, c| sigma[(obs[r], obs[c])]);
    Ok(local_corr_residual_for(&sigma_obs, &mag, gamma, eta))
}

/// CSV triples `i,j,value` for the non-zero entries of `B` and of the upper
/// triangle of Ω.
pub fn model_to_csv(m: &SemModel) -> (String, String) {
    let p = m.n_nodes();
    let mut b = String::from("i,j,value\n");
    let mut o = String::from("i,j,value\n");
    for r in 0..p {
        for c in 0..p {
            if m.b[(r, c)] != 0.0 {
                b.push_str(&format!("{r},{c},{:e}\n", m.b[(r, c)]));
            }
            if c >= r && m.omega[(r, c)] != 0.0 {
                o.push_str(&format!("{r},{c},{:e}\n", m.omega[(r, c)]));
            }
        }
    }
    (b, o)
}

fn parse_triples(text: &str, p: usize, symmetric: bool) -> Result<DMatrix<f64>, SemError> {
    let mut m = DMatrix::zeros(p, p);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SemError::Parse(e.to_string()))?;
        if rec.len() != 3 {
            return Err(SemError::Parse(format!("expected 3 fields, got {}", rec.len())));
        }
        let r: usize = rec[0].parse().map_err(|_| SemError::Parse(format!("bad index {:?}", &rec[0])))?;
        let c: usize = rec[1].parse().map_err(|_| SemError::Parse(format!("bad index {:?}", &rec[1])))?;
        let v: f64 = rec[2].parse().map_err(|_| SemError::Parse(format!("bad value {:?}", &rec[2])))?;
        if r >= p || c >= p {
            return Err(SemError::Parse(format!("index ({r}, {c}) out of range")));
        }
        m[(r, c)] = v;
        if symmetric {
            m[(c, r)] = v;
        }
    }
    Ok(m)
}

/// Inverse of [`model_to_csv`].
pub fn model_from_csv(graph: MixedGraph, b_csv: &str, omega_csv: &str) -> Result<SemModel, SemError> {
    let p = graph.n_nodes();
    let b = parse_triples(b_csv, p, false)?;
    let omega = parse_triples(omega_csv, p, true)?;
    Ok(SemModel { graph, b, omega })
}
