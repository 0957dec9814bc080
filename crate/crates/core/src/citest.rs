//! Conditional-independence decisions: graph oracle, Gaussian population
//! oracle and the Fisher-z test, behind one counting interface.

use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::mixed_graph::{MixedGraph, NodeId};
use crate::separation::{local_graph, m_connected};

/// Default population threshold: "zero up to floating point".
pub const DEFAULT_LAMBDA: f64 = 1e-9;

/// Relative pivot floor for the conditioning-block factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

const RHO_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CiError {
    #[error("conditioning set contains an endpoint ({0})")]
    InvalidConditioningSet(NodeId),
    #[error("conditioning block is singular at node {0}")]
    SingularConditioningBlock(NodeId),
    #[error("residual variance of node {0} vanishes given the conditioning set")]
    DegenerateResidualVariance(NodeId),
    #[error("need n - |S| - 3 >= 1, got n = {n}, |S| = {s}")]
    InsufficientSamples { n: usize, s: usize },
    #[error("no data rows")]
    EmptyData,
    #[error("data: {0}")]
    Data(String),
}

/// Partial correlation `ρ(i, j | S)` of the covariance `sigma`.
///
/// Factorizes the block on `(S, i, j)`; the trailing 2×2 Cholesky block is
/// the residual covariance of `(i, j)` given `S`.
pub fn partial_correlation(sigma: &DMatrix<f64>, i: NodeId, j: NodeId, s: &[NodeId]) -> Result<f64, CiError> {
    if let Some(&bad) = s.iter().find(|&&v| v == i || v == j) {
        return Err(CiError::InvalidConditioningSet(bad));
    }
    let idx: Vec<NodeId> = s.iter().copied().chain([i, j]).collect();
    let k = idx.len();
    let mut l = vec![0.0f64; k * k];
    for r in 0..k {
        for c in 0..=r {
            let mut v = sigma[(idx[r], idx[c])];
            for t in 0..c {
                v -= l[r * k + t] * l[c * k + t];
            }
            if r == c {
                let scale = sigma[(idx[r], idx[r])].abs().max(f64::MIN_POSITIVE);
                if v <= PIVOT_FLOOR * scale {
                    return Err(if r < s.len() {
                        CiError::SingularConditioningBlock(idx[r])
                    } else {
                        CiError::DegenerateResidualVariance(idx[r])
                    });
                }
                l[r * k + r] = v.sqrt();
            } else {
                l[r * k + c] = v / l[c * k + c];
            }
        }
    }
    let (a, b) = (k - 2, k - 1);
    let l_ba = l[b * k + a];
    let l_bb = l[b * k + b];
    let rho = l_ba / (l_ba * l_ba + l_bb * l_bb).sqrt();
    Ok(rho.clamp(-1.0, 1.0))
}

/// Sample covariance with its sample count.
#[derive(Clone, Debug, PartialEq)]
pub struct CovEstimate {
    pub sigma_hat: DMatrix<f64>,
    pub n: usize,
}

/// Mean-centered `(1/n) XᵀX` of an `n × p` data matrix.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<CovEstimate, CiError> {
    let n = data.nrows();
    if n == 0 {
        return Err(CiError::EmptyData);
    }
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let mut sigma_hat = centered.transpose() * &centered / n as f64;
    // exact symmetry
    let p = sigma_hat.nrows();
    for a in 0..p {
        for b in (a + 1)..p {
            let v = 0.5 * (sigma_hat[(a, b)] + sigma_hat[(b, a)]);
            sigma_hat[(a, b)] = v;
            sigma_hat[(b, a)] = v;
        }
    }
    Ok(CovEstimate { sigma_hat, n })
}

fn fisher_g(rho: f64) -> f64 {
    rho.clamp(-RHO_CLAMP, RHO_CLAMP).atanh()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Two-sided Fisher-z test statistic `√(n−|S|−3)·|g(ρ)|`.
pub fn fisher_z_statistic(rho: f64, n: usize, s_len: usize) -> Result<f64, CiError> {
    if n < s_len + 4 {
        return Err(CiError::InsufficientSamples { n, s: s_len });
    }
    Ok(((n - s_len - 3) as f64).sqrt() * fisher_g(rho).abs())
}

/// `true` means "independent": the statistic does not exceed `Φ⁻¹(1−α/2)`.
pub fn fisher_z_from_rho(rho: f64, n: usize, s_len: usize, alpha: f64) -> Result<bool, CiError> {
    let z = fisher_z_statistic(rho, n, s_len)?;
    Ok(z <= critical_value(alpha))
}

/// `Φ⁻¹(1−α/2)`, evaluated in the upper tail so tiny `α` keep precision.
pub fn critical_value(alpha: f64) -> f64 {
    -std_normal().inverse_cdf(alpha / 2.0)
}

pub fn fisher_z_decide(est: &CovEstimate, i: NodeId, j: NodeId, s: &[NodeId], alpha: f64) -> Result<bool, CiError> {
    if est.n < s.len() + 4 {
        return Err(CiError::InsufficientSamples { n: est.n, s: s.len() });
    }
    let rho = partial_correlation(&est.sigma_hat, i, j, s)?;
    fisher_z_from_rho(rho, est.n, s.len(), alpha)
}

/// Significance level at which the Fisher-z test declares dependence
/// exactly when `|ρ̂| > t`: `α = 2(1 − Φ(√(n−|S|−3)·g(t)))`.
pub fn alpha_for_threshold(t: f64, n: usize, s_len: usize) -> f64 {
    let z = ((n - s_len - 3) as f64).sqrt() * fisher_g(t);
    erfc(z / std::f64::consts::SQRT_2)
}

/// Correlation threshold implied by a significance level (inverse of
/// [`alpha_for_threshold`]).
pub fn threshold_for_alpha(alpha: f64, n: usize, s_len: usize) -> f64 {
    let z = critical_value(alpha);
    (z / ((n - s_len - 3) as f64).sqrt()).tanh()
}

pub enum TesterKind {
    /// m-separation in `graph`; with `locality = Some(γ)` separation is
    /// decided inside the γ-local graph of each queried pair.
    GraphOracle { graph: MixedGraph, locality: Option<usize> },
    /// `|ρ(i, j | S)| ≤ λ` on a population covariance.
    GaussOracle { sigma: DMatrix<f64>, lambda: f64 },
    /// Fisher-z test on a sample covariance.
    SampleTest { est: CovEstimate, alpha: f64 },
}

/// A conditional-independence decision procedure with a decision counter.
pub struct CiTester {
    kind: TesterKind,
    counter: AtomicU64,
    local_cache: Vec<OnceLock<MixedGraph>>,
}

impl CiTester {
    pub fn new(kind: TesterKind) -> Self {
        let local_cache = match &kind {
            TesterKind::GraphOracle { graph, locality: Some(_) } => {
                let p = graph.n_nodes();
                (0..p * p).map(|_| OnceLock::new()).collect()
            }
            _ => Vec::new(),
        };
        CiTester { kind, counter: AtomicU64::new(0), local_cache }
    }

    pub fn graph_oracle(graph: MixedGraph) -> Self {
        Self::new(TesterKind::GraphOracle { graph, locality: None })
    }

    pub fn local_oracle(graph: MixedGraph, gamma: usize) -> Self {
        Self::new(TesterKind::GraphOracle { graph, locality: Some(gamma) })
    }

    pub fn gauss_oracle(sigma: DMatrix<f64>, lambda: f64) -> Self {
        Self::new(TesterKind::GaussOracle { sigma, lambda })
    }

    pub fn sample_test(est: CovEstimate, alpha: f64) -> Self {
        Self::new(TesterKind::SampleTest { est, alpha })
    }

    pub fn kind(&self) -> &TesterKind {
        &self.kind
    }

    pub fn n_nodes(&self) -> usize {
        match &self.kind {
            TesterKind::GraphOracle { graph, .. } => graph.n_nodes(),
            TesterKind::GaussOracle { sigma, .. } => sigma.nrows(),
            TesterKind::SampleTest { est, .. } => est.sigma_hat.nrows(),
        }
    }

    /// Whether decisions are exact (oracles), as opposed to sample tests.
    pub fn is_oracle(&self) -> bool {
        !matches!(self.kind, TesterKind::SampleTest { .. })
    }

    pub fn count(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.counter.store(0, Ordering::Relaxed);
    }

    /// Decides `i ⟂ j | S`; `true` means independent. Every call counts.
    pub fn decide(&self, i: NodeId, j: NodeId, s: &[NodeId]) -> Result<bool, CiError> {
        if let Some(&bad) = s.iter().find(|&&v| v == i || v == j) {
            return Err(CiError::InvalidConditioningSet(bad));
        }
        self.counter.fetch_add(1, Ordering::Relaxed);
        match &self.kind {
            TesterKind::GraphOracle { graph, locality: None } => Ok(!m_connected(graph, i, j, s)),
            TesterKind::GraphOracle { graph, locality: Some(gamma) } => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let p = graph.n_nodes();
                let local = self.local_cache[a * p + b].get_or_init(|| local_graph(graph, a, b, *gamma).induced);
                Ok(!m_connected(local, a, b, s))
            }
            TesterKind::GaussOracle { sigma, lambda } => Ok(partial_correlation(sigma, i, j, s)?.abs() <= *lambda),
            TesterKind::SampleTest { est, alpha } => fisher_z_decide(est, i, j, s, *alpha),
        }
    }
}

/// Reads a data CSV: a header row of labels, then one sample per row.
pub fn read_data_csv<R: Read>(reader: R) -> Result<(Vec<String>, DMatrix<f64>), CiError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let labels: Vec<String> =
        rdr.headers().map_err(|e| CiError::Data(e.to_string()))?.iter().map(str::to_string).collect();
    if labels.is_empty() {
        return Err(CiError::Data("empty header".into()));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CiError::Data(e.to_string()))?;
        if rec.len() != labels.len() {
            return Err(CiError::Data(format!("row {} has {} fields, expected {}", row + 2, rec.len(), labels.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| CiError::Data(format!("row {}: cannot parse {field:?} as a number", row + 2)))?;
            values.push(v);
        }
        n += 1;
    }
    Ok((labels.clone(), DMatrix::from_row_slice(n, labels.len(), &values)))
}

/// Writes a data matrix as CSV with the given header labels.
pub fn write_data_csv<W: std::io::Write>(writer: W, labels: &[String], data: &DMatrix<f64>) -> Result<(), CiError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(labels).map_err(|e| CiError::Data(e.to_string()))?;
    for r in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|c| format!("{:e}", data[(r, c)])).collect();
        w.write_record(&row).map_err(|e| CiError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| CiError::Data(e.to_string()))?;
    Ok(())
}
