//! Simulation instances and experiment tables.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generate::{generate_graph, Family, GraphSpec};
use super::metrics::skeleton_metrics;
use super::{derive_seed, fmt6, SimError};
use crate::citest::{critical_value, partial_correlation, sample_covariance, CiTester};
use crate::discovery::{estimate_moral_graph, fci, lfci, lfci_mb, pc, FciOptions, PcVariant};
use crate::mixed_graph::{MixedGraph, NodeId};
use crate::projection::{latent_project, mag_separators, true_pag, Partition};
use crate::sem::{covariance, local_corr_residual_for, pair_local_residual, random_sem, sample, SemModel};
use crate::separation::{markov_blanket, moral_graph};

/// Settings shared by the experiment harnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    /// Total node count, latents included.
    pub p: usize,
    /// Sample size; 0 skips data generation.
    pub n: usize,
    pub latent_fraction: f64,
    /// Ascending.
    pub alpha_grid: Vec<f64>,
    pub eta: usize,
    pub gamma: usize,
    pub replicates: usize,
    pub seed: u64,
    pub avg_degree: f64,
    /// `|β|` range of edge coefficients.
    pub weight_range: (f64, f64),
    /// Range of the error variances.
    pub omega_range: (f64, f64),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::ER,
            p: 20,
            n: 0,
            latent_fraction: 0.2,
            alpha_grid: vec![1e-20, 1e-10, 1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2],
            eta: 3,
            gamma: 6,
            replicates: 50,
            seed: 1,
            avg_degree: 2.0,
            weight_range: (0.1, 1.0),
            omega_range: (1.0, 2.0),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.p < 2 {
            return bad("p must be at least 2");
        }
        if !(0.0..1.0).contains(&self.latent_fraction) {
            return bad("latent_fraction must lie in [0, 1)");
        }
        if self.alpha_grid.windows(2).any(|w| w[0] > w[1]) {
            return bad("alpha_grid must be sorted ascending");
        }
        if self.alpha_grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("alpha values must lie in (0, 1)");
        }
        if self.gamma == 0 {
            return bad("gamma must be at least 1");
        }
        if self.weight_range.0 >= self.weight_range.1
            || self.omega_range.0 >= self.omega_range.1
            || self.omega_range.0 <= 0.0
        {
            return bad("weight and omega ranges must be non-empty, omega positive");
        }
        Ok(())
    }

    pub fn graph_spec(&self) -> GraphSpec {
        GraphSpec { family: self.family, p: self.p, avg_degree: self.avg_degree }
    }
}

/// One simulated problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub dag: MixedGraph,
    pub partition: Partition,
    pub model: SemModel,
    /// Over the observed nodes, in ascending order of DAG index.
    pub mag: MixedGraph,
    pub pag: MixedGraph,
    /// `n × |observed|`; empty when `cfg.n == 0`.
    pub data: DMatrix<f64>,
}

impl Instance {
    /// Population covariance of the observed variables.
    pub fn observed_covariance(&self) -> Result<DMatrix<f64>, SimError> {
        let sigma = covariance(&self.model)?;
        let obs = &self.partition.observed;
        Ok(DMatrix::from_fn(obs.len(), obs.len(), |r, c| sigma[(obs[r], obs[c])]))
    }
}

/// DAG, latent partition and MAG of replicate `replicate`; the structural
/// part of [`make_instance`].
pub fn make_mag(cfg: &ExperimentConfig, replicate: usize) -> Result<(MixedGraph, Partition, MixedGraph), SimError> {
    cfg.validate()?;
    let base = derive_seed(cfg.seed, replicate as u64);
    let dag = generate_graph(&cfg.graph_spec(), derive_seed(base, 0));
    let q = (cfg.latent_fraction * cfg.p as f64).round() as usize;
    let mut order: Vec<NodeId> = (0..cfg.p).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(base, 1)));
    let partition = Partition::new(cfg.p, &order[..q], &[])?;
    let mag = latent_project(&dag, &partition)?;
    Ok((dag, partition, mag))
}

/// Builds replicate `replicate` of `cfg`; deterministic in `(cfg.seed, replicate)`.
pub fn make_instance(cfg: &ExperimentConfig, replicate: usize) -> Result<Instance, SimError> {
    let (dag, partition, mag) = make_mag(cfg, replicate)?;
    let base = derive_seed(cfg.seed, replicate as u64);
    let model = random_sem(&dag, cfg.weight_range.0, cfg.weight_range.1, cfg.omega_range, derive_seed(base, 2))?;
    let pag = true_pag(&mag)?;
    let data = if cfg.n > 0 {
        let full = sample(&model, cfg.n, derive_seed(base, 3))?;
        let obs = &partition.observed;
        DMatrix::from_fn(cfg.n, obs.len(), |r, c| full[(r, obs[c])])
    } else {
        DMatrix::zeros(0, partition.observed.len())
    };
    Ok(Instance { dag, partition, model, mag, pag, data })
}

/// Discovery methods compared by the harnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Pc,
    Fci,
    Lfci,
    LfciMb,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pc => "pc",
            Method::Fci => "fci",
            Method::Lfci => "lfci",
            Method::LfciMb => "lfci_mb",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pc" => Some(Method::Pc),
            "fci" => Some(Method::Fci),
            "lfci" => Some(Method::Lfci),
            "lfci_mb" | "lfcimb" => Some(Method::LfciMb),
            _ => None,
        }
    }
}

/// Per-replicate result of one oracle run.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub method: Method,
    pub recovered: bool,
    pub rho_star: f64,
    pub n_tests: u64,
    pub m_reach: usize,
}

/// ρ* restricted to pairs inside each other's γ-local Markov blanket;
/// other non-adjacent pairs are separated by the blanket and contribute 0.
fn rho_star_blanket(sigma: &DMatrix<f64>, mag: &MixedGraph, gamma: usize, eta: usize) -> f64 {
    let p = mag.n_nodes();
    let blankets: Vec<Vec<NodeId>> = (0..p).map(|v| markov_blanket(mag, v, Some(gamma))).collect();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for (j, blanket) in blankets.iter().enumerate().skip(i + 1) {
            if !mag.is_adjacent(i, j) && blanket.contains(&i) {
                worst = worst.max(pair_local_residual(sigma, mag, i, j, gamma, eta));
            }
        }
    }
    worst
}

/// `max |ρ(i, j | S)|` over the recorded global separators of `mag`.
fn rho_star_global(sigma: &DMatrix<f64>, mag: &MixedGraph) -> Result<f64, SimError> {
    let sep = mag_separators(mag)?;
    Ok(sep
        .iter()
        .map(|((i, j), s)| partial_correlation(sigma, i, j, s).map(f64::abs).unwrap_or(0.0))
        .fold(0.0, f64::max))
}

/// Runs `fci`, `lfci` and `lfci_mb` with oracle testers on one instance.
///
/// FCI uses m-separation in the MAG; the local methods use γ-local-graph
/// separation. lfci_mb starts from the γ-local moral graph.
pub fn oracle_runs(cfg: &ExperimentConfig, inst: &Instance, methods: &[Method]) -> Result<Vec<OracleRun>, SimError> {
    let q = inst.mag.n_nodes();
    let sigma = inst.observed_covariance()?;
    let mut out = Vec::new();
    for &method in methods {
        let (res, rho) = match method {
            Method::Fci => {
                let t = CiTester::graph_oracle(inst.mag.clone());
                (
                    fci(&t, q, FciOptions { allow_large: true, max_pdsep_size: None })?,
                    rho_star_global(&sigma, &inst.mag)?,
                )
            }
            Method::Lfci => {
                let t = CiTester::local_oracle(inst.mag.clone(), cfg.gamma);
                (lfci(&t, q, cfg.eta, cfg.gamma)?, local_corr_residual_for(&sigma, &inst.mag, cfg.gamma, cfg.eta))
            }
            Method::LfciMb => {
                let t = CiTester::local_oracle(inst.mag.clone(), cfg.gamma);
                let moral = moral_graph(&inst.mag, Some(cfg.gamma));
                let eta_mb = cfg.eta.saturating_sub(1);
                (lfci_mb(&t, q, cfg.eta, cfg.gamma, &moral)?, rho_star_blanket(&sigma, &inst.mag, cfg.gamma, eta_mb))
            }
            Method::Pc => {
                let t = CiTester::graph_oracle(inst.mag.clone());
                (pc(&t, q, PcVariant::Standard)?, rho_star_global(&sigma, &inst.mag)?)
            }
        };
        out.push(OracleRun {
            method,
            recovered: res.graph == inst.pag,
            rho_star: rho,
            n_tests: res.stats.n_tests,
            m_reach: res.stats.m_reach,
        });
    }
    Ok(out)
}

/// One row of the oracle table.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub family: String,
    pub p: usize,
    pub method: Method,
    pub recovered_frac: f64,
    pub rho_star_median: f64,
    pub log_n_tests_mean: f64,
    pub m_reach_mean: f64,
    /// Largest reach level over the replicates.
    pub m_reach_max: usize,
    pub n_tests_mean: f64,
}

pub const ORACLE_HEADER: &str = "family,p,method,recovered_frac,rho_star_median,log_n_tests_mean,m_reach_mean";

impl OracleRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.family,
            self.p,
            self.method.name(),
            fmt6(self.recovered_frac),
            fmt6(self.rho_star_median),
            fmt6(self.log_n_tests_mean),
            fmt6(self.m_reach_mean)
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Oracle comparison of `methods` over `cfg.replicates` instances.
pub fn oracle_experiment_with(cfg: &ExperimentConfig, methods: &[Method]) -> Result<Vec<OracleRow>, SimError> {
    cfg.validate()?;
    let runs: Vec<Vec<OracleRun>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| make_instance(cfg, r).and_then(|inst| oracle_runs(cfg, &inst, methods)))
        .collect::<Result<_, _>>()?;
    let reps = cfg.replicates.max(1) as f64;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let col: Vec<&OracleRun> = runs.iter().map(|r| &r[k]).collect();
            OracleRow {
                family: cfg.family.name(),
                p: cfg.p,
                method,
                recovered_frac: col.iter().filter(|r| r.recovered).count() as f64 / reps,
                rho_star_median: median(col.iter().map(|r| r.rho_star).collect()),
                log_n_tests_mean: col.iter().map(|r| (r.n_tests.max(1) as f64).ln()).sum::<f64>() / reps,
                m_reach_mean: col.iter().map(|r| r.m_reach as f64).sum::<f64>() / reps,
                m_reach_max: col.iter().map(|r| r.m_reach).max().unwrap_or(0),
                n_tests_mean: col.iter().map(|r| r.n_tests as f64).sum::<f64>() / reps,
            }
        })
        .collect())
}

/// [`oracle_experiment_with`] for `fci`, `lfci` and `lfci_mb`.
pub fn oracle_experiment(cfg: &ExperimentConfig) -> Result<Vec<OracleRow>, SimError> {
    oracle_experiment_with(cfg, &[Method::Fci, Method::Lfci, Method::LfciMb])
}

/// Mean skeleton precision/recall of one method at one α.
#[derive(Clone, Debug, PartialEq)]
pub struct PrPoint {
    pub method: Method,
    pub alpha: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    /// Mean over replicates of the per-replicate F1.
    pub f1_mean: f64,
    pub replicates: usize,
}

pub const PR_HEADER: &str = "method,alpha,precision_mean,recall_mean,replicates";

impl PrPoint {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.method.name(),
            fmt6(self.alpha),
            fmt6(self.precision_mean),
            fmt6(self.recall_mean),
            self.replicates
        )
    }

    /// F1 of the mean precision and recall.
    pub fn f1_of_means(&self) -> f64 {
        let (p, r) = (self.precision_mean, self.recall_mean);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Options for [`pr_sweep_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SweepOptions {
    /// Cap on the possible-D-SEP conditioning sets tried by FCI.
    pub fci_max_pdsep_size: Option<usize>,
}

/// Threshold on the partial correlation given all other variables that
/// matches a Fisher-z test at level `alpha`.
pub fn moral_threshold(alpha: f64, n: usize, p: usize) -> f64 {
    let z = critical_value(alpha);
    let dof = n as f64 - (p as f64 - 2.0) - 3.0;
    if dof <= 0.0 {
        return 1.0;
    }
    (z / dof.sqrt()).tanh()
}

fn sample_run(
    method: Method,
    inst: &Instance,
    cfg: &ExperimentConfig,
    alpha: f64,
    opts: SweepOptions,
) -> Result<MixedGraph, SimError> {
    let est = sample_covariance(&inst.data)?;
    let q = inst.mag.n_nodes();
    let tester = CiTester::sample_test(est.clone(), alpha);
    let out = match method {
        Method::Pc => pc(&tester, q, PcVariant::Standard)?,
        Method::Fci => fci(&tester, q, FciOptions { allow_large: true, max_pdsep_size: opts.fci_max_pdsep_size })?,
        Method::Lfci => lfci(&tester, q, cfg.eta, cfg.gamma)?,
        Method::LfciMb => {
            let moral = estimate_moral_graph(&est, 1e-10, moral_threshold(alpha, est.n, q))?;
            lfci_mb(&tester, q, cfg.eta, cfg.gamma, &moral)?
        }
    };
    Ok(out.graph)
}

/// Skeleton precision/recall against the true MAG for each method and α.
pub fn pr_sweep_with(cfg: &ExperimentConfig, methods: &[Method], opts: SweepOptions) -> Result<Vec<PrPoint>, SimError> {
    cfg.validate()?;
    if cfg.n == 0 {
        return Err(SimError::Config("pr_sweep needs n > 0".into()));
    }
    // per replicate: [method][alpha] -> (precision, recall, f1)
    let per_rep: Vec<Vec<Vec<(f64, f64, f64)>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = make_instance(cfg, r)?;
            methods
                .iter()
                .map(|&m| {
                    cfg.alpha_grid
                        .iter()
                        .map(|&a| {
                            let g = sample_run(m, &inst, cfg, a, opts)?;
                            let met = skeleton_metrics(&g, &inst.mag)?;
                            Ok((met.precision, met.recall, met.f1()))
                        })
                        .collect::<Result<Vec<_>, SimError>>()
                })
                .collect::<Result<Vec<_>, SimError>>()
        })
        .collect::<Result<_, _>>()?;
    let reps = cfg.replicates.max(1) as f64;
    let mut out = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        for (a, &alpha) in cfg.alpha_grid.iter().enumerate() {
            let sum = per_rep.iter().fold((0.0, 0.0, 0.0), |acc, r| {
                let (p, rc, f) = r[k][a];
                (acc.0 + p, acc.1 + rc, acc.2 + f)
            });
            out.push(PrPoint {
                method,
                alpha,
                precision_mean: sum.0 / reps,
                recall_mean: sum.1 / reps,
                f1_mean: sum.2 / reps,
                replicates: cfg.replicates,
            });
        }
    }
    Ok(out)
}

/// [`pr_sweep_with`] for `pc`, `fci`, `lfci` and `lfci_mb`.
pub fn pr_sweep(cfg: &ExperimentConfig) -> Result<Vec<PrPoint>, SimError> {
    pr_sweep_with(cfg, &[Method::Pc, Method::Fci, Method::Lfci, Method::LfciMb], SweepOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family) -> ExperimentConfig {
        ExperimentConfig { family, p: 15, replicates: 3, ..Default::default() }
    }

    #[test]
    fn instances_are_deterministic() {
        let cfg = ExperimentConfig { n: 50, ..small(Family::ER) };
        let a = make_instance(&cfg, 2).unwrap();
        let b = make_instance(&cfg, 2).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.pag, b.pag);
        assert_eq!(a.mag.n_nodes(), 12);
        assert_ne!(make_instance(&cfg, 3).unwrap().dag, a.dag);
    }

    #[test]
    fn no_latents_gives_dag() {
        let cfg = ExperimentConfig { latent_fraction: 0.0, ..small(Family::PL) };
        let inst = make_instance(&cfg, 0).unwrap();
        assert_eq!(inst.mag, inst.dag);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig { latent_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { alpha_grid: vec![0.1, 0.01], ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn oracle_table_smoke() {
        let rows = oracle_experiment(&small(Family::WS)).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.recovered_frac, 1.0, "{r:?}");
            assert!(r.m_reach_max <= 3 || r.method == Method::Fci);
        }
        assert!(rows[0].csv().starts_with("ws,15,fci,1,"));
    }

    #[test]
    fn pr_sweep_single_alpha() {
        let cfg = ExperimentConfig { n: 200, alpha_grid: vec![0.01], replicates: 2, ..small(Family::ER) };
        let pts = pr_sweep(&cfg).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.precision_mean) && (0.0..=1.0).contains(&p.recall_mean)));
    }

    #[test]
    fn moral_threshold_matches_fisher_z() {
        let t = moral_threshold(0.01, 500, 40);
        let a = crate::citest::alpha_for_threshold(t, 500, 38);
        assert!((a - 0.01).abs() < 1e-9);
    }
}
