//! Checks of the modelling assumptions on simulated graphs.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::experiment::{make_mag, ExperimentConfig};
use super::generate::{generate_graph, GraphSpec};
use super::SimError;
use crate::sem::{covariance, random_sem_with, standardize_model, SemModel, WeightDist};
use crate::separation::moral_graph;

/// `d_γ = max |Σ̃ − Σ̃_γ|` entrywise for `γ = 0, 1, …` until the short-trek
/// sum is exact (at most `p − 1` for a DAG). `model` should be standardized.
pub fn d_gamma_curve(model: &SemModel) -> Result<Vec<f64>, SimError> {
    let p = model.n_nodes();
    let sigma = covariance(model)?;
    let mut lambda = DMatrix::identity(p, p);
    let mut power = DMatrix::identity(p, p);
    let mut out = Vec::new();
    loop {
        let approx = &lambda * &model.omega * lambda.transpose();
        out.push((&sigma - approx).abs().max());
        power = &power * &model.b;
        if power.iter().all(|&x| x == 0.0) || out.len() > p {
            return Ok(out);
        }
        lambda += &power;
    }
}

/// Smallest `γ` with `d_γ ≤ tol` on the standardized version of `model`.
pub fn min_gamma_for_model(model: &SemModel, tol: f64) -> Result<usize, SimError> {
    let std = standardize_model(model)?;
    let curve = d_gamma_curve(&std)?;
    curve.iter().position(|&d| d <= tol).ok_or(SimError::NoConvergence(curve.len()))
}

/// Short-trek probe: for each replicate, a random DAG from `spec` with
/// coefficients from `weights` and error variances on `omega_range`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrekProbe {
    pub spec: GraphSpec,
    pub weights: WeightDist,
    pub omega_range: (f64, f64),
    pub replicates: usize,
    pub seed: u64,
}

/// Random model of replicate `r`.
pub fn trek_probe_model(probe: &TrekProbe, r: usize) -> Result<SemModel, SimError> {
    let base = super::derive_seed(probe.seed, r as u64);
    let dag = generate_graph(&probe.spec, super::derive_seed(base, 0));
    Ok(random_sem_with(&dag, probe.weights, probe.omega_range, super::derive_seed(base, 2))?)
}

/// `min{γ : d_γ ≤ tol}` per replicate.
pub fn min_gamma_short_trek(probe: &TrekProbe, tol: f64) -> Result<Vec<usize>, SimError> {
    (0..probe.replicates)
        .into_par_iter()
        .map(|r| trek_probe_model(probe, r).and_then(|m| min_gamma_for_model(&m, tol)))
        .collect()
}

/// Fraction of replicates whose γ-local moral graph equals the moral graph
/// of the MAG.
pub fn local_moral_equality(cfg: &ExperimentConfig) -> Result<f64, SimError> {
    let equal: Vec<bool> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| make_mag(cfg, r).map(|(_, _, mag)| moral_graph(&mag, Some(cfg.gamma)) == moral_graph(&mag, None)))
        .collect::<Result<_, _>>()?;
    Ok(equal.iter().filter(|&&e| e).count() as f64 / cfg.replicates.max(1) as f64)
}
