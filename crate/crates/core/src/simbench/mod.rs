//! Random graphs, simulated instances, metrics and experiment tables.

pub mod experiment;
pub mod generate;
pub mod metrics;
pub mod probes;

use thiserror::Error;

use crate::citest::CiError;
use crate::discovery::DiscoveryError;
use crate::projection::ProjectionError;
use crate::sem::SemError;

pub use experiment::{
    make_instance, make_mag, moral_threshold, oracle_experiment, oracle_experiment_with, oracle_runs, pr_sweep,
    pr_sweep_with, ExperimentConfig, Instance, Method, OracleRow, OracleRun, PrPoint, SweepOptions, ORACLE_HEADER,
    PR_HEADER,
};
pub use generate::{generate_graph, orient_randomly, random_ancestral_graph, BaseFamily, Family, GraphSpec};
pub use metrics::{dshd, shd_and_marks, skeleton_metrics, Metrics};
pub use probes::{
    d_gamma_curve, local_moral_equality, min_gamma_for_model, min_gamma_short_trek, trek_probe_model, TrekProbe,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("graph has {found} nodes, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("d_gamma never fell below tolerance within {0} steps")]
    NoConvergence(usize),
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Ci(#[from] CiError),
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `stream` of `seed`, independent of evaluation order.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed).wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Six significant digits, without trailing zeros.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        let s = format!("{x:.5e}");
        let (m, e) = s.split_once('e').expect("exponent");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        return format!("{m}e{e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6(0.123456789), "0.123457");
        assert_eq!(fmt6(123456.789), "123457");
        assert_eq!(fmt6(1e-20), "1e-20");
        assert_eq!(fmt6(5e-4), "0.0005");
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(-2.5), "-2.5");
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
