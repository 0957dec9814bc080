//! Flat `key=value` configuration for the simulation harnesses.

use std::fmt;

use lfci_core::sem::WeightDist;
use lfci_core::simbench::{ExperimentConfig, Family, Method};

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Harness configuration: an [`ExperimentConfig`] template plus the lists
/// it is swept over.
#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub base: ExperimentConfig,
    pub families: Vec<Family>,
    pub ps: Vec<usize>,
    pub methods: Vec<Method>,
    /// Whether `seed` appeared in the file.
    pub seed_given: bool,
    pub fci_max_pdsep_size: Option<usize>,
    /// Edge weights for the short-trek probe.
    pub probe_weights: WeightDist,
    /// `d_γ` tolerance for the short-trek probe.
    pub tol: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        HarnessConfig {
            families: vec![base.family],
            ps: vec![base.p],
            base,
            methods: vec![Method::Fci, Method::Lfci, Method::LfciMb],
            seed_given: false,
            fci_max_pdsep_size: None,
            probe_weights: WeightDist::Uniform { low: -10.0, high: 10.0 },
            tol: 1e-4,
        }
    }
}

impl HarnessConfig {
    /// One [`ExperimentConfig`] per (family, p) cell.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &p in &self.ps {
                out.push(ExperimentConfig { family, p, ..self.base.clone() });
            }
        }
        out
    }
}

fn list<T>(v: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect();
    items.filter(|i| !i.is_empty())
}

fn pair(v: &str) -> Option<(f64, f64)> {
    let xs = list(v, |s| s.parse::<f64>().ok())?;
    match xs[..] {
        [a, b] => Some((a, b)),
        _ => None,
    }
}

/// `uniform:<low>:<high>`, `signed:<low>:<high>` or `normal:<sd>`.
fn weights(v: &str) -> Option<WeightDist> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let num = |i: usize| parts.get(i)?.parse::<f64>().ok();
    match parts[0] {
        "uniform" if parts.len() == 3 => Some(WeightDist::Uniform { low: num(1)?, high: num(2)? }),
        "signed" if parts.len() == 3 => Some(WeightDist::SignedUniform { low: num(1)?, high: num(2)? }),
        "normal" if parts.len() == 2 => Some(WeightDist::Normal { sd: num(1)? }),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<HarnessConfig, ConfigError> {
    let mut cfg = HarnessConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError { line, message: format!("expected key=value, got {body:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || ConfigError { line, message: format!("invalid value {value:?} for {key}") };
        let b = &mut cfg.base;
        match key {
            "family" => cfg.families = list(value, Family::parse).ok_or_else(bad)?,
            "p" => cfg.ps = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
            "methods" => cfg.methods = list(value, Method::parse).ok_or_else(bad)?,
            "n" => b.n = value.parse().map_err(|_| bad())?,
            "latent_fraction" => b.latent_fraction = value.parse().map_err(|_| bad())?,
            "alpha_grid" => b.alpha_grid = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
            "eta" => b.eta = value.parse().map_err(|_| bad())?,
            "gamma" => b.gamma = value.parse().map_err(|_| bad())?,
            "replicates" => b.replicates = value.parse().map_err(|_| bad())?,
            "seed" => {
                b.seed = value.parse().map_err(|_| bad())?;
                cfg.seed_given = true;
            }
            "avg_degree" => b.avg_degree = value.parse().map_err(|_| bad())?,
            "weight_range" => b.weight_range = pair(value).ok_or_else(bad)?,
            "omega_range" => b.omega_range = pair(value).ok_or_else(bad)?,
            "fci_max_pdsep_size" => cfg.fci_max_pdsep_size = Some(value.parse().map_err(|_| bad())?),
            "probe_weights" => cfg.probe_weights = weights(value).ok_or_else(bad)?,
            "tol" => cfg.tol = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError { line, message: format!("unknown key {key:?}") }),
        }
    }
    for c in cfg.cells() {
        c.validate().map_err(|e| ConfigError { line: 0, message: e.to_string() })?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_scalars() {
        let cfg = parse_config(
            "# smoke\nfamily = er, pl\np=20,50\nreplicates=3\nseed=9\nweight_range=0.2,0.8\nprobe_weights=normal:3\n",
        )
        .unwrap();
        assert_eq!(cfg.families, vec![Family::ER, Family::PL]);
        assert_eq!(cfg.ps, vec![20, 50]);
        assert_eq!(cfg.cells().len(), 4);
        assert_eq!(cfg.base.replicates, 3);
        assert!(cfg.seed_given);
        assert_eq!(cfg.base.weight_range, (0.2, 0.8));
        assert_eq!(cfg.probe_weights, WeightDist::Normal { sd: 3.0 });
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(parse_config("nope=1").unwrap_err().line, 1);
        assert_eq!(parse_config("\np=abc").unwrap_err().line, 2);
        assert!(parse_config("just text").is_err());
        assert!(parse_config("gamma=0").is_err());
        assert!(parse_config("alpha_grid=0.1,0.01").is_err());
    }
}
