//! Tunable parameters, loadable from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

/// How a view spectrum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    /// One dense FFT per shift.
    Dense,
    /// Sparse recovery on the view signal, with dense FFT terminals.
    #[default]
    Recursive,
}

/// Shape of the identification moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModuliKind {
    /// Three primes near the target.
    #[default]
    Prime,
    /// Each modulus is a product of three primes, so views can recurse.
    Composite,
}

/// Which gate records go into the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GateRecords {
    /// One record per recovered frequency.
    #[default]
    Recovered,
    /// Every pair of the top residue sets.
    Full,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Coverage factor: each residue set keeps the top `alpha * k` bins.
    pub alpha: f64,
    /// Largest admissible load `k / m` for sparse recovery.
    pub lambda_threshold: f64,
    /// Number of verification views `t`.
    pub verify_views: usize,
    pub sparse_rho_max: f64,
    pub moderate_rho_max: f64,
    /// Time shifts per view (2 or 3).
    pub shifts: usize,
    /// Explicit identification moduli.
    pub moduli: Option<Vec<u64>>,
    /// Use `a = 1, b = 0` on the identification views.
    pub identity_hash: bool,
    pub moduli_kind: ModuliKind,
    pub singleton_tol: f64,
    pub noise_floor_rel: f64,
    pub verify_eps_rel: f64,
    pub tau_rel: f64,
    /// Peeling round cap is `ceil(round_factor * log2(k + 2))`.
    pub round_factor: f64,
    pub max_rehash: u32,
    pub max_extra_verify_views: usize,
    pub view_mode: ViewMode,
    pub verify_mode: ViewMode,
    /// Recursion depth limit; `None` means `ceil(log2 log2 N)`.
    pub max_depth: Option<u32>,
    /// Largest grid the dense fallback will materialize.
    pub dense_cap: u64,
    pub gate_records: GateRecords,
    /// Nominal signal length; recovered frequencies at or above it are
    /// certificate violations.
    pub declared_n: Option<u64>,
    pub force_fallback: bool,
    /// Testing hook: move one recovered frequency by one bin before verification.
    pub corrupt_candidate: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            lambda_threshold: 0.1,
            verify_views: 3,
            sparse_rho_max: 0.3,
            moderate_rho_max: 0.5,
            shifts: 3,
            moduli: None,
            identity_hash: false,
            moduli_kind: ModuliKind::Prime,
            singleton_tol: 1e-6,
            noise_floor_rel: 1e-9,
            verify_eps_rel: 1e-6,
            tau_rel: 1e-6,
            round_factor: 4.0,
            max_rehash: 2,
            max_extra_verify_views: 2,
            view_mode: ViewMode::Recursive,
            verify_mode: ViewMode::Recursive,
            max_depth: None,
            dense_cap: 1 << 24,
            gate_records: GateRecords::Recovered,
            declared_n: None,
            force_fallback: false,
            corrupt_candidate: false,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if !(self.alpha >= 1.0) {
            return bad("alpha must be at least 1");
        }
        if !(self.lambda_threshold > 0.0) {
            return bad("lambda_threshold must be positive");
        }
        if !(0.0 < self.sparse_rho_max && self.sparse_rho_max <= self.moderate_rho_max) {
            return bad("need 0 < sparse_rho_max <= moderate_rho_max");
        }
        if !(2..=3).contains(&self.shifts) {
            return bad("shifts must be 2 or 3");
        }
        if let Some(m) = &self.moduli {
            if m.len() != 3 {
                return bad("moduli override needs exactly three values");
            }
            if let Err(e) = crate::numtheory::ModTriple::new(m[0], m[1], m[2]) {
                return Err(ConfigError::Invalid(format!("moduli override: {e}")));
            }
        }
        for (name, v) in [
            ("singleton_tol", self.singleton_tol),
            ("noise_floor_rel", self.noise_floor_rel),
            ("verify_eps_rel", self.verify_eps_rel),
            ("tau_rel", self.tau_rel),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.round_factor > 0.0) {
            return bad("round_factor must be positive");
        }
        Ok(())
    }

    /// `ceil(alpha * k)`, at least 1.
    pub fn coverage(&self, k: usize) -> usize {
        ((self.alpha * k as f64).ceil() as usize).max(1)
    }

    pub fn round_cap(&self, k: usize) -> u32 {
        (self.round_factor * ((k + 2) as f64).log2()).ceil() as u32
    }

    pub fn depth_limit(&self, n: u64) -> u32 {
        self.max_depth.unwrap_or_else(|| {
            let n = n.max(4) as f64;
            n.log2().log2().ceil() as u32
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = Config::from_toml("alpha = 10.0\nmoduli = [7, 11, 13]\nview_mode = \"dense\"\n").unwrap();
        assert_eq!(cfg.alpha, 10.0);
        assert_eq!(cfg.moduli, Some(vec![7, 11, 13]));
        assert_eq!(cfg.view_mode, ViewMode::Dense);
        assert_eq!(cfg.verify_views, 3);
    }

    #[test]
    fn rejects_unknown_and_invalid_keys() {
        assert!(matches!(Config::from_toml("alpah = 3.0"), Err(ConfigError::Parse(_))));
        assert!(matches!(Config::from_toml("shifts = 4"), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::from_toml("moduli = [7, 11]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::from_toml("alpha = 0.5"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn derived_limits() {
        let cfg = Config::default();
        assert_eq!(cfg.coverage(10), 150);
        assert_eq!(cfg.coverage(0), 1);
        assert_eq!(cfg.round_cap(2), 8);
        assert_eq!(cfg.depth_limit(1 << 20), 5);
        assert_eq!(cfg.depth_limit(1 << 16), 4);
    }
}
