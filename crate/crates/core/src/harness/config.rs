//! Declarative run configuration (TOML) with `key=value` overrides.
//!
//! ```toml
//! q = 0.2
//! seed = 7
//! h = 0.1
//! rounds = 20000
//!
//! [env]
//! kind = "pricing_continuous"
//! path = "data/kc_house.csv"   # omit for the synthetic surrogate
//! schema = "king_county"
//!
//! [gamma]
//! mode = "fixed"               # fixed | gamma_star | doubling
//! value = 200.0
//!
//! [oracle]
//! solver = { kind = "ogd", scale = 0.5 }
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use super::sweep::SweepSpec;
use crate::decision::{default_reg_bound, GammaSchedule};
use crate::environments::EnvKind;
use crate::regression::{SolverKind, DEFAULT_RFF_DIM};
use crate::risk::{DEFAULT_Q_EVAL, DEFAULT_RESAMPLES};

pub const DEFAULT_BANDWIDTH_HEAD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Finite,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Data file; the synthetic surrogate is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Named CSV schema; `generic` needs `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default = "default_synthetic_rows")]
    pub synthetic_rows: usize,
    /// Seed of the synthetic generator; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn default_synthetic_rows() -> usize {
    20_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaMode {
    Fixed {
        value: f64,
    },
    /// Fixed-horizon optimum; `reg_bound` defaults to `d ln(T) / theta`.
    GammaStar {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reg_bound: Option<f64>,
    },
    /// Restart the rate at every power of two.
    Doubling {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for GammaMode {
    fn default() -> Self {
        GammaMode::GammaStar { reg_bound: None }
    }
}

impl GammaMode {
    /// Concrete schedule for a run of `horizon` rounds with smoothing `h`,
    /// strong-convexity `theta` and `dim` model parameters.
    pub fn resolve(&self, horizon: usize, h: f64, theta: f64, dim: usize) -> GammaSchedule {
        match *self {
            GammaMode::Fixed { value } => GammaSchedule::Fixed { gamma: value },
            GammaMode::GammaStar { reg_bound } => GammaSchedule::GammaStar {
                horizon: horizon as u64,
                h,
                theta,
                reg_bound: reg_bound.unwrap_or_else(|| default_reg_bound(dim, horizon as f64, theta)),
            },
            GammaMode::Doubling { scale } => GammaSchedule::Doubling { h, theta, dim, scale },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_rff_dim")]
    pub rff_dim: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Seed of the random features; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_seed: Option<u64>,
}

fn default_rff_dim() -> usize {
    DEFAULT_RFF_DIM
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_HEAD
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::default(),
            rff_dim: DEFAULT_RFF_DIM,
            bandwidth: DEFAULT_BANDWIDTH_HEAD,
            feature_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default = "default_q_eval")]
    pub q_eval: Vec<f64>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

fn default_q_eval() -> Vec<f64> {
    DEFAULT_Q_EVAL.to_vec()
}

fn default_coverage() -> f64 {
    0.95
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            q_eval: default_q_eval(),
            coverage: default_coverage(),
            resamples: default_resamples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSpec,
    /// Learning expectile level.
    pub q: f64,
    /// Defaults to `finite` for finite-action kinds, else `interval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub gamma: GammaMode,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Brent minimization instead of sampled argmin (interval runs).
    #[serde(default)]
    pub exact_argmin: bool,
    #[serde(default = "default_brent_tol")]
    pub brent_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Horizon; defaults to the environment's row count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default)]
    pub report: ReportSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_h() -> f64 {
    0.1
}

fn default_brent_tol() -> f64 {
    1e-6
}

/// Parse the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set a dotted key, creating intermediate tables.
pub(crate) fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::Override(key.into()))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("`{p}` in `{key}` is not a table")))?;
    }
    // keep integers integral when a float arrives for an integer field
    let value = match (cur.get(last), value) {
        (Some(toml::Value::Integer(_)), toml::Value::Float(f)) => toml::Value::Integer(f.round() as i64),
        (_, v) => v,
    };
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub(crate) fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn to_table(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("config serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!("config is a table"),
        }
    }

    /// Copy with `key=value` overrides applied.
    pub fn with_overrides(&self, overrides: &[(String, toml::Value)]) -> Result<Self, ConfigError> {
        let mut t = self.to_table();
        for (k, v) in overrides {
            set_dotted(&mut t, k, v.clone())?;
        }
        Self::from_table(t)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q must lie in (0,1), got {}", self.q));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return bad(format!("h must lie in (0,1], got {}", self.h));
        }
        if self.rounds == Some(0) {
            return bad("rounds must be positive".into());
        }
        if self.env.synthetic_rows == 0 {
            return bad("env.synthetic_rows must be positive".into());
        }
        if let Some(b) = self.env.beta {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("env.beta must lie in [0,1), got {b}"));
            }
        }
        match self.gamma {
            GammaMode::Fixed { value } if !(value > 0.0 && value.is_finite()) => {
                return bad(format!("gamma.value must be positive, got {value}"));
            }
            GammaMode::GammaStar { reg_bound: Some(r) } if !(r > 0.0) => {
                return bad(format!("gamma.reg_bound must be positive, got {r}"));
            }
            GammaMode::Doubling { scale } if !(scale > 0.0) => {
                return bad(format!("gamma.scale must be positive, got {scale}"));
            }
            _ => {}
        }
        let algo = self.algorithm();
        if (algo == Algorithm::Finite) != self.env.kind.is_finite() {
            return bad(format!(
                "{:?} algorithm does not fit environment {}",
                algo, self.env.kind
            ));
        }
        if self.oracle.rff_dim == 0 || !(self.oracle.bandwidth > 0.0) {
            return bad("oracle.rff_dim and oracle.bandwidth must be positive".into());
        }
        if !(self.brent_tol > 0.0) {
            return bad("brent_tol must be positive".into());
        }
        let r = &self.report;
        if !(r.coverage > 0.0 && r.coverage < 1.0) || r.resamples == 0 {
            return bad("report.coverage must lie in (0,1) and report.resamples be positive".into());
        }
        if r.q_eval.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return bad("report.q_eval levels must lie in (0,1)".into());
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm.unwrap_or(if self.env.kind.is_finite() {
            Algorithm::Finite
        } else {
            Algorithm::Interval
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// A minimal synthetic configuration, handy for tests and examples.
    pub fn synthetic(kind: EnvKind, q: f64, rounds: usize, seed: u64) -> Self {
        Self {
            env: EnvSpec {
                kind,
                path: None,
                schema: None,
                target: None,
                synthetic_rows: rounds,
                data_seed: None,
                shuffle: false,
                beta: None,
            },
            q,
            algorithm: None,
            h: default_h(),
            gamma: GammaMode::default(),
            oracle: OracleConfig::default(),
            exact_argmin: false,
            brent_tol: default_brent_tol(),
            seed,
            rounds: None,
            report: ReportSpec::default(),
            sweep: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
q = 0.2
seed = 3
[env]
kind = "pricing_continuous"
[gamma]
mode = "fixed"
value = 100.0
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(BASIC, &[]).unwrap();
        assert_eq!(c.q, 0.2);
        assert_eq!(c.algorithm(), Algorithm::Interval);
        assert_eq!(c.h, 0.1);
        assert_eq!(c.gamma, GammaMode::Fixed { value: 100.0 });
        assert_eq!(c.oracle.solver, SolverKind::Ogd { scale: 0.5 });
        assert_eq!(c.report.q_eval, DEFAULT_Q_EVAL.to_vec());
    }

    #[test]
    fn overrides_apply_dotted_keys() {
        let o = vec![
            "q=0.5".to_string(),
            "gamma.value=7".to_string(),
            "oracle.solver.kind=\"ogd\"".to_string(),
            "oracle.solver.scale=0.1".to_string(),
            "env.schema=king_county".to_string(),
        ];
        let c = RunConfig::from_toml_str(BASIC, &o).unwrap();
        assert_eq!(c.q, 0.5);
        assert_eq!(c.gamma, GammaMode::Fixed { value: 7.0 });
        assert_eq!(c.oracle.solver, SolverKind::Ogd { scale: 0.1 });
        assert_eq!(c.env.schema.as_deref(), Some("king_county"));
    }

    #[test]
    fn bad_q_names_the_constraint() {
        let e = RunConfig::from_toml_str(BASIC, &["q=1.5".into()]).unwrap_err();
        assert!(e.to_string().contains("q must lie in (0,1)"), "{e}");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_overrides() {
        assert!(RunConfig::from_toml_str(&format!("{BASIC}\nfoo = 1\n"), &[]).is_err());
        assert!(matches!(
            RunConfig::from_toml_str(BASIC, &["q".into()]),
            Err(ConfigError::Override(_))
        ));
        assert!(RunConfig::from_toml_str(BASIC, &["algorithm=\"finite\"".into()]).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_toml_str(BASIC, &[]).unwrap();
        let b = RunConfig::from_toml_str(BASIC, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::from_toml_str(BASIC, &["seed=4".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn round_trips_through_toml() {
        let a = RunConfig::from_toml_str(BASIC, &[]).unwrap();
        let text = toml::to_string(&a).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text, &[]).unwrap(), a);
    }

    #[test]
    fn integer_fields_stay_integral() {
        let c = RunConfig::synthetic(EnvKind::Inventory, 0.3, 100, 1);
        let d = c
            .with_overrides(&[("oracle.rff_dim".into(), toml::Value::Float(63.7))])
            .unwrap();
        assert_eq!(d.oracle.rff_dim, 64);
    }

    #[test]
    fn gamma_modes_resolve() {
        let s = GammaMode::GammaStar { reg_bound: None }.resolve(1000, 0.2, 0.3, 10);
        assert!(matches!(s, GammaSchedule::GammaStar { horizon: 1000, .. }));
        assert_eq!(GammaMode::Fixed { value: 3.0 }.resolve(1, 1.0, 0.5, 1).gamma(1), 3.0);
    }
}
