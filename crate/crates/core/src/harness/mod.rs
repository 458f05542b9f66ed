//! The online learning loop tying regression, exploration and an
//! environment together, plus sweeps, reports and run artifacts.

mod artifacts;
mod config;
mod report;
mod run;
mod sweep;

pub use artifacts::{
    read_manifest, read_records, read_report, write_run, Manifest, MANIFEST_FILE, MANIFEST_VERSION, REPORT_FILE,
    ROUNDS_FILE,
};
pub use config::{
    Algorithm, ConfigError, EnvSpec, GammaMode, OracleConfig, ReportSpec, RunConfig, DEFAULT_BANDWIDTH_HEAD,
};
pub use report::{
    curve_csv, metrics_csv, pareto_csv, pareto_front, report, CurvePoint, Estimate, ExperimentReport, ParetoPoint,
    REPORT_VERSION,
};
pub use run::{execute, load_environment, run_finite, run_interval, run_interval_with, IntervalModel, RunOutput};
pub use sweep::{
    select_best, sweep, sweep_with, Objective, ParamRange, SweepOutcome, SweepSpec, TrialResult, DEFAULT_TRIALS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{Action, DecisionError};
use crate::environments::EnvError;
use crate::regression::RegressionError;
use crate::risk::RiskError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("round {round}: {source}")]
    Regression {
        round: u64,
        #[source]
        source: RegressionError,
    },
    #[error("round {round}: {source}")]
    Decision {
        round: u64,
        #[source]
        source: DecisionError,
    },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
    #[error("no sweep trial succeeded: {0}")]
    NoSuccessfulTrials(String),
    #[error("{0}")]
    Invalid(String),
}

/// One round of the protocol as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: u64,
    /// Row of the environment that supplied the context.
    pub context: usize,
    pub action: Action,
    /// Probability (finite), density (interval draw) or atom mass.
    pub weight: f64,
    pub atom: bool,
    pub reward: f64,
    pub loss: f64,
    /// Predicted loss at the played action.
    pub fhat: f64,
    pub ahat: Action,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_actions: Option<usize>,
    /// Expected conditional regret of the round's action distribution,
    /// when the true risks are known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
}
