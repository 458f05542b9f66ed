//! Simulation environments: discrete and continuous pricing, inventory
//! allocation and query-optimizer replay, plus their ingestion paths.
//!
//! Environments speak in rewards; the learner speaks in losses in `[0,1]`.
//! Each environment kind carries a [`LossAdapter`] bridging the two.

mod ingest;
pub mod metrics;
mod profit;
mod synthetic;

pub use ingest::{ingest_csv, ingest_query_jsonl, write_dataset, ColumnTransform, Featurizer, Schema, SCHEMA_NAMES};
pub use metrics::{metric_streams, metrics, Metrics};
pub use profit::{profit_discrete, profit_inventory, profit_price, DISCRETE_LEVELS};
pub use synthetic::{query_action_pmf, synthetic_surrogate, RealizableFinite};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::decision::{Action, ActionSpace};
use crate::regression::HeadKind;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: file has no data rows")]
    Empty(String),
    #[error("missing column `{column}`")]
    MissingColumn { column: String },
    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown environment kind `{0}`")]
    UnknownKind(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid environment: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Eight ordinal risk levels; overpricing loses the sale.
    PricingDiscrete,
    /// Listing price in `[0,1]`; overpricing loses the sale.
    PricingContinuous,
    /// Allocation in `[0,1]` against demand, paying `beta` per unit.
    Inventory,
    /// Choose one of a variable number of optimizer configurations.
    QueryOpt,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::PricingDiscrete,
        EnvKind::PricingContinuous,
        EnvKind::Inventory,
        EnvKind::QueryOpt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::PricingDiscrete => "pricing_discrete",
            EnvKind::PricingContinuous => "pricing_continuous",
            EnvKind::Inventory => "inventory",
            EnvKind::QueryOpt => "query_opt",
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, EnvKind::PricingDiscrete | EnvKind::QueryOpt)
    }

    pub fn default_beta(&self) -> f64 {
        match self {
            EnvKind::PricingDiscrete => 0.1,
            EnvKind::Inventory => 1.0 / 3.0,
            _ => 0.0,
        }
    }

    /// Reward range of the kind, mapped affinely onto the unit loss range.
    pub fn adapter(&self, beta: f64) -> LossAdapter {
        match self {
            EnvKind::PricingDiscrete | EnvKind::PricingContinuous => LossAdapter::new(0.0, 1.0),
            EnvKind::Inventory => LossAdapter::new(-beta, 1.0 - beta),
            EnvKind::QueryOpt => LossAdapter::new(-1.0, 1.0),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| EnvError::UnknownKind(s.into()))
    }
}

/// Monotone decreasing affine map from a reward band `[lo, hi]` to a loss
/// in `[0,1]`. Rewards outside the band are clipped first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossAdapter {
    pub lo: f64,
    pub hi: f64,
}

impl LossAdapter {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "empty reward band");
        Self { lo, hi }
    }

    pub fn loss(&self, reward: f64) -> f64 {
        ((self.hi - reward.clamp(self.lo, self.hi)) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn reward(&self, loss: f64) -> f64 {
        self.hi - loss * (self.hi - self.lo)
    }
}

/// What a row reveals once an action is played.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Risk level in `1..=8`.
    Label(u8),
    /// Normalized price or demand in `[0,1]`.
    Level(f64),
    /// Fractional-change reward of each available action.
    Rewards(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub features: Vec<f64>,
    pub outcome: Outcome,
}

/// Reward and learner loss of one play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Played {
    pub reward: f64,
    pub loss: f64,
}

/// An immutable, fully ingested environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub kind: EnvKind,
    pub name: String,
    pub beta: f64,
    context_dim: usize,
    rows: Vec<Row>,
    /// Hex SHA-256 of the source bytes, or of the generated rows.
    pub dataset_hash: String,
}

impl Environment {
    /// Validates rows against the kind's invariants.
    pub fn new(kind: EnvKind, name: impl Into<String>, beta: f64, rows: Vec<Row>) -> Result<Self, EnvError> {
        let name = name.into();
        if rows.is_empty() {
            return Err(EnvError::Empty(name));
        }
        let context_dim = rows[0].features.len();
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != context_dim {
                return Err(EnvError::Invalid(format!(
                    "row {} has {} features, expected {context_dim}",
                    i + 1,
                    r.features.len()
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(EnvError::Invalid(format!("row {} has non-finite features", i + 1)));
            }
            let ok = match (&r.outcome, kind) {
                (Outcome::Label(y), EnvKind::PricingDiscrete) => (1..=DISCRETE_LEVELS as u8).contains(y),
                (Outcome::Level(y), EnvKind::PricingContinuous | EnvKind::Inventory) => (0.0..=1.0).contains(y),
                (Outcome::Rewards(v), EnvKind::QueryOpt) => v.len() >= 2 && v.iter().all(|r| r.is_finite()),
                _ => false,
            };
            if !ok {
                return Err(EnvError::Invalid(format!(
                    "row {}: outcome {:?} does not fit {kind}",
                    i + 1,
                    r.outcome
                )));
            }
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(EnvError::Invalid(format!("beta must lie in [0,1), got {beta}")));
        }
        let dataset_hash = hash_rows(&rows);
        Ok(Self {
            kind,
            name,
            beta,
            context_dim,
            rows,
            dataset_hash,
        })
    }

    pub fn with_dataset_hash(mut self, hash: String) -> Self {
        self.dataset_hash = hash;
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn adapter(&self) -> LossAdapter {
        self.kind.adapter(self.beta)
    }

    /// Largest per-round action count (finite kinds).
    pub fn max_actions(&self) -> usize {
        match self.kind {
            EnvKind::PricingDiscrete => DISCRETE_LEVELS,
            EnvKind::QueryOpt => self
                .rows
                .iter()
                .map(|r| match &r.outcome {
                    Outcome::Rewards(v) => v.len(),
                    _ => 0,
                })
                .max()
                .unwrap_or(0),
            _ => 0,
        }
    }

    /// First `t` rows.
    pub fn truncated(mut self, t: usize) -> Self {
        if t < self.rows.len() {
            self.rows.truncate(t);
            self.dataset_hash = hash_rows(&self.rows);
        }
        self
    }

    /// Rows in a seeded random order.
    pub fn shuffled(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.rows.shuffle(&mut rng);
        self
    }

    /// Per-round view of row `t`; `h` is the smoothing of interval kinds.
    pub fn step(&self, t: usize, h: f64) -> EnvStep<'_> {
        let row = &self.rows[t];
        let space = match (&row.outcome, self.kind) {
            (_, EnvKind::PricingDiscrete) => ActionSpace::Finite { n: DISCRETE_LEVELS },
            (Outcome::Rewards(v), _) => ActionSpace::Finite { n: v.len() },
            _ => ActionSpace::Interval { h },
        };
        EnvStep {
            t,
            context: &row.features,
            space,
            outcome: &row.outcome,
            kind: self.kind,
            beta: self.beta,
            adapter: self.adapter(),
        }
    }

    /// Interval-kind environments predict through this head.
    pub fn head_kind(&self) -> Option<HeadKind> {
        match self.kind {
            EnvKind::PricingContinuous => Some(HeadKind::Pricing),
            EnvKind::Inventory => Some(HeadKind::Inventory { beta: self.beta }),
            _ => None,
        }
    }
}

fn hash_rows(rows: &[Row]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        for v in &r.features {
            h.update(v.to_le_bytes());
        }
        match &r.outcome {
            Outcome::Label(y) => h.update([0u8, *y]),
            Outcome::Level(y) => {
                h.update([1u8]);
                h.update(y.to_le_bytes());
            }
            Outcome::Rewards(v) => {
                h.update([2u8]);
                for x in v {
                    h.update(x.to_le_bytes());
                }
            }
        }
    }
    hex::encode(h.finalize())
}

/// One round of an environment: the context, the action space, and the
/// reward of any action.
#[derive(Debug, Clone, Copy)]
pub struct EnvStep<'a> {
    pub t: usize,
    pub context: &'a [f64],
    pub space: ActionSpace,
    outcome: &'a Outcome,
    kind: EnvKind,
    beta: f64,
    pub adapter: LossAdapter,
}

impl EnvStep<'_> {
    pub fn reward(&self, action: Action) -> f64 {
        match (self.outcome, action) {
            (Outcome::Label(y), Action::Index(i)) => profit_discrete(*y, (i + 1) as u8, self.beta),
            (Outcome::Level(y), Action::Point(a)) => match self.kind {
                EnvKind::Inventory => profit_inventory(*y, a, self.beta),
                _ => profit_price(*y, a),
            },
            (Outcome::Rewards(v), Action::Index(i)) => v[i],
            (o, a) => panic!("action {a:?} does not apply to outcome {o:?}"),
        }
    }

    pub fn play(&self, action: Action) -> Played {
        let reward = self.reward(action);
        Played {
            reward,
            loss: self.adapter.loss(reward),
        }
    }

    /// Ground truth for tail metrics: label, price or demand.
    pub fn target(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Label(y) => Some(*y as f64),
            Outcome::Level(y) => Some(*y),
            Outcome::Rewards(_) => None,
        }
    }

    /// Losses of every action (finite kinds).
    pub fn all_losses(&self) -> Option<Vec<f64>> {
        match self.space {
            ActionSpace::Finite { n } => Some((0..n).map(|i| self.play(Action::Index(i)).loss).collect()),
            ActionSpace::Interval { .. } => None,
        }
    }
}

/// A finite-action stream the learning loop can drive. Stochastic sources
/// draw their noise from the supplied generator.
pub trait FiniteSource: Sync {
    fn rounds(&self) -> usize;
    fn context_dim(&self) -> usize;
    fn max_actions(&self) -> usize;
    fn context(&self, t: usize) -> &[f64];
    fn num_actions(&self, t: usize) -> usize;
    fn play(&self, t: usize, action: usize, rng: &mut dyn RngCore) -> Played;
    fn target(&self, _t: usize) -> Option<f64> {
        None
    }
    /// True conditional risk of each action, when the generator knows it.
    fn true_risks(&self, _t: usize) -> Option<Vec<f64>> {
        None
    }
}

impl FiniteSource for Environment {
    fn rounds(&self) -> usize {
        self.len()
    }

    fn context_dim(&self) -> usize {
        self.context_dim
    }

    fn max_actions(&self) -> usize {
        Environment::max_actions(self)
    }

    fn context(&self, t: usize) -> &[f64] {
        &self.rows[t].features
    }

    fn num_actions(&self, t: usize) -> usize {
        match self.step(t, 1.0).space {
            ActionSpace::Finite { n } => n,
            ActionSpace::Interval { .. } => 0,
        }
    }

    fn play(&self, t: usize, action: usize, _rng: &mut dyn RngCore) -> Played {
        self.step(t, 1.0).play(Action::Index(action))
    }

    fn target(&self, t: usize) -> Option<f64> {
        self.step(t, 1.0).target()
    }
}
