//! Online regression oracles trained on expectile loss.
//!
//! A [`Predictor`] maps `(context, action)` to a loss prediction in `[0,1]`.
//! [`Learner`] wraps a predictor with an online solver and takes one step
//! per observed `(x, a, loss)` triple.

mod checkpoint;
mod features;
mod heads;
mod linear;
mod solver;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use features::{
    cauchy_random_features, CauchyFeatures, CrossedActions, FeatureMap, MinMaxScaler, DEFAULT_BANDWIDTH,
    DEFAULT_RFF_DIM,
};
pub use heads::{
    inventory_predictor, inventory_predictor_grad, logistic, pricing_predictor, pricing_predictor_grad, softplus,
    ZHead, SCALE_FLOOR,
};
pub use linear::{LinearPredictor, Link};
pub use solver::{Solver, SolverKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::{expectile_loss, expectile_loss_grad, ExpectileConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("action {action} out of range (max {max})")]
    ActionOutOfRange { action: usize, max: usize },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("observed loss {0} outside [0,1]")]
    LossOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// A differentiable scored function over context-action pairs.
///
/// `raw` is the pre-clamp output; `predict` clamps it to `[0,1]`. Training
/// differentiates the expectile loss at the raw output.
pub trait Predictor {
    type Action: Copy;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn raw(&self, x: &[f64], a: Self::Action) -> Result<f64, RegressionError>;

    /// Raw output and its gradient with respect to the parameters.
    fn raw_with_grad(&self, x: &[f64], a: Self::Action) -> Result<(f64, Vec<f64>), RegressionError>;

    fn predict(&self, x: &[f64], a: Self::Action) -> Result<f64, RegressionError> {
        Ok(self.raw(x, a)?.clamp(0.0, 1.0))
    }
}

/// Cumulative online-regression losses; the comparator is tracked only when
/// the generating function is known.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub rounds: u64,
    pub cumulative_oracle_loss: f64,
    pub cumulative_comparator_loss: Option<f64>,
}

impl RegretLedger {
    pub fn record(&mut self, oracle_loss: f64, comparator_loss: Option<f64>) {
        debug_assert!(oracle_loss >= 0.0);
        self.rounds += 1;
        self.cumulative_oracle_loss += oracle_loss;
        if let Some(c) = comparator_loss {
            debug_assert!(c >= 0.0);
            *self.cumulative_comparator_loss.get_or_insert(0.0) += c;
        }
    }

    pub fn regret(&self) -> Option<f64> {
        self.cumulative_comparator_loss.map(|c| self.cumulative_oracle_loss - c)
    }
}

/// A predictor plus the online solver that trains it.
#[derive(Debug, Clone)]
pub struct Learner<P> {
    pub model: P,
    solver: Solver,
    cfg: ExpectileConfig,
    ledger: RegretLedger,
}

impl<P: Predictor> Learner<P> {
    pub fn new(model: P, solver: SolverKind, cfg: ExpectileConfig) -> Self {
        let dim = model.params().len();
        Self {
            model,
            solver: Solver::new(solver, dim),
            cfg,
            ledger: RegretLedger::default(),
        }
    }

    pub fn config(&self) -> ExpectileConfig {
        self.cfg
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn predict(&self, x: &[f64], a: P::Action) -> Result<f64, RegressionError> {
        self.model.predict(x, a)
    }

    /// One online step on the expectile loss at `(x, a)`.
    pub fn update(&mut self, x: &[f64], a: P::Action, observed: f64) -> Result<(), RegressionError> {
        self.update_inner(x, a, observed, None)
    }

    /// As [`Learner::update`], also charging the comparator `f_star` to the ledger.
    pub fn update_with_comparator(
        &mut self,
        x: &[f64],
        a: P::Action,
        observed: f64,
        f_star: f64,
    ) -> Result<(), RegressionError> {
        self.update_inner(x, a, observed, Some(f_star))
    }

    fn update_inner(
        &mut self,
        x: &[f64],
        a: P::Action,
        observed: f64,
        f_star: Option<f64>,
    ) -> Result<(), RegressionError> {
        if !observed.is_finite() {
            return Err(RegressionError::NonFinite("observed loss"));
        }
        if !(0.0..=1.0).contains(&observed) {
            return Err(RegressionError::LossOutOfRange(observed));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite("context features"));
        }
        let (raw, mut grad) = self.model.raw_with_grad(x, a)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(RegressionError::NonFinite("feature gradient"));
        }
        let fhat = raw.clamp(0.0, 1.0);
        self.ledger.record(
            expectile_loss(observed, fhat, self.cfg),
            f_star.map(|f| expectile_loss(observed, f, self.cfg)),
        );
        let dl = expectile_loss_grad(observed, raw, self.cfg);
        if dl == 0.0 {
            return Ok(());
        }
        for g in grad.iter_mut() {
            *g *= dl;
        }
        self.solver.step(self.model.params_mut(), &grad);
        Ok(())
    }
}

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub checked: usize,
    /// Points at a clamp or indicator boundary, where the loss is not
    /// differentiable; they are skipped.
    pub excluded: usize,
    pub max_relative_error: f64,
}

/// Compare the analytic parameter gradient of the expectile loss with
/// central finite differences through the full clamped predictor.
pub fn gradient_check<P: Predictor + Clone>(
    p: &P,
    points: &[(Vec<f64>, P::Action, f64)],
    cfg: ExpectileConfig,
    step: f64,
) -> Result<GradientReport, RegressionError> {
    const BOUNDARY: f64 = 1e-4;
    let mut report = GradientReport::default();
    let mut probe = p.clone();
    for (x, a, v) in points {
        let (raw, grad) = p.raw_with_grad(x, *a)?;
        if raw <= BOUNDARY || raw >= 1.0 - BOUNDARY || (raw - v).abs() < BOUNDARY {
            report.excluded += 1;
            continue;
        }
        let dl = expectile_loss_grad(*v, raw, cfg);
        for (i, g) in grad.iter().enumerate() {
            let analytic = dl * g;
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + step;
            let up = expectile_loss(*v, probe.predict(x, *a)?, cfg);
            probe.params_mut()[i] = orig - step;
            let down = expectile_loss(*v, probe.predict(x, *a)?, cfg);
            probe.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * step);
            let scale = analytic.abs().max(fd.abs());
            if scale < 1e-7 {
                continue;
            }
            report.max_relative_error = report.max_relative_error.max((analytic - fd).abs() / scale);
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Which reward curve a [`HeadPredictor`] induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HeadKind {
    /// Loss `1 - pricing_predictor(z, a)`.
    Pricing,
    /// Loss `1 - beta - inventory_predictor(z, a, beta)`.
    Inventory { beta: f64 },
}

impl HeadKind {
    pub fn name(&self) -> &'static str {
        match self {
            HeadKind::Pricing => "pricing",
            HeadKind::Inventory { .. } => "inventory",
        }
    }

    /// Predicted loss and its partials with respect to `(z0, z1)`.
    #[inline]
    pub fn loss_and_grad(&self, z: ZHead, a: f64) -> (f64, f64, f64) {
        match *self {
            HeadKind::Pricing => {
                let (v, g0, g1) = pricing_predictor_grad(z, a);
                (1.0 - v, -g0, -g1)
            }
            HeadKind::Inventory { beta } => {
                let (v, g0, g1) = inventory_predictor_grad(z, a, beta);
                (1.0 - beta - v, -g0, -g1)
            }
        }
    }

    #[inline]
    pub fn loss(&self, z: ZHead, a: f64) -> f64 {
        match *self {
            HeadKind::Pricing => 1.0 - pricing_predictor(z, a),
            HeadKind::Inventory { beta } => 1.0 - beta - inventory_predictor(z, a, beta),
        }
    }
}

/// Linearized Cauchy kernel machine producing a [`ZHead`] per context, with
/// the predicted loss induced through a [`HeadKind`].
///
/// Parameters are `[w0 (m), w1 (m)]` with `m = 2 * rff_dim + 1` (the last
/// coordinate of each block multiplies a bias feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPredictor {
    pub kind: HeadKind,
    features: CauchyFeatures,
    scaler: MinMaxScaler,
    params: Vec<f64>,
}

impl HeadPredictor {
    pub fn new(kind: HeadKind, features: CauchyFeatures, scaler: MinMaxScaler) -> Result<Self, RegressionError> {
        if scaler.dim() != features.input_dim() {
            return Err(RegressionError::DimensionMismatch {
                expected: features.input_dim(),
                actual: scaler.dim(),
            });
        }
        let m = features.output_dim() + 1;
        Ok(Self {
            kind,
            features,
            scaler,
            params: vec![0.0; 2 * m],
        })
    }

    pub fn features(&self) -> &CauchyFeatures {
        &self.features
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    fn block(&self) -> usize {
        self.features.output_dim() + 1
    }

    /// Random-feature embedding of a context, with the trailing bias.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>, RegressionError> {
        if x.len() != self.scaler.dim() {
            return Err(RegressionError::DimensionMismatch {
                expected: self.scaler.dim(),
                actual: x.len(),
            });
        }
        let mut scaled = vec![0.0; x.len()];
        self.scaler.transform_into(x, &mut scaled);
        let mut psi = vec![0.0; self.block()];
        let n = self.features.output_dim();
        self.features.map_into(&scaled, &mut psi[..n])?;
        psi[n] = 1.0;
        Ok(psi)
    }

    fn logits(&self, psi: &[f64]) -> (f64, f64) {
        let m = self.block();
        let u0: f64 = self.params[..m].iter().zip(psi).map(|(w, f)| w * f).sum();
        let u1: f64 = self.params[m..].iter().zip(psi).map(|(w, f)| w * f).sum();
        (u0, u1)
    }

    pub fn head(&self, x: &[f64]) -> Result<ZHead, RegressionError> {
        let psi = self.embed(x)?;
        let (u0, u1) = self.logits(&psi);
        Ok(ZHead::from_logits(u0, u1))
    }

    pub fn from_params(mut self, params: Vec<f64>) -> Result<Self, RegressionError> {
        if params.len() != self.params.len() {
            return Err(RegressionError::DimensionMismatch {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params = params;
        Ok(self)
    }
}

impl Predictor for HeadPredictor {
    type Action = f64;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn raw(&self, x: &[f64], a: f64) -> Result<f64, RegressionError> {
        Ok(self.kind.loss(self.head(x)?, a))
    }

    fn raw_with_grad(&self, x: &[f64], a: f64) -> Result<(f64, Vec<f64>), RegressionError> {
        let psi = self.embed(x)?;
        let (u0, u1) = self.logits(&psi);
        let z = ZHead::from_logits(u0, u1);
        let (value, d0, d1) = self.kind.loss_and_grad(z, a);
        let (l0, l1) = ZHead::link_derivatives(u0, u1);
        let (c0, c1) = (d0 * l0, d1 * l1);
        let m = self.block();
        let mut grad = vec![0.0; 2 * m];
        for (i, f) in psi.iter().enumerate() {
            grad[i] = c0 * f;
            grad[m + i] = c1 * f;
        }
        Ok((value, grad))
    }
}
