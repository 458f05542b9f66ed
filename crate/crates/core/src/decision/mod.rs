//! Exploration layer: optimization oracles, the inverse-gap-weighted
//! action distributions for finite and interval action spaces, and the
//! exploration-rate schedule.
//!
//! All functions here work in the loss convention: smaller predicted values
//! are better.

mod indifference;
mod oracle;
mod schedule;

pub use indifference::{verify_indifference, verify_indifference_with, IndifferenceReport, INDIFFERENCE_TOL};
pub use oracle::{argmin_brent, argmin_exact, argmin_sampled, sampled_count};
pub use schedule::{default_reg_bound, gamma_star, GammaSchedule};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::ExpectileConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("empty action set")]
    EmptyActions,
    #[error("action {ahat} is not a minimizer of the predictions")]
    NotAMinimizer { ahat: usize },
    #[error("action index {0} out of range")]
    ActionOutOfRange(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Brent search did not reach tolerance {tol} within {iterations} iterations")]
    NoConvergence { tol: f64, iterations: usize },
}

/// The set of actions available in a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ActionSpace {
    /// Actions `0..n`, uniform reference measure (smoothing `h = 1/n`).
    Finite { n: usize },
    /// `[0,1]` with Lebesgue reference measure and smoothing `h`.
    Interval { h: f64 },
}

impl ActionSpace {
    pub fn finite(n: usize) -> Result<Self, DecisionError> {
        if n == 0 {
            return Err(DecisionError::EmptyActions);
        }
        Ok(ActionSpace::Finite { n })
    }

    pub fn interval(h: f64) -> Result<Self, DecisionError> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(DecisionError::InvalidParameter(format!("h must lie in (0,1], got {h}")));
        }
        Ok(ActionSpace::Interval { h })
    }

    pub fn smoothing(&self) -> f64 {
        match *self {
            ActionSpace::Finite { n } => 1.0 / n as f64,
            ActionSpace::Interval { h } => h,
        }
    }
}

/// Decision-layer rate `gamma` and the strong-convexity constant `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub gamma: f64,
    pub theta: f64,
    pub horizon: Option<u64>,
}

impl ExplorationConfig {
    pub fn new(gamma: f64, expectile: ExpectileConfig) -> Result<Self, DecisionError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(DecisionError::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            gamma,
            theta: expectile.theta(),
            horizon: None,
        })
    }

    pub fn with_horizon(mut self, t: u64) -> Self {
        self.horizon = Some(t);
        self
    }

    /// `4 theta gamma`, the factor in front of every prediction gap.
    #[inline]
    pub fn rate(&self) -> f64 {
        4.0 * self.theta * self.gamma
    }

    /// Accuracy asked of the approximate optimization oracle: `1/(4 theta gamma)`.
    pub fn oracle_delta(&self) -> f64 {
        1.0 / self.rate()
    }
}

/// An action taken in a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Index(usize),
    Point(f64),
}

impl Action {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Action::Index(i) => i as f64,
            Action::Point(a) => a,
        }
    }
}

/// A sampled action with the probability (finite) or density (interval)
/// under which it was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDraw {
    pub action: Action,
    /// Probability mass for finite spaces; density w.r.t. Lebesgue for an
    /// accepted interval draw; atom mass when `atom` is set.
    pub weight: f64,
    pub atom: bool,
    pub ahat: Action,
}

/// Inverse-gap-weighted distribution over a finite action set.
///
/// Every `a != ahat` gets `1 / (n + 4 theta gamma (f(a) - f(ahat)))`; `ahat`
/// takes the remaining mass. `n` is the size of this round's action set.
pub fn al_distribution(fhat: &[f64], ahat: usize, cfg: &ExplorationConfig) -> Result<Vec<f64>, DecisionError> {
    let n = fhat.len();
    if n == 0 {
        return Err(DecisionError::EmptyActions);
    }
    if ahat >= n {
        return Err(DecisionError::ActionOutOfRange(ahat));
    }
    let best = fhat[ahat];
    if fhat.iter().any(|&v| v < best) {
        return Err(DecisionError::NotAMinimizer { ahat });
    }
    let rate = cfg.rate();
    let nf = n as f64;
    let mut p: Vec<f64> = fhat.iter().map(|&v| 1.0 / (nf + rate * (v - best))).collect();
    p[ahat] = 0.0;
    let rest: f64 = p.iter().sum();
    p[ahat] = 1.0 - rest;
    Ok(p)
}

/// Draw an index from a probability vector by inversion.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the last cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Density of the continuous component with respect to the reference
/// measure: `1 / (1 + 4 theta gamma h max(0, gap))`.
#[inline]
pub fn cont_al_density(gap: f64, h: f64, cfg: &ExplorationConfig) -> f64 {
    1.0 / (1.0 + cfg.rate() * h * gap.max(0.0))
}

/// Points of the midpoint rule used for the atom mass.
pub const ATOM_QUADRATURE_POINTS: usize = 256;

/// `1 - integral of the density over [0,1]`, the mass placed on `ahat`.
pub fn cont_al_atom_mass<F: Fn(f64) -> f64>(fhat: F, f_ahat: f64, h: f64, cfg: &ExplorationConfig) -> f64 {
    let n = ATOM_QUADRATURE_POINTS;
    let total: f64 = (0..n)
        .map(|k| cont_al_density(fhat((k as f64 + 0.5) / n as f64) - f_ahat, h, cfg))
        .sum();
    (1.0 - total / n as f64).clamp(0.0, 1.0)
}

/// Exact one-proposal rejection sampler for the interval distribution.
///
/// Propose `a ~ U(0,1)` and accept with probability equal to the density
/// (which never exceeds one); a rejection plays `ahat`. The rejected mass is
/// exactly the atom mass, so the mixture is reproduced without
/// normalization.
pub fn cont_al_sample<F, R>(
    fhat: F,
    ahat: f64,
    space: ActionSpace,
    cfg: &ExplorationConfig,
    rng: &mut R,
) -> Result<ActionDraw, DecisionError>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let h = match space {
        ActionSpace::Interval { h } => h,
        ActionSpace::Finite { .. } => {
            return Err(DecisionError::InvalidParameter(
                "interval sampler needs an interval space".into(),
            ))
        }
    };
    let f_ahat = fhat(ahat);
    let a: f64 = rng.random();
    let u: f64 = rng.random();
    let density = cont_al_density(fhat(a) - f_ahat, h, cfg);
    if u <= density {
        Ok(ActionDraw {
            action: Action::Point(a),
            weight: density,
            atom: false,
            ahat: Action::Point(ahat),
        })
    } else {
        Ok(ActionDraw {
            action: Action::Point(ahat),
            weight: cont_al_atom_mass(&fhat, f_ahat, h, cfg),
            atom: true,
            ahat: Action::Point(ahat),
        })
    }
}
