use serde::{Deserialize, Serialize};

use super::DecisionError;

/// Fixed-horizon rate minimizing the smoothed regret bound
/// `3T/(4 theta gamma h) + 3 gamma + 3 gamma Reg + 4 gamma / theta`:
///
/// `gamma* = sqrt(3T / (h (16 + 12 theta (1 + Reg))))`.
pub fn gamma_star(t: f64, h: f64, theta: f64, reg_bound: f64) -> f64 {
    (3.0 * t / (h * (16.0 + 12.0 * theta * (1.0 + reg_bound)))).sqrt()
}

/// Plug-in regression regret `d log(T) / theta` of online Newton step on a
/// `d`-dimensional linear class.
pub fn default_reg_bound(d: usize, t: f64, theta: f64) -> f64 {
    d as f64 * t.max(2.0).ln() / theta
}

/// How the decision-layer rate evolves over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum GammaSchedule {
    Fixed {
        gamma: f64,
    },
    /// `gamma_star` at the known horizon.
    GammaStar {
        horizon: u64,
        h: f64,
        theta: f64,
        reg_bound: f64,
    },
    /// Epoch `k` covers rounds `[2^k, 2^{k+1})` and uses `gamma_star(2^k)`;
    /// `dim` feeds the plug-in regret bound of each epoch.
    Doubling {
        h: f64,
        theta: f64,
        dim: usize,
        scale: f64,
    },
}

impl GammaSchedule {
    pub fn validate(&self) -> Result<(), DecisionError> {
        let ok = match *self {
            GammaSchedule::Fixed { gamma } => gamma > 0.0 && gamma.is_finite(),
            GammaSchedule::GammaStar {
                horizon,
                h,
                theta,
                reg_bound,
            } => horizon > 0 && h > 0.0 && theta > 0.0 && reg_bound > 0.0,
            GammaSchedule::Doubling { h, theta, scale, .. } => h > 0.0 && theta > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DecisionError::InvalidParameter(format!(
                "invalid gamma schedule {self:?}"
            )))
        }
    }

    /// Rate for 1-based round `t`.
    pub fn gamma(&self, t: u64) -> f64 {
        match *self {
            GammaSchedule::Fixed { gamma } => gamma,
            GammaSchedule::GammaStar {
                horizon,
                h,
                theta,
                reg_bound,
            } => gamma_star(horizon as f64, h, theta, reg_bound),
            GammaSchedule::Doubling { h, theta, dim, scale } => {
                let t = t.max(1);
                let epoch_len = 1u64 << (63 - t.leading_zeros());
                let len = epoch_len as f64;
                scale * gamma_star(len, h, theta, default_reg_bound(dim, len, theta))
            }
        }
    }
}
