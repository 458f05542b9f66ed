use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{EnvError, EnvKind};
use crate::decision::Action;
use crate::harness::RoundRecord;
use crate::risk::{realized_marginal_expectile, Orientation, DEFAULT_Q_EVAL};

pub const PROFIT: &str = "profit";
pub const NO_SALE: &str = "no_sale";
pub const SOLD_OUT: &str = "sold_out";
pub const LIFT: &str = "lift";
pub const REGRESSION: &str = "regression";
pub const REGRESSION_DEPTH: &str = "regression_depth";

/// Named point metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub kind: EnvKind,
    pub rounds: usize,
    pub values: BTreeMap<String, f64>,
}

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

fn played_value(a: Action) -> f64 {
    match a {
        // index i is risk level i + 1
        Action::Index(i) => (i + 1) as f64,
        Action::Point(x) => x,
    }
}

/// Per-round series whose means are the kind's metrics. Regression depth
/// only has entries for regressed rounds.
pub fn metric_streams(kind: EnvKind, records: &[RoundRecord]) -> Result<BTreeMap<String, Vec<f64>>, EnvError> {
    if records.is_empty() {
        return Err(EnvError::Invalid("no round records".into()));
    }
    let mut out = BTreeMap::new();
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    let target = |r: &RoundRecord| {
        r.target
            .ok_or_else(|| EnvError::Invalid(format!("round {} has no target", r.t)))
    };
    match kind {
        EnvKind::PricingDiscrete | EnvKind::PricingContinuous => {
            let no_sale = records
                .iter()
                .map(|r| Ok(if played_value(r.action) > target(r)? { 1.0 } else { 0.0 }))
                .collect::<Result<Vec<f64>, EnvError>>()?;
            out.insert(NO_SALE.to_string(), no_sale);
            out.insert(PROFIT.to_string(), rewards);
        }
        EnvKind::Inventory => {
            let sold_out = records
                .iter()
                .map(|r| Ok(if played_value(r.action) <= target(r)? { 1.0 } else { 0.0 }))
                .collect::<Result<Vec<f64>, EnvError>>()?;
            out.insert(SOLD_OUT.to_string(), sold_out);
            out.insert(PROFIT.to_string(), rewards);
        }
        EnvKind::QueryOpt => {
            out.insert(
                REGRESSION.to_string(),
                rewards.iter().map(|&r| if r < 0.0 { 1.0 } else { 0.0 }).collect(),
            );
            out.insert(
                REGRESSION_DEPTH.to_string(),
                rewards.iter().filter(|&&r| r < 0.0).map(|r| -r).collect(),
            );
            out.insert(LIFT.to_string(), rewards);
        }
    }
    Ok(out)
}

/// Point metrics plus realized reward expectiles on the default grid.
pub fn metrics(kind: EnvKind, records: &[RoundRecord]) -> Result<Metrics, EnvError> {
    let streams = metric_streams(kind, records)?;
    let mut values = BTreeMap::new();
    for (name, s) in &streams {
        let v = if s.is_empty() {
            0.0
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        };
        values.insert(name.clone(), v);
    }
    let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
    for q in DEFAULT_Q_EVAL {
        let e = realized_marginal_expectile(&rewards, q, Orientation::Reward)
            .map_err(|e| EnvError::Invalid(e.to_string()))?;
        values.insert(format!("expectile_q{q}"), e);
    }
    Ok(Metrics {
        kind,
        rounds: records.len(),
        values,
    })
}
