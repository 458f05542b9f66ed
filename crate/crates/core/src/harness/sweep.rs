//! Random-search sweeps: sample configurations from declared ranges, run
//! each trial, keep the best by the declared objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::config::{ConfigError, RunConfig};
use super::report::{report, ExperimentReport};
use super::run::{execute, RunOutput};
use super::{HarnessError, RoundRecord};
use crate::risk::{realized_marginal_expectile, Orientation};

pub const DEFAULT_TRIALS: usize = 59;

/// Where one swept key draws its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamRange {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Choice { values: Vec<toml::Value> },
}

impl ParamRange {
    fn validate(&self, key: &str) -> Result<(), ConfigError> {
        let ok = match self {
            ParamRange::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            ParamRange::LogUniform { lo, hi } => *lo > 0.0 && hi.is_finite() && lo <= hi,
            ParamRange::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid(format!(
                "sweep range for `{key}` is empty or malformed"
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> toml::Value {
        match self {
            ParamRange::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                toml::Value::Float(lo + u * (hi - lo))
            }
            ParamRange::LogUniform { lo, hi } => {
                let u: f64 = rng.random();
                toml::Value::Float((lo.ln() + u * (hi.ln() - lo.ln())).exp())
            }
            ParamRange::Choice { values } => values[rng.random_range(0..values.len())].clone(),
        }
    }
}

/// What a sweep maximizes over the realized reward stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Realized marginal reward expectile at the learning level.
    #[default]
    Expectile,
    MeanReward,
}

impl Objective {
    pub fn score(&self, q: f64, records: &[RoundRecord]) -> Result<f64, HarnessError> {
        let rewards: Vec<f64> = records.iter().map(|r| r.reward).collect();
        if rewards.is_empty() {
            return Err(HarnessError::Invalid("trial produced no rounds".into()));
        }
        Ok(match self {
            Objective::Expectile => realized_marginal_expectile(&rewards, q, Orientation::Reward)?,
            Objective::MeanReward => rewards.iter().sum::<f64>() / rewards.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub objective: Objective,
    /// Dotted config keys to sample, e.g. `gamma.value`.
    pub params: BTreeMap<String, ParamRange>,
    /// Concurrent trials; all available threads when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::Invalid("sweep.trials must be at least 1".into()));
        }
        if self.params.is_empty() {
            return Err(ConfigError::Invalid("sweep.params declares no ranges".into()));
        }
        if self.jobs == Some(0) {
            return Err(ConfigError::Invalid("sweep.jobs must be positive".into()));
        }
        for (k, r) in &self.params {
            if k.starts_with("sweep") {
                return Err(ConfigError::Invalid(format!("cannot sweep `{k}`")));
            }
            r.validate(k)?;
        }
        Ok(())
    }
}

/// One leaderboard row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub params: BTreeMap<String, toml::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub best_trial: usize,
    pub best_config: RunConfig,
    pub best: RunOutput,
    pub report: ExperimentReport,
    pub leaderboard: Vec<TrialResult>,
}

/// Index of the highest-scoring successful trial; ties keep the earlier.
pub fn select_best(trials: &[TrialResult]) -> Option<usize> {
    trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.score.filter(|s| s.is_finite()).map(|s| (i, s)))
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Trial `i` of every sweep from the same base seed uses the same seed and
/// the same data, so sweeps at different `q` are paired.
fn trial_configs(cfg: &RunConfig, spec: &SweepSpec) -> Result<Vec<(TrialResult, RunConfig)>, HarnessError> {
    let mut base = cfg.clone();
    base.sweep = None;
    base.env.data_seed = Some(cfg.env.data_seed.unwrap_or(cfg.seed));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    (0..spec.trials)
        .map(|i| {
            let params: BTreeMap<String, toml::Value> = spec
                .params
                .iter()
                .map(|(k, r)| (k.clone(), r.sample(&mut rng)))
                .collect();
            let seed = cfg.seed.wrapping_add(i as u64);
            let mut overrides: Vec<(String, toml::Value)> =
                params.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            overrides.push(("seed".into(), toml::Value::Integer(seed as i64)));
            let trial_cfg = base.with_overrides(&overrides)?;
            Ok((
                TrialResult {
                    trial: i,
                    seed,
                    params,
                    score: None,
                    error: None,
                },
                trial_cfg,
            ))
        })
        .collect()
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepOutcome, HarnessError> {
    sweep_with(cfg, execute)
}

/// As [`sweep`] with a caller-supplied trial runner.
pub fn sweep_with<F>(cfg: &RunConfig, runner: F) -> Result<SweepOutcome, HarnessError>
where
    F: Fn(&RunConfig) -> Result<RunOutput, HarnessError> + Sync,
{
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Invalid("config has no [sweep] section".into()))?;
    spec.validate()?;
    if cfg.seed > i64::MAX as u64 - spec.trials as u64 {
        return Err(HarnessError::Invalid("sweep seed too large".into()));
    }
    let trials = trial_configs(cfg, spec)?;
    let run_all = || {
        trials
            .par_iter()
            .map(|(row, c)| {
                let mut row = row.clone();
                match runner(c).and_then(|out| spec.objective.score(c.q, &out.records)) {
                    Ok(s) => row.score = Some(s),
                    Err(e) => row.error = Some(e.to_string()),
                }
                row
            })
            .collect::<Vec<_>>()
    };
    let leaderboard = match spec.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| HarnessError::Invalid(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };
    let best_trial = select_best(&leaderboard).ok_or_else(|| {
        let first = leaderboard.iter().find_map(|t| t.error.clone()).unwrap_or_default();
        HarnessError::NoSuccessfulTrials(first)
    })?;
    let best_config = trials[best_trial].1.clone();
    let best = runner(&best_config)?;
    let r = &best_config.report;
    let rep = report(
        best.kind,
        &best.records,
        &r.q_eval,
        r.coverage,
        r.resamples,
        best_config.seed,
    )?;
    Ok(SweepOutcome {
        best_trial,
        best_config,
        best,
        report: rep,
        leaderboard,
    })
}
