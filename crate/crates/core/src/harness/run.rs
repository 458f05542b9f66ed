use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, RunConfig};
use super::{HarnessError, RoundRecord};
use crate::decision::{
    al_distribution, argmin_brent, argmin_exact, argmin_sampled, cont_al_sample, sample_index, Action, ActionSpace,
    ExplorationConfig, GammaSchedule,
};
use crate::environments::{
    ingest_csv, ingest_query_jsonl, synthetic_surrogate, EnvKind, Environment, FiniteSource, Schema,
};
use crate::regression::{
    CauchyFeatures, CrossedActions, HeadPredictor, Learner, LinearPredictor, Link, MinMaxScaler, Predictor,
    RegressionError, ZHead,
};
use crate::risk::ExpectileConfig;

/// Records of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: EnvKind,
    pub env_name: String,
    pub dataset_hash: String,
    pub records: Vec<RoundRecord>,
}

impl RunOutput {
    /// Sum of per-round expected regret, when the source knew its risks.
    pub fn cumulative_regret(&self) -> Option<f64> {
        self.records.iter().map(|r| r.regret).sum()
    }
}

/// Resolve the configured environment: a data file or the seeded surrogate.
pub fn load_environment(cfg: &RunConfig) -> Result<Environment, HarnessError> {
    let spec = &cfg.env;
    let mut env = match &spec.path {
        Some(path) => {
            let is_jsonl = path.extension().is_some_and(|e| e == "jsonl" || e == "json");
            if spec.kind == EnvKind::QueryOpt && is_jsonl {
                ingest_query_jsonl(path)?
            } else {
                let schema = match (&spec.schema, &spec.target) {
                    (Some(name), _) if name != "generic" => Schema::named(name)?,
                    (_, Some(target)) => Schema::generic(spec.kind, target),
                    _ => return Err(HarnessError::Invalid("env.path needs env.schema or env.target".into())),
                };
                if schema.kind != spec.kind {
                    return Err(HarnessError::Invalid(format!(
                        "schema {} is for {}, not {}",
                        schema.name, schema.kind, spec.kind
                    )));
                }
                ingest_csv(path, &schema)?.0
            }
        }
        None => synthetic_surrogate(spec.kind, spec.synthetic_rows, spec.data_seed.unwrap_or(cfg.seed)),
    };
    if let Some(beta) = spec.beta {
        env.beta = beta;
    }
    if spec.shuffle {
        env = env.shuffled(cfg.seed);
    }
    if let Some(t) = cfg.rounds {
        env = env.truncated(t);
    }
    Ok(env)
}

/// Load the environment and run the configured algorithm on it.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let env = load_environment(cfg)?;
    let records = match cfg.algorithm() {
        Algorithm::Finite => run_finite(cfg, &env)?,
        Algorithm::Interval => run_interval(cfg, &env)?,
    };
    Ok(RunOutput {
        kind: env.kind,
        env_name: env.name.clone(),
        dataset_hash: env.dataset_hash.clone(),
        records,
    })
}

fn horizon(cfg: &RunConfig, available: usize) -> Result<usize, HarnessError> {
    let t = cfg.rounds.unwrap_or(available).min(available);
    if t == 0 {
        return Err(HarnessError::Invalid("environment has no rounds".into()));
    }
    Ok(t)
}

fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let decide = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(1);
    (decide, noise)
}

fn schedule(cfg: &RunConfig, t: usize, h: f64, theta: f64, dim: usize) -> Result<GammaSchedule, HarnessError> {
    let s = cfg.gamma.resolve(t, h, theta, dim);
    s.validate()
        .map_err(|source| HarnessError::Decision { round: 0, source })?;
    Ok(s)
}

/// Finite-action loop: regression on crossed context-action features, exact
/// argmin, inverse-gap-weighted sampling.
///
/// Smoothing for the rate schedule is `1 / max_actions`, the uniform
/// reference measure over the largest action set.
pub fn run_finite(cfg: &RunConfig, src: &dyn FiniteSource) -> Result<Vec<RoundRecord>, HarnessError> {
    let t_total = horizon(cfg, src.rounds())?;
    let ecfg = ExpectileConfig::new(cfg.q)?;
    let map = CrossedActions {
        context_dim: src.context_dim(),
        max_actions: src.max_actions(),
    };
    let model = LinearPredictor::new(map, Link::default());
    let dim = model.params().len();
    let mut learner = Learner::new(model, cfg.oracle.solver, ecfg);
    let sched = schedule(cfg, t_total, 1.0 / src.max_actions() as f64, ecfg.theta(), dim)?;
    let (mut decide, mut noise) = rngs(cfg.seed);

    let mut records = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let round = t as u64 + 1;
        let reg_err = |source| HarnessError::Regression { round, source };
        let dec_err = |source| HarnessError::Decision { round, source };
        let x = src.context(t);
        let n = src.num_actions(t);
        let gamma = sched.gamma(round);
        let xcfg = ExplorationConfig::new(gamma, ecfg).map_err(dec_err)?;
        let fhat = learner.model.predict_all(x, n).map_err(reg_err)?;
        let ahat = argmin_exact(&fhat).map_err(dec_err)?;
        let probs = al_distribution(&fhat, ahat, &xcfg).map_err(dec_err)?;
        let a = sample_index(&probs, &mut decide);
        let played = src.play(t, a, &mut noise);
        let regret = src.true_risks(t).map(|r| {
            let best = r.iter().copied().fold(f64::INFINITY, f64::min);
            probs.iter().zip(&r).map(|(p, v)| p * v).sum::<f64>() - best
        });
        records.push(RoundRecord {
            t: round,
            context: t,
            action: Action::Index(a),
            weight: probs[a],
            atom: false,
            reward: played.reward,
            loss: played.loss,
            fhat: fhat[a],
            ahat: Action::Index(ahat),
            gamma,
            target: src.target(t),
            num_actions: Some(n),
            regret,
        });
        learner.update(x, a, played.loss).map_err(reg_err)?;
    }
    Ok(records)
}

/// A regression oracle over interval actions: per context it prepares a
/// predicted loss curve on `[0,1]`, and learns from the played point.
pub trait IntervalModel {
    type Curve;
    /// Parameter count, for the plug-in regret bound of the rate schedule.
    fn dim(&self) -> usize;
    fn curve(&self, x: &[f64]) -> Result<Self::Curve, RegressionError>;
    fn loss_at(&self, curve: &Self::Curve, a: f64) -> f64;
    fn update(&mut self, x: &[f64], a: f64, loss: f64) -> Result<(), RegressionError>;
}

impl IntervalModel for Learner<HeadPredictor> {
    type Curve = ZHead;

    fn dim(&self) -> usize {
        self.model.params().len()
    }

    fn curve(&self, x: &[f64]) -> Result<ZHead, RegressionError> {
        self.model.head(x)
    }

    fn loss_at(&self, z: &ZHead, a: f64) -> f64 {
        self.model.kind.loss(*z, a)
    }

    fn update(&mut self, x: &[f64], a: f64, loss: f64) -> Result<(), RegressionError> {
        Learner::update(self, x, a, loss)
    }
}

/// Interval-action loop with the kernelized head of the environment's kind.
pub fn run_interval(cfg: &RunConfig, env: &Environment) -> Result<Vec<RoundRecord>, HarnessError> {
    let kind = env
        .head_kind()
        .ok_or_else(|| HarnessError::Invalid(format!("{} has no interval actions", env.kind)))?;
    let ecfg = ExpectileConfig::new(cfg.q)?;
    let d = env.context_dim();
    let setup = |source| HarnessError::Regression { round: 0, source };
    let features = CauchyFeatures::new(
        d,
        cfg.oracle.rff_dim,
        cfg.oracle.bandwidth,
        cfg.oracle.feature_seed.unwrap_or(cfg.seed),
    )
    .map_err(setup)?;
    let scaler = MinMaxScaler::fit(env.rows().iter().map(|r| r.features.as_slice()), d);
    let head = HeadPredictor::new(kind, features, scaler).map_err(setup)?;
    let mut learner = Learner::new(head, cfg.oracle.solver, ecfg);
    run_interval_with(cfg, env, &mut learner)
}

/// Interval-action loop: approximate (or Brent) argmin of the predicted curve,
/// Cont-AL sampling on `[0,1]` with smoothing `h`, then a regression step.
pub fn run_interval_with<M: IntervalModel>(
    cfg: &RunConfig,
    env: &Environment,
    model: &mut M,
) -> Result<Vec<RoundRecord>, HarnessError> {
    let t_total = horizon(cfg, env.len())?;
    let ecfg = ExpectileConfig::new(cfg.q)?;
    let sched = schedule(cfg, t_total, cfg.h, ecfg.theta(), model.dim())?;
    let space = ActionSpace::interval(cfg.h).map_err(|source| HarnessError::Decision { round: 0, source })?;
    let (mut decide, _) = rngs(cfg.seed);

    let mut records = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let round = t as u64 + 1;
        let reg_err = |source| HarnessError::Regression { round, source };
        let dec_err = |source| HarnessError::Decision { round, source };
        let step = env.step(t, cfg.h);
        let x = step.context;
        let gamma = sched.gamma(round);
        let xcfg = ExplorationConfig::new(gamma, ecfg).map_err(dec_err)?;
        let curve = model.curve(x).map_err(reg_err)?;
        let f = |a: f64| model.loss_at(&curve, a);
        let ahat = if cfg.exact_argmin {
            argmin_brent(f, cfg.brent_tol)
        } else {
            argmin_sampled(f, xcfg.oracle_delta(), &mut decide)
        }
        .map_err(dec_err)?;
        let draw = cont_al_sample(f, ahat, space, &xcfg, &mut decide).map_err(dec_err)?;
        let played = step.play(draw.action);
        let a = draw.action.as_f64();
        records.push(RoundRecord {
            t: round,
            context: t,
            action: draw.action,
            weight: draw.weight,
            atom: draw.atom,
            reward: played.reward,
            loss: played.loss,
            fhat: f(a),
            ahat: draw.ahat,
            gamma,
            target: step.target(),
            num_actions: None,
            regret: None,
        });
        model.update(x, a, played.loss).map_err(reg_err)?;
    }
    Ok(records)
}
