//! Executable property suites behind `riskcb verify`. Each suite checks a
//! library component against an independent oracle; `corrupt` swaps in a
//! deliberately broken component so the suite itself can be seen to fail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::decision::{
    argmin_sampled, cont_al_density, sampled_count, verify_indifference_with, ExplorationConfig, INDIFFERENCE_TOL,
};
use crate::regression::{
    gradient_check, CauchyFeatures, CrossedActions, HeadKind, HeadPredictor, LinearPredictor, Link, MinMaxScaler,
    Predictor, RegressionError,
};
use crate::risk::{expectile, expectile_loss, expectile_loss_grad, ExpectileConfig, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Indifference,
    OracleDelta,
    Expectile,
    Gradients,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Indifference,
        Suite::OracleDelta,
        Suite::Expectile,
        Suite::Gradients,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Indifference => "indifference",
            Suite::OracleDelta => "oracle-delta",
            Suite::Expectile => "expectile",
            Suite::Gradients => "gradients",
        }
    }

    pub fn run(&self, seed: u64, corrupt: bool) -> SuiteReport {
        match self {
            Suite::Indifference => indifference_suite(100, seed, corrupt),
            Suite::OracleDelta => oracle_delta_suite(&[0.1, 0.01], 20_000, seed, corrupt),
            Suite::Expectile => expectile_suite(200, seed, corrupt),
            Suite::Gradients => gradient_suite(seed, corrupt),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (expected indifference, oracle-delta, expectile or gradients)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub corrupt: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(
            f,
            "{} {}{}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            if self.corrupt { " (corrupted)" } else { "" }
        )
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Random piecewise-linear function on `[0,1]` sampled on `n + 1` points.
fn piecewise_grid(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let k: usize = rng.random_range(1..10);
    let ys: Vec<f64> = (0..=k).map(|_| rng.random()).collect();
    (0..=n)
        .map(|j| {
            let s = j as f64 / n as f64 * k as f64;
            let i = (s.floor() as usize).min(k - 1);
            let t = s - i as f64;
            ys[i] * (1.0 - t) + ys[i + 1] * t
        })
        .collect()
}

/// The game-value inequality on random instances; corruption lowers the
/// exploration density by 0.05.
pub fn indifference_suite(instances: usize, seed: u64, corrupt: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..instances {
        let grid = piecewise_grid(&mut rng, 400);
        let f_ahat = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let q = rng.random_range(0.02..0.98);
        let gamma = 10f64.powf(rng.random_range(-1.0..3.0));
        let h = rng.random_range(0.01..1.0);
        let cfg = ExplorationConfig::new(gamma, ExpectileConfig::new(q).expect("q in range")).expect("gamma > 0");
        let r = verify_indifference_with(&grid, f_ahat, &cfg, h, |_, gap| {
            let d = cont_al_density(gap, h, &cfg);
            if corrupt {
                (d - 0.05).max(1e-3)
            } else {
                d
            }
        });
        worst = worst.max(r.max_slack);
        failures += usize::from(!r.passed);
    }
    SuiteReport {
        suite: Suite::Indifference,
        corrupt,
        checks: vec![check(
            format!("game value on {instances} random instances"),
            failures == 0,
            format!("{failures} failed; worst slack {worst:.3e} (tolerance {INDIFFERENCE_TOL:e})"),
        )],
    }
}

/// Expected mu-gap `E_mu[max(0, f(ahat) - f(a))]` in closed form.
#[derive(Debug, Clone, Copy)]
enum Shape {
    Linear,
    Quadratic { c: f64 },
    Step { at: f64 },
}

impl Shape {
    fn f(&self, a: f64) -> f64 {
        match *self {
            Shape::Linear => a,
            Shape::Quadratic { c } => (a - c) * (a - c),
            Shape::Step { at } => f64::from(u8::from(a >= at)),
        }
    }

    fn mu_gap(&self, ahat: f64) -> f64 {
        match *self {
            Shape::Linear => 0.5 * ahat * ahat,
            Shape::Quadratic { c } => {
                let r = (ahat - c).abs();
                let prim = |u: f64| r * r * u - u * u * u / 3.0;
                let (lo, hi) = ((0.0f64).max(c - r) - c, (1.0f64).min(c + r) - c);
                prim(hi) - prim(lo)
            }
            Shape::Step { at } => {
                if ahat >= at {
                    at
                } else {
                    0.0
                }
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Shape::Linear => "linear".into(),
            Shape::Quadratic { c } => format!("quadratic@{c}"),
            Shape::Step { at } => format!("step@{at}"),
        }
    }
}

/// Monte-Carlo expected gap of the sampled argmin against `delta`;
/// corruption takes a single draw regardless of `delta`.
pub fn oracle_delta_suite(deltas: &[f64], reps: usize, seed: u64, corrupt: bool) -> SuiteReport {
    let shapes = [Shape::Linear, Shape::Quadratic { c: 0.3 }, Shape::Step { at: 0.2 }];
    let mut checks = Vec::new();
    for (si, shape) in shapes.iter().enumerate() {
        for (di, &delta) in deltas.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((si * deltas.len() + di) as u64);
            let oracle_delta = if corrupt { 1.0 } else { delta };
            let mut total = 0.0;
            for _ in 0..reps {
                let ahat = argmin_sampled(|a| shape.f(a), oracle_delta, &mut rng).expect("delta > 0");
                total += shape.mu_gap(ahat);
            }
            let mean = total / reps as f64;
            checks.push(check(
                format!("{} delta={delta}", shape.name()),
                mean <= delta,
                format!(
                    "mean gap {mean:.3e} over {reps} draws of {} points",
                    sampled_count(oracle_delta)
                ),
            ));
        }
    }
    SuiteReport {
        suite: Suite::OracleDelta,
        corrupt,
        checks,
    }
}

/// Independent minimizer of the empirical expectile loss: nested grids,
/// each 1000 points wide around the previous best.
pub fn grid_expectile(values: &[f64], cfg: ExpectileConfig) -> f64 {
    let objective = |v: f64| values.iter().map(|&y| expectile_loss(y, v, cfg)).sum::<f64>();
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut best = lo;
    for _ in 0..5 {
        let step = (hi - lo) / 1000.0;
        if step <= 0.0 {
            break;
        }
        let mut best_val = f64::INFINITY;
        for k in 0..=1000 {
            let v = lo + k as f64 * step;
            let o = objective(v);
            if o < best_val {
                best_val = o;
                best = v;
            }
        }
        lo = (best - step).max(lo);
        hi = (best + step).min(hi);
    }
    best
}

/// Solver vs nested-grid minimization on random samples, plus the
/// Bernoulli closed form; corruption reports the sample mean instead.
pub fn expectile_suite(instances: usize, seed: u64, corrupt: bool) -> SuiteReport {
    let solve = |v: &[f64], cfg: ExpectileConfig| -> f64 {
        if corrupt {
            Sample::new(v).expect("nonempty").mean()
        } else {
            expectile(v, cfg).expect("nonempty")
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(3..=1000);
        let scale = rng.random_range(0.1..10.0);
        let values: Vec<f64> = (0..n).map(|_| scale * (rng.random::<f64>() - 0.3).powi(3)).collect();
        let q = levels[rng.random_range(0..levels.len())];
        let cfg = ExpectileConfig::new(q).expect("q in range");
        worst = worst.max((solve(&values, cfg) - grid_expectile(&values, cfg)).abs());
    }
    let mut bern: f64 = 0.0;
    for q in [0.1, 0.2, 0.5, 0.8] {
        let cfg = ExpectileConfig::new(q).expect("q in range");
        bern = bern.max((solve(&[0.0, 1.0], cfg) - (1.0 - q)).abs());
    }
    SuiteReport {
        suite: Suite::Expectile,
        corrupt,
        checks: vec![
            check(
                format!("solver vs grid on {instances} samples"),
                worst < 2e-5,
                format!("max abs error {worst:.3e} (bound 2e-5)"),
            ),
            check(
                "Bernoulli(1/2) expectile is 1 - q",
                bern < 1e-9,
                format!("max abs error {bern:.3e} (bound 1e-9)"),
            ),
        ],
    }
}

/// Predictor whose analytic gradient is scaled by `factor`.
#[derive(Clone)]
struct Skewed<P> {
    inner: P,
    factor: f64,
}

impl<P: Predictor> Predictor for Skewed<P> {
    type Action = P::Action;

    fn params(&self) -> &[f64] {
        self.inner.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.inner.params_mut()
    }

    fn raw(&self, x: &[f64], a: Self::Action) -> Result<f64, RegressionError> {
        self.inner.raw(x, a)
    }

    fn raw_with_grad(&self, x: &[f64], a: Self::Action) -> Result<(f64, Vec<f64>), RegressionError> {
        let (v, g) = self.inner.raw_with_grad(x, a)?;
        Ok((v, g.into_iter().map(|x| x * self.factor).collect()))
    }
}

const GRAD_BOUND: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-6;

fn grad_check<P: Predictor + Clone>(
    name: &str,
    p: P,
    points: &[(Vec<f64>, P::Action, f64)],
    cfg: ExpectileConfig,
    corrupt: bool,
) -> Check {
    let p = Skewed {
        inner: p,
        factor: if corrupt { 1.01 } else { 1.0 },
    };
    match gradient_check(&p, points, cfg, GRAD_STEP) {
        Ok(r) => check(
            name,
            r.checked > 0 && r.max_relative_error < GRAD_BOUND,
            format!(
                "max relative error {:.3e} over {} points ({} at boundaries skipped)",
                r.max_relative_error, r.checked, r.excluded
            ),
        ),
        Err(e) => check(name, false, e.to_string()),
    }
}

/// Analytic vs central-difference gradients of the expectile loss and of
/// the linear, pricing and inventory predictors; corruption scales the
/// analytic gradients by 1.01.
pub fn gradient_suite(seed: u64, corrupt: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ExpectileConfig::new(0.2).expect("q in range");
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let v: f64 = rng.random();
        let vhat: f64 = rng.random();
        if (v - vhat).abs() < 1e-4 {
            continue;
        }
        let q = rng.random_range(0.02..0.98);
        let c = ExpectileConfig::new(q).expect("q in range");
        let analytic = expectile_loss_grad(v, vhat, c) * if corrupt { 1.01 } else { 1.0 };
        let fd = (expectile_loss(v, vhat + GRAD_STEP, c) - expectile_loss(v, vhat - GRAD_STEP, c)) / (2.0 * GRAD_STEP);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-12));
    }
    checks.push(check(
        "expectile loss",
        worst < GRAD_BOUND,
        format!("max relative error {worst:.3e} over 500 points"),
    ));

    let map = CrossedActions {
        context_dim: 4,
        max_actions: 3,
    };
    let dim = 4 * 3 + 3;
    let weights: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect();
    let linear = LinearPredictor::with_weights(map, Link::default(), weights).expect("matching dimension");
    let pts: Vec<(Vec<f64>, usize, f64)> = (0..60)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            (x, rng.random_range(0..3), rng.random())
        })
        .collect();
    checks.push(grad_check("linear head", linear, &pts, cfg, corrupt));

    for (name, kind) in [
        ("pricing head", HeadKind::Pricing),
        ("inventory head", HeadKind::Inventory { beta: 1.0 / 3.0 }),
    ] {
        let features = CauchyFeatures::new(3, 16, 1.0, seed).expect("valid features");
        let head = HeadPredictor::new(kind, features, MinMaxScaler::identity(3)).expect("matching dimension");
        let params: Vec<f64> = (0..head.params().len()).map(|_| rng.random_range(-0.3..0.3)).collect();
        let head = head.from_params(params).expect("matching dimension");
        let pts: Vec<(Vec<f64>, f64, f64)> = (0..60)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                (x, rng.random_range(0.02..0.98), rng.random())
            })
            .collect();
        checks.push(grad_check(name, head, &pts, cfg, corrupt));
    }
    SuiteReport {
        suite: Suite::Gradients,
        corrupt,
        checks,
    }
}
