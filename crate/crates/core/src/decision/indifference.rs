//! Numerical check of the game-value indifference inequality for the
//! interval distribution.
//!
//! For every grid action `a` with density `m` and every `z` in `[0, 1/h]`:
//!
//! ```text
//! xi(m, z) - z (f(a) + beta) - kappa(a) <= 0
//! xi(m, z)  = [(1 - m) + (z - m)^2 / m] / c          c = 4 theta gamma
//! beta      = (1 - 2h) / (c h) - f(ahat)
//! kappa(a)  = max(0, f(ahat) - f(a)) / h + 1/c
//! ```

use serde::{Deserialize, Serialize};

use super::{cont_al_density, ExplorationConfig};

pub const INDIFFERENCE_TOL: f64 = 1e-9;

/// Spacing of the `z` grid.
pub const Z_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndifferenceReport {
    /// Largest value of the left-hand side over all grid actions and `z`.
    pub max_slack: f64,
    /// Grid index and `z` at which `max_slack` was attained.
    pub worst_index: usize,
    pub worst_z: f64,
    /// Grid actions whose density fell outside `(0, 1]`.
    pub invalid_densities: usize,
    pub passed: bool,
}

/// Check with the interval density itself.
pub fn verify_indifference(fhat_grid: &[f64], f_ahat: f64, cfg: &ExplorationConfig, h: f64) -> IndifferenceReport {
    verify_indifference_with(fhat_grid, f_ahat, cfg, h, |_, gap| cont_al_density(gap, h, cfg))
}

/// Check with an arbitrary density `density(grid_index, gap)`.
pub fn verify_indifference_with<D>(
    fhat_grid: &[f64],
    f_ahat: f64,
    cfg: &ExplorationConfig,
    h: f64,
    density: D,
) -> IndifferenceReport
where
    D: Fn(usize, f64) -> f64,
{
    let c = cfg.rate();
    let beta = (1.0 - 2.0 * h) / (c * h) - f_ahat;
    let z_max = 1.0 / h;
    let steps = (z_max / Z_STEP).floor() as usize;

    let mut report = IndifferenceReport {
        max_slack: f64::NEG_INFINITY,
        worst_index: 0,
        worst_z: 0.0,
        invalid_densities: 0,
        passed: true,
    };

    for (i, &f) in fhat_grid.iter().enumerate() {
        let gap = f - f_ahat;
        let m = density(i, gap);
        if !(m > 0.0 && m <= 1.0) {
            report.invalid_densities += 1;
            continue;
        }
        let kappa = (-gap).max(0.0) / h + 1.0 / c;
        let lin = f + beta;
        let eval = |z: f64| ((1.0 - m) + (z - m) * (z - m) / m) / c - z * lin - kappa;

        // vertex of the quadratic in z: d/dz = 2(z - m)/(c m) - lin = 0
        let vertex = (m + 0.5 * c * m * lin).clamp(0.0, z_max);
        let mut consider = |z: f64| {
            let v = eval(z);
            if v > report.max_slack {
                report.max_slack = v;
                report.worst_index = i;
                report.worst_z = z;
            }
        };
        for k in 0..=steps {
            consider(k as f64 * Z_STEP);
        }
        consider(z_max);
        consider(vertex);
    }

    report.passed = report.invalid_densities == 0 && report.max_slack <= INDIFFERENCE_TOL;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::ExpectileConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_of<F: Fn(f64) -> f64>(f: F, n: usize) -> Vec<f64> {
        (0..=n).map(|k| f(k as f64 / n as f64)).collect()
    }

    /// Random piecewise-linear predictor on `[0,1]` with a few knots.
    fn random_piecewise(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
        let k = rng.random_range(2..8);
        let ys: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
        move |a: f64| {
            let s = a * k as f64;
            let i = (s.floor() as usize).min(k - 1);
            let t = s - i as f64;
            ys[i] * (1.0 - t) + ys[i + 1] * t
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, ExplorationConfig, f64) {
        let f = random_piecewise(rng);
        let grid = grid_of(&f, 200);
        let f_ahat = grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let q = rng.random_range(0.05..0.95);
        let gamma = rng.random_range(1.0..500.0);
        let h = rng.random_range(0.05..0.5);
        let cfg = ExplorationConfig::new(gamma, ExpectileConfig::new(q).unwrap()).unwrap();
        (grid, f_ahat, cfg, h)
    }

    #[test]
    fn constant_predictor_passes() {
        let cfg = ExplorationConfig::new(10.0, ExpectileConfig::new(0.3).unwrap()).unwrap();
        let r = verify_indifference(&[0.4; 50], 0.4, &cfg, 0.1);
        assert!(r.passed, "{r:?}");
        assert!(r.max_slack.abs() < 1e-12);
    }

    #[test]
    fn random_instances_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let (grid, f_ahat, cfg, h) = random_instance(&mut rng);
            let r = verify_indifference(&grid, f_ahat, &cfg, h);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn lowered_density_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..20 {
            let (grid, f_ahat, cfg, h) = random_instance(&mut rng);
            let r = verify_indifference_with(&grid, f_ahat, &cfg, h, |_, gap| {
                let m = cont_al_density(gap, h, &cfg);
                if gap > 0.0 {
                    (m - 0.05).max(1e-3)
                } else {
                    m
                }
            });
            assert!(!r.passed, "{r:?}");
        }
    }

    #[test]
    fn raised_density_stays_within_bound() {
        // more exploration mass only makes the inequality slacker
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let (grid, f_ahat, cfg, h) = random_instance(&mut rng);
        let r = verify_indifference_with(&grid, f_ahat, &cfg, h, |_, gap| {
            let m = cont_al_density(gap, h, &cfg);
            if gap > 0.0 {
                (m + 0.05).min(1.0)
            } else {
                m
            }
        });
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn out_of_range_density_fails() {
        let cfg = ExplorationConfig::new(10.0, ExpectileConfig::new(0.3).unwrap()).unwrap();
        let r = verify_indifference_with(&[0.4, 0.6], 0.4, &cfg, 0.1, |_, _| 1.5);
        assert_eq!(r.invalid_densities, 2);
        assert!(!r.passed);
    }

    #[test]
    fn endpoint_values_match_closed_form() {
        // at z = 1/h the expression is (1/m - 1)/(c h^2) - max(0, gap)/h
        let cfg = ExplorationConfig::new(25.0, ExpectileConfig::new(0.2).unwrap()).unwrap();
        let h = 0.25;
        let m = 0.3;
        let gap = 0.3;
        let r = verify_indifference_with(&[0.1 + gap], 0.1, &cfg, h, |_, _| m);
        let c = cfg.rate();
        let expected = (1.0 / m - 1.0) / (c * h * h) - gap / h;
        assert!((r.max_slack - expected).abs() < 1e-12, "{} vs {expected}", r.max_slack);
        assert!((r.worst_z - 1.0 / h).abs() < 1e-12);
    }
}
