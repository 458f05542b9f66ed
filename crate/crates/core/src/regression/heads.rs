//! Location/scale heads used by the continuous-action experiments and the
//! two reward curves they induce over a price or allocation `a in [0, 1]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

use super::RegressionError;

/// Smallest admissible scale; keeps `erf` arguments bounded.
pub const SCALE_FLOOR: f64 = 1e-3;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Location `z0 in [0,1]` and scale `z1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZHead {
    pub z0: f64,
    pub z1: f64,
}

impl ZHead {
    pub fn new(z0: f64, z1: f64) -> Result<Self, RegressionError> {
        if !(0.0..=1.0).contains(&z0) || !(z1 > 0.0) || !z1.is_finite() {
            return Err(RegressionError::InvalidConfig(format!(
                "z head out of range: z0={z0}, z1={z1}"
            )));
        }
        Ok(Self { z0, z1 })
    }

    /// Logistic location and softplus-plus-floor scale.
    pub fn from_logits(u0: f64, u1: f64) -> Self {
        Self {
            z0: logistic(u0),
            z1: softplus(u1) + SCALE_FLOOR,
        }
    }

    /// `(dz0/du0, dz1/du1)` at the given logits.
    pub fn link_derivatives(u0: f64, u1: f64) -> (f64, f64) {
        let s = logistic(u0);
        (s * (1.0 - s), logistic(u1))
    }
}

#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.max(0.0) + (-u.abs()).exp().ln_1p()
    }
}

#[inline]
fn erf_deriv(x: f64) -> f64 {
    FRAC_2_SQRT_PI * (-x * x).exp()
}

#[inline]
pub(crate) fn std_normal_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

#[inline]
pub(crate) fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Expected revenue of listing at `a` when the sale threshold behaves like a
/// `[0,1]`-truncated Gaussian with location `z0` and erf-scale `z1`:
///
/// `a * (erf((1-z0)/z1) - erf((a-z0)/z1)) / (erf((1-z0)/z1) + erf(z0/z1))`.
pub fn pricing_predictor(z: ZHead, a: f64) -> f64 {
    pricing_predictor_grad(z, a).0
}

/// Value and partial derivatives with respect to `(z0, z1)`.
pub fn pricing_predictor_grad(z: ZHead, a: f64) -> (f64, f64, f64) {
    let s = z.z1;
    let big_a = (1.0 - z.z0) / s;
    let big_b = (a - z.z0) / s;
    let big_c = z.z0 / s;
    let (ea, eb, ec) = (libm::erf(big_a), libm::erf(big_b), libm::erf(big_c));
    let num = ea - eb;
    let den = ea + ec;
    if den <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let (da, db, dc) = (erf_deriv(big_a), erf_deriv(big_b), erf_deriv(big_c));
    let dnum_dz0 = (db - da) / s;
    let dden_dz0 = (dc - da) / s;
    let dnum_ds = (-big_a * da + big_b * db) / s;
    let dden_ds = (-big_a * da - big_c * dc) / s;
    let value = a * num / den;
    let den2 = den * den;
    (
        value,
        a * (dnum_dz0 * den - num * dden_dz0) / den2,
        a * (dnum_ds * den - num * dden_ds) / den2,
    )
}

/// `E[min(a, P)] - beta * a` for `P` a Gaussian with mean `z0` and standard
/// deviation `z1`, truncated to `[0, 1]`.
pub fn inventory_predictor(z: ZHead, a: f64, beta: f64) -> f64 {
    inventory_predictor_grad(z, a, beta).0
}

/// Value and partial derivatives with respect to `(z0, z1)`.
///
/// With `L = -z0/s`, `A = (a-z0)/s`, `U = (1-z0)/s` and
/// `Z = Phi(U) - Phi(L)`, the untruncated partial expectation gives
///
/// `Z * E[min(a,P)] = a (Phi(U) - Phi(A)) + z0 (Phi(A) - Phi(L)) + s (phi(L) - phi(A))`.
pub fn inventory_predictor_grad(z: ZHead, a: f64, beta: f64) -> (f64, f64, f64) {
    let m = z.z0;
    let s = z.z1;
    let l = -m / s;
    let t = (a - m) / s;
    let u = (1.0 - m) / s;
    let (cl, ct, cu) = (std_normal_cdf(l), std_normal_cdf(t), std_normal_cdf(u));
    let (pl, pt, pu) = (std_normal_pdf(l), std_normal_pdf(t), std_normal_pdf(u));

    let num = a * (cu - ct) + m * (ct - cl) + s * (pl - pt);
    let zn = cu - cl;
    if zn <= 0.0 {
        return (a.min(m.clamp(0.0, 1.0)) - beta * a, 0.0, 0.0);
    }

    // d/dm of a standardized point c: -1/s; d/ds: -c/s.
    // dPhi(c) = phi(c) dc, dphi(c) = -c phi(c) dc.
    let dnum_dm = a * (-pu + pt) / s + (ct - cl) + m * (-pt + pl) / s + (l * pl - t * pt);
    let dnum_ds = a * (-u * pu + t * pt) / s + m * (-t * pt + l * pl) / s + (pl - pt) + (l * l * pl - t * t * pt);
    let dz_dm = (pl - pu) / s;
    let dz_ds = (l * pl - u * pu) / s;

    let e = num / zn;
    let z2 = zn * zn;
    (
        e - beta * a,
        (dnum_dm * zn - num * dz_dm) / z2,
        (dnum_ds * zn - num * dz_ds) / z2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Maclaurin series for erf, independent of libm.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        FRAC_2_SQRT_PI * sum
    }

    /// Trapezoid rule for the truncated-Gaussian expectation.
    fn inventory_trapezoid(z: ZHead, a: f64, beta: f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let (mut top, mut bot) = (0.0, 0.0);
        for k in 0..=n {
            let p = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let dens = (-0.5 * ((p - z.z0) / z.z1).powi(2)).exp();
            top += w * a.min(p) * dens;
            bot += w * dens;
        }
        top / bot - beta * a
    }

    #[test]
    fn pricing_endpoints_vanish() {
        let z = ZHead::new(0.3, 0.4).unwrap();
        assert_eq!(pricing_predictor(z, 0.0), 0.0);
        assert!(pricing_predictor(z, 1.0).abs() < 1e-15);
    }

    #[test]
    fn pricing_matches_series_evaluation() {
        let z = ZHead::new(0.5, 0.2).unwrap();
        let a = 0.4;
        let e = |x: f64| erf_series(x);
        let expect = a * (e(0.5 / 0.2) - e((a - 0.5) / 0.2)) / (e(0.5 / 0.2) + e(0.5 / 0.2));
        assert!((pricing_predictor(z, a) - expect).abs() < 1e-10);
    }

    #[test]
    fn inventory_examples() {
        let z = ZHead::new(0.5, 0.3).unwrap();
        assert!(inventory_predictor(z, 0.0, 1.0 / 3.0).abs() < 1e-15);
        let closed = inventory_predictor(z, 0.6, 1.0 / 3.0);
        let numeric = inventory_trapezoid(z, 0.6, 1.0 / 3.0, 1_000_000);
        assert!((closed - numeric).abs() < 1e-6, "{closed} vs {numeric}");
    }

    #[test]
    fn inventory_closed_form_against_trapezoid_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let z = ZHead::new(rng.random(), rng.random_range(0.05..2.0)).unwrap();
            let a: f64 = rng.random();
            let beta: f64 = rng.random();
            let diff = (inventory_predictor(z, a, beta) - inventory_trapezoid(z, a, beta, 20_000)).abs();
            worst = worst.max(diff);
        }
        assert!(worst < 1e-6, "max abs error {worst}");
    }

    #[test]
    fn inventory_expected_min_is_increasing_and_concave() {
        let z = ZHead::new(0.35, 0.2).unwrap();
        let n = 200;
        let vals: Vec<f64> = (0..=n)
            .map(|k| inventory_predictor(z, k as f64 / n as f64, 0.0))
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-14);
        }
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
        }
    }

    #[test]
    fn analytic_partials_match_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..300 {
            let z0 = rng.random_range(0.05..0.95);
            let z1 = rng.random_range(0.05..1.5);
            let a = rng.random_range(0.01..0.99);
            let z = ZHead { z0, z1 };
            let (_, g0, g1) = pricing_predictor_grad(z, a);
            let fd0 = (pricing_predictor(ZHead { z0: z0 + h, z1 }, a) - pricing_predictor(ZHead { z0: z0 - h, z1 }, a))
                / (2.0 * h);
            let fd1 = (pricing_predictor(ZHead { z0, z1: z1 + h }, a) - pricing_predictor(ZHead { z0, z1: z1 - h }, a))
                / (2.0 * h);
            assert!((g0 - fd0).abs() <= 1e-6 * (1.0 + fd0.abs()));
            assert!((g1 - fd1).abs() <= 1e-6 * (1.0 + fd1.abs()));

            let (_, k0, k1) = inventory_predictor_grad(z, a, 0.3);
            let fk0 = (inventory_predictor(ZHead { z0: z0 + h, z1 }, a, 0.3)
                - inventory_predictor(ZHead { z0: z0 - h, z1 }, a, 0.3))
                / (2.0 * h);
            let fk1 = (inventory_predictor(ZHead { z0, z1: z1 + h }, a, 0.3)
                - inventory_predictor(ZHead { z0, z1: z1 - h }, a, 0.3))
                / (2.0 * h);
            assert!((k0 - fk0).abs() <= 1e-6 * (1.0 + fk0.abs()), "{k0} {fk0}");
            assert!((k1 - fk1).abs() <= 1e-6 * (1.0 + fk1.abs()), "{k1} {fk1}");
        }
    }

    #[test]
    fn links_respect_codomain() {
        for u in [-50.0, -3.0, 0.0, 2.0, 40.0] {
            let z = ZHead::from_logits(u, u);
            assert!((0.0..=1.0).contains(&z.z0));
            assert!(z.z1 >= SCALE_FLOOR);
        }
        let z = ZHead::from_logits(0.0, 0.0);
        assert_eq!(z.z0, 0.5);
        assert!((z.z1 - (2f64.ln() + SCALE_FLOOR)).abs() < 1e-15);
        assert!(ZHead::new(1.2, 0.1).is_err());
        assert!(ZHead::new(0.2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn pricing_is_bounded_by_price(z0 in 0.0f64..1.0, z1 in 0.01f64..3.0, a in 0.0f64..1.0) {
            let v = pricing_predictor(ZHead { z0, z1 }, a);
            prop_assert!(v >= -1e-15 && v <= a + 1e-15);
        }

        #[test]
        fn inventory_between_bounds(z0 in 0.0f64..1.0, z1 in 0.01f64..3.0, a in 0.0f64..1.0, beta in 0.0f64..1.0) {
            let v = inventory_predictor(ZHead { z0, z1 }, a, beta);
            prop_assert!(v <= (1.0 - beta) * a + 1e-12);
            prop_assert!(v >= -beta * a - 1e-12);
        }
    }
}
