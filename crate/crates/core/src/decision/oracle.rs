use rand::Rng;

use super::DecisionError;

/// Index of the smallest prediction; ties go to the lowest index.
pub fn argmin_exact(fhat: &[f64]) -> Result<usize, DecisionError> {
    if fhat.is_empty() {
        return Err(DecisionError::EmptyActions);
    }
    let mut best = 0;
    for (i, &v) in fhat.iter().enumerate().skip(1) {
        if v < fhat[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Number of uniform draws used by [`argmin_sampled`] for accuracy `delta`.
pub fn sampled_count(delta: f64) -> usize {
    (1.0 / delta).ceil().max(1.0) as usize
}

/// Empirical argmin over `ceil(1/delta)` i.i.d. uniform draws on `[0,1]`.
pub fn argmin_sampled<F, R>(fhat: F, delta: f64, rng: &mut R) -> Result<f64, DecisionError>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(delta > 0.0) {
        return Err(DecisionError::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let n = sampled_count(delta);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..n {
        let a: f64 = rng.random();
        let v = fhat(a);
        if v < best.0 {
            best = (v, a);
        }
    }
    Ok(best.1)
}

const BRENT_MAX_ITER: usize = 500;
const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Brent's bounded minimization on `[0,1]` for a unimodal function.
///
/// Endpoints are compared against the interior result, so monotone inputs
/// return the better endpoint.
pub fn argmin_brent<F: Fn(f64) -> f64>(fhat: F, tol: f64) -> Result<f64, DecisionError> {
    if !(tol > 0.0) {
        return Err(DecisionError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = fhat(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut converged = false;

    for _ in 0..BRENT_MAX_ITER {
        let m = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = fhat(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    if !converged {
        return Err(DecisionError::NoConvergence {
            tol,
            iterations: BRENT_MAX_ITER,
        });
    }
    let (f0, f1) = (fhat(0.0), fhat(1.0));
    if f0 <= fx && f0 <= f1 {
        Ok(0.0)
    } else if f1 < fx {
        Ok(1.0)
    } else {
        Ok(x)
    }
}
