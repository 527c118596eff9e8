//! Small dense-vector helpers and the safeguarded scalar Newton solver.

use crate::error::{Error, Result};

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Numerically stable `log(sum(exp(v)))`.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Solves `g(x) = target` for a strictly increasing `g` on `(lower, inf)`.
///
/// Newton steps are halved until they stay above `lower` and reduce the
/// residual. The iteration stops once a step is at rounding level; it is
/// accepted when the residual is within `NEWTON_RESIDUAL_TOL`.
pub(crate) fn monotone_newton<G, D>(g: G, dg: D, target: f64, x0: f64, lower: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    let mut residual = g(x) - target;
    for _ in 0..NEWTON_MAX_ITER {
        if residual == 0.0 {
            return Ok(x);
        }
        let slope = dg(x);
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(Error::Convergence(format!("non-positive slope {slope} at {x}")));
        }
        let mut step = residual / slope;
        let mut next = x - step;
        let mut next_residual = if next > lower { g(next) - target } else { f64::INFINITY };
        let mut halvings = 0;
        while !(next > lower && next_residual.abs() <= residual.abs()) && halvings < 60 {
            step *= 0.5;
            next = x - step;
            next_residual = if next > lower { g(next) - target } else { f64::INFINITY };
            halvings += 1;
        }
        if halvings == 60 {
            break;
        }
        let converged = step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0);
        x = next;
        residual = next_residual;
        if converged {
            break;
        }
    }
    if residual.abs() <= NEWTON_RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Convergence(format!(
            "residual {residual:e} after {NEWTON_MAX_ITER} iterations"
        )))
    }
}
