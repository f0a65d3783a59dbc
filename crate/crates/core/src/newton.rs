//! Damped Newton iteration shared by the base Monge-Ampère solve and the
//! fiberwise Kähler-Einstein solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::LinearSystem;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Check the Jacobian against a directional difference at `init`.
    pub probe: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            probe: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    /// `‖F‖_∞` before each step and after the last one.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

const PROBE_RTOL: f64 = 1e-4;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn probe_jacobian<S: LinearSystem>(
    residual: &impl Fn(&[f64]) -> Vec<f64>,
    jac: &S,
    x: &[f64],
) -> Result<()> {
    let dir: Vec<f64> = (0..x.len()).map(|i| (1.0 + 0.7 * i as f64).sin()).collect();
    let delta = 1e-6 * (1.0 + sup(x));
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, d)| a + s * d).collect() };
    let fp = residual(&shifted(delta));
    let fm = residual(&shifted(-delta));
    let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * delta)).collect();
    let jv = jac.apply(&dir);
    let diff: Vec<f64> = fd.iter().zip(&jv).map(|(a, b)| a - b).collect();
    let rel = sup(&diff) / sup(&jv).max(1e-300);
    if rel > PROBE_RTOL {
        return Err(Error::ContractViolation(format!(
            "Jacobian disagrees with directional difference (relative {rel:.3e})"
        )));
    }
    Ok(())
}

/// Solves `F(x) = 0` by Newton's method with backtracking on `‖F‖_∞`.
pub fn newton_semilinear<S: LinearSystem>(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> S,
    init: Vec<f64>,
    opts: NewtonOptions,
) -> Result<NewtonOutcome> {
    let mut x = init;
    let mut f = residual(&x);
    if f.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "residual has {} entries for {} unknowns",
            f.len(),
            x.len()
        )));
    }
    let mut norm = sup(&f);
    let mut trace = vec![norm];
    if opts.probe && norm > opts.tol {
        probe_jacobian(&residual, &jacobian(&x), &x)?;
    }
    let mut iterations = 0;
    while norm > opts.tol {
        if iterations >= opts.max_iter || !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                last_residual: norm,
                trace,
            });
        }
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let step = jacobian(&x).solve(&neg)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let ft = residual(&trial);
            let nt = sup(&ft);
            if nt <= (1.0 - 1e-4 * t) * norm || t < 1.0 / 64.0 {
                x = trial;
                f = ft;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        trace.push(norm);
    }
    Ok(NewtonOutcome {
        solution: x,
        trace,
        iterations,
    })
}
