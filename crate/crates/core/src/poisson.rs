//! Fiberwise Poisson problem `L u = g` on P1 in the mean-zero gauge.

use std::f64::consts::PI;

use crate::calculus::{apply_l, l_row};
use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::linalg::Banded;
use crate::quadrature::{integrate_unit, mean_unit};

/// Default compatibility tolerance relative to `‖g‖_∞`.
pub const COMPATIBILITY_RTOL: f64 = 1e-8;

/// Left null vector of the discrete `L` on `n` intervals, normalized with
/// first entry 1. Discrete right-hand sides are projected onto the range
/// of `L` along this vector.
pub(crate) fn left_null_vector(n: usize) -> Result<Vec<f64>> {
    // Equations: sum_i L[i][j] w_i = 0 for j = 1..=n with w_0 = 1.
    let mut m = Banded::zeros(n);
    let mut rhs = vec![0.0; n];
    for i in 0..=n {
        for (j, c) in l_row(n, i) {
            if j == 0 {
                continue;
            }
            if i == 0 {
                rhs[j - 1] -= c;
            } else {
                m.add(j - 1, i - 1, c);
            }
        }
    }
    let tail = m.solve(&rhs)?;
    Ok(std::iter::once(1.0).chain(tail).collect())
}

/// Solves `L u = g` for a compatible right side, returning the mean-zero
/// solution.
///
/// `g` is the FS-relative coefficient of the prescribed `i∂∂̄u`. The
/// compatibility defect `∫ g dμ_FS` must not exceed `tol` (default
/// `1e-8·‖g‖_∞` when `None`).
pub fn solve_poisson_1d(rhs: &RadialField, tol: Option<f64>) -> Result<RadialField> {
    rhs.check_finite("Poisson right side")?;
    let g = &rhs.values;
    let n = g.len() - 1;
    let defect = 2.0 * PI * integrate_unit(g);
    let tolerance = tol.unwrap_or(COMPATIBILITY_RTOL * rhs.sup_norm().max(1e-300));
    if defect.abs() > tolerance {
        return Err(Error::Solvability { defect, tolerance });
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(RadialField::new(rhs.axis, vec![0.0; n + 1]));
    }

    let w = left_null_vector(n)?;
    let shift = w.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
    let g: Vec<f64> = g.iter().map(|v| v - shift).collect();

    // Pin u_0 = 0 and drop row 0, which is implied by the projection.
    let mut m = Banded::zeros(n);
    for i in 1..=n {
        for (j, c) in l_row(n, i) {
            if j > 0 {
                m.add(i - 1, j - 1, c);
            }
        }
    }
    let tail = m.solve(&g[1..])?;
    let mut u: Vec<f64> = std::iter::once(0.0).chain(tail).collect();
    let mean = mean_unit(&u);
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(RadialField::new(rhs.axis, u))
}

/// Forward residual `‖L u - g‖_∞` of a Poisson solve.
pub fn poisson_residual(u: &RadialField, rhs: &RadialField) -> f64 {
    apply_l(&u.values)
        .iter()
        .zip(&rhs.values)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Grid};

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::square(32).unwrap();
        let u = solve_poisson_1d(&RadialField::constant(&g, Axis::Fiber, 0.0), None).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_quadratic_profile() {
        let g = Grid::square(64).unwrap();
        let rhs = RadialField::from_fn(&g, Axis::Fiber, |x| 1.0 - 6.0 * x + 6.0 * x * x);
        let u = solve_poisson_1d(&rhs, None).unwrap();
        // x(1-x) has mean 1/6
        let exact = RadialField::from_fn(&g, Axis::Fiber, |x| x * (1.0 - x) - 1.0 / 6.0);
        let err = u.zip_with(&exact, |a, b| a - b).sup_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn smooth_rhs_converges_at_second_order() {
        // u = cos(3x) gives L u = -3(1-2x) sin 3x - 9 x(1-x) cos 3x.
        let exact = |x: f64| (3.0 * x).cos();
        let lu = |x: f64| -3.0 * (1.0 - 2.0 * x) * (3.0 * x).sin() - 9.0 * x * (1.0 - x) * (3.0 * x).cos();
        let mut errs = Vec::new();
        for n in [32usize, 64, 128, 256] {
            let g = Grid::square(n).unwrap();
            let rhs = RadialField::from_fn(&g, Axis::Fiber, lu);
            let u = solve_poisson_1d(&rhs, Some(1e-5)).unwrap();
            let ex = RadialField::from_fn(&g, Axis::Fiber, exact);
            let mean = mean_unit(&ex.values);
            let e = u.zip_with(&ex, |a, b| a - (b - mean)).sup_norm();
            errs.push(e);
            assert!(poisson_residual(&u, &rhs) < 50.0 / (n * n) as f64);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn incompatible_rhs_is_rejected_with_defect() {
        let g = Grid::square(32).unwrap();
        let rhs = RadialField::constant(&g, Axis::Fiber, 1.0);
        match solve_poisson_1d(&rhs, None) {
            Err(Error::Solvability { defect, .. }) => {
                assert!((defect - 2.0 * PI).abs() < 1e-12)
            }
            other => panic!("expected solvability error, got {other:?}"),
        }
    }
}
