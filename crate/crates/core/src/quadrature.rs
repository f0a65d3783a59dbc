//! Composite Simpson quadrature in moment coordinates with fixed-order
//! compensated summation.

use std::f64::consts::PI;

use crate::field::{RadialField, VolumeDensity};
use crate::grid::{Axis, Grid};

/// Composite Simpson weights on `n` (even) intervals of `[0,1]`.
pub fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Neumaier-compensated sum, always in slice order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `∫_0^1 u dx` by Simpson.
pub fn integrate_unit(u: &[f64]) -> f64 {
    let w = simpson_weights(u.len() - 1);
    compensated_sum(u.iter().zip(&w).map(|(a, b)| a * b))
}

/// Fiber integral of a density: `2π ∫_0^1 rho(x_f, b) dx_f` at every base node.
pub fn fiber_integral(v: &VolumeDensity) -> RadialField {
    RadialField::new(
        Axis::Base,
        v.rho.fibers().map(|f| 2.0 * PI * integrate_unit(f)).collect(),
    )
}

/// `∫_B g·θ` for a base form `θ` given by its FS-relative coefficient.
pub fn integrate_base(g: &RadialField, weight: &RadialField) -> f64 {
    let prod: Vec<f64> = g.values.iter().zip(&weight.values).map(|(a, b)| a * b).collect();
    2.0 * PI * integrate_unit(&prod)
}

/// `∫_X V = (2π)^2 ∫∫ rho dx_f dx_b`.
pub fn integrate_total(grid: &Grid, v: &VolumeDensity) -> f64 {
    let per_fiber: Vec<f64> = v.rho.fibers().map(integrate_unit).collect();
    debug_assert_eq!(per_fiber.len(), grid.len(Axis::Base));
    4.0 * PI * PI * integrate_unit(&per_fiber)
}

/// Quadrature mean of `u` over `[0,1]`.
pub fn mean_unit(u: &[f64]) -> f64 {
    integrate_unit(u)
}
