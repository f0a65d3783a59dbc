//! Grid-refinement verdicts.

use serde::Serialize;

/// Minimum observed order required while a residual is above the floor.
pub const MIN_ORDER: f64 = 1.8;

/// Residuals at or below this level count as converged discretely; their
/// refinement ratios measure roundoff rather than truncation error.
pub const ROUNDOFF_FLOOR: f64 = 1e-9;

/// `log2(r(h) / r(h/2))`.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub residuals: Vec<f64>,
    pub orders: Vec<f64>,
    pub pass: bool,
}

/// Residuals on successively halved grids. Passes when the finest residual
/// is within `tol` and either sits below [`ROUNDOFF_FLOOR`] or every
/// observed order reaches [`MIN_ORDER`].
pub fn refinement(residuals: &[f64], tol: f64) -> Refinement {
    let orders: Vec<f64> = residuals.windows(2).map(|w| order(w[0], w[1])).collect();
    let pass = match residuals.last() {
        None => false,
        Some(&r) => {
            r <= tol
                && (r <= ROUNDOFF_FLOOR || (!orders.is_empty() && orders.iter().all(|&p| p >= MIN_ORDER)))
        }
    };
    Refinement {
        residuals: residuals.to_vec(),
        orders,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_sequence_passes() {
        let r = refinement(&[4e-4, 1e-4, 2.5e-5], 1e-3);
        assert!(r.pass);
        assert!(r.orders.iter().all(|&p| (p - 2.0).abs() < 1e-12));
    }

    #[test]
    fn first_order_sequence_fails() {
        assert!(!refinement(&[4e-4, 2e-4, 1e-4], 1e-3).pass);
    }

    #[test]
    fn roundoff_level_passes_without_order() {
        assert!(refinement(&[1e-13, 4e-13, 1.6e-12], 1e-3).pass);
    }

    #[test]
    fn tolerance_is_enforced() {
        assert!(!refinement(&[4e-2, 1e-2, 2.5e-3], 1e-3).pass);
        assert!(!refinement(&[], 1.0).pass);
    }
}
