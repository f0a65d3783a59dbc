//! Uniform grids in moment coordinates on P1 x P1.
//!
//! On each factor the moment coordinate is `x = |z|^2 / (1 + |z|^2)`. The
//! Fubini-Study measure (total mass 2π) is `2π dx`, so uniform partitions of
//! `[0, 1]` carry exact quadrature weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest interval count accepted per axis.
pub const MIN_INTERVALS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Fiber,
    Base,
}

/// Tensor grid over `[0,1]^2`. Sizes are interval counts; each axis has
/// `n + 1` nodes including both poles.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_fiber: usize,
    n_base: usize,
    x_fiber: Vec<f64>,
    x_base: Vec<f64>,
}

fn nodes(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

impl Grid {
    pub fn new(n_fiber: usize, n_base: usize) -> Result<Self> {
        for (name, n) in [("n_fiber", n_fiber), ("n_base", n_base)] {
            if n < MIN_INTERVALS || n % 2 != 0 {
                return Err(Error::InvalidInput(format!(
                    "{name} = {n}: need an even interval count >= {MIN_INTERVALS}"
                )));
            }
        }
        Ok(Grid {
            n_fiber,
            n_base,
            x_fiber: nodes(n_fiber),
            x_base: nodes(n_base),
        })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n_fiber(&self) -> usize {
        self.n_fiber
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn intervals(&self, axis: Axis) -> usize {
        match axis {
            Axis::Fiber => self.n_fiber,
            Axis::Base => self.n_base,
        }
    }

    pub fn len(&self, axis: Axis) -> usize {
        self.intervals(axis) + 1
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        1.0 / self.intervals(axis) as f64
    }

    pub fn nodes(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::Fiber => &self.x_fiber,
            Axis::Base => &self.x_base,
        }
    }

    /// Total node count of the 2D grid.
    pub fn size(&self) -> usize {
        (self.n_fiber + 1) * (self.n_base + 1)
    }

    /// Flat index of node `(i_fiber, j_base)`; fibers are contiguous.
    #[inline]
    pub fn index(&self, i_fiber: usize, j_base: usize) -> usize {
        j_base * (self.n_fiber + 1) + i_fiber
    }

    /// Same grid with both interval counts doubled.
    pub fn refined(&self) -> Self {
        Grid::new(2 * self.n_fiber, 2 * self.n_base).expect("doubling keeps a valid grid")
    }
}

/// `x (1 - x)`, the FS coefficient in the log frame `i dw ∧ dw̄`.
#[inline]
pub fn fs_weight(x: f64) -> f64 {
    x * (1.0 - x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_include_poles_and_increase() {
        let g = Grid::new(16, 32).unwrap();
        for axis in [Axis::Fiber, Axis::Base] {
            let x = g.nodes(axis);
            assert_eq!(x[0], 0.0);
            assert_eq!(*x.last().unwrap(), 1.0);
            assert!(x.windows(2).all(|w| w[1] > w[0]));
        }
        assert_eq!(g.size(), 17 * 33);
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(Grid::new(8, 16).is_err());
        assert!(Grid::new(18, 17).is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = Grid::square(32).unwrap();
        let r = g.refined();
        assert_eq!(r.spacing(Axis::Fiber) * 2.0, g.spacing(Axis::Fiber));
    }
}
