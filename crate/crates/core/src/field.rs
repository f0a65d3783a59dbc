//! Grid-sampled fields: scalar profiles, 2D scalars, invariant (1,1)-forms
//! and volume densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fs_weight, Axis, Grid};

/// Scalar profile on one axis (fiber or base).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn new(axis: Axis, values: Vec<f64>) -> Self {
        RadialField { axis, values }
    }

    pub fn from_fn(grid: &Grid, axis: Axis, f: impl Fn(f64) -> f64) -> Self {
        RadialField {
            axis,
            values: grid.nodes(axis).iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn constant(grid: &Grid, axis: Axis, c: f64) -> Self {
        RadialField {
            axis,
            values: vec![c; grid.len(axis)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RadialField {
            axis: self.axis,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.axis, other.axis);
        debug_assert_eq!(self.len(), other.len());
        RadialField {
            axis: self.axis,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        check_finite(&self.values, what)
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scalar field over the 2D grid, fiber-contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    n_fiber_nodes: usize,
    n_base_nodes: usize,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field2D {
            n_fiber_nodes: grid.len(Axis::Fiber),
            n_base_nodes: grid.len(Axis::Base),
            values: vec![c; grid.size()],
        }
    }

    /// Samples `f(x_fiber, x_base)` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let xf = grid.nodes(Axis::Fiber);
        let mut values = Vec::with_capacity(grid.size());
        for &xb in grid.nodes(Axis::Base) {
            values.extend(xf.iter().map(|&x| f(x, xb)));
        }
        Field2D {
            n_fiber_nodes: xf.len(),
            n_base_nodes: grid.len(Axis::Base),
            values,
        }
    }

    /// Builds a field from per-fiber columns, one per base node.
    pub fn from_fibers(grid: &Grid, fibers: Vec<Vec<f64>>) -> Self {
        assert_eq!(fibers.len(), grid.len(Axis::Base));
        let values: Vec<f64> = fibers.into_iter().flatten().collect();
        assert_eq!(values.len(), grid.size());
        Field2D {
            n_fiber_nodes: grid.len(Axis::Fiber),
            n_base_nodes: grid.len(Axis::Base),
            values,
        }
    }

    /// `f^*g` for a base profile `g`.
    pub fn pullback(grid: &Grid, g: &RadialField) -> Self {
        assert_eq!(g.axis, Axis::Base);
        let nf = grid.len(Axis::Fiber);
        let mut values = Vec::with_capacity(grid.size());
        for &v in &g.values {
            values.extend(std::iter::repeat(v).take(nf));
        }
        Field2D {
            n_fiber_nodes: nf,
            n_base_nodes: g.len(),
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_fiber_nodes(&self) -> usize {
        self.n_fiber_nodes
    }

    pub fn n_base_nodes(&self) -> usize {
        self.n_base_nodes
    }

    #[inline]
    pub fn at(&self, i_fiber: usize, j_base: usize) -> f64 {
        self.values[j_base * self.n_fiber_nodes + i_fiber]
    }

    /// Values along the fiber over base node `j`.
    pub fn fiber(&self, j_base: usize) -> &[f64] {
        let n = self.n_fiber_nodes;
        &self.values[j_base * n..(j_base + 1) * n]
    }

    pub fn fibers(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_fiber_nodes)
    }

    /// Values along the base direction at fiber node `i`.
    pub fn base_line(&self, i_fiber: usize) -> Vec<f64> {
        (0..self.n_base_nodes).map(|j| self.at(i_fiber, j)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Field2D {
            n_fiber_nodes: self.n_fiber_nodes,
            n_base_nodes: self.n_base_nodes,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Field2D {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            n_fiber_nodes: self.n_fiber_nodes,
            n_base_nodes: self.n_base_nodes,
        }
    }

    pub fn add(&self, other: &Field2D) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field2D) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        check_finite(&self.values, what)
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest oscillation `max - min` along any single fiber.
    pub fn fiber_oscillation(&self) -> f64 {
        self.fibers()
            .map(|f| {
                let (lo, hi) = f
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Torus-invariant real (1,1)-form on the total space.
///
/// Coefficients are stored relative to the FS frame: the log-frame
/// coefficients are `m_ff = x_f(1-x_f)·ff`, `m_bb = x_b(1-x_b)·bb` and
/// `m_fb = x_f(1-x_f)x_b(1-x_b)·fb`. For smooth forms these FS-relative
/// coefficients are bounded up to the poles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Form11Field {
    pub ff: Field2D,
    pub bb: Field2D,
    pub fb: Field2D,
}

impl Form11Field {
    pub fn zero(grid: &Grid) -> Self {
        Form11Field {
            ff: Field2D::zeros(grid),
            bb: Field2D::zeros(grid),
            fb: Field2D::zeros(grid),
        }
    }

    /// `cf·ω_FS,f + cb·ω_FS,b`.
    pub fn fs(grid: &Grid, cf: f64, cb: f64) -> Self {
        Form11Field {
            ff: Field2D::constant(grid, cf),
            bb: Field2D::constant(grid, cb),
            fb: Field2D::zeros(grid),
        }
    }

    /// `f^*θ` for a base form with FS-relative coefficient `theta`.
    pub fn pullback(grid: &Grid, theta: &RadialField) -> Self {
        Form11Field {
            ff: Field2D::zeros(grid),
            bb: Field2D::pullback(grid, theta),
            fb: Field2D::zeros(grid),
        }
    }

    pub fn add(&self, o: &Form11Field) -> Self {
        Form11Field {
            ff: self.ff.add(&o.ff),
            bb: self.bb.add(&o.bb),
            fb: self.fb.add(&o.fb),
        }
    }

    pub fn sub(&self, o: &Form11Field) -> Self {
        Form11Field {
            ff: self.ff.sub(&o.ff),
            bb: self.bb.sub(&o.bb),
            fb: self.fb.sub(&o.fb),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Form11Field {
            ff: self.ff.scale(s),
            bb: self.bb.scale(s),
            fb: self.fb.scale(s),
        }
    }

    /// Log-frame coefficient `m_ff`.
    pub fn m_ff(&self, grid: &Grid) -> Field2D {
        Field2D::from_fn(grid, |xf, _| fs_weight(xf)).zip_with(&self.ff, |w, c| w * c)
    }

    pub fn m_bb(&self, grid: &Grid) -> Field2D {
        Field2D::from_fn(grid, |_, xb| fs_weight(xb)).zip_with(&self.bb, |w, c| w * c)
    }

    pub fn m_fb(&self, grid: &Grid) -> Field2D {
        Field2D::from_fn(grid, |xf, xb| fs_weight(xf) * fs_weight(xb))
            .zip_with(&self.fb, |w, c| w * c)
    }

    /// Pointwise norm against the product FS metric, maximized over the
    /// grid: `max(|ff|, |bb|, |fb|·sqrt(x_f(1-x_f)x_b(1-x_b)))`.
    pub fn sup_norm(&self, grid: &Grid) -> f64 {
        let mixed = Field2D::from_fn(grid, |xf, xb| (fs_weight(xf) * fs_weight(xb)).sqrt())
            .zip_with(&self.fb, |w, c| w * c);
        self.ff.sup_norm().max(self.bb.sup_norm()).max(mixed.sup_norm())
    }

    pub fn check_finite(&self) -> Result<()> {
        self.ff.check_finite("form ff")?;
        self.bb.check_finite("form bb")?;
        self.fb.check_finite("form fb")
    }

    /// Smallest eigenvalue of the FS-relative coefficient matrix over the
    /// grid, with its location.
    pub fn min_eigenvalue(&self, grid: &Grid) -> (f64, f64, f64) {
        let xf = grid.nodes(Axis::Fiber);
        let xb = grid.nodes(Axis::Base);
        let mut worst = (f64::INFINITY, 0.0, 0.0);
        for (j, &b) in xb.iter().enumerate() {
            for (i, &f) in xf.iter().enumerate() {
                let a = self.ff.at(i, j);
                let d = self.bb.at(i, j);
                let off = self.fb.at(i, j) * (fs_weight(f) * fs_weight(b)).sqrt();
                let mean = 0.5 * (a + d);
                let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
                let ev = mean - rad;
                if ev < worst.0 {
                    worst = (ev, f, b);
                }
            }
        }
        worst
    }
}

/// Top-degree density relative to `ω_FS,f ∧ ω_FS,b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeDensity {
    pub rho: Field2D,
}

impl VolumeDensity {
    pub fn new(rho: Field2D) -> Self {
        VolumeDensity { rho }
    }

    pub fn check_positive(&self, grid: &Grid, what: &str) -> Result<()> {
        self.rho.check_finite("volume density")?;
        check_positive_field(grid, &self.rho, what)
    }

    pub fn scale(&self, s: f64) -> Self {
        VolumeDensity {
            rho: self.rho.scale(s),
        }
    }
}

/// Invariant potential `fs_fiber·log(1+s_f) + fs_base·log(1+s_b) +
/// log_s_base·log s_b + smooth`.
///
/// The logarithmic terms are carried exactly: they are unbounded at the
/// poles and their `i∂∂̄` is known in closed form (FS forms, and zero for the
/// pluriharmonic `log s_b`, which is only meaningful on the punctured chart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub fs_fiber: f64,
    pub fs_base: f64,
    pub log_s_base: f64,
    pub smooth: Field2D,
}

impl Potential {
    pub fn smooth(field: Field2D) -> Self {
        Potential {
            fs_fiber: 0.0,
            fs_base: 0.0,
            log_s_base: 0.0,
            smooth: field,
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        Potential {
            smooth: self.smooth.map(|v| v + c),
            ..self.clone()
        }
    }

    /// Point value; infinite at the poles where a log term blows up.
    pub fn value(&self, grid: &Grid, i_fiber: usize, j_base: usize) -> f64 {
        let xf = grid.nodes(Axis::Fiber)[i_fiber];
        let xb = grid.nodes(Axis::Base)[j_base];
        let mut v = self.smooth.at(i_fiber, j_base);
        if self.fs_fiber != 0.0 {
            v -= self.fs_fiber * (1.0 - xf).ln();
        }
        if self.fs_base != 0.0 {
            v -= self.fs_base * (1.0 - xb).ln();
        }
        if self.log_s_base != 0.0 {
            v += self.log_s_base * (xb / (1.0 - xb)).ln();
        }
        v
    }
}

/// Base-only analogue of [`Potential`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePotential {
    pub fs_base: f64,
    pub log_s_base: f64,
    pub smooth: RadialField,
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_positive_field(grid: &Grid, f: &Field2D, what: &str) -> Result<()> {
    let nf = grid.len(Axis::Fiber);
    let (idx, worst) = f
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
    if worst > 0.0 {
        return Ok(());
    }
    Err(Error::Positivity {
        what: what.to_string(),
        worst,
        x_f: grid.nodes(Axis::Fiber)[idx % nf],
        x_b: grid.nodes(Axis::Base)[idx / nf],
    })
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
