//! Fiberwise solves: the prescribed-Ricci family `ω_SPR` and the
//! Kähler-Einstein family `ω_SKE`, both as potentials over `ω₀` with a
//! mean-zero gauge on every fiber.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{apply_l, ddbar_invariant, ddbar_potential, l_row};
use crate::error::Result;
use crate::field::{Field2D, Form11Field, Potential, RadialField, VolumeDensity};
use crate::grid::{Axis, Grid};
use crate::linalg::Dense;
use crate::model::{rat_to_f64, ReferenceGeometry};
use crate::newton::{newton_semilinear, NewtonOptions};
use crate::poisson::solve_poisson_1d;
use crate::quadrature::{integrate_total, integrate_unit, simpson_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    /// Fiberwise `Ric = λ ω_{0,b}`.
    Spr,
    /// Fiberwise `Ric = λ ω_b`.
    Ske,
}

impl FiberKind {
    pub fn name(self) -> &'static str {
        match self {
            FiberKind::Spr => "spr",
            FiberKind::Ske => "ske",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiberFamilySolution {
    pub kind: FiberKind,
    /// Fiber potentials, mean zero on each fiber.
    pub rho: Field2D,
    /// FS-relative vertical coefficient of `ω₀ + i∂∂̄ρ`, kept as solved
    /// rather than re-differentiated from `ρ`.
    pub vertical: Field2D,
    pub residual_sup: f64,
    pub volume_defect: f64,
    /// `‖n0 + L_f ρ - vertical‖_∞`.
    pub potential_defect: f64,
    /// Newton iterations per fiber (empty for the linear SPR solve).
    pub newton_iterations: Vec<usize>,
}

/// Compatibility tolerance for the per-fiber Poisson solves.
const FIBER_COMPAT_TOL: f64 = 1e-8;

fn fiber_potential(target: &[f64], n0: &[f64]) -> Result<Vec<f64>> {
    let rhs = RadialField::new(
        Axis::Fiber,
        target.iter().zip(n0).map(|(g, n)| g - n).collect(),
    );
    Ok(solve_poisson_1d(&rhs, Some(FIBER_COMPAT_TOL))?.values)
}

/// Rescales a fiber density so that `∫ g dx = c`.
fn normalize_volume(g: &mut [f64], c: f64) {
    let s = c / integrate_unit(g);
    g.iter_mut().for_each(|v| *v *= s);
}

/// Forward residual of the fiber equation, relative volume defect and the
/// largest mismatch `|n0 + L_f ρ - g|` between potential and metric.
fn fiber_residuals(rho: &Field2D, vertical: &Field2D, n0: &Field2D, lambda: f64, kind: FiberKind) -> (f64, f64, f64) {
    let mut res: f64 = 0.0;
    let mut vol: f64 = 0.0;
    let mut pot: f64 = 0.0;
    for ((r, n), g) in rho.fibers().zip(n0.fibers()).zip(vertical.fibers()) {
        let c = integrate_unit(n);
        vol = vol.max(((integrate_unit(&g) - c) / c).abs());
        let logg: Vec<f64> = g.iter().map(|v| v.ln()).collect();
        let lg = apply_l(&logg);
        for i in 0..g.len() {
            let ric = 2.0 - lg[i];
            let target = match kind {
                FiberKind::Spr => lambda * n[i],
                FiberKind::Ske => lambda * g[i],
            };
            res = res.max((ric - target).abs());
        }
        let lr = apply_l(r);
        for i in 0..g.len() {
            pot = pot.max((n[i] + lr[i] - g[i]).abs());
        }
    }
    (res, vol, pot)
}

fn check_vertical_positive(grid: &Grid, vertical: &Field2D, what: &str) -> Result<()> {
    crate::field::check_positive_field(grid, vertical, what)
}

/// Solves `Ric(ω_{SPR,b}) = λ ω_{0,b}` on every fiber.
///
/// On a curve fiber, `ω_{SPR,b} = C_b e^{v_b} ω_FS` where `L v_b = 2 - λ n_0`
/// (solvable because `λc = 2`) and `C_b` restores the fiber volume `2πc`.
/// The potential then solves `L ρ = C_b e^{v_b} - n_0`.
pub fn solve_spr(reference: &ReferenceGeometry) -> Result<FiberFamilySolution> {
    let grid = &reference.grid;
    let lambda = reference.lambda();
    let c = rat_to_f64(reference.spec.c);
    let n0 = reference.omega0_vertical();
    let fibers: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len(Axis::Base))
        .into_par_iter()
        .map(|j| -> Result<(Vec<f64>, Vec<f64>)> {
            let n = n0.fiber(j);
            let rhs = RadialField::new(Axis::Fiber, n.iter().map(|v| 2.0 - lambda * v).collect());
            let v = solve_poisson_1d(&rhs, Some(FIBER_COMPAT_TOL)).map_err(|e| e.in_fiber(j))?;
            let mut g: Vec<f64> = v.values.iter().map(|x| x.exp()).collect();
            normalize_volume(&mut g, c);
            let rho = fiber_potential(&g, n).map_err(|e| e.in_fiber(j))?;
            Ok((rho, g))
        })
        .collect::<Result<_>>()?;
    let (rho, vertical): (Vec<_>, Vec<_>) = fibers.into_iter().unzip();
    finish(
        grid,
        FiberKind::Spr,
        Field2D::from_fibers(grid, rho),
        Field2D::from_fibers(grid, vertical),
        n0,
        lambda,
        Vec::new(),
    )
}

fn finish(
    grid: &Grid,
    kind: FiberKind,
    rho: Field2D,
    vertical: Field2D,
    n0: &Field2D,
    lambda: f64,
    newton_iterations: Vec<usize>,
) -> Result<FiberFamilySolution> {
    check_vertical_positive(grid, &vertical, "vertical metric")?;
    let (residual_sup, volume_defect, potential_defect) = fiber_residuals(&rho, &vertical, n0, lambda, kind);
    Ok(FiberFamilySolution {
        kind,
        rho,
        vertical,
        residual_sup,
        volume_defect,
        potential_defect,
        newton_iterations,
    })
}

/// Newton solve of the fiber Liouville equation `L u + λe^u - 2 = 0` for
/// `u = log(g)`, bordered by the balancing condition `∫(1-2x)e^u dx = 0`
/// that removes the dilation kernel of the linearization.
fn solve_liouville_fiber(init: &[f64], lambda: f64, opts: NewtonOptions) -> Result<(Vec<f64>, usize)> {
    let n = init.len() - 1;
    let w = simpson_weights(n);
    let k: Vec<f64> = (0..=n).map(|i| 1.0 - 2.0 * i as f64 / n as f64).collect();
    let residual = |y: &[f64]| -> Vec<f64> {
        let (u, mu) = y.split_at(n + 1);
        let lu = apply_l(u);
        let mut f: Vec<f64> = (0..=n)
            .map(|i| lu[i] + lambda * u[i].exp() - 2.0 + mu[0] * k[i])
            .collect();
        f.push((0..=n).map(|i| w[i] * k[i] * u[i].exp()).sum());
        f
    };
    let jacobian = |y: &[f64]| -> Dense {
        let mut m = DMatrix::zeros(n + 2, n + 2);
        for i in 0..=n {
            for (j, c) in l_row(n, i) {
                m[(i, j)] += c;
            }
            m[(i, i)] += lambda * y[i].exp();
            m[(i, n + 1)] = k[i];
            m[(n + 1, i)] = w[i] * k[i] * y[i].exp();
        }
        Dense(m)
    };
    let mut y = init.to_vec();
    y.push(0.0);
    let out = newton_semilinear(residual, jacobian, y, opts)?;
    let mut u = out.solution;
    u.truncate(n + 1);
    Ok((u, out.iterations))
}

/// Solves `Ric ω_{SKE,b} = λ ω_{SKE,b}` in `[ω_{0,b}]` on every fiber,
/// warm-starting each fiber from its predecessor along the base.
pub fn solve_ske(reference: &ReferenceGeometry) -> Result<FiberFamilySolution> {
    solve_ske_with(reference, true)
}

/// Variant starting every fiber from `ρ = 0`; fibers are solved in
/// parallel. Used to cross-check the warm-started family.
pub fn solve_ske_independent(reference: &ReferenceGeometry) -> Result<FiberFamilySolution> {
    solve_ske_with(reference, false)
}

fn solve_ske_with(reference: &ReferenceGeometry, warm_start: bool) -> Result<FiberFamilySolution> {
    let grid = &reference.grid;
    let lambda = reference.lambda();
    let c = rat_to_f64(reference.spec.c);
    let n0 = reference.omega0_vertical();
    let opts = NewtonOptions::default();
    let solve_one = |j: usize, init: &[f64]| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> {
        let (u, it) = solve_liouville_fiber(init, lambda, opts).map_err(|e| e.in_fiber(j))?;
        let mut g: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        normalize_volume(&mut g, c);
        let rho = fiber_potential(&g, n0.fiber(j)).map_err(|e| e.in_fiber(j))?;
        Ok((rho, u, g, it))
    };
    let results: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, usize)> = if warm_start {
        let mut out = Vec::with_capacity(grid.len(Axis::Base));
        let mut init: Vec<f64> = n0.fiber(0).iter().map(|v| v.ln()).collect();
        for j in 0..grid.len(Axis::Base) {
            let r = solve_one(j, &init)?;
            init = r.1.clone();
            out.push(r);
        }
        out
    } else {
        (0..grid.len(Axis::Base))
            .into_par_iter()
            .map(|j| {
                let init: Vec<f64> = n0.fiber(j).iter().map(|v| v.ln()).collect();
                solve_one(j, &init)
            })
            .collect::<Result<_>>()?
    };
    let mut fibers = Vec::with_capacity(results.len());
    let mut verticals = Vec::with_capacity(results.len());
    let mut iterations = Vec::with_capacity(results.len());
    for (rho, _, g, it) in results {
        fibers.push(rho);
        verticals.push(g);
        iterations.push(it);
    }
    finish(
        grid,
        FiberKind::Ske,
        Field2D::from_fibers(grid, fibers),
        Field2D::from_fibers(grid, verticals),
        n0,
        lambda,
        iterations,
    )
}

/// Residual audit of a fiber family.
#[derive(Debug, Clone, Serialize)]
pub struct FiberReport {
    pub kind: FiberKind,
    pub residual_sup: f64,
    pub volume_defect: f64,
    pub potential_defect: f64,
    pub positivity_margin: f64,
    /// `‖Ric(h_SKE)|_fiber - ω_{SKE,b}‖_∞` (SKE only).
    pub hske_residual: Option<f64>,
    /// `‖e^{-λρ_SKE}‖_{L^2(Ω)}` (SKE only, diagnostic).
    pub e_neg_lambda_rho_l2: Option<f64>,
}

/// Weight of `h_SKE = e^{-ρ_SKE} h_L`: `φ_L + ρ_SKE`.
pub fn hske_weight(reference: &ReferenceGeometry, sol: &FiberFamilySolution) -> Potential {
    Potential {
        smooth: reference.phi_l.smooth.add(&sol.rho),
        ..reference.phi_l.clone()
    }
}

pub fn verify_fiber_family(sol: &FiberFamilySolution, reference: &ReferenceGeometry) -> Result<FiberReport> {
    let grid = &reference.grid;
    let (residual_sup, volume_defect, potential_defect) = fiber_residuals(
        &sol.rho,
        &sol.vertical,
        reference.omega0_vertical(),
        reference.lambda(),
        sol.kind,
    );
    let (hske_residual, l2) = match sol.kind {
        FiberKind::Spr => (None, None),
        FiberKind::Ske => {
            let curv = ddbar_potential(grid, &hske_weight(reference, sol))?;
            let r = curv.ff.sub(&sol.vertical).sup_norm();
            let lam = reference.lambda();
            let weighted = VolumeDensity::new(
                sol.rho
                    .zip_with(&reference.omega.rho, |r, o| (-2.0 * lam * r).exp() * o),
            );
            (Some(r), Some(integrate_total(grid, &weighted).sqrt()))
        }
    };
    Ok(FiberReport {
        kind: sol.kind,
        residual_sup,
        volume_defect,
        potential_defect,
        positivity_margin: sol.vertical.min(),
        hske_residual,
        e_neg_lambda_rho_l2: l2,
    })
}

impl FiberFamilySolution {
    /// `ω₀ + i∂∂̄ρ` on `X`, with the solved vertical coefficient.
    pub fn full_form(&self, reference: &ReferenceGeometry) -> Result<Form11Field> {
        let mut form = reference.omega0.add(&ddbar_invariant(&reference.grid, &self.rho)?);
        form.ff = self.vertical.clone();
        Ok(form)
    }

    /// Same family with a per-fiber constant added to the potential.
    pub fn with_gauge_shift(&self, grid: &Grid, shift: &RadialField) -> Self {
        FiberFamilySolution {
            rho: self.rho.add(&Field2D::pullback(grid, shift)),
            ..self.clone()
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_reference, derive_constants, ModelSpec, WarpShape};

    fn reference(spec: ModelSpec) -> ReferenceGeometry {
        let k = derive_constants(&spec).unwrap();
        build_reference(&spec, &k).unwrap()
    }

    #[test]
    fn model_a_spr_is_trivial() {
        let re = reference(ModelSpec::model_a(32));
        let s = solve_spr(&re).unwrap();
        assert!(s.rho.values().iter().all(|&v| v == 0.0));
        assert!(s.residual_sup < 1e-12);
        let rep = verify_fiber_family(&s, &re).unwrap();
        assert!(rep.residual_sup < 1e-12 && rep.volume_defect < 1e-12);
    }

    #[test]
    fn model_a_ske_is_trivial() {
        let re = reference(ModelSpec::model_a(32));
        let s = solve_ske(&re).unwrap();
        assert!(s.rho.sup_norm() < 1e-13);
        assert!(s.newton_iterations.iter().all(|&k| k == 0));
    }

    #[test]
    fn model_b_spr_residual_and_volume() {
        let mut res = Vec::new();
        for n in [32, 64, 128] {
            let re = reference(ModelSpec::model_b(n));
            let s = solve_spr(&re).unwrap();
            assert!(s.volume_defect < 1e-6, "{}", s.volume_defect);
            assert!(s.rho.sup_norm() > 1e-3);
            res.push(s.residual_sup);
        }
        // the discrete equation is solved up to the quadrature compatibility defect
        assert!(res.iter().all(|&r| r < 1e-7), "{res:?}");
    }

    #[test]
    fn model_b_ske_is_kahler_einstein() {
        for shape in [WarpShape::Bump, WarpShape::Tilted] {
            let mut spec = ModelSpec::model_b(64);
            spec.warp_shape = shape;
            let re = reference(spec);
            let s = solve_ske(&re).unwrap();
            let rep = verify_fiber_family(&s, &re).unwrap();
            assert!(rep.residual_sup < 1e-3, "{rep:?}");
            assert!(rep.volume_defect < 1e-10);
            assert!(rep.hske_residual.unwrap() < 1e-3);
            assert!(rep.e_neg_lambda_rho_l2.unwrap().is_finite());
        }
    }

    #[test]
    fn warm_started_and_independent_ske_agree() {
        let mut spec = ModelSpec::model_b(32);
        spec.warp_shape = WarpShape::Tilted;
        let re = reference(spec);
        let a = solve_ske(&re).unwrap();
        let b = solve_ske_independent(&re).unwrap();
        assert!(a.vertical.sub(&b.vertical).sup_norm() < 1e-9);
    }

    #[test]
    fn gauge_shift_leaves_vertical_metric() {
        let re = reference(ModelSpec::model_b(32));
        let s = solve_spr(&re).unwrap();
        let shift = RadialField::from_fn(&re.grid, Axis::Base, |x| 3.0 * x - 1.0);
        let t = s.with_gauge_shift(&re.grid, &shift);
        let vertical = |rho: &Field2D| {
            let v: Vec<Vec<f64>> = rho
                .fibers()
                .zip(re.omega0.ff.fibers())
                .map(|(r, n)| apply_l(r).iter().zip(n).map(|(l, n)| l + n).collect())
                .collect();
            Field2D::from_fibers(&re.grid, v)
        };
        assert!(vertical(&t.rho).sub(&vertical(&s.rho)).sup_norm() < 1e-12);
        assert_eq!(t.vertical, s.vertical);
    }
}
