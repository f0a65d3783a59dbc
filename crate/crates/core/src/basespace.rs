//! Base-space objects: push-forward, `G'`, the base Monge-Ampère solves for
//! `ω_B` and `ω'_B`, and residual checks of the base and volume-form
//! identities.

use std::cell::Cell;

use serde::Serialize;

use crate::calculus::{apply_l, l_matrix, ric_base, ric_volume, wedge_with_pullback};
use crate::error::{Error, Result};
use crate::fiberwise::{FiberFamilySolution, FiberKind};
use crate::field::{Field2D, Form11Field, RadialField, VolumeDensity};
use crate::grid::{Axis, Grid};
use crate::model::{DerivedConstants, ReferenceGeometry};
use crate::newton::{newton_semilinear, NewtonOptions, NewtonOutcome};
use crate::poisson::left_null_vector;
use crate::quadrature::{compensated_sum, fiber_integral, integrate_base, integrate_total, simpson_weights};
use crate::wpform::WpResult;

/// `f_*V = ∫_{X_b} V`, FS-relative on the base.
pub fn pushforward(v: &VolumeDensity) -> RadialField {
    fiber_integral(v)
}

/// Largest relative defect of `∫_B ψ f_*V = ∫_X f^*ψ V` over a fixed battery
/// of polynomial test functions.
pub fn adjoint_defect(grid: &Grid, v: &VolumeDensity) -> f64 {
    let battery: [fn(f64) -> f64; 4] = [
        |_| 1.0,
        |x| x,
        |x| x * x,
        |x| x * x * x * (1.0 - x) + 0.3,
    ];
    let push = pushforward(v);
    battery
        .iter()
        .map(|psi| {
            let w = RadialField::from_fn(grid, Axis::Base, psi);
            let lhs = integrate_base(&push, &w);
            let pulled = Field2D::pullback(grid, &w).zip_with(&v.rho, |a, b| a * b);
            let rhs = integrate_total(grid, &VolumeDensity::new(pulled));
            (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct GprimeReport {
    pub kind: FiberKind,
    pub gprime: RadialField,
    pub delta_lower: f64,
    /// `(p, ‖G'‖_{L^p(B,η)})` for `p = 1, 1 + ε, 2`.
    pub lp_norms: Vec<(f64, f64)>,
    /// `|∫G'η - ∫η| / ∫η`.
    pub normalization_defect: f64,
}

/// Volume form entering `G'`: `Ω` (SPR) or `Ω' = e^{-λρ_SKE}Ω` (SKE).
pub fn source_volume(reference: &ReferenceGeometry, fiber_sol: &FiberFamilySolution) -> VolumeDensity {
    match fiber_sol.kind {
        FiberKind::Spr => reference.omega.clone(),
        FiberKind::Ske => {
            let lam = reference.lambda();
            VolumeDensity::new(
                fiber_sol
                    .rho
                    .zip_with(&reference.omega.rho, |r, o| (-lam * r).exp() * o),
            )
        }
    }
}

/// `G' = f_*Ω / (V η)`.
pub fn compute_gprime(
    reference: &ReferenceGeometry,
    fiber_sol: &FiberFamilySolution,
    epsilon: f64,
) -> Result<GprimeReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("L^p exponent offset must be positive".into()));
    }
    let push = pushforward(&source_volume(reference, fiber_sol));
    let eta = &reference.eta;
    let gprime = push.zip_with(eta, |p, e| p / (reference.volume_v * e));
    gprime.check_finite("G'")?;
    let delta_lower = gprime.min();
    if !(delta_lower > 0.0) {
        let k = gprime.values.iter().position(|&v| v == delta_lower).unwrap_or(0);
        return Err(Error::Positivity {
            what: "G'".into(),
            worst: delta_lower,
            x_f: f64::NAN,
            x_b: k as f64 / (gprime.len() - 1) as f64,
        });
    }
    let lp_norms = [1.0, 1.0 + epsilon, 2.0]
        .iter()
        .map(|&p| (p, integrate_base(&gprime.map(|g| g.powf(p)), eta).powf(1.0 / p)))
        .collect();
    let mass = integrate_base(&eta.map(|_| 1.0), eta);
    let normalization_defect = (integrate_base(&gprime, eta) - mass).abs() / mass;
    Ok(GprimeReport {
        kind: fiber_sol.kind,
        gprime,
        delta_lower,
        lp_norms,
        normalization_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentReport {
    pub kind: FiberKind,
    /// Largest oscillation of `G` along a fiber.
    pub vertical_constancy_defect: f64,
    /// `‖G - f^*G'‖_∞`.
    pub pullback_defect: f64,
}

/// `G = Ω / (2 ω_b ∧ f^*η)` on `X`.
pub fn g_on_total_space(reference: &ReferenceGeometry, fiber_sol: &FiberFamilySolution) -> Field2D {
    let denom = wedge_with_pullback(&reference.grid, &fiber_sol.vertical, &reference.eta);
    source_volume(reference, fiber_sol)
        .rho
        .zip_with(&denom.rho, |o, d| o / d)
}

pub fn check_g_descends(
    reference: &ReferenceGeometry,
    fiber_sol: &FiberFamilySolution,
    gprime: &GprimeReport,
) -> Result<DescentReport> {
    if gprime.kind != fiber_sol.kind {
        return Err(Error::InvalidInput("G' and fiber family come from different pipelines".into()));
    }
    let g = g_on_total_space(reference, fiber_sol);
    let pulled = Field2D::pullback(&reference.grid, &gprime.gprime);
    Ok(DescentReport {
        kind: fiber_sol.kind,
        vertical_constancy_defect: g.fiber_oscillation(),
        pullback_defect: g.sub(&pulled).sup_norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseVariant {
    /// `(η + i∂∂̄ρ)^m = G'e^ρ η^m`.
    B,
    /// Same equation with `η` replaced by `η / (1 - e^{-T})`.
    Bprime,
}

impl BaseVariant {
    pub fn name(self) -> &'static str {
        match self {
            BaseVariant::B => "B",
            BaseVariant::Bprime => "Bprime",
        }
    }

    /// FS-relative coefficient of the reference form.
    pub fn reference_coefficient(self, consts: &DerivedConstants) -> f64 {
        match self {
            BaseVariant::B => consts.kappa_f64(),
            BaseVariant::Bprime => consts.kappa_f64() * (consts.lambda_f64() + 1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseMetricSolution {
    pub variant: BaseVariant,
    pub kind: FiberKind,
    pub rho: RadialField,
    /// FS-relative coefficient of `ω_B` or `ω'_B`.
    pub omega: RadialField,
    pub newton: NewtonOutcome,
    pub positivity_margin: f64,
    pub forward_residual: f64,
    /// `|∫G'e^ρ ω̂ - ∫ω̂| / ∫ω̂` in the conservative quadrature of the
    /// discrete operator.
    pub integrated_defect: f64,
    /// Smallest zeroth-order Jacobian coefficient over all Newton iterates.
    pub min_zeroth_order: f64,
}

fn cma_residual(rho: &[f64], g: &[f64], k: f64) -> Vec<f64> {
    let l = apply_l(rho);
    (0..rho.len()).map(|i| k + l[i] - g[i] * rho[i].exp() * k).collect()
}

/// Solves `κ̂ + L ρ = G' e^ρ κ̂` by damped Newton from `init` (zero if
/// `None`).
pub fn solve_base_ma(
    gprime: &GprimeReport,
    variant: BaseVariant,
    consts: &DerivedConstants,
    opts: NewtonOptions,
    init: Option<f64>,
) -> Result<BaseMetricSolution> {
    let g = &gprime.gprime.values;
    if g.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("G' must be positive".into()));
    }
    let n = g.len() - 1;
    let k = variant.reference_coefficient(consts);
    let min_zeroth = Cell::new(f64::INFINITY);
    let outcome = newton_semilinear(
        |r| cma_residual(r, g, k),
        |r| {
            let mut m = l_matrix(n);
            for i in 0..=n {
                let z = g[i] * r[i].exp() * k;
                min_zeroth.set(min_zeroth.get().min(z));
                m.add(i, i, -z);
            }
            m
        },
        vec![init.unwrap_or(0.0); n + 1],
        opts,
    )?;
    let rho = RadialField::new(Axis::Base, outcome.solution.clone());
    let omega = RadialField::new(Axis::Base, apply_l(&rho.values).iter().map(|l| k + l).collect());
    let positivity_margin = omega.min();
    if !(positivity_margin > 0.0) {
        let j = omega.values.iter().position(|&v| v == positivity_margin).unwrap_or(0);
        return Err(Error::Positivity {
            what: format!("omega_{}", variant.name()),
            worst: positivity_margin,
            x_f: f64::NAN,
            x_b: j as f64 / n as f64,
        });
    }
    let w = left_null_vector(n)?;
    let lhs = compensated_sum((0..=n).map(|i| w[i] * g[i] * rho.values[i].exp() * k));
    let rhs = compensated_sum(w.iter().map(|wi| wi * k));
    let min_zeroth_order = if outcome.iterations == 0 {
        (0..=n).map(|i| g[i] * rho.values[i].exp() * k).fold(f64::INFINITY, f64::min)
    } else {
        min_zeroth.get()
    };
    Ok(BaseMetricSolution {
        variant,
        kind: gprime.kind,
        forward_residual: cma_residual(&rho.values, g, k)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs())),
        integrated_defect: ((lhs - rhs) / rhs).abs(),
        rho,
        omega,
        positivity_margin,
        min_zeroth_order,
        newton: outcome,
    })
}

/// Largest gap between solutions started from `ρ = 0, +0.5, -0.5`.
pub fn uniqueness_probe(
    gprime: &GprimeReport,
    variant: BaseVariant,
    consts: &DerivedConstants,
    opts: NewtonOptions,
) -> Result<f64> {
    let base = solve_base_ma(gprime, variant, consts, opts, Some(0.0))?;
    let mut gap: f64 = 0.0;
    for s in [0.5, -0.5] {
        let other = solve_base_ma(gprime, variant, consts, opts, Some(s))?;
        gap = gap.max(other.rho.zip_with(&base.rho, |a, b| a - b).sup_norm());
    }
    Ok(gap)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualNorm {
    pub absolute: f64,
    /// Absolute residual over the sup of the reference form.
    pub relative: f64,
}

/// Pointwise `Ric ω_B + ω_B + λη - ω_{WP,λ}` (B) or
/// `Ric ω'_B + ω'_B - ω_{WP,λ}` (Bprime).
pub fn twisted_ke_field(sol: &BaseMetricSolution, wp: &WpResult, consts: &DerivedConstants) -> Result<RadialField> {
    let twist = match sol.variant {
        BaseVariant::B => consts.lambda_f64() * consts.kappa_f64(),
        BaseVariant::Bprime => 0.0,
    };
    Ok(ric_base(&sol.omega)?
        .zip_with(&sol.omega, |a, b| a + b + twist)
        .zip_with(&wp.wp_base, |a, b| a - b))
}

pub fn twisted_ke_residual(sol: &BaseMetricSolution, wp: &WpResult, consts: &DerivedConstants) -> Result<ResidualNorm> {
    let r = twisted_ke_field(sol, wp, consts)?;
    Ok(norm(r.sup_norm(), sol.omega.sup_norm()))
}

fn norm(absolute: f64, scale: f64) -> ResidualNorm {
    ResidualNorm {
        absolute,
        relative: absolute / scale,
    }
}

/// Pointwise `-Ric(f_*Ω) + ω_{WP,λ} - (λ+1)η`.
pub fn wpl_fs_field(reference: &ReferenceGeometry, push: &RadialField, wp: &WpResult) -> Result<RadialField> {
    let target = reference.consts.lambda_f64() + 1.0;
    Ok(ric_base(push)?
        .zip_with(&wp.wp_base, |ric, w| w - ric)
        .zip_with(&reference.eta, |v, e| v - target * e))
}

pub fn wpl_fs_residual(reference: &ReferenceGeometry, push: &RadialField, wp: &WpResult) -> Result<ResidualNorm> {
    let scale = (reference.consts.lambda_f64() + 1.0) * reference.eta.sup_norm();
    Ok(norm(wpl_fs_field(reference, push, wp)?.sup_norm(), scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VolumeIdentity {
    /// `f^*ω_B = e^{-T}ω_SPR - (1-e^{-T}) Ric(e^{λ(f^*ρ_B - ρ_SPR)} Ω_{ω_SPR,ω_B})`.
    One,
    /// `(1-e^{-T}) f^*ω'_B = e^{-T}ω_SPR - (1-e^{-T}) Ric(e^{-λρ_SPR} Ω_{ω_SPR,ω'_B})`.
    Two,
    /// `f^*ω_B = e^{-T}ω_SKE - (1-e^{-T}) Ric(e^{λ f^*ρ_B} Ω_{ω_SKE,ω_B})`.
    Three,
    /// `(1-e^{-T}) f^*ω'_B = e^{-T}ω_SKE - (1-e^{-T}) Ric Ω_{ω_SKE,ω'_B}`.
    Four,
}

impl VolumeIdentity {
    pub const ALL: [VolumeIdentity; 4] = [Self::One, Self::Two, Self::Three, Self::Four];

    pub fn index(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
            Self::Four => 4,
        }
    }

    pub fn fiber_kind(self) -> FiberKind {
        match self {
            Self::One | Self::Two => FiberKind::Spr,
            Self::Three | Self::Four => FiberKind::Ske,
        }
    }

    pub fn base_variant(self) -> BaseVariant {
        match self {
            Self::One | Self::Three => BaseVariant::B,
            Self::Two | Self::Four => BaseVariant::Bprime,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeIdentityReport {
    pub which: u8,
    /// FS-pointwise sup of the residual form on `X`.
    pub residual: f64,
    /// `‖ρ_fib - f^*ρ_B - mean‖_∞`.
    pub gap_difference: f64,
    /// `‖ρ_fib - mean‖_∞`.
    pub gap_fiber: f64,
    /// `‖f^*ρ_B - mean‖_∞`.
    pub gap_base: f64,
}

fn oscillation_about_mean(grid: &Grid, f: &Field2D) -> f64 {
    let wf = simpson_weights(grid.n_fiber());
    let wb = simpson_weights(grid.n_base());
    let mean = compensated_sum(
        (0..wb.len()).flat_map(|j| (0..wf.len()).map(move |i| (i, j))).map(|(i, j)| wf[i] * wb[j] * f.at(i, j)),
    );
    f.map(|v| v - mean).sup_norm()
}

pub fn volume_identity_residual(
    which: VolumeIdentity,
    reference: &ReferenceGeometry,
    fiber_sol: &FiberFamilySolution,
    base: &BaseMetricSolution,
) -> Result<VolumeIdentityReport> {
    if fiber_sol.kind != which.fiber_kind() || base.kind != which.fiber_kind() || base.variant != which.base_variant()
    {
        return Err(Error::InvalidInput(format!(
            "volume identity {} needs the {} family with the {} base metric",
            which.index(),
            which.fiber_kind().name(),
            which.base_variant().name()
        )));
    }
    let grid = &reference.grid;
    let lam = reference.lambda();
    let et = reference.e_neg_t();
    let omega_fib = fiber_sol.full_form(reference)?;
    let rho_b = Field2D::pullback(grid, &base.rho);
    let exponent = match which {
        VolumeIdentity::One => rho_b.sub(&fiber_sol.rho).scale(lam),
        VolumeIdentity::Two => fiber_sol.rho.scale(-lam),
        VolumeIdentity::Three => rho_b.scale(lam),
        VolumeIdentity::Four => Field2D::zeros(grid),
    };
    let vol = wedge_with_pullback(grid, &fiber_sol.vertical, &base.omega);
    let weighted = VolumeDensity::new(vol.rho.zip_with(&exponent, |v, e| v * e.exp()));
    let lhs_scale = match which.base_variant() {
        BaseVariant::B => 1.0,
        BaseVariant::Bprime => 1.0 - et,
    };
    let lhs = Form11Field::pullback(grid, &base.omega).scale(lhs_scale);
    let rhs = omega_fib
        .scale(et)
        .sub(&ric_volume(grid, &weighted)?.scale(1.0 - et));
    Ok(VolumeIdentityReport {
        which: which.index(),
        residual: lhs.sub(&rhs).sup_norm(grid),
        gap_difference: oscillation_about_mean(grid, &fiber_sol.rho.sub(&rho_b)),
        gap_fiber: oscillation_about_mean(grid, &fiber_sol.rho),
        gap_base: oscillation_about_mean(grid, &rho_b),
    })
}
