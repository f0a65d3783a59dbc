//! The Weil-Petersson-type form `ω_{WP,λ}` of the fibration, computed from
//! fiber volume integrals of section families and, independently, from the
//! Ricci form of `ω^{n-m} ∧ f^*θ`.

use serde::Serialize;

use crate::calculus::{apply_l, ric_base, ric_volume, wedge_with_pullback};
use crate::error::{Error, Result};
use crate::field::{BasePotential, Field2D, Form11Field, RadialField, VolumeDensity};
use crate::fiberwise::{hske_weight, FiberFamilySolution, FiberKind};
use crate::grid::{fs_weight, Axis, Grid};
use crate::model::ReferenceGeometry;
use crate::quadrature::{fiber_integral, integrate_unit};

/// Holomorphic coefficient `F(b, z)` of a section family in the standard
/// chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SectionGauge {
    /// `F ≡ const`, a global trivializing family.
    Constant(f64),
    /// `F = coeff · z_b^power`, non-vanishing on the punctured base chart
    /// only; `log|z_b|^2` is carried exactly.
    Monomial { coeff: f64, power: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightKind {
    /// Contract with `h_L`.
    HL,
    /// Contract with `h_SKE = e^{-ρ_SKE} h_L`.
    HSke,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionFamilySpec {
    pub gauge: SectionGauge,
    pub alpha: i64,
    pub beta: i64,
    pub weight: WeightKind,
}

impl SectionFamilySpec {
    pub fn canonical(reference: &ReferenceGeometry, weight: WeightKind) -> Self {
        SectionFamilySpec {
            gauge: SectionGauge::Constant(1.0),
            alpha: reference.consts.alpha,
            beta: reference.consts.beta,
            weight,
        }
    }
}

/// Fiber volume forms `Ω_{Ψ_b}`: density relative to `ω_FS,f` equals
/// `(1+s_b)^{base_fs} · s_b^{log_s_base} · e^{log_scale} · smooth`.
/// The constant gauge factor is kept apart so it never enters the
/// discrete ∂∂̄.
#[derive(Debug, Clone)]
pub struct SectionVolumeFamily {
    pub base_fs: f64,
    pub log_s_base: f64,
    pub log_scale: f64,
    pub smooth: VolumeDensity,
    pub weight: WeightKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WpRoute {
    Sections,
    Residual,
}

#[derive(Debug, Clone, Serialize)]
pub struct WpResult {
    /// FS-relative coefficient of `ω_{WP,λ}` on the base.
    pub wp_base: RadialField,
    /// Weight of `h_{WP,λ}`: `log ∫_{X_b} Ω_{Ψ_b}` (sections route) or
    /// `log μ` (residual route with a section family).
    pub log_norm: Option<BasePotential>,
    pub route: WpRoute,
    pub verticality_defect: Option<f64>,
}

/// Builds `Ω_{Ψ_b} = |F|^{2/β} |s|^{2α/β}_h` on every fiber.
pub fn volume_family_from_sections(
    reference: &ReferenceGeometry,
    spec: &SectionFamilySpec,
    ske: Option<&FiberFamilySolution>,
) -> Result<SectionVolumeFamily> {
    if spec.beta <= 0 || spec.alpha <= 0 {
        return Err(Error::InvalidInput("alpha, beta must be positive".into()));
    }
    let ratio = spec.alpha as f64 / spec.beta as f64;
    let phi = match spec.weight {
        WeightKind::HL => reference.phi_l.clone(),
        WeightKind::HSke => {
            let sol = ske
                .filter(|s| s.kind == FiberKind::Ske)
                .ok_or_else(|| Error::InvalidInput("h_SKE weight needs a solved SKE family".into()))?;
            hske_weight(reference, sol)
        }
    };
    // |s|^2_h = e^{-φ} in the chart; the FS reference contributes (1+s_f)^2.
    let fiber_exponent = 2.0 - ratio * phi.fs_fiber;
    if fiber_exponent.abs() > 1e-12 {
        return Err(Error::ModelRegularity(format!(
            "fiber volume density behaves like (1+s_f)^{fiber_exponent} at the pole; alpha/beta must equal lambda"
        )));
    }
    let (coeff, log_s) = match spec.gauge {
        SectionGauge::Constant(v) => (v, 0.0),
        SectionGauge::Monomial { coeff, power } => (coeff, power as f64 / spec.beta as f64),
    };
    let log_scale = 2.0 / spec.beta as f64 * coeff.abs().ln();
    if !log_scale.is_finite() {
        return Err(Error::InvalidInput("section family must be non-vanishing".into()));
    }
    Ok(SectionVolumeFamily {
        base_fs: -ratio * phi.fs_base,
        log_s_base: log_s + phi.log_s_base * -ratio,
        log_scale,
        smooth: VolumeDensity::new(phi.smooth.map(|p| (-ratio * p).exp())),
        weight: spec.weight,
    })
}

/// FS-relative coefficient of `-i∂∂̄ w` for a base weight `w`.
pub fn curvature_of_weight(w: &BasePotential) -> RadialField {
    let l = apply_l(&w.smooth.values);
    RadialField::new(Axis::Base, l.into_iter().map(|v| -(w.fs_base + v)).collect())
}

/// `ω_{WP,λ} = -i∂∂̄ log ∫_{X_b} Ω_{Ψ_b}`.
pub fn wp_from_sections(family: &SectionVolumeFamily) -> Result<WpResult> {
    let integral = fiber_integral(&family.smooth);
    let curvature = curvature_of_weight(&BasePotential {
        fs_base: family.base_fs,
        log_s_base: family.log_s_base,
        smooth: integral.map(f64::ln),
    });
    if let Some(k) = integral.values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Positivity {
            what: "fiber integral of section volume".into(),
            worst: integral.values[k],
            x_f: f64::NAN,
            x_b: k as f64 / (integral.len() - 1) as f64,
        });
    }
    let log_norm = BasePotential {
        fs_base: family.base_fs,
        log_s_base: family.log_s_base,
        smooth: integral.map(|v| v.ln() + family.log_scale),
    };
    Ok(WpResult {
        wp_base: curvature,
        log_norm: Some(log_norm),
        route: WpRoute::Sections,
        verticality_defect: None,
    })
}

/// Default bound on the verticality defect of the residual route.
pub const DEFAULT_PULLBACK_TOL: f64 = 1e-2;

/// Full residual form `R = λω + f^*Ric θ - Ric(ω^{n-m} ∧ f^*θ)` on `X`,
/// with `ω = ω₀` (SPR) or `ω_SKE`.
pub fn residual_form(
    reference: &ReferenceGeometry,
    fiber_sol: &FiberFamilySolution,
    theta: &RadialField,
) -> Result<Form11Field> {
    let grid = &reference.grid;
    let lambda = reference.lambda();
    let omega = match fiber_sol.kind {
        FiberKind::Spr => reference.omega0.clone(),
        FiberKind::Ske => fiber_sol.full_form(reference)?,
    };
    let ric_theta = ric_base(theta)?;
    let vol = wedge_with_pullback(grid, &fiber_sol.vertical, theta);
    Ok(omega
        .scale(lambda)
        .add(&Form11Field::pullback(grid, &ric_theta))
        .sub(&ric_volume(grid, &vol)?))
}

/// Verticality defect of a form that should be `f^*` of a base form.
pub fn verticality_defect(grid: &Grid, r: &Form11Field) -> f64 {
    let mixed = Field2D::from_fn(grid, |xf, xb| (fs_weight(xf) * fs_weight(xb)).sqrt())
        .zip_with(&r.fb, |w, c| w * c);
    r.ff.sup_norm() + mixed.sup_norm() + r.bb.fiber_oscillation()
}

/// `ω_{WP,λ}` read off from the Ricci form of `ω^{n-m} ∧ f^*θ`.
///
/// When `sections` is given, `log_norm` holds `log μ` with
/// `μ = ∫Ω_{Ψ_b} / ∫ω_b`.
pub fn wp_from_residual(
    reference: &ReferenceGeometry,
    fiber_sol: &FiberFamilySolution,
    theta: &RadialField,
    sections: Option<&SectionVolumeFamily>,
    pullback_tol: f64,
) -> Result<WpResult> {
    let grid = &reference.grid;
    let r = residual_form(reference, fiber_sol, theta)?;
    let defect = verticality_defect(grid, &r);
    if !(defect <= pullback_tol) {
        return Err(Error::PullbackStructure {
            defect,
            tolerance: pullback_tol,
        });
    }
    let wp_base = RadialField::new(Axis::Base, r.bb.fibers().map(integrate_unit).collect());
    let log_norm = match sections {
        None => None,
        Some(fam) => {
            let top = fiber_integral(&fam.smooth);
            let bottom = fiber_integral(&VolumeDensity::new(fiber_sol.vertical.clone()));
            Some(BasePotential {
                fs_base: fam.base_fs,
                log_s_base: fam.log_s_base,
                smooth: top.zip_with(&bottom, |t, b| (t / b).ln() + fam.log_scale),
            })
        }
    };
    Ok(WpResult {
        wp_base,
        log_norm,
        route: WpRoute::Residual,
        verticality_defect: Some(defect),
    })
}

/// `‖a - b‖_∞` between two base coefficients.
pub fn route_gap(a: &WpResult, b: &WpResult) -> f64 {
    a.wp_base.zip_with(&b.wp_base, |x, y| x - y).sup_norm()
}
