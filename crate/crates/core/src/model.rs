//! Model fibrations `X = P1 x P1 -> B = P1` (projection to the second
//! factor), their exact class constants, and the reference geometry built
//! on a grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num::rational::Rational64;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::calculus::{ddbar_potential, ric_volume};
use crate::error::{Error, Result};
use crate::field::{Field2D, Form11Field, Potential, RadialField, VolumeDensity};
use crate::grid::{Axis, Grid};
use crate::quadrature::integrate_total;

/// Largest denominator accepted for the class coefficients.
pub const MAX_DENOMINATOR: i64 = 1_000;

pub fn rat_to_f64(r: Rational64) -> f64 {
    r.to_f64().expect("bounded rationals convert")
}

/// Formats a rational as `"p/q"` (always with a denominator).
pub fn rat_string(r: Rational64) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<Rational64> {
    let t = s.trim();
    let bad = || Error::InvalidInput(format!("not an exact rational: {s:?}"));
    if t.contains('/') {
        Rational64::from_str(t).map_err(|_| bad())
    } else {
        t.parse::<i64>().map(Rational64::from_integer).map_err(|_| bad())
    }
}

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn deriv(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// `(1-2x) p' + x(1-x) p''`.
    fn fs_laplacian(&self, x: f64) -> f64 {
        let d1 = self.deriv();
        let d2 = d1.deriv();
        (1.0 - 2.0 * x) * d1.eval(x) + x * (1.0 - x) * d2.eval(x)
    }
}

/// Library of smooth invariant warp potentials `ψ_w = ε A(x_f) B(x_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WarpShape {
    /// `x_f(1-x_f) x_b(1-x_b)`
    #[default]
    Bump,
    /// `x_f(1-x_f)(1+x_f) x_b(1-x_b)`, not symmetric under `x_f -> 1-x_f`.
    Tilted,
}

impl FromStr for WarpShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(WarpShape::Bump),
            "tilted" => Ok(WarpShape::Tilted),
            _ => Err(Error::InvalidInput(format!("unknown warp shape {s:?}"))),
        }
    }
}

impl fmt::Display for WarpShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarpShape::Bump => "bump",
            WarpShape::Tilted => "tilted",
        })
    }
}

/// Warp potential with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    amplitude: f64,
    fiber: Poly,
    base: Poly,
}

impl Warp {
    pub fn new(shape: WarpShape, amplitude: f64) -> Self {
        let fiber = match shape {
            WarpShape::Bump => Poly(vec![0.0, 1.0, -1.0]),
            WarpShape::Tilted => Poly(vec![0.0, 1.0, 0.0, -1.0]),
        };
        Warp {
            amplitude,
            fiber,
            base: Poly(vec![0.0, 1.0, -1.0]),
        }
    }

    pub fn value(&self, xf: f64, xb: f64) -> f64 {
        self.amplitude * self.fiber.eval(xf) * self.base.eval(xb)
    }

    /// FS-relative coefficients `(L_f ψ, L_b ψ, ∂_f∂_b ψ)`.
    pub fn ddbar(&self, xf: f64, xb: f64) -> (f64, f64, f64) {
        let e = self.amplitude;
        (
            e * self.fiber.fs_laplacian(xf) * self.base.eval(xb),
            e * self.fiber.eval(xf) * self.base.fs_laplacian(xb),
            e * self.fiber.deriv().eval(xf) * self.base.deriv().eval(xb),
        )
    }
}

/// Parameters of a model fibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Base coefficient of `[ω₀]`.
    #[serde(with = "rational_str")]
    pub a: Rational64,
    /// Fiber coefficient of `[ω₀]`.
    #[serde(with = "rational_str")]
    pub c: Rational64,
    #[serde(default)]
    pub warp_amplitude: f64,
    #[serde(default)]
    pub warp_shape: WarpShape,
    pub n_fiber: usize,
    pub n_base: usize,
}

pub(crate) mod rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&rat_string(*r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            I(i64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => parse_rational(&s).map_err(serde::de::Error::custom),
            Raw::I(i) => Ok(Rational64::from_integer(i)),
        }
    }
}

impl ModelSpec {
    /// Product metric `(a, c) = (2, 1)`, no warp.
    pub fn model_a(n: usize) -> Self {
        ModelSpec {
            a: Rational64::from_integer(2),
            c: Rational64::from_integer(1),
            warp_amplitude: 0.0,
            warp_shape: WarpShape::Bump,
            n_fiber: n,
            n_base: n,
        }
    }

    /// Warped model: `(a, c) = (2, 1)`, bump warp with `ε = 0.2`.
    pub fn model_b(n: usize) -> Self {
        ModelSpec {
            warp_amplitude: 0.2,
            ..Self::model_a(n)
        }
    }

    pub fn with_class(mut self, a: i64, c: i64) -> Self {
        self.a = Rational64::from_integer(a);
        self.c = Rational64::from_integer(c);
        self
    }

    pub fn with_grid(mut self, n_fiber: usize, n_base: usize) -> Self {
        self.n_fiber = n_fiber;
        self.n_base = n_base;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_fiber, self.n_base)
    }

    pub fn warp(&self) -> Warp {
        Warp::new(self.warp_shape, self.warp_amplitude)
    }
}

/// Exact class constants of a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedConstants {
    #[serde(with = "rational_str")]
    pub e_neg_t: Rational64,
    /// Maximal existence time `T = -ln(e^{-T})`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub t_max: f64,
    #[serde(with = "rational_str")]
    pub lambda: Rational64,
    /// `η = κ ω_FS` on the base.
    #[serde(with = "rational_str")]
    pub kappa: Rational64,
    pub k: i64,
    pub k_prime: i64,
    pub alpha: i64,
    pub beta: i64,
    /// Class of `D` in the basis `{π_B^*ω_FS, π_F^*ω_FS}`.
    #[serde(serialize_with = "ser_pair")]
    pub d_class: (Rational64, Rational64),
    /// Minimal positive triple with `pD = qL + rK_X`.
    pub p: i64,
    pub q: i64,
    pub r: i64,
    #[serde(with = "rational_str")]
    pub a: Rational64,
    #[serde(with = "rational_str")]
    pub c: Rational64,
}

fn ser_pair<S: serde::Serializer>(
    p: &(Rational64, Rational64),
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&rat_string(p.0))?;
    seq.serialize_element(&rat_string(p.1))?;
    seq.end()
}

/// `2πc_1(P1 x P1)` in the product basis.
pub const ANTICANONICAL: (i64, i64) = (2, 2);

impl DerivedConstants {
    pub fn lambda_f64(&self) -> f64 {
        rat_to_f64(self.lambda)
    }

    pub fn kappa_f64(&self) -> f64 {
        rat_to_f64(self.kappa)
    }

    pub fn e_neg_t_f64(&self) -> f64 {
        rat_to_f64(self.e_neg_t)
    }

    /// `1/(1 - e^{-T}) = λ + 1`.
    pub fn inv_one_minus_e(&self) -> Rational64 {
        Rational64::one() / (Rational64::one() - self.e_neg_t)
    }

    /// `V = 2 ∫_{X_b} ω_{0,b} = 4πc`.
    pub fn fiber_volume_constant(&self) -> f64 {
        2.0 * 2.0 * PI * rat_to_f64(self.c)
    }
}

/// Exact constants from the class data.
pub fn derive_constants(spec: &ModelSpec) -> Result<DerivedConstants> {
    let (a, c) = (spec.a, spec.c);
    for (name, v) in [("a", a), ("c", c)] {
        if !v.is_positive() {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        if *v.denom() > MAX_DENOMINATOR {
            return Err(Error::InvalidInput(format!(
                "{name} = {} has denominator above {MAX_DENOMINATOR}",
                rat_string(v)
            )));
        }
    }
    if a <= c {
        return Err(Error::ModelOrientation {
            a: rat_string(a),
            c: rat_string(c),
        });
    }
    let two = Rational64::from_integer(2);
    let one = Rational64::one();
    // The fiber coefficient of e^{-t}(a,c) - (1-e^{-t})(2,2) vanishes first.
    let e = two / (c + two);
    let om = one - e;
    let lambda = e / om;
    let kappa = e * a - om * two;
    let d_class = (kappa, e * c - om * two);
    debug_assert!(d_class.1.is_zero());

    let k = *e.denom();
    let k_prime = (om * Rational64::from_integer(k)).to_integer();
    let (alpha, beta) = (*lambda.numer(), *lambda.denom());
    let (p, q, r) = (*e.denom(), *e.numer(), *e.denom() - *e.numer());
    Ok(DerivedConstants {
        e_neg_t: e,
        t_max: -rat_to_f64(e).ln(),
        lambda,
        kappa,
        k,
        k_prime,
        alpha,
        beta,
        d_class,
        p,
        q,
        r,
        a,
        c,
    })
}

/// Class of the flow at time `t ∈ [0, T]` in the product basis.
pub fn kahler_class_at_time(t: f64, consts: &DerivedConstants) -> Result<(f64, f64)> {
    if !(0.0..=consts.t_max * (1.0 + 1e-14)).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "t = {t} outside [0, T = {}]",
            consts.t_max
        )));
    }
    let e = (-t).exp();
    let et = consts.e_neg_t_f64();
    let w0 = (e - et) / (1.0 - et);
    let w1 = (1.0 - e) / (1.0 - et);
    Ok((
        w0 * rat_to_f64(consts.a) + w1 * consts.kappa_f64(),
        w0 * rat_to_f64(consts.c),
    ))
}

/// Exact version of [`kahler_class_at_time`] parametrized by a rational
/// `e^{-t} ∈ [e^{-T}, 1]`.
pub fn kahler_class_at(e_neg_t: Rational64, consts: &DerivedConstants) -> Result<(Rational64, Rational64)> {
    let one = Rational64::one();
    if e_neg_t > one || e_neg_t < consts.e_neg_t {
        return Err(Error::InvalidInput(format!(
            "e^(-t) = {} outside [e^(-T), 1]",
            rat_string(e_neg_t)
        )));
    }
    let et = consts.e_neg_t;
    let w0 = (e_neg_t - et) / (one - et);
    let w1 = (one - e_neg_t) / (one - et);
    Ok((w0 * consts.a + w1 * consts.kappa, w0 * consts.c))
}

/// `∫_X 2ω₀ ∧ f^*η = (2π)^2 · 2κc`, the mass that fixes `Ω`.
pub fn exact_omega_mass(consts: &DerivedConstants) -> f64 {
    let tau = 2.0 * PI;
    tau * tau * 2.0 * consts.kappa_f64() * rat_to_f64(consts.c)
}

/// Reference geometric objects on a grid.
#[derive(Debug, Clone)]
pub struct ReferenceGeometry {
    pub spec: ModelSpec,
    pub consts: DerivedConstants,
    pub grid: Grid,
    pub warp: Warp,
    pub omega0: Form11Field,
    /// FS-relative coefficient of `η` (constant κ).
    pub eta: RadialField,
    /// Weight of `h_L`: `i∂∂̄φ_L = ω₀`.
    pub phi_l: Potential,
    pub chi: Form11Field,
    pub omega: VolumeDensity,
    /// `(n choose m) ∫_{X_b} ω_{0,b}`.
    pub volume_v: f64,
}

/// Forward checks of the reference objects.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceDiagnostics {
    pub positivity_margin: f64,
    pub hl_curvature_residual: f64,
    pub eta_identity_residual: f64,
    pub omega_ricci_residual: f64,
    pub omega_normalization_defect: f64,
}

/// Builds `ω₀`, `η`, `φ_L`, `χ` and the normalized `Ω` on the model grid.
pub fn build_reference(spec: &ModelSpec, consts: &DerivedConstants) -> Result<ReferenceGeometry> {
    let grid = spec.grid()?;
    let warp = spec.warp();
    let a = rat_to_f64(spec.a);
    let c = rat_to_f64(spec.c);
    let omega0 = Form11Field {
        ff: Field2D::from_fn(&grid, |xf, xb| c + warp.ddbar(xf, xb).0),
        bb: Field2D::from_fn(&grid, |xf, xb| a + warp.ddbar(xf, xb).1),
        fb: Field2D::from_fn(&grid, |xf, xb| warp.ddbar(xf, xb).2),
    };
    let (worst, x_f, x_b) = omega0.min_eigenvalue(&grid);
    if worst <= 0.0 {
        return Err(Error::Positivity {
            what: "omega_0".into(),
            worst,
            x_f,
            x_b,
        });
    }
    let kappa = consts.kappa_f64();
    let eta = RadialField::constant(&grid, Axis::Base, kappa);
    let psi = Field2D::from_fn(&grid, |xf, xb| warp.value(xf, xb));
    let phi_l = Potential {
        fs_fiber: c,
        fs_base: a,
        log_s_base: 0.0,
        smooth: psi.clone(),
    };

    let et = consts.e_neg_t_f64();
    let chi = Form11Field::pullback(&grid, &eta)
        .sub(&omega0.scale(et))
        .scale(1.0 / (1.0 - et));

    // [χ] = -2πc_1(X) and the FS parts of -χ equal Ric(ω_FS ∧ ω_FS), so
    // Ric Ω = -χ leaves log Ω = -λψ_w up to a constant.
    let lambda = consts.lambda_f64();
    let shape = VolumeDensity::new(psi.map(|v| (-lambda * v).exp()));
    let target = exact_omega_mass(consts);
    let omega = shape.scale(target / integrate_total(&grid, &shape));

    Ok(ReferenceGeometry {
        volume_v: consts.fiber_volume_constant(),
        spec: spec.clone(),
        consts: consts.clone(),
        grid,
        warp,
        omega0,
        eta,
        phi_l,
        chi,
        omega,
    })
}

impl ReferenceGeometry {
    pub fn lambda(&self) -> f64 {
        self.consts.lambda_f64()
    }

    pub fn kappa(&self) -> f64 {
        self.consts.kappa_f64()
    }

    pub fn e_neg_t(&self) -> f64 {
        self.consts.e_neg_t_f64()
    }

    /// FS-relative vertical coefficient of `ω_{0,b}`.
    pub fn omega0_vertical(&self) -> &Field2D {
        &self.omega0.ff
    }

    /// Re-evaluates every defining identity of the reference objects.
    pub fn diagnostics(&self) -> Result<ReferenceDiagnostics> {
        let g = &self.grid;
        let hl = ddbar_potential(g, &self.phi_l)?.sub(&self.omega0).sup_norm(g);
        let eta_id = Form11Field::pullback(g, &self.eta)
            .sub(&self.omega0.scale(self.e_neg_t()))
            .sub(&self.chi.scale(1.0 - self.e_neg_t()))
            .sup_norm(g);
        let ric = ric_volume(g, &self.omega)?.add(&self.chi).sup_norm(g);
        let lhs = integrate_total(g, &self.omega);
        let rhs = exact_omega_mass(&self.consts);
        Ok(ReferenceDiagnostics {
            positivity_margin: self.omega0.min_eigenvalue(g).0,
            hl_curvature_residual: hl,
            eta_identity_residual: eta_id,
            omega_ricci_residual: ric,
            omega_normalization_defect: ((lhs - rhs) / rhs).abs(),
        })
    }
}
