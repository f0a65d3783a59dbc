//! Class arithmetic in the basis `{[π_B^*ω_FS], [π_F^*ω_FS]}` of
//! `H^{1,1}(ℙ¹×ℙ¹)` and numerical checks of the first Chern class
//! identities.
//!
//! Pairings are written in units of `2π`: `π_F^*ω_FS` integrates to `2π`
//! over a fiber of `f` and to `0` over a horizontal section, and
//! `π_B^*ω_FS` the other way round.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num::rational::Rational64;
use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::model::{kahler_class_at, rat_string, rat_to_f64, DerivedConstants};
use crate::quadrature::integrate_base;
use crate::wpform::WpResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CohomClass {
    pub base_coeff: Rational64,
    pub fiber_coeff: Rational64,
}

impl CohomClass {
    pub fn new(base_coeff: Rational64, fiber_coeff: Rational64) -> Self {
        CohomClass {
            base_coeff,
            fiber_coeff,
        }
    }

    pub fn from_base(base_coeff: Rational64) -> Self {
        CohomClass::new(base_coeff, Rational64::zero())
    }

    /// `2πc_1(X)`.
    pub fn first_chern_total() -> Self {
        CohomClass::new(Rational64::from(2), Rational64::from(2))
    }

    /// `2πc_1(B)`, pulled back.
    pub fn first_chern_base() -> Self {
        CohomClass::from_base(Rational64::from(2))
    }

    pub fn omega0(consts: &DerivedConstants) -> Self {
        CohomClass::new(consts.a, consts.c)
    }

    pub fn eta(consts: &DerivedConstants) -> Self {
        CohomClass::from_base(consts.kappa)
    }

    /// `[ω_{WP,λ}] = 2πc_1(B) + [η] / (1 - e^{-T})`.
    pub fn wp_predicted(consts: &DerivedConstants) -> Self {
        CohomClass::first_chern_base() + CohomClass::eta(consts) * consts.inv_one_minus_e()
    }

    /// `⟨class, fiber⟩ / 2π`.
    pub fn fiber_pairing(self) -> Rational64 {
        self.fiber_coeff
    }

    /// `⟨class, horizontal section⟩ / 2π`.
    pub fn base_pairing(self) -> Rational64 {
        self.base_coeff
    }
}

impl Add for CohomClass {
    type Output = CohomClass;
    fn add(self, o: CohomClass) -> CohomClass {
        CohomClass::new(self.base_coeff + o.base_coeff, self.fiber_coeff + o.fiber_coeff)
    }
}

impl Sub for CohomClass {
    type Output = CohomClass;
    fn sub(self, o: CohomClass) -> CohomClass {
        self + (-o)
    }
}

impl Neg for CohomClass {
    type Output = CohomClass;
    fn neg(self) -> CohomClass {
        CohomClass::new(-self.base_coeff, -self.fiber_coeff)
    }
}

impl Mul<Rational64> for CohomClass {
    type Output = CohomClass;
    fn mul(self, s: Rational64) -> CohomClass {
        CohomClass::new(self.base_coeff * s, self.fiber_coeff * s)
    }
}

impl Serialize for CohomClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CohomClass", 2)?;
        st.serialize_field("base_coeff", &rat_string(self.base_coeff))?;
        st.serialize_field("fiber_coeff", &rat_string(self.fiber_coeff))?;
        st.end()
    }
}

/// `∫_B ω_{WP,λ}` by the base quadrature.
pub fn integrate_wp(wp: &WpResult) -> f64 {
    integrate_base(&wp.wp_base, &wp.wp_base.map(|_| 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseIdentityReport {
    pub predicted_class: CohomClass,
    pub integral: f64,
    pub predicted_integral: f64,
    pub absolute_defect: f64,
    pub relative_defect: f64,
}

/// `-2πc_1(B) + [ω_{WP,λ}] = [η] / (1 - e^{-T})`, integrated over `B`.
pub fn check_base_identity(wp: &WpResult, consts: &DerivedConstants) -> BaseIdentityReport {
    let predicted_class = CohomClass::wp_predicted(consts);
    let predicted_integral = 2.0 * PI * rat_to_f64(predicted_class.base_coeff);
    let integral = integrate_wp(wp);
    let absolute_defect = (integral - predicted_integral).abs();
    BaseIdentityReport {
        predicted_class,
        integral,
        predicted_integral,
        absolute_defect,
        relative_defect: absolute_defect / predicted_integral.abs(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TotalIdentityReport {
    /// `⟨2πc_1(X), F⟩ / 2π` and `⟨λ[ω₀] + 2πf^*c_1(B) - [f^*ω_{WP,λ}], F⟩ / 2π`
    /// as exact rationals.
    pub fiber_lhs: String,
    pub fiber_rhs: String,
    pub fiber_exact: bool,
    pub base_lhs: f64,
    pub base_rhs: f64,
    pub base_defect: f64,
}

/// `2πc_1(X) = λ[ω₀] + 2πf^*c_1(B) - [f^*ω_{WP,λ}]`, paired with a fiber
/// (exactly) and with a horizontal section (numerically).
pub fn check_total_identity(wp: &WpResult, consts: &DerivedConstants) -> TotalIdentityReport {
    let lhs = CohomClass::first_chern_total();
    let omega0 = CohomClass::omega0(consts);
    // pulled-back base classes pair to zero with a fiber
    let fiber_rhs = omega0.fiber_pairing() * consts.lambda
        + CohomClass::first_chern_base().fiber_pairing()
        - CohomClass::wp_predicted(consts).fiber_pairing();
    let base_lhs = 2.0 * PI * rat_to_f64(lhs.base_pairing());
    let base_rhs = 2.0 * PI * rat_to_f64(consts.lambda * omega0.base_pairing())
        + 2.0 * PI * rat_to_f64(CohomClass::first_chern_base().base_pairing())
        - integrate_wp(wp);
    TotalIdentityReport {
        fiber_lhs: rat_string(lhs.fiber_pairing()),
        fiber_rhs: rat_string(fiber_rhs),
        fiber_exact: lhs.fiber_pairing() == fiber_rhs,
        base_lhs,
        base_rhs,
        base_defect: (base_lhs - base_rhs).abs(),
    }
}

/// Exact check that the flow class at `t = T` is `[f^*η]`.
pub fn check_terminal_class(consts: &DerivedConstants) -> Result<()> {
    let (b, f) = kahler_class_at(consts.e_neg_t, consts)?;
    let eta = CohomClass::eta(consts);
    if CohomClass::new(b, f) != eta {
        return Err(Error::ModelRegularity(format!(
            "class at t = T is ({}, {}), expected ({}, 0)",
            rat_string(b),
            rat_string(f),
            rat_string(eta.base_coeff)
        )));
    }
    Ok(())
}

/// `|∫ a - ∫ b|` for two measurements of `[ω_{WP,λ}]`.
pub fn class_gap(a: &RadialField, b: &RadialField) -> f64 {
    let one = a.map(|_| 1.0);
    (integrate_base(a, &one) - integrate_base(b, &one)).abs()
}
