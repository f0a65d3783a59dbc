//! Invariant differential calculus in moment coordinates.
//!
//! For a torus-invariant function `u(x_f, x_b)` the coefficients of `i∂∂̄u`
//! in the log frame are `D_j D_k u` with `D = x(1-x)∂_x`. Relative to the FS
//! frame the diagonal entries become `L u = ∂_x(x(1-x)∂_x u)`, which stays
//! bounded at the poles, and the mixed entry becomes `∂_f∂_b u`.
//!
//! All stencils are second order: centered in the interior, one-sided
//! three-point at `x ∈ {0, 1}` (where `L u` reduces to `±u_x`).

use crate::error::{Error, Result};
use crate::field::{check_positive_field, Field2D, Form11Field, Potential, RadialField, VolumeDensity};
use crate::grid::{fs_weight, Axis, Grid};
use crate::linalg::Banded;

/// Row `i` of the discrete `L` on `n` intervals as `(col, coeff)` triples.
pub fn l_row(n: usize, i: usize) -> [(usize, f64); 3] {
    let h = 1.0 / n as f64;
    if i == 0 {
        [(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)]
    } else if i == n {
        [(n, -1.5 / h), (n - 1, 2.0 / h), (n - 2, -0.5 / h)]
    } else {
        let x = i as f64 * h;
        let drift = (1.0 - 2.0 * x) / (2.0 * h);
        let diff = fs_weight(x) / (h * h);
        [(i - 1, diff - drift), (i, -2.0 * diff), (i + 1, diff + drift)]
    }
}

/// Discrete `L u` for nodal values on `[0,1]`.
pub fn apply_l(u: &[f64]) -> Vec<f64> {
    let n = u.len() - 1;
    (0..=n)
        .map(|i| l_row(n, i).iter().map(|&(j, c)| c * u[j]).sum())
        .collect()
}

/// `L` assembled as a banded matrix.
pub fn l_matrix(n: usize) -> Banded {
    let mut m = Banded::zeros(n + 1);
    for i in 0..=n {
        for (j, c) in l_row(n, i) {
            m.add(i, j, c);
        }
    }
    m
}

/// Second-order first derivative.
pub fn derivative(u: &[f64]) -> Vec<f64> {
    let n = u.len() - 1;
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
            } else if i == n {
                (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h)
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// FS-relative coefficient of `i∂∂̄u` for a profile on one factor.
pub fn ddbar_radial(u: &RadialField) -> RadialField {
    RadialField::new(u.axis, apply_l(&u.values))
}

/// `i∂∂̄ψ` for a smooth invariant potential on the total space.
pub fn ddbar_invariant(grid: &Grid, psi: &Field2D) -> Result<Form11Field> {
    psi.check_finite("potential")?;
    let ff = Field2D::from_fibers(grid, psi.fibers().map(apply_l).collect());
    let nf = grid.len(Axis::Fiber);
    let nb = grid.len(Axis::Base);
    let mut bb = vec![0.0; grid.size()];
    let mut dfb_tmp = vec![0.0; grid.size()];
    let df: Vec<Vec<f64>> = psi.fibers().map(derivative).collect();
    for i in 0..nf {
        let line = psi.base_line(i);
        for (j, v) in apply_l(&line).into_iter().enumerate() {
            bb[grid.index(i, j)] = v;
        }
        let dline: Vec<f64> = (0..nb).map(|j| df[j][i]).collect();
        for (j, v) in derivative(&dline).into_iter().enumerate() {
            dfb_tmp[grid.index(i, j)] = v;
        }
    }
    let split = |v: Vec<f64>| -> Field2D {
        Field2D::from_fibers(grid, v.chunks(nf).map(|c| c.to_vec()).collect())
    };
    Ok(Form11Field {
        ff,
        bb: split(bb),
        fb: split(dfb_tmp),
    })
}

/// `i∂∂̄` of a potential with exact logarithmic parts.
pub fn ddbar_potential(grid: &Grid, p: &Potential) -> Result<Form11Field> {
    let smooth = ddbar_invariant(grid, &p.smooth)?;
    Ok(smooth.add(&Form11Field::fs(grid, p.fs_fiber, p.fs_base)))
}

/// Density of the top form `M^2 / 2` relative to `ω_FS,f ∧ ω_FS,b`.
pub fn wedge_top(grid: &Grid, m: &Form11Field) -> Result<VolumeDensity> {
    m.check_finite()
        .map_err(|e| Error::ModelRegularity(format!("wedge_top: {e}")))?;
    let w = Field2D::from_fn(grid, |xf, xb| fs_weight(xf) * fs_weight(xb));
    let det = m
        .ff
        .zip_with(&m.bb, |a, b| a * b)
        .sub(&w.zip_with(&m.fb, |w, c| w * c * c));
    Ok(VolumeDensity::new(det))
}

/// Density of the mixed top form `2 M ∧ f^*θ`, where only `M`'s vertical
/// coefficient enters.
pub fn wedge_with_pullback(grid: &Grid, vertical_ff: &Field2D, theta: &RadialField) -> VolumeDensity {
    let th = Field2D::pullback(grid, theta);
    VolumeDensity::new(vertical_ff.zip_with(&th, |a, b| 2.0 * a * b))
}

/// `Ric V = -i∂∂̄ log V`, expressed through the FS reference:
/// `2(ω_FS,f + ω_FS,b) - i∂∂̄ log rho`.
pub fn ric_volume(grid: &Grid, v: &VolumeDensity) -> Result<Form11Field> {
    v.rho.check_finite("volume density")?;
    check_positive_field(grid, &v.rho, "volume density")?;
    let log_rho = v.rho.map(f64::ln);
    Ok(Form11Field::fs(grid, 2.0, 2.0).sub(&ddbar_invariant(grid, &log_rho)?))
}

/// `Ric` of a base volume `g·ω_FS`: `2 ω_FS - i∂∂̄ log g`.
pub fn ric_base(g: &RadialField) -> Result<RadialField> {
    g.check_finite("base density")?;
    if let Some(k) = g.values.iter().position(|&v| v <= 0.0) {
        return Err(Error::Positivity {
            what: "base density".into(),
            worst: g.values[k],
            x_f: f64::NAN,
            x_b: k as f64 / (g.len() - 1) as f64,
        });
    }
    let l = apply_l(&g.values.iter().map(|v| v.ln()).collect::<Vec<_>>());
    Ok(RadialField::new(g.axis, l.into_iter().map(|v| 2.0 - v).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form_max_diff(g: &Grid, a: &Form11Field, b: &Form11Field) -> f64 {
        a.sub(b).sup_norm(g)
    }

    #[test]
    fn fs_potential_gives_fs_form() {
        let g = Grid::square(32).unwrap();
        let p = Potential {
            fs_fiber: 1.0,
            fs_base: 0.0,
            log_s_base: 0.0,
            smooth: Field2D::zeros(&g),
        };
        let m = ddbar_potential(&g, &p).unwrap();
        let mff = m.m_ff(&g);
        for (k, &xf) in g.nodes(Axis::Fiber).iter().enumerate() {
            assert_eq!(mff.at(k, 3), xf * (1.0 - xf));
        }
        assert_eq!(m.bb.sup_norm(), 0.0);
        assert_eq!(m.fb.sup_norm(), 0.0);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Grid::square(16).unwrap();
        let m = ddbar_invariant(&g, &Field2D::constant(&g, 3.7)).unwrap();
        assert!(m.sup_norm(&g) < 1e-12);
    }

    #[test]
    fn rejects_non_finite_potential() {
        let g = Grid::square(16).unwrap();
        let p = Field2D::from_fn(&g, |xf, _| (1.0 - xf).ln());
        assert!(matches!(ddbar_invariant(&g, &p), Err(Error::NonFinite { .. })));
    }

    // Independent oracle: the chain-rule formula D^2 u = x(1-x)[(1-2x)u_x +
    // x(1-x)u_xx] with derivatives by centered differences on a grid of half
    // the spacing, evaluated at interior nodes.
    fn oracle_ff(u: impl Fn(f64, f64) -> f64, xf: f64, xb: f64, h: f64) -> f64 {
        let ux = (u(xf + h, xb) - u(xf - h, xb)) / (2.0 * h);
        let uxx = (u(xf + h, xb) - 2.0 * u(xf, xb) + u(xf - h, xb)) / (h * h);
        (1.0 - 2.0 * xf) * ux + xf * (1.0 - xf) * uxx
    }

    #[test]
    fn bump_matches_finite_difference_oracle_at_second_order() {
        let u = |xf: f64, xb: f64| xf * (1.0 - xf) * xb * (1.0 - xb);
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = Grid::square(n).unwrap();
            let m = ddbar_invariant(&g, &Field2D::from_fn(&g, u)).unwrap();
            let h = 0.5 / n as f64;
            let mut e: f64 = 0.0;
            for i in 1..n {
                for j in [n / 4, n / 2] {
                    let xf = g.nodes(Axis::Fiber)[i];
                    let xb = g.nodes(Axis::Base)[j];
                    e = e.max((m.ff.at(i, j) - oracle_ff(u, xf, xb, h)).abs());
                }
            }
            errs.push(e);
        }
        // Both the stencil and the oracle are exact on this quadratic-in-x
        // profile up to rounding.
        assert!(errs[1] < 1e-9, "{errs:?}");
    }

    #[test]
    fn smooth_nonpolynomial_profile_converges_at_second_order() {
        let u = |xf: f64, xb: f64| (2.0 * xf).sin() * (1.0 + xb * xb).ln();
        let exact_ff = |xf: f64, xb: f64| {
            let ux = 2.0 * (2.0 * xf).cos();
            let uxx = -4.0 * (2.0 * xf).sin();
            ((1.0 - 2.0 * xf) * ux + xf * (1.0 - xf) * uxx) * (1.0 + xb * xb).ln()
        };
        let exact_fb = |xf: f64, xb: f64| 2.0 * (2.0 * xf).cos() * 2.0 * xb / (1.0 + xb * xb);
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = Grid::square(n).unwrap();
            let m = ddbar_invariant(&g, &Field2D::from_fn(&g, u)).unwrap();
            let ex = Form11Field {
                ff: Field2D::from_fn(&g, exact_ff),
                bb: m.bb.clone(),
                fb: Field2D::from_fn(&g, exact_fb),
            };
            errs.push(form_max_diff(&g, &m, &ex));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn wedge_of_fs_product() {
        let g = Grid::square(16).unwrap();
        let fs = Form11Field::fs(&g, 1.0, 1.0);
        let v = wedge_top(&g, &fs).unwrap();
        assert!(v.rho.values().iter().all(|&r| r == 1.0));
        let v2 = wedge_top(&g, &fs.scale(2.0)).unwrap();
        assert!(v2.rho.values().iter().all(|&r| r == 4.0));
    }

    #[test]
    fn ricci_of_fs_product_volume() {
        let g = Grid::square(16).unwrap();
        let fs = Form11Field::fs(&g, 1.0, 1.0);
        let r = ric_volume(&g, &wedge_top(&g, &fs).unwrap()).unwrap();
        assert!(r.sub(&Form11Field::fs(&g, 2.0, 2.0)).sup_norm(&g) < 1e-12);
        let r7 = ric_volume(&g, &VolumeDensity::new(Field2D::constant(&g, 7.0))).unwrap();
        assert!(r7.sub(&r).sup_norm(&g) < 1e-12);
    }

    #[test]
    fn ricci_rejects_nonpositive_density() {
        let g = Grid::square(16).unwrap();
        let v = VolumeDensity::new(Field2D::from_fn(&g, |xf, _| xf - 0.5));
        assert!(matches!(ric_volume(&g, &v), Err(Error::Positivity { .. })));
    }

    #[test]
    fn ricci_of_density_matches_log_oracle() {
        // rho = (1 + x_f)^-2 e^{x_b}: log rho = -2 log(1+x_f) + x_b, so
        // Ric = (2 + L(2 log(1+x_f))) FS_f + (2 - L x_b) FS_b.
        let g = Grid::square(64).unwrap();
        let v = VolumeDensity::new(Field2D::from_fn(&g, |xf, xb| (1.0 + xf).powi(-2) * xb.exp()));
        let r = ric_volume(&g, &v).unwrap();
        let expected = Form11Field {
            ff: Field2D::from_fn(&g, |xf, _| {
                // L(-2 log(1+x)) = ∂(x(1-x)·(-2/(1+x)))
                2.0 + 2.0 * ((1.0 - 2.0 * xf) * (1.0 + xf) - xf * (1.0 - xf)) / (1.0 + xf).powi(2)
            }),
            bb: Field2D::from_fn(&g, |_, xb| 2.0 - (1.0 - 2.0 * xb)),
            fb: Field2D::zeros(&g),
        };
        assert!(form_max_diff(&g, &r, &expected) < 2e-3);
    }

    #[test]
    fn linearity_is_exact_up_to_rounding() {
        let g = Grid::square(32).unwrap();
        let a = Field2D::from_fn(&g, |x, y| (x * 3.0).cos() * y);
        let b = Field2D::from_fn(&g, |x, y| x * x * (1.0 - y).exp());
        let lhs = ddbar_invariant(&g, &a.scale(2.0).add(&b.scale(-0.5))).unwrap();
        let rhs = ddbar_invariant(&g, &a)
            .unwrap()
            .scale(2.0)
            .add(&ddbar_invariant(&g, &b).unwrap().scale(-0.5));
        assert!(form_max_diff(&g, &lhs, &rhs) < 1e-10);
    }
}
