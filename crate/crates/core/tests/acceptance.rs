//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::process::ExitCode;

use num::rational::Rational64;

use fibrelab::basespace::{
    check_g_descends, compute_gprime, g_on_total_space, pushforward, solve_base_ma, twisted_ke_residual,
    uniqueness_probe, volume_identity_residual, wpl_fs_residual, BaseMetricSolution, BaseVariant, GprimeReport,
    VolumeIdentity,
};
use fibrelab::cohomology::{check_base_identity, check_total_identity};
use fibrelab::config::PipelineConfig;
use fibrelab::convergence::refinement;
use fibrelab::fiberwise::{solve_ske, solve_spr, verify_fiber_family, FiberFamilySolution, FiberKind};
use fibrelab::field::{RadialField, VolumeDensity};
use fibrelab::grid::Axis;
use fibrelab::model::{build_reference, derive_constants, DerivedConstants, ModelSpec, ReferenceGeometry};
use fibrelab::newton::NewtonOptions;
use fibrelab::pipeline::run_pipeline;
use fibrelab::report::emit_report;
use fibrelab::wpform::{
    route_gap, volume_family_from_sections, wp_from_residual, wp_from_sections, SectionFamilySpec, SectionGauge,
    WeightKind, WpResult, DEFAULT_PULLBACK_TOL,
};
use fibrelab::Error;

const GRIDS: [usize; 3] = [64, 128, 256];
/// Model B residual bound at the finest grid.
const MODEL_B_TOL: f64 = 1e-3;

struct Run {
    re: ReferenceGeometry,
    fib: FiberFamilySolution,
    sections: WpResult,
    residual: WpResult,
    gp: GprimeReport,
    b: BaseMetricSolution,
    bp: BaseMetricSolution,
}

fn run(spec: ModelSpec, kind: FiberKind) -> Run {
    let k = derive_constants(&spec).expect("constants");
    let re = build_reference(&spec, &k).expect("reference");
    let (fib, weight) = match kind {
        FiberKind::Spr => (solve_spr(&re).expect("spr"), WeightKind::HL),
        FiberKind::Ske => (solve_ske(&re).expect("ske"), WeightKind::HSke),
    };
    let fam = volume_family_from_sections(&re, &SectionFamilySpec::canonical(&re, weight), Some(&fib)).expect("family");
    let sections = wp_from_sections(&fam).expect("wp sections");
    let residual = wp_from_residual(&re, &fib, &re.eta, Some(&fam), DEFAULT_PULLBACK_TOL).expect("wp residual");
    let gp = compute_gprime(&re, &fib, 0.1).expect("gprime");
    let opts = NewtonOptions::default();
    let b = solve_base_ma(&gp, BaseVariant::B, &k, opts, None).expect("base B");
    let bp = solve_base_ma(&gp, BaseVariant::Bprime, &k, opts, None).expect("base Bprime");
    Run {
        re,
        fib,
        sections,
        residual,
        gp,
        b,
        bp,
    }
}

fn model_b_runs(kind: FiberKind) -> Vec<Run> {
    GRIDS.iter().map(|&n| run(ModelSpec::model_b(n), kind)).collect()
}

fn consts(r: &Run) -> &DerivedConstants {
    &r.re.consts
}

/// Refinement verdict on a Model B series, with a printable summary.
fn refined(label: &str, values: Vec<f64>, fails: &mut Vec<String>) {
    let r = refinement(&values, MODEL_B_TOL);
    if !r.pass {
        fails.push(format!("{label}: residuals {:?} orders {:?}", r.residuals, r.orders));
    }
}

fn bounded(label: &str, value: f64, tol: f64, fails: &mut Vec<String>) {
    if !(value <= tol) {
        fails.push(format!("{label}: {value:e} > {tol:e}"));
    }
}

fn rat(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn criterion_1() -> Vec<String> {
    let mut f = Vec::new();
    let k = derive_constants(&ModelSpec::model_a(16)).unwrap();
    let got = (k.e_neg_t, k.lambda, k.kappa, k.k, k.k_prime, k.alpha, k.beta, k.d_class);
    if got != (rat(2, 3), rat(2, 1), rat(2, 3), 3, 1, 2, 1, (rat(2, 3), rat(0, 1))) {
        f.push(format!("(2,1): {got:?}"));
    }
    if (k.t_max - (1.5f64).ln()).abs() > 1e-15 {
        f.push(format!("(2,1): T = {}", k.t_max));
    }
    let k = derive_constants(&ModelSpec::model_a(16).with_class(3, 2)).unwrap();
    let got = (k.e_neg_t, k.lambda, k.kappa, k.k, k.k_prime, k.alpha, k.beta);
    if got != (rat(1, 2), rat(1, 1), rat(1, 2), 2, 1, 1, 1) {
        f.push(format!("(3,2): {got:?}"));
    }
    if (k.t_max - (2.0f64).ln()).abs() > 1e-15 {
        f.push(format!("(3,2): T = {}", k.t_max));
    }
    if !matches!(
        derive_constants(&ModelSpec::model_a(16).with_class(1, 1)),
        Err(Error::ModelOrientation { .. })
    ) {
        f.push("(1,1) accepted".into());
    }
    f
}

fn criterion_2(spr_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    for (a, c) in [(2, 1), (3, 2)] {
        let r = run(ModelSpec::model_a(256).with_class(a, c), FiberKind::Spr);
        let target = consts(&r).lambda_f64() * rat_f(consts(&r).a);
        for (route, wp) in [("sections", &r.sections), ("residual", &r.residual)] {
            let err = wp.wp_base.map(|v| (v - target).abs() / target).sup_norm();
            bounded(&format!("model A ({a},{c}) {route}"), err, 1e-6, &mut f);
        }
    }
    refined(
        "model B route gap",
        spr_b.iter().map(|r| route_gap(&r.sections, &r.residual)).collect(),
        &mut f,
    );
    f
}

fn rat_f(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn criterion_3(spr_a: &Run, ske_a: &Run, spr_b: &[Run], ske_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    for r in [spr_a, ske_a] {
        for sol in [&r.b, &r.bp] {
            for wp in [&r.sections, &r.residual] {
                let res = twisted_ke_residual(sol, wp, consts(r)).unwrap().absolute;
                bounded(&format!("model A {} {}", r.fib.kind.name(), sol.variant.name()), res, 1e-8, &mut f);
            }
        }
    }
    for runs in [spr_b, ske_b] {
        for v in [BaseVariant::B, BaseVariant::Bprime] {
            let vals = runs
                .iter()
                .map(|r| {
                    let sol = if v == BaseVariant::B { &r.b } else { &r.bp };
                    twisted_ke_residual(sol, &r.sections, consts(r)).unwrap().relative
                })
                .collect();
            refined(&format!("model B {} {}", runs[0].fib.kind.name(), v.name()), vals, &mut f);
        }
    }
    f
}

fn criterion_4(spr_a: &Run, spr_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    let push = pushforward(&spr_a.re.omega);
    bounded(
        "model A",
        wpl_fs_residual(&spr_a.re, &push, &spr_a.sections).unwrap().absolute,
        1e-8,
        &mut f,
    );
    for (route, pick) in [("sections", 0), ("residual", 1)] {
        let vals = spr_b
            .iter()
            .map(|r| {
                let wp = if pick == 0 { &r.sections } else { &r.residual };
                wpl_fs_residual(&r.re, &pushforward(&r.re.omega), wp).unwrap().relative
            })
            .collect();
        refined(&format!("model B {route}"), vals, &mut f);
    }
    f
}

fn criterion_5(spr_a: &Run, ske_a: &Run, spr_b: &[Run], ske_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    for r in [spr_a, ske_a] {
        let d = check_g_descends(&r.re, &r.fib, &r.gp).unwrap();
        bounded("model A vertical", d.vertical_constancy_defect, 1e-10, &mut f);
        bounded("model A pullback", d.pullback_defect, 1e-10, &mut f);
    }
    for runs in [spr_b, ske_b] {
        let ds: Vec<_> = runs.iter().map(|r| check_g_descends(&r.re, &r.fib, &r.gp).unwrap()).collect();
        let k = runs[0].fib.kind.name();
        refined(&format!("model B {k} vertical"), ds.iter().map(|d| d.vertical_constancy_defect).collect(), &mut f);
        refined(&format!("model B {k} pullback"), ds.iter().map(|d| d.pullback_defect).collect(), &mut f);
    }
    f
}

fn criterion_6(spr_b: &[Run], ske_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    for (a, c) in [(2, 1), (3, 2)] {
        for kind in [FiberKind::Spr, FiberKind::Ske] {
            let r = run(ModelSpec::model_a(64).with_class(a, c), kind);
            let b = check_base_identity(&r.sections, consts(&r));
            let t = check_total_identity(&r.sections, consts(&r));
            bounded(&format!("model A ({a},{c}) base identity"), b.absolute_defect, 1e-8, &mut f);
            bounded(&format!("model A ({a},{c}) base pairing"), t.base_defect, 1e-8, &mut f);
            if !t.fiber_exact || consts(&r).lambda * consts(&r).c != rat(2, 1) {
                f.push(format!("({a},{c}) fiber pairing {} vs {}", t.fiber_lhs, t.fiber_rhs));
            }
        }
    }
    for runs in [spr_b, ske_b] {
        let r = runs.last().unwrap();
        for wp in [&r.sections, &r.residual] {
            let b = check_base_identity(wp, consts(r));
            let t = check_total_identity(wp, consts(r));
            bounded("model B base identity", b.relative_defect, MODEL_B_TOL, &mut f);
            bounded("model B base pairing", t.base_defect, MODEL_B_TOL, &mut f);
            if !t.fiber_exact {
                f.push("model B fiber pairing".into());
            }
        }
    }
    f
}

fn identity_runs(runs: &[Run], which: VolumeIdentity) -> Vec<f64> {
    runs.iter()
        .map(|r| {
            let sol = if which.base_variant() == BaseVariant::B { &r.b } else { &r.bp };
            volume_identity_residual(which, &r.re, &r.fib, sol).unwrap().residual
        })
        .collect()
}

fn criterion_7(spr_a: &Run, ske_a: &Run, spr_b: &[Run], ske_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    for which in VolumeIdentity::ALL {
        let (a, b) = match which.fiber_kind() {
            FiberKind::Spr => (spr_a, spr_b),
            FiberKind::Ske => (ske_a, ske_b),
        };
        let sol = if which.base_variant() == BaseVariant::B { &a.b } else { &a.bp };
        let rep = volume_identity_residual(which, &a.re, &a.fib, sol).unwrap();
        bounded(&format!("model A identity {}", rep.which), rep.residual, 1e-8, &mut f);
        if (rep.gap_difference, rep.gap_fiber, rep.gap_base) != (0.0, 0.0, 0.0) {
            f.push(format!("model A identity {} gaps {rep:?}", rep.which));
        }
        refined(&format!("model B identity {}", which.index()), identity_runs(b, which), &mut f);
        let last = b.last().unwrap();
        let sol = if which.base_variant() == BaseVariant::B { &last.b } else { &last.bp };
        let rep = volume_identity_residual(which, &last.re, &last.fib, sol).unwrap();
        let gap = match which {
            VolumeIdentity::One => rep.gap_difference,
            VolumeIdentity::Two => rep.gap_fiber,
            VolumeIdentity::Three => rep.gap_base,
            VolumeIdentity::Four => 1.0,
        };
        if !(gap > 1e-4) {
            f.push(format!("model B identity {} degeneracy gap {gap:e}", rep.which));
        }
    }
    f
}

fn criterion_8(spr_a: &Run, ske_a: &Run, ske_b: &[Run]) -> Vec<String> {
    let mut f = Vec::new();
    bounded("model A rho_SKE", ske_a.fib.rho.sup_norm(), 1e-12, &mut f);
    let pairs = [
        ("vertical", spr_a.fib.vertical.sub(&ske_a.fib.vertical).sup_norm()),
        ("wp", route_gap(&spr_a.sections, &ske_a.sections)),
        ("gprime", spr_a.gp.gprime.zip_with(&ske_a.gp.gprime, |a, b| a - b).sup_norm()),
        ("rho_B", spr_a.b.rho.zip_with(&ske_a.b.rho, |a, b| a - b).sup_norm()),
        ("rho_Bprime", spr_a.bp.rho.zip_with(&ske_a.bp.rho, |a, b| a - b).sup_norm()),
    ];
    for (what, gap) in pairs {
        bounded(&format!("model A SPR vs SKE {what}"), gap, 1e-10, &mut f);
    }
    let reps: Vec<_> = ske_b.iter().map(|r| verify_fiber_family(&r.fib, &r.re).unwrap()).collect();
    refined("model B fiber KE", reps.iter().map(|r| r.residual_sup).collect(), &mut f);
    refined("model B h_SKE curvature", reps.iter().map(|r| r.hske_residual.unwrap()).collect(), &mut f);
    refined(
        "model B SKE route gap",
        ske_b.iter().map(|r| route_gap(&r.sections, &r.residual)).collect(),
        &mut f,
    );
    for v in [BaseVariant::B, BaseVariant::Bprime] {
        let vals = ske_b
            .iter()
            .map(|r| {
                let sol = if v == BaseVariant::B { &r.b } else { &r.bp };
                twisted_ke_residual(sol, &r.residual, consts(r)).unwrap().relative
            })
            .collect();
        refined(&format!("model B SKE twisted KE {} (residual route)", v.name()), vals, &mut f);
    }
    f
}

fn criterion_9(spr_b: &Run) -> Vec<String> {
    let mut f = Vec::new();
    let r = spr_b;
    let re = &r.re;
    let canonical = SectionFamilySpec::canonical(re, WeightKind::HL);
    let rescaled = SectionFamilySpec {
        gauge: SectionGauge::Constant(5.0),
        ..canonical
    };
    let wp5 = wp_from_sections(&volume_family_from_sections(re, &rescaled, None).unwrap()).unwrap();
    bounded("section rescaling", route_gap(&wp5, &r.sections), 1e-12, &mut f);

    let mut shifted = re.clone();
    shifted.phi_l = re.phi_l.add_constant(0.75);
    let wp_h = wp_from_sections(&volume_family_from_sections(&shifted, &canonical, None).unwrap()).unwrap();
    bounded("h_L constant shift", route_gap(&wp_h, &r.sections), 1e-12, &mut f);

    let shift = RadialField::from_fn(&re.grid, Axis::Base, |x| 2.0 * x * x - 0.4);
    let moved = r.fib.with_gauge_shift(&re.grid, &shift);
    let g0 = g_on_total_space(re, &r.fib);
    bounded("per-fiber rho shift (G)", g0.sub(&g_on_total_space(re, &moved)).sup_norm(), 1e-12, &mut f);
    let wp_moved = wp_from_residual(re, &moved, &re.eta, None, DEFAULT_PULLBACK_TOL).unwrap();
    bounded("per-fiber rho shift (wp)", route_gap(&wp_moved, &r.residual), 1e-12, &mut f);

    let push = pushforward(&re.omega);
    let scaled = pushforward(&VolumeDensity::new(re.omega.rho.scale(3.25)));
    let a = wpl_fs_residual(re, &push, &r.sections).unwrap().absolute;
    let b = wpl_fs_residual(re, &scaled, &r.sections).unwrap().absolute;
    bounded("omega rescale", (a - b).abs(), 1e-12, &mut f);

    let theta = RadialField::from_fn(&re.grid, Axis::Base, |x| 1.0 + x * (1.0 - x) + 0.3 * x);
    let wp_theta = wp_from_residual(re, &r.fib, &theta, None, DEFAULT_PULLBACK_TOL).unwrap();
    bounded("theta swap", route_gap(&wp_theta, &r.residual), 1e-12, &mut f);

    let k = consts(r);
    for v in [BaseVariant::B, BaseVariant::Bprime] {
        let gap = uniqueness_probe(&r.gp, v, k, NewtonOptions::default()).unwrap();
        bounded(&format!("uniqueness {}", v.name()), gap, 1e-9, &mut f);
    }
    f
}

fn criterion_10() -> Vec<String> {
    let mut f = Vec::new();
    let mut cfg = PipelineConfig::preset(&ModelSpec::model_b(32));
    cfg.grids = vec![(32, 32), (64, 64)];
    let one = run_pipeline(&cfg);
    let two = run_pipeline(&cfg);
    if one.to_json() != two.to_json() {
        f.push("report JSON differs".into());
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let written: Vec<_> = dirs
        .iter()
        .zip([&one, &two])
        .map(|(d, r)| emit_report(r, d.path()).unwrap())
        .collect();
    for (a, b) in written[0].iter().zip(&written[1]) {
        if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
            f.push(format!("{} differs", a.file_name().unwrap().to_string_lossy()));
        }
    }
    f
}

fn main() -> ExitCode {
    let spr_a = run(ModelSpec::model_a(64), FiberKind::Spr);
    let ske_a = run(ModelSpec::model_a(64), FiberKind::Ske);
    let spr_b = model_b_runs(FiberKind::Spr);
    let ske_b = model_b_runs(FiberKind::Ske);

    let results: Vec<(&str, Vec<String>)> = vec![
        ("exact constants", criterion_1()),
        ("closed-form and two-route WP form", criterion_2(&spr_b)),
        ("twisted KE equations", criterion_3(&spr_a, &ske_a, &spr_b, &ske_b)),
        ("pushforward Ricci identity", criterion_4(&spr_a, &spr_b)),
        ("G descends to the base", criterion_5(&spr_a, &ske_a, &spr_b, &ske_b)),
        ("cohomology identities", criterion_6(&spr_b, &ske_b)),
        ("volume-form identities", criterion_7(&spr_a, &ske_a, &spr_b, &ske_b)),
        ("SKE pipeline", criterion_8(&spr_a, &ske_a, &ske_b)),
        ("gauge and invariance suite", criterion_9(&spr_b[0])),
        ("determinism", criterion_10()),
    ];
    let mut ok = true;
    for (i, (name, fails)) in results.iter().enumerate() {
        let verdict = if fails.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name}", i + 1);
        for line in fails {
            println!("    {line}");
        }
        ok &= fails.is_empty();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
