//! End-to-end pipeline: constants, reference geometry, fiber families,
//! `ω_{WP,λ}`, `G'`, the base metrics and every residual check, repeated
//! over a list of grids.

use crate::basespace::{
    adjoint_defect, check_g_descends, compute_gprime, pushforward, solve_base_ma, source_volume, twisted_ke_field,
    twisted_ke_residual, uniqueness_probe, volume_identity_residual, wpl_fs_field, wpl_fs_residual, BaseMetricSolution,
    BaseVariant, VolumeIdentity,
};
use crate::cohomology::{check_base_identity, check_terminal_class, check_total_identity, class_gap};
use crate::config::{CheckName, PipelineConfig, PipelineKind};
use crate::error::Error;
use crate::fiberwise::{solve_ske, solve_spr, verify_fiber_family, FiberFamilySolution, FiberKind};
use crate::field::RadialField;
use crate::grid::Axis;
use crate::model::{build_reference, derive_constants, DerivedConstants, ReferenceGeometry};
use crate::newton::NewtonOptions;
use crate::report::{CheckRecord, MetricRecord, Profile, Report, Rule, StageFailure};
use crate::wpform::{
    curvature_of_weight, route_gap, volume_family_from_sections, wp_from_residual, wp_from_sections,
    SectionFamilySpec, WeightKind, WpResult, DEFAULT_PULLBACK_TOL,
};

impl PipelineKind {
    pub fn kinds(self) -> Vec<FiberKind> {
        match self {
            PipelineKind::Spr => vec![FiberKind::Spr],
            PipelineKind::Ske => vec![FiberKind::Ske],
            PipelineKind::Both => vec![FiberKind::Spr, FiberKind::Ske],
        }
    }
}

struct Metric {
    check: CheckName,
    name: String,
    rule: Rule,
    value: f64,
}

#[derive(Default)]
struct GridOutput {
    metrics: Vec<Metric>,
    profiles: Vec<Profile>,
}

impl GridOutput {
    fn push(&mut self, check: CheckName, name: impl Into<String>, rule: Rule, value: f64) {
        self.metrics.push(Metric {
            check,
            name: name.into(),
            rule,
            value,
        });
    }
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn stage<T>(name: &'static str, r: crate::error::Result<T>) -> Staged<T> {
    r.map_err(|e| (name, e))
}

struct KindRun {
    kind: FiberKind,
    fiber: FiberFamilySolution,
    wp: Option<(WpResult, WpResult)>,
    push: RadialField,
    base: Vec<BaseMetricSolution>,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn run_grid(config: &PipelineConfig, consts: &DerivedConstants, grid: (usize, usize)) -> Staged<GridOutput> {
    use CheckName::*;
    let wants = |c: CheckName| config.checks.contains(&c);
    let need_wp = [WpRoutes, TwistedKe, WplFs, Cohomology].into_iter().any(wants);
    let need_base = [BaseMa, TwistedKe, VolumeIdentities].into_iter().any(wants);
    let tol = config.tolerances;
    let newton = NewtonOptions {
        tol: tol.newton_tol,
        ..NewtonOptions::default()
    };
    let refine = Rule::Refine(tol.residual_tol);
    let quad = Rule::Bound(tol.quadrature_tol);

    let spec = config.spec(grid.0, grid.1);
    let re = stage("build_reference", build_reference(&spec, consts))?;
    let mut out = GridOutput::default();
    let mut runs: Vec<KindRun> = Vec::new();

    for kind in config.pipeline.kinds() {
        let k = kind.name();
        let fiber = match kind {
            FiberKind::Spr => stage("fiber_spr", solve_spr(&re))?,
            FiberKind::Ske => stage("fiber_ske", solve_ske(&re))?,
        };
        if wants(Fiber) {
            let rep = stage("fiber_check", verify_fiber_family(&fiber, &re))?;
            out.push(Fiber, format!("{k}.residual"), refine, rep.residual_sup);
            out.push(Fiber, format!("{k}.volume_defect"), quad, rep.volume_defect);
            out.push(Fiber, format!("{k}.potential_defect"), refine, rep.potential_defect);
            out.push(Fiber, format!("{k}.positivity_margin"), Rule::Info, rep.positivity_margin);
            if let Some(h) = rep.hske_residual {
                out.push(Fiber, format!("{k}.hske_residual"), refine, h);
                let iters = fiber.newton_iterations.iter().copied().max().unwrap_or(0);
                out.push(Fiber, format!("{k}.max_newton_iterations"), Rule::Info, iters as f64);
            }
        }
        let wp = if need_wp {
            let weight = match kind {
                FiberKind::Spr => WeightKind::HL,
                FiberKind::Ske => WeightKind::HSke,
            };
            let fam = stage(
                "wp_sections",
                volume_family_from_sections(&re, &SectionFamilySpec::canonical(&re, weight), Some(&fiber)),
            )?;
            let sections = stage("wp_sections", wp_from_sections(&fam))?;
            let residual = stage(
                "wp_residual",
                wp_from_residual(&re, &fiber, &re.eta, Some(&fam), DEFAULT_PULLBACK_TOL),
            )?;
            if wants(WpRoutes) {
                out.push(WpRoutes, format!("{k}.route_gap"), refine, route_gap(&sections, &residual));
                out.push(
                    WpRoutes,
                    format!("{k}.verticality_defect"),
                    refine,
                    residual.verticality_defect.unwrap_or(f64::NAN),
                );
                if let Some(mu) = &residual.log_norm {
                    let gap = curvature_of_weight(mu)
                        .zip_with(&sections.wp_base, |a, b| a - b)
                        .sup_norm();
                    out.push(WpRoutes, format!("{k}.log_mu_gap"), refine, gap);
                }
                out.push(WpRoutes, format!("{k}.wp_min"), Rule::Info, sections.wp_base.min());
                out.push(WpRoutes, format!("{k}.wp_max"), Rule::Info, sections.wp_base.max());
            }
            Some((sections, residual))
        } else {
            None
        };
        let omega_src = source_volume(&re, &fiber);
        let push = pushforward(&omega_src);

        let mut base = Vec::new();
        if wants(Gprime) || need_base {
            let gp = stage("gprime", compute_gprime(&re, &fiber, tol.lp_epsilon))?;
            if wants(Gprime) {
                let norm_rule = match kind {
                    FiberKind::Spr => quad,
                    FiberKind::Ske => Rule::Info,
                };
                out.push(Gprime, format!("{k}.normalization_defect"), norm_rule, gp.normalization_defect);
                out.push(Gprime, format!("{k}.adjoint_defect"), quad, adjoint_defect(&re.grid, &omega_src));
                out.push(Gprime, format!("{k}.delta_lower"), Rule::Info, gp.delta_lower);
                for (p, v) in &gp.lp_norms {
                    out.push(Gprime, format!("{k}.lp_norm_p{p}"), Rule::Info, *v);
                }
                let d = stage("gprime", check_g_descends(&re, &fiber, &gp))?;
                out.push(Gprime, format!("{k}.descent_vertical"), refine, d.vertical_constancy_defect);
                out.push(Gprime, format!("{k}.descent_pullback"), refine, d.pullback_defect);
            }
            if need_base {
                for variant in [BaseVariant::B, BaseVariant::Bprime] {
                    let sol = stage("base_ma", solve_base_ma(&gp, variant, consts, newton, None))?;
                    if wants(BaseMa) {
                        let v = format!("{k}.{}", variant.name());
                        let gap = stage("base_ma", uniqueness_probe(&gp, variant, consts, newton))?;
                        out.push(BaseMa, format!("{v}.forward_residual"), Rule::Bound(tol.newton_tol), sol.forward_residual);
                        out.push(BaseMa, format!("{v}.integrated_defect"), quad, sol.integrated_defect);
                        out.push(BaseMa, format!("{v}.uniqueness_gap"), quad, gap);
                        out.push(BaseMa, format!("{v}.monotone"), Rule::Flag, flag(sol.min_zeroth_order > 0.0));
                        out.push(BaseMa, format!("{v}.min_zeroth_order"), Rule::Info, sol.min_zeroth_order);
                        out.push(BaseMa, format!("{v}.positivity_margin"), Rule::Info, sol.positivity_margin);
                        out.push(BaseMa, format!("{v}.newton_iterations"), Rule::Info, sol.newton.iterations as f64);
                        out.push(BaseMa, format!("{v}.rho_sup"), Rule::Info, sol.rho.sup_norm());
                    }
                    base.push(sol);
                }
            }
        }
        runs.push(KindRun {
            kind,
            fiber,
            wp,
            push,
            base,
        });
    }

    for run in &runs {
        let k = run.kind.name();
        if let Some((sections, residual)) = &run.wp {
            if wants(TwistedKe) {
                for sol in &run.base {
                    let v = sol.variant.name();
                    let r = stage("twisted_ke", twisted_ke_residual(sol, sections, consts))?;
                    out.push(TwistedKe, format!("{k}.{v}.relative_residual"), refine, r.relative);
                    let r = stage("twisted_ke", twisted_ke_residual(sol, residual, consts))?;
                    out.push(TwistedKe, format!("{k}.{v}.relative_residual_residual_route"), refine, r.relative);
                }
            }
            if wants(WplFs) {
                let r = stage("wpl_fs", wpl_fs_residual(&re, &run.push, sections))?;
                out.push(WplFs, format!("{k}.relative_residual"), refine, r.relative);
            }
            if wants(Cohomology) {
                let b = check_base_identity(sections, consts);
                let t = check_total_identity(sections, consts);
                out.push(Cohomology, format!("{k}.base_identity_relative"), refine, b.relative_defect);
                out.push(Cohomology, format!("{k}.total_base_pairing_defect"), refine, t.base_defect);
                out.push(Cohomology, format!("{k}.fiber_pairing_exact"), Rule::Flag, flag(t.fiber_exact));
                out.push(
                    Cohomology,
                    format!("{k}.route_class_gap"),
                    refine,
                    class_gap(&sections.wp_base, &residual.wp_base),
                );
                out.push(Cohomology, format!("{k}.wp_integral"), Rule::Info, b.integral);
            }
        }
        if wants(VolumeIdentities) {
            for sol in &run.base {
                let which = VolumeIdentity::ALL
                    .into_iter()
                    .find(|w| w.fiber_kind() == run.kind && w.base_variant() == sol.variant)
                    .expect("every pair has an identity");
                let r = stage("volume_identities", volume_identity_residual(which, &re, &run.fiber, sol))?;
                let v = format!("v{}", r.which);
                out.push(VolumeIdentities, format!("{v}.residual"), refine, r.residual);
                out.push(VolumeIdentities, format!("{v}.gap_difference"), Rule::Info, r.gap_difference);
                out.push(VolumeIdentities, format!("{v}.gap_fiber"), Rule::Info, r.gap_fiber);
                out.push(VolumeIdentities, format!("{v}.gap_base"), Rule::Info, r.gap_base);
            }
        }
        out.profiles.push(profile(&re, run, consts, grid)?);
    }
    if wants(Cohomology) {
        let exact = check_terminal_class(consts).is_ok();
        out.push(Cohomology, "terminal_class_exact", Rule::Flag, flag(exact));
    }
    if wants(Fiber) && runs.len() == 2 {
        let gap = runs[0].fiber.vertical.sub(&runs[1].fiber.vertical).sup_norm();
        out.push(Fiber, "spr_ske_vertical_gap", Rule::Info, gap);
    }
    Ok(out)
}

fn profile(re: &ReferenceGeometry, run: &KindRun, consts: &DerivedConstants, grid: (usize, usize)) -> Staged<Profile> {
    let mut columns = vec![("x_b".to_string(), re.grid.nodes(Axis::Base).to_vec())];
    columns.push(("pushforward".into(), run.push.values.clone()));
    if let Some((sections, residual)) = &run.wp {
        columns.push(("wp_sections".into(), sections.wp_base.values.clone()));
        columns.push(("wp_residual".into(), residual.wp_base.values.clone()));
        columns.push((
            "wpl_fs_residual".into(),
            stage("profiles", wpl_fs_field(re, &run.push, sections))?.values,
        ));
    }
    let gprime = run.push.map(|p| p / (re.volume_v * re.kappa()));
    columns.push(("gprime".into(), gprime.values));
    for sol in &run.base {
        let v = sol.variant.name();
        columns.push((format!("rho_{v}"), sol.rho.values.clone()));
        columns.push((format!("omega_{v}"), sol.omega.values.clone()));
        if let Some((sections, _)) = &run.wp {
            columns.push((
                format!("twisted_ke_{v}_residual"),
                stage("profiles", twisted_ke_field(sol, sections, consts))?.values,
            ));
        }
    }
    Ok(Profile {
        file_stem: format!("profile_{}_{}x{}", run.kind.name(), grid.0, grid.1),
        columns,
    })
}

/// Runs every requested check on every grid. Module errors end the run and
/// are recorded with their stage; the report is returned either way.
pub fn run_pipeline(config: &PipelineConfig) -> Report {
    let (nf, nb) = config.grids[0];
    let consts = match derive_constants(&config.spec(nf, nb)) {
        Ok(c) => c,
        Err(e) => {
            let failure = StageFailure {
                stage: "derive_constants".into(),
                grid: None,
                message: e.to_string(),
            };
            let checks = config.checks.iter().map(|&c| CheckRecord::new(c, Vec::new())).collect();
            return Report::new(config, None, checks, Some(failure), Vec::new());
        }
    };
    let mut per_grid: Vec<GridOutput> = Vec::new();
    let mut failure = None;
    for &g in &config.grids {
        match run_grid(config, &consts, g) {
            Ok(o) => per_grid.push(o),
            Err((stage, e)) => {
                failure = Some(StageFailure {
                    stage: stage.into(),
                    grid: Some(g),
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    let n = config.grids.len();
    let checks = config
        .checks
        .iter()
        .map(|&check| {
            let mut names: Vec<(String, Rule)> = Vec::new();
            for o in &per_grid {
                for m in o.metrics.iter().filter(|m| m.check == check) {
                    if !names.iter().any(|(n, _)| *n == m.name) {
                        names.push((m.name.clone(), m.rule));
                    }
                }
            }
            let metrics = names
                .into_iter()
                .map(|(name, rule)| {
                    let mut values = vec![None; n];
                    for (i, o) in per_grid.iter().enumerate() {
                        values[i] = o.metrics.iter().find(|m| m.check == check && m.name == name).map(|m| m.value);
                    }
                    MetricRecord::new(name, rule, values)
                })
                .collect();
            CheckRecord::new(check, metrics)
        })
        .collect();
    let profiles = per_grid.into_iter().flat_map(|o| o.profiles).collect();
    Report::new(config, Some(consts), checks, failure, profiles)
}
