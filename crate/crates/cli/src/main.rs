//! Command-line front end for the fibration pipeline.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fibrelab::config::{parse_grid, CheckName, PipelineConfig, PipelineKind};
use fibrelab::model::{derive_constants, ModelSpec};
use fibrelab::pipeline::run_pipeline;
use fibrelab::report::{emit_report, fmt_f64, Report};

#[derive(Parser)]
#[command(name = "fibrelab", version, about = "Fiberwise Kähler geometry on P1 x P1 -> P1")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and every configured check.
    Run(Common),
    /// Print the exact class constants of the model.
    Constants(Common),
    /// Grid-refinement study with a convergence-order table.
    Refine(Common),
    /// Run a single named check.
    Check {
        /// One of fiber, wp_routes, gprime, base_ma, twisted_ke, wpl_fs,
        /// volume_identities, cohomology.
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    A,
    B,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model used when no config is given.
    #[arg(long, value_enum, default_value = "a")]
    model: Preset,
    /// Grid as NxM interval counts; repeat for a refinement list.
    #[arg(long = "grid", value_parser = grid_arg)]
    grids: Vec<(usize, usize)>,
    /// Output directory for report.json and CSV profiles.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Residual tolerance at the finest grid.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_parser = pipeline_arg)]
    pipeline: Option<PipelineKind>,
}

fn grid_arg(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_grid(s).map_err(|e| e.to_string())
}

fn pipeline_arg(s: &str) -> std::result::Result<PipelineKind, String> {
    s.parse().map_err(|e: fibrelab::Error| e.to_string())
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::preset(&match self.model {
                Preset::A => ModelSpec::model_a(64),
                Preset::B => ModelSpec::model_b(64),
            }),
        };
        if !self.grids.is_empty() {
            cfg.grids = self.grids.clone();
        }
        if let Some(t) = self.tol {
            cfg.tolerances.residual_tol = t;
        }
        if let Some(p) = self.pipeline {
            cfg.pipeline = p;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(report: &Report) {
    for c in &report.checks {
        println!("{:<18} {}", c.name.as_str(), if c.pass { "PASS" } else { "FAIL" });
        for m in c.metrics.iter().filter(|m| m.pass == Some(false)) {
            let vals: Vec<String> = m.values.iter().map(|v| v.map_or("-".into(), fmt_f64)).collect();
            println!("    {} [{}]", m.name, vals.join(", "));
        }
    }
    if let Some(f) = &report.failure {
        match f.grid {
            Some((n, m)) => println!("failed at stage {} on grid {n}x{m}: {}", f.stage, f.message),
            None => println!("failed at stage {}: {}", f.stage, f.message),
        }
    }
}

fn print_orders(report: &Report) {
    let grids: Vec<String> = report.config.grids.iter().map(|(n, m)| format!("{n}x{m}")).collect();
    println!("{:<18} {}", "check", grids.windows(2).map(|w| format!("{}->{}", w[0], w[1])).collect::<Vec<_>>().join("  "));
    for row in &report.convergence {
        println!("{:<18} {}", row.check.as_str(), row.orders.join("  "));
    }
}

fn execute(cfg: &PipelineConfig) -> Result<Report> {
    let start = Instant::now();
    let report = run_pipeline(cfg);
    eprintln!("pipeline finished in {:.2}s", start.elapsed().as_secs_f64());
    if let Some(dir) = &cfg.out {
        for p in emit_report(&report, dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Constants(common) => {
            let cfg = common.load()?;
            let (n, m) = cfg.grids[0];
            let k = derive_constants(&cfg.spec(n, m))?;
            println!("{}", serde_json::to_string_pretty(&k).context("serializing constants")?);
            Ok(true)
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let report = execute(&cfg)?;
            print_summary(&report);
            Ok(report.all_pass)
        }
        Command::Refine(common) => {
            let cfg = common.load()?;
            if cfg.grids.len() < 2 {
                bail!("refine needs at least two grids");
            }
            let report = execute(&cfg)?;
            print_orders(&report);
            print_summary(&report);
            Ok(report.all_pass)
        }
        Command::Check { name, common } => {
            let mut cfg = common.load()?;
            cfg.checks = vec![name.parse::<CheckName>()?];
            let report = execute(&cfg)?;
            print_summary(&report);
            Ok(report.all_pass)
        }
    }
}
