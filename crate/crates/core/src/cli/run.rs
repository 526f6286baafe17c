//! Subcommand execution and the process-level contract (exit codes, repro
//! bundles, one-line summaries).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use super::config::{resolve, ExperimentConfig, Format, Subcommand};
use super::output::{serialize_report, write_atomic, BenchRow, Meta, Report, TOOL};
use crate::augment::{augment_set, lemma_chain_report, witness_family, AugmentPlan};
use crate::basis::{rasterize_element, Basis, BasisFamily, ElementSpec};
use crate::error::{Error, Result};
use crate::grid::{CellSet, GridGeometry};
use crate::halo::{
    continuity_scan, curve_from_candidates, exact_discrete_halo, halo_curve, halo_ratio, HaloCurve,
    Method, SearchSettings,
};
use crate::maximal::{maximal_field, superlevel, superlevel_direct};
use crate::prefix::PrefixCounts;
use crate::rational::{format_rational, to_decimal, Rational};
use crate::tauber::{
    chained_bound_report, containment_experiment, halo_orbit, k_alpha_gamma, strict_gap_report,
    IterationParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "halolab",
    version,
    about = "Exact discrete experiments with geometric maximal operators"
)]
pub struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// JSON experiment configuration; built-in defaults fill missing fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. `--set geometry.extent=[24]` or `--set alpha=1/3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Result of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            Failure::Core(Error::Internal(_)) => EXIT_INTERNAL,
            Failure::Core(_) => EXIT_INVALID,
            Failure::Io(..) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e @ Error::Invalid { .. }) => write!(f, "invalid config: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

struct Ctx {
    sub: Subcommand,
    cfg: ExperimentConfig,
    meta: Meta,
    files: Vec<PathBuf>,
}

impl Ctx {
    fn emit(
        &mut self,
        name: &str,
        report: &Report<'_>,
        format: Format,
    ) -> std::result::Result<PathBuf, Failure> {
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = Path::new(&self.cfg.out_dir).join(format!("{name}.{ext}"));
        let bytes = serialize_report(report, format, &self.meta)?;
        write_atomic(&path, &bytes).map_err(|e| Failure::Io(path.clone(), e))?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn geometry(&self) -> Result<Arc<GridGeometry>> {
        self.cfg.geometry.build(self.cfg.budget.cells)
    }

    fn basis(&self, geom: &Arc<GridGeometry>) -> Result<Basis> {
        Ok(
            Basis::new(&self.cfg.family, geom, self.cfg.budget.elements)?
                .with_workers(self.cfg.resolved_workers()),
        )
    }

    fn set(&self, geom: &Arc<GridGeometry>) -> Result<CellSet> {
        self.cfg.require(&self.cfg.set, "set")?.build(geom)
    }
}

fn q(r: &Rational) -> String {
    format!("{} (~{})", format_rational(r), to_decimal(r, 6))
}

/// Loads, resolves and runs one subcommand.
pub fn execute(
    sub: Subcommand,
    config: Option<&Path>,
    overrides: &[String],
) -> std::result::Result<Outcome, Failure> {
    let user = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::invalid("config", format!("cannot read {}: {e}", p.display()))
            })?;
            Some(
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| Error::invalid("config", e.to_string()))?,
            )
        }
        None => None,
    };
    let (cfg, resolved) = resolve(sub, user, overrides)?;
    let mut ctx = Ctx {
        sub,
        meta: Meta {
            subcommand: sub.name().to_string(),
            config: resolved,
        },
        cfg,
        files: Vec::new(),
    };
    let result = dispatch(&mut ctx);
    if let Err(Failure::Core(Error::Internal(msg))) = &result {
        write_repro(&ctx, msg);
    }
    let summary = result?;
    Ok(Outcome {
        summary,
        files: ctx.files,
    })
}

fn write_repro(ctx: &Ctx, msg: &str) {
    let doc = json!({
        "tool": TOOL,
        "subcommand": ctx.sub.name(),
        "error": msg,
        "config": ctx.meta.config,
    });
    let path = Path::new(&ctx.cfg.out_dir).join(format!("repro_{}.json", ctx.sub.name()));
    let text = serde_json::to_string_pretty(&doc).unwrap_or_default();
    match write_atomic(&path, text.as_bytes()) {
        Ok(()) => eprintln!("repro bundle written to {}", path.display()),
        Err(e) => eprintln!("could not write repro bundle {}: {e}", path.display()),
    }
}

fn dispatch(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    match ctx.sub {
        Subcommand::Maximal => run_maximal(ctx),
        Subcommand::HaloCurve => run_halo_curve(ctx),
        Subcommand::JumpDemo => run_jump_demo(ctx),
        Subcommand::Iterate => run_iterate(ctx),
        Subcommand::AugmentCheck => run_augment(ctx),
        Subcommand::StrictGap => run_strict_gap(ctx),
        Subcommand::Oracle => run_oracle(ctx),
        Subcommand::Bench => run_bench(ctx),
    }
}

fn run_maximal(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let e = ctx.set(&geom)?;
    let field = maximal_field(&e, &basis)?;
    let top = field.values().max().unwrap_or_else(Rational::zero);
    let mut summary = format!(
        "maximal: max M = {} over {} cells, {} uncovered",
        q(&top),
        geom.cell_count(),
        field.uncovered_count()
    );
    if let Some(theta) = &ctx.cfg.theta {
        let strict = ctx.cfg.strict.unwrap_or(true);
        let level = superlevel(&field, theta, strict)?;
        summary.push_str(&format!(
            "; |{{M {} {}}}| = {}",
            if strict { ">" } else { ">=" },
            format_rational(theta),
            format_rational(&level.measure())
        ));
    }
    let path = ctx.emit("field", &Report::Field(&field), ctx.cfg.format)?;
    Ok(format!("{summary} -> {}", path.display()))
}

fn settings(cfg: &ExperimentConfig) -> SearchSettings {
    let budget = if cfg.strategy == Method::Exhaustive {
        cfg.budget.subsets
    } else {
        cfg.budget.search
    };
    let mut s = SearchSettings::new(cfg.strategy, cfg.seed, budget);
    s.pool = cfg.pool;
    s
}

fn emit_curve(
    ctx: &mut Ctx,
    name: &str,
    curve: &HaloCurve,
) -> std::result::Result<PathBuf, Failure> {
    let path = ctx.emit(name, &Report::Curve(curve), ctx.cfg.format)?;
    if curve.points.len() >= 2 {
        let scan = continuity_scan(curve)?;
        let doc = json!({
            "max_increment": format_rational(&scan.max_increment),
            "max_at": {
                "u_left": format_rational(&scan.increments[scan.max_at].u_left),
                "u_right": format_rational(&scan.increments[scan.max_at].u_right),
            },
            "left_endpoint": {
                "u": format_rational(&scan.left_endpoint.0),
                "ratio": format_rational(&scan.left_endpoint.1),
            },
            "increments": scan.increments.iter().map(|i| json!({
                "u_left": format_rational(&i.u_left),
                "u_right": format_rational(&i.u_right),
                "delta": format_rational(&i.delta),
            })).collect::<Vec<_>>(),
        });
        ctx.emit(
            &format!("{name}_scan"),
            &Report::Document(doc),
            Format::Json,
        )?;
    }
    Ok(path)
}

fn run_halo_curve(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let curve = halo_curve(&ctx.cfg.u_grid, &basis, &settings(&ctx.cfg))?;
    let path = emit_curve(ctx, "curve", &curve)?;
    let first = &curve.points[0];
    Ok(format!(
        "halo-curve: {} points, ratio at u={} is {} -> {}",
        curve.points.len(),
        format_rational(&first.u),
        q(&first.ratio),
        path.display()
    ))
}

fn run_jump_demo(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let a = ctx.set(&geom)?;
    let curve = curve_from_candidates(
        &ctx.cfg.u_grid,
        &[a],
        &basis,
        Method::Structured,
        ctx.cfg.seed,
    )?;
    let path = emit_curve(ctx, "jump_demo_curve", &curve)?;
    let first = &curve.points[0];
    Ok(format!(
        "jump-demo: ratio at u={} is {} -> {}",
        format_rational(&first.u),
        q(&first.ratio),
        path.display()
    ))
}

fn element_from(
    cfg: &ExperimentConfig,
    geom: &GridGeometry,
) -> Result<Option<crate::basis::BasisElement>> {
    cfg.element
        .as_ref()
        .map(|boxes| rasterize_element(&ElementSpec::Boxes(boxes.clone()), geom))
        .transpose()
}

fn run_iterate(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let e = ctx.set(&geom)?;
    let alpha = ctx.cfg.require(&ctx.cfg.alpha, "alpha")?.clone();
    let gamma = ctx.cfg.require(&ctx.cfg.gamma, "gamma")?.clone();
    let params = IterationParams::new(alpha, gamma, geom.dimension())?;
    let big_k = k_alpha_gamma(&params.alpha, &params.gamma, params.n)?;
    let k = ctx.cfg.k.unwrap_or(big_k as usize);
    let orbit = halo_orbit(&e, &params.gamma, k, &basis)?;
    let path = ctx.emit("orbit", &Report::Orbit(&orbit), ctx.cfg.format)?;
    let mut doc = json!({
        "k_alpha_gamma": big_k,
        "steps": k,
        "monotone": orbit.is_monotone(),
    });
    let mut summary = format!(
        "iterate: K = {big_k}, |H^{k}| = {} (from |E| = {}) -> {}",
        format_rational(orbit.measures.last().expect("nonempty orbit")),
        format_rational(&orbit.measures[0]),
        path.display()
    );
    if let Some(r) = element_from(&ctx.cfg, &geom)? {
        let (report, _) = containment_experiment(&r, &e, &params, &basis)?;
        summary.push_str(&format!("; R contained at step {:?}", report.contained_at));
        doc["containment"] =
            serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?;
    }
    if let Some(c) = &ctx.cfg.c_probe {
        let chain = chained_bound_report(&e, &params, &basis, c)?;
        summary.push_str(&format!("; chained bound pass = {}", chain.pass));
        doc["chained_bound"] =
            serde_json::to_value(&chain).map_err(|e| Error::Internal(e.to_string()))?;
    }
    ctx.emit("iterate", &Report::Document(doc), Format::Json)?;
    Ok(summary)
}

fn run_augment(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let e = ctx.set(&geom)?;
    let alpha = ctx.cfg.require(&ctx.cfg.alpha, "alpha")?.clone();
    let eps = ctx.cfg.require(&ctx.cfg.eps, "eps")?.clone();
    let plan = AugmentPlan::new(alpha, eps)?;
    let family = witness_family(&e, &plan, &basis)?;
    let aug = augment_set(&e, &family.elements, &plan)?;
    let report = lemma_chain_report(&e, &aug.e_tilde, &family.elements, &plan, &basis)?;
    let doc = json!({
        "c": format_rational(&plan.c),
        "target_density": format_rational(&plan.target_density),
        "e_cells": e.len(),
        "union_cells": family.union.len(),
        "e_tilde_hex": aug.e_tilde.to_hex(),
        "e_prime_hex": aug.e_prime.to_hex(),
        "report": serde_json::to_value(&report).map_err(|e| Error::Internal(e.to_string()))?,
    });
    let path = ctx.emit("augment", &Report::Document(doc), Format::Json)?;
    Ok(format!(
        "augment-check: {} witnesses, |E'| = {} cells, all witnesses pass = {}, size bound pass = {} -> {}",
        report.witness_count,
        report.e_prime_cells,
        report.all_witnesses_pass(),
        report.size_bound.pass_with_rounding,
        path.display()
    ))
}

fn run_strict_gap(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let shape = ctx.cfg.require(&ctx.cfg.shape, "shape")?.clone();
    let gamma = ctx.cfg.require(&ctx.cfg.gamma, "gamma")?.clone();
    if ctx.cfg.ladder.is_empty() {
        return Err(Error::invalid("ladder", "needs at least one rung").into());
    }
    let domain = ctx.cfg.domain.clone().unwrap_or_else(Rational::one);
    if domain <= Rational::zero() {
        return Err(Error::invalid("domain", "must be positive").into());
    }
    let dims = ctx.cfg.geometry.extent.len();
    let ladder: Vec<GridGeometry> = ctx
        .cfg
        .ladder
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::invalid("ladder", "rungs must be positive"));
            }
            let h = &domain / Rational::from_integer(n.into());
            GridGeometry::with_budget(&vec![n; dims], h, ctx.cfg.budget.cells)
        })
        .collect::<Result<_>>()?;
    let report = strict_gap_report(
        &shape,
        &gamma,
        &ctx.cfg.family,
        &ladder,
        ctx.cfg.budget.elements,
        ctx.cfg.resolved_workers(),
    )?;
    let path = ctx.emit("gap_ladder", &Report::Gap(&report), ctx.cfg.format)?;
    let gaps: Vec<String> = report
        .rungs
        .iter()
        .map(|r| r.gap_cells.to_string())
        .collect();
    Ok(format!(
        "strict-gap: gap cells per rung [{}], {} skipped -> {}",
        gaps.join(", "),
        report.notices.len(),
        path.display()
    ))
}

fn run_oracle(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let u = ctx.cfg.require(&ctx.cfg.u, "u")?.clone();
    let (ratio, witness) = exact_discrete_halo(&u, &basis, ctx.cfg.budget.subsets)?;
    let doc = json!({
        "u": format_rational(&u),
        "ratio": format_rational(&ratio),
        "ratio_dec": to_decimal(&ratio, 12),
        "subsets": (1u64 << geom.cell_count()) - 1,
        "witness_cells": witness.iter().collect::<Vec<_>>(),
        "witness_hex": witness.to_hex(),
    });
    let path = ctx.emit("oracle", &Report::Document(doc), Format::Json)?;
    Ok(format!(
        "oracle: exact halo at u={} is {} -> {}",
        format_rational(&u),
        q(&ratio),
        path.display()
    ))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64().max(1e-9)))
}

fn run_bench(ctx: &mut Ctx) -> std::result::Result<String, Failure> {
    let geom = ctx.geometry()?;
    let basis = ctx.basis(&geom)?;
    let e = ctx.set(&geom)?;
    let cells = geom.cell_count();
    let theta = ctx
        .cfg
        .theta
        .clone()
        .unwrap_or_else(|| Rational::new(1.into(), 2.into()));
    let row = |kernel: &str, cells: usize, elements: u64, secs: f64| BenchRow {
        kernel: kernel.to_string(),
        cells,
        elements,
        seconds: secs,
        cells_per_sec: cells as f64 / secs,
    };
    let mut rows = Vec::new();
    let (_, t) = timed(|| Ok(PrefixCounts::new(&e)))?;
    rows.push(row("prefix_counts", cells, 0, t));
    let (_, t) = timed(|| maximal_field(&e, &basis))?;
    rows.push(row("maximal_field", cells, basis.len(), t));
    let (_, t) = timed(|| superlevel_direct(&e, &basis, &theta, true))?;
    rows.push(row("superlevel_direct", cells, basis.len(), t));
    if !e.is_empty() {
        let u = Rational::from_integer(2.into());
        let (_, t) = timed(|| halo_ratio(&e, &u, &basis))?;
        rows.push(row("halo_ratio", cells, basis.len(), t));
    }
    let small = Arc::new(GridGeometry::line(16)?);
    let small_basis = Basis::new(
        &BasisFamily::intervals(1, None),
        &small,
        ctx.cfg.budget.elements,
    )?;
    let u = Rational::new(5.into(), 2.into());
    let (_, t) = timed(|| exact_discrete_halo(&u, &small_basis, ctx.cfg.budget.subsets))?;
    rows.push(row("exhaustive_n16", 16, small_basis.len(), t));
    let path = ctx.emit("bench", &Report::Bench(&rows), ctx.cfg.format)?;
    let best = rows
        .iter()
        .find(|r| r.kernel == "superlevel_direct")
        .map_or(0.0, |r| r.cells_per_sec);
    Ok(format!(
        "bench: superlevel_direct {:.0} cells/sec on {cells} cells -> {}",
        best,
        path.display()
    ))
}

/// Full command-line entry point; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(args.subcommand, args.config.as_deref(), &args.overrides) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            EXIT_OK
        }
        Err(f) => {
            eprintln!("halolab {}: {f}", args.subcommand.name());
            f.exit_code()
        }
    }
}
