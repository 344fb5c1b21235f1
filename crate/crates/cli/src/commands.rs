//! Dispatch of a validated [`RunConfig`] to the numerical library.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use bubble_tower::bubbles::{BallDomain, TowerConfig};
use bubble_tower::constants::{compute_constants, critical_power, to_f64, DimensionalConstants};
use bubble_tower::radial_core::{build_grid, RadialField, RadialGrid};
use bubble_tower::reduced_energy::{
    critical_d1, critical_d2, error_norm_r1, error_norm_r2, error_norm_r2_surrogate, expansion_terms_with,
    sample_inequality, LemmaTag, RobinFactor,
};
use bubble_tower::reduction_solver::{
    minimize_reduced, nehari_energy_bound, nodal_analysis, reduced_j, solve_bvp, solve_stage1, solve_stage2, BvpInit,
    BvpSolution, SearchBox,
};
use bubble_tower::Error;

use crate::args::{CommandSpec, Format, GridSpec, Init, Robin, RunConfig, Scales, Task, Term};
use crate::output::{write_csv, write_json, Record, Value};
use crate::CliError;

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<Record>,
    /// False when any row failed or did not converge.
    pub all_ok: bool,
    pub diagnostics: Vec<String>,
}

/// Shared, per-run numerical context.
struct Context {
    dim: u32,
    dom: BallDomain,
    consts: DimensionalConstants,
    scales: Scales,
    grid: GridSpec,
    box_d1: Option<(f64, f64)>,
    box_d2: Option<(f64, f64)>,
}

fn status_code(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::DimensionTooSmall(_) => "dimension_too_small",
        Error::Divergent(_) => "divergent",
        Error::QuadratureFailed { .. } => "quadrature_failed",
        Error::GridMismatch => "grid_mismatch",
        Error::DegenerateBasis(_) => "degenerate_basis",
        Error::ConfigurationInvalid(_) => "configuration_invalid",
        Error::MeshUnresolved { .. } => "mesh_unresolved",
        Error::NewtonDiverged { .. } => "newton_diverged",
        Error::ConstraintSingular => "constraint_singular",
        Error::MinimizerNotFound(_) => "minimizer_not_found",
        Error::RadiusOutsideDomain { .. } => "radius_outside_domain",
        Error::FitDegenerate(_) => "fit_degenerate",
    }
}

/// A row together with whether it counts as a success.
type Row = (Record, bool);

fn failed_row(eps: f64, e: &Error) -> (Row, String) {
    ((Record::new().with("eps", eps).with("status", status_code(e)), false), format!("eps = {eps:e}: {e}"))
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Self {
            dim: cfg.dim,
            dom: BallDomain::new(cfg.radius)?,
            consts: compute_constants(cfg.dim)?,
            scales: cfg.scales,
            grid: cfg.grid,
            box_d1: cfg.box_d1,
            box_d2: cfg.box_d2,
        })
    }

    fn radius(&self) -> f64 {
        self.dom.radius()
    }

    /// Tower configuration at `eps` from whichever scales were given.
    fn tower(&self, eps: f64) -> Result<TowerConfig, Error> {
        let cfg = match self.scales {
            Scales::Params { d1, d2 } => TowerConfig::new(self.dim, self.radius(), eps, d1, d2.unwrap_or(0.0))?,
            Scales::Deltas { delta1, delta2 } => {
                TowerConfig::from_deltas(self.dim, self.radius(), eps, delta1, delta2.unwrap_or(0.0))?
            }
            Scales::None => {
                let (d1, d2) = self.critical()?;
                TowerConfig::new(self.dim, self.radius(), eps, d1, d2)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn grid_for(&self, smallest: f64) -> Result<Arc<RadialGrid>, Error> {
        let inner = self.grid.inner_scale.unwrap_or(smallest / 100.0).min(0.5 * self.radius());
        Ok(Arc::new(build_grid(self.dim, self.radius(), inner, self.grid.nodes_per_decade, self.grid.uniform_nodes)?))
    }

    fn smallest_scale(cfg: &TowerConfig) -> f64 {
        if cfg.has_inner() {
            cfg.delta2()
        } else {
            cfg.delta1()
        }
    }

    fn critical(&self) -> Result<(f64, f64), Error> {
        let d1 = critical_d1(&self.consts, &self.dom)?;
        Ok((d1, critical_d2(&self.consts, &self.dom, d1)?))
    }

    fn search_box(&self) -> Result<(SearchBox, [f64; 2]), Error> {
        let (c1, c2) = self.critical()?;
        let b1 = self.box_d1.unwrap_or((c1 / 10.0, c1 * 10.0));
        let b2 = self.box_d2.unwrap_or((c2 / 1000.0, c2 * 1000.0));
        let start = match self.scales {
            Scales::Params { d1, d2 } => [d1, d2.unwrap_or(c2)],
            _ => [c1, c2],
        };
        let inside = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        Ok((SearchBox::new(b1, b2)?, [inside(start[0], b1), inside(start[1], b2)]))
    }
}

fn tower_columns(r: &mut Record, cfg: &TowerConfig) {
    r.push("d1", cfg.d1);
    r.push("d2", if cfg.has_inner() { Value::Float(cfg.d2) } else { Value::Missing });
    r.push("delta1", cfg.delta1());
    r.push("delta2", if cfg.has_inner() { Value::Float(cfg.delta2()) } else { Value::Missing });
}

fn expansion_row(ctx: &Context, eps: f64, robin: Robin) -> Result<Row, Error> {
    let cfg = ctx.tower(eps)?;
    let factor = match robin {
        Robin::Unit => RobinFactor::Unit,
        Robin::Robin => RobinFactor::Robin,
    };
    let rep = expansion_terms_with(&cfg, &ctx.consts, &ctx.dom, factor)?;
    let mut r = Record::new();
    r.push("eps", eps);
    tower_columns(&mut r, &cfg);
    for (k, v) in rep.to_record().into_iter().skip(1) {
        r.push(k, v);
    }
    let scale = eps.powf(ctx.consts.theta1);
    r.push("scaled_residual_after_leading", rep.residual_after_leading / scale);
    r.push("scaled_residual_after_g1", rep.residual_after_g1 / scale);
    r.push("status", "ok");
    Ok((r, true))
}

fn errnorm_row(ctx: &Context, eps: f64, term: Term) -> Result<Row, Error> {
    let cfg = ctx.tower(eps)?;
    let mut r = Record::new();
    r.push("eps", eps);
    tower_columns(&mut r, &cfg);
    match term {
        Term::R1 => {
            let grid = ctx.grid_for(cfg.delta1())?;
            let rep = error_norm_r1(eps, cfg.d1, &ctx.consts, &ctx.dom, &grid)?;
            r.push("term", "r1")
                .push("norm_projected", rep.norm_projected)
                .push("norm_unprojected", rep.norm_unprojected);
        }
        Term::R2 => {
            let grid = ctx.grid_for(Context::smallest_scale(&cfg))?;
            let rep = error_norm_r2(eps, cfg.d1, cfg.d2, &ctx.consts, &ctx.dom, &grid)?;
            r.push("term", "r2")
                .push("norm_projected", rep.norm_projected)
                .push("norm_unprojected", rep.norm_unprojected);
        }
        Term::R2Surrogate => {
            let v = error_norm_r2_surrogate(eps, cfg.d1, cfg.d2, &ctx.consts, &ctx.dom)?;
            r.push("term", "r2_surrogate").push("norm_surrogate", v);
        }
    }
    r.push("status", "ok");
    Ok((r, true))
}

fn aux_row(ctx: &Context, eps: f64) -> Result<Row, Error> {
    let cfg = ctx.tower(eps)?;
    let grid = ctx.grid_for(Context::smallest_scale(&cfg))?;
    let tol = ctx.grid.tol;
    let s1 = solve_stage1(eps, cfg.d1, &grid, &ctx.dom, tol)?;
    let n = ctx.dim as f64;
    let mut r = Record::new();
    r.push("eps", eps);
    tower_columns(&mut r, &cfg);
    r.push("norm_phi1", s1.norm_phi1);
    r.push("sup_phi1", s1.phi1.sup_norm());
    r.push("scaled_sup_phi1", s1.phi1.sup_norm() * eps.powf((n - 2.0) / (2.0 * (n - 4.0))));
    let last = if cfg.has_inner() && s1.converged {
        Some(solve_stage2(eps, cfg.d1, cfg.d2, &s1, &grid, &ctx.dom, tol)?)
    } else {
        None
    };
    let fin = last.as_ref().unwrap_or(&s1);
    r.push("norm_phi2", fin.norm_phi2);
    r.push("stage_ratio", fin.stage_ratio());
    r.push("multiplier1", fin.multipliers.first().copied());
    r.push("multiplier2", fin.multipliers.get(1).copied());
    r.push("iterations", fin.iterations);
    r.push("converged", fin.converged);
    r.push("residual_h1", fin.residual_h1);
    r.push("status", if fin.converged { "ok" } else { "not_converged" });
    Ok((r, fin.converged))
}

fn reduced_row(ctx: &Context, eps: f64) -> Result<Row, Error> {
    let cfg = ctx.tower(eps)?;
    let grid = ctx.grid_for(Context::smallest_scale(&cfg))?;
    let red = reduced_j(eps, cfg.d1, cfg.d2, &grid, &ctx.dom, ctx.grid.tol)?;
    let mut r = Record::new();
    r.push("eps", eps);
    tower_columns(&mut r, &cfg);
    r.push("reduced_energy", red.value)
        .push("ansatz_energy", red.ansatz_energy)
        .push("stage1_increment", red.stage1_increment)
        .push("full_increment", red.full_increment)
        .push("norm_phi1", red.aux.norm_phi1)
        .push("norm_phi2", red.aux.norm_phi2)
        .push("status", "ok");
    Ok((r, true))
}

struct Minimized {
    d1: f64,
    d2: f64,
    interior: bool,
    max_multiplier: f64,
    record: Record,
}

fn minimize_at(ctx: &Context, eps: f64) -> Result<Minimized, Error> {
    let (bx, start) = ctx.search_box()?;
    let lowest = TowerConfig::new(ctx.dim, ctx.radius(), eps, bx.d1.0, bx.d2.0)?.delta2();
    let grid = ctx.grid_for(lowest)?;
    let m = minimize_reduced(eps, &bx, start, &grid, &ctx.dom, ctx.grid.tol)?;
    let (c1, c2) = ctx.critical()?;
    let max_multiplier = m.multipliers_at_min.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut r = Record::new();
    r.push("eps", eps)
        .push("d1_min", m.d1_min)
        .push("d2_min", m.d2_min)
        .push("d1_critical", c1)
        .push("d2_critical", c2)
        .push("interior", m.interior)
        .push("multiplier1", m.multipliers_at_min.first().copied())
        .push("multiplier2", m.multipliers_at_min.get(1).copied())
        .push("gradient_d1", m.gradient[0])
        .push("gradient_d2", m.gradient[1])
        .push("stage_solves", m.solves);
    Ok(Minimized { d1: m.d1_min, d2: m.d2_min, interior: m.interior, max_multiplier, record: r })
}

fn minimize_row(ctx: &Context, eps: f64) -> Result<Row, Error> {
    let m = minimize_at(ctx, eps)?;
    let mut r = m.record;
    r.push("status", if m.interior { "ok" } else { "boundary_minimizer" });
    Ok((r, true))
}

fn solve_row(ctx: &Context, eps: f64, init: Init, minimize: bool, profile: Option<&Path>) -> Result<Row, Error> {
    let mut r = Record::new();
    r.push("eps", eps).push(
        "init",
        match init {
            Init::Tower => "tower",
            Init::Positive => "positive",
            Init::Zero => "zero",
        },
    );
    let mut cfg = match init {
        Init::Zero => None,
        _ if minimize => None,
        _ => Some(ctx.tower(eps)?),
    };
    if minimize {
        let m = minimize_at(ctx, eps)?;
        r.push("d1_min", m.d1)
            .push("d2_min", m.d2)
            .push("interior", m.interior)
            .push("max_multiplier", m.max_multiplier);
        cfg = Some(TowerConfig::new(ctx.dim, ctx.radius(), eps, m.d1, m.d2)?);
    }
    let (start, grid) = match (&cfg, init) {
        (Some(c), Init::Tower) => {
            (BvpInit::Ansatz { deltas: vec![c.delta1(), c.delta2()], remainder: None }, ctx.grid_for(c.delta2())?)
        }
        (Some(c), Init::Positive) => {
            (BvpInit::Ansatz { deltas: vec![c.delta1()], remainder: None }, ctx.grid_for(c.delta1())?)
        }
        _ => {
            let grid = ctx.grid_for(ctx.grid.inner_scale.map_or(1e-4 * ctx.radius(), |s| 100.0 * s))?;
            (BvpInit::Field(RadialField::zeros(&grid)), grid)
        }
    };
    let start_deltas = match &start {
        BvpInit::Ansatz { deltas, .. } => deltas.clone(),
        BvpInit::Field(_) => Vec::new(),
    };
    r.push("delta1_start", start_deltas.first().copied()).push("delta2_start", start_deltas.get(1).copied());
    let sol = solve_bvp(eps, start, &grid, ctx.grid.tol)?;
    push_solution(&mut r, ctx, &sol, eps);
    let mut ok = sol.converged;
    if init == Init::Tower {
        let c = cfg.expect("tower start has a configuration");
        let pos = solve_bvp(eps, BvpInit::Ansatz { deltas: vec![c.delta1()], remainder: None }, &grid, ctx.grid.tol)?;
        ok &= pos.converged;
        r.push("positive_energy", pos.energy).push("energy_bound", nehari_energy_bound(&sol, &pos));
    }
    r.push("status", if ok { "ok" } else { "not_converged" });
    if let Some(path) = profile {
        write_profile(path, &sol.u).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok((r, ok))
}

fn push_solution(r: &mut Record, ctx: &Context, sol: &BvpSolution, eps: f64) {
    r.push("delta1", sol.deltas.first().copied()).push("delta2", sol.deltas.get(1).copied());
    r.push("converged", sol.converged)
        .push("newton_iterations", sol.newton_iterations)
        .push("residual_h1", sol.residual_h1)
        .push("energy", sol.energy);
    let bubbles = if sol.nodal_radius.is_some() { 2.0 } else { 1.0 };
    let level = bubbles * ctx.consts.sobolev_energy() / ctx.dim as f64;
    r.push("energy_level", level).push("energy_ratio", sol.energy / level);
    r.push("nehari_residual", sol.nehari_residual)
        .push("nodal_radius", sol.nodal_radius)
        .push("fitted_delta1", sol.fitted_delta1)
        .push("fitted_delta2", sol.fitted_delta2)
        .push("sup_norm", sol.u.sup_norm());
    match nodal_analysis(sol, eps) {
        Ok(n) => {
            r.push("nodal_domain_count", n.nodal_domain_count)
                .push("sign_at_sphere1", n.sign_at_sphere1)
                .push("sign_at_sphere2", n.sign_at_sphere2)
                .push("inner_negative", n.inner_negative);
        }
        Err(_) => {
            for k in ["nodal_domain_count", "sign_at_sphere1", "sign_at_sphere2", "inner_negative"] {
                r.push(k, Value::Missing);
            }
        }
    }
}

/// Two-column `r,u` table.
pub fn write_profile(path: &Path, u: &RadialField) -> Result<(), CliError> {
    let rows: Vec<Record> =
        u.grid().nodes().iter().zip(u.values()).map(|(&r, &v)| Record::new().with("r", r).with("u", v)).collect();
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_csv(BufWriter::new(file), &rows)
}

fn task_row(ctx: &Context, task: Task, eps: f64, robin: Robin, init: Init) -> Result<Row, Error> {
    match task {
        Task::Expansion => expansion_row(ctx, eps, robin),
        Task::ErrnormR1 => errnorm_row(ctx, eps, Term::R1),
        Task::ErrnormR2 => errnorm_row(ctx, eps, Term::R2),
        Task::ErrnormR2Surrogate => errnorm_row(ctx, eps, Term::R2Surrogate),
        Task::Aux => aux_row(ctx, eps),
        Task::Reduced => reduced_row(ctx, eps),
        Task::Minimize => minimize_row(ctx, eps),
        Task::Solve => solve_row(ctx, eps, init, false, None),
    }
}

fn inequality_rows(dim: u32, samples: usize, seed: u64, lemma: Option<&str>) -> Result<Vec<Row>, CliError> {
    let tags: Vec<LemmaTag> = match lemma {
        Some(l) => vec![LemmaTag::from_label(l).map_err(|e| CliError::Usage(e.to_string()))?],
        None => LemmaTag::ALL.to_vec(),
    };
    let p = to_f64(critical_power(dim));
    let rows = tags
        .par_iter()
        .map(|&tag| -> Result<Row, Error> {
            let first = sample_inequality(tag, p, samples, seed)?;
            let second = sample_inequality(tag, p, samples, seed.wrapping_add(1))?;
            let change = (second.max_ratio - first.max_ratio) / first.max_ratio;
            let stable = first.all_finite && second.all_finite && change.abs() <= 0.05;
            let r = Record::new()
                .with("lemma", tag.label())
                .with("dim", dim)
                .with("p", p)
                .with("samples", samples)
                .with("seed", seed)
                .with("max_ratio", first.max_ratio)
                .with("rerun_max_ratio", second.max_ratio)
                .with("rerun_rel_change", change)
                .with("all_finite", first.all_finite && second.all_finite)
                .with("stable", stable)
                .with("status", if stable { "ok" } else { "unstable" });
            Ok((r, stable))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows)
}

/// Columns of every row in first-seen order; absent cells become missing.
fn normalize(rows: Vec<Record>) -> Vec<Record> {
    let mut keys: Vec<String> = Vec::new();
    for r in &rows {
        for (k, _) in &r.0 {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    // Keep `status` last.
    if let Some(i) = keys.iter().position(|k| k == "status") {
        let s = keys.remove(i);
        keys.push(s);
    }
    rows.into_iter()
        .map(|r| Record(keys.iter().map(|k| (k.clone(), r.get(k).cloned().unwrap_or(Value::Missing))).collect()))
        .collect()
}

fn emit(cfg: &RunConfig, rows: &[Record], as_array: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut sink: Box<dyn Write + '_> = match &cfg.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?))
        }
        None => Box::new(stdout),
    };
    match cfg.format {
        Format::Csv => write_csv(&mut sink, rows)?,
        Format::Json => write_json(&mut sink, rows, as_array)?,
    }
    sink.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn collect(results: Vec<(f64, Result<Row, Error>)>) -> (Vec<Record>, bool, Vec<String>) {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut diagnostics = Vec::new();
    for (eps, res) in results {
        let (row, good) = match res {
            Ok(row) => row,
            Err(e) => {
                let (row, msg) = failed_row(eps, &e);
                diagnostics.push(msg);
                row
            }
        };
        ok &= good;
        rows.push(row);
    }
    (rows, ok, diagnostics)
}

/// Runs `cfg`, writing its table to `cfg.out` or `stdout`.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let mut eps = cfg.eps.clone();
    eps.sort_by(f64::total_cmp);
    let per_eps = |f: &(dyn Fn(f64) -> Result<Row, Error> + Sync)| -> Vec<(f64, Result<Row, Error>)> {
        eps.par_iter().map(|&e| (e, f(e))).collect()
    };
    let (rows, all_ok, diagnostics, as_array) = match &cfg.command {
        CommandSpec::Constants => {
            let mut r = Record::new();
            for (k, v) in ctx.consts.to_record() {
                if k == "dim" {
                    r.push(k, cfg.dim);
                } else {
                    r.push(k, v);
                }
            }
            r.push("status", "ok");
            (vec![r], true, Vec::new(), false)
        }
        CommandSpec::Expansion { robin } => {
            let (rows, ok, d) = collect(per_eps(&|e| expansion_row(&ctx, e, *robin)));
            (rows, ok, d, eps.len() > 1)
        }
        CommandSpec::Errnorm { term } => {
            let (rows, ok, d) = collect(per_eps(&|e| errnorm_row(&ctx, e, *term)));
            (rows, ok, d, eps.len() > 1)
        }
        CommandSpec::Aux => {
            let (rows, ok, d) = collect(per_eps(&|e| aux_row(&ctx, e)));
            (rows, ok, d, eps.len() > 1)
        }
        CommandSpec::Solve { init, minimize, profile } => {
            let (rows, ok, d) = collect(per_eps(&|e| solve_row(&ctx, e, *init, *minimize, profile.as_deref())));
            (rows, ok, d, false)
        }
        CommandSpec::Sweep { task, robin, init } => {
            let (rows, ok, d) = collect(per_eps(&|e| task_row(&ctx, *task, e, *robin, *init)));
            (rows, ok, d, true)
        }
        CommandSpec::CheckInequalities { samples, seed, lemma } => {
            let rows = inequality_rows(cfg.dim, *samples, *seed, lemma.as_deref())?;
            let ok = rows.iter().all(|(_, g)| *g);
            let multi = rows.len() > 1;
            (rows.into_iter().map(|(r, _)| r).collect(), ok, Vec::new(), multi)
        }
    };
    let rows = normalize(rows);
    emit(cfg, &rows, as_array, stdout)?;
    Ok(Outcome { rows, all_ok, diagnostics })
}
