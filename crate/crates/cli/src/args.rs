//! Command-line flags, the optional `key = value` config file, and the
//! validated [`RunConfig`] built from both.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bubble-tower",
    version,
    about = "Sign-changing bubble towers of the Brezis-Nirenberg problem in a ball"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimensional constants, closed forms beside quadrature.
    #[command(args_override_self = true)]
    Constants(ConstantsArgs),
    /// Energy expansion of the tower ansatz.
    #[command(args_override_self = true)]
    Expansion(ExpansionArgs),
    /// Dual norms of the error terms.
    #[command(args_override_self = true)]
    Errnorm(ErrnormArgs),
    /// The two auxiliary stages.
    #[command(args_override_self = true)]
    Aux(AuxArgs),
    /// Full nonlinear radial solve.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Any sweepable computation over a list of eps values.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Randomized checks of the elementary power inequalities.
    #[command(args_override_self = true)]
    CheckInequalities(InequalityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Robin {
    /// No Robin factor on the interaction term.
    Unit,
    /// Multiply the interaction term by the Robin function at the centre.
    Robin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Term {
    R1,
    R2,
    R2Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    /// Two-bubble tower from both scales.
    Tower,
    /// One positive bubble from the first scale.
    Positive,
    /// The zero function.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Expansion,
    ErrnormR1,
    ErrnormR2,
    ErrnormR2Surrogate,
    Aux,
    Reduced,
    Minimize,
    Solve,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Space dimension N (at least 7).
    #[arg(long, default_value_t = 7)]
    pub dim: u32,
    /// Radius of the ball.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Table format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of `key = value` lines supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EpsArgs {
    /// Single eps value.
    #[arg(long, conflicts_with = "eps_geom")]
    pub eps: Option<f64>,
    /// Geometric sequence `start:stop:count`.
    #[arg(long)]
    pub eps_geom: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Outer parameter, `delta1 = d1 eps^alpha1` [default without any scale: d1bar, d2bar].
    #[arg(long)]
    pub d1: Option<f64>,
    /// Inner parameter, `delta2 = d2 eps^alpha2`.
    #[arg(long)]
    pub d2: Option<f64>,
    /// Outer concentration scale given directly.
    #[arg(long)]
    pub delta1: Option<f64>,
    /// Inner concentration scale given directly.
    #[arg(long)]
    pub delta2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Geometric grading density [default: 60, 480 for solve].
    #[arg(long)]
    pub nodes_per_decade: Option<usize>,
    /// Uniform nodes in the outer part [default: 200, 400 for solve].
    #[arg(long)]
    pub uniform_nodes: Option<usize>,
    /// Smallest positive node [default: a hundredth of the smallest scale].
    #[arg(long)]
    pub inner_scale: Option<f64>,
    /// Newton tolerance on the relative dual residual [default: 1e-12, 1e-10 for solve].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BoxArgs {
    /// Search interval `lo:hi` for d1 [default: d1bar/10 : 10 d1bar].
    #[arg(long)]
    pub box_d1: Option<String>,
    /// Search interval `lo:hi` for d2 [default: d2bar/1000 : 1000 d2bar].
    #[arg(long)]
    pub box_d2: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExpansionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub eps: EpsArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Robin::Unit)]
    pub robin: Robin,
}

#[derive(Debug, Clone, Args)]
pub struct ErrnormArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub eps: EpsArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = Term::R1)]
    pub term: Term,
}

#[derive(Debug, Clone, Args)]
pub struct AuxArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub eps: EpsArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub eps: EpsArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub search: BoxArgs,
    #[arg(long, value_enum, default_value_t = Init::Tower)]
    pub init: Init,
    /// Locate the critical point of the reduced energy first and start from it.
    #[arg(long)]
    pub minimize: bool,
    /// Two-column `r,u` table of the solution.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub eps: EpsArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub search: BoxArgs,
    /// Computation run at each eps.
    #[arg(long, value_enum)]
    pub task: Task,
    #[arg(long, value_enum, default_value_t = Robin::Unit)]
    pub robin: Robin,
    #[arg(long, value_enum, default_value_t = Init::Tower)]
    pub init: Init,
}

#[derive(Debug, Clone, Args)]
pub struct InequalityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Samples per run.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    /// Single lemma label such as `2.3`; all when absent.
    #[arg(long)]
    pub lemma: Option<String>,
}

/// How the concentration scales are specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scales {
    /// The critical pair `(d1bar, d2bar)`.
    None,
    /// `(d1, d2)` with `delta_j = d_j eps^alpha_j`.
    Params { d1: f64, d2: Option<f64> },
    /// `(delta1, delta2)` given outright.
    Deltas { delta1: f64, delta2: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nodes_per_decade: usize,
    pub uniform_nodes: usize,
    pub inner_scale: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandSpec {
    Constants,
    Expansion { robin: Robin },
    Errnorm { term: Term },
    Aux,
    Solve { init: Init, minimize: bool, profile: Option<PathBuf> },
    Sweep { task: Task, robin: Robin, init: Init },
    CheckInequalities { samples: usize, seed: u64, lemma: Option<String> },
}

/// Validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandSpec,
    pub dim: u32,
    pub radius: f64,
    pub eps: Vec<f64>,
    pub scales: Scales,
    pub grid: GridSpec,
    pub box_d1: Option<(f64, f64)>,
    pub box_d2: Option<(f64, f64)>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `start:stop:count` into `count` geometric points.
pub fn parse_geometric(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("expected start:stop:count, got `{s}`")));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| usage(format!("bad start in `{s}`")))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| usage(format!("bad stop in `{s}`")))?;
    let count: usize = parts[2].trim().parse().map_err(|_| usage(format!("bad count in `{s}`")))?;
    if count < 2 || !(start > 0.0) || !(stop > start) || !stop.is_finite() {
        return Err(usage(format!("geometric sequence needs count >= 2 and 0 < start < stop, got `{s}`")));
    }
    let ratio = (stop / start).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { stop } else { start * (ratio * i as f64).exp() }).collect())
}

fn parse_interval(s: &str) -> Result<(f64, f64), CliError> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("expected lo:hi, got `{s}`")))?;
    let lo: f64 = a.trim().parse().map_err(|_| usage(format!("bad interval `{s}`")))?;
    let hi: f64 = b.trim().parse().map_err(|_| usage(format!("bad interval `{s}`")))?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(usage(format!("interval needs 0 < lo < hi, got `{s}`")));
    }
    Ok((lo, hi))
}

/// Flags read from a `key = value` file, in file order.
pub fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key == "config" {
            return Err(usage(format!("{}:{}: bad key", path.display(), i + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Splices the flags of any `--config` file in front of the command-line flags.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path: Option<PathBuf> = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = argv.get(i + 1).ok_or_else(|| usage("--config needs a path"))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    // The subcommand is the first bare word after the program name.
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
        .ok_or_else(|| usage("a subcommand is required"))?;
    let mut out: Vec<OsString> = argv[..=sub].to_vec();
    out.extend(config_flags(&path)?);
    out.extend(argv[sub + 1..].iter().cloned());
    Ok(out)
}

fn scales(p: &ParamArgs) -> Result<Scales, CliError> {
    let has_d = p.d1.is_some() || p.d2.is_some();
    let has_delta = p.delta1.is_some() || p.delta2.is_some();
    match (has_d, has_delta) {
        (true, true) => Err(usage("give either d1/d2 or delta1/delta2, not a mix")),
        (false, false) => Ok(Scales::None),
        (true, false) => {
            let d1 = p.d1.ok_or_else(|| usage("d2 given without d1"))?;
            for v in [Some(d1), p.d2].into_iter().flatten() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(usage(format!("parameters must be positive, got {v}")));
                }
            }
            Ok(Scales::Params { d1, d2: p.d2 })
        }
        (false, true) => {
            let delta1 = p.delta1.ok_or_else(|| usage("delta2 given without delta1"))?;
            for v in [Some(delta1), p.delta2].into_iter().flatten() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(usage(format!("scales must be positive, got {v}")));
                }
            }
            if let Some(d2) = p.delta2 {
                if d2 >= delta1 {
                    return Err(usage("delta2 must be smaller than delta1"));
                }
            }
            Ok(Scales::Deltas { delta1, delta2: p.delta2 })
        }
    }
}

fn eps_values(e: &EpsArgs) -> Result<Vec<f64>, CliError> {
    let values = match (&e.eps, &e.eps_geom) {
        (Some(v), None) => vec![*v],
        (None, Some(g)) => parse_geometric(g)?,
        (None, None) => return Err(usage("--eps or --eps-geom is required")),
        (Some(_), Some(_)) => return Err(usage("--eps conflicts with --eps-geom")),
    };
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(usage(format!("eps must be positive, got {v}")));
    }
    Ok(values)
}

fn grid_spec(g: &GridArgs, solve: bool) -> Result<GridSpec, CliError> {
    let spec = GridSpec {
        nodes_per_decade: g.nodes_per_decade.unwrap_or(if solve { 480 } else { 60 }),
        uniform_nodes: g.uniform_nodes.unwrap_or(if solve { 400 } else { 200 }),
        inner_scale: g.inner_scale,
        tol: g.tol.unwrap_or(if solve { 1e-10 } else { 1e-12 }),
    };
    if spec.nodes_per_decade == 0 || spec.uniform_nodes == 0 {
        return Err(usage("grid densities must be positive"));
    }
    if !(spec.tol > 0.0) {
        return Err(usage("tol must be positive"));
    }
    if let Some(s) = spec.inner_scale {
        if !(s > 0.0) {
            return Err(usage("inner-scale must be positive"));
        }
    }
    Ok(spec)
}

const NO_GRID: GridArgs = GridArgs { nodes_per_decade: None, uniform_nodes: None, inner_scale: None, tol: None };

type Interval = Option<(f64, f64)>;

fn boxes(b: &BoxArgs) -> Result<(Interval, Interval), CliError> {
    Ok((b.box_d1.as_deref().map(parse_interval).transpose()?, b.box_d2.as_deref().map(parse_interval).transpose()?))
}

/// `Scales::None` stands for the critical pair and always passes.
fn needs_both(scales: Scales, what: &str) -> Result<(), CliError> {
    match scales {
        Scales::None | Scales::Params { d2: Some(_), .. } | Scales::Deltas { delta2: Some(_), .. } => Ok(()),
        _ => Err(usage(format!("{what} needs both scales"))),
    }
}

impl RunConfig {
    fn base(common: &CommonArgs, command: CommandSpec) -> Result<Self, CliError> {
        if common.dim < 7 {
            return Err(usage(format!("dim must be at least 7, got {}", common.dim)));
        }
        if !(common.radius > 0.0 && common.radius.is_finite()) {
            return Err(usage("radius must be positive"));
        }
        Ok(RunConfig {
            command,
            dim: common.dim,
            radius: common.radius,
            eps: Vec::new(),
            scales: Scales::None,
            grid: grid_spec(&NO_GRID, false)?,
            box_d1: None,
            box_d2: None,
            format: common.format,
            out: common.out.clone(),
        })
    }

    fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let cfg = match cli.command {
            Command::Constants(a) => Self::base(&a.common, CommandSpec::Constants)?,
            Command::Expansion(a) => {
                let mut c = Self::base(&a.common, CommandSpec::Expansion { robin: a.robin })?;
                c.eps = eps_values(&a.eps)?;
                c.scales = scales(&a.params)?;
                needs_both(c.scales, "expansion")?;
                c
            }
            Command::Errnorm(a) => {
                let mut c = Self::base(&a.common, CommandSpec::Errnorm { term: a.term })?;
                c.eps = eps_values(&a.eps)?;
                c.scales = scales(&a.params)?;
                c.grid = grid_spec(&a.grid, false)?;
                if a.term != Term::R1 {
                    needs_both(c.scales, "errnorm r2")?;
                }
                c
            }
            Command::Aux(a) => {
                let mut c = Self::base(&a.common, CommandSpec::Aux)?;
                c.eps = eps_values(&a.eps)?;
                c.scales = scales(&a.params)?;
                c.grid = grid_spec(&a.grid, false)?;
                c
            }
            Command::Solve(a) => {
                let mut c = Self::base(
                    &a.common,
                    CommandSpec::Solve { init: a.init, minimize: a.minimize, profile: a.profile.clone() },
                )?;
                c.eps = eps_values(&a.eps)?;
                if c.eps.len() != 1 {
                    return Err(usage("solve takes a single --eps; use sweep --task solve for several"));
                }
                c.scales = scales(&a.params)?;
                c.grid = grid_spec(&a.grid, true)?;
                (c.box_d1, c.box_d2) = boxes(&a.search)?;
                check_solve_scales(c.scales, a.init, a.minimize)?;
                c
            }
            Command::Sweep(a) => {
                let mut c = Self::base(&a.common, CommandSpec::Sweep { task: a.task, robin: a.robin, init: a.init })?;
                c.eps = eps_values(&a.eps)?;
                c.scales = scales(&a.params)?;
                c.grid = grid_spec(&a.grid, a.task == Task::Solve)?;
                (c.box_d1, c.box_d2) = boxes(&a.search)?;
                match a.task {
                    Task::ErrnormR1 | Task::Aux => {}
                    Task::Minimize => {
                        if matches!(c.scales, Scales::Deltas { .. }) {
                            return Err(usage("minimize works with d1/d2 starting points only"));
                        }
                    }
                    Task::Solve => check_solve_scales(c.scales, a.init, false)?,
                    _ => needs_both(c.scales, "this task")?,
                }
                c
            }
            Command::CheckInequalities(a) => {
                if a.samples == 0 {
                    return Err(usage("samples must be positive"));
                }
                Self::base(
                    &a.common,
                    CommandSpec::CheckInequalities { samples: a.samples, seed: a.seed, lemma: a.lemma.clone() },
                )?
            }
        };
        Ok(cfg)
    }
}

fn check_solve_scales(scales: Scales, init: Init, minimize: bool) -> Result<(), CliError> {
    if minimize {
        if init != Init::Tower {
            return Err(usage("--minimize needs --init tower"));
        }
        if matches!(scales, Scales::Deltas { .. }) {
            return Err(usage("--minimize works with d1/d2 starting points only"));
        }
        return Ok(());
    }
    match init {
        Init::Tower => needs_both(scales, "a tower start"),
        Init::Positive | Init::Zero => Ok(()),
    }
}

/// Parses `argv` (program name first) into a validated [`RunConfig`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = expand_config(argv)?;
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    RunConfig::from_cli(cli)
}
