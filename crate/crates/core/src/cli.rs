//! Command-line driver: configuration, subcommands and artifact output.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::checks::{
    caccioppoli_check, derivative_identity_check, frequency_monotonicity_check, remainder_decay_check,
    three_sphere_check, CheckReport, IDENTITY_TOL, MONOTONICITY_TOL, THREE_SPHERE_TOL,
};
use crate::error::{Error, Result};
use crate::functionals::{write_profile_csv, Functionals};
use crate::mesh::{build_disc_mesh, mark_boundary, AngularInterval, Mesh, RegionSpec};
use crate::propagation::{plan_chain, propagate_check, wucp_probe, WucpProbe};
use crate::radial_oracle::ModeSolution;
use crate::solver::{
    harmonicity_residual, solve_dirichlet, Field, InteriorConstraint, ProblemSpec, Provenance, SolverOptions, Source,
    HARMONICITY_GATE,
};
use crate::suite::{self, bump, Fourier, SuiteConfig, HARDY_TOL_BASE, OMEGA_FRACTION_TOL, PENALTY_STRENGTH};
use crate::weights::WeightSpec;

/// Environment variable overriding the output directory of the config file.
pub const OUT_ENV: &str = "DEGENLAB_OUT";
pub const DEFAULT_OUT: &str = "degenlab-out";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub alpha: f64,
    #[serde(rename = "N")]
    pub dimension: usize,
    /// Disc radius; when unset it is 1, or 1.25 x the largest referenced radius
    /// if that reaches 1.
    #[serde(rename = "R0")]
    pub r0: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub field: String,
    pub output: Option<PathBuf>,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub checks: ChecksConfig,
    pub regions: RegionsConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h: f64,
    pub grading: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Off: `all` may evaluate criteria on several threads. Results and
    /// output order are the same either way.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Radius grid for `profile`, `frequency` and `caccioppoli`.
    pub radii: Vec<f64>,
    pub triples: Vec<[f64; 3]>,
    pub ks: Vec<u32>,
    /// Mass-gap radius for `converge`.
    pub eta: f64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub hardy: f64,
    pub three_sphere: f64,
    pub monotonicity: f64,
    pub identity: f64,
    pub omega_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionsConfig {
    /// `[x, y, radius]`.
    pub omega: [f64; 3],
    pub target: [f64; 3],
    /// Angular interval `[start, end)` of `Gamma`.
    pub gamma: [f64; 2],
    /// Ball radius of the propagation chain.
    pub chain_radius: f64,
    pub penalty: f64,
    pub members: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            dimension: 2,
            r0: None,
            epsilon: 0.0,
            seed: SuiteConfig::default().seed,
            field: "mode:l=1".into(),
            output: None,
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            checks: ChecksConfig::default(),
            regions: RegionsConfig::default(),
        }
    }
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { h: 0.05, grading: 2.0 }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: None,
            deterministic: true,
        }
    }
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            radii: Vec::new(),
            triples: Vec::new(),
            ks: vec![4, 8, 16, 32],
            eta: suite::DECAY_RADIUS,
            tolerances: Tolerances::default(),
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hardy: HARDY_TOL_BASE,
            three_sphere: THREE_SPHERE_TOL,
            monotonicity: MONOTONICITY_TOL,
            identity: IDENTITY_TOL,
            omega_fraction: OMEGA_FRACTION_TOL,
        }
    }
}

impl Default for RegionsConfig {
    fn default() -> Self {
        Self {
            omega: [0.0, 0.0, 0.1],
            target: [0.3, 0.0, 0.1],
            gamma: [0.5 * PI, 1.5 * PI],
            chain_radius: 0.1,
            penalty: PENALTY_STRENGTH,
            members: 10,
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Reads and validates a TOML run configuration; missing keys take defaults.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        // serde names the offending key in backticks
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field"))
            .map(str::to_string)
            .unwrap_or_else(|| "<document>".into());
        config_error(&key, message.trim())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(config_error("alpha", format!("alpha must lie in (0,2), got {}", self.alpha)));
        }
        if self.dimension != 2 {
            return Err(config_error("N", format!("the finite element driver works in the plane (N = 2), got {}", self.dimension)));
        }
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0 && r0.is_finite()) {
                return Err(config_error("R0", format!("R0 must be positive, got {r0}")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(config_error("epsilon", format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.mesh.h > 0.0) {
            return Err(config_error("mesh.h", format!("h must be positive, got {}", self.mesh.h)));
        }
        if !(self.mesh.grading >= 1.0) {
            return Err(config_error("mesh.grading", format!("grading must be >= 1, got {}", self.mesh.grading)));
        }
        if !(self.solver.tol > 0.0) {
            return Err(config_error("solver.tol", format!("tolerance must be positive, got {}", self.solver.tol)));
        }
        if self.checks.ks.is_empty() || self.checks.ks.windows(2).any(|w| w[0] >= w[1]) || self.checks.ks[0] == 0 {
            return Err(config_error("checks.ks", format!("ks must be positive and strictly increasing, got {:?}", self.checks.ks)));
        }
        if self.checks.radii.windows(2).any(|w| w[0] >= w[1]) || self.checks.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(config_error("checks.radii", "radii must be positive and strictly increasing"));
        }
        for t in &self.checks.triples {
            if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2]) {
                return Err(config_error("checks.triples", format!("need 0 < r1 < r2 < r3, got {t:?}")));
            }
        }
        let t = &self.checks.tolerances;
        for (key, v) in [
            ("checks.tolerances.hardy", t.hardy),
            ("checks.tolerances.three_sphere", t.three_sphere),
            ("checks.tolerances.monotonicity", t.monotonicity),
            ("checks.tolerances.identity", t.identity),
            ("checks.tolerances.omega_fraction", t.omega_fraction),
            ("checks.eta", self.checks.eta),
            ("regions.chain_radius", self.regions.chain_radius),
            ("regions.penalty", self.regions.penalty),
        ] {
            if !(v > 0.0) {
                return Err(config_error(key, format!("must be positive, got {v}")));
            }
        }
        if self.regions.omega[2] <= 0.0 || self.regions.target[2] <= 0.0 {
            return Err(config_error("regions", "ball radii must be positive"));
        }
        if self.regions.members == 0 {
            return Err(config_error("regions.members", "need at least one family member"));
        }
        AngularInterval::new(self.regions.gamma[0], self.regions.gamma[1]).map_err(|e| config_error("regions.gamma", e.to_string()))?;
        FieldSpec::parse(&self.field)?;
        Ok(())
    }

    /// Disc radius for a command that references `radii` (distances from the
    /// origin that must stay inside the disc).
    pub fn domain_radius(&self, radii: &[f64]) -> Result<f64> {
        let largest = radii.iter().copied().fold(0.0, f64::max);
        match self.r0 {
            Some(r0) if largest > r0 => Err(config_error("R0", format!("referenced radius {largest} exceeds R0 = {r0}"))),
            Some(r0) => Ok(r0),
            None if largest < 1.0 => Ok(1.0),
            None => Ok(1.25 * largest),
        }
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            ..SolverOptions::default()
        }
    }
}

// ---------------------------------------------------------------------------
// field specifications

/// Field selector: `zero`, `constant[:c=..]`, `mode:l=..`,
/// `random[:seed=..,degree=..]`, `bump[:width=..]` or `file:PATH`.
///
/// All but `file` describe Dirichlet data that is then solved for.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(f64),
    Mode(u32),
    Random { seed: u64, degree: usize },
    Bump(f64),
    File(PathBuf),
}

impl FieldSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let err = |m: String| config_error("field", m);
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" {
            if rest.is_empty() {
                return Err(err("file: needs a path".into()));
            }
            return Ok(Self::File(PathBuf::from(rest)));
        }
        let mut params = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{part}`")))?;
            params.insert(k.trim(), v.trim());
        }
        let allowed: &[&str] = match kind {
            "zero" => &[],
            "constant" => &["c"],
            "mode" => &["l"],
            "random" => &["seed", "degree"],
            "bump" => &["width"],
            _ => return Err(err(format!("unknown field kind `{kind}` (zero, constant, mode, random, bump, file)"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(k)) {
            return Err(err(format!("unknown parameter `{k}` for field `{kind}`")));
        }
        let num = |k: &str, default: f64| -> Result<f64> {
            params.get(k).map_or(Ok(default), |v| v.parse().map_err(|_| err(format!("`{k}={v}` is not a number"))))
        };
        let int = |k: &str, default: u64| -> Result<u64> {
            params.get(k).map_or(Ok(default), |v| v.parse().map_err(|_| err(format!("`{k}={v}` is not an integer"))))
        };
        Ok(match kind {
            "zero" => Self::Zero,
            "constant" => Self::Constant(num("c", 1.0)?),
            "mode" => Self::Mode(u32::try_from(int("l", 1)?).map_err(|_| err("l too large".into()))?),
            "random" => Self::Random {
                seed: int("seed", 0)?,
                degree: int("degree", 4)? as usize,
            },
            _ => {
                let w = num("width", 0.5 * PI)?;
                if !(w > 0.0 && w <= PI) {
                    return Err(err(format!("bump width must lie in (0, pi], got {w}")));
                }
                Self::Bump(w)
            }
        })
    }

    /// Dirichlet data for this selector; `None` for `file`.
    pub fn boundary_source(&self, alpha: f64) -> Result<Option<Source>> {
        use rand::SeedableRng;
        Ok(Some(match self {
            Self::Zero => Source::Zero,
            Self::Constant(c) => Source::Constant(*c),
            Self::Mode(l) => ModeSolution::new(2, alpha, *l)?.as_source(),
            Self::Random { seed, degree } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                Fourier::random(&mut rng, *degree).source()
            }
            Self::Bump(w) => bump(*w),
            Self::File(_) => return Ok(None),
        }))
    }
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "degenlab", version, about = "Weighted FEM and unique-continuation checks for -div(|x|^alpha grad u) = f")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides DEGENLAB_OUT and the config file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Disc radius R0.
    #[arg(long = "domain-radius", global = true)]
    pub domain_radius: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Mesh size.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub grading: Option<f64>,
    /// zero | constant[:c=C] | mode:l=L | random[:seed=S,degree=D] | bump[:width=W] | file:PATH
    #[arg(long, global = true)]
    pub field: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative residual target of the linear solver.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the graded disc mesh.
    Mesh,
    /// Solve the Dirichlet problem for the selected boundary data.
    Solve {
        /// Constant right-hand side f.
        #[arg(long)]
        rhs: Option<f64>,
    },
    /// Hardy ratios of a zero-trace field: the selected data times (1 - |x|^2/R0^2).
    Hardy,
    /// H, D, Phi and R_eps on a radius grid.
    Profile {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
    },
    /// Three-sphere inequality on one triple (or the configured triples).
    ThreeSphere {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
    },
    /// Monotonicity of r^alpha Phi(r).
    Frequency {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        /// Also check the derivative identities on the grid.
        #[arg(long)]
        identities: bool,
    },
    /// Observed Caccioppoli constants.
    Caccioppoli {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
    },
    /// Regularized approximation sequence u_k -> u_0 with f = 1, g = 0.
    Converge {
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<u32>>,
    },
    /// Chain plan and observed interpolation constants across a bump family.
    Propagate,
    /// Unique-continuation probe with u ~ 0 forced on omega.
    Wucp {
        /// Pin nodes in omega instead of penalizing.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        strength: Option<f64>,
    },
    /// Full acceptance suite.
    All {
        /// Restrict to these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
    },
}

/// Parses `args` (including the program name) and runs the command, printing
/// to standard output; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverDivergence { .. } | Error::SingularSystem(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

/// Config file, then the environment, then flags.
pub fn resolve_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = o.domain_radius {
        cfg.r0 = Some(v);
    }
    if let Some(v) = o.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = o.h {
        cfg.mesh.h = v;
    }
    if let Some(v) = o.grading {
        cfg.mesh.grading = v;
    }
    if let Some(v) = &o.field {
        cfg.field = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.tol {
        cfg.solver.tol = v;
    }
    match &cli.command {
        Command::Converge { ks: Some(ks) } => cfg.checks.ks = ks.clone(),
        Command::Wucp { strength: Some(s), .. } => cfg.regions.penalty = *s,
        _ => {}
    }
    cfg.validate()?;
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((cfg, out))
}

/// Everything a command needs once the disc radius is known.
struct Context {
    cfg: RunConfig,
    out: PathBuf,
    r0: f64,
    mesh: Mesh,
    weight: WeightSpec,
    opts: SolverOptions,
}

impl Context {
    fn new(cfg: RunConfig, out: PathBuf, referenced: &[f64]) -> Result<Self> {
        let r0 = cfg.domain_radius(referenced)?;
        let mesh = build_disc_mesh(r0, cfg.mesh.h, cfg.mesh.grading)?;
        let weight = WeightSpec::new(cfg.alpha, cfg.epsilon, 2, r0)?;
        let opts = cfg.solver_options();
        fs::create_dir_all(&out)?;
        Ok(Self {
            cfg,
            out,
            r0,
            mesh,
            weight,
            opts,
        })
    }

    /// The selected field: loaded from file, or solved for its boundary data.
    fn field(&self) -> Result<Field> {
        let spec = FieldSpec::parse(&self.cfg.field)?;
        match spec.boundary_source(self.cfg.alpha)? {
            Some(g) => Ok(solve_dirichlet(&self.mesh, &ProblemSpec::new(self.weight).with_boundary(g), &self.opts)?.field),
            None => match spec {
                FieldSpec::File(p) => Field::read_json(p, &self.mesh),
                _ => unreachable!(),
            },
        }
    }

    fn emit(&self, rep: &CheckReport, stem: &str) -> Result<bool> {
        rep.write_files(&self.out, stem)?;
        println!("{}", rep.summary_line());
        Ok(rep.passed)
    }

    /// Radius grid from `--r`, the config, or `n` points on `[lo, 0.95] R0`.
    fn grid(&self, flag: &Option<Vec<f64>>, lo: f64, n: usize) -> Vec<f64> {
        if let Some(r) = flag {
            return r.clone();
        }
        if !self.cfg.checks.radii.is_empty() {
            return self.cfg.checks.radii.clone();
        }
        let a = lo * self.r0;
        let b = 0.95 * self.r0;
        (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
    }
}

fn ensure_increasing(key: &str, r: &[f64]) -> Result<()> {
    if r.is_empty() || r.windows(2).any(|w| w[0] >= w[1]) || r[0] <= 0.0 {
        return Err(config_error(key, format!("need positive increasing radii, got {r:?}")));
    }
    Ok(())
}

fn ball(v: [f64; 3]) -> RegionSpec {
    RegionSpec::ball([v[0], v[1]], v[2])
}

/// Runs the parsed command; `Ok(false)` when some check failed.
pub fn execute(cli: &Cli) -> Result<bool> {
    let (cfg, out) = resolve_config(cli)?;
    let radial_extent = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1]).sqrt() + v[2];
    match &cli.command {
        Command::Mesh => {
            let ctx = Context::new(cfg, out, &[])?;
            ctx.mesh.write_json(ctx.out.join("mesh.json"))?;
            println!(
                "mesh: {} nodes, {} triangles, hash {}",
                ctx.mesh.num_nodes(),
                ctx.mesh.num_triangles(),
                ctx.mesh.content_hash()
            );
            Ok(true)
        }
        Command::Solve { rhs } => {
            let ctx = Context::new(cfg, out, &[])?;
            let spec = FieldSpec::parse(&ctx.cfg.field)?;
            let g = spec
                .boundary_source(ctx.cfg.alpha)?
                .ok_or_else(|| config_error("field", "solve needs boundary data, not a file"))?;
            let mut problem = ProblemSpec::new(ctx.weight).with_boundary(g);
            if let Some(f) = rhs {
                problem = problem.with_rhs(Source::Constant(*f));
            }
            let sol = solve_dirichlet(&ctx.mesh, &problem, &ctx.opts)?;
            ctx.mesh.write_json(ctx.out.join("mesh.json"))?;
            let provenance = Provenance {
                problem: problem.describe(),
                tol: ctx.opts.tol,
                iterations: sol.stats.iterations,
            };
            sol.field.write_json(ctx.out.join("field.json"), Some(&ctx.weight), Some(provenance))?;
            println!(
                "solve: {:?}, {} iterations, relative residual {:.3e}, {} unknowns",
                sol.stats.method, sol.stats.iterations, sol.stats.relative_residual, sol.stats.free_unknowns
            );
            if rhs.is_some_and(|f| f != 0.0) {
                return Ok(true);
            }
            let res = harmonicity_residual(&ctx.mesh, &ctx.weight, &sol.field, None, ctx.opts.quadrature)?;
            let mut rep = CheckReport::new("harmonicity", 0.0);
            rep.push("interior residual", (HARMONICITY_GATE - res) / HARMONICITY_GATE, &[("residual", res)]);
            ctx.emit(&rep, "harmonicity")
        }
        Command::Hardy => {
            let ctx = Context::new(cfg, out, &[])?;
            let spec = FieldSpec::parse(&ctx.cfg.field)?;
            let u = match spec.boundary_source(ctx.cfg.alpha)? {
                Some(g) => {
                    let r0 = ctx.r0;
                    let bubble = Field::interpolate(&ctx.mesh, |x| (1.0 - (x[0] * x[0] + x[1] * x[1]) / (r0 * r0)).max(0.0) * g.eval(x))?;
                    let mut v = bubble.into_values();
                    for (i, x) in v.iter_mut().enumerate() {
                        if ctx.mesh.is_boundary_node(i) {
                            *x = 0.0;
                        }
                    }
                    Field::new(&ctx.mesh, v)?
                }
                None => ctx.field()?,
            };
            let h = Functionals::new(&ctx.mesh, &u, &ctx.weight)?.hardy_report()?;
            let mut rep = CheckReport::new("hardy", ctx.cfg.checks.tolerances.hardy);
            for (name, ratio) in h.ratios() {
                rep.push(name, 1.0 - ratio, &[("ratio", ratio)]);
            }
            ctx.emit(&rep, "hardy")
        }
        Command::Profile { r } => {
            let ctx = Context::new(cfg.clone(), out, &r.clone().unwrap_or_else(|| cfg.checks.radii.clone()))?;
            let grid = ctx.grid(r, 0.05, 20);
            ensure_increasing("r", &grid)?;
            let u = ctx.field()?;
            let samples = Functionals::new(&ctx.mesh, &u, &ctx.weight)?.profile(&grid)?;
            write_profile_csv(&samples, fs::File::create(ctx.out.join("profile.csv"))?)?;
            println!("profile: {} radii written to {}", samples.len(), ctx.out.join("profile.csv").display());
            Ok(true)
        }
        Command::ThreeSphere { r } => {
            let triples: Vec<[f64; 3]> = match r {
                Some(v) if v.len() == 3 => vec![[v[0], v[1], v[2]]],
                Some(v) => return Err(config_error("r", format!("three-sphere needs exactly three radii, got {}", v.len()))),
                None if !cfg.checks.triples.is_empty() => cfg.checks.triples.clone(),
                None => vec![[0.25, 0.5, 0.75]],
            };
            for t in &triples {
                ensure_increasing("r", t)?;
            }
            let flat: Vec<f64> = triples.iter().flatten().copied().collect();
            let ctx = Context::new(cfg, out, &flat)?;
            let u = ctx.field()?;
            let f = Functionals::new(&ctx.mesh, &u, &ctx.weight)?;
            let parts = triples
                .iter()
                .map(|t| Ok((format!("r={},{},{}", t[0], t[1], t[2]), three_sphere_check(&f, t[0], t[1], t[2])?)))
                .collect::<Result<Vec<_>>>()?;
            let tol = ctx.cfg.checks.tolerances.three_sphere;
            ctx.emit(&CheckReport::merge("three_sphere", tol, parts), "three_sphere")
        }
        Command::Frequency { r, identities } => {
            let ctx = Context::new(cfg.clone(), out, &r.clone().unwrap_or_else(|| cfg.checks.radii.clone()))?;
            let lo = (2.5 * ctx.cfg.epsilon / ctx.r0).max(0.1);
            let grid = ctx.grid(r, lo, 20);
            ensure_increasing("r", &grid)?;
            let u = ctx.field()?;
            let f = Functionals::new(&ctx.mesh, &u, &ctx.weight)?;
            write_profile_csv(&f.profile(&grid)?, fs::File::create(ctx.out.join("frequency_profile.csv"))?)?;
            let mono = frequency_monotonicity_check(&f, &grid)?.with_tolerance(ctx.cfg.checks.tolerances.monotonicity);
            let mut ok = ctx.emit(&mono, "frequency")?;
            if *identities {
                let rep = derivative_identity_check(&f, &grid)?.with_tolerance(ctx.cfg.checks.tolerances.identity);
                ok &= ctx.emit(&rep, "derivative_identities")?;
            }
            Ok(ok)
        }
        Command::Caccioppoli { r } => {
            let ctx = Context::new(cfg.clone(), out, &r.clone().unwrap_or_else(|| cfg.checks.radii.clone()))?;
            let grid = match (r, ctx.cfg.checks.radii.is_empty()) {
                (Some(r), _) => r.clone(),
                (None, false) => ctx.cfg.checks.radii.clone(),
                (None, true) => [0.125, 0.25, 0.375, 0.5].iter().map(|s| s * ctx.r0).collect(),
            };
            ensure_increasing("r", &grid)?;
            let u = ctx.field()?;
            ctx.emit(&caccioppoli_check(&Functionals::new(&ctx.mesh, &u, &ctx.weight)?, &grid)?, "caccioppoli")
        }
        Command::Converge { .. } => {
            let ctx = Context::new(cfg, out, &[])?;
            let problem = ProblemSpec::new(WeightSpec::degenerate(ctx.cfg.alpha, ctx.r0)?).with_rhs(Source::Constant(1.0));
            let rep = remainder_decay_check(&ctx.mesh, &problem, &ctx.cfg.checks.ks, ctx.cfg.checks.eta * ctx.r0, &ctx.opts)?;
            let mut table = csv::Writer::from_path(ctx.out.join("converge_table.csv"))?;
            table.write_record(["k", "R", "mass_gap", "l2_distance"])?;
            for k in &ctx.cfg.checks.ks {
                let get = |name: &str| crate::format::real(rep.fitted_constants[&format!("{name}[k={k}]")]);
                table.write_record([k.to_string(), get("R"), get("mass_gap"), get("l2_distance")])?;
            }
            table.flush()?;
            ctx.emit(&rep, "converge")
        }
        Command::Propagate => {
            let reg = cfg.regions.clone();
            let ctx = Context::new(cfg, out, &[radial_extent(reg.omega), radial_extent(reg.target)])?;
            let (omega, target) = (ball(reg.omega), ball(reg.target));
            let plan = plan_chain(ctx.r0, &omega, &target, reg.chain_radius, ctx.cfg.alpha)?;
            fs::write(ctx.out.join("plan.json"), plan.to_json()?)?;
            let (mesh, family) = bump_family(&ctx, reg.members)?;
            let rep = propagate_check(&mesh, &family, &ctx.weight, &plan, &omega, &target, None)?;
            println!("plan: {:?}, {} steps, composite mu {:.6}", plan.case_tag, plan.steps(), plan.composite_mu);
            ctx.emit(&rep, "propagate")
        }
        Command::Wucp { exact, .. } => {
            let reg = cfg.regions.clone();
            let ctx = Context::new(cfg, out, &[radial_extent(reg.omega), radial_extent(reg.target)])?;
            let (omega, target) = (ball(reg.omega), ball(reg.target));
            let plan = plan_chain(ctx.r0, &omega, &target, reg.chain_radius, ctx.cfg.alpha)?;
            let (mesh, family) = bump_family(&ctx, reg.members)?;
            let constraint = if *exact {
                InteriorConstraint::Exact { region: omega.clone() }
            } else {
                InteriorConstraint::Penalty {
                    region: omega.clone(),
                    strength: reg.penalty,
                }
            };
            let constrained = ProblemSpec::new(ctx.weight)
                .with_split_boundary(Source::Zero, bump(0.5 * PI))
                .with_constraint(constraint);
            let probe = WucpProbe {
                mesh: &mesh,
                weight: &ctx.weight,
                omega,
                target,
                family: &family,
                constrained: &constrained,
                mu: plan.composite_mu,
                omega_tol: ctx.cfg.checks.tolerances.omega_fraction,
                positivity_floor: 1e-12,
            };
            let (rep, field) = wucp_probe(&probe, &ctx.opts)?;
            field.write_json(ctx.out.join("constrained_field.json"), Some(&ctx.weight), None)?;
            ctx.emit(&rep, "wucp")
        }
        Command::All { only } => run_suite(&cfg, &out, only.as_deref()),
    }
}

/// Solutions with zero data on `Gamma` and bumps of shrinking width on the
/// rest of the boundary.
fn bump_family(ctx: &Context, members: usize) -> Result<(Mesh, Vec<Field>)> {
    let g = ctx.cfg.regions.gamma;
    let mesh = mark_boundary(&ctx.mesh, AngularInterval::new(g[0], g[1])?)?;
    let family = (0..members)
        .map(|i| {
            let width = 0.5 * PI * 0.8f64.powi(i as i32);
            let p = ProblemSpec::new(ctx.weight).with_split_boundary(Source::Zero, bump(width));
            Ok(solve_dirichlet(&mesh, &p, &ctx.opts)?.field)
        })
        .collect::<Result<_>>()?;
    Ok((mesh, family))
}

fn run_suite(cfg: &RunConfig, out: &Path, only: Option<&[u8]>) -> Result<bool> {
    let suite_cfg = SuiteConfig {
        r0: cfg.r0.unwrap_or(1.0),
        h: cfg.mesh.h,
        grading: cfg.mesh.grading,
        seed: cfg.seed,
        solver: cfg.solver_options(),
    };
    let selected: Vec<_> = suite::CRITERIA
        .iter()
        .filter(|(id, _)| only.is_none_or(|o| o.contains(id)))
        .copied()
        .collect();
    let results: Vec<(u8, Result<suite::CriterionOutcome>)> = if cfg.solver.deterministic {
        selected.iter().map(|(id, f)| (*id, f(&suite_cfg))).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = selected.iter().map(|(id, f)| (*id, s.spawn(move || f(&suite_cfg)))).collect();
            handles
                .into_iter()
                .map(|(id, h)| (id, h.join().unwrap_or_else(|_| Err(Error::Domain(format!("criterion {id} panicked"))))))
                .collect()
        })
    };
    let dir = out.join("all");
    fs::create_dir_all(&dir)?;
    let mut ok = true;
    for (id, res) in results {
        let outcome = res?;
        println!("{}", outcome.line());
        for rep in &outcome.reports {
            rep.write_files(&dir, &format!("c{id}_{}", rep.name.replace([' ', '=', '.'], "_")))?;
            println!("{}", rep.summary_line());
        }
        ok &= outcome.passed;
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("alpha = 1").unwrap();
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.domain_radius(&[]).unwrap(), 1.0);
        assert_eq!((cfg.mesh.h, cfg.mesh.grading), (0.05, 2.0));
        assert_eq!(cfg.checks.ks, vec![4, 8, 16, 32]);
    }

    #[test]
    fn dotted_keys_and_tables_agree() {
        let a = parse_config("mesh.h = 0.1\nsolver.tol = 1e-9\nR0 = 2").unwrap();
        let b = parse_config("R0 = 2\n[mesh]\nh = 0.1\n[solver]\ntol = 1e-9").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.domain_radius(&[1.5]).unwrap(), 2.0);
    }

    #[test]
    fn config_errors_name_the_key() {
        let e = parse_config("alpha = 2.5").unwrap_err().to_string();
        assert!(e.contains("alpha must lie in (0,2)"), "{e}");
        let e = parse_config("aplha = 1").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "aplha"), "{e}");
        let e = parse_config("[mesh]\nsize = 1").unwrap_err();
        assert!(e.to_string().contains("size"), "{e}");
        assert!(parse_config("checks.ks = [8, 4]").is_err());
        assert!(parse_config("checks.tolerances.hardy = 0").is_err());
        assert!(parse_config("N = 3").is_err());
        assert!(parse_config("field = \"mode:k=1\"").is_err());
    }

    #[test]
    fn domain_radius_rules() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.domain_radius(&[0.5, 1.0, 2.0]).unwrap(), 2.5);
        let fixed = RunConfig { r0: Some(1.0), ..RunConfig::default() };
        assert!(matches!(fixed.domain_radius(&[2.0]), Err(Error::Config { .. })));
    }

    #[test]
    fn field_specs() {
        assert_eq!(FieldSpec::parse("zero").unwrap(), FieldSpec::Zero);
        assert_eq!(FieldSpec::parse("constant").unwrap(), FieldSpec::Constant(1.0));
        assert_eq!(FieldSpec::parse("constant:c=2.5").unwrap(), FieldSpec::Constant(2.5));
        assert_eq!(FieldSpec::parse("mode:l=2").unwrap(), FieldSpec::Mode(2));
        assert_eq!(FieldSpec::parse("random:seed=3").unwrap(), FieldSpec::Random { seed: 3, degree: 4 });
        assert_eq!(FieldSpec::parse("file:a/b.json").unwrap(), FieldSpec::File("a/b.json".into()));
        for bad in ["mode:l=x", "spline", "bump:width=7", "random:seed", "file:"] {
            assert!(FieldSpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["degenlab", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["degenlab", "mesh", "--alpha", "2.5"]), EXIT_CONFIG);
        let e = Error::SolverDivergence {
            iterations: 1,
            residual: 1.0,
            tol: 1e-9,
        };
        assert_eq!(exit_code(&e), EXIT_SOLVER);
    }
}
