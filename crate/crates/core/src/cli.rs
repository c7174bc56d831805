//! Batch entry points: configuration, commands, report emission.

use crate::contour::{ContourSpec, SectorContour};
use crate::error::{CuspError, Result};
use crate::full_problem::{regularity_study, solve_original, write_regularity, GridSpec, ProblemInstance, SolutionBundle};
use crate::geometry::{validate_profiles, weight_exponent, CuspDomain, ProfilePair};
use crate::grid::{time_line, TimeField};
use crate::operator_sum::check_contour;
use crate::oracle_fd::{relative_difference, solve_monolithic, FdGrid, MonolithicSystem, DEFAULT_SIZE_LIMIT};
use crate::time_calculus::{solve_abstract, AbstractOptions, SpatialBackend};
use crate::verify::{self, Check, VerifyReport};
use crate::C64;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// "quadratic-symmetric", "cubic" or "polynomial"
    pub kind: String,
    pub a: f64,
    /// monomial coefficients of phi1 and phi2 (polynomial kind)
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { kind: "quadratic-symmetric".into(), a: 1.0, phi1: Vec::new(), phi2: Vec::new() }
    }
}

impl ProfileConfig {
    pub fn build(&self) -> Result<ProfilePair> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(CuspError::Config(format!("profile.a = {} must be positive", self.a)));
        }
        if self.kind == "polynomial" {
            if self.phi1.is_empty() || self.phi2.is_empty() {
                return Err(CuspError::Config("polynomial profile needs phi1 and phi2 coefficients".into()));
            }
            return Ok(ProfilePair::polynomial(self.a, self.phi1.clone(), self.phi2.clone()));
        }
        ProfilePair::builtin(&self.kind, self.a).ok_or_else(|| CuspError::Config(format!("unknown profile kind '{}'", self.kind)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub lambda: f64,
    pub p: f64,
    pub theta: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig { lambda: 1.0, p: 2.0, theta: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub delta: f64,
    pub r: f64,
    pub big_r: f64,
    pub n_ray: usize,
    pub n_arc: usize,
    /// vertex of the sum-formula contour on the real axis
    pub center: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        let c = ContourSpec::default();
        ContourConfig { delta: c.delta, r: c.r, big_r: c.big_r, n_ray: c.n_ray, n_arc: c.n_arc, center: 0.0 }
    }
}

impl ContourConfig {
    pub fn spec(&self) -> ContourSpec {
        ContourSpec { delta: self.delta, r: self.r, big_r: self.big_r, n_ray: self.n_ray, n_arc: self.n_arc }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: SpatialBackend,
    pub n_modes: usize,
    pub n_poles: usize,
    pub gap: f64,
    /// Neumann iteration for the perturbed problem; 0 solves the principal part only
    pub neumann_max_iter: usize,
    pub neumann_tol: f64,
    pub fold_weight: bool,
    pub residual_tol: f64,
    pub growth_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = AbstractOptions::default();
        SolverConfig {
            backend: o.backend,
            n_modes: o.n_modes,
            n_poles: o.n_poles,
            gap: o.gap,
            neumann_max_iter: 0,
            neumann_tol: 1e-6,
            fold_weight: false,
            residual_tol: 1e-4,
            growth_tol: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    /// "zero", "sqrt-t", "smooth", "rough" or "manufactured"
    pub kind: String,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { kind: "sqrt-t".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub per_ray: usize,
    pub power_iters: usize,
    pub slope_tol: f64,
    /// FD levels (nt, n_xi, n_eta), coarse first, shared nt
    pub fd_levels: Vec<(usize, usize, usize)>,
    pub fd_tol: f64,
    pub geometry_xi: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let s = verify::SectorOptions::default();
        let o = verify::OperationalOptions::default();
        VerifyConfig {
            per_ray: s.per_ray,
            power_iters: s.a_iters,
            slope_tol: s.slope_tol,
            fd_levels: o.fd_levels,
            fd_tol: o.fd_tol,
            geometry_xi: 30.0,
        }
    }
}

/// Complete run configuration (TOML with nested sections).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub seed: u64,
    pub profile: ProfileConfig,
    pub problem: ProblemConfig,
    pub grid: GridSpec,
    pub contour: ContourConfig,
    pub solver: SolverConfig,
    pub source: SourceConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output: PathBuf::from("cuspwave-out"),
            seed: 1,
            profile: ProfileConfig::default(),
            problem: ProblemConfig::default(),
            grid: GridSpec::default(),
            contour: ContourConfig::default(),
            solver: SolverConfig::default(),
            source: SourceConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| CuspError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CuspError::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Range checks performed before any computation.
    pub fn validate(&self) -> Result<()> {
        let ProblemConfig { lambda, p, theta } = self.problem;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(CuspError::Config(format!("theta = {theta} must lie in (0,1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(CuspError::Config(format!("p = {p} must lie in (1,inf)")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(CuspError::Config(format!("lambda = {lambda} must be positive")));
        }
        let d = self.contour.delta;
        if !(d > 0.0 && d < PI / 2.0) {
            return Err(CuspError::Config(format!("contour.delta = {d} must lie in (0, pi/2)")));
        }
        if !(self.contour.r > 0.0 && self.contour.r < self.contour.big_r) {
            return Err(CuspError::Config("contour needs 0 < r < big_r".into()));
        }
        self.grid.validate().map_err(|e| CuspError::Config(e.to_string()))?;
        if self.verify.per_ray < 3 {
            return Err(CuspError::Config("verify.per_ray must be at least 3".into()));
        }
        self.profile.build()?;
        match self.source.kind.as_str() {
            "zero" | "sqrt-t" | "smooth" | "rough" | "manufactured" => Ok(()),
            k => Err(CuspError::Config(format!("unknown source kind '{k}'"))),
        }
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        let ProblemConfig { lambda, p, theta } = self.problem;
        let mut inst = ProblemInstance::new(self.profile.build()?, lambda, p, theta, self.grid)?;
        let s = &self.solver;
        inst.options = AbstractOptions {
            lambda,
            backend: s.backend,
            n_modes: s.n_modes,
            n_poles: s.n_poles,
            gap: s.gap,
            ..AbstractOptions::default()
        };
        inst.neumann = (s.neumann_max_iter > 0).then_some((s.neumann_max_iter, s.neumann_tol));
        inst.fold_weight = s.fold_weight;
        inst.residual_tol = s.residual_tol;
        inst.growth_tol = s.growth_tol;
        Ok(inst)
    }

    /// The configured cusp-domain source h(t, x, y).
    pub fn source(&self) -> Result<Box<dyn Fn(f64, f64, f64) -> f64>> {
        Ok(match self.source.kind.as_str() {
            "zero" => Box::new(|_, _, _| 0.0),
            "sqrt-t" => Box::new(verify::sqrt_source),
            "smooth" => Box::new(verify::smooth_source),
            "rough" => Box::new(verify::rough_source),
            "manufactured" => {
                let d = CuspDomain::new(self.profile.build()?, self.grid.xi_max)?;
                Box::new(verify::manufactured_source(d, self.problem.p, self.problem.lambda))
            }
            k => return Err(CuspError::Config(format!("unknown source kind '{k}'"))),
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "cuspwave", about = "Wave problem on cusp domains: solver and verification suite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check the profile conditions
    ValidateDomain(Args),
    /// Closed-form Green kernels and sector estimates for H, B and A
    VerifyResolvents(Args),
    /// Sum formula: scalar calibration, oracle comparison, contour independence
    VerifySum(Args),
    /// Scalar Ventcel problem and the printed-display deviation table
    VerifyScalar(Args),
    /// Commutation of the one-dimensional resolvents
    VerifyCommutation(Args),
    /// Full pipeline; writes a solution bundle
    Solve(Args),
    /// Operator solution against the monolithic finite-difference oracle
    CompareOracle(Args),
    /// Two-level refinement study of the Hölder seminorms
    Regularity(Args),
    /// Writes the default configuration
    DefaultConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug, Clone)]
pub struct Args {
    /// configuration file (TOML); defaults are used when omitted
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// output directory (overrides the config)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Parses arguments and runs one command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(pass) => {
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn load(args: &Args) -> Result<(RunConfig, String, PathBuf)> {
    let (cfg, text) = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let c = RunConfig::default();
            let t = toml::to_string(&c).map_err(|e| CuspError::Config(e.to_string()))?;
            (c, t)
        }
    };
    let out = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config-echo.toml"), &text)?;
    write_plot_stub(&out)?;
    Ok((cfg, text, out))
}

fn dispatch(cmd: &Command) -> Result<bool> {
    match cmd {
        Command::DefaultConfig { out } => {
            let t = toml::to_string(&RunConfig::default()).map_err(|e| CuspError::Config(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, t)?,
                None => print!("{t}"),
            }
            Ok(true)
        }
        Command::ValidateDomain(a) => {
            let (cfg, _, out) = load(a)?;
            validate_domain(&cfg, &out)
        }
        Command::VerifyResolvents(a) => {
            let (cfg, _, out) = load(a)?;
            verify_resolvents(&cfg, &out)
        }
        Command::VerifySum(a) => {
            let (cfg, _, out) = load(a)?;
            verify_sum(&cfg, &out)
        }
        Command::VerifyScalar(a) => {
            let (_, _, out) = load(a)?;
            let (rep, pc) = verify::scalar_ventcel()?;
            verify::write_deviation_csv(&pc, &out.join("deviation.csv"))?;
            println!("printed-display deviation (sup over the time grid):");
            for r in &pc.rows {
                println!("  term {}: printed {:.6e} exact {:.6e} diff {:.6e}", r.term, r.printed_sup, r.exact_sup, r.diff_sup);
            }
            emit(&rep, &out, "scalar")
        }
        Command::VerifyCommutation(a) => {
            let (cfg, _, out) = load(a)?;
            emit(&verify::commutation(cfg.seed)?, &out, "commutation")
        }
        Command::Solve(a) => {
            let (cfg, text, out) = load(a)?;
            solve(&cfg, &text, &out)
        }
        Command::CompareOracle(a) => {
            let (cfg, _, out) = load(a)?;
            compare_oracle(&cfg, &out)
        }
        Command::Regularity(a) => {
            let (cfg, text, out) = load(a)?;
            regularity(&cfg, &text, &out)
        }
    }
}

/// Prints the checks, writes `<stem>.csv` and `<stem>_timing.csv`, returns the verdict.
pub fn emit(rep: &VerifyReport, out: &Path, stem: &str) -> Result<bool> {
    println!("{}", rep.title);
    for c in &rep.checks {
        let verdict = if !c.required { "INFO" } else if c.pass { "PASS" } else { "FAIL" };
        let tol = if c.tolerance.is_nan() { String::new() } else { format!(" (tol {:.1e})", c.tolerance) };
        println!("  {verdict} {} = {:.6e}{tol} {}", c.name, c.value, c.note);
    }
    rep.write_csv(&out.join(format!("{stem}.csv")))?;
    rep.write_timing(&out.join(format!("{stem}_timing.csv")))?;
    Ok(rep.pass())
}

pub fn validate_domain(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let v = validate_profiles(&cfg.profile.build()?, 64, 1e-12)?;
    let mut fh = std::fs::File::create(out.join("domain_validation.csv"))?;
    writeln!(fh, "# profile conditions; witness = x where the condition fails (length units of x)")?;
    writeln!(fh, "condition,pass,witness,description")?;
    for r in &v.rows {
        let w = r.witness.map(|w| format!("{w:e}")).unwrap_or_default();
        writeln!(fh, "{},{},{},\"{}\"", r.condition, r.pass, w, r.description)?;
        println!("  {} condition {}: {}{}", if r.pass { "PASS" } else { "FAIL" }, r.condition, r.description,
            r.witness.map(|w| format!(" (x = {w:e})")).unwrap_or_default());
    }
    Ok(v.pass())
}

pub fn verify_resolvents(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let g = verify::green_closed_forms()?;
    let o = verify::SectorOptions {
        per_ray: cfg.verify.per_ray,
        p: cfg.problem.p,
        slope_tol: cfg.verify.slope_tol,
        a_iters: cfg.verify.power_iters,
        ..Default::default()
    };
    let (s, bounds) = verify::sector_estimates(&o)?;
    for b in &bounds {
        verify::write_bound_csv(b, &out.join(format!("bound_{}.csv", b.label)))?;
    }
    let a = emit(&g, out, "green")?;
    let b = emit(&s, out, "sector")?;
    Ok(a && b)
}

pub fn verify_sum(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let spec = cfg.contour.spec();
    // the configured contour must separate the two spectra before anything runs
    let c = SectorContour::right(&spec, cfg.contour.center)?;
    check_contour(&c, C64::new(cfg.problem.lambda, 0.0))?;
    let rep = verify::sum_formula(&spec)?;
    emit(&rep, out, "sum")
}

fn bundle_checks(b: &SolutionBundle, inst: &ProblemInstance) -> VerifyReport {
    let mut rep = VerifyReport { title: "Solution report".into(), checks: Vec::new(), seconds: 0.0 };
    let r = &b.residual;
    rep.push(Check::le("interior_residual", r.interior, inst.residual_tol).with_note("sup_t L2, relative to sup_t ||f||"));
    let bc = r.spatial_bc.iter().fold(0.0f64, |m, v| m.max(*v));
    rep.push(Check::le("spatial_bc_residual", bc, inst.residual_tol));
    rep.push(Check::le("ventcel_residual", r.ventcel[0].max(r.ventcel[1]), inst.residual_tol));
    rep.push(Check::info("weighted_residual", b.weighted_residual, "residual of the rho-weighted equation"));
    rep.push(Check::info("perturbation_residual", b.perturbation_residual, "w'' - Dw - lambda w - Pw - f"));
    rep.push(Check::flag("data_holder_hypothesis", b.data_check.pass, &format!("growth h {:.4}", b.data_check.growth_h)));
    if let Some(n) = &b.neumann {
        rep.push(Check::flag("neumann_converged", n.converged && !n.divergent, &format!("{} iterations", n.iterations)));
    }
    for (i, w) in b.warnings.iter().enumerate() {
        rep.push(Check::info(&format!("warning_{i}"), f64::NAN, w));
    }
    rep
}

pub fn solve(cfg: &RunConfig, text: &str, out: &Path) -> Result<bool> {
    let inst = cfg.instance()?;
    let h = cfg.source()?;
    let mut b = solve_original(&inst, &*h)?;
    b.config_echo = text.to_string();
    let bundle = out.join("bundle");
    b.write_dir(&bundle)?;
    let mut rep = bundle_checks(&b, &inst);
    if cfg.source.kind == "zero" {
        let m = b.w.frames.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        rep.push(Check::le("zero_source_field", m, 0.0));
    }
    if cfg.source.kind == "manufactured" {
        let r = verify::manufactured_recovery(&b.w, cfg.grid.xi_max, cfg.problem.lambda)?;
        emit(&r, out, "recovery")?;
        rep.extend("recovery_", &r);
    }
    emit(&rep, out, "report")
}

pub fn compare_oracle(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let levels = &cfg.verify.fd_levels;
    let nt = levels.first().map(|l| l.0).ok_or_else(|| CuspError::Config("verify.fd_levels is empty".into()))?;
    if levels.iter().any(|l| l.0 != nt) {
        return Err(CuspError::Config("FD levels must share nt".into()));
    }
    let inst = cfg.instance()?;
    let h = cfg.source()?;
    let domain = CuspDomain::new(inst.profiles.clone(), cfg.grid.xi_max)?;
    let s = weight_exponent(cfg.problem.p);
    // push-forward f = phi^s h evaluated pointwise in strip variables
    let f = |t: f64, xi: f64, eta: f64| -> C64 {
        match domain.inverse_map(xi, eta) {
            Ok((x, y)) => C64::new(domain.profiles.phi(x).0.powf(s) * h(t, x, y), 0.0),
            Err(_) => C64::new(f64::NAN, 0.0),
        }
    };
    let grid = cfg.grid.strip();
    let tl = time_line(nt);
    let ft = TimeField::from_fn(&tl, &grid, f);
    let w = solve_abstract(&ft, &inst.options)?.w;
    let mut rep = VerifyReport { title: "Operator solution vs finite-difference oracle".into(), checks: Vec::new(), seconds: 0.0 };
    let mut fh = std::fs::File::create(out.join("fd_diff.csv"))?;
    writeln!(fh, "# relative L2 difference (dimensionless) on the FD nodes; coarse tolerance {}", cfg.verify.fd_tol)?;
    writeln!(fh, "nt,n_xi,n_eta,unknowns,relative_difference")?;
    let mut diffs = Vec::new();
    for &(a, b, c) in levels {
        let g = FdGrid::new(a, b, c, cfg.grid.xi_max)?;
        let fd = solve_monolithic(&MonolithicSystem::assemble(g, cfg.problem.lambda, f, DEFAULT_SIZE_LIMIT)?)?;
        let d = relative_difference(&fd, &w)?;
        writeln!(fh, "{a},{b},{c},{},{d:e}", a * b * c)?;
        rep.push(Check::info(&format!("fd_diff_{a}x{b}x{c}"), d, "relative L2"));
        diffs.push(d);
    }
    if let Some(d) = diffs.first() {
        rep.push(Check::le("fd_coarse_agreement", *d, cfg.verify.fd_tol));
    }
    if diffs.len() > 1 {
        rep.push(Check::flag("fd_improves_under_refinement", diffs.windows(2).all(|w| w[1] < w[0]), ""));
    }
    emit(&rep, out, "compare_oracle")
}

pub fn regularity(cfg: &RunConfig, text: &str, out: &Path) -> Result<bool> {
    let inst = cfg.instance()?;
    let h = cfg.source()?;
    let (mut b, r) = regularity_study(&inst, &*h)?;
    b.config_echo = text.to_string();
    b.write_dir(&out.join("bundle"))?;
    write_regularity(&r, &out.join("regularity.csv"))?;
    let mut rep = VerifyReport { title: "Regularity study".into(), checks: Vec::new(), seconds: 0.0 };
    for (q, g) in &r.growth {
        rep.push(Check::le(&format!("{q}_growth"), *g, r.growth_tol).with_note("finest / coarsest seminorm"));
    }
    for f in &r.flags {
        rep.push(Check::info("flag", f64::NAN, f));
    }
    rep.push(Check::flag("regularity_pass", r.pass, ""));
    emit(&rep, out, "regularity_summary")
}

/// Generic plotting script for the emitted tables (data-only output).
pub fn write_plot_stub(out: &Path) -> Result<()> {
    let script = "\
# Plots the first two numeric columns of every CSV table given on the command line.
# usage: python3 plot_tables.py table.csv [more.csv ...]
import csv, sys
import matplotlib.pyplot as plt

for path in sys.argv[1:]:
    rows = [r for r in csv.reader(open(path)) if r and not r[0].startswith('#')]
    head, data = rows[0], rows[1:]
    xs, ys = [], []
    for r in data:
        try:
            xs.append(float(r[0])); ys.append(float(r[1]))
        except (ValueError, IndexError):
            pass
    plt.figure()
    plt.plot(xs, ys, 'o-')
    plt.xlabel(head[0]); plt.ylabel(head[1] if len(head) > 1 else '')
    plt.title(path)
    plt.savefig(path + '.png')
";
    std::fs::write(out.join("plot_tables.py"), script)?;
    Ok(())
}
