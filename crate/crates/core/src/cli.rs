//! Command-line front end: run specs, artifacts and reports.

use crate::affine_geom::{affine_report, affine_report_with, f_map, iterate_affine_report, AffineReport};
use crate::convex_body::{assert_centered, build_body, delzant_check, ConvexBody};
use crate::error::{Error, Result};
use crate::iteration::{run, step_once, IterationConfig, IterationTrace, SeedSpec};
use crate::oracle::{exp_oracle_1d, power_oracle_1d, radial_residual, radial_shooting, separable_oracle_2d, OracleSolution};
use crate::ot_solver::StepMethod;
use crate::potential::{EvaluationGrid, LatticeKind, MaxAffinePotential};
use crate::profile::{Profile, ProfileKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_UNCENTERED: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
/// A run that started but failed (solver, monotonicity, positivity).
pub const EXIT_RUN_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ma-iterate", version, about = "Normalized Monge-Ampere equation solved by repeated semi-discrete optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the iteration described by a spec file.
    Iterate(IterateArgs),
    /// Affine-sphere diagnostics for a power-profile potential or an oracle.
    AffineReport(AffineArgs),
    /// Volume, barycenter, inradius and Delzant verdict of a body file.
    ValidateBody { path: PathBuf },
    /// Residual statistics of the closed-form and shooting oracles.
    OracleCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProfileName {
    Exp,
    Power,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub profile: Option<ProfileName>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub grid_l: Option<f64>,
    #[arg(long)]
    pub grid_m: Option<usize>,
    #[arg(long)]
    pub mass_tol: Option<f64>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Site-generation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IterateArgs {
    spec: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct AffineArgs {
    /// `final_potential.txt` from a power-profile run.
    potential: Option<PathBuf>,
    /// power1d, radial-power (also exp1d, separable2d, radial-exp, which are rejected).
    #[arg(long, conflicts_with = "potential")]
    oracle: Option<String>,
    /// Exit 0 iff the sphere residual is at most this.
    #[arg(long, default_value_t = 5e-2)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `dim` and `vertices`; the whole content of a body file, or the `[body]` table of a spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
}

impl BodySpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(one_line(&e.to_string())))
    }

    pub fn build(&self) -> Result<ConvexBody> {
        if let Some(v) = self.vertices.iter().find(|v| v.len() != self.dim) {
            return Err(Error::Parse(format!("vertex {v:?} does not have dimension {}", self.dim)));
        }
        build_body(&self.vertices)
    }
}

fn default_p() -> f64 {
    1.0
}
fn default_grid_l() -> f64 {
    8.0
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iterations() -> usize {
    60
}
fn default_tail_tol() -> f64 {
    1e-8
}
fn default_method() -> StepMethod {
    StepMethod::Newton
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn yes() -> bool {
    true
}

/// Everything a run needs, as read from a spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub profile: ProfileName,
    #[serde(default = "default_p")]
    pub p: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    #[serde(default)]
    pub lattice: LatticeKind,
    #[serde(default)]
    pub site_seed: u64,
    #[serde(default = "default_grid_l")]
    pub grid_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_m: Option<usize>,
    #[serde(default = "default_tol")]
    pub mass_tol: f64,
    #[serde(default = "default_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: SeedSpec,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_method")]
    pub method: StepMethod,
    #[serde(default)]
    pub w1: bool,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "yes")]
    pub plot: bool,
    pub body: BodySpec,
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(one_line(&e.to_string())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.profile {
            self.profile = v;
        }
        if let Some(v) = o.p {
            self.p = v;
        }
        if let Some(v) = o.tau {
            self.tau = v;
        }
        if let Some(v) = o.sites {
            self.n_sites = Some(v);
        }
        if let Some(v) = o.grid_l {
            self.grid_l = v;
        }
        if let Some(v) = o.grid_m {
            self.grid_m = Some(v);
        }
        if let Some(v) = o.mass_tol {
            self.mass_tol = v;
        }
        if let Some(v) = o.stop_tol {
            self.stop_tol = v;
        }
        if let Some(v) = o.max_iters {
            self.max_iterations = v;
        }
        if let Some(v) = o.seed {
            self.site_seed = v;
        }
        if let Some(v) = &o.out {
            self.out_dir = v.clone();
        }
    }

    pub fn profile(&self) -> Result<Profile> {
        match self.profile {
            ProfileName::Exp => Ok(Profile::exponential(self.body.dim)),
            ProfileName::Power => Profile::power(self.body.dim, self.p),
        }
    }

    pub fn to_config(&self) -> Result<IterationConfig> {
        let body = self.body.build()?;
        let mut cfg = IterationConfig::new(body, self.profile()?, self.tau);
        if let Some(n) = self.n_sites {
            cfg.n_sites = n;
        }
        if let Some(m) = self.grid_m {
            cfg.grid_m = m;
        }
        cfg.lattice = self.lattice;
        cfg.site_seed = self.site_seed;
        cfg.grid_l = self.grid_l;
        cfg.mass_tol = self.mass_tol;
        cfg.stop_tol = self.stop_tol;
        cfg.max_iterations = self.max_iterations;
        cfg.seed = self.seed.clone();
        cfg.tail_tol = self.tail_tol;
        cfg.method = self.method;
        cfg.w1 = self.w1;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses arguments, honours `MA_ITERATE_THREADS`, returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var("MA_ITERATE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Iterate(a) => cmd_iterate(&a.spec, &a.overrides),
        Command::AffineReport(a) => cmd_affine_report(a.potential.as_deref(), a.oracle.as_deref(), a.threshold, a.out.as_deref()),
        Command::ValidateBody { path } => cmd_validate_body(&path),
        Command::OracleCheck => cmd_oracle_check(),
    }
}

fn report_error(e: &dyn std::fmt::Display) {
    eprintln!("error: {}", one_line(&e.to_string()));
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn cmd_iterate(spec_path: &Path, overrides: &Overrides) -> i32 {
    let prepared = (|| -> Result<(RunSpec, IterationConfig)> {
        let mut spec = RunSpec::parse(&read(spec_path)?)?;
        spec.apply(overrides);
        let cfg = spec.to_config()?;
        Ok((spec, cfg))
    })();
    let (spec, cfg) = match prepared {
        Ok(v) => v,
        Err(e) => {
            report_error(&e);
            return EXIT_INVALID;
        }
    };
    let write = |trace: &IterationTrace, phi: Option<&MaxAffinePotential>| -> Result<()> {
        std::fs::create_dir_all(&spec.out_dir)?;
        std::fs::write(spec.out_dir.join("run.toml"), spec.to_toml())?;
        std::fs::write(spec.out_dir.join("trace.csv"), trace_csv(trace, cfg.body.dim)?)?;
        if let Some(phi) = phi {
            std::fs::write(spec.out_dir.join("final_potential.txt"), potential_text(phi, &spec))?;
        }
        if spec.plot {
            std::fs::write(spec.out_dir.join("convergence.svg"), convergence_svg(trace))?;
        }
        Ok(())
    };
    match run(&cfg) {
        Ok((phi, trace)) => {
            if let Err(e) = write(&trace, Some(&phi)) {
                report_error(&e);
                return EXIT_RUN_FAILED;
            }
            let last = trace.steps.last();
            println!(
                "{} after {} steps: F = {:.12}, sup change {:.3e}",
                if trace.converged { "converged" } else { "stopped" },
                trace.steps.len(),
                last.map_or(trace.initial_f, |s| s.functionals.f_value),
                last.map_or(f64::NAN, |s| s.sup_change)
            );
            if trace.converged {
                EXIT_CONVERGED
            } else {
                EXIT_MAX_ITERATIONS
            }
        }
        Err(e) => {
            let _ = write(&e.trace, None);
            report_error(&e);
            if e.trace.steps.is_empty() && is_validation(&e.error) {
                EXIT_INVALID
            } else {
                EXIT_RUN_FAILED
            }
        }
    }
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateBody(_)
            | Error::BarycenterNotAtOrigin(_)
            | Error::OriginNotInterior(_)
            | Error::UnsupportedDimension(_)
            | Error::DomainError { .. }
            | Error::HypothesisViolated(_)
            | Error::WrongProfile(_)
            | Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::TailTooHeavy { .. }
            | Error::PositivityLost { .. }
    )
}

const TRACE_DOC: &str = "# iter: step i+1; f_source: F of the recentered source potential; f_value: F of the new potential; \
pairing: <phi_next, rho>; g_value: g(pairing, G); gap1 = f_source - g_value; gap2 = g_value - f_value; \
ding, mabuchi: exponential profile only (NaN otherwise); aubin_mabuchi: -(1/lambda) sum nu_j w_j; \
sup_change: sup |phi_next - phi| on [-L/2, L/2]^n; drift: |a_{i+1} - a_i|; a_k: cumulative translation; \
tail_mass: mass outside the box; tail_moment_k, tail_envelope_k: first moments beyond R = kL/4 and their growth-bound envelope; \
mass_residual: max relative per-site mass error; solver_iterations; r, big_r: growth constants; \
*_margin: slack of the growth and positivity bounds; w1_lower, w1_upper: W1 to the previous source (empty if off)";

/// CSV trace with a leading comment row documenting the columns. Wall times are omitted so
/// identical runs give identical files.
pub fn trace_csv(trace: &IterationTrace, dim: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "iter",
        "f_source",
        "f_value",
        "pairing",
        "g_value",
        "gap1",
        "gap2",
        "ding",
        "mabuchi",
        "aubin_mabuchi",
        "sup_change",
        "drift",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=dim).map(|k| format!("a_{k}")));
    for s in [
        "tail_mass",
        "tail_moment_1",
        "tail_moment_2",
        "tail_moment_3",
        "tail_envelope_1",
        "tail_envelope_2",
        "tail_envelope_3",
        "mass_residual",
        "solver_iterations",
        "r",
        "big_r",
        "lower_margin",
        "tau_margin",
        "upper_margin",
        "positivity_margin",
        "w1_lower",
        "w1_upper",
    ] {
        header.push(s.into());
    }
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for s in &trace.steps {
        let f = &s.functionals;
        let mut row: Vec<String> = vec![s.iter.to_string()];
        row.extend([s.f_source, f.f_value, f.pairing, f.g_value, f.gap1, f.gap2, f.ding, f.mabuchi, f.aubin_mabuchi, s.sup_change, s.drift].map(|v| v.to_string()));
        row.extend(s.translation.iter().map(|v| v.to_string()));
        row.push(s.tail_mass.to_string());
        row.extend(s.tail_moments.iter().chain(&s.tail_envelope).map(|v| v.to_string()));
        row.push(s.mass_residual.to_string());
        row.push(s.solver_iterations.to_string());
        let g = &s.growth;
        row.extend([g.r, g.big_r, g.lower_margin, g.tau_margin, g.upper_margin, g.positivity_margin].map(|v| v.to_string()));
        match s.w1 {
            Some((lo, hi)) => row.extend([lo.to_string(), hi.to_string()]),
            None => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?).expect("utf-8");
    Ok(format!("{TRACE_DOC}\n{body}"))
}

/// Header of a potential dump: the run parameters needed to continue it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialHeader {
    profile: ProfileName,
    p: f64,
    tau: f64,
    grid_l: f64,
    grid_m: usize,
    mass_tol: f64,
    tail_tol: f64,
    body: BodySpec,
}

/// `# `-prefixed TOML header, then one row per site: coordinates, weight, mass.
pub fn potential_text(phi: &MaxAffinePotential, spec: &RunSpec) -> String {
    let cfg_m = spec.grid_m.unwrap_or(if phi.dim == 1 { 257 } else { 129 });
    let h = PotentialHeader {
        profile: spec.profile,
        p: spec.p,
        tau: spec.tau,
        grid_l: spec.grid_l,
        grid_m: cfg_m,
        mass_tol: spec.mass_tol,
        tail_tol: spec.tail_tol,
        body: spec.body.clone(),
    };
    let mut out = String::from("# max_j <x, y_j> - w_j; columns: y_1..y_n, w, site mass\n");
    for line in toml::to_string(&h).expect("header serializes").lines() {
        let _ = writeln!(out, "# {line}");
    }
    for ((y, w), m) in phi.sites.iter().zip(&phi.weights).zip(&phi.site_masses) {
        let cols: Vec<String> = y.iter().chain([w, m]).map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", cols.join(" "));
    }
    out
}

fn parse_potential(text: &str) -> Result<(PotentialHeader, MaxAffinePotential)> {
    let mut header = String::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            if !c.contains("columns:") {
                header.push_str(c.trim_start());
                header.push('\n');
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?);
    }
    let h: PotentialHeader = toml::from_str(&header).map_err(|e| Error::Parse(one_line(&e.to_string())))?;
    let n = h.body.dim;
    if rows.is_empty() || rows.iter().any(|r| r.len() != n + 2) {
        return Err(Error::Parse(format!("expected rows of {} numbers", n + 2)));
    }
    let sites = rows.iter().map(|r| r[..n].to_vec()).collect();
    let weights = rows.iter().map(|r| r[n]).collect();
    let masses = rows.iter().map(|r| r[n + 1]).collect();
    Ok((h, MaxAffinePotential::new(sites, weights, masses)?))
}

/// Two log-scale panels: F and the sup-norm change against the iteration.
pub fn convergence_svg(trace: &IterationTrace) -> String {
    let f = trace.f_column();
    let change: Vec<f64> = trace.steps.iter().map(|s| s.sup_change).collect();
    let (w, h, pad) = (640.0, 240.0, 48.0);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="11">"#, 2.0 * h);
    // F may be negative (exponential profile): plot F − min F + 1e-16 on the log axis.
    let fmin = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_shift: Vec<f64> = f.iter().map(|v| v - fmin + 1e-16).collect();
    panel(&mut out, &f_shift, 0, "F - min F", w, h, pad);
    panel(&mut out, &change, 1, "sup change", w, h, pad);
    out.push_str("</svg>\n");
    out
}

fn panel(out: &mut String, ys: &[f64], row: usize, label: &str, w: f64, h: f64, pad: f64) {
    let top = row as f64 * h;
    let logs: Vec<f64> = ys.iter().map(|v| v.max(1e-300).log10()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil().max(lo + 1.0);
    let nx = (ys.len().max(2) - 1) as f64;
    let px = |i: usize| pad + (w - 2.0 * pad) * i as f64 / nx;
    let py = |l: f64| top + h - pad + (h - 2.0 * pad) * (lo - l) / (hi - lo);
    let _ = writeln!(out, r##"<rect x="{pad}" y="{}" width="{}" height="{}" fill="none" stroke="#888"/>"##, top + pad, w - 2.0 * pad, h - 2.0 * pad);
    let _ = writeln!(out, r#"<text x="{pad}" y="{}">{label} (log10, {lo} to {hi})</text>"#, top + pad - 8.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">iteration</text>"#, w - pad - 50.0, top + h - pad + 16.0);
    if logs.is_empty() {
        return;
    }
    let pts: Vec<String> = logs.iter().enumerate().map(|(i, l)| format!("{:.2},{:.2}", px(i), py(*l))).collect();
    let _ = writeln!(out, r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
}

/// Immersed curve (n = 1) or its `x₂ = 0` slice (n = 2) as an SVG polyline.
fn immersion_svg(points: &[(f64, f64)]) -> String {
    let (w, pad) = (480.0, 32.0);
    let xs = points.iter().map(|p| p.0);
    let ys = points.iter().map(|p| p.1);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", pad + (w - 2.0 * pad) * (x - x0) / span, w - pad - (w - 2.0 * pad) * (y - y0) / span))
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{w}\">\n<polyline fill=\"none\" stroke=\"#a8321f\" stroke-width=\"1.5\" points=\"{}\"/>\n</svg>\n",
        pts.join(" ")
    )
}

struct Subject {
    report: AffineReport,
    curve: Vec<(f64, f64)>,
}

fn oracle_subject(name: &str) -> Result<Subject> {
    let (o, psi_step, grid) = match name {
        "power1d" => (power_oracle_1d(), 1e-3, EvaluationGrid::new(1, 8.0, 257)?),
        "radial-power" => {
            let pw = Profile::power(2, 1.0)?;
            (radial_shooting(&pw, 1.0, 2.0 * std::f64::consts::PI / 3.0)?, 1e-2, EvaluationGrid::new(2, 8.0, 129)?)
        }
        "exp1d" => return Err(Error::WrongProfile("exp1d is an exponential-profile oracle".into())),
        "separable2d" | "radial-exp" => return Err(Error::WrongProfile(format!("{name} is an exponential-profile oracle"))),
        other => return Err(Error::InvalidConfig(format!("unknown oracle {other}"))),
    };
    let report = if psi_step == 1e-3 { affine_report(&o.potential, &o.body, &grid)? } else { affine_report_with(&o.potential, &o.body, &grid, psi_step)? };
    let n = o.body.dim;
    let curve = (0..=200)
        .map(|i| {
            let t = -4.0 + 0.04 * i as f64;
            let x: Vec<f64> = if n == 1 { vec![t] } else { vec![t, 0.0] };
            let f = f_map(&o.potential, &x);
            (f[0], f[n])
        })
        .collect();
    Ok(Subject { report, curve })
}

fn potential_subject(path: &Path) -> Result<Subject> {
    let (h, phi) = parse_potential(&read(path)?)?;
    if h.profile != ProfileName::Power {
        return Err(Error::WrongProfile("affine geometry needs the power profile".into()));
    }
    if h.p != 1.0 {
        return Err(Error::WrongProfile(format!("affine spheres need p = 1, got {}", h.p)));
    }
    let body = h.body.build()?;
    let mut cfg = IterationConfig::new(body.clone(), Profile::power(h.body.dim, 1.0)?, h.tau);
    cfg.grid_l = h.grid_l;
    cfg.grid_m = h.grid_m;
    cfg.mass_tol = h.mass_tol;
    cfg.tail_tol = h.tail_tol;
    cfg.validate()?;
    let (next, source) = step_once(&cfg, &phi)?;
    let report = iterate_affine_report(&next, &source, &body, 2)?;
    let n = body.dim;
    // f is constant on each Laguerre cell: the immersed surface is the point set (y_j, w_j).
    let mut curve: Vec<(f64, f64)> = next.sites.iter().zip(&next.weights).filter(|(y, _)| n == 1 || y[1].abs() < 1e-9).map(|(y, w)| (y[0], *w)).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Subject { report, curve })
}

pub fn cmd_affine_report(potential: Option<&Path>, oracle: Option<&str>, threshold: f64, out: Option<&Path>) -> i32 {
    let subject = match (potential, oracle) {
        (_, Some(name)) => oracle_subject(name),
        (Some(p), None) => potential_subject(p),
        (None, None) => Err(Error::InvalidConfig("give a potential file or --oracle".into())),
    };
    let s = match subject {
        Ok(s) => s,
        Err(e) => {
            report_error(&e);
            return EXIT_INVALID;
        }
    };
    let text = toml::to_string(&s.report).expect("report serializes");
    print!("{text}");
    if let Some(dir) = out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("affine_report.toml"), &text))
            .and_then(|_| std::fs::write(dir.join("immersion.svg"), immersion_svg(&s.curve)));
        if let Err(e) = written {
            report_error(&e);
            return EXIT_RUN_FAILED;
        }
    }
    if s.report.sphere_residual <= threshold {
        0
    } else {
        1
    }
}

pub fn cmd_validate_body(path: &Path) -> i32 {
    let body = match read(path).and_then(|t| BodySpec::parse(&t)).and_then(|b| b.build()) {
        Ok(b) => b,
        Err(e) => {
            report_error(&e);
            return EXIT_INVALID;
        }
    };
    println!("dim = {}", body.dim);
    println!("volume = {}", body.volume);
    println!("barycenter = {:?}", body.barycenter);
    println!("inradius = {}", body.inradius);
    match delzant_check(&body) {
        Ok(v) => println!("delzant = {v}"),
        Err(e) => println!("delzant = false ({})", one_line(&e.to_string())),
    }
    match assert_centered(&body, 1e-9) {
        Ok(()) => {
            println!("centered = true");
            0
        }
        Err(e) => {
            println!("centered = false ({e})");
            EXIT_UNCENTERED
        }
    }
}

fn oracle_line(label: &str, o: &OracleSolution, residual: Result<f64>) -> bool {
    match residual {
        Ok(r) => {
            println!("{label:<14} {:<12} tau = {:<22} residual = {r:.3e}", format!("{:?}", o.profile.kind).to_lowercase(), o.tau);
            true
        }
        Err(e) => {
            println!("{label:<14} FAILED {}", one_line(&e.to_string()));
            false
        }
    }
}

pub fn cmd_oracle_check() -> i32 {
    let mut ok = true;
    for o in [exp_oracle_1d(), power_oracle_1d()] {
        ok &= oracle_line(o.name, &o, o.self_check());
    }
    match separable_oracle_2d(&Profile::exponential(2)) {
        Ok(o) => ok &= oracle_line(o.name, &o, o.self_check()),
        Err(e) => {
            report_error(&e);
            ok = false;
        }
    }
    for (profile, tau) in [(Profile::exponential(2), 1.0), (Profile::power(2, 1.0).expect("s = 3"), 2.0 * std::f64::consts::PI / 3.0)] {
        match radial_shooting(&profile, 1.0, tau) {
            Ok(o) => {
                let r = radial_residual(&o);
                let label = if o.profile.kind == ProfileKind::Power { "radial-power" } else { "radial-exp" };
                ok &= oracle_line(label, &o, o.self_check().map(|_| r));
            }
            Err(e) => {
                report_error(&e);
                ok = false;
            }
        }
    }
    if ok {
        0
    } else {
        1
    }
}
