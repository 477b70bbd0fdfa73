//! The normalized iteration: build `h∘φ̃ᵢ / ‖h∘φ̃ᵢ‖₁`, transport it onto the
//! sites, normalize `∫φ* = −τ`, recenter at the minimum, record diagnostics.

use crate::convex_body::{assert_centered, ConvexBody};
use crate::error::{Error, Result};
use crate::functionals::{ding, ding_mabuchi, duality_gap_check_tol, DingMabuchi, FunctionalRecord, GapReport, NUM_TOL};
use crate::geometry::norm;
use crate::oracle::{exp_oracle_1d, power_oracle_1d, separable_oracle_2d};
use crate::ot_solver::{solve_step_warm, SolverOptions, SourceDensity, StepMethod};
use crate::potential::{
    from_sampler, generate_sites, growth_bounds_check, normalization_integral, normalize_for, recenter, EvaluationGrid, GrowthReport,
    LatticeKind, MaxAffinePotential, Sampler,
};
use crate::profile::{check_hypothesis_b1, Coupling, Profile, ProfileKind};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Starting potential.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSpec {
    /// `max_j ⟨x, y_j⟩ − |y_j|²/2`
    #[default]
    Default,
    /// `√(1 + |x|²)`
    Sqrt,
    /// One of `exp1d`, `power1d`, `separable2d`.
    Oracle(String),
}

struct SqrtSeed(usize);

impl Sampler for SqrtSeed {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, x: &[f64]) -> f64 {
        (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        x.iter().map(|a| a / v).collect()
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let v = self.value(x);
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = (if i == j { 1.0 } else { 0.0 }) / v - x[i] * x[j] / (v * v * v);
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct IterationConfig {
    pub body: ConvexBody,
    pub profile: Profile,
    pub coupling: Coupling,
    pub tau: f64,
    pub n_sites: usize,
    pub lattice: LatticeKind,
    pub site_seed: u64,
    pub grid_l: f64,
    pub grid_m: usize,
    pub mass_tol: f64,
    /// Sup-norm change of φ̃ on `[−L/2, L/2]ⁿ` at which the run stops.
    pub stop_tol: f64,
    pub max_iterations: usize,
    pub seed: SeedSpec,
    /// Admissible truncated mass in two dimensions.
    pub tail_tol: f64,
    pub num_tol: f64,
    pub method: StepMethod,
    pub w1: bool,
}

impl IterationConfig {
    pub fn new(body: ConvexBody, profile: Profile, tau: f64) -> Self {
        let dim = body.dim;
        IterationConfig {
            body,
            profile,
            coupling: profile.coupling(),
            tau,
            n_sites: if dim == 1 { 129 } else { 400 },
            lattice: LatticeKind::Square,
            site_seed: 0,
            grid_l: 8.0,
            grid_m: if dim == 1 { 257 } else { 129 },
            mass_tol: 1e-6,
            stop_tol: 1e-6,
            max_iterations: 60,
            seed: SeedSpec::Default,
            tail_tol: 1e-8,
            num_tol: NUM_TOL,
            method: StepMethod::Newton,
            w1: false,
        }
    }

    pub fn grid(&self) -> Result<EvaluationGrid> {
        EvaluationGrid::new(self.body.dim, self.grid_l, self.grid_m)
    }

    /// Invariants that do not need a run.
    pub fn validate(&self) -> Result<()> {
        assert_centered(&self.body, 1e-9)?;
        if self.profile.dim != self.body.dim {
            return Err(Error::InvalidConfig(format!("profile dimension {} on a body of dimension {}", self.profile.dim, self.body.dim)));
        }
        if self.coupling != self.profile.coupling() {
            return Err(Error::WrongProfile(format!("{:?} coupling with the {:?} profile", self.coupling, self.profile.kind)));
        }
        check_hypothesis_b1(&self.profile)?;
        if self.profile.is_power() && !(self.tau > 0.0) {
            return Err(Error::DomainError { what: "power profile needs τ > 0", value: self.tau });
        }
        if !self.tau.is_finite() {
            return Err(Error::DomainError { what: "τ", value: self.tau });
        }
        if !(self.mass_tol > 0.0) || !(self.stop_tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig("tolerances must be positive and max_iterations at least 1".into()));
        }
        Ok(())
    }
}

/// `h∘φ / ‖h∘φ‖₁` on the grid; the two-dimensional truncation must stay below `tail_tol`.
pub fn build_density(phi: &dyn Sampler, profile: &Profile, grid: &EvaluationGrid, tail_tol: f64) -> Result<SourceDensity> {
    SourceDensity::from_potential(phi, profile, grid, tail_tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub iter: usize,
    pub functionals: FunctionalRecord,
    /// F of the source potential φ̃ᵢ.
    pub f_source: f64,
    /// Cumulative translation aᵢ.
    pub translation: Vec<f64>,
    /// |a_{i+1} − aᵢ|
    pub drift: f64,
    pub sup_change: f64,
    /// Truncated (2D) or beyond-box (1D) source mass.
    pub tail_mass: f64,
    /// `∫_{|x| ≥ R} |x| dρᵢ` for R = L/4, L/2, 3L/4.
    pub tail_moments: [f64; 3],
    /// Growth-bound envelope for the same moments.
    pub tail_envelope: [f64; 3],
    pub w1: Option<(f64, f64)>,
    pub mass_residual: f64,
    pub solver_iterations: usize,
    pub growth: GrowthSummary,
    pub wall_seconds: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthSummary {
    pub r: f64,
    pub big_r: f64,
    pub lower_margin: f64,
    pub tau_margin: f64,
    pub upper_margin: f64,
    pub positivity_margin: f64,
}

impl From<&GrowthReport> for GrowthSummary {
    fn from(g: &GrowthReport) -> Self {
        GrowthSummary {
            r: g.r,
            big_r: g.big_r,
            lower_margin: g.lower_margin,
            tau_margin: g.tau_margin,
            upper_margin: g.upper_margin,
            positivity_margin: g.positivity_margin,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    /// Ding energy of the seed (exponential profile).
    pub initial_ding: Option<f64>,
    pub initial_f: f64,
    /// Largest |a_{i+1} − aᵢ| seen.
    pub drift_bound: f64,
    pub grid_l: f64,
    pub tau: f64,
    pub lambda: f64,
    pub profile_kind: Option<ProfileKind>,
}

impl IterationTrace {
    pub fn f_column(&self) -> Vec<f64> {
        std::iter::once(self.initial_f).chain(self.steps.iter().map(|s| s.functionals.f_value)).collect()
    }
}

/// A failed run with everything recorded before the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub trace: IterationTrace,
}

impl From<Error> for RunError {
    fn from(error: Error) -> Self {
        RunError { error, trace: IterationTrace::default() }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.trace.steps.len())
    }
}

fn seed_potential(cfg: &IterationConfig, sites: &[Vec<f64>], masses: &[f64]) -> Result<MaxAffinePotential> {
    let dim = cfg.body.dim;
    match &cfg.seed {
        SeedSpec::Default => MaxAffinePotential::new(sites.to_vec(), sites.iter().map(|y| 0.5 * y.iter().map(|v| v * v).sum::<f64>()).collect(), masses.to_vec()),
        SeedSpec::Sqrt => from_sampler(&SqrtSeed(dim), sites, masses),
        SeedSpec::Oracle(name) => {
            let o = match name.as_str() {
                "exp1d" => exp_oracle_1d(),
                "power1d" => power_oracle_1d(),
                "separable2d" => separable_oracle_2d(&cfg.profile)?,
                other => return Err(Error::InvalidConfig(format!("unknown oracle seed {other}"))),
            };
            if o.potential.dim() != dim {
                return Err(Error::InvalidConfig(format!("oracle seed {name} has dimension {}", o.potential.dim())));
            }
            from_sampler(&o.potential, sites, masses)
        }
    }
}

/// `∫_{|x| ≥ R} |x| dρ`: exact in one dimension, node sums in two.
pub fn tail_moment(rho: &SourceDensity, r: f64) -> f64 {
    match rho.dim() {
        1 => {
            let right = rho.segment(r, f64::INFINITY).1;
            let left = rho.segment(f64::NEG_INFINITY, -r).1;
            right - left
        }
        _ => {
            let nodes = rho.grid.nodes();
            nodes.iter().zip(&rho.masses).map(|(x, m)| if norm(x) >= r { norm(x) * m } else { 0.0 }).sum()
        }
    }
}

fn sup_change(a: &MaxAffinePotential, b: &MaxAffinePotential, nodes: &[Vec<f64>], window: &[usize]) -> f64 {
    window.iter().map(|&k| (a.eval(&nodes[k]) - b.eval(&nodes[k])).abs()).fold(0.0, f64::max)
}

/// Runs the iteration. Returns the final recentered normalized potential.
pub fn run(cfg: &IterationConfig) -> std::result::Result<(MaxAffinePotential, IterationTrace), RunError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let lam = cfg.body.volume;
    let power = cfg.profile.is_power();
    let exp = cfg.profile.kind == ProfileKind::Exponential;
    let (sites, masses) = generate_sites(&cfg.body, cfg.n_sites, cfg.lattice, cfg.site_seed)?;
    let seed = seed_potential(cfg, &sites, &masses)?;
    let phi0 = normalize_for(&seed, cfg.tau, power)?;
    let (a0, _) = phi0.min_face()?;
    let mut phi = recenter(&phi0, &a0);
    let nodes = grid.nodes();
    let window = grid.window(0.5 * cfg.grid_l);
    let opts = SolverOptions { mass_tol: cfg.mass_tol, max_iters: 500, damping: 0.5, method: cfg.method };
    let mut trace = IterationTrace {
        grid_l: cfg.grid_l,
        tau: cfg.tau,
        lambda: lam,
        profile_kind: Some(cfg.profile.kind),
        ..Default::default()
    };
    let fail = |error: Error, trace: &IterationTrace| RunError { error, trace: trace.clone() };
    let mut rho = match build_density(&phi, &cfg.profile, &grid, cfg.tail_tol) {
        Ok(r) => r,
        Err(e) => return Err(fail(e, &trace)),
    };
    trace.initial_f = rho.generator.map(|g| g.f_value).unwrap_or(f64::NAN);
    let mut prev_ding = if exp {
        match ding(&phi, &cfg.body, &grid) {
            Ok(d) => Some(d),
            Err(e) => return Err(fail(e, &trace)),
        }
    } else {
        None
    };
    trace.initial_ding = prev_ding;
    let mut source_r = match growth_bounds_check(&phi, cfg.tau, &cfg.body, &grid) {
        Ok(g) => g.r,
        Err(e) => return Err(fail(e, &trace)),
    };
    let mut translation = a0;
    let mut prev_rho: Option<SourceDensity> = None;
    for iter in 1..=cfg.max_iterations {
        let t0 = Instant::now();
        let step = (|| -> Result<(MaxAffinePotential, StepRecord, SourceDensity)> {
            let (raw, state) = solve_step_warm(&rho, &sites, &masses, &phi.weights, &opts)?;
            let next = normalize_for(&raw, cfg.tau, power)?;
            let gaps: GapReport = duality_gap_check_tol(&next, &rho, &cfg.profile, cfg.coupling, cfg.num_tol, iter)?;
            let dm: Option<DingMabuchi> = if exp { Some(ding_mabuchi(&next, &rho, &cfg.body, &grid)?) } else { None };
            if let (Some(d), Some(prev)) = (dm, prev_ding) {
                let (g1, g2) = (prev - d.mabuchi, d.mabuchi - d.ding);
                if g1 < -cfg.num_tol || g2 < -cfg.num_tol {
                    return Err(Error::MonotonicityViolated { step: iter, gap1: g1, gap2: g2 });
                }
            }
            let (a, _) = next.min_face()?;
            let tilde = recenter(&next, &a);
            let growth = growth_bounds_check(&tilde, cfg.tau, &cfg.body, &grid)?;
            let change = sup_change(&tilde, &phi, &nodes, &window);
            let tail_mass = match &rho.tails {
                Some(t) => t.left_mass() + t.right_mass(),
                None => rho.tail_mass_bound,
            };
            let l = cfg.grid_l;
            let radii = [0.25 * l, 0.5 * l, 0.75 * l];
            let tail_moments = radii.map(|r| tail_moment(&rho, r));
            let log_z = rho.generator.map_or(0.0, |g| g.log_z);
            let tail_envelope = radii.map(|r| tail_envelope(&cfg.profile, cfg.tau / lam, source_r, r, log_z));
            let w1 = match (&prev_rho, cfg.w1) {
                (Some(p), true) => Some(w1_diagnostic(p, &rho)?),
                _ => None,
            };
            let am = -normalization_integral(&next) / lam;
            let rec = StepRecord {
                iter,
                functionals: FunctionalRecord::from_gaps(&gaps, dm, am),
                f_source: gaps.f_source,
                translation: a.clone(),
                drift: norm(&a),
                sup_change: change,
                tail_mass,
                tail_moments,
                tail_envelope,
                w1,
                mass_residual: state.residual,
                solver_iterations: state.iterations,
                growth: GrowthSummary::from(&growth),
                wall_seconds: 0.0,
            };
            let next_rho = build_density(&tilde, &cfg.profile, &grid, cfg.tail_tol)?;
            Ok((tilde, rec, next_rho))
        })();
        let (tilde, mut rec, next_rho) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, &trace)),
        };
        for (t, d) in translation.iter_mut().zip(&rec.translation) {
            *t += d;
        }
        rec.translation = translation.clone();
        rec.wall_seconds = t0.elapsed().as_secs_f64();
        trace.drift_bound = trace.drift_bound.max(rec.drift);
        prev_ding = rec.functionals.ding.is_finite().then_some(rec.functionals.ding);
        source_r = rec.growth.r;
        let done = rec.sup_change <= cfg.stop_tol;
        trace.steps.push(rec);
        prev_rho = Some(std::mem::replace(&mut rho, next_rho));
        phi = tilde;
        if done {
            trace.converged = true;
            break;
        }
    }
    Ok((phi, trace))
}

/// One more step from a recentered normalized potential: the next recentered
/// normalized potential and the source it was transported from.
pub fn step_once(cfg: &IterationConfig, phi: &MaxAffinePotential) -> Result<(MaxAffinePotential, SourceDensity)> {
    let grid = cfg.grid()?;
    let rho = build_density(phi, &cfg.profile, &grid, cfg.tail_tol)?;
    let opts = SolverOptions { mass_tol: cfg.mass_tol, max_iters: 500, damping: 0.5, method: cfg.method };
    let (raw, _) = solve_step_warm(&rho, &phi.sites, &phi.site_masses, &phi.weights, &opts)?;
    let next = normalize_for(&raw, cfg.tau, cfg.profile.is_power())?;
    let (a, _) = next.min_face()?;
    Ok((recenter(&next, &a), rho))
}

/// W1 between two sources on the same grid: exact in one dimension
/// (returned twice), a (lower, upper) sandwich in two.
pub fn w1_diagnostic(rho_a: &SourceDensity, rho_b: &SourceDensity) -> Result<(f64, f64)> {
    if rho_a.grid != rho_b.grid {
        return Err(Error::GridMismatch);
    }
    match rho_a.dim() {
        1 => {
            let v = w1_exact_1d(rho_a, rho_b);
            Ok((v, v))
        }
        _ => Ok(w1_sandwich_2d(rho_a, rho_b)),
    }
}

fn w1_exact_1d(a: &SourceDensity, b: &SourceDensity) -> f64 {
    let e = a.edges();
    let mut acc = 0.0;
    let (mut fa, mut fb) = (a.cdf(e[0]), b.cdf(e[0]));
    for k in 0..a.masses.len() {
        let (ga, gb) = (fa + a.masses[k], fb + b.masses[k]);
        let (d0, d1) = (fa - fb, ga - gb);
        let w = e[k + 1] - e[k];
        // |linear| on the cell
        acc += if d0 * d1 >= 0.0 { 0.5 * (d0.abs() + d1.abs()) * w } else { 0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs()) * w };
        fa = ga;
        fb = gb;
    }
    let l = e[e.len() - 1];
    let de = |f: &dyn Fn(f64) -> f64, x0: f64, sign: f64| {
        quadrature::double_exponential::integrate(|u| if u >= 1.0 { 0.0 } else { f(x0 + sign * u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) }, 0.0, 1.0, 1e-13)
            .integral
    };
    if a.tails.is_some() || b.tails.is_some() {
        acc += de(&|x| (a.cdf(x) - b.cdf(x)).abs(), e[0], -1.0);
        // survival functions directly; 1 − cdf loses everything to cancellation
        let sf = |r: &SourceDensity, x: f64| r.segment(x, f64::INFINITY).0;
        acc += de(&|x| (sf(a, x) - sf(b, x)).abs(), l, 1.0);
    }
    acc
}

fn w1_sandwich_2d(a: &SourceDensity, b: &SourceDensity) -> (f64, f64) {
    let nodes = a.grid.nodes();
    let e = a.edges();
    let m = a.grid.points_per_axis;
    // 1-Lipschitz test functions: ±coordinates and |x|
    let test = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
        let ia: f64 = nodes.iter().zip(&a.masses).map(|(x, w)| w * f(x)).sum();
        let ib: f64 = nodes.iter().zip(&b.masses).map(|(x, w)| w * f(x)).sum();
        (ia - ib).abs()
    };
    let ma = a.mean();
    let mb = b.mean();
    let lower = (ma[0] - mb[0]).abs().max((ma[1] - mb[1]).abs()).max(test(&|x| norm(x)));
    // hierarchical greedy plan: surplus at each level moves inside the parent block
    let mut diff: Vec<f64> = a.masses.iter().zip(&b.masses).map(|(x, y)| x - y).collect();
    let mut lo: Vec<f64> = e[..m].to_vec();
    let mut hi: Vec<f64> = e[1..].to_vec();
    let mut k = m;
    let mut upper = 0.0;
    while k > 1 {
        let kp = k.div_ceil(2);
        let mut nd = vec![0.0; kp * kp];
        let mut nlo = vec![0.0; kp];
        let mut nhi = vec![0.0; kp];
        for p in 0..kp {
            nlo[p] = lo[2 * p];
            nhi[p] = hi[(2 * p + 1).min(k - 1)];
        }
        for j in 0..k {
            for i in 0..k {
                let d = diff[i + k * j];
                let (pi, pj) = (i / 2, j / 2);
                let wx = nhi[pi] - nlo[pi];
                let wy = nhi[pj] - nlo[pj];
                upper += 0.5 * d.abs() * wx.hypot(wy);
                nd[pi + kp * pj] += d;
            }
        }
        diff = nd;
        lo = nlo;
        hi = nhi;
        k = kp;
    }
    (lower, upper.max(lower))
}

#[derive(Clone, Debug, Serialize)]
pub struct TightnessReport {
    pub radii: [f64; 3],
    /// Largest tail moment over the recorded steps, per radius.
    pub moments: [f64; 3],
    /// Largest envelope over the recorded steps, per radius.
    pub envelope: [f64; 3],
    pub decreasing_in_r: bool,
    /// Every step's moments lie below that step's envelope.
    pub below_envelope: bool,
    /// Tail moments rising over the last three steps.
    pub growing: bool,
}

/// Uniform first-moment tails of the sources against the envelope
/// allowed by the lower growth bound `φ̃ ≥ τ/λ + r|x|`.
pub fn tightness_check(trace: &IterationTrace) -> Result<TightnessReport> {
    let n = trace.steps.len();
    if n < 3 {
        return Err(Error::PreconditionViolated(format!("tightness needs at least 3 steps, have {n}")));
    }
    let l = trace.grid_l;
    let radii = [0.25 * l, 0.5 * l, 0.75 * l];
    let mut moments = [0.0f64; 3];
    let mut envelope = [0.0f64; 3];
    let mut below_envelope = true;
    let mut decreasing_in_r = true;
    for s in &trace.steps {
        for k in 0..3 {
            moments[k] = moments[k].max(s.tail_moments[k]);
            envelope[k] = envelope[k].max(s.tail_envelope[k]);
            below_envelope &= s.tail_moments[k] <= s.tail_envelope[k];
        }
        decreasing_in_r &= s.tail_moments[0] >= s.tail_moments[1] && s.tail_moments[1] >= s.tail_moments[2];
    }
    let last: Vec<f64> = trace.steps[n - 3..].iter().map(|s| s.tail_moments[1]).collect();
    let growing = last[0] < last[1] && last[1] < last[2] && last[2] > 1.01 * last[0];
    Ok(TightnessReport { radii, moments, envelope, decreasing_in_r, below_envelope, growing })
}

/// `Z⁻¹ ∫_{|x| ≥ R} |x| h(c + r|x|) dx`.
pub fn tail_envelope(profile: &Profile, c: f64, r: f64, big_r: f64, log_z: f64) -> f64 {
    if !(r > 0.0) {
        return f64::INFINITY;
    }
    let radial = match profile.dim {
        1 => 2.0 * profile.linear_integrals(c, r, big_r, f64::INFINITY)[1],
        _ => match profile.kind {
            ProfileKind::Exponential => {
                2.0 * std::f64::consts::PI * (-(c + r * big_r)).exp() * (big_r * big_r / r + 2.0 * big_r / (r * r) + 2.0 / (r * r * r))
            }
            ProfileKind::Power => {
                let f = |x: f64| x * x * profile.h_fast(c + r * x);
                let g = |u: f64| if u >= 1.0 { 0.0 } else { f(big_r + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) };
                2.0 * std::f64::consts::PI * quadrature::double_exponential::integrate(g, 0.0, 1.0, 1e-14).integral
            }
        },
    };
    radial * (-log_z).exp()
}
