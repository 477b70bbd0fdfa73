//! Legendre graph immersions `f(x) = (∇φ, ⟨x,∇φ⟩ − φ)`, their affine normal,
//! shape operator, affine surface area, dual immersion and cone measures.

use crate::convex_body::{polar, ConvexBody};
use crate::error::{Error, Result};
use crate::functionals::g_of;
use crate::geometry::{det, dot, inverse, is_positive_definite, norm};
use crate::laguerre;
use crate::ot_solver::{solve_step, SolverOptions, SourceDensity};
use crate::potential::{fd_gradient, fd_hessian, EvaluationGrid, MaxAffinePotential, Sampler};
use crate::profile::{power_integral, Profile};
use rayon::prelude::*;
use serde::Serialize;

/// Second-order data of φ and of `ψ = det(∇²φ)^{−1/(n+2)}` at one point.
#[derive(Clone, Debug)]
pub struct LocalJet {
    pub x: Vec<f64>,
    pub phi: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub det: f64,
    pub psi: f64,
    pub psi_grad: Vec<f64>,
    pub psi_hess: Vec<f64>,
}

/// ψ of a smooth sampler.
struct Psi<'a>(&'a dyn Sampler);

impl Sampler for Psi<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let n = self.0.dim();
        det(&self.0.hessian(x), n).powf(-1.0 / (n as f64 + 2.0))
    }
}

/// Jet of an analytic sampler; derivatives of ψ by central differences.
pub fn analytic_jet(phi: &dyn Sampler, x: &[f64]) -> Result<LocalJet> {
    analytic_jet_with(phi, x, 1e-3)
}

/// [`analytic_jet`] with the relative step of the second differences of ψ.
pub fn analytic_jet_with(phi: &dyn Sampler, x: &[f64], psi_step: f64) -> Result<LocalJet> {
    let n = phi.dim();
    let hess = phi.hessian(x);
    if !is_positive_definite(&hess, n) {
        return Err(Error::NonconvexSample(x.to_vec()));
    }
    let psi = Psi(phi);
    let scale = 1.0 + norm(x);
    let d = det(&hess, n);
    Ok(LocalJet {
        x: x.to_vec(),
        phi: phi.value(x),
        grad: phi.gradient(x),
        hess,
        det: d,
        psi: d.powf(-1.0 / (n as f64 + 2.0)),
        psi_grad: fd_gradient(|p| psi.value(p), x, 1e-4 * scale),
        psi_hess: fd_hessian(|p| psi.value(p), x, psi_step * scale),
    })
}

/// Jets of a solved iterate at interior grid nodes. `det ∇²φ = λ ρ` comes from the
/// transport step that produced φ; ψ and the Hessian of φ are differenced on the grid
/// with the given stride.
pub struct IterateSurface {
    pub grid: EvaluationGrid,
    pub lambda: f64,
    pub stride: usize,
    phi: Vec<f64>,
    det: Vec<f64>,
}

impl IterateSurface {
    pub fn new(phi: &MaxAffinePotential, source: &SourceDensity, lambda: f64, stride: usize) -> Result<Self> {
        if phi.dim != source.dim() {
            return Err(Error::GridMismatch);
        }
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be positive".into()));
        }
        Ok(IterateSurface {
            grid: source.grid.clone(),
            lambda,
            stride,
            phi: phi.cell_averages(&source.grid),
            det: source.density.iter().map(|d| lambda * d).collect(),
        })
    }

    fn index(&self, i: &[usize]) -> usize {
        let m = self.grid.points_per_axis;
        i.iter().rev().fold(0, |acc, v| acc * m + v)
    }

    fn psi(&self, k: usize) -> f64 {
        self.det[k].powf(-1.0 / (self.grid.dim as f64 + 2.0))
    }

    /// Second-order central differences of a node field.
    fn derivatives(&self, f: &dyn Fn(usize) -> f64, i: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.dim;
        let s = self.stride;
        let h = s as f64 * self.grid.spacing();
        let at = |d: &[(usize, isize)]| {
            let mut j = i.to_vec();
            for &(a, o) in d {
                j[a] = (j[a] as isize + o * s as isize) as usize;
            }
            f(self.index(&j))
        };
        let c = at(&[]);
        let mut g = vec![0.0; n];
        let mut hm = vec![0.0; n * n];
        for a in 0..n {
            let (p, m) = (at(&[(a, 1)]), at(&[(a, -1)]));
            g[a] = (p - m) / (2.0 * h);
            hm[a * n + a] = (p - 2.0 * c + m) / (h * h);
            for b in (a + 1)..n {
                let v = (at(&[(a, 1), (b, 1)]) - at(&[(a, 1), (b, -1)]) - at(&[(a, -1), (b, 1)]) + at(&[(a, -1), (b, -1)])) / (4.0 * h * h);
                hm[a * n + b] = v;
                hm[b * n + a] = v;
            }
        }
        (g, hm)
    }

    /// Jets at the nodes inside `[−a, a]ⁿ` that keep the stencil on the grid.
    pub fn jets(&self, a: f64) -> Result<Vec<LocalJet>> {
        let n = self.grid.dim;
        let m = self.grid.points_per_axis;
        let axis = self.grid.axis();
        let s = self.stride;
        let ok: Vec<usize> = (s..m - s).filter(|&k| axis[k].abs() <= a + 1e-12).collect();
        let idx: Vec<Vec<usize>> = match n {
            1 => ok.iter().map(|&k| vec![k]).collect(),
            _ => ok.iter().flat_map(|&j| ok.iter().map(move |&k| vec![k, j])).collect(),
        };
        idx.par_iter()
            .map(|i| {
                let k = self.index(i);
                let x: Vec<f64> = i.iter().map(|&v| axis[v]).collect();
                let (grad, hess) = self.derivatives(&|j| self.phi[j], i);
                if !is_positive_definite(&hess, n) {
                    return Err(Error::NonconvexSample(x));
                }
                let (psi_grad, psi_hess) = self.derivatives(&|j| self.psi(j), i);
                Ok(LocalJet { x, phi: self.phi[k], grad, hess, det: self.det[k], psi: self.psi(k), psi_grad, psi_hess })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImmersionSample {
    pub x: Vec<f64>,
    /// `(∇φ, ⟨x,∇φ⟩ − φ)`
    pub f_point: Vec<f64>,
    /// `−(∇ψ, ⟨x,∇ψ⟩ − ψ)`
    pub xi: Vec<f64>,
    /// `(x, −1)/φ`
    pub nu_point: Vec<f64>,
    /// `(x, −1)/√(1+|x|²)`; the concave side of the graph is `−N`.
    pub gauss_normal: Vec<f64>,
    /// `⟨f, N⟩`
    pub support: f64,
    /// `(1+|x|²)^{−(n+2)/2} det(∇²φ)^{−1}`
    pub kappa: f64,
}

pub fn immerse_jet(j: &LocalJet) -> ImmersionSample {
    let x = &j.x;
    let s = (1.0 + dot(x, x)).sqrt();
    let n = x.len() as f64;
    let mut f_point = j.grad.clone();
    f_point.push(dot(x, &j.grad) - j.phi);
    let mut xi: Vec<f64> = j.psi_grad.iter().map(|v| -v).collect();
    xi.push(j.psi - dot(x, &j.psi_grad));
    let mut nu_point: Vec<f64> = x.iter().map(|v| v / j.phi).collect();
    nu_point.push(-1.0 / j.phi);
    let mut gauss_normal: Vec<f64> = x.iter().map(|v| v / s).collect();
    gauss_normal.push(-1.0 / s);
    let support = dot(&f_point, &gauss_normal);
    ImmersionSample { x: x.clone(), f_point, xi, nu_point, gauss_normal, support, kappa: s.powf(-(n + 2.0)) / j.det }
}

pub fn immerse(phi: &dyn Sampler, x: &[f64]) -> Result<ImmersionSample> {
    Ok(immerse_jet(&analytic_jet(phi, x)?))
}

/// `S = ∇²ψ (∇²φ)^{−1}` and `trace(S)/n`.
pub fn shape_of_jet(j: &LocalJet) -> Result<(Vec<f64>, f64)> {
    let n = j.x.len();
    let inv = inverse(&j.hess, n).ok_or_else(|| Error::NonconvexSample(j.x.clone()))?;
    let mut s = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            s[a * n + b] = (0..n).map(|k| j.psi_hess[a * n + k] * inv[k * n + b]).sum();
        }
    }
    let gamma = (0..n).map(|a| s[a * n + a]).sum::<f64>() / n as f64;
    Ok((s, gamma))
}

pub fn shape_operator(phi: &dyn Sampler, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    shape_of_jet(&analytic_jet(phi, x)?)
}

pub fn shape_operator_with(phi: &dyn Sampler, x: &[f64], psi_step: f64) -> Result<(Vec<f64>, f64)> {
    shape_of_jet(&analytic_jet_with(phi, x, psi_step)?)
}

/// `θ(∂₁…∂ₙ) = det(f_*∂₁, …, f_*∂ₙ, ξ)` and `ω_h = det(ψ^{−1}∇²φ)^{1/2}`.
pub fn volume_forms(j: &LocalJet) -> (f64, f64) {
    let n = j.x.len();
    let xi = immerse_jet(j).xi;
    let n1 = n + 1;
    let mut m = vec![0.0; n1 * n1];
    for c in 0..n {
        for r in 0..n {
            m[r * n1 + c] = j.hess[r * n + c];
        }
        m[n * n1 + c] = (0..n).map(|k| j.x[k] * j.hess[k * n + c]).sum();
    }
    for r in 0..n1 {
        m[r * n1 + n] = xi[r];
    }
    let theta = det(&m, n1);
    let h: Vec<f64> = j.hess.iter().map(|v| v / j.psi).collect();
    (theta, det(&h, n).sqrt())
}

/// Tangent vectors `∂ᵢ g` of a map into ℝⁿ⁺¹ by central differences.
fn tangents(g: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] = x[i] + h;
            let a = g(&p);
            p[i] = x[i] - h;
            let b = g(&p);
            a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * h)).collect()
        })
        .collect()
}

/// Unit vector orthogonal to n tangent vectors in ℝⁿ⁺¹ (n = 1, 2).
fn unit_normal(t: &[Vec<f64>]) -> Vec<f64> {
    let v = match t.len() {
        1 => vec![-t[0][1], t[0][0]],
        _ => vec![
            t[0][1] * t[1][2] - t[0][2] * t[1][1],
            t[0][2] * t[1][0] - t[0][0] * t[1][2],
            t[0][0] * t[1][1] - t[0][1] * t[1][0],
        ],
    };
    let l = norm(&v);
    v.iter().map(|a| a / l).collect()
}

fn gram_det(t: &[Vec<f64>]) -> f64 {
    let n = t.len();
    let g: Vec<f64> = (0..n * n).map(|k| dot(&t[k / n], &t[k % n])).collect();
    det(&g, n)
}

/// Dual point `N/⟨N, p⟩` of an immersion `g` at x, with N from its tangent plane.
pub fn dual_point(g: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let p = g(x);
    let nrm = unit_normal(&tangents(g, x, h));
    let d = dot(&nrm, &p);
    nrm.iter().map(|v| v / d).collect()
}

/// `ν(x) = (x, −1)/φ(x)`
pub fn nu_map(phi: &dyn Sampler, x: &[f64]) -> Vec<f64> {
    let v = phi.value(x);
    let mut out: Vec<f64> = x.iter().map(|a| a / v).collect();
    out.push(-1.0 / v);
    out
}

pub fn f_map(phi: &dyn Sampler, x: &[f64]) -> Vec<f64> {
    let g = phi.gradient(x);
    let mut out = g.clone();
    out.push(dot(x, &g) - phi.value(x));
    out
}

/// `∫_{ℝⁿ} f` by nested double-exponential quadrature, `x = t/(1 − t²)`.
pub fn integrate_rn(f: &(dyn Fn(&[f64]) -> f64 + Sync), dim: usize) -> f64 {
    use quadrature::double_exponential::integrate;
    let map = |t: f64| (t / (1.0 - t * t), (1.0 + t * t) / ((1.0 - t * t) * (1.0 - t * t)));
    let line = |g: &dyn Fn(f64) -> f64| {
        integrate(
            |t| {
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                let (x, j) = map(t);
                let v = g(x) * j;
                if v.is_finite() { v } else { 0.0 }
            },
            -1.0,
            1.0,
            1e-11,
        )
        .integral
    };
    match dim {
        1 => line(&|x| f(&[x])),
        _ => line(&|y| line(&|x| f(&[x, y]))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AsaMethod {
    /// `∫ det(∇²φ)^{(n+1)/(n+2)}`
    Metric = 1,
    /// `∫ κ(N)^{1/(n+2)} dV` with κ and dV from the immersion's tangent frames
    Curvature = 2,
    /// `(λ(A) G_{n+1}(MA/λ))^{(n+1)/(n+2)}`
    Dual = 3,
}

impl TryFrom<u8> for AsaMethod {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(AsaMethod::Metric),
            2 => Ok(AsaMethod::Curvature),
            3 => Ok(AsaMethod::Dual),
            _ => Err(Error::InvalidConfig(format!("affine surface area method {v}"))),
        }
    }
}

/// κ^{1/(n+2)} times the area density of f, both from tangent frames.
fn curvature_integrand(phi: &dyn Sampler, x: &[f64]) -> f64 {
    let n = x.len();
    let h = phi.hessian(x);
    let df: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut v: Vec<f64> = (0..n).map(|r| h[r * n + c]).collect();
            v.push((0..n).map(|k| x[k] * h[k * n + c]).sum());
            v
        })
        .collect();
    let gauss = |p: &[f64]| {
        let s = (1.0 + dot(p, p)).sqrt();
        let mut v: Vec<f64> = p.iter().map(|a| a / s).collect();
        v.push(-1.0 / s);
        v
    };
    let dn = tangents(&gauss, x, 1e-5 * (1.0 + norm(x)));
    let area = gram_det(&df).sqrt();
    let kappa = gram_det(&dn).sqrt() / area;
    kappa.powf(1.0 / (n as f64 + 2.0)) * area
}

/// Affine surface area of an analytic potential over ℝⁿ; the grid carries the
/// density of method 3.
pub fn affine_surface_area(phi: &dyn Sampler, body: &ConvexBody, grid: &EvaluationGrid, method: AsaMethod) -> Result<f64> {
    let n = phi.dim();
    let e = (n as f64 + 1.0) / (n as f64 + 2.0);
    match method {
        AsaMethod::Metric => Ok(integrate_rn(&|x| det(&phi.hessian(x), n).powf(e), n)),
        AsaMethod::Curvature => Ok(integrate_rn(&|x| curvature_integrand(phi, x), n)),
        AsaMethod::Dual => {
            let lam = body.volume;
            let g = g_of(&ma_density(phi, grid)?, &Profile::power(n, 1.0)?)?;
            Ok((lam * g).powf(e))
        }
    }
}

/// `MA(φ)/‖MA(φ)‖₁` as a source density: `h∘ψ = det ∇²φ` for `h(t) = t^{−(n+2)}`.
pub fn ma_density(phi: &dyn Sampler, grid: &EvaluationGrid) -> Result<SourceDensity> {
    SourceDensity::from_potential(&Psi(phi), &Profile::power(phi.dim(), 1.0)?, grid, f64::INFINITY)
}

fn require_positive(phi: &dyn Sampler, grid: &EvaluationGrid) -> Result<()> {
    for x in grid.nodes() {
        let v = phi.value(&x);
        if !(v > 0.0) {
            return Err(Error::NonPositivePotential { x, value: v });
        }
    }
    Ok(())
}

/// `(μ_f(ℝⁿ), μ_ν(ℝⁿ)) = (∫ φ det∇²φ, ∫ φ^{−(n+1)})`.
///
/// μ_f reads `phi.hessian` far into the tails; samplers that only difference
/// their values there give a meaningless μ_f.
pub fn cone_measures(phi: &dyn Sampler, grid: &EvaluationGrid) -> Result<(f64, f64)> {
    require_positive(phi, grid)?;
    let n = phi.dim();
    let mu_f = integrate_rn(&|x| phi.value(x) * det(&phi.hessian(x), n), n);
    let mu_nu = integrate_rn(&|x| phi.value(x).powi(-(n as i32 + 1)), n);
    Ok((mu_f, mu_nu))
}

/// `(n+1) λ(cvx(0, ν(ℝⁿ)))` for a max-affine potential: each Laguerre cell maps onto a
/// flat facet of the dual surface, summed as a fan of simplices with apex 0.
/// Two-dimensional cells are clipped to `[−far, far]²`.
pub fn dual_cone_measure(phi: &MaxAffinePotential, far: f64) -> Result<f64> {
    let (_, min) = phi.min_face()?;
    if !(min > 0.0) {
        return Err(Error::NonPositivePotential { x: vec![], value: min });
    }
    match phi.dim {
        1 => {
            let env = phi.envelope();
            let ys = phi.sites_1d();
            let mut acc = 0.0;
            for (i, &j) in env.order.iter().enumerate() {
                let (a, b) = env.cell(i);
                acc += match (a.is_finite(), b.is_finite()) {
                    (true, true) => (b - a) / (phi.eval(&[a]) * phi.eval(&[b])),
                    (true, false) => 1.0 / (ys[j] * phi.eval(&[a])),
                    (false, true) => -1.0 / (ys[j] * phi.eval(&[b])),
                    _ => return Err(Error::Unbounded),
                };
            }
            Ok(acc)
        }
        2 => {
            let cells = laguerre::cells_2d(&phi.sites_2d(), &phi.weights, far);
            let nu = |p: [f64; 2]| {
                let v = phi.eval(&p);
                [p[0] / v, p[1] / v, -1.0 / v]
            };
            Ok(cells
                .par_iter()
                .map(|c| {
                    let pts: Vec<[f64; 3]> = c.pts.iter().map(|p| nu(*p)).collect();
                    (1..pts.len().saturating_sub(1))
                        .map(|k| {
                            let (a, b, d) = (pts[0], pts[k], pts[k + 1]);
                            det(&[a[0], a[1], a[2], b[0], b[1], b[2], d[0], d[1], d[2]], 3).abs() / 2.0
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum())
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Largest distance of far-field dual points `ν(R u)` to `∂A° × {0}`.
pub fn anchor_check(phi: &dyn Sampler, body: &ConvexBody, r_far: f64) -> Result<f64> {
    let n = phi.dim();
    let polar_body = polar(body)?;
    let dirs: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..64).map(|k| std::f64::consts::TAU * k as f64 / 64.0).map(|t| vec![t.cos(), t.sin()]).collect(),
    };
    let mut worst: f64 = 0.0;
    for u in dirs {
        let x: Vec<f64> = u.iter().map(|v| r_far * v).collect();
        if !body.contains(&phi.gradient(&x), 1e-9) {
            return Err(Error::PreconditionViolated(format!("gradient at {x:?} leaves the body")));
        }
        let v = phi.value(&x);
        if !(v > 0.0) {
            return Err(Error::NonPositivePotential { x, value: v });
        }
        let p = nu_map(phi, &x);
        let base = &p[..n];
        let to_boundary = polar_body.halfspaces.iter().map(|h| h.eval(base) / norm(&h.normal)).fold(f64::INFINITY, f64::min).abs();
        worst = worst.max(to_boundary.hypot(p[n]));
    }
    Ok(worst)
}

/// One affine-iteration step: transport `ψ^{−(n+2)}/‖ψ^{−(n+2)}‖₁` onto the body.
/// Returns the potential and `c = λ(A)^{−1/(n+2)} ‖ψ‖_{−(n+2)}^{−1}`.
pub fn prescribed_normal_step(
    psi: &dyn Sampler,
    body: &ConvexBody,
    grid: &EvaluationGrid,
    sites: &[Vec<f64>],
    masses: &[f64],
    opts: &SolverOptions,
) -> Result<(MaxAffinePotential, f64)> {
    let n = psi.dim();
    require_positive(psi, grid)?;
    let rho = SourceDensity::from_potential(psi, &Profile::power(n, 1.0)?, grid, f64::INFINITY)?;
    let (phi, _) = solve_step(&rho, sites, masses, opts)?;
    let z = rho.generator.map(|g| g.log_z.exp()).unwrap_or(f64::NAN);
    Ok((phi, (z / body.volume).powf(1.0 / (n as f64 + 2.0))))
}

#[derive(Clone, Debug, Serialize)]
pub struct AffineReport {
    pub gamma_est: f64,
    /// `λ(A)^{−1/(n+2)} ‖φ‖_{−(n+2)}^{−1}`
    pub gamma_norm: f64,
    pub sphere_residual: f64,
    pub asa_def1: f64,
    pub asa_def2: f64,
    pub asa_def3: f64,
    /// `Ω^{(n+2)/(n+1)}` against `λ(A) G`
    pub asa_identity: (f64, f64),
    pub cone_measure_f: f64,
    pub cone_measure_nu: f64,
    /// `F(φ)^{−(n+1)}` for `h(t) = t^{−(n+2)}`
    pub f_power: f64,
    pub anchor_error: f64,
}

fn sphere_residual(jets: &[LocalJet]) -> Result<(f64, f64)> {
    let shapes: Vec<(Vec<f64>, f64)> = jets.iter().map(shape_of_jet).collect::<Result<_>>()?;
    let gamma = shapes.iter().map(|s| s.1).sum::<f64>() / shapes.len().max(1) as f64;
    let n = jets.first().map_or(1, |j| j.x.len());
    let res = shapes
        .iter()
        .map(|(s, _)| (0..n * n).map(|k| (s[k] - if k % (n + 1) == 0 { gamma } else { 0.0 }).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok((gamma, res))
}

/// Report for an analytic potential; the sphere residual uses `|x| ≤ L/4`.
pub fn affine_report(phi: &dyn Sampler, body: &ConvexBody, grid: &EvaluationGrid) -> Result<AffineReport> {
    affine_report_with(phi, body, grid, 1e-3)
}

/// Tabulated potentials (radial shooting) need a wider `psi_step` than closed forms.
pub fn affine_report_with(phi: &dyn Sampler, body: &ConvexBody, grid: &EvaluationGrid, psi_step: f64) -> Result<AffineReport> {
    let n = phi.dim();
    require_positive(phi, grid)?;
    let win = 0.25 * grid.half_width;
    let k = 21;
    let ax: Vec<f64> = (0..k).map(|i| -win + 2.0 * win * i as f64 / (k - 1) as f64).collect();
    let pts: Vec<Vec<f64>> = match n {
        1 => ax.iter().map(|x| vec![*x]).collect(),
        _ => ax.iter().flat_map(|y| ax.iter().map(move |x| vec![*x, *y])).filter(|p| norm(p) <= win).collect(),
    };
    let jets: Vec<LocalJet> = pts.par_iter().map(|x| analytic_jet_with(phi, x, psi_step)).collect::<Result<_>>()?;
    let (gamma_est, sphere_residual) = sphere_residual(&jets)?;
    let a1 = affine_surface_area(phi, body, grid, AsaMethod::Metric)?;
    let a2 = affine_surface_area(phi, body, grid, AsaMethod::Curvature)?;
    let a3 = affine_surface_area(phi, body, grid, AsaMethod::Dual)?;
    let g = g_of(&ma_density(phi, grid)?, &Profile::power(n, 1.0)?)?;
    let (mu_f, mu_nu) = cone_measures(phi, grid)?;
    let np2 = n as f64 + 2.0;
    let norm_inv = integrate_rn(&|x| phi.value(x).powf(-np2), n).powf(1.0 / np2);
    let f = crate::functionals::f_of(phi, &Profile::power(n, 1.0)?, grid)?;
    Ok(AffineReport {
        gamma_est,
        gamma_norm: body.volume.powf(-1.0 / np2) * norm_inv,
        sphere_residual,
        asa_def1: a1,
        asa_def2: a2,
        asa_def3: a3,
        asa_identity: (a1.powf((n as f64 + 2.0) / (n as f64 + 1.0)), body.volume * g),
        cone_measure_f: mu_f,
        cone_measure_nu: mu_nu,
        f_power: f.powf(-(n as f64 + 1.0)),
        anchor_error: anchor_check(phi, body, 1e2)?,
    })
}

/// Report for a solved iterate φ and the source that produced it
/// (`det ∇²φ = λ ρ`). Affine surface areas use the grid quadrature with exact
/// one-dimensional tails; the dual cone measure is the exact polyhedral one.
pub fn iterate_affine_report(phi: &MaxAffinePotential, source: &SourceDensity, body: &ConvexBody, stride: usize) -> Result<AffineReport> {
    let n = phi.dim;
    let grid = &source.grid;
    let lam = body.volume;
    let np1 = n as f64 + 1.0;
    let np2 = n as f64 + 2.0;
    let e = np1 / np2;
    let power = Profile::power(n, 1.0)?;
    let surface = IterateSurface::new(phi, source, lam, stride)?;
    let jets = surface.jets(0.25 * grid.half_width)?;
    let (gamma_est, sphere_residual) = sphere_residual(&jets)?;
    let w = grid.quad_weights();
    let nodes = grid.nodes();
    let tail = match &source.tails {
        Some(t) => {
            let k = (t.profile.s + 1.0) * e;
            lam.powf(e) * t.z.powf(-e) * t.pieces().map(|(p, _)| power_integral(k, p.alpha, p.beta, p.x0, p.x1)).sum::<f64>()
        }
        None => 0.0,
    };
    let a1 = w.iter().zip(&source.density).map(|(w, d)| w * (lam * d).powf(e)).sum::<f64>() + tail;
    // Gauss-image form: ∫ κ^{−(n+1)/(n+2)} N^*dV_S
    let a2 = nodes
        .iter()
        .zip(&w)
        .zip(&source.density)
        .map(|((x, w), d)| {
            let s2 = 1.0 + dot(x, x);
            let kappa = s2.powf(-np2 / 2.0) / (lam * d);
            w * kappa.powf(-e) * s2.powf(-np1 / 2.0)
        })
        .sum::<f64>()
        + tail;
    let g = g_of(source, &power)?;
    let a3 = (lam * g).powf(e);
    let own = SourceDensity::from_potential(phi, &power, grid, f64::INFINITY)?;
    let z = own.generator.map(|g| g.log_z.exp()).unwrap_or(f64::NAN);
    let f = crate::functionals::f_of(phi, &power, grid)?;
    let far = 1e6 * grid.half_width;
    Ok(AffineReport {
        gamma_est,
        gamma_norm: lam.powf(-1.0 / np2) * z.powf(1.0 / np2),
        sphere_residual,
        asa_def1: a1,
        asa_def2: a2,
        asa_def3: a3,
        asa_identity: (a1.powf(np2 / np1), lam * g),
        cone_measure_f: lam * crate::functionals::pairing(phi, source),
        cone_measure_nu: dual_cone_measure(phi, far)?,
        f_power: f.powf(-np1),
        anchor_error: anchor_error_polyhedral(phi, body, 1e2 * grid.half_width)?,
    })
}

/// [`anchor_check`] for a max-affine potential, whose gradient lies in the body by construction.
fn anchor_error_polyhedral(phi: &MaxAffinePotential, body: &ConvexBody, r_far: f64) -> Result<f64> {
    anchor_check(phi, body, r_far)
}
