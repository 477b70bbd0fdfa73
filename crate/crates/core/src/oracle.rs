//! Known solutions of the normalized second boundary value problem:
//! closed forms in one dimension, a product solution on the square and
//! a shooting solver for radial potentials on a disc.

use crate::convex_body::{build_body, regular_polygon, ConvexBody};
use crate::error::{Error, Result};
use crate::geometry::{det, norm};
use crate::potential::{chord_tails, Sampler, TailPiece};
use crate::profile::{Profile, ProfileKind};
use std::f64::consts::PI;

/// `2 log(2 cosh(x/2))` in a form that does not overflow.
fn ke(x: f64) -> f64 {
    x.abs() + 2.0 * (-x.abs()).exp().ln_1p()
}

fn ke_d1(x: f64) -> f64 {
    (0.5 * x).tanh()
}

fn ke_d2(x: f64) -> f64 {
    // ½ sech²(x/2) = 2 e^{−|x|} / (1 + e^{−|x|})²
    let e = (-x.abs()).exp();
    2.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Conjugate of [`ke`] on [−1, 1].
pub fn ke_conjugate(y: f64) -> f64 {
    let xlx = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
    xlx(1.0 + y) + xlx(1.0 - y) - 2.0 * 2f64.ln()
}

#[derive(Clone, Debug)]
pub enum OraclePotential {
    /// 2 log(2 cosh(x/2))
    Exp1d,
    /// √(1 + x²)
    Power1d,
    /// φ₁(x₁) + φ₁(x₂) with φ₁ = 2 log(2 cosh(·/2))
    Separable2d,
    Radial(RadialPotential),
}

impl Sampler for OraclePotential {
    fn dim(&self) -> usize {
        match self {
            OraclePotential::Exp1d | OraclePotential::Power1d => 1,
            _ => 2,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            OraclePotential::Exp1d => ke(x[0]),
            OraclePotential::Power1d => x[0].hypot(1.0),
            OraclePotential::Separable2d => ke(x[0]) + ke(x[1]),
            OraclePotential::Radial(r) => r.value(norm(x)),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OraclePotential::Exp1d => vec![ke_d1(x[0])],
            OraclePotential::Power1d => vec![x[0] / x[0].hypot(1.0)],
            OraclePotential::Separable2d => vec![ke_d1(x[0]), ke_d1(x[1])],
            OraclePotential::Radial(r) => {
                let rr = norm(x);
                if rr == 0.0 {
                    return vec![0.0, 0.0];
                }
                let d = r.derivatives(rr).1;
                vec![d * x[0] / rr, d * x[1] / rr]
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OraclePotential::Exp1d => vec![ke_d2(x[0])],
            OraclePotential::Power1d => vec![(1.0 + x[0] * x[0]).powf(-1.5)],
            OraclePotential::Separable2d => vec![ke_d2(x[0]), 0.0, 0.0, ke_d2(x[1])],
            OraclePotential::Radial(r) => {
                let rr = norm(x);
                let (_, d1, d2) = r.derivatives(rr);
                if rr < 1e-12 {
                    return vec![d2, 0.0, 0.0, d2];
                }
                let (u, v) = (x[0] / rr, x[1] / rr);
                let t = d1 / rr;
                vec![d2 * u * u + t * v * v, (d2 - t) * u * v, (d2 - t) * u * v, d2 * v * v + t * u * u]
            }
        }
    }

    fn tail_pieces(&self, half_width: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
        chord_tails(|x| self.value(&[x]), |x| self.gradient(&[x])[0], half_width)
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub name: &'static str,
    pub profile: Profile,
    /// Target body used by the solver (a fine inscribed polygon for discs).
    pub body: ConvexBody,
    /// λ(A) of the exact gradient image.
    pub lambda: f64,
    pub potential: OraclePotential,
    /// `−∫_A φ*`
    pub tau: f64,
    /// `‖h∘φ‖₁`
    pub norm_h: f64,
    pub provenance: &'static str,
}

impl OracleSolution {
    /// `max |det∇²φ/λ − h∘φ/‖h∘φ‖₁|` over the points.
    pub fn pde_residual(&self, points: &[Vec<f64>]) -> f64 {
        let n = self.potential.dim();
        points
            .iter()
            .map(|x| {
                let lhs = det(&self.potential.hessian(x), n) / self.lambda;
                let rhs = self.profile.h_fast(self.potential.value(x)) / self.norm_h;
                (lhs - rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Evenly spaced sample on `[−a, a]ⁿ` with `k` points per axis.
    pub fn sample(&self, a: f64, k: usize) -> Vec<Vec<f64>> {
        let ax: Vec<f64> = (0..k).map(|i| -a + 2.0 * a * i as f64 / (k - 1) as f64).collect();
        match self.potential.dim() {
            1 => ax.iter().map(|x| vec![*x]).collect(),
            _ => ax.iter().flat_map(|y| ax.iter().map(move |x| vec![*x, *y])).collect(),
        }
    }

    /// Residual on the 1000-point sample used as the admission check.
    pub fn self_check(&self) -> Result<f64> {
        let pts = match self.potential.dim() {
            1 => self.sample(10.0, 1000),
            _ => self.sample(7.0, 32),
        };
        let r = self.pde_residual(&pts);
        let tol = if matches!(self.potential, OraclePotential::Radial(_)) { 1e-8 } else { 1e-10 };
        if !(r <= tol) {
            return Err(Error::BoundViolated(format!("oracle {} has PDE residual {r:e}", self.name)));
        }
        Ok(r)
    }
}

fn interval() -> ConvexBody {
    build_body(&[vec![-1.0], vec![1.0]]).expect("interval")
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, 1e-14).integral
}

/// `2 log(2 cosh(x/2))` on A = (−1, 1), solving `φ″/2 = e^{−φ}`.
pub fn exp_oracle_1d() -> OracleSolution {
    let tau = -integrate(ke_conjugate, -1.0, 1.0);
    OracleSolution {
        name: "exp1d",
        profile: Profile::exponential(1),
        body: interval(),
        lambda: 2.0,
        potential: OraclePotential::Exp1d,
        tau,
        norm_h: 1.0,
        provenance: "closed form; e^{−φ} = ¼ sech²(x/2) integrates to 1",
    }
}

/// `√(1 + x²)` on A = (−1, 1) with p = 1, solving `φ″/2 = φ^{−3}/2`.
pub fn power_oracle_1d() -> OracleSolution {
    let tau = integrate(|y| (1.0 - y * y).max(0.0).sqrt(), -1.0, 1.0);
    OracleSolution {
        name: "power1d",
        profile: Profile::power(1, 1.0).expect("s = 2"),
        body: interval(),
        lambda: 2.0,
        potential: OraclePotential::Power1d,
        tau,
        norm_h: 2.0,
        provenance: "closed form; conjugate is the lower unit semicircle",
    }
}

/// Product of two copies of the one-dimensional exponential oracle on (−1, 1)².
pub fn separable_oracle_2d(profile: &Profile) -> Result<OracleSolution> {
    if profile.kind != ProfileKind::Exponential {
        return Err(Error::WrongProfile("the product construction needs a multiplicative h".into()));
    }
    let body = build_body(&[vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]])?;
    let one = integrate(ke_conjugate, -1.0, 1.0);
    Ok(OracleSolution {
        name: "separable2d",
        profile: Profile::exponential(2),
        body,
        lambda: 4.0,
        potential: OraclePotential::Separable2d,
        // ∫∫ φ₁*(y₁) + φ₁*(y₂) = 2 · 2 · ∫ φ₁*
        tau: -4.0 * one,
        norm_h: 1.0,
        provenance: "product of one-dimensional solutions",
    })
}

/// Tabulated radial profile `r ↦ a·φ₀(r/a) + c` with quintic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct RadialPotential {
    r: Vec<f64>,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    scale: f64,
    shift: f64,
    /// Shooting constant k in `φ′φ″ = k r h(φ)`.
    pub k: f64,
    /// Difference of the limiting slope between step h and h/2.
    pub richardson: f64,
}

impl RadialPotential {
    fn base(&self, r: f64) -> (f64, f64, f64) {
        let n = self.r.len();
        let last = n - 1;
        if r >= self.r[last] {
            let dr = r - self.r[last];
            return (self.f[last] + self.d1[last] * dr, self.d1[last], 0.0);
        }
        let i = self.r.partition_point(|v| *v <= r).max(1) - 1;
        let dl = self.r[i + 1] - self.r[i];
        let t = (r - self.r[i]) / dl;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let c = [self.f[i], self.d1[i] * dl, self.d2[i] * dl * dl, self.f[i + 1], self.d1[i + 1] * dl, self.d2[i + 1] * dl * dl];
        let h = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * t3 - t4 + 0.5 * t5,
        ];
        let h1 = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            1.5 * t2 - 4.0 * t3 + 2.5 * t4,
        ];
        let h2 = [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            3.0 * t - 12.0 * t2 + 10.0 * t3,
        ];
        let dot6 = |b: &[f64; 6]| c.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
        (dot6(&h), dot6(&h1) / dl, dot6(&h2) / (dl * dl))
    }

    /// (φ, φ′, φ″) at radius r.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let (f, d1, d2) = self.base(r / self.scale);
        (self.scale * f + self.shift, d1, d2 / self.scale)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivatives(r).0
    }
}

struct Shot {
    r: Vec<f64>,
    f: Vec<f64>,
    v: Vec<f64>,
    /// ∫ r h(φ) dr
    zr: f64,
    /// ∫ (rφ′ − φ) r h(φ) dr
    j: f64,
    slope: f64,
}

/// Integrates `φ′ = √(2v)`, `v′ = k r h(φ)` from φ(0) = φ₀: uniform steps in r up to
/// r = 10, then uniform steps in log r up to 10⁶, with a power-law remainder.
fn shoot(profile: &Profile, phi0: f64, k: f64, dr: f64) -> Result<Shot> {
    let h = |f: f64| if profile.is_power() && !(f > 0.0) { f64::NAN } else { profile.h_fast(f) };
    // state (φ, v, ∫ r h, ∫ (rφ′ − φ) r h) as a function of t with r = r(t)
    let rhs = |r: f64, jac: f64, y: &[f64; 4]| -> [f64; 4] {
        let d1 = (2.0 * y[1].max(0.0)).sqrt();
        let hr = h(y[0]) * r;
        [jac * d1, jac * k * hr, jac * hr, jac * (r * d1 - y[0]) * hr]
    };
    let step = |t: f64, y: &[f64; 4], dt: f64, map: &dyn Fn(f64) -> (f64, f64)| -> [f64; 4] {
        let add = |a: &[f64; 4], b: &[f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
        let (r1, j1) = map(t);
        let (r2, j2) = map(t + 0.5 * dt);
        let (r3, j3) = map(t + dt);
        let k1 = rhs(r1, j1, y);
        let k2 = rhs(r2, j2, &add(y, &k1, 0.5 * dt));
        let k3 = rhs(r2, j2, &add(y, &k2, 0.5 * dt));
        let k4 = rhs(r3, j3, &add(y, &k3, dt));
        let mut out = *y;
        for i in 0..4 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    };
    let h0 = h(phi0);
    let dh0 = match profile.kind {
        ProfileKind::Exponential => -h0,
        ProfileKind::Power => -(profile.s + 1.0) * h0 / phi0,
    };
    // series start: φ′ = a r + b r³ with a² = k h(φ₀), b = k h′(φ₀) / 8
    let a = (k * h0).sqrt();
    let b = k * dh0 / 8.0;
    let mut r = vec![0.0];
    let mut f = vec![phi0];
    let mut v = vec![0.0];
    // the origin is a regular singular point: start at r = 1e-4 from the series and
    // step in log r up to r = 1, uniformly in r to 10, then in log r again
    let r1: f64 = 1e-4;
    let (q2, q4) = (r1 * r1, r1.powi(4));
    let d1 = a * r1 + b * r1 * r1 * r1;
    let mut y = [
        phi0 + 0.5 * a * q2 + 0.25 * b * q4,
        0.5 * d1 * d1,
        0.5 * h0 * q2 + dh0 * a * q4 / 8.0,
        -0.5 * phi0 * h0 * q2 + (a * h0 - phi0 * dh0 * a) * q4 / 8.0,
    ];
    r.push(r1);
    f.push(y[0]);
    v.push(y[1]);
    let lin = |t: f64| (t, 1.0);
    let lg = |t: f64| (t.exp(), t.exp());
    let segments: [(&dyn Fn(f64) -> (f64, f64), f64, f64, bool); 3] =
        [(&lg, r1.ln(), 0.0, true), (&lin, 1.0, 10.0, false), (&lg, 10f64.ln(), 1e6f64.ln(), true)];
    for (map, t0, t1, log) in segments {
        let n = ((t1 - t0) / dr).round() as usize;
        let dt = (t1 - t0) / n as f64;
        for i in 0..n {
            let t = t0 + i as f64 * dt;
            y = step(t, &y, dt, map);
            let tn = if i + 1 == n { t1 } else { t + dt };
            r.push(if log { tn.exp() } else { tn });
            f.push(y[0]);
            v.push(y[1]);
        }
    }
    // thin the table to spacing ≥ dr so interpolated second derivatives do not amplify rounding
    let mut keep = vec![0usize];
    for i in 1..r.len() {
        if r[i] - r[*keep.last().unwrap()] >= 0.999 * dr || i + 1 == r.len() {
            keep.push(i);
        }
    }
    let r: Vec<f64> = keep.iter().map(|&i| r[i]).collect();
    let f: Vec<f64> = keep.iter().map(|&i| f[i]).collect();
    let v: Vec<f64> = keep.iter().map(|&i| v[i]).collect();
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::ShootingFailed(format!("integration left the domain (k = {k})")));
    }
    let rl = *r.last().unwrap();
    let mut slope = (2.0 * y[1]).sqrt();
    let (mut zr, mut j) = (y[2], y[3]);
    if profile.is_power() {
        // φ ≈ slope·r + const beyond the table
        let s = profile.s;
        let far = slope.powf(-(s + 1.0)) * rl.powf(1.0 - s) / (s - 1.0);
        slope = (2.0 * (y[1] + k * far)).sqrt();
        zr += far;
        j += (rl * slope - y[0]) * far;
    }
    Ok(Shot { r, f, v, zr, j, slope })
}

/// Radial solution on the disc of the given radius with `∫ φ* = −τ`.
/// The shooting constant follows from the dilation symmetry `φ(r) ↦ φ(br)`,
/// which maps k to b⁴k and the limiting slope to b·slope.
pub fn radial_shooting(profile: &Profile, radius: f64, tau: f64) -> Result<OracleSolution> {
    if profile.dim != 2 {
        return Err(Error::UnsupportedDimension(profile.dim));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig("disc radius must be positive".into()));
    }
    if profile.is_power() && !(tau > 0.0) {
        return Err(Error::DomainError { what: "power profile needs τ > 0", value: tau });
    }
    let phi0 = if profile.is_power() { 1.0 } else { 0.0 };
    let dr = 1e-3;
    let probe = shoot(profile, phi0, 1.0, dr)?;
    if !(probe.slope > 0.0) || !probe.slope.is_finite() {
        return Err(Error::ShootingFailed(format!("limiting slope {} at k = 1", probe.slope)));
    }
    let mut k = (radius / probe.slope).powi(4);
    let mut sh = shoot(profile, phi0, k, dr)?;
    for _ in 0..8 {
        if (sh.slope - radius).abs() <= 1e-12 * radius.max(1.0) {
            break;
        }
        k *= (radius / sh.slope).powi(4);
        sh = shoot(profile, phi0, k, dr)?;
    }
    if (sh.slope - radius).abs() > 1e-10 * radius.max(1.0) {
        return Err(Error::ShootingFailed(format!("slope {} does not reach {radius}", sh.slope)));
    }
    let half = shoot(profile, phi0, k, 0.5 * dr)?;
    let lambda = PI * radius * radius;
    let z0 = 2.0 * PI * sh.zr;
    let i0 = 2.0 * PI * k * sh.j;
    let (scale, shift, norm_h) = match profile.kind {
        ProfileKind::Exponential => {
            let c = (i0 + tau) / lambda;
            (1.0, c, z0 * (-c).exp())
        }
        ProfileKind::Power => {
            if !(i0 < 0.0) {
                return Err(Error::ShootingFailed(format!("conjugate integral {i0} is not negative")));
            }
            let a = tau / -i0;
            (a, 0.0, z0 * a.powf(-(profile.tail_exponent + 1.0)))
        }
    };
    let d1: Vec<f64> = sh.v.iter().map(|v| (2.0 * v).sqrt()).collect();
    let d2: Vec<f64> = sh
        .r
        .iter()
        .zip(&sh.f)
        .zip(&d1)
        .map(|((r, f), d)| if *r == 0.0 { (k * profile.h_fast(*f)).sqrt() } else { k * r * profile.h_fast(*f) / d })
        .collect();
    let pot = RadialPotential { r: sh.r, f: sh.f, d1, d2, scale, shift, k, richardson: (half.slope - sh.slope).abs() };
    let body = build_body(&regular_polygon(256, radius))?;
    Ok(OracleSolution {
        name: "radial",
        profile: *profile,
        body,
        lambda,
        potential: OraclePotential::Radial(pot),
        tau,
        norm_h,
        provenance: "radial shooting with RK4, h = 1e-3",
    })
}

/// The radial oracle's own PDE residual on r ∈ [0, 10] (between table nodes).
pub fn radial_residual(sol: &OracleSolution) -> f64 {
    let pts: Vec<Vec<f64>> = (0..1000).map(|i| vec![10.0 * (i as f64 + 0.37) / 1000.0, 0.0]).collect();
    sol.pde_residual(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::legendre_at;

    #[test]
    fn exp_oracle_examples() {
        let o = exp_oracle_1d();
        assert!((o.potential.value(&[0.0]) - 2.0 * 2f64.ln()).abs() < 1e-15);
        let pts: Vec<Vec<f64>> = [0.0, 1.0, -1.0, 3.0, -3.0].iter().map(|x| vec![*x]).collect();
        assert!(o.pde_residual(&pts) <= 1e-14);
        assert!((ke_conjugate(0.0) + 2.0 * 2f64.ln()).abs() < 1e-15);
        // closed form: ∫ 2y artanh y = 2, ∫ log(1 − y²) = 4 log 2 − 4, minus 4 log 2
        assert!((o.tau - 2.0).abs() < 1e-10, "{}", o.tau);
        assert!(o.self_check().is_ok());
    }

    #[test]
    fn conjugate_of_exp_oracle_matches_numeric_legendre() {
        let o = exp_oracle_1d();
        for y in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            let (_, v) = legendre_at(&o.potential, &[y]).unwrap();
            assert!((v - ke_conjugate(y)).abs() < 1e-12, "{y}");
        }
    }

    #[test]
    fn power_oracle_examples() {
        let o = power_oracle_1d();
        assert!((o.tau - PI / 2.0).abs() < 1e-12);
        assert!(o.self_check().unwrap() <= 1e-14);
        for y in [-0.8, 0.0, 0.6] {
            let (_, v) = legendre_at(&o.potential, &[y]).unwrap();
            assert!((v + (1.0 - y * y).sqrt()).abs() < 1e-12);
        }
        // x = tan θ
        let z = integrate(|t: f64| (1.0 + t.tan().powi(2)).powf(-1.5) / t.cos().powi(2), -PI / 2.0, PI / 2.0);
        assert!((z - o.norm_h).abs() < 1e-9);
    }

    #[test]
    fn separable_examples() {
        let o = separable_oracle_2d(&Profile::exponential(2)).unwrap();
        assert!((o.potential.value(&[0.0, 0.0]) - 4.0 * 2f64.ln()).abs() < 1e-14);
        assert!(o.pde_residual(&o.sample(5.0, 32)) <= 1e-10);
        assert!((o.tau - 8.0).abs() < 1e-9);
        let g = o.potential.gradient(&[30.0, -30.0]);
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
        assert!(matches!(separable_oracle_2d(&Profile::power(2, 1.0).unwrap()), Err(Error::WrongProfile(_))));
    }

    struct Dilated(f64);
    impl Sampler for Dilated {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.0 * (x[0] / self.0).hypot(1.0)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            let u = x[0] / self.0;
            vec![u / u.hypot(1.0)]
        }
    }

    #[test]
    fn power_dilation_covariance() {
        let base = integrate(|y| legendre_at(&Dilated(1.0), &[y]).unwrap().1, -1.0 + 1e-9, 1.0 - 1e-9);
        for a in [0.5, 2.0] {
            let ia = integrate(|y| legendre_at(&Dilated(a), &[y]).unwrap().1, -1.0 + 1e-9, 1.0 - 1e-9);
            assert!((ia - a * base).abs() < 1e-8, "{a}");
        }
    }

    #[test]
    fn radial_power_reproduces_sqrt() {
        let p = Profile::power(2, 1.0).unwrap();
        // √(1 + r²) on the unit disc: ∫ φ* = 2π ∫ −√(1 − ρ²) ρ dρ = −2π/3
        let o = radial_shooting(&p, 1.0, 2.0 * PI / 3.0).unwrap();
        let OraclePotential::Radial(rp) = &o.potential else { unreachable!() };
        assert!((rp.k - 1.0).abs() < 1e-8, "{}", rp.k);
        for r in [0.0, 0.3, 1.0, 2.5, 7.0] {
            assert!((rp.value(r) - r.hypot(1.0)).abs() < 1e-8, "{r}");
        }
        assert!((o.norm_h - PI).abs() < 1e-7);
        assert!(radial_residual(&o) <= 1e-8, "{}", radial_residual(&o));
        assert!(rp.richardson < 1e-10);
    }

    #[test]
    fn radial_exponential_is_self_consistent() {
        let o = radial_shooting(&Profile::exponential(2), 1.0, 3.0).unwrap();
        assert!(radial_residual(&o) <= 1e-8, "{}", radial_residual(&o));
        let OraclePotential::Radial(rp) = &o.potential else { unreachable!() };
        let mut last = -1.0;
        for i in 0..200 {
            let d = rp.derivatives(i as f64 * 0.25).1;
            assert!(d >= last - 1e-10 && d < 1.0 + 1e-10, "{i} {d} {last}");
            last = d;
        }
        assert!((rp.derivatives(200.0).1 - 1.0).abs() < 1e-9);
        // −∫ φ* by Legendre transforms on the disc
        let n = 200;
        let mut acc = 0.0;
        for i in 0..n {
            let rho = (i as f64 + 0.5) / n as f64;
            acc += 2.0 * PI * rho * legendre_at(&o.potential, &[rho, 0.0]).unwrap().1 / n as f64;
        }
        assert!((acc + 3.0).abs() < 1e-3, "{acc}");
    }

    #[test]
    fn radial_tau_dilates_power_solution() {
        let p = Profile::power(2, 1.0).unwrap();
        let a = radial_shooting(&p, 1.0, 2.0 * PI / 3.0).unwrap();
        let b = radial_shooting(&p, 1.0, 4.0 * PI / 3.0).unwrap();
        for r in [0.0, 1.0, 3.0] {
            let want = 2.0 * a.potential.value(&[r / 2.0, 0.0]);
            assert!((b.potential.value(&[r, 0.0]) - want).abs() < 1e-9);
        }
        assert!(radial_residual(&b) <= 1e-8);
        assert!(radial_shooting(&p, 1.0, -1.0).is_err());
    }
}
