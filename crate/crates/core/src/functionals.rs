//! F, the pairing against a transport source, the closed forms of G, the
//! coupled value, the duality gaps and the Ding / Mabuchi / Aubin–Mabuchi energies.

use crate::convex_body::ConvexBody;
use crate::error::{Error, Result};
use crate::ot_solver::{SourceDensity, Tails1d};
use crate::potential::{normalization_integral, EvaluationGrid, MaxAffinePotential, Sampler};
use crate::profile::{couple, power_integral, Coupling, Profile, ProfileKind};
use serde::Serialize;

/// Default slack for the monotone chain.
pub const NUM_TOL: f64 = 1e-6;

/// `H⁻¹(∫ H∘φ)` on the dual-cell quadrature (exact tails in one dimension).
pub fn f_of(phi: &dyn Sampler, profile: &Profile, grid: &EvaluationGrid) -> Result<f64> {
    let rho = SourceDensity::from_potential(phi, profile, grid, f64::INFINITY)?;
    Ok(rho.generator.expect("generated density").f_value)
}

/// `∫ φ_next dρ`, exact for the piecewise-constant density when φ_next is max-affine.
pub fn pairing(phi_next: &dyn Sampler, rho: &SourceDensity) -> f64 {
    let vals = phi_next.cell_values(&rho.grid);
    let boxed: f64 = rho.masses.iter().zip(&vals).map(|(m, v)| m * v).sum();
    let tail = match &rho.tails {
        Some(t) => {
            let (l, r) = phi_next.tail_pieces(rho.grid.half_width);
            let pieces: Vec<_> = l.into_iter().chain(r).collect();
            let mut acc = 0.0;
            for (tp, _) in t.pieces() {
                for p in &pieces {
                    let lo = tp.x0.max(p.x0);
                    let hi = tp.x1.min(p.x1);
                    if hi > lo {
                        let v = t.profile.linear_integrals(tp.alpha, tp.beta, lo, hi);
                        acc += p.alpha * v[0] + p.beta * v[1];
                    }
                }
            }
            acc / t.z
        }
        None => 0.0,
    };
    boxed + tail
}

/// Negative entropy `−∫ρ log ρ` (exponential) or `‖ρ‖_{s/(s+1)}` (power).
pub fn g_of(rho: &SourceDensity, profile: &Profile) -> Result<f64> {
    match profile.kind {
        ProfileKind::Exponential => {
            let boxed: f64 = rho.masses.iter().zip(&rho.density).filter(|(m, _)| **m > 0.0).map(|(m, d)| -m * d.ln()).sum();
            let tail = rho.tails.as_ref().map_or(Ok(0.0), entropy_tail)?;
            Ok(boxed + tail)
        }
        ProfileKind::Power => {
            let s = profile.s;
            let q = s / (s + 1.0);
            let w = rho.grid.quad_weights();
            let boxed: f64 = w.iter().zip(&rho.density).map(|(w, d)| w * d.powf(q)).sum();
            let tail = rho.tails.as_ref().map_or(Ok(0.0), |t| power_tail(t, q))?;
            let v = boxed + tail;
            if !v.is_finite() {
                return Err(Error::DomainError { what: "G: density norm diverges", value: v });
            }
            Ok(v.powf(1.0 / q))
        }
    }
}

fn entropy_tail(t: &Tails1d) -> Result<f64> {
    let lz = t.z.ln();
    match t.profile.kind {
        ProfileKind::Exponential => Ok(t.pieces().map(|(p, v)| p.alpha * v[0] + p.beta * v[1] + lz * v[0]).sum::<f64>() / t.z),
        ProfileKind::Power => {
            let s1 = t.profile.s + 1.0;
            let mut acc = 0.0;
            for (p, _) in t.pieces() {
                // −ρ log ρ with ρ = u^{−(s+1)}/z, u = α + βx
                let f = |x: f64| {
                    let u = p.alpha + p.beta * x;
                    let r = u.powf(-s1) / t.z;
                    if r > 0.0 { r * (s1 * u.ln() + lz) } else { 0.0 }
                };
                acc += integrate_piece(&f, p.x0, p.x1);
            }
            Ok(acc)
        }
    }
}

fn power_tail(t: &Tails1d, q: f64) -> Result<f64> {
    let zq = t.z.powf(-q);
    Ok(match t.profile.kind {
        ProfileKind::Exponential => {
            let e = Profile::exponential(1);
            t.pieces().map(|(p, _)| e.linear_integrals(q * p.alpha, q * p.beta, p.x0, p.x1)[0]).sum::<f64>() * zq
        }
        ProfileKind::Power => {
            let k = (t.profile.s + 1.0) * q;
            if k <= 1.0 {
                return Ok(f64::INFINITY);
            }
            t.pieces().map(|(p, _)| power_integral(k, p.alpha, p.beta, p.x0, p.x1)).sum::<f64>() * zq
        }
    })
}

/// Double-exponential quadrature; infinite ends are mapped to [0, 1).
fn integrate_piece(f: &dyn Fn(f64) -> f64, x0: f64, x1: f64) -> f64 {
    use quadrature::double_exponential::integrate;
    match (x0.is_finite(), x1.is_finite()) {
        (true, true) => integrate(f, x0, x1, 1e-14).integral,
        (true, false) => integrate(|u| if u >= 1.0 { 0.0 } else { f(x0 + u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) }, 0.0, 1.0, 1e-14).integral,
        (false, true) => integrate(|u| if u >= 1.0 { 0.0 } else { f(x1 - u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) }, 0.0, 1.0, 1e-14).integral,
        _ => 0.0,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapReport {
    pub f_source: f64,
    pub pairing: f64,
    pub g_density: f64,
    pub g_value: f64,
    pub f_next: f64,
    /// F(φᵢ) − g
    pub gap1: f64,
    /// g − F(φᵢ₊₁)
    pub gap2: f64,
}

pub fn duality_gap_check(phi: &dyn Sampler, rho: &SourceDensity, profile: &Profile, coupling: Coupling) -> Result<GapReport> {
    duality_gap_check_tol(phi, rho, profile, coupling, NUM_TOL, 0)
}

/// [`duality_gap_check`] with explicit slack; `step` is carried into the error.
pub fn duality_gap_check_tol(phi: &dyn Sampler, rho: &SourceDensity, profile: &Profile, coupling: Coupling, tol: f64, step: usize) -> Result<GapReport> {
    let gen = rho.generator.ok_or_else(|| Error::PreconditionViolated("source was not generated from a potential".into()))?;
    if gen.profile.kind != profile.kind {
        return Err(Error::WrongProfile(format!("source built with {:?}, checked with {:?}", gen.profile.kind, profile.kind)));
    }
    let p = pairing(phi, rho);
    let g = g_of(rho, profile)?;
    let gv = couple(coupling, p, g)?;
    let f_next = f_of(phi, profile, &rho.grid)?;
    let rep = GapReport { f_source: gen.f_value, pairing: p, g_density: g, g_value: gv, f_next, gap1: gen.f_value - gv, gap2: gv - f_next };
    if rep.gap1 < -tol || rep.gap2 < -tol {
        return Err(Error::MonotonicityViolated { step, gap1: rep.gap1, gap2: rep.gap2 });
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DingMabuchi {
    pub ding: f64,
    pub mabuchi: f64,
    pub aubin_mabuchi: f64,
}

/// D, K and AM of a solved iterate φ whose Monge–Ampère measure is `λ ρ`.
pub fn ding_mabuchi(phi: &MaxAffinePotential, rho: &SourceDensity, body: &ConvexBody, grid: &EvaluationGrid) -> Result<DingMabuchi> {
    let gen = rho.generator.ok_or_else(|| Error::PreconditionViolated("source was not generated from a potential".into()))?;
    if gen.profile.kind != ProfileKind::Exponential {
        return Err(Error::WrongProfile("Ding and Mabuchi energies need the exponential profile".into()));
    }
    let lam = body.volume;
    let i = normalization_integral(phi);
    let f = f_of(phi, &gen.profile, grid)?;
    let k = pairing(phi, rho) - g_of(rho, &gen.profile)? + lam.ln() + i / lam;
    Ok(DingMabuchi { ding: f + i / lam + lam.ln(), mabuchi: k, aubin_mabuchi: -i / lam })
}

/// Ding energy of a potential on its own.
pub fn ding(phi: &MaxAffinePotential, body: &ConvexBody, grid: &EvaluationGrid) -> Result<f64> {
    let lam = body.volume;
    Ok(f_of(phi, &Profile::exponential(phi.dim), grid)? + normalization_integral(phi) / lam + lam.ln())
}

#[derive(Clone, Copy, Debug)]
pub struct HolderReport {
    /// ‖h‖_{s/(s+1)} ‖f‖_{−s}
    pub lhs: f64,
    /// ∫ f h
    pub rhs: f64,
}

/// `‖h‖_p ‖f‖_q ≤ ∫ f h` with p = s/(s+1), q = −s, by quadrature on the grid nodes.
pub fn reverse_holder_check(f: &[f64], h_density: &[f64], s: f64, grid: &EvaluationGrid) -> Result<HolderReport> {
    let w = grid.quad_weights();
    if f.len() != w.len() || h_density.len() != w.len() {
        return Err(Error::GridMismatch);
    }
    if let Some(k) = f.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositivePotential { x: grid.nodes()[k].clone(), value: f[k] });
    }
    let p = s / (s + 1.0);
    let hp: f64 = w.iter().zip(h_density).map(|(w, h)| w * h.powf(p)).sum::<f64>().powf(1.0 / p);
    let fq: f64 = w.iter().zip(f).map(|(w, f)| w * f.powf(-s)).sum::<f64>().powf(-1.0 / s);
    let rhs: f64 = w.iter().zip(f).zip(h_density).map(|((w, f), h)| w * f * h).sum();
    let lhs = hp * fq;
    if lhs > rhs * (1.0 + 1e-12) {
        return Err(Error::InequalityViolated { lhs, rhs });
    }
    Ok(HolderReport { lhs, rhs })
}

/// One row of the iteration trace.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FunctionalRecord {
    pub f_value: f64,
    pub pairing: f64,
    pub g_density: f64,
    pub g_value: f64,
    pub ding: f64,
    pub mabuchi: f64,
    pub aubin_mabuchi: f64,
    pub gap1: f64,
    pub gap2: f64,
}

impl FunctionalRecord {
    pub fn from_gaps(gaps: &GapReport, dm: Option<DingMabuchi>, aubin_mabuchi: f64) -> Self {
        FunctionalRecord {
            f_value: gaps.f_next,
            pairing: gaps.pairing,
            g_density: gaps.g_density,
            g_value: gaps.g_value,
            ding: dm.map_or(f64::NAN, |d| d.ding),
            mabuchi: dm.map_or(f64::NAN, |d| d.mabuchi),
            aubin_mabuchi,
            gap1: gaps.gap1,
            gap2: gaps.gap2,
        }
    }
}
