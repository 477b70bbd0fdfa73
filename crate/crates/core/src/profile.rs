//! The nonlinearity `h`, its tail primitive `H(t) = ∫_t^∞ h`, and the coupling `g`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    #[serde(rename = "exp")]
    Exponential,
    Power,
}

/// `h(t) = e^{−t}` or `h(t) = t^{−(s+1)}` with `s = n + p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub kind: ProfileKind,
    pub s: f64,
    pub dim: usize,
    pub tail_exponent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// g(s, t) = s − t
    Difference,
    /// g(s, t) = s / t
    Ratio,
}

impl Profile {
    pub fn exponential(dim: usize) -> Self {
        Profile { kind: ProfileKind::Exponential, s: f64::NAN, dim, tail_exponent: 1.0 }
    }

    /// Power profile with tail exponent `p`; `p <= 0` is representable but fails B1.
    pub fn power(dim: usize, p: f64) -> Result<Self> {
        let s = dim as f64 + p;
        if !(s > 0.0) || !p.is_finite() {
            return Err(Error::DomainError { what: "power profile exponent s = n + p", value: s });
        }
        Ok(Profile { kind: ProfileKind::Power, s, dim, tail_exponent: p })
    }

    pub fn coupling(&self) -> Coupling {
        match self.kind {
            ProfileKind::Exponential => Coupling::Difference,
            ProfileKind::Power => Coupling::Ratio,
        }
    }

    pub fn is_power(&self) -> bool {
        self.kind == ProfileKind::Power
    }

    pub fn h(&self, t: f64) -> Result<f64> {
        match self.kind {
            ProfileKind::Exponential => Ok((-t).exp()),
            ProfileKind::Power if t > 0.0 => Ok(t.powf(-(self.s + 1.0))),
            ProfileKind::Power => Err(Error::DomainError { what: "power profile h", value: t }),
        }
    }

    pub fn big_h(&self, t: f64) -> Result<f64> {
        match self.kind {
            ProfileKind::Exponential => Ok((-t).exp()),
            ProfileKind::Power if t > 0.0 => Ok(t.powf(-self.s) / self.s),
            ProfileKind::Power => Err(Error::DomainError { what: "power profile H", value: t }),
        }
    }

    pub fn h_inv(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::DomainError { what: "H inverse", value: u });
        }
        Ok(match self.kind {
            ProfileKind::Exponential => -u.ln(),
            ProfileKind::Power => (self.s * u).powf(-1.0 / self.s),
        })
    }

    /// Unchecked `h`; callers guarantee the domain.
    #[inline]
    pub fn h_fast(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential => (-t).exp(),
            ProfileKind::Power => t.powf(-(self.s + 1.0)),
        }
    }

    #[inline]
    pub fn big_h_fast(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential => (-t).exp(),
            ProfileKind::Power => t.powf(-self.s) / self.s,
        }
    }

    /// `∫_t^∞ H`.
    pub fn tail_h_integral(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential => (-t).exp(),
            ProfileKind::Power => t.powf(1.0 - self.s) / (self.s * (self.s - 1.0)),
        }
    }

    /// `∫_t^∞ u h(u) du`.
    pub fn tail_first_moment(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential => (t + 1.0) * (-t).exp(),
            ProfileKind::Power => t.powf(1.0 - self.s) / (self.s - 1.0),
        }
    }

    /// Integrals of `h(α+βx)`, `x h(α+βx)` and `H(α+βx)` over `[x0, x1]`
    /// (either end may be infinite).
    pub fn linear_integrals(&self, alpha: f64, beta: f64, x0: f64, x1: f64) -> [f64; 3] {
        if !(x1 > x0) {
            return [0.0; 3];
        }
        // anchor at the finite end where h is largest and integrate along u >= 0
        let (a, sigma, len) = if x0.is_infinite() {
            (x1, -1.0, f64::INFINITY)
        } else if x1.is_infinite() || beta >= 0.0 {
            (x0, 1.0, x1 - x0)
        } else {
            (x1, -1.0, x1 - x0)
        };
        let ta = alpha + beta * a;
        let b = sigma * beta;
        match self.kind {
            ProfileKind::Exponential => {
                let c = (-ta).exp();
                let (e0, e1) = exp_moments(b, len);
                let ih = c * e0;
                [ih, c * (a * e0 + sigma * e1), ih]
            }
            ProfileKind::Power => {
                let k = self.s + 1.0;
                if len.is_finite() && (b * len).abs() < 1e-2 * ta {
                    return gauss_power(ta, b, len, a, sigma, self.s);
                }
                let p_k = pow_integral(k, ta, b, len);
                let p_k1 = pow_integral(k - 1.0, ta, b, len);
                let p_s = pow_integral(self.s, ta, b, len);
                let u_moment = (p_k1 - ta * p_k) / b;
                [p_k, a * p_k + sigma * u_moment, p_s / self.s]
            }
        }
    }
}

/// (∫_0^len e^{−bu} du, ∫_0^len u e^{−bu} du)
fn exp_moments(b: f64, len: f64) -> (f64, f64) {
    if len.is_infinite() {
        return (1.0 / b, 1.0 / (b * b));
    }
    let z = b * len;
    let e0 = if z.abs() < 1e-8 { len * (1.0 - 0.5 * z) } else { -(-z).exp_m1() / b };
    let e1 = if z.abs() < 1e-3 {
        len * len * (0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0)
    } else {
        (e0 - len * (-z).exp()) / b
    };
    (e0, e1)
}

/// ∫_0^len (ta + b u)^{−k} du
fn pow_integral(k: f64, ta: f64, b: f64, len: f64) -> f64 {
    let tb = ta + b * len;
    if (k - 1.0).abs() < 1e-14 {
        return (tb / ta).ln() / b;
    }
    let end = if len.is_infinite() { 0.0 } else { tb.powf(1.0 - k) };
    (ta.powf(1.0 - k) - end) / ((k - 1.0) * b)
}

fn gauss_power(ta: f64, b: f64, len: f64, a: f64, sigma: f64, s: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (&xi, &wi) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        for sign in [-1.0, 1.0] {
            let u = 0.5 * len * (1.0 + sign * xi);
            let w = 0.5 * len * wi;
            let t = ta + b * u;
            let h = t.powf(-(s + 1.0));
            out[0] += w * h;
            out[1] += w * (a + sigma * u) * h;
            out[2] += w * t.powf(-s) / s;
        }
    }
    out
}

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// `∫_{x0}^{x1} (α + βx)^{−k} dx` for α + βx > 0 on the interval.
pub fn power_integral(k: f64, alpha: f64, beta: f64, x0: f64, x1: f64) -> f64 {
    let p = Profile { kind: ProfileKind::Power, s: k - 1.0, dim: 1, tail_exponent: f64::NAN };
    p.linear_integrals(alpha, beta, x0, x1)[0]
}

pub fn h_eval(profile: &Profile, t: f64) -> Result<f64> {
    profile.h(t)
}

#[allow(non_snake_case)]
pub fn H_inv(profile: &Profile, u: f64) -> Result<f64> {
    profile.h_inv(u)
}

pub fn couple(coupling: Coupling, s: f64, t: f64) -> Result<f64> {
    match coupling {
        Coupling::Difference => Ok(s - t),
        Coupling::Ratio if t == 0.0 => Err(Error::DivisionByZero),
        Coupling::Ratio => Ok(s / t),
    }
}

#[derive(Clone, Debug)]
pub struct B1Report {
    pub p: f64,
    pub c: f64,
    /// (t, h(t), C t^{−(n+p+1)})
    pub samples: Vec<(f64, f64, f64)>,
}

/// Decay check `h(t) <= C t^{−(n+p+1)}` at t ∈ {10, 10², 10³, 10⁴}.
pub fn check_hypothesis_b1(profile: &Profile) -> Result<B1Report> {
    let n = profile.dim as f64;
    let (p, c) = match profile.kind {
        ProfileKind::Exponential => {
            let e = n + 2.0;
            (1.0, e.powf(e) * (-e).exp())
        }
        ProfileKind::Power => (profile.s - n, 1.0),
    };
    if !(p > 0.0) {
        return Err(Error::HypothesisViolated(format!("tail exponent p = {p} must be positive")));
    }
    let mut samples = Vec::new();
    for t in [10.0, 1e2, 1e3, 1e4] {
        let h = profile.h(t)?;
        let bound = c * f64::powf(t, -(n + p + 1.0));
        if h > bound * (1.0 + 1e-12) {
            return Err(Error::HypothesisViolated(format!("h({t}) = {h:e} exceeds {bound:e}")));
        }
        samples.push((t, h, bound));
    }
    Ok(B1Report { p, c, samples })
}
