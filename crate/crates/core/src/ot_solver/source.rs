use crate::error::{Error, Result};
use crate::laguerre::axis_cell;
use crate::potential::{EvaluationGrid, Sampler, TailPiece};
use crate::profile::{Profile, ProfileKind};
use rayon::prelude::*;

/// Exact density beyond ±L in one dimension: `h(α + βx) / z` on each piece.
#[derive(Clone, Debug)]
pub struct Tails1d {
    pub profile: Profile,
    pub left: Vec<TailPiece>,
    pub right: Vec<TailPiece>,
    pub z: f64,
    /// Per-piece `[∫h, ∫xh, ∫H]` (unnormalized).
    pub left_int: Vec<[f64; 3]>,
    pub right_int: Vec<[f64; 3]>,
}

impl Tails1d {
    fn new(profile: Profile, left: Vec<TailPiece>, right: Vec<TailPiece>) -> Self {
        let ints = |v: &[TailPiece]| v.iter().map(|t| profile.linear_integrals(t.alpha, t.beta, t.x0, t.x1)).collect();
        let left_int = ints(&left);
        let right_int = ints(&right);
        Tails1d { profile, left, right, z: 1.0, left_int, right_int }
    }

    fn sum(&self, k: usize) -> f64 {
        self.left_int.iter().chain(&self.right_int).map(|v| v[k]).sum()
    }

    pub fn left_mass(&self) -> f64 {
        self.left_int.iter().map(|v| v[0]).sum::<f64>() / self.z
    }

    pub fn right_mass(&self) -> f64 {
        self.right_int.iter().map(|v| v[0]).sum::<f64>() / self.z
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&TailPiece, &[f64; 3])> {
        self.left.iter().zip(&self.left_int).chain(self.right.iter().zip(&self.right_int))
    }

    /// (mass, first moment) of the tail density over `[a, b]`.
    fn segment(&self, a: f64, b: f64) -> (f64, f64) {
        let mut m = 0.0;
        let mut x = 0.0;
        for (t, full) in self.pieces() {
            let lo = a.max(t.x0);
            let hi = b.min(t.x1);
            if hi <= lo {
                continue;
            }
            let v = if lo == t.x0 && hi == t.x1 { *full } else { self.profile.linear_integrals(t.alpha, t.beta, lo, hi) };
            m += v[0];
            x += v[1];
        }
        (m / self.z, x / self.z)
    }

    fn density_at(&self, x: f64) -> f64 {
        for t in self.left.iter().chain(&self.right) {
            if x >= t.x0 && x <= t.x1 {
                return self.profile.h_fast(t.value(x)) / self.z;
            }
        }
        0.0
    }
}

/// The profile and potential a density was generated from.
#[derive(Clone, Copy, Debug)]
pub struct Generator {
    pub profile: Profile,
    /// F of the generating potential, on the same quadrature.
    pub f_value: f64,
    /// log of the normalizing constant ‖h∘φ‖₁.
    pub log_z: f64,
}

/// Probability density that is constant on each dual cell of the grid,
/// plus exact tails in one dimension.
#[derive(Clone, Debug)]
pub struct SourceDensity {
    pub grid: EvaluationGrid,
    pub masses: Vec<f64>,
    pub density: Vec<f64>,
    pub tails: Option<Tails1d>,
    /// Estimated mass lost to truncation (zero when tails are exact).
    pub tail_mass_bound: f64,
    pub generator: Option<Generator>,
    edges: Vec<f64>,
    cum_mass: Vec<f64>,
    cum_moment: Vec<f64>,
}

impl SourceDensity {
    /// Box-supported density from cell masses (normalized here).
    pub fn from_masses(grid: &EvaluationGrid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidConfig("negative or non-finite source mass".into()));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidConfig("source has zero mass".into()));
        }
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        Ok(Self::assemble(grid, masses, None, 0.0, None))
    }

    fn assemble(grid: &EvaluationGrid, masses: Vec<f64>, tails: Option<Tails1d>, tail_mass_bound: f64, generator: Option<Generator>) -> Self {
        let q = grid.quad_weights();
        let density: Vec<f64> = masses.iter().zip(&q).map(|(m, w)| m / w).collect();
        let edges = grid.edges();
        let (mut cum_mass, mut cum_moment) = (Vec::new(), Vec::new());
        if grid.dim == 1 {
            let (mut cm, mut cx) = match &tails {
                Some(t) => {
                    let (m, x) = t.segment(f64::NEG_INFINITY, edges[0]);
                    (m, x)
                }
                None => (0.0, 0.0),
            };
            for k in 0..masses.len() {
                cum_mass.push(cm);
                cum_moment.push(cx);
                cm += masses[k];
                cx += density[k] * 0.5 * (edges[k + 1] * edges[k + 1] - edges[k] * edges[k]);
            }
            cum_mass.push(cm);
            cum_moment.push(cx);
        }
        SourceDensity { grid: grid.clone(), masses, density, tails, tail_mass_bound, generator, edges, cum_mass, cum_moment }
    }

    /// `h∘φ / ‖h∘φ‖₁` with φ replaced by its dual-cell values; tails exact in
    /// one dimension, estimated (and required below `tail_tol`) in two.
    pub fn from_potential(phi: &dyn Sampler, profile: &Profile, grid: &EvaluationGrid, tail_tol: f64) -> Result<Self> {
        let q = grid.quad_weights();
        let vals = phi.cell_values(grid);
        let nodes = grid.nodes();
        let shift = match profile.kind {
            ProfileKind::Exponential => vals.iter().cloned().fold(f64::INFINITY, f64::min),
            ProfileKind::Power => {
                if let Some(k) = vals.iter().position(|v| !(*v > 0.0)) {
                    return Err(Error::NonPositivePotential { x: nodes[k].clone(), value: vals[k] });
                }
                0.0
            }
        };
        if !shift.is_finite() || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite potential values".into()));
        }
        let hv: Vec<f64> = vals.iter().zip(&q).map(|(v, w)| w * profile.h_fast(v - shift)).collect();
        let bh: f64 = vals.iter().zip(&q).map(|(v, w)| w * profile.big_h_fast(v - shift)).sum();
        let mut zb: f64 = hv.iter().sum();
        let mut big_h = bh;
        let mut tails = None;
        let mut bound = 0.0;
        if grid.dim == 1 {
            let (l, r) = phi.tail_pieces(grid.half_width);
            let sh = |v: Vec<TailPiece>| -> Result<Vec<TailPiece>> {
                v.into_iter()
                    .map(|t| {
                        let t = TailPiece { alpha: t.alpha - shift, ..t };
                        if profile.is_power() {
                            for x in [t.x0, t.x1] {
                                if x.is_finite() && !(t.value(x) > 0.0) {
                                    return Err(Error::NonPositivePotential { x: vec![x], value: t.value(x) });
                                }
                            }
                        }
                        if (t.x0.is_infinite() && t.beta >= 0.0) || (t.x1.is_infinite() && t.beta <= 0.0) {
                            return Err(Error::InvalidConfig("potential does not grow at infinity".into()));
                        }
                        Ok(t)
                    })
                    .collect()
            };
            let mut tl = Tails1d::new(*profile, sh(l)?, sh(r)?);
            let th = tl.sum(0);
            zb += th;
            big_h += tl.sum(2);
            tl.z = zb;
            tails = Some(tl);
        } else if tail_tol.is_finite() {
            let t = tail_estimate_2d(phi, profile, grid.half_width, shift);
            bound = t / (zb + t);
            if bound > tail_tol {
                return Err(Error::TailTooHeavy { tail: bound, tol: tail_tol });
            }
        }
        if !(zb > 0.0) || !zb.is_finite() {
            return Err(Error::InvalidConfig("density normalization failed".into()));
        }
        let masses: Vec<f64> = hv.iter().map(|v| v / zb).collect();
        let f_value = shift + profile.h_inv(big_h)?;
        let generator = Generator { profile: *profile, f_value, log_z: zb.ln() - shift };
        Ok(Self::assemble(grid, masses, tails, bound, Some(generator)))
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.tails.as_ref().map_or(0.0, |t| t.left_mass() + t.right_mass())
    }

    /// Cumulative distribution (one dimension).
    pub fn cdf(&self, x: f64) -> f64 {
        self.segment(f64::NEG_INFINITY, x).0
    }

    /// (mass, first moment) over `[a, b]` (one dimension).
    pub fn segment(&self, a: f64, b: f64) -> (f64, f64) {
        if !(b > a) {
            return (0.0, 0.0);
        }
        let e = &self.edges;
        let (lo, hi) = (e[0], *e.last().unwrap());
        let prim = |x: f64| -> (f64, f64) {
            let k = axis_cell(e, x);
            let d = self.density[k];
            (self.cum_mass[k] + d * (x - e[k]), self.cum_moment[k] + d * 0.5 * (x * x - e[k] * e[k]))
        };
        let mut out = (0.0, 0.0);
        let (ba, bb) = (a.max(lo), b.min(hi));
        if bb > ba {
            let (pa, pb) = (prim(ba), prim(bb));
            out = (pb.0 - pa.0, pb.1 - pa.1);
        }
        if let Some(t) = &self.tails {
            if a < lo {
                let s = t.segment(a, b.min(lo));
                out.0 += s.0;
                out.1 += s.1;
            }
            if b > hi {
                let s = t.segment(a.max(hi), b);
                out.0 += s.0;
                out.1 += s.1;
            }
        }
        out
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        let e = &self.edges;
        let (lo, hi) = (e[0], *e.last().unwrap());
        if x.iter().any(|v| *v < lo || *v > hi) {
            return match (&self.tails, x.len()) {
                (Some(t), 1) => t.density_at(x[0]),
                _ => 0.0,
            };
        }
        let m = self.grid.points_per_axis;
        let k = if x.len() == 1 { axis_cell(e, x[0]) } else { axis_cell(e, x[0]) + m * axis_cell(e, x[1]) };
        self.density[k]
    }

    /// `∫ x ρ`, exact.
    pub fn mean(&self) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.segment(f64::NEG_INFINITY, f64::INFINITY).1],
            _ => {
                let e = &self.edges;
                let m = self.grid.points_per_axis;
                let mut out = vec![0.0; 2];
                for k in 0..self.masses.len() {
                    let (i, j) = (k % m, k / m);
                    out[0] += self.masses[k] * 0.5 * (e[i] + e[i + 1]);
                    out[1] += self.masses[k] * 0.5 * (e[j] + e[j + 1]);
                }
                out
            }
        }
    }
}

/// ∫ h(φ − shift) outside `[−L, L]²` along rays, trapezoid in r.
fn tail_estimate_2d(phi: &dyn Sampler, profile: &Profile, half_width: f64, shift: f64) -> f64 {
    let k = 256;
    let dtheta = 2.0 * std::f64::consts::PI / k as f64;
    (0..k)
        .into_par_iter()
        .map(|i| {
            let th = (i as f64 + 0.5) * dtheta;
            let (c, s) = (th.cos(), th.sin());
            let rb = half_width / c.abs().max(s.abs());
            let f = |r: f64| {
                let v = phi.value(&[r * c, r * s]) - shift;
                if profile.is_power() && !(v > 0.0) {
                    return f64::INFINITY;
                }
                profile.h_fast(v) * r
            };
            let mut r = rb;
            let mut fr = f(r);
            let f0 = fr;
            let mut acc = 0.0;
            while r < 1e3 * rb {
                let rn = r * 1.03;
                let fnext = f(rn);
                acc += 0.5 * (fr + fnext) * (rn - r);
                r = rn;
                fr = fnext;
                if fr <= 1e-18 * f0 || fr == 0.0 {
                    break;
                }
            }
            if profile.is_power() {
                acc += fr * r / (profile.s - 1.0);
            }
            acc * dtheta
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::chord_tails;

    struct Abs;
    impl Sampler for Abs {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0].abs()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0].signum()]
        }
        fn tail_pieces(&self, l: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
            (
                vec![TailPiece { x0: f64::NEG_INFINITY, x1: -l, alpha: 0.0, beta: -1.0 }],
                vec![TailPiece { x0: l, x1: f64::INFINITY, alpha: 0.0, beta: 1.0 }],
            )
        }
    }

    struct KE;
    impl Sampler for KE {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0].abs() + 2.0 * (-x[0].abs()).exp().ln_1p()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![(x[0] / 2.0).tanh()]
        }
        fn tail_pieces(&self, l: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
            chord_tails(|x| self.value(&[x]), |x| self.gradient(&[x])[0], l)
        }
    }

    #[test]
    fn exponential_abs_has_exact_normalization() {
        let g = EvaluationGrid::new(1, 3.0, 61).unwrap();
        let rho = SourceDensity::from_potential(&Abs, &Profile::exponential(1), &g, 1e-8).unwrap();
        assert!((rho.total_mass() - 1.0).abs() < 1e-13);
        let gen = rho.generator.unwrap();
        // node-sampled box part is a midpoint-like rule; tails exact
        assert!((gen.f_value + 2f64.ln()).abs() < 1e-2);
        assert!((rho.cdf(0.0) - 0.5).abs() < 1e-13);
        assert!((rho.cdf(-3.0) - rho.tails.as_ref().unwrap().left_mass()).abs() < 1e-15);
        assert!(rho.mean()[0].abs() < 1e-14);
    }

    #[test]
    fn ke_oracle_normalizes_to_one() {
        let g = EvaluationGrid::new(1, 8.0, 1025).unwrap();
        let rho = SourceDensity::from_potential(&KE, &Profile::exponential(1), &g, 1e-8).unwrap();
        assert!(rho.generator.unwrap().log_z.abs() < 1e-5);
        assert!(rho.generator.unwrap().f_value.abs() < 1e-5);
    }

    #[test]
    fn shift_invariance() {
        struct Sh(f64);
        impl Sampler for Sh {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                KE.value(x) + self.0
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                KE.gradient(x)
            }
        }
        let g = EvaluationGrid::new(1, 8.0, 129).unwrap();
        let a = SourceDensity::from_potential(&Sh(0.0), &Profile::exponential(1), &g, 1e-8).unwrap();
        let b = SourceDensity::from_potential(&Sh(7.5), &Profile::exponential(1), &g, 1e-8).unwrap();
        for (x, y) in a.masses.iter().zip(&b.masses) {
            assert!((x - y).abs() < 1e-14);
        }
        let fa = a.generator.unwrap().f_value;
        let fb = b.generator.unwrap().f_value;
        assert!((fb - fa - 7.5).abs() < 1e-12);
    }

    #[test]
    fn power_sqrt_normalizer_is_two() {
        struct Sq;
        impl Sampler for Sq {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                (1.0 + x[0] * x[0]).sqrt()
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0] / (1.0 + x[0] * x[0]).sqrt()]
            }
        }
        let g = EvaluationGrid::new(1, 8.0, 2049).unwrap();
        let p = Profile::power(1, 1.0).unwrap();
        let rho = SourceDensity::from_potential(&Sq, &p, &g, 1e-8).unwrap();
        assert!((rho.generator.unwrap().log_z - 2f64.ln()).abs() < 1e-4);
        assert!((rho.generator.unwrap().f_value - std::f64::consts::PI.powf(-0.5)).abs() < 1e-4);
    }

    #[test]
    fn segment_matches_cdf_differences() {
        let g = EvaluationGrid::new(1, 3.0, 31).unwrap();
        let rho = SourceDensity::from_potential(&KE, &Profile::exponential(1), &g, 1e-8).unwrap();
        for (a, b) in [(-10.0, -4.0), (-4.0, 0.3), (0.3, 2.95), (2.0, 40.0), (-1.0, 1.0)] {
            let (m, _) = rho.segment(a, b);
            assert!((m - (rho.cdf(b) - rho.cdf(a))).abs() < 1e-14);
        }
    }

    #[test]
    fn from_masses_normalizes() {
        let g = EvaluationGrid::new(2, 1.0, 5).unwrap();
        let rho = SourceDensity::from_masses(&g, vec![2.0; 25]).unwrap();
        assert!((rho.total_mass() - 1.0).abs() < 1e-15);
        assert!(SourceDensity::from_masses(&g, vec![1.0; 24]).is_err());
    }
}
