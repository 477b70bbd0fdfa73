//! Max-affine potentials over fixed target sites, the evaluation grid, and
//! Legendre-duality helpers (normalization, minimum, translation, growth bounds).

use crate::convex_body::ConvexBody;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Polygon, BOX_LABEL, P2};
use crate::laguerre::{self, Envelope1d};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tensor grid on `[−L, L]ⁿ` with trapezoid weights. Node k has
/// coordinates `(k mod m, k div m)`; its dual cell is the trapezoid support.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl EvaluationGrid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(half_width > 0.0) || points_per_axis < 3 {
            return Err(Error::InvalidConfig(format!("grid L = {half_width}, m = {points_per_axis}")));
        }
        Ok(EvaluationGrid { dim, half_width, points_per_axis })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_axis - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        let m = self.points_per_axis;
        (0..m)
            .map(|i| {
                let j = i as i64 - (m as i64 - 1) / 2;
                if m % 2 == 1 { j as f64 * h } else { -self.half_width + i as f64 * h }
            })
            .collect()
    }

    /// Dual-cell boundaries along one axis (m + 1 values).
    pub fn edges(&self) -> Vec<f64> {
        let x = self.axis();
        let h = self.spacing();
        let m = self.points_per_axis;
        let mut e = Vec::with_capacity(m + 1);
        e.push(-self.half_width);
        for xi in &x[..m - 1] {
            e.push(xi + 0.5 * h);
        }
        e.push(self.half_width);
        e
    }

    pub fn axis_weights(&self) -> Vec<f64> {
        let e = self.edges();
        e.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let x = self.axis();
        let m = self.points_per_axis;
        match self.dim {
            1 => x.iter().map(|&v| vec![v]).collect(),
            _ => (0..m * m).map(|k| vec![x[k % m], x[k / m]]).collect(),
        }
    }

    pub fn quad_weights(&self) -> Vec<f64> {
        let w = self.axis_weights();
        let m = self.points_per_axis;
        match self.dim {
            1 => w,
            _ => (0..m * m).map(|k| w[k % m] * w[k / m]).collect(),
        }
    }

    /// Dual cell containing x (clamped to the box).
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let e = self.edges();
        let m = self.points_per_axis;
        match self.dim {
            1 => laguerre::axis_cell(&e, x[0]),
            _ => laguerre::axis_cell(&e, x[0]) + m * laguerre::axis_cell(&e, x[1]),
        }
    }

    /// Nodes inside `[−a, a]ⁿ`.
    pub fn window(&self, a: f64) -> Vec<usize> {
        let nodes = self.nodes();
        (0..nodes.len()).filter(|&k| nodes[k].iter().all(|v| v.abs() <= a + 1e-12)).collect()
    }
}

/// φ = α + βx on `[x0, x1]` (one dimension, for the exact tails beyond ±L).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailPiece {
    pub x0: f64,
    pub x1: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl TailPiece {
    pub fn value(&self, x: f64) -> f64 {
        self.alpha + self.beta * x
    }
}

/// Anything that can play the role of a convex potential: solved iterates and analytic oracles.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        fd_gradient(|p| self.value(p), x, 1e-4 * (1.0 + norm(x)))
    }

    /// Row-major Hessian.
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        fd_hessian(|p| self.value(p), x, 1e-3 * (1.0 + norm(x)))
    }

    /// Representative value per dual cell.
    fn cell_values(&self, grid: &EvaluationGrid) -> Vec<f64> {
        grid.nodes().par_iter().map(|x| self.value(x)).collect()
    }

    /// Linear pieces covering `(−∞, −L]` and `[L, ∞)` (one dimension only).
    fn tail_pieces(&self, half_width: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
        chord_tails(|x| self.value(&[x]), |x| self.gradient(&[x])[0], half_width)
    }
}

/// Chord interpolation on geometrically spaced points, closed by a tangent ray.
pub fn chord_tails(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, half_width: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
    let far = 1e4 * half_width.max(1.0);
    let mut xs = vec![half_width];
    while *xs.last().unwrap() < far {
        let x = *xs.last().unwrap();
        xs.push(x + (0.02 * x).max(1e-3));
    }
    let side = |sign: f64| {
        let mut out = Vec::new();
        for w in xs.windows(2) {
            let (a, b) = (sign * w[0], sign * w[1]);
            let (fa, fb) = (f(a), f(b));
            let beta = (fb - fa) / (b - a);
            out.push(TailPiece { x0: a.min(b), x1: a.max(b), alpha: fa - beta * a, beta });
        }
        let e = sign * *xs.last().unwrap();
        let beta = df(e);
        let ray = TailPiece {
            x0: if sign > 0.0 { e } else { f64::NEG_INFINITY },
            x1: if sign > 0.0 { f64::INFINITY } else { e },
            alpha: f(e) - beta * e,
            beta,
        };
        out.push(ray);
        if sign < 0.0 {
            out.reverse();
        }
        out
    };
    (side(-1.0), side(1.0))
}

pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut p = x.to_vec();
    for i in 0..n {
        let c = [-2.0, -1.0, 1.0, 2.0];
        let w = [1.0, -8.0, 8.0, -1.0];
        let mut s = 0.0;
        for k in 0..4 {
            p[i] = x[i] + c[k] * h;
            s += w[k] * f(&p);
        }
        p[i] = x[i];
        g[i] = s / (12.0 * h);
    }
    g
}

/// Fourth-order central second differences.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut hm = vec![0.0; n * n];
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let c = [-2.0, -1.0, 1.0, 2.0];
        let w = [-1.0, 16.0, 16.0, -1.0];
        let mut s = -30.0 * f0;
        for k in 0..4 {
            p[i] = x[i] + c[k] * h;
            s += w[k] * f(&p);
        }
        p[i] = x[i];
        hm[i * n + i] = s / (12.0 * h * h);
        for j in (i + 1)..n {
            let mut s = 0.0;
            let c = [1.0, 2.0];
            let w = [16.0, -1.0];
            for k in 0..2 {
                let a = c[k] * h;
                for (si, sj, sg) in [(1.0, 1.0, 1.0), (-1.0, -1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0)] {
                    p[i] = x[i] + si * a;
                    p[j] = x[j] + sj * a;
                    s += w[k] * sg * f(&p);
                }
            }
            p[i] = x[i];
            p[j] = x[j];
            let v = s / (48.0 * h * h);
            hm[i * n + j] = v;
            hm[j * n + i] = v;
        }
    }
    hm
}

/// `φ(x) = max_j(⟨x, y_j⟩ − w_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxAffinePotential {
    pub sites: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub site_masses: Vec<f64>,
    pub dim: usize,
}

impl MaxAffinePotential {
    pub fn new(sites: Vec<Vec<f64>>, weights: Vec<f64>, site_masses: Vec<f64>) -> Result<Self> {
        let dim = sites.first().map(|s| s.len()).ok_or_else(|| Error::InvalidConfig("no sites".into()))?;
        if sites.iter().any(|s| s.len() != dim) || weights.len() != sites.len() || site_masses.len() != sites.len() {
            return Err(Error::InvalidConfig("inconsistent site data".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("non-finite weight".into()));
        }
        Ok(MaxAffinePotential { sites, weights, site_masses, dim })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.site_masses.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.sites.iter().zip(&self.weights).map(|(y, w)| dot(x, y) - w).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index attaining the maximum, ties to the lowest index.
    pub fn argmax(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (j, (y, w)) in self.sites.iter().zip(&self.weights).enumerate() {
            let v = dot(x, y) - w;
            if v > bv {
                bv = v;
                best = j;
            }
        }
        best
    }

    pub fn sites_1d(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s[0]).collect()
    }

    pub fn sites_2d(&self) -> Vec<P2> {
        self.sites.iter().map(|s| [s[0], s[1]]).collect()
    }

    pub fn envelope(&self) -> Envelope1d {
        Envelope1d::new(&self.sites_1d(), &self.weights)
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        MaxAffinePotential { weights, ..self.clone() }
    }

    /// φ + c.
    pub fn shifted(&self, c: f64) -> Self {
        self.with_weights(self.weights.iter().map(|w| w - c).collect())
    }

    /// Sites whose supporting plane touches the graph (cells may be a single point).
    pub fn active_mask(&self) -> Vec<bool> {
        let scale = 1.0 + self.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        let tol = 1e-12 * scale;
        match self.dim {
            1 => {
                let env = self.envelope();
                let ys = self.sites_1d();
                let hull: Vec<(f64, f64)> = env.order.iter().map(|&j| (ys[j], self.weights[j])).collect();
                ys.iter()
                    .zip(&self.weights)
                    .map(|(&y, &w)| {
                        let k = hull.partition_point(|p| p.0 < y);
                        let conj = if k < hull.len() && hull[k].0 == y {
                            hull[k].1
                        } else if k == 0 || k == hull.len() {
                            return false;
                        } else {
                            let (a, b) = (hull[k - 1], hull[k]);
                            a.1 + (b.1 - a.1) * (y - a.0) / (b.0 - a.0)
                        };
                        w <= conj + tol
                    })
                    .collect()
            }
            _ => {
                let sites = self.sites_2d();
                let base = Polygon::rect(-1e6, 1e6, -1e6, 1e6, BOX_LABEL);
                (0..self.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut p = base.clone();
                        for (j, yj) in sites.iter().enumerate() {
                            if j == i {
                                continue;
                            }
                            let a = [yj[0] - sites[i][0], yj[1] - sites[i][1]];
                            p = p.clip(a, self.weights[j] - self.weights[i] + tol, 0);
                            if p.is_empty() {
                                return false;
                            }
                        }
                        true
                    })
                    .collect()
            }
        }
    }

    /// Origin strictly inside the convex hull of the sites (coercivity).
    pub fn is_coercive(&self) -> bool {
        match self.dim {
            1 => {
                let ys = self.sites_1d();
                ys.iter().any(|&y| y < 0.0) && ys.iter().any(|&y| y > 0.0)
            }
            _ => {
                let hull = crate::geometry::convex_hull_2d(&self.sites_2d(), 0.0);
                let k = hull.len();
                k >= 3 && (0..k).all(|i| laguerre::orientation(hull[i], hull[(i + 1) % k], [0.0, 0.0]) > 0.0)
            }
        }
    }

    /// Exact averages over the dual cells of the grid.
    pub fn cell_averages(&self, grid: &EvaluationGrid) -> Vec<f64> {
        let q = grid.quad_weights();
        let e = grid.edges();
        match self.dim {
            1 => {
                let env = self.envelope();
                let ys = self.sites_1d();
                e.windows(2)
                    .zip(&q)
                    .map(|(w, qk)| {
                        env.pieces(&ys, &self.weights, w[0], w[1])
                            .iter()
                            .map(|&(a, b, al, be)| (b - a) * (al + be * 0.5 * (a + b)))
                            .sum::<f64>()
                            / qk
                    })
                    .collect()
            }
            _ => {
                let sites = self.sites_2d();
                let cells = laguerre::cells_2d(&sites, &self.weights, grid.half_width);
                let pieces: Vec<Vec<laguerre::RasterPiece>> = cells
                    .par_iter()
                    .map(|c| {
                        let mut out = Vec::new();
                        laguerre::raster(&c.pts, &e, &mut out);
                        out
                    })
                    .collect();
                let mut acc = vec![0.0; grid.len()];
                for (j, ps) in pieces.iter().enumerate() {
                    let y = sites[j];
                    for p in ps {
                        acc[p.cell] += p.moment[0] * y[0] + p.moment[1] * y[1] - self.weights[j] * p.area;
                    }
                }
                acc.iter().zip(&q).map(|(a, qk)| a / qk).collect()
            }
        }
    }

    /// Minimum value and the center of the minimizing face.
    pub fn min_face(&self) -> Result<(Vec<f64>, f64)> {
        match self.dim {
            1 => {
                if !self.is_coercive() {
                    return Err(Error::Unbounded);
                }
                let env = self.envelope();
                let ys = self.sites_1d();
                let slopes: Vec<f64> = env.order.iter().map(|&j| ys[j]).collect();
                if slopes[0] >= 0.0 && slopes[0] > 1e-14 || *slopes.last().unwrap() < -1e-14 {
                    return Err(Error::Unbounded);
                }
                if let Some(i) = slopes.iter().position(|s| s.abs() <= 1e-14) {
                    let (a, b) = env.cell(i);
                    if a.is_finite() && b.is_finite() {
                        let c = 0.5 * (a + b);
                        return Ok((vec![c], self.eval(&[c])));
                    }
                    return Err(Error::Unbounded);
                }
                let i = slopes.iter().position(|&s| s > 0.0).ok_or(Error::Unbounded)?;
                if i == 0 {
                    return Err(Error::Unbounded);
                }
                let x = env.breaks[i - 1];
                Ok((vec![x], self.eval(&[x])))
            }
            _ => {
                let (x, t) = lp_min(self)?;
                let scale = 1.0 + t.abs() + self.weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
                let delta = 1e-10 * scale;
                let b = 1e3 * (1.0 + norm(&x));
                let mut p = Polygon::rect(-b, b, -b, b, BOX_LABEL);
                for (y, w) in self.sites.iter().zip(&self.weights) {
                    p = p.clip([y[0], y[1]], w + t + delta, 0);
                }
                if p.is_empty() || p.area() <= 0.0 {
                    return Ok((x, t));
                }
                let c = p.centroid();
                let c = vec![c[0], c[1]];
                let v = self.eval(&c);
                Ok((c, v))
            }
        }
    }
}

fn lp_min(phi: &MaxAffinePotential) -> Result<(Vec<f64>, f64)> {
    if !phi.is_coercive() {
        return Err(Error::Unbounded);
    }
    let n = phi.dim;
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let xs: Vec<_> = (0..n).map(|_| pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t = pb.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for (y, w) in phi.sites.iter().zip(&phi.weights) {
        let mut row: Vec<_> = xs.iter().zip(y).map(|(&v, &c)| (v, c)).collect();
        row.push((t, -1.0));
        pb.add_constraint(&row[..], ComparisonOp::Le, *w);
    }
    let sol = pb.solve().map_err(|_| Error::Unbounded)?;
    Ok((xs.iter().map(|&v| sol[v]).collect(), sol[t]))
}

impl Sampler for MaxAffinePotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.sites[self.argmax(x)].clone()
    }

    fn hessian(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim * self.dim]
    }

    fn cell_values(&self, grid: &EvaluationGrid) -> Vec<f64> {
        self.cell_averages(grid)
    }

    fn tail_pieces(&self, half_width: f64) -> (Vec<TailPiece>, Vec<TailPiece>) {
        let env = self.envelope();
        let ys = self.sites_1d();
        let conv = |v: Vec<(f64, f64, f64, f64)>| {
            v.into_iter().map(|(x0, x1, alpha, beta)| TailPiece { x0, x1, alpha, beta }).collect::<Vec<_>>()
        };
        (
            conv(env.pieces(&ys, &self.weights, f64::NEG_INFINITY, -half_width)),
            conv(env.pieces(&ys, &self.weights, half_width, f64::INFINITY)),
        )
    }
}

#[derive(Clone, Debug)]
pub struct LegendreValues {
    pub values: Vec<f64>,
    pub integral: f64,
}

/// `φ*(y_j) = w_j` at active sites and `I = Σ ν_j φ*(y_j)`.
pub fn legendre_on_body(phi: &MaxAffinePotential) -> Result<LegendreValues> {
    if let Some(j) = phi.active_mask().iter().position(|a| !a) {
        return Err(Error::InactiveSite(j));
    }
    Ok(LegendreValues { values: phi.weights.clone(), integral: normalization_integral(phi) })
}

pub fn normalization_integral(phi: &MaxAffinePotential) -> f64 {
    phi.site_masses.iter().zip(&phi.weights).map(|(n, w)| n * w).sum()
}

/// Adds the constant making `Σ ν_j φ*(y_j) = −τ`.
pub fn normalize(phi: &MaxAffinePotential, tau: f64) -> Result<MaxAffinePotential> {
    let lam = phi.total_mass();
    let c = (-tau - normalization_integral(phi)) / lam;
    Ok(phi.with_weights(phi.weights.iter().map(|w| w + c).collect()))
}

/// [`normalize`] plus the positivity requirement of the power profile.
pub fn normalize_for(phi: &MaxAffinePotential, tau: f64, power: bool) -> Result<MaxAffinePotential> {
    let out = normalize(phi, tau)?;
    if power {
        let (_, min) = out.min_face()?;
        if !(min > 0.0) {
            return Err(Error::PositivityLost { min });
        }
    }
    Ok(out)
}

/// Minimizer by linear programming, ties broken towards the lexicographically smallest point.
pub fn argmin(phi: &MaxAffinePotential) -> Result<(Vec<f64>, f64)> {
    let (_, t) = lp_min(phi)?;
    let n = phi.dim;
    let scale = 1.0 + t.abs();
    let mut fixed: Vec<f64> = Vec::new();
    for k in 0..n {
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let xs: Vec<_> = (0..n).map(|i| pb.add_var(if i == k { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        for (y, w) in phi.sites.iter().zip(&phi.weights) {
            let row: Vec<_> = xs.iter().zip(y).map(|(&v, &c)| (v, c)).collect();
            pb.add_constraint(&row[..], ComparisonOp::Le, w + t + 1e-11 * scale);
        }
        for (i, v) in fixed.iter().enumerate() {
            pb.add_constraint(&[(xs[i], 1.0)], ComparisonOp::Le, v + 1e-11 * scale);
        }
        let sol = pb.solve().map_err(|_| Error::Unbounded)?;
        fixed.push(sol[xs[k]]);
    }
    let v = phi.eval(&fixed);
    Ok((fixed, v))
}

/// `φ̃(x) = φ(x + a)`.
pub fn recenter(phi: &MaxAffinePotential, a: &[f64]) -> MaxAffinePotential {
    phi.with_weights(phi.sites.iter().zip(&phi.weights).map(|(y, w)| w - dot(a, y)).collect())
}

/// Largest r with `Σ_{⟨e,y_j⟩ >= r} ν_j ⟨e, y_j⟩ >= 2 r Σν` for every unit e.
/// For such r, any max-affine φ over the sites with min at 0 and
/// `Σ ν_j w_j = −τ` satisfies `φ(x) >= ½(φ(0) + τ/λ) + r|x|`.
pub fn klartag_radius(sites: &[Vec<f64>], masses: &[f64]) -> f64 {
    let lam: f64 = masses.iter().sum();
    let dim = sites[0].len();
    let rmax = sites.iter().map(|y| norm(y)).fold(0.0, f64::max);
    let dirs: Vec<(Vec<f64>, f64)> = match dim {
        1 => vec![(vec![1.0], 0.0), (vec![-1.0], 0.0)],
        _ => {
            let k = 720;
            let slack = rmax * std::f64::consts::PI / k as f64;
            (0..k)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                    (vec![t.cos(), t.sin()], slack)
                })
                .collect()
        }
    };
    let ok = |r: f64| {
        dirs.iter().all(|(e, sl)| {
            let m: f64 = sites
                .iter()
                .zip(masses)
                .filter_map(|(y, nu)| {
                    let p = dot(e, y);
                    (p >= r + sl).then(|| nu * (p - sl))
                })
                .sum();
            m >= 2.0 * r * lam
        })
    };
    let (mut lo, mut hi) = (0.0, rmax);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub r: f64,
    pub big_r: f64,
    /// min over nodes of φ(x) − ½(φ(0) + τ/λ) − r|x|
    pub lower_margin: f64,
    /// min over nodes of φ(x) − τ/λ − r|x|
    pub tau_margin: f64,
    /// min over nodes of φ(0) + R|x| − φ(x)
    pub upper_margin: f64,
    /// min φ − τ/λ
    pub positivity_margin: f64,
}

pub fn growth_bounds_check(phi: &MaxAffinePotential, tau: f64, body: &ConvexBody, grid: &EvaluationGrid) -> Result<GrowthReport> {
    growth_bounds_with_radius(phi, tau, body, grid, klartag_radius(&phi.sites, &phi.site_masses))
}

pub fn growth_bounds_with_radius(
    phi: &MaxAffinePotential,
    tau: f64,
    body: &ConvexBody,
    grid: &EvaluationGrid,
    r: f64,
) -> Result<GrowthReport> {
    legendre_on_body(phi)?;
    let lam = body.volume;
    let big_r = phi.sites.iter().map(|y| norm(y)).fold(0.0, f64::max);
    let zero = vec![0.0; phi.dim];
    let f0 = phi.eval(&zero);
    let (_, fmin) = phi.min_face()?;
    let nodes = grid.nodes();
    let vals: Vec<(f64, f64, f64)> = nodes
        .par_iter()
        .map(|x| {
            let f = phi.eval(x);
            let nx = norm(x);
            (f - 0.5 * (f0 + tau / lam) - r * nx, f - tau / lam - r * nx, f0 + big_r * nx - f)
        })
        .collect();
    let fold = |k: usize| {
        vals.iter()
            .map(|v| match k {
                0 => v.0,
                1 => v.1,
                _ => v.2,
            })
            .fold(f64::INFINITY, f64::min)
    };
    let rep = GrowthReport {
        r,
        big_r,
        lower_margin: fold(0),
        tau_margin: fold(1),
        upper_margin: fold(2),
        positivity_margin: fmin - tau / lam,
    };
    let slack = -1e-9 * (1.0 + f0.abs() + big_r * grid.half_width);
    if rep.lower_margin < slack || rep.upper_margin < slack || rep.tau_margin < slack || rep.positivity_margin < slack {
        return Err(Error::BoundViolated(format!("{rep:?}")));
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    #[default]
    Square,
    Hex,
}

/// Target sites with masses summing to λ(A): midpoints in one dimension;
/// in two, a lattice inside A relaxed by Lloyd steps with Voronoi cells clipped to A.
pub fn generate_sites(body: &ConvexBody, n: usize, lattice: LatticeKind, rng_seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidConfig("n_sites = 0".into()));
    }
    match body.dim {
        1 => {
            let (a, b) = (body.vertices[0][0], body.vertices[1][0]);
            let d = (b - a) / n as f64;
            Ok(((0..n).map(|k| vec![a + (k as f64 + 0.5) * d]).collect(), vec![d; n]))
        }
        2 => generate_sites_2d(body, n, lattice, rng_seed),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn lattice_points(body: &ConvexBody, spacing: f64, lattice: LatticeKind) -> Vec<P2> {
    let r = body.circumradius() + spacing;
    let k = (r / spacing).ceil() as i64 + 2;
    let mut out = Vec::new();
    let margin = 1e-9 * spacing;
    for j in -k..=k {
        for i in -k..=k {
            let p = match lattice {
                LatticeKind::Square => [(i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing],
                LatticeKind::Hex => {
                    let sh = if j.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
                    [(i as f64 + sh) * spacing, j as f64 * spacing * 3f64.sqrt() / 2.0]
                }
            };
            if body.halfspaces.iter().all(|h| h.eval(&p) > margin) {
                out.push(p);
            }
        }
    }
    out
}

fn generate_sites_2d(body: &ConvexBody, n: usize, lattice: LatticeKind, rng_seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let cell = match lattice {
        LatticeKind::Square => 1.0,
        LatticeKind::Hex => 3f64.sqrt() / 2.0,
    };
    let s0 = (body.volume / (n as f64 * cell)).sqrt();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=4000 {
        let s = s0 * (0.7 + 0.6 * i as f64 / 4000.0);
        let c = lattice_points(body, s, lattice).len();
        if c >= n {
            let surplus = c - n;
            if best.map_or(true, |(b, _)| surplus < b) {
                best = Some((surplus, s));
            }
        }
    }
    let (_, s) = best.ok_or_else(|| Error::InvalidConfig("lattice too coarse for n_sites".into()))?;
    let s = {
        // among spacings with the minimal surplus, the one closest to the nominal spacing
        let surplus = lattice_points(body, s, lattice).len() - n;
        (0..=4000)
            .map(|i| s0 * (0.7 + 0.6 * i as f64 / 4000.0))
            .filter(|&t| {
                let c = lattice_points(body, t, lattice).len();
                c >= n && c - n == surplus
            })
            .min_by(|a, b| (a - s0).abs().partial_cmp(&(b - s0).abs()).unwrap())
            .unwrap_or(s)
    };
    let mut pts = lattice_points(body, s, lattice);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    while pts.len() > n {
        let surplus = pts.len() - n;
        let partner = |pts: &[P2], i: usize| {
            pts.iter()
                .position(|q| (q[0] + pts[i][0]).abs() < 1e-9 * s && (q[1] + pts[i][1]).abs() < 1e-9 * s)
        };
        if surplus == 1 {
            if let Some(o) = pts.iter().position(|p| p[0].abs() < 1e-9 * s && p[1].abs() < 1e-9 * s) {
                pts.remove(o);
                continue;
            }
        }
        let order: Vec<usize> = {
            let mut v: Vec<usize> = (0..pts.len()).collect();
            v.shuffle(&mut rng);
            v
        };
        let i = order[0];
        match partner(&pts, i) {
            Some(j) if j != i && surplus >= 2 => {
                let (a, b) = if i > j { (i, j) } else { (j, i) };
                pts.remove(a);
                pts.remove(b);
            }
            _ => {
                pts.remove(i);
            }
        }
    }
    let body_poly = body.polygon();
    let mut masses = vec![0.0; n];
    for step in 0..=5 {
        let w: Vec<f64> = pts.iter().map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1])).collect();
        let cells: Vec<Polygon> = (0..n).into_par_iter().map(|i| laguerre::cell_2d(&body_poly, &pts, &w, i)).collect();
        if step == 5 {
            for (i, c) in cells.iter().enumerate() {
                masses[i] = c.area();
            }
        } else {
            for (i, c) in cells.iter().enumerate() {
                if !c.is_empty() {
                    pts[i] = c.centroid();
                }
            }
        }
    }
    if masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidConfig("empty Voronoi cell during site generation".into()));
    }
    Ok((pts.iter().map(|p| vec![p[0], p[1]]).collect(), masses))
}

/// `φ*(y) = sup_x ⟨x, y⟩ − φ(x)` for a smooth sampler, by damped Newton on `∇φ(x) = y`.
pub fn legendre_at(phi: &dyn Sampler, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    if n == 1 {
        let g = |x: f64| phi.gradient(&[x])[0] - y[0];
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut k = 0;
        while g(lo) > 0.0 {
            lo *= 2.0;
            k += 1;
            if k > 60 {
                return Err(Error::PreconditionViolated(format!("{y:?} outside the gradient image")));
            }
        }
        while g(hi) < 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 120 {
                return Err(Error::PreconditionViolated(format!("{y:?} outside the gradient image")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        let x = 0.5 * (lo + hi);
        return Ok((vec![x], x * y[0] - phi.value(&[x])));
    }
    let obj = |x: &[f64]| dot(x, y) - phi.value(x);
    let mut x = vec![0.0; n];
    let mut fx = obj(&x);
    for _ in 0..500 {
        let g: Vec<f64> = phi.gradient(&x).iter().zip(y).map(|(a, b)| a - b).collect();
        if norm(&g) < 1e-13 {
            break;
        }
        let h = phi.hessian(&x);
        let d = crate::geometry::solve(&h, &g, n).unwrap_or_else(|| g.clone());
        let mut t = 1.0;
        loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - t * b).collect();
            let fnew = obj(&xn);
            if fnew >= fx - 1e-15 * (1.0 + fx.abs()) {
                x = xn;
                fx = fnew;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok((x, fx));
            }
        }
    }
    Ok((x, fx))
}

/// Discrete representative `max_j(⟨x, y_j⟩ − φ*(y_j))` of a smooth potential.
pub fn from_sampler(phi: &dyn Sampler, sites: &[Vec<f64>], masses: &[f64]) -> Result<MaxAffinePotential> {
    let w: Result<Vec<f64>> = sites.par_iter().map(|y| legendre_at(phi, y).map(|r| r.1)).collect();
    MaxAffinePotential::new(sites.to_vec(), w?, masses.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_body::build_body;
    use proptest::prelude::*;

    fn two() -> MaxAffinePotential {
        MaxAffinePotential::new(vec![vec![-0.5], vec![0.5]], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    struct Sqrt1;
    impl Sampler for Sqrt1 {
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

    struct Shifted(f64);
    impl Sampler for Shifted {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 + (x[0] - self.0).powi(2)).sqrt()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            let d = x[0] - self.0;
            vec![d / (1.0 + d * d).sqrt()]
        }
    }

    #[test]
    fn finite_differences_of_a_cubic() {
        // f = x²y + 3xy² + y³: exact for the fourth-order stencils
        let f = |p: &[f64]| p[0] * p[0] * p[1] + 3.0 * p[0] * p[1] * p[1] + p[1].powi(3);
        let x = [0.7, -1.3];
        let g = fd_gradient(f, &x, 1e-2);
        assert!((g[0] - (2.0 * x[0] * x[1] + 3.0 * x[1] * x[1])).abs() < 1e-10);
        let h = fd_hessian(f, &x, 1e-2);
        let exact = [2.0 * x[1], 2.0 * x[0] + 6.0 * x[1], 2.0 * x[0] + 6.0 * x[1], 6.0 * x[0] + 6.0 * x[1]];
        for (a, b) in h.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8, "{h:?}");
        }
    }

    #[test]
    fn grid_invariants() {
        for (d, l, m) in [(1, 8.0, 257), (2, 3.0, 17), (1, 2.0, 10)] {
            let g = EvaluationGrid::new(d, l, m).unwrap();
            let s: f64 = g.quad_weights().iter().sum();
            assert!((s - (2.0 * l).powi(d as i32)).abs() < 1e-10);
            let x = g.axis();
            for i in 0..m {
                assert!((x[i] + x[m - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eval_examples() {
        let p = two();
        assert_eq!(p.eval(&[0.0]), 0.0);
        assert_eq!(p.eval(&[2.0]), 1.0);
        let c = MaxAffinePotential::new(vec![vec![0.0]], vec![-5.0], vec![1.0]).unwrap();
        assert_eq!(c.eval(&[3.7]), 5.0);
        let q = two().with_weights(vec![0.0, 0.5]);
        assert_eq!(q.eval(&[0.5]), -0.25);
    }

    #[test]
    fn legendre_examples() {
        let sites: Vec<Vec<f64>> = (0..400).map(|k| vec![-1.0 + (k as f64 + 0.5) / 200.0]).collect();
        let masses = vec![2.0 / 400.0; 400];
        let phi = from_sampler(&Sqrt1, &sites, &masses).unwrap();
        let i = legendre_on_body(&phi).unwrap().integral;
        assert!((i + std::f64::consts::FRAC_PI_2).abs() < 2e-4, "{i}");
        let abs = MaxAffinePotential::new(sites.clone(), vec![0.0; 400], masses.clone()).unwrap();
        assert!(legendre_on_body(&abs).is_err() || legendre_on_body(&abs).unwrap().integral.abs() < 1e-15);
        let sh = phi.shifted(0.3);
        let i2 = legendre_on_body(&sh).unwrap().integral;
        assert!((i2 - (i - 0.3 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn abs_is_active_only_at_ends() {
        let abs = MaxAffinePotential::new(vec![vec![-1.0], vec![0.0], vec![1.0]], vec![0.0, 0.0, 0.0], vec![1.0; 3]).unwrap();
        assert!(legendre_on_body(&abs).is_ok());
        let bad = abs.with_weights(vec![0.0, 1e6, 0.0]);
        assert!(matches!(legendre_on_body(&bad), Err(Error::InactiveSite(1))));
    }

    #[test]
    fn normalize_examples() {
        let abs = MaxAffinePotential::new(vec![vec![-1.0], vec![1.0]], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let n = normalize(&abs, 2.0).unwrap();
        for x in [-3.0, 0.0, 0.4, 2.0] {
            assert!((n.eval(&[x]) - (x.abs() + 1.0)).abs() < 1e-15);
        }
        let i = normalization_integral(&abs);
        assert_eq!(normalize(&abs, -i).unwrap(), abs);
        let sites: Vec<Vec<f64>> = (0..400).map(|k| vec![-1.0 + (k as f64 + 0.5) / 200.0]).collect();
        let phi = from_sampler(&Sqrt1, &sites, &vec![2.0 / 400.0; 400]).unwrap();
        let n = normalize(&phi, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((n.weights[0] - phi.weights[0]).abs() < 2e-4);
    }

    #[test]
    fn normalize_positivity() {
        let abs = MaxAffinePotential::new(vec![vec![-1.0], vec![1.0]], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(normalize_for(&abs, 1.0, true).is_ok());
        assert!(matches!(normalize_for(&abs, -1.0, true), Err(Error::PositivityLost { .. })));
    }

    #[test]
    fn argmin_examples() {
        let (a, v) = argmin(&two()).unwrap();
        assert!(a[0].abs() < 1e-9 && v.abs() < 1e-9);
        let sites: Vec<Vec<f64>> = (0..200).map(|k| vec![-1.0 + (k as f64 + 0.5) / 100.0]).collect();
        let phi = from_sampler(&Shifted(3.0), &sites, &vec![0.01; 200]).unwrap();
        let (a, _) = argmin(&phi).unwrap();
        assert!((a[0] - 3.0).abs() < 0.05, "{a:?}");
        let sq: Vec<Vec<f64>> = vec![vec![-0.5, -0.5], vec![0.5, -0.5], vec![0.5, 0.5], vec![-0.5, 0.5]];
        let p = MaxAffinePotential::new(sq, vec![0.0; 4], vec![1.0; 4]).unwrap();
        let (a, _) = argmin(&p).unwrap();
        assert!(norm(&a) < 1e-9);
        let (c, _) = p.min_face().unwrap();
        assert!(norm(&c) < 1e-9);
    }

    #[test]
    fn argmin_lexicographic_on_flat_face() {
        let p = MaxAffinePotential::new(vec![vec![-1.0], vec![0.0], vec![1.0]], vec![1.0, 0.0, 1.0], vec![1.0; 3]).unwrap();
        let (a, v) = argmin(&p).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-8 && v.abs() < 1e-9);
        let (c, _) = p.min_face().unwrap();
        assert!(c[0].abs() < 1e-14);
    }

    #[test]
    fn unbounded_when_origin_outside_hull() {
        let p = MaxAffinePotential::new(vec![vec![0.5], vec![1.0]], vec![0.0, 0.0], vec![1.0; 2]).unwrap();
        assert!(matches!(argmin(&p), Err(Error::Unbounded)));
        assert!(matches!(p.min_face(), Err(Error::Unbounded)));
    }

    #[test]
    fn recenter_examples() {
        let p = two().with_weights(vec![0.3, -0.1]);
        assert_eq!(recenter(&p, &[0.0]), p);
        let (a, _) = argmin(&p).unwrap();
        let q = recenter(&p, &a);
        let (b, _) = argmin(&q).unwrap();
        assert!(b[0].abs() < 1e-9);
        let sites: Vec<Vec<f64>> = (0..200).map(|k| vec![-1.0 + (k as f64 + 0.5) / 100.0]).collect();
        let m = vec![0.01; 200];
        let off = from_sampler(&Shifted(3.0), &sites, &m).unwrap();
        let cen = from_sampler(&Sqrt1, &sites, &m).unwrap();
        let r = recenter(&off, &[3.0]);
        for (a, b) in r.weights.iter().zip(&cen.weights) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn growth_bound_examples() {
        let body = build_body(&[vec![-1.0], vec![1.0]]).unwrap();
        let (sites, m) = generate_sites(&body, 129, LatticeKind::Square, 0).unwrap();
        let phi = normalize(&from_sampler(&Sqrt1, &sites, &m).unwrap(), std::f64::consts::FRAC_PI_2).unwrap();
        let (c, _) = phi.min_face().unwrap();
        let phi = normalize(&recenter(&phi, &c), std::f64::consts::FRAC_PI_2).unwrap();
        let grid = EvaluationGrid::new(1, 8.0, 257).unwrap();
        let rep = growth_bounds_check(&phi, std::f64::consts::FRAC_PI_2, &body, &grid).unwrap();
        assert!(rep.r > 0.1 && rep.r < 1.0);
        assert!(rep.upper_margin >= 0.0);
        for x in [0.0, 0.5, 3.0, 10.0] {
            assert!((1.0f64 + x * x).sqrt() <= 1.0 + x);
            assert!((1.0f64 + x * x).sqrt() >= 0.999 * x);
        }
        let bad = phi.with_weights({
            let mut w = phi.weights.clone();
            w[3] = 1e6;
            w
        });
        assert!(matches!(growth_bounds_check(&bad, 1.0, &body, &grid), Err(Error::InactiveSite(3))));
    }

    #[test]
    fn klartag_radius_of_interval() {
        let sites: Vec<Vec<f64>> = (0..20000).map(|k| vec![-1.0 + (k as f64 + 0.5) / 10000.0]).collect();
        let r = klartag_radius(&sites, &vec![1e-4; 20000]);
        assert!((r - (17f64.sqrt() - 4.0)).abs() < 1e-3, "{r}");
    }

    #[test]
    fn klartag_radius_of_disc_matches_continuum() {
        let body = build_body(&crate::convex_body::regular_polygon(128, 1.0)).unwrap();
        let (s, m) = generate_sites(&body, 600, LatticeKind::Hex, 1).unwrap();
        let r = klartag_radius(&s, &m);
        // continuum: ∫_{y1 >= r} y1 dy = (2/3)(1 − r²)^{3/2} >= 2πr
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 1.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if 2.0 / 3.0 * (1.0 - mid * mid).powf(1.5) >= 2.0 * std::f64::consts::PI * mid {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!(r <= lo + 0.01 && r > 0.5 * lo, "{r} vs {lo}");
    }

    #[test]
    fn sites_square_lattice() {
        let body = build_body(&[vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        let (s, m) = generate_sites(&body, 400, LatticeKind::Square, 0).unwrap();
        assert_eq!(s.len(), 400);
        assert!((m.iter().sum::<f64>() - 4.0).abs() < 1e-10);
        for mm in &m {
            assert!((mm - 0.01).abs() < 1e-12);
        }
        let disc = build_body(&crate::convex_body::regular_polygon(256, 1.0)).unwrap();
        for kind in [LatticeKind::Square, LatticeKind::Hex] {
            let (s, m) = generate_sites(&disc, 500, kind, 3).unwrap();
            assert_eq!(s.len(), 500);
            assert!((m.iter().sum::<f64>() - disc.volume).abs() < 1e-10);
            assert!(s.iter().all(|y| disc.contains(y, 0.0)));
        }
    }

    #[test]
    fn cell_averages_exact_for_affine_pieces() {
        let p = MaxAffinePotential::new(vec![vec![-0.5], vec![0.5]], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = EvaluationGrid::new(1, 2.0, 5).unwrap();
        let avg = p.cell_averages(&g);
        // cells [-2,-1.5],[-1.5,-0.5],[-0.5,0.5],[0.5,1.5],[1.5,2]
        let want = [0.875, 0.5, 0.125, 0.5, 0.875];
        for (a, b) in avg.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let q = MaxAffinePotential::new(
            vec![vec![-0.5, -0.5], vec![0.5, -0.5], vec![0.5, 0.5], vec![-0.5, 0.5]],
            vec![0.0; 4],
            vec![1.0; 4],
        )
        .unwrap();
        let g2 = EvaluationGrid::new(2, 2.0, 5).unwrap();
        let a2 = q.cell_averages(&g2);
        let w = g2.quad_weights();
        let tot: f64 = a2.iter().zip(&w).map(|(a, b)| a * b).sum();
        // ∫_{[-2,2]²} (|x|+|y|)/2 = 2·(4·4)/2·... = 16
        assert!((tot - 16.0).abs() < 1e-10, "{tot}");
    }

    #[test]
    fn tail_pieces_of_max_affine() {
        let p = MaxAffinePotential::new(vec![vec![-1.0], vec![-0.2], vec![0.4], vec![1.0]], vec![0.0, -3.0, -3.0, 0.0], vec![1.0; 4]).unwrap();
        let (l, r) = p.tail_pieces(2.0);
        assert_eq!(l.first().unwrap().x0, f64::NEG_INFINITY);
        assert_eq!(l.last().unwrap().x1, -2.0);
        assert_eq!(r.first().unwrap().x0, 2.0);
        assert_eq!(r.last().unwrap().x1, f64::INFINITY);
        for t in l.iter().chain(&r) {
            let x = if t.x0.is_finite() && t.x1.is_finite() { 0.5 * (t.x0 + t.x1) } else if t.x0.is_finite() { t.x0 + 1.0 } else { t.x1 - 1.0 };
            assert!((t.value(x) - p.eval(&[x])).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn translation_covariance(ws in proptest::collection::vec(-1.0f64..1.0, 7), a in -2.0f64..2.0) {
            let sites: Vec<Vec<f64>> = (0..7).map(|k| vec![-0.9 + 0.3 * k as f64]).collect();
            let p = MaxAffinePotential::new(sites.clone(), ws.clone(), vec![1.0; 7]).unwrap();
            let q = recenter(&p, &[a]);
            for j in 0..7 {
                prop_assert!((q.weights[j] - (p.weights[j] - a * sites[j][0])).abs() < 1e-14);
            }
            for x in [-3.0, -0.1, 0.7, 2.5] {
                prop_assert!((q.eval(&[x]) - p.eval(&[x + a])).abs() < 1e-12);
            }
        }

        #[test]
        fn order_reversal(ws in proptest::collection::vec(-1.0f64..1.0, 6), c in proptest::collection::vec(0.0f64..0.5, 6)) {
            let sites: Vec<Vec<f64>> = (0..6).map(|k| vec![-0.75 + 0.3 * k as f64]).collect();
            let p = MaxAffinePotential::new(sites.clone(), ws.clone(), vec![1.0; 6]).unwrap();
            let q = p.with_weights(ws.iter().zip(&c).map(|(w, d)| w - d).collect());
            // q >= p pointwise, so q* <= p* at sites active for both
            let g = EvaluationGrid::new(1, 40.0, 8001).unwrap();
            let conj = |f: &MaxAffinePotential, y: f64| g.axis().iter().map(|x| x * y - f.eval(&[*x])).fold(f64::NEG_INFINITY, f64::max);
            for y in &sites {
                prop_assert!(conj(&q, y[0]) <= conj(&p, y[0]) + 1e-12);
            }
        }

        #[test]
        fn biconjugacy_on_grid(ws in proptest::collection::vec(-0.5f64..0.5, 5)) {
            let sites: Vec<Vec<f64>> = (0..5).map(|k| vec![-0.8 + 0.4 * k as f64]).collect();
            let p = MaxAffinePotential::new(sites.clone(), ws, vec![1.0; 5]).unwrap();
            let act = p.active_mask();
            let g = EvaluationGrid::new(1, 50.0, 20001).unwrap();
            for j in 0..5 {
                if act[j] {
                    let y = sites[j][0];
                    let c = g.axis().iter().map(|x| x * y - p.eval(&[*x])).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!((c - p.weights[j]).abs() < 0.8 * g.spacing() + 1e-12);
                }
            }
        }

        #[test]
        fn positivity_after_normalize(ws in proptest::collection::vec(-1.0f64..1.0, 9), tau in 0.1f64..3.0) {
            let sites: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + (k as f64 + 0.5) * 2.0 / 9.0]).collect();
            let p = MaxAffinePotential::new(sites, ws, vec![2.0 / 9.0; 9]).unwrap();
            let n = normalize(&p, tau).unwrap();
            let (_, m) = n.min_face().unwrap();
            prop_assert!(m >= tau / 2.0 - 1e-9);
        }
    }
}
