//! Semi-discrete quadratic-cost transport from a [`SourceDensity`] onto
//! weighted sites: damped Newton on the convex dual, plus an exact
//! quantile solver in one dimension.

mod source;

pub use source::{Generator, SourceDensity, Tails1d};

use crate::error::{Error, Result};
use crate::geometry::dot;
use crate::laguerre::{self, Envelope1d, RasterPiece};
use crate::potential::MaxAffinePotential;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMethod {
    /// Newton with the facet-integral Hessian.
    Newton,
    /// Diagonal (Jacobi) quasi-Newton.
    Diagonal,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Relative per-site mass tolerance.
    pub mass_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub method: StepMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { mass_tol: 1e-6, max_iters: 500, damping: 0.5, method: StepMethod::Newton }
    }
}

#[derive(Clone, Debug)]
pub struct DualState {
    pub weights: Vec<f64>,
    pub cell_masses: Vec<f64>,
    /// `−Φ(w)`, nondecreasing over accepted steps.
    pub dual_value: f64,
    pub iterations: usize,
    /// max_j |μ_j − t_j| / t_j
    pub residual: f64,
}

/// Cell masses, Σ⟨M_j, y_j⟩ and facet couplings for given weights.
struct Eval {
    mu: Vec<f64>,
    moment_term: f64,
    /// (i, j, H_ij) with i < j
    edges: Vec<(usize, usize, f64)>,
    /// 1D only, per edge: (left site, right site, coupling from the left, from the right).
    /// The two differ when the breakpoint sits on a jump of the density.
    sides: Vec<(usize, usize, f64, f64)>,
}

fn evaluate(source: &SourceDensity, sites: &[Vec<f64>], w: &[f64], need_hessian: bool) -> Eval {
    match source.dim() {
        1 => evaluate_1d(source, sites, w),
        _ => evaluate_2d(source, sites, w, need_hessian),
    }
}

fn evaluate_1d(source: &SourceDensity, sites: &[Vec<f64>], w: &[f64]) -> Eval {
    let ys: Vec<f64> = sites.iter().map(|s| s[0]).collect();
    let env = Envelope1d::new(&ys, w);
    let mut mu = vec![0.0; ys.len()];
    let mut moment_term = 0.0;
    for (i, &j) in env.order.iter().enumerate() {
        let (a, b) = env.cell(i);
        let (m, x) = source.segment(a, b);
        mu[j] = m;
        moment_term += x * ys[j];
    }
    let mut edges = Vec::with_capacity(env.breaks.len());
    let mut sides = Vec::with_capacity(env.breaks.len());
    for (p, &b) in env.order.windows(2).zip(&env.breaks) {
        let dy = ys[p[1]] - ys[p[0]];
        let tol = 1e-7 * (1.0 + b.abs());
        edges.push((p[0].min(p[1]), p[0].max(p[1]), source.density_at(&[b]) / dy));
        sides.push((p[0], p[1], source.density_at(&[b - tol]) / dy, source.density_at(&[b + tol]) / dy));
    }
    Eval { mu, moment_term, edges, sides }
}

fn evaluate_2d(source: &SourceDensity, sites: &[Vec<f64>], w: &[f64], need_hessian: bool) -> Eval {
    let p2: Vec<[f64; 2]> = sites.iter().map(|s| [s[0], s[1]]).collect();
    let cells = laguerre::cells_2d(&p2, w, source.grid.half_width);
    let e = source.edges();
    let per: Vec<(f64, f64, Vec<(usize, usize, f64)>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut pieces: Vec<RasterPiece> = Vec::new();
            laguerre::raster(&c.pts, e, &mut pieces);
            let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
            for p in &pieces {
                let d = source.density[p.cell];
                m += d * p.area;
                mx += d * p.moment[0];
                my += d * p.moment[1];
            }
            let mut ed = Vec::new();
            if need_hessian {
                let n = c.pts.len();
                for k in 0..n {
                    let lab = c.labels[k];
                    if lab < 0 || (lab as usize) <= i {
                        continue;
                    }
                    let j = lab as usize;
                    let s = laguerre::segment_integral(c.pts[k], c.pts[(k + 1) % n], e, &source.density);
                    let dy = ((p2[j][0] - p2[i][0]).powi(2) + (p2[j][1] - p2[i][1]).powi(2)).sqrt();
                    if s > 0.0 {
                        ed.push((i, j, s / dy));
                    }
                }
            }
            (m, mx * p2[i][0] + my * p2[i][1], ed)
        })
        .collect();
    let mut mu = Vec::with_capacity(per.len());
    let mut moment_term = 0.0;
    let mut edges = Vec::new();
    for (m, t, ed) in per {
        mu.push(m);
        moment_term += t;
        edges.extend(ed);
    }
    Eval { mu, moment_term, edges, sides: Vec::new() }
}

/// Exact cell masses `μ_j = ∫_{Lag_j} ρ` for the max-affine function with these weights.
pub fn assign_cells(weights: &[f64], sites: &[Vec<f64>], source: &SourceDensity) -> Vec<f64> {
    evaluate(source, sites, weights, false).mu
}

/// Node-level assignment: each dual cell's mass goes to the argmax at its
/// node, ties to the lowest index. Tails are ignored.
pub fn assign_nodes(weights: &[f64], sites: &[Vec<f64>], source: &SourceDensity) -> Vec<f64> {
    let nodes = source.grid.nodes();
    let owner: Vec<usize> = nodes
        .par_iter()
        .map(|x| {
            let mut best = 0;
            let mut bv = f64::NEG_INFINITY;
            for (j, (y, w)) in sites.iter().zip(weights).enumerate() {
                let v = dot(x, y) - w;
                if v > bv {
                    bv = v;
                    best = j;
                }
            }
            best
        })
        .collect();
    let mut out = vec![0.0; sites.len()];
    for (k, &j) in owner.iter().enumerate() {
        out[j] += source.masses[k];
    }
    out
}

fn phi_value(ev: &Eval, w: &[f64], t: &[f64]) -> f64 {
    ev.moment_term - w.iter().zip(&ev.mu).map(|(a, b)| a * b).sum::<f64>() + w.iter().zip(t).map(|(a, b)| a * b).sum::<f64>()
}

fn residual(mu: &[f64], t: &[f64]) -> f64 {
    mu.iter().zip(t).map(|(m, tt)| (m - tt).abs() / tt).fold(0.0, f64::max)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `L d = r` for the weighted graph Laplacian, Jacobi-preconditioned CG.
fn laplacian_solve(n: usize, edges: &[(usize, usize, f64)], r: &[f64]) -> Vec<f64> {
    let mut diag = vec![0.0; n];
    for &(i, j, h) in edges {
        diag[i] += h;
        diag[j] += h;
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, h) in edges {
            let d = h * (x[i] - x[j]);
            out[i] += d;
            out[j] -= d;
        }
    };
    let mean = r.iter().sum::<f64>() / n as f64;
    let b: Vec<f64> = r.iter().map(|v| v - mean).collect();
    let pre = |v: &[f64]| -> Vec<f64> { v.iter().zip(&diag).map(|(a, d)| if *d > 0.0 { a / d } else { 0.0 }).collect() };
    let mut x = vec![0.0; n];
    let mut res = b.clone();
    let mut z = pre(&res);
    let mut p = z.clone();
    let mut rz: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
    let bn = l2(&b);
    if bn == 0.0 {
        return x;
    }
    let mut ap = vec![0.0; n];
    for _ in 0..(20 * n).max(100) {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            res[k] -= alpha * ap[k];
        }
        if l2(&res) <= 1e-13 * bn {
            break;
        }
        z = pre(&res);
        let rz_new: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

/// Newton direction. Near a density jump the coupling is taken from the side the
/// breakpoint moves to, re-solving until the choice is consistent.
fn newton_direction(n: usize, ev: &Eval, g: &[f64]) -> Vec<f64> {
    let mut edges = ev.edges.clone();
    let mut d = laplacian_solve(n, &edges, g);
    for _ in 0..8 {
        let mut changed = false;
        for (e, &(l, r, hl, hr)) in edges.iter_mut().zip(&ev.sides) {
            if hl == hr {
                continue;
            }
            let h = match (d[r] > d[l], hl > 0.0, hr > 0.0) {
                (true, _, true) | (false, false, true) => hr,
                _ => hl,
            };
            if h != e.2 {
                e.2 = h;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        d = laplacian_solve(n, &edges, g);
    }
    d
}

fn targets(site_masses: &[f64]) -> Vec<f64> {
    let total: f64 = site_masses.iter().sum();
    site_masses.iter().map(|m| m / total).collect()
}

/// Cold start from `w_j = |y_j|²/2`.
pub fn solve_step(source: &SourceDensity, sites: &[Vec<f64>], site_masses: &[f64], opts: &SolverOptions) -> Result<(MaxAffinePotential, DualState)> {
    let w0: Vec<f64> = sites.iter().map(|y| 0.5 * dot(y, y)).collect();
    solve_step_warm(source, sites, site_masses, &w0, opts)
}

pub fn solve_step_warm(
    source: &SourceDensity,
    sites: &[Vec<f64>],
    site_masses: &[f64],
    w_init: &[f64],
    opts: &SolverOptions,
) -> Result<(MaxAffinePotential, DualState)> {
    let n = sites.len();
    if n == 0 || site_masses.len() != n || w_init.len() != n {
        return Err(Error::InvalidConfig("site data length mismatch".into()));
    }
    if sites.iter().any(|s| s.len() != source.dim()) {
        return Err(Error::GridMismatch);
    }
    let t = targets(site_masses);
    let mut w = w_init.to_vec();
    let mut ev = evaluate(source, sites, &w, true);
    if ev.mu.iter().any(|&m| !(m > 0.0)) {
        w = sites.iter().map(|y| 0.5 * dot(y, y)).collect();
        ev = evaluate(source, sites, &w, true);
        if let Some(j) = ev.mu.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::EmptyCellPersistent(j));
        }
    }
    let min_t = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_mu = ev.mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps0 = 0.5 * min_t.min(min_mu);
    let mut phi = phi_value(&ev, &w, &t);
    let mut iterations = 0;
    loop {
        let g: Vec<f64> = ev.mu.iter().zip(&t).map(|(m, tt)| m - tt).collect();
        let res = residual(&ev.mu, &t);
        if res <= opts.mass_tol || n == 1 {
            return Ok(finish(sites, site_masses, w, ev.mu, -phi, iterations, res));
        }
        if iterations >= opts.max_iters {
            return Err(Error::NoConvergence { iterations, residual: res, weights: w });
        }
        iterations += 1;
        let d = match opts.method {
            StepMethod::Newton => newton_direction(n, &ev, &g),
            StepMethod::Diagonal => {
                let mut diag = vec![0.0; n];
                for &(i, j, h) in &ev.edges {
                    diag[i] += h;
                    diag[j] += h;
                }
                g.iter().zip(&diag).map(|(a, d)| if *d > 0.0 { a / d } else { 0.0 }).collect()
            }
        };
        let gn = l2(&g);
        let mut alpha = 1.0;
        loop {
            let wn: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let en = evaluate(source, sites, &wn, true);
            let pn = phi_value(&en, &wn, &t);
            let min_new = en.mu.iter().cloned().fold(f64::INFINITY, f64::min);
            let gnew = l2(&en.mu.iter().zip(&t).map(|(m, tt)| m - tt).collect::<Vec<_>>());
            let ok_mass = min_new >= eps0;
            let ok_dual = pn <= phi + 1e-14 * (1.0 + phi.abs());
            let ok_grad = match opts.method {
                StepMethod::Newton => gnew <= (1.0 - 0.5 * alpha) * gn,
                StepMethod::Diagonal => pn <= phi - 1e-4 * alpha * g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>(),
            };
            if ok_mass && ok_dual && ok_grad {
                w = wn;
                ev = en;
                phi = pn;
                break;
            }
            alpha *= opts.damping;
            if alpha < 1e-12 {
                if !ok_mass {
                    let j = en.mu.iter().position(|&m| m < eps0).unwrap_or(0);
                    return Err(Error::EmptyCellPersistent(j));
                }
                let res = residual(&ev.mu, &t);
                if res <= 10.0 * opts.mass_tol.max(1e-13) {
                    return Ok(finish(sites, site_masses, w, ev.mu, -phi, iterations, res));
                }
                return Err(Error::NoConvergence { iterations, residual: res, weights: w });
            }
        }
    }
}

fn finish(sites: &[Vec<f64>], site_masses: &[f64], mut w: Vec<f64>, mu: Vec<f64>, dual_value: f64, iterations: usize, residual: f64) -> (MaxAffinePotential, DualState) {
    let m = w.iter().cloned().fold(f64::INFINITY, f64::min);
    w.iter_mut().for_each(|v| *v -= m);
    let phi = MaxAffinePotential { sites: sites.to_vec(), weights: w.clone(), site_masses: site_masses.to_vec(), dim: sites[0].len() };
    (phi, DualState { weights: w, cell_masses: mu, dual_value, iterations, residual })
}

/// Monotone rearrangement: cell boundaries at the source quantiles of the
/// cumulative target masses.
pub fn solve_step_1d_exact(source: &SourceDensity, sites: &[Vec<f64>], site_masses: &[f64]) -> Result<MaxAffinePotential> {
    if source.dim() != 1 {
        return Err(Error::UnsupportedDimension(source.dim()));
    }
    let n = sites.len();
    if n == 0 || site_masses.len() != n {
        return Err(Error::InvalidConfig("site data length mismatch".into()));
    }
    let t = targets(site_masses);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sites[a][0].partial_cmp(&sites[b][0]).unwrap());
    let l = source.grid.half_width;
    let total = source.total_mass();
    let mut w = vec![0.0; n];
    let mut cum = 0.0;
    for k in 0..n.saturating_sub(1) {
        cum += t[idx[k]];
        let target = cum * total;
        let (mut lo, mut hi) = (-l, l);
        while source.cdf(lo) > target {
            lo = 2.0 * lo - 1.0;
        }
        while source.cdf(hi) < target {
            hi = 2.0 * hi + 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if source.cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * (1.0 + mid.abs()) {
                break;
            }
        }
        let b = 0.5 * (lo + hi);
        let (a, c) = (idx[k], idx[k + 1]);
        w[c] = w[a] + b * (sites[c][0] - sites[a][0]);
    }
    let m = w.iter().cloned().fold(f64::INFINITY, f64::min);
    w.iter_mut().for_each(|v| *v -= m);
    MaxAffinePotential::new(sites.to_vec(), w, site_masses.to_vec())
}
