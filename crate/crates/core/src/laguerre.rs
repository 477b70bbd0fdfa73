//! Laguerre cells of a max-affine function `max_j(⟨x, y_j⟩ − w_j)`.
//!
//! One dimension uses the upper envelope of lines; two dimensions clip the
//! truncation box by the pairwise halfplanes and rasterize the resulting
//! polygons onto the dual cells of the evaluation grid.

use crate::geometry::{clip_axis, cross2, Polygon, BOX_LABEL, P2};
use rayon::prelude::*;

/// Upper envelope of the lines `x ↦ y_j x − w_j`.
#[derive(Clone, Debug)]
pub struct Envelope1d {
    /// Active sites from left to right (increasing slope).
    pub order: Vec<usize>,
    /// `breaks[i]` separates `order[i]` and `order[i+1]`.
    pub breaks: Vec<f64>,
}

impl Envelope1d {
    pub fn new(sites: &[f64], weights: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..sites.len()).collect();
        idx.sort_by(|&a, &b| {
            sites[a]
                .partial_cmp(&sites[b])
                .unwrap()
                .then(weights[a].partial_cmp(&weights[b]).unwrap())
                .then(a.cmp(&b))
        });
        let mut order: Vec<usize> = Vec::with_capacity(idx.len());
        let cross = |a: usize, b: usize| (weights[b] - weights[a]) / (sites[b] - sites[a]);
        for &j in &idx {
            if let Some(&last) = order.last() {
                if sites[last] == sites[j] {
                    continue;
                }
            }
            while order.len() >= 2 {
                let a = order[order.len() - 2];
                let b = order[order.len() - 1];
                if cross(a, j) <= cross(a, b) {
                    order.pop();
                } else {
                    break;
                }
            }
            order.push(j);
        }
        let breaks = order.windows(2).map(|p| cross(p[0], p[1])).collect();
        Envelope1d { order, breaks }
    }

    /// Position in `order` of the piece active at x.
    pub fn locate(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b < x)
    }

    /// Interval of the i-th active piece.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { f64::NEG_INFINITY } else { self.breaks[i - 1] };
        let hi = if i + 1 == self.order.len() { f64::INFINITY } else { self.breaks[i] };
        (lo, hi)
    }

    pub fn active_mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &j in &self.order {
            m[j] = true;
        }
        m
    }

    /// Linear pieces (x0, x1, α, β) of the envelope restricted to `[a, b]`.
    pub fn pieces(&self, sites: &[f64], weights: &[f64], a: f64, b: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        let mut i = self.locate(a);
        let mut x = a;
        loop {
            let (_, hi) = self.cell(i);
            let end = hi.min(b);
            let j = self.order[i];
            if end > x {
                out.push((x, end, -weights[j], sites[j]));
            }
            if hi >= b {
                break;
            }
            x = end;
            i += 1;
        }
        out
    }
}

/// Laguerre cells inside `[−L, L]²`; edge labels name the neighbouring site
/// (or [`BOX_LABEL`] on the box boundary).
pub fn cells_2d(sites: &[P2], weights: &[f64], half_width: f64) -> Vec<Polygon> {
    let base = Polygon::rect(-half_width, half_width, -half_width, half_width, BOX_LABEL);
    (0..sites.len()).into_par_iter().map(|i| cell_2d(&base, sites, weights, i)).collect()
}

pub fn cell_2d(base: &Polygon, sites: &[P2], weights: &[f64], i: usize) -> Polygon {
    let mut poly = base.clone();
    let yi = sites[i];
    for (j, yj) in sites.iter().enumerate() {
        if j == i {
            continue;
        }
        let a = [yj[0] - yi[0], yj[1] - yi[1]];
        if a[0] == 0.0 && a[1] == 0.0 {
            if weights[j] < weights[i] || (weights[j] == weights[i] && j < i) {
                return Polygon::default();
            }
            continue;
        }
        let b = weights[j] - weights[i];
        if poly.pts.iter().all(|p| a[0] * p[0] + a[1] * p[1] <= b) {
            continue;
        }
        poly = poly.clip(a, b, j as i64);
        if poly.is_empty() {
            return poly;
        }
    }
    poly
}

/// Intersection of a polygon with one dual cell.
#[derive(Clone, Copy, Debug)]
pub struct RasterPiece {
    pub cell: usize,
    pub area: f64,
    pub moment: P2,
}

/// Index of the interval `[edges[k], edges[k+1]]` containing x (clamped).
#[inline]
pub fn axis_cell(edges: &[f64], x: f64) -> usize {
    let m = edges.len() - 1;
    let k = edges.partition_point(|&e| e <= x);
    k.saturating_sub(1).min(m - 1)
}

/// Splits a convex polygon by the tensor dual-cell grid given by `edges` on both axes.
pub fn raster(poly: &[P2], edges: &[f64], out: &mut Vec<RasterPiece>) {
    out.clear();
    if poly.len() < 3 {
        return;
    }
    let m = edges.len() - 1;
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
    }
    let c0 = axis_cell(edges, xmin);
    let c1 = axis_cell(edges, xmax);
    let mut rest: Vec<P2> = poly.to_vec();
    let mut col = Vec::with_capacity(poly.len() + 4);
    let mut tmp = Vec::with_capacity(poly.len() + 4);
    let mut piece = Vec::with_capacity(poly.len() + 4);
    for c in c0..=c1 {
        if c < c1 {
            clip_axis(&rest, 0, 1.0, edges[c + 1], &mut col);
            clip_axis(&rest, 0, -1.0, -edges[c + 1], &mut tmp);
            std::mem::swap(&mut rest, &mut tmp);
        } else {
            col.clear();
            col.extend_from_slice(&rest);
        }
        if col.len() < 3 {
            if rest.len() < 3 {
                break;
            }
            continue;
        }
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &col {
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let r0 = axis_cell(edges, ymin);
        let r1 = axis_cell(edges, ymax);
        let mut crest = col.clone();
        for r in r0..=r1 {
            if r < r1 {
                clip_axis(&crest, 1, 1.0, edges[r + 1], &mut piece);
                clip_axis(&crest, 1, -1.0, -edges[r + 1], &mut tmp);
                std::mem::swap(&mut crest, &mut tmp);
            } else {
                piece.clear();
                piece.extend_from_slice(&crest);
            }
            if piece.len() >= 3 {
                let (a, mo) = crate::geometry::moments_of(&piece);
                if a > 0.0 {
                    out.push(RasterPiece { cell: c + m * r, area: a, moment: mo });
                }
            }
            if crest.len() < 3 {
                break;
            }
        }
    }
}

/// ∫ of the piecewise-constant grid density along the segment p→q.
pub fn segment_integral(p: P2, q: P2, edges: &[f64], density: &[f64]) -> f64 {
    let m = edges.len() - 1;
    let d = [q[0] - p[0], q[1] - p[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let mut ts: Vec<f64> = vec![0.0, 1.0];
    for axis in 0..2 {
        if d[axis] != 0.0 {
            let lo = p[axis].min(q[axis]);
            let hi = p[axis].max(q[axis]);
            let k0 = edges.partition_point(|&e| e <= lo);
            let k1 = edges.partition_point(|&e| e < hi);
            for e in &edges[k0..k1] {
                let t = (e - p[axis]) / d[axis];
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut s = 0.0;
    for w in ts.windows(2) {
        let dt = w[1] - w[0];
        if dt <= 0.0 {
            continue;
        }
        let t = 0.5 * (w[0] + w[1]);
        let x = p[0] + t * d[0];
        let y = p[1] + t * d[1];
        if x < edges[0] || x > edges[m] || y < edges[0] || y > edges[m] {
            continue;
        }
        s += density[axis_cell(edges, x) + m * axis_cell(edges, y)] * dt;
    }
    s * len
}

/// Signed area test used by callers that need orientation.
pub fn orientation(a: P2, b: P2, c: P2) -> f64 {
    cross2([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_abs() {
        let e = Envelope1d::new(&[-0.5, 0.5], &[0.0, 0.0]);
        assert_eq!(e.order, vec![0, 1]);
        assert_eq!(e.breaks, vec![0.0]);
        let e = Envelope1d::new(&[-0.5, 0.5], &[0.0, 0.5]);
        assert_eq!(e.breaks, vec![0.5]);
    }

    #[test]
    fn envelope_drops_dominated_lines() {
        let e = Envelope1d::new(&[-1.0, 0.0, 1.0], &[0.0, 10.0, 0.0]);
        assert_eq!(e.order, vec![0, 2]);
        assert_eq!(e.active_mask(3), vec![true, false, true]);
        let e = Envelope1d::new(&[0.3, -1.0, 0.3], &[1.0, 0.0, 0.5]);
        assert_eq!(e.order, vec![1, 2]);
    }

    #[test]
    fn envelope_pieces_cover_interval() {
        let e = Envelope1d::new(&[-1.0, 0.0, 1.0], &[0.0, -0.5, 0.0]);
        let p = e.pieces(&[-1.0, 0.0, 1.0], &[0.0, -0.5, 0.0], -2.0, 2.0);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0].0, -2.0);
        assert_eq!(p[2].1, 2.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn cells_partition_box() {
        let sites = [[-0.5, -0.5], [0.5, -0.5], [0.0, 0.6], [0.1, 0.0]];
        let w = [0.1, -0.2, 0.3, 0.0];
        let cells = cells_2d(&sites, &w, 3.0);
        let total: f64 = cells.iter().map(|c| c.area()).sum();
        assert!((total - 36.0).abs() < 1e-10);
        for (i, c) in cells.iter().enumerate() {
            if c.is_empty() {
                continue;
            }
            let x = c.centroid();
            let best = (0..4)
                .max_by(|&a, &b| {
                    let fa = x[0] * sites[a][0] + x[1] * sites[a][1] - w[a];
                    let fb = x[0] * sites[b][0] + x[1] * sites[b][1] - w[b];
                    fa.partial_cmp(&fb).unwrap()
                })
                .unwrap();
            assert_eq!(best, i);
        }
    }

    #[test]
    fn raster_sums_to_area() {
        let edges: Vec<f64> = (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect();
        let poly = vec![[-1.3, -0.7], [1.1, -1.6], [1.7, 0.9], [-0.4, 1.8]];
        let mut out = Vec::new();
        raster(&poly, &edges, &mut out);
        let a: f64 = out.iter().map(|p| p.area).sum();
        let (area, mo) = crate::geometry::moments_of(&poly);
        assert!((a - area).abs() < 1e-12);
        let mx: f64 = out.iter().map(|p| p.moment[0]).sum();
        assert!((mx - mo[0]).abs() < 1e-12);
    }

    #[test]
    fn segment_integral_uniform() {
        let edges: Vec<f64> = (0..=4).map(|i| -1.0 + 0.5 * i as f64).collect();
        let dens = vec![2.0; 16];
        let s = segment_integral([-0.9, -0.8], [0.7, 0.4], &edges, &dens);
        assert!((s - 2.0 * 2.0).abs() < 1e-12);
    }
}
