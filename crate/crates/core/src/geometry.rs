//! Planar polygons with labelled edges, convex hulls and small dense algebra.

pub type P2 = [f64; 2];

pub const BOX_LABEL: i64 = -1;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross2(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Convex polygon, counter-clockwise. `labels[i]` tags the edge `pts[i] -> pts[i+1]`.
#[derive(Clone, Debug, Default)]
pub struct Polygon {
    pub pts: Vec<P2>,
    pub labels: Vec<i64>,
}

impl Polygon {
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64, label: i64) -> Self {
        Polygon {
            pts: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            labels: vec![label; 4],
        }
    }

    pub fn from_points(pts: Vec<P2>, label: i64) -> Self {
        let n = pts.len();
        Polygon { pts, labels: vec![label; n] }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    /// Keeps `{x : a·x <= b}`; new edges get `label`.
    pub fn clip(&self, a: P2, b: f64, label: i64) -> Polygon {
        let n = self.pts.len();
        if n == 0 {
            return Polygon::default();
        }
        let d: Vec<f64> = self.pts.iter().map(|p| a[0] * p[0] + a[1] * p[1] - b).collect();
        if d.iter().all(|&v| v <= 0.0) {
            return self.clone();
        }
        if d.iter().all(|&v| v > 0.0) {
            return Polygon::default();
        }
        let mut pts = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (self.pts[i], self.pts[j]);
            let (dp, dq) = (d[i], d[j]);
            let lab = self.labels[i];
            if dp <= 0.0 {
                pts.push(p);
                labels.push(lab);
                if dq > 0.0 {
                    let t = dp / (dp - dq);
                    pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                    labels.push(label);
                }
            } else if dq <= 0.0 {
                let t = dp / (dp - dq);
                pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                labels.push(lab);
            }
        }
        if pts.len() < 3 {
            return Polygon::default();
        }
        Polygon { pts, labels }
    }

    pub fn area(&self) -> f64 {
        area_of(&self.pts)
    }

    /// (area, ∫x, ∫y)
    pub fn moments(&self) -> (f64, P2) {
        moments_of(&self.pts)
    }

    pub fn centroid(&self) -> P2 {
        let (a, m) = self.moments();
        [m[0] / a, m[1] / a]
    }
}

pub fn area_of(pts: &[P2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross2(pts[i], pts[(i + 1) % n]);
    }
    0.5 * s
}

pub fn moments_of(pts: &[P2]) -> (f64, P2) {
    let n = pts.len();
    let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let c = cross2(p, q);
        a += c;
        mx += (p[0] + q[0]) * c;
        my += (p[1] + q[1]) * c;
    }
    (0.5 * a, [mx / 6.0, my / 6.0])
}

/// Sutherland–Hodgman on a bare point list, keeping `{x : x[axis]*sign <= b}`.
pub fn clip_axis(pts: &[P2], axis: usize, sign: f64, b: f64, out: &mut Vec<P2>) {
    out.clear();
    let n = pts.len();
    if n == 0 {
        return;
    }
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let dp = sign * p[axis] - b;
        let dq = sign * q[axis] - b;
        if dp <= 0.0 {
            out.push(p);
            if dq > 0.0 {
                let t = dp / (dp - dq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        } else if dq <= 0.0 {
            let t = dp / (dp - dq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    if out.len() < 3 {
        out.clear();
    }
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull_2d(points: &[P2], tol: f64) -> Vec<P2> {
    let mut p: Vec<P2> = points.to_vec();
    p.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    p.dedup_by(|a, b| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol);
    if p.len() < 3 {
        return p;
    }
    let turn = |o: P2, a: P2, b: P2| cross2([a[0] - o[0], a[1] - o[1]], [b[0] - o[0], b[1] - o[1]]);
    let mut hull: Vec<P2> = Vec::with_capacity(2 * p.len());
    for &pt in &p {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= tol {
            hull.pop();
        }
        hull.push(pt);
    }
    let lower = hull.len() + 1;
    for &pt in p.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= tol {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    hull
}

/// Facets of the hull of a 3D point set by brute-force supporting planes.
/// Returns (unit outward normal, offset c) with facet plane `n·x = c`, plus the
/// vertex indices on each facet.
pub fn convex_hull_3d(points: &[[f64; 3]], tol: f64) -> Vec<([f64; 3], f64, Vec<usize>)> {
    let n = points.len();
    let mut facets: Vec<([f64; 3], f64, Vec<usize>)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let a = sub3(points[j], points[i]);
                let b = sub3(points[k], points[i]);
                let mut nv = cross3(a, b);
                let len = norm(&nv);
                if len <= tol {
                    continue;
                }
                nv = [nv[0] / len, nv[1] / len, nv[2] / len];
                let c = dot(&nv, &points[i]);
                let (mut above, mut below) = (false, false);
                for p in points {
                    let d = dot(&nv, p) - c;
                    if d > tol {
                        above = true;
                    } else if d < -tol {
                        below = true;
                    }
                }
                if above && below {
                    continue;
                }
                if above {
                    nv = [-nv[0], -nv[1], -nv[2]];
                }
                let c = dot(&nv, &points[i]);
                if facets.iter().any(|(m, cc, _)| dot(m, &nv) > 1.0 - 1e-9 && (cc - c).abs() <= tol) {
                    continue;
                }
                let on: Vec<usize> = (0..n).filter(|&l| (dot(&nv, &points[l]) - c).abs() <= tol).collect();
                facets.push((nv, c, on));
            }
        }
    }
    facets
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Determinant of a row-major square matrix by partial-pivot elimination.
pub fn det(m: &[f64], n: usize) -> f64 {
    let mut a = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if a[r * n + c].abs() > a[piv * n + c].abs() {
                piv = r;
            }
        }
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            d = -d;
        }
        d *= a[c * n + c];
        for r in (c + 1)..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    d
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn solve(m: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if a[r * n + c].abs() > a[piv * n + c].abs() {
                piv = r;
            }
        }
        if a[piv * n + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            x.swap(c, piv);
        }
        for r in (c + 1)..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
            x[r] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for k in (c + 1)..n {
            s -= a[c * n + k] * x[k];
        }
        x[c] = s / a[c * n + c];
    }
    Some(x)
}

pub fn inverse(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = solve(m, &e, n)?;
        for r in 0..n {
            out[r * n + c] = col[r];
        }
    }
    Some(out)
}

/// Cholesky test for positive definiteness.
pub fn is_positive_definite(m: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_diagonal() {
        let sq = Polygon::rect(-1.0, 1.0, -1.0, 1.0, BOX_LABEL);
        let half = sq.clip([1.0, 1.0], 0.0, 7);
        assert!((half.area() - 2.0).abs() < 1e-14);
        assert!(half.labels.contains(&7));
        let c = half.centroid();
        assert!((c[0] + 1.0 / 3.0).abs() < 1e-14 && (c[1] + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn clip_labels_track_edges() {
        let sq = Polygon::rect(0.0, 1.0, 0.0, 1.0, BOX_LABEL);
        let p = sq.clip([1.0, 0.0], 0.5, 3);
        let n = p.pts.len();
        let mut len3 = 0.0;
        for i in 0..n {
            if p.labels[i] == 3 {
                let (a, b) = (p.pts[i], p.pts[(i + 1) % n]);
                len3 += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            }
        }
        assert!((len3 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let h = convex_hull_2d(&pts, 1e-12);
        assert_eq!(h.len(), 4);
        assert!(area_of(&h) > 0.0);
    }

    #[test]
    fn hull_3d_cube_has_six_facets() {
        let mut pts = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let f = convex_hull_3d(&pts, 1e-12);
        assert_eq!(f.len(), 6);
        for (_, c, on) in &f {
            assert!((c - 1.0).abs() < 1e-12);
            assert_eq!(on.len(), 4);
        }
    }

    #[test]
    fn det_and_solve() {
        let m = [2.0, 1.0, 1.0, 3.0];
        assert!((det(&m, 2) - 5.0).abs() < 1e-14);
        let x = solve(&m, &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(is_positive_definite(&m, 2));
        assert!(!is_positive_definite(&[1.0, 2.0, 2.0, 1.0], 2));
    }
}
