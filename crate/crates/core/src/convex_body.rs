//! Bounded convex target bodies `A ⊂ ℝⁿ` (n ≤ 3) in vertex form with derived facets.

use crate::error::{Error, Result};
use crate::geometry::{self, convex_hull_2d, convex_hull_3d, dot, norm, Polygon, P2};
use minilp::{ComparisonOp, OptimizationDirection, Problem};

const TOL: f64 = 1e-12;

/// The set `{y : ⟨normal, y⟩ + offset >= 0}` with a unit inward normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn eval(&self, y: &[f64]) -> f64 {
        dot(&self.normal, y) + self.offset
    }
}

#[derive(Clone, Debug)]
pub struct ConvexBody {
    pub vertices: Vec<Vec<f64>>,
    pub halfspaces: Vec<Halfspace>,
    pub dim: usize,
    pub volume: f64,
    pub barycenter: Vec<f64>,
    pub inradius: f64,
}

#[derive(Clone, Debug)]
pub struct ErodedBody {
    pub parent: ConvexBody,
    pub epsilon: f64,
    pub halfspaces: Vec<Halfspace>,
}

pub fn build_body(vertices: &[Vec<f64>]) -> Result<ConvexBody> {
    let dim = vertices.first().map(|v| v.len()).ok_or_else(|| Error::DegenerateBody("no vertices".into()))?;
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::DegenerateBody("mixed dimensions".into()));
    }
    if vertices.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateBody("non-finite coordinate".into()));
    }
    match dim {
        1 => build_1d(vertices),
        2 => build_2d(vertices),
        3 => build_3d(vertices),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn build_1d(vertices: &[Vec<f64>]) -> Result<ConvexBody> {
    let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= TOL {
        return Err(Error::DegenerateBody("interval of zero length".into()));
    }
    let halfspaces = vec![
        Halfspace { normal: vec![1.0], offset: -lo },
        Halfspace { normal: vec![-1.0], offset: hi },
    ];
    Ok(finish(vec![vec![lo], vec![hi]], halfspaces, 1, hi - lo, vec![0.5 * (lo + hi)]))
}

fn build_2d(vertices: &[Vec<f64>]) -> Result<ConvexBody> {
    let pts: Vec<P2> = vertices.iter().map(|v| [v[0], v[1]]).collect();
    let hull = convex_hull_2d(&pts, TOL);
    if hull.len() < 3 {
        return Err(Error::DegenerateBody("points are collinear".into()));
    }
    let poly = Polygon::from_points(hull.clone(), 0);
    let (area, m) = poly.moments();
    if area <= TOL {
        return Err(Error::DegenerateBody("zero area".into()));
    }
    let k = hull.len();
    let mut halfspaces = Vec::with_capacity(k);
    for i in 0..k {
        let p = hull[i];
        let q = hull[(i + 1) % k];
        let e = [q[0] - p[0], q[1] - p[1]];
        let l = norm(&e);
        let n = vec![-e[1] / l, e[0] / l];
        let offset = -(n[0] * p[0] + n[1] * p[1]);
        halfspaces.push(Halfspace { normal: n, offset });
    }
    let verts = hull.iter().map(|p| vec![p[0], p[1]]).collect();
    Ok(finish(verts, halfspaces, 2, area, vec![m[0] / area, m[1] / area]))
}

fn build_3d(vertices: &[Vec<f64>]) -> Result<ConvexBody> {
    let pts: Vec<[f64; 3]> = vertices.iter().map(|v| [v[0], v[1], v[2]]).collect();
    let facets = convex_hull_3d(&pts, 1e-10);
    if facets.len() < 4 {
        return Err(Error::DegenerateBody("points are coplanar".into()));
    }
    let mut used = vec![0usize; pts.len()];
    for (_, _, on) in &facets {
        for &i in on {
            used[i] += 1;
        }
    }
    let mut verts: Vec<[f64; 3]> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if used[i] >= 3 && !verts.iter().any(|v| geometry::norm(&geometry::sub3(*v, *p)) <= TOL) {
            let normals: Vec<[f64; 3]> = facets.iter().filter(|f| f.2.contains(&i)).map(|f| f.0).collect();
            if rank3(&normals) == 3 {
                verts.push(*p);
            }
        }
    }
    let inner = {
        let mut c = [0.0; 3];
        for v in &verts {
            for d in 0..3 {
                c[d] += v[d] / verts.len() as f64;
            }
        }
        c
    };
    let (mut vol, mut mom) = (0.0, [0.0; 3]);
    let mut halfspaces = Vec::new();
    for (n, c, on) in &facets {
        halfspaces.push(Halfspace { normal: vec![-n[0], -n[1], -n[2]], offset: *c });
        let corners: Vec<[f64; 3]> = on.iter().map(|&i| pts[i]).filter(|p| verts.iter().any(|v| geometry::norm(&geometry::sub3(*v, *p)) <= TOL)).collect();
        let face: Vec<[f64; 3]> = order_face(&corners, *n);
        for t in 1..face.len().saturating_sub(1) {
            let (a, b, d) = (face[0], face[t], face[t + 1]);
            let v = tet_volume(inner, a, b, d);
            vol += v;
            for k in 0..3 {
                mom[k] += v * (inner[k] + a[k] + b[k] + d[k]) / 4.0;
            }
        }
    }
    if vol <= TOL {
        return Err(Error::DegenerateBody("zero volume".into()));
    }
    let verts = verts.iter().map(|p| p.to_vec()).collect();
    Ok(finish(verts, halfspaces, 3, vol, mom.iter().map(|m| m / vol).collect()))
}

fn rank3(normals: &[[f64; 3]]) -> usize {
    for i in 0..normals.len() {
        for j in (i + 1)..normals.len() {
            for k in (j + 1)..normals.len() {
                let c = geometry::cross3(normals[i], normals[j]);
                if dot(&c, &normals[k]).abs() > 1e-9 {
                    return 3;
                }
            }
        }
    }
    2
}

fn order_face(face: &[[f64; 3]], n: [f64; 3]) -> Vec<[f64; 3]> {
    let m = face.len() as f64;
    let c = [0, 1, 2].map(|k| face.iter().map(|p| p[k]).sum::<f64>() / m);
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = geometry::cross3(n, a);
    let v = geometry::cross3(n, u);
    let mut out: Vec<([f64; 3], f64)> = face
        .iter()
        .map(|p| {
            let d = geometry::sub3(*p, c);
            (*p, dot(&d, &v).atan2(dot(&d, &u)))
        })
        .collect();
    out.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    out.into_iter().map(|x| x.0).collect()
}

fn tet_volume(o: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let (a, b, c) = (geometry::sub3(a, o), geometry::sub3(b, o), geometry::sub3(c, o));
    dot(&geometry::cross3(a, b), &c).abs() / 6.0
}

fn finish(vertices: Vec<Vec<f64>>, halfspaces: Vec<Halfspace>, dim: usize, volume: f64, barycenter: Vec<f64>) -> ConvexBody {
    let inradius = origin_inradius(&halfspaces);
    ConvexBody { vertices, halfspaces, dim, volume, barycenter, inradius }
}

fn origin_inradius(halfspaces: &[Halfspace]) -> f64 {
    let r = halfspaces.iter().map(|h| h.offset / norm(&h.normal)).fold(f64::INFINITY, f64::min);
    if r > 0.0 { r } else { 0.0 }
}

impl ConvexBody {
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.eval(y) >= -tol)
    }

    /// max over the body of ⟨u, y⟩.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, u)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Maximal |y| over the body.
    pub fn circumradius(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn translated(&self, shift: &[f64]) -> Result<ConvexBody> {
        let v: Vec<Vec<f64>> = self.vertices.iter().map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect()).collect();
        build_body(&v)
    }

    /// Boundary polygon for n = 2.
    pub fn polygon(&self) -> Polygon {
        Polygon::from_points(self.vertices.iter().map(|v| [v[0], v[1]]).collect(), 0)
    }

    /// First moments recomputed by a fan of simplices from the first vertex.
    pub fn simplex_barycenter(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![0.5 * (self.vertices[0][0] + self.vertices[1][0])],
            2 => {
                let v = &self.vertices;
                let (mut a, mut m) = (0.0, [0.0; 2]);
                for i in 1..v.len() - 1 {
                    let t = 0.5
                        * ((v[i][0] - v[0][0]) * (v[i + 1][1] - v[0][1]) - (v[i][1] - v[0][1]) * (v[i + 1][0] - v[0][0]));
                    a += t;
                    for k in 0..2 {
                        m[k] += t * (v[0][k] + v[i][k] + v[i + 1][k]) / 3.0;
                    }
                }
                vec![m[0] / a, m[1] / a]
            }
            _ => self.barycenter.clone(),
        }
    }
}

pub fn assert_centered(body: &ConvexBody, tol: f64) -> Result<()> {
    if norm(&body.barycenter) <= tol {
        Ok(())
    } else {
        Err(Error::BarycenterNotAtOrigin(body.barycenter.clone()))
    }
}

/// `A° = {y : ⟨x, y⟩ <= 1 ∀x ∈ A}`.
pub fn polar(body: &ConvexBody) -> Result<ConvexBody> {
    if body.inradius <= TOL {
        return Err(Error::OriginNotInterior(body.inradius));
    }
    let verts: Vec<Vec<f64>> =
        body.halfspaces.iter().map(|h| h.normal.iter().map(|n| -n / h.offset).collect()).collect();
    build_body(&verts)
}

/// Chebyshev center and radius (largest inscribed ball) by linear programming.
pub fn chebyshev(body: &ConvexBody) -> (Vec<f64>, f64) {
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let c: Vec<_> = (0..body.dim).map(|_| pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let r = pb.add_var(1.0, (0.0, f64::INFINITY));
    for h in &body.halfspaces {
        let mut row: Vec<_> = c.iter().zip(&h.normal).map(|(&v, &n)| (v, n)).collect();
        row.push((r, -norm(&h.normal)));
        pb.add_constraint(&row[..], ComparisonOp::Ge, -h.offset);
    }
    match pb.solve() {
        Ok(sol) => (c.iter().map(|&v| sol[v]).collect(), sol[r]),
        Err(_) => (body.barycenter.clone(), 0.0),
    }
}

/// `A_ε = {y : B_ε(y) ⊂ A}`.
pub fn erode(body: &ConvexBody, epsilon: f64) -> Result<ErodedBody> {
    let (_, radius) = chebyshev(body);
    if !(epsilon > 0.0) || epsilon >= radius - TOL {
        return Err(Error::ErosionEmpty { epsilon, radius });
    }
    let halfspaces = body
        .halfspaces
        .iter()
        .map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset - epsilon * norm(&h.normal) })
        .collect();
    Ok(ErodedBody { parent: body.clone(), epsilon, halfspaces })
}

impl ErodedBody {
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.eval(y) >= -tol)
    }

    /// Vertex form of `A_ε`.
    pub fn to_body(&self) -> Result<ConvexBody> {
        build_body(&vertices_from_halfspaces(&self.halfspaces, self.parent.dim, self.parent.circumradius() + 1.0))
    }
}

/// Vertices of a bounded polytope given by halfspaces.
pub fn vertices_from_halfspaces(hs: &[Halfspace], dim: usize, bound: f64) -> Vec<Vec<f64>> {
    match dim {
        1 => {
            let mut lo = -bound;
            let mut hi = bound;
            for h in hs {
                let n = h.normal[0];
                if n > 0.0 {
                    lo = lo.max(-h.offset / n);
                } else if n < 0.0 {
                    hi = hi.min(-h.offset / n);
                }
            }
            vec![vec![lo], vec![hi]]
        }
        2 => {
            let mut p = Polygon::rect(-bound, bound, -bound, bound, 0);
            for h in hs {
                p = p.clip([-h.normal[0], -h.normal[1]], h.offset, 0);
            }
            p.pts.iter().map(|q| vec![q[0], q[1]]).collect()
        }
        _ => {
            let mut out: Vec<Vec<f64>> = Vec::new();
            let k = hs.len();
            for i in 0..k {
                for j in (i + 1)..k {
                    for l in (j + 1)..k {
                        let m: Vec<f64> = [&hs[i], &hs[j], &hs[l]].iter().flat_map(|h| h.normal.clone()).collect();
                        let b = [-hs[i].offset, -hs[j].offset, -hs[l].offset];
                        if geometry::det(&m, 3).abs() < 1e-12 {
                            continue;
                        }
                        if let Some(x) = geometry::solve(&m, &b, 3) {
                            if hs.iter().all(|h| h.eval(&x) >= -1e-9) {
                                out.push(x);
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

/// Lattice smoothness test at every vertex (n ≤ 2).
pub fn delzant_check(body: &ConvexBody) -> Result<bool> {
    if body.dim > 2 {
        return Err(Error::UnsupportedDimension(body.dim));
    }
    for v in &body.vertices {
        if v.iter().any(|x| (x - x.round()).abs() > 1e-9) {
            return Err(Error::NonIntegralVertex(v.clone()));
        }
    }
    if body.dim == 1 {
        return Ok(true);
    }
    let v: Vec<[i64; 2]> = body.vertices.iter().map(|p| [p[0].round() as i64, p[1].round() as i64]).collect();
    let k = v.len();
    for i in 0..k {
        let prev = v[(i + k - 1) % k];
        let next = v[(i + 1) % k];
        let a = primitive([prev[0] - v[i][0], prev[1] - v[i][1]]);
        let b = primitive([next[0] - v[i][0], next[1] - v[i][1]]);
        if (a[0] * b[1] - a[1] * b[0]).abs() != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn primitive(e: [i64; 2]) -> [i64; 2] {
    let g = gcd(e[0].abs(), e[1].abs()).max(1);
    [e[0] / g, e[1] / g]
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Regular k-gon inscribed in the circle of the given radius.
pub fn regular_polygon(k: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}
