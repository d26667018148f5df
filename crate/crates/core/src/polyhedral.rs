//! Finitely generated convex cones and bounded polytopes in low dimension.

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{columns, null_space};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no generators")]
    Empty,
    #[error("generators are not contained in an open half-space")]
    NotPointed,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// A closed pointed convex cone `{x : nᵢ·x ≥ 0, eⱼ·x = 0}` together with
/// its extreme rays.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCone {
    dim: usize,
    rays: Vec<DVector<f64>>,
    normals: Vec<DVector<f64>>,
    equalities: Vec<DVector<f64>>,
}

fn cross2(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-300);
    let eps = 1e-12 * scale * scale;
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn orient(n: DVector<f64>, inside: &DVector<f64>) -> DVector<f64> {
    let n = n.normalize();
    if n.dot(inside) < 0.0 {
        -n
    } else {
        n
    }
}

/// Inward normal of the facet spanned by `rays` (all in `R^r`, `r − 1` of them).
fn facet_normal(rays: &[&DVector<f64>], inside: &DVector<f64>) -> Option<DVector<f64>> {
    let r = inside.len();
    let m = DMatrix::from_fn(rays.len(), r, |i, j| rays[i][j]);
    let ns = null_space(&m, 1e-10);
    (ns.ncols() == 1).then(|| orient(ns.column(0).into_owned(), inside))
}

impl PolyCone {
    /// Conic hull of `points`, which must lie in an open half-space.
    pub fn from_generators(points: &[DVector<f64>]) -> Result<Self, GeometryError> {
        let dim = points.first().ok_or(GeometryError::Empty)?.len();
        let units: Vec<DVector<f64>> = points
            .iter()
            .filter(|p| p.len() == dim && p.norm() > 0.0 && p.iter().all(|x| x.is_finite()))
            .map(|p| p.normalize())
            .collect();
        if units.len() != points.len() {
            return Err(GeometryError::Invalid(
                "generators must be finite, nonzero and of one dimension".into(),
            ));
        }
        let mean = units.iter().fold(DVector::zeros(dim), |a, p| a + p);
        if mean.norm() < 1e-12 {
            return Err(GeometryError::NotPointed);
        }
        let center = mean.normalize();
        if units.iter().any(|p| p.dot(&center) <= 1e-9) {
            return Err(GeometryError::NotPointed);
        }

        // Span of the generators and its orthogonal complement.
        let gram = units
            .iter()
            .fold(DMatrix::zeros(dim, dim), |a, p| a + p * p.transpose());
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.max();
        let span: Vec<DVector<f64>> = (0..dim)
            .filter(|&i| eig.eigenvalues[i] > 1e-12 * top)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let u = columns(&span, dim);
        let r = span.len();
        let equalities: Vec<DVector<f64>> = {
            let comp = null_space(&u.transpose(), 1e-9);
            (0..comp.ncols()).map(|j| comp.column(j).into_owned()).collect()
        };
        let c_r = (u.transpose() * &center).normalize();

        if r == 1 {
            let ray = (&u * &c_r).normalize();
            return Ok(Self {
                dim,
                normals: vec![ray.clone()],
                rays: vec![ray],
                equalities,
            });
        }

        let local: Vec<DVector<f64>> = units.iter().map(|p| u.transpose() * p).collect();
        let basis = null_space(&DMatrix::from_row_slice(1, r, c_r.as_slice()), 1e-12);
        let slice = |y: &DVector<f64>| -> DVector<f64> { basis.transpose() * y / c_r.dot(y) };
        let lift = |s: &DVector<f64>| -> DVector<f64> { (&c_r + &basis * s).normalize() };

        let (vertex_rays, facets): (Vec<DVector<f64>>, Vec<Vec<usize>>) = match r {
            2 => {
                let ss: Vec<f64> = local.iter().map(|y| slice(y)[0]).collect();
                let lo = ss.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let rays = vec![
                    lift(&DVector::from_element(1, lo)),
                    lift(&DVector::from_element(1, hi)),
                ];
                (rays, vec![vec![0], vec![1]])
            }
            3 => {
                let pts: Vec<[f64; 2]> = local
                    .iter()
                    .map(|y| {
                        let s = slice(y);
                        [s[0], s[1]]
                    })
                    .collect();
                let hull = convex_hull_2d(&pts);
                if hull.len() < 3 {
                    return Err(GeometryError::Invalid("degenerate planar hull".into()));
                }
                let rays: Vec<DVector<f64>> = hull
                    .iter()
                    .map(|p| lift(&DVector::from_column_slice(p)))
                    .collect();
                let m = rays.len();
                (rays, (0..m).map(|i| vec![i, (i + 1) % m]).collect())
            }
            _ => brute_force_hull(&local, &c_r)?,
        };

        let normals = facets
            .iter()
            .map(|f| {
                let rs: Vec<&DVector<f64>> = f.iter().map(|&i| &vertex_rays[i]).collect();
                let n = if r == 2 {
                    // Perpendicular to the single ray, inside the plane.
                    let y = rs[0];
                    let perp = DVector::from_vec(vec![-y[1], y[0]]);
                    Some(orient(perp, &c_r))
                } else {
                    facet_normal(&rs, &c_r)
                };
                n.map(|n| (&u * n).normalize())
                    .ok_or_else(|| GeometryError::Invalid("degenerate facet".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rays = vertex_rays.iter().map(|y| (&u * y).normalize()).collect();
        Ok(Self {
            dim,
            rays,
            normals,
            equalities,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unit extreme rays.
    pub fn rays(&self) -> &[DVector<f64>] {
        &self.rays
    }

    /// Unit inward facet normals.
    pub fn normals(&self) -> &[DVector<f64>] {
        &self.normals
    }

    pub fn equalities(&self) -> &[DVector<f64>] {
        &self.equalities
    }

    /// Dimension of the linear span.
    pub fn span_dim(&self) -> usize {
        self.dim - self.equalities.len()
    }

    /// Signed angular distance proxy: `min nᵢ·x̂`, reduced by any violation
    /// of the equalities; nonnegative iff `x` lies in the cone.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        let ineq = self
            .normals
            .iter()
            .map(|a| a.dot(x) / n)
            .fold(f64::INFINITY, f64::min);
        let eq = self
            .equalities
            .iter()
            .map(|e| e.dot(x).abs() / n)
            .fold(0.0f64, f64::max);
        if self.equalities.is_empty() {
            ineq
        } else {
            ineq.min(-eq)
        }
    }

    /// Raw signed margin without the equalities (for full-dimensional cones).
    pub fn facet_margin(&self, x: &DVector<f64>) -> f64 {
        self.normals
            .iter()
            .map(|a| a.dot(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let n = x.norm();
        n == 0.0
            || (self.normals.iter().all(|a| a.dot(x) >= -tol * n)
                && self.equalities.iter().all(|e| e.dot(x).abs() <= tol * n))
    }

    /// Unit sum of the unit extreme rays.
    pub fn center(&self) -> DVector<f64> {
        self.rays
            .iter()
            .fold(DVector::zeros(self.dim), |a, r| a + r)
            .normalize()
    }

    /// Slice coordinates `x / ⟨x, c⟩` of the rays on the affine plane
    /// `⟨x, c⟩ = 1` through the center `c`.
    pub fn slice_points(&self) -> Vec<DVector<f64>> {
        let c = self.center();
        self.rays.iter().map(|r| r / r.dot(&c)).collect()
    }

    /// Scales the transversal slice about its vertex centroid by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<PolyCone, GeometryError> {
        let pts = self.slice_points();
        let centroid = pts.iter().fold(DVector::zeros(self.dim), |a, p| a + p) / pts.len() as f64;
        let moved: Vec<DVector<f64>> = pts
            .iter()
            .map(|p| &centroid + (p - &centroid) * factor)
            .collect();
        PolyCone::from_generators(&moved)
    }
}

fn brute_force_hull(
    local: &[DVector<f64>],
    c_r: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, Vec<Vec<usize>>), GeometryError> {
    let r = c_r.len();
    let mut pts: Vec<DVector<f64>> = Vec::new();
    for p in local {
        if !pts.iter().any(|q| (q - p).norm() < 1e-12) {
            pts.push(p.clone());
        }
    }
    if pts.len() > 48 {
        return Err(GeometryError::Unsupported(format!(
            "hull of {} generators in dimension {r}",
            pts.len()
        )));
    }
    let n = pts.len();
    let mut facets: Vec<(DVector<f64>, Vec<usize>)> = Vec::new();
    let mut idx: Vec<usize> = (0..r - 1).collect();
    loop {
        let rs: Vec<&DVector<f64>> = idx.iter().map(|&i| &pts[i]).collect();
        if let Some(nrm) = facet_normal(&rs, c_r) {
            let vals: Vec<f64> = pts.iter().map(|p| nrm.dot(p)).collect();
            if vals.iter().all(|&v| v >= -1e-10)
                && !facets.iter().any(|(m, _)| (m - &nrm).norm() < 1e-9)
            {
                let on: Vec<usize> = (0..n).filter(|&i| vals[i].abs() <= 1e-10).collect();
                facets.push((nrm, on));
            }
        }
        // Next combination.
        let mut k = r - 1;
        loop {
            if k == 0 {
                return finish_brute(pts, facets, r);
            }
            k -= 1;
            if idx[k] < n - (r - 1 - k) {
                idx[k] += 1;
                for j in k + 1..r - 1 {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
        if idx[r - 2] >= n {
            return finish_brute(pts, facets, r);
        }
    }
}

fn finish_brute(
    pts: Vec<DVector<f64>>,
    facets: Vec<(DVector<f64>, Vec<usize>)>,
    r: usize,
) -> Result<(Vec<DVector<f64>>, Vec<Vec<usize>>), GeometryError> {
    let n = pts.len();
    let extreme: Vec<usize> = (0..n)
        .filter(|&i| facets.iter().filter(|(_, on)| on.contains(&i)).count() >= r - 1)
        .collect();
    let remap = |i: usize| extreme.iter().position(|&e| e == i);
    let rays: Vec<DVector<f64>> = extreme.iter().map(|&i| pts[i].normalize()).collect();
    let facet_sets = facets
        .iter()
        .map(|(_, on)| {
            on.iter()
                .filter_map(|&i| remap(i))
                .take(r - 1)
                .collect::<Vec<_>>()
        })
        .filter(|f| f.len() == r - 1)
        .collect();
    Ok((rays, facet_sets))
}

/// Bounded polytope `{x : aᵢ·x ≤ bᵢ}` with its vertex list.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    dim: usize,
    rows: Vec<DVector<f64>>,
    rhs: Vec<f64>,
    vertices: Vec<DVector<f64>>,
}

impl Polytope {
    /// The single point of `R⁰`.
    pub fn point() -> Self {
        Self {
            dim: 0,
            rows: Vec::new(),
            rhs: Vec::new(),
            vertices: vec![DVector::zeros(0)],
        }
    }

    /// Builds the polytope from half-spaces; the set must be bounded.
    pub fn from_halfspaces(
        dim: usize,
        rows: Vec<DVector<f64>>,
        rhs: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        if dim == 0 {
            if rhs.iter().any(|&b| b < -1e-12) {
                return Err(GeometryError::Empty);
            }
            return Ok(Self::point());
        }
        if rows.len() != rhs.len() || rows.iter().any(|r| r.len() != dim) {
            return Err(GeometryError::Invalid("malformed half-spaces".into()));
        }
        let scale = rhs.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        let tol = 1e-10 * scale;
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        let m = rows.len();
        let mut idx: Vec<usize> = (0..dim).collect();
        if m >= dim {
            'outer: loop {
                let a = DMatrix::from_fn(dim, dim, |i, j| rows[idx[i]][j]);
                let b = DVector::from_fn(dim, |i, _| rhs[idx[i]]);
                if let Some(x) = a.lu().solve(&b) {
                    if x.iter().all(|v| v.is_finite())
                        && rows.iter().zip(&rhs).all(|(r, &c)| r.dot(&x) <= c + tol)
                        && !vertices.iter().any(|v| (v - &x).norm() <= 1e-9 * scale)
                    {
                        vertices.push(x);
                    }
                }
                let mut k = dim;
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    if idx[k] < m - (dim - k) {
                        idx[k] += 1;
                        for j in k + 1..dim {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
        if vertices.is_empty() {
            return Err(GeometryError::Empty);
        }
        if dim == 2 {
            let c = vertices.iter().fold(DVector::zeros(2), |a, v| a + v) / vertices.len() as f64;
            vertices.sort_by(|p, q| {
                let ap = (p[1] - c[1]).atan2(p[0] - c[0]);
                let aq = (q[1] - c[1]).atan2(q[0] - c[0]);
                ap.total_cmp(&aq)
            });
        } else if dim == 1 {
            vertices.sort_by(|p, q| p[0].total_cmp(&q[0]));
        }
        Ok(Self {
            dim,
            rows,
            rhs,
            vertices,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> impl Iterator<Item = (&DVector<f64>, f64)> {
        self.rows.iter().zip(self.rhs.iter().copied())
    }

    /// `min_i (bᵢ − aᵢ·x)/‖aᵢ‖`; nonnegative exactly on the polytope.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, &b)| (b - a.dot(x)) / a.norm().max(1e-300))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.margin(x) >= -tol
    }

    pub fn centroid(&self) -> DVector<f64> {
        self.vertices
            .iter()
            .fold(DVector::zeros(self.dim), |a, v| a + v)
            / self.vertices.len() as f64
    }

    /// Lebesgue measure (counting measure in dimension 0).
    pub fn volume(&self) -> f64 {
        match self.dim {
            0 => 1.0,
            1 => self.vertices[self.vertices.len() - 1][0] - self.vertices[0][0],
            2 => {
                let n = self.vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let (p, q) = (&self.vertices[i], &self.vertices[(i + 1) % n]);
                        p[0] * q[1] - p[1] * q[0]
                    })
                    .sum::<f64>()
                    .abs()
            }
            _ => self.quadrature(8).map(|n| n.iter().map(|(_, w)| w).sum()).unwrap_or(f64::NAN),
        }
    }

    /// Adds half-spaces, returning `None` when the result is empty or has
    /// no interior.
    pub fn intersect(&self, rows: &[DVector<f64>], rhs: &[f64]) -> Option<Polytope> {
        let mut all_rows = self.rows.clone();
        let mut all_rhs = self.rhs.clone();
        all_rows.extend(rows.iter().cloned());
        all_rhs.extend(rhs.iter().copied());
        let p = Polytope::from_halfspaces(self.dim, all_rows, all_rhs).ok()?;
        (self.dim == 0 || p.volume() > 1e-14 * self.volume().max(1e-300)).then_some(p)
    }

    /// Gauss–Legendre product nodes `(point, weight)` with `order` points per
    /// direction; triangles are mapped from the square by the Duffy collapse.
    pub fn quadrature(&self, order: usize) -> Result<Vec<(DVector<f64>, f64)>, GeometryError> {
        let rule = GaussLegendre::new(order.max(2))
            .map_err(|e| GeometryError::Invalid(format!("quadrature rule: {e}")))?;
        let nodes = rule.as_node_weight_pairs();
        match self.dim {
            0 => Ok(vec![(DVector::zeros(0), 1.0)]),
            1 => {
                let (a, b) = (self.vertices[0][0], self.vertices[self.vertices.len() - 1][0]);
                let half = 0.5 * (b - a);
                Ok(nodes
                    .iter()
                    .map(|&(x, w)| (DVector::from_element(1, a + half * (x + 1.0)), w * half))
                    .collect())
            }
            2 => {
                let v = &self.vertices;
                let mut out = Vec::with_capacity(nodes.len() * nodes.len() * v.len());
                for i in 1..v.len() - 1 {
                    let (p0, p1, p2) = (&v[0], &v[i], &v[i + 1]);
                    let e1 = p1 - p0;
                    let e2 = p2 - p0;
                    let area2 = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
                    for &(x, wx) in nodes {
                        let s = 0.5 * (x + 1.0);
                        for &(y, wy) in nodes {
                            let t = 0.5 * (y + 1.0);
                            // (s, t) ∈ [0,1]² ↦ (s, (1−s)t) in the unit triangle.
                            let a = s;
                            let b = (1.0 - s) * t;
                            let pt = p0 + &e1 * a + &e2 * b;
                            out.push((pt, 0.25 * wx * wy * (1.0 - s) * area2));
                        }
                    }
                }
                Ok(out)
            }
            d => Err(GeometryError::Unsupported(format!(
                "quadrature over a {d}-dimensional polytope"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn planar_cone() {
        let c = PolyCone::from_generators(&[v(&[1.0, 0.2]), v(&[1.0, 1.0]), v(&[0.3, 1.0])]).unwrap();
        assert_eq!(c.rays().len(), 2);
        assert!(c.contains(&v(&[1.0, 1.0]), 0.0));
        assert!(!c.contains(&v(&[1.0, 0.0]), 1e-9));
        let d = c.dilated(1.05).unwrap();
        assert!(d.facet_margin(&v(&[1.0, 0.2]).normalize()) > 0.0);
    }

    #[test]
    fn spatial_cone_and_ray() {
        let gens = [
            v(&[1.0, 0.0, 0.0]),
            v(&[0.0, 1.0, 0.0]),
            v(&[0.0, 0.0, 1.0]),
            v(&[1.0, 1.0, 1.0]),
        ];
        let c = PolyCone::from_generators(&gens).unwrap();
        assert_eq!(c.rays().len(), 3);
        assert_eq!(c.normals().len(), 3);
        assert!(c.contains(&v(&[0.2, 0.3, 0.5]), 0.0));
        assert!(!c.contains(&v(&[-0.1, 0.3, 0.5]), 1e-9));
        let ray = PolyCone::from_generators(&[v(&[1.0, -1.0]), v(&[2.0, -2.0])]).unwrap();
        assert_eq!(ray.rays().len(), 1);
        assert!(ray.contains(&v(&[3.0, -3.0]), 1e-12));
        assert!(!ray.contains(&v(&[3.0, -2.0]), 1e-6));
    }

    #[test]
    fn four_dimensional_orthant() {
        let gens: Vec<DVector<f64>> = (0..4)
            .map(|i| DVector::from_fn(4, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        let c = PolyCone::from_generators(&gens).unwrap();
        assert_eq!(c.rays().len(), 4);
        assert_eq!(c.normals().len(), 4);
        assert!(c.contains(&v(&[0.1, 0.2, 0.3, 0.4]), 0.0));
    }

    #[test]
    fn not_pointed() {
        assert_eq!(
            PolyCone::from_generators(&[v(&[1.0, 0.0]), v(&[-1.0, 0.0])]),
            Err(GeometryError::NotPointed)
        );
    }

    #[test]
    fn polytope_volume_and_quadrature() {
        let sq = Polytope::from_halfspaces(
            2,
            vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, -1.0]), v(&[1.0, 1.0])],
            vec![1.0, 0.0, 1.0, 0.0, 1.5],
        )
        .unwrap();
        assert!((sq.volume() - 0.875).abs() < 1e-12);
        let nodes = sq.quadrature(8).unwrap();
        let area: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((area - 0.875).abs() < 1e-12);
        let mx: f64 = nodes.iter().map(|(p, w)| p[0] * w).sum();
        // ∫ x over the unit square minus the corner triangle.
        let exact = 0.5 - (0.5 * 0.5 * 0.5) * (1.0 - 0.5 / 3.0);
        assert!((mx - exact).abs() < 1e-12);
        let seg = Polytope::from_halfspaces(1, vec![v(&[1.0]), v(&[-1.0])], vec![2.0, 1.0]).unwrap();
        assert!((seg.volume() - 3.0).abs() < 1e-15);
        assert_eq!(Polytope::point().volume(), 1.0);
    }
}
