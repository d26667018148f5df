//! Hypertubes `(Q + V) ∩ C`, their truncations along a direction `v`, and
//! the decomposition of a box family into a difference of two truncations.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chamber::ChamberSpace;
use crate::cone::{ConeError, LinearFunctional, LinearMapPhi};
use crate::linalg::{null_space, orthonormalize, rank};
use crate::polyhedral::{GeometryError, PolyCone, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate decomposition: {0}")]
    Degenerate(String),
    #[error("invalid box family: {0}")]
    InvalidBox(String),
    #[error("malformed hypertube text: {0}")]
    Parse(String),
}

/// Boxes `∏[rᵢT, rᵢT + εᵢ]` pulled back by `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxFamily {
    pub phi: LinearMapPhi,
    pub r: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl BoxFamily {
    pub fn new(phi: LinearMapPhi, r: Vec<f64>, epsilon: Vec<f64>) -> Result<Self, TubeError> {
        if r.len() != phi.d() || epsilon.len() != phi.d() {
            return Err(TubeError::InvalidBox(format!(
                "φ has {} rows but r has {} and ε has {} entries",
                phi.d(),
                r.len(),
                epsilon.len()
            )));
        }
        if epsilon.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(TubeError::InvalidBox("every εᵢ must be positive".into()));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(TubeError::InvalidBox("r must be finite".into()));
        }
        Ok(Self { phi, r, epsilon })
    }

    pub fn d(&self) -> usize {
        self.phi.d()
    }

    /// Box membership of the ambient vector `u` at scale `t`.
    pub fn contains(&self, u: &[f64], t: f64) -> bool {
        self.margin(u, t) >= 0.0
    }

    /// `min_i` distance of `φᵢ(u)` to the complement of `[rᵢt, rᵢt + εᵢ]`,
    /// negative outside.
    pub fn margin(&self, u: &[f64], t: f64) -> f64 {
        self.phi
            .apply(u)
            .iter()
            .zip(self.r.iter().zip(&self.epsilon))
            .map(|(&p, (&r, &e))| (p - r * t).min(r * t + e - p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `x ↦ g·x + c` on the coordinates of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            gradient: vec![0.0; dim],
            offset: c,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.offset + self.gradient.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    fn grad(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.gradient)
    }
}

/// Continuous piecewise-affine offset over `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OffsetFunction {
    /// Pointwise minimum of the pieces (concave).
    MinOf(Vec<AffinePiece>),
    /// Pointwise maximum of the pieces (convex).
    MaxOf(Vec<AffinePiece>),
}

impl OffsetFunction {
    pub fn constant(dim: usize, c: f64) -> Self {
        OffsetFunction::MinOf(vec![AffinePiece::constant(dim, c)])
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        match self {
            OffsetFunction::MinOf(p) | OffsetFunction::MaxOf(p) => p,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            OffsetFunction::MinOf(p) => p.iter().map(|a| a.eval(x)).fold(f64::INFINITY, f64::min),
            OffsetFunction::MaxOf(p) => p
                .iter()
                .map(|a| a.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `b + s`.
    pub fn shifted(&self, s: f64) -> Self {
        let shift = |p: &Vec<AffinePiece>| {
            p.iter()
                .map(|a| AffinePiece {
                    gradient: a.gradient.clone(),
                    offset: a.offset + s,
                })
                .collect()
        };
        match self {
            OffsetFunction::MinOf(p) => OffsetFunction::MinOf(shift(p)),
            OffsetFunction::MaxOf(p) => OffsetFunction::MaxOf(shift(p)),
        }
    }

    /// Pieces of `Q` on which a single affine piece is active.
    pub fn cells(&self, q: &Polytope) -> Vec<(Polytope, AffinePiece)> {
        let pieces = self.pieces();
        if q.dim() == 0 {
            let x = DVector::zeros(0);
            let best = pieces
                .iter()
                .min_by(|a, b| {
                    let (va, vb) = (a.eval(&x), b.eval(&x));
                    match self {
                        OffsetFunction::MinOf(_) => va.total_cmp(&vb),
                        OffsetFunction::MaxOf(_) => vb.total_cmp(&va),
                    }
                })
                .expect("offset has pieces");
            return vec![(q.clone(), best.clone())];
        }
        let mut out = Vec::new();
        for (j, pj) in pieces.iter().enumerate() {
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for (k, pk) in pieces.iter().enumerate() {
                if k == j {
                    continue;
                }
                // MinOf: pj ≤ pk ; MaxOf: pj ≥ pk.
                let (g, c) = match self {
                    OffsetFunction::MinOf(_) => (pj.grad() - pk.grad(), pk.offset - pj.offset),
                    OffsetFunction::MaxOf(_) => (pk.grad() - pj.grad(), pj.offset - pk.offset),
                };
                if g.norm() <= 1e-14 {
                    if c < 0.0 || (c == 0.0 && k < j) {
                        rows.clear();
                        rhs.clear();
                        rows.push(DVector::zeros(q.dim()));
                        rhs.push(-1.0);
                        break;
                    }
                    continue;
                }
                rows.push(g);
                rhs.push(c);
            }
            if let Some(cell) = q.intersect(&rows, &rhs) {
                out.push((cell, pj.clone()));
            }
        }
        out
    }
}

/// `T = (Q + V) ∩ C` with `V = span(v) ⊕ span(K)` and `Q` in the
/// coordinates of the orthonormal columns of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypertube {
    space: ChamberSpace,
    w_basis: DMatrix<f64>,
    k_basis: DMatrix<f64>,
    v: DVector<f64>,
    q: Polytope,
    cone: PolyCone,
    frame_inv: DMatrix<f64>,
}

/// Coordinates `u = W x + K y + t v`.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeCoordinates {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub t: f64,
}

impl Hypertube {
    pub fn new(
        space: ChamberSpace,
        w_basis: DMatrix<f64>,
        k_basis: DMatrix<f64>,
        v: DVector<f64>,
        q: Polytope,
        cone: PolyCone,
    ) -> Result<Self, TubeError> {
        let dim = space.rank();
        if w_basis.nrows() != dim || k_basis.nrows() != dim || v.len() != dim || cone.dim() != dim {
            return Err(TubeError::Degenerate("bases live in different spaces".into()));
        }
        if w_basis.ncols() + k_basis.ncols() + 1 != dim {
            return Err(TubeError::Degenerate(format!(
                "dim W + dim K + 1 = {} but the space has rank {dim}",
                w_basis.ncols() + k_basis.ncols() + 1
            )));
        }
        if q.dim() != w_basis.ncols() {
            return Err(TubeError::Degenerate("Q does not live in W".into()));
        }
        if v.norm() == 0.0 {
            return Err(TubeError::Degenerate("V must be nonzero".into()));
        }
        let mut frame = DMatrix::zeros(dim, dim);
        frame
            .view_mut((0, 0), (dim, w_basis.ncols()))
            .copy_from(&w_basis);
        frame
            .view_mut((0, w_basis.ncols()), (dim, k_basis.ncols()))
            .copy_from(&k_basis);
        frame.set_column(dim - 1, &v);
        if rank(&frame, 1e-10) != dim {
            return Err(TubeError::Degenerate("W, K and v are not independent".into()));
        }
        let frame_inv = frame
            .try_inverse()
            .ok_or_else(|| TubeError::Degenerate("frame not invertible".into()))?;
        if cone.facet_margin(&v.normalize()) <= 0.0 {
            return Err(TubeError::Precondition("v is not in the interior of C".into()));
        }
        Ok(Self {
            space,
            w_basis,
            k_basis,
            v,
            q,
            cone,
            frame_inv,
        })
    }

    pub fn space(&self) -> &ChamberSpace {
        &self.space
    }

    pub fn w_basis(&self) -> &DMatrix<f64> {
        &self.w_basis
    }

    pub fn k_basis(&self) -> &DMatrix<f64> {
        &self.k_basis
    }

    /// Truncation direction (intrinsic).
    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn q(&self) -> &Polytope {
        &self.q
    }

    pub fn cone(&self) -> &PolyCone {
        &self.cone
    }

    /// Basis of `V = span(v) ⊕ span(K)` (columns).
    pub fn v_basis(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.v.len(), self.k_basis.ncols() + 1);
        m.set_column(0, &self.v);
        m.view_mut((0, 1), (self.v.len(), self.k_basis.ncols()))
            .copy_from(&self.k_basis);
        m
    }

    pub fn coordinates(&self, u: &DVector<f64>) -> TubeCoordinates {
        let c = &self.frame_inv * u;
        let m = self.w_basis.ncols();
        let k = self.k_basis.ncols();
        TubeCoordinates {
            x: c.rows(0, m).into_owned(),
            y: c.rows(m, k).into_owned(),
            t: c[m + k],
        }
    }

    pub fn assemble(&self, c: &TubeCoordinates) -> DVector<f64> {
        &self.w_basis * &c.x + &self.k_basis * &c.y + &self.v * c.t
    }

    /// Checks that `v` lies in the interior of a limit-cone estimate.
    pub fn check_against(&self, hull: &PolyCone) -> bool {
        hull.facet_margin(&self.v.normalize()) > 0.0
    }

    /// Membership of an intrinsic vector.
    pub fn contains_intrinsic(&self, u: &DVector<f64>) -> bool {
        if self.cone.facet_margin(u) < 0.0 {
            return false;
        }
        self.q.contains(&self.coordinates(u).x, 0.0)
    }

    /// Membership of a concatenated chamber vector.
    pub fn contains(&self, u: &[f64]) -> Result<bool, TubeError> {
        Ok(self.contains_intrinsic(&self.space.to_intrinsic(u)?))
    }

    pub fn truncation_contains_intrinsic(&self, spec: &TruncationSpec, u: &DVector<f64>) -> bool {
        if self.cone.facet_margin(u) < 0.0 {
            return false;
        }
        let c = self.coordinates(u);
        self.q.contains(&c.x, 0.0) && c.t >= 0.0 && c.t <= spec.t + spec.b.eval(&c.x)
    }

    pub fn truncation_contains(&self, spec: &TruncationSpec, u: &[f64]) -> Result<bool, TubeError> {
        Ok(self.truncation_contains_intrinsic(spec, &self.space.to_intrinsic(u)?))
    }

    /// Plain-text description: V basis rows, Q vertices, C rays, v and the
    /// offset pieces (all ambient where applicable).
    pub fn to_text(&self, offsets: &[(&str, &OffsetFunction)]) -> String {
        let mut s = String::new();
        let amb = |x: &DVector<f64>| fmt_row(&self.space.to_ambient(x));
        let vb = self.v_basis();
        let _ = writeln!(s, "V {}", vb.ncols());
        for j in 0..vb.ncols() {
            let _ = writeln!(s, "  {}", amb(&vb.column(j).into_owned()));
        }
        let _ = writeln!(s, "W {}", self.w_basis.ncols());
        for j in 0..self.w_basis.ncols() {
            let _ = writeln!(s, "  {}", amb(&self.w_basis.column(j).into_owned()));
        }
        let _ = writeln!(s, "Q {}", self.q.vertices().len());
        for p in self.q.vertices() {
            let _ = writeln!(s, "  {}", fmt_row(p.as_slice()));
        }
        let _ = writeln!(s, "C {}", self.cone.rays().len());
        for r in self.cone.rays() {
            let _ = writeln!(s, "  {}", amb(r));
        }
        let _ = writeln!(s, "v {}", amb(&self.v));
        for (name, b) in offsets {
            let kind = match b {
                OffsetFunction::MinOf(_) => "min",
                OffsetFunction::MaxOf(_) => "max",
            };
            let _ = writeln!(s, "b {name} {kind} {}", b.pieces().len());
            for p in b.pieces() {
                let _ = writeln!(s, "  {} | {}", fmt_row(&p.gradient), p.offset);
            }
            if self.q.dim() == 1 {
                let _ = writeln!(s, "  breakpoints {}", fmt_row(&breakpoints(b, &self.q)));
            }
        }
        s
    }
}

fn fmt_row(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

/// Break points of a one-dimensional offset inside `Q`.
pub fn breakpoints(b: &OffsetFunction, q: &Polytope) -> Vec<f64> {
    if q.dim() != 1 {
        return Vec::new();
    }
    let mut pts: Vec<f64> = b
        .cells(q)
        .iter()
        .flat_map(|(c, _)| c.vertices().iter().map(|v| v[0]).collect::<Vec<_>>())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

/// `T_{T,b}(v)`: the part of the hypertube with `0 ≤ t ≤ T + b(q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationSpec {
    pub b: OffsetFunction,
    pub t: f64,
    /// Tangent form re-projected to vanish on `W` and `K` (intrinsic).
    pub psi_v: DVector<f64>,
}

impl TruncationSpec {
    /// Validates `ψ_v` against the hypertube, replacing it by the
    /// functional that vanishes on `W ⊕ K` and agrees with it at `v`.
    pub fn new(
        h: &Hypertube,
        b: OffsetFunction,
        t: f64,
        psi_v: &DVector<f64>,
    ) -> Result<Self, TubeError> {
        if !(t >= 0.0) {
            return Err(TubeError::Precondition(format!("T = {t} must be nonnegative")));
        }
        if b.pieces().iter().any(|p| p.gradient.len() != h.q.dim()) {
            return Err(TubeError::Precondition("offset lives in the wrong dimension".into()));
        }
        let scale = psi_v.norm() * h.v.norm();
        for vert in h.q.vertices() {
            let q = &h.w_basis * vert;
            if psi_v.dot(&q).abs() > 1e-9 * scale.max(1.0) * q.norm().max(1.0) {
                return Err(TubeError::Precondition(
                    "ψ_v does not vanish on Q".into(),
                ));
            }
        }
        let dim = h.v.len();
        let t_row = h.frame_inv.row(dim - 1).transpose();
        let reprojected = t_row * psi_v.dot(&h.v);
        Ok(Self {
            b,
            t,
            psi_v: reprojected,
        })
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self {
            t,
            ..self.clone()
        }
    }
}

/// Output of the box-family construction.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDecomposition {
    pub tube: Hypertube,
    /// Upper offset `b₁`.
    pub upper: OffsetFunction,
    /// Lower offset `b₂`.
    pub lower: OffsetFunction,
    /// Tangent form (intrinsic) used to choose `W`.
    pub psi_v: DVector<f64>,
}

impl BoxDecomposition {
    pub fn spec_upper(&self, t: f64) -> Result<TruncationSpec, TubeError> {
        TruncationSpec::new(&self.tube, self.upper.clone(), t, &self.psi_v)
    }

    pub fn spec_lower(&self, t: f64) -> Result<TruncationSpec, TubeError> {
        TruncationSpec::new(&self.tube, self.lower.clone(), t, &self.psi_v)
    }
}

/// Realizes `C ∩ φ⁻¹(∏[rᵢT, rᵢT + εᵢ])` as `T_{T,b₁}(v⋆) − T_{T,b₂}(v⋆)`.
///
/// `W` is the orthogonal complement of `ker φ` inside `ker ψ_v`, `Q` is the
/// projection along `v⋆` of the parallelepiped `{u ∈ Rv⋆ ⊕ W : φ(u) ∈ ∏[0, εᵢ]}`
/// and `[b₂(q), b₁(q)] = {s : q + s v⋆ ∈ B}`.
pub fn build_from_box_family(
    family: &BoxFamily,
    space: &ChamberSpace,
    v_star: &[f64],
    psi_tangent: &LinearFunctional,
    cone: &PolyCone,
    tol: f64,
) -> Result<BoxDecomposition, TubeError> {
    let phi = family.phi.intrinsic(space)?;
    let v = space.to_intrinsic(v_star)?;
    let psi = space.functional_to_intrinsic(psi_tangent.coefficients())?;
    let r = DVector::from_column_slice(&family.r);
    let eps = &family.epsilon;
    let d = family.d();
    let dim = space.rank();

    let miss = (&phi * &v - &r).norm();
    if miss > tol * r.norm().max(1.0) {
        return Err(TubeError::Precondition(format!("φ(v⋆) misses r by {miss:e}")));
    }
    let k_basis = null_space(&phi, 1e-12);
    for j in 0..k_basis.ncols() {
        let leak = psi.dot(&k_basis.column(j)).abs() / psi.norm();
        if leak > tol {
            return Err(TubeError::Precondition(format!(
                "ψ_v does not vanish on ker φ (residual {leak:e})"
            )));
        }
    }
    for ray in cone.rays() {
        if psi.dot(ray) <= 0.0 {
            return Err(TubeError::Precondition(
                "ψ_v is not positive on the cone C".into(),
            ));
        }
    }
    if cone.facet_margin(&v.normalize()) <= 0.0 {
        return Err(TubeError::Precondition("v⋆ is not interior to C".into()));
    }

    let row_space = orthonormalize(&phi.transpose(), 1e-12);
    let along = row_space.transpose() * &psi;
    if along.norm() <= 1e-12 * psi.norm() {
        return Err(TubeError::Degenerate("ψ_v vanishes on (ker φ)^⊥".into()));
    }
    let a = null_space(&DMatrix::from_row_slice(1, d, along.as_slice()), 1e-12);
    let w_basis = &row_space * a;
    let m = w_basis.ncols();
    debug_assert_eq!(m + k_basis.ncols() + 1, dim);

    let phi_w = &phi * &w_basis;
    let mut stacked = DMatrix::zeros(d, m + 1);
    stacked.view_mut((0, 0), (d, m)).copy_from(&phi_w);
    stacked.set_column(m, &r);
    if rank(&stacked, 1e-10) != d {
        return Err(TubeError::Degenerate("φ is not injective on Rv⋆ ⊕ W".into()));
    }

    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut q_rows = Vec::new();
    let mut q_rhs = Vec::new();
    let scale = r.amax().max(1e-300);
    for i in 0..d {
        let g: DVector<f64> = phi_w.row(i).transpose();
        let ri = r[i];
        if ri.abs() <= 1e-14 * scale {
            // 0 ≤ g·x ≤ εᵢ.
            q_rows.push(-g.clone());
            q_rhs.push(0.0);
            q_rows.push(g);
            q_rhs.push(eps[i]);
            continue;
        }
        let lo_at_zero = AffinePiece {
            gradient: (-&g / ri).iter().copied().collect(),
            offset: 0.0,
        };
        let hi_at_eps = AffinePiece {
            gradient: (-&g / ri).iter().copied().collect(),
            offset: eps[i] / ri,
        };
        if ri > 0.0 {
            lower.push(lo_at_zero);
            upper.push(hi_at_eps);
        } else {
            lower.push(hi_at_eps);
            upper.push(lo_at_zero);
        }
    }
    if lower.is_empty() || upper.is_empty() {
        return Err(TubeError::Degenerate("r vanishes identically".into()));
    }
    for l in &lower {
        for u in &upper {
            let g = DVector::from_column_slice(&l.gradient) - DVector::from_column_slice(&u.gradient);
            let c = u.offset - l.offset;
            if m == 0 || g.norm() <= 1e-14 {
                if c < -1e-14 {
                    return Err(TubeError::Degenerate("box slice is empty".into()));
                }
                continue;
            }
            q_rows.push(g);
            q_rhs.push(c);
        }
    }
    let q = if m == 0 {
        Polytope::point()
    } else {
        Polytope::from_halfspaces(m, q_rows, q_rhs)?
    };
    let tube = Hypertube::new(space.clone(), w_basis, k_basis, v, q, cone.clone())?;
    Ok(BoxDecomposition {
        tube,
        upper: OffsetFunction::MinOf(upper),
        lower: OffsetFunction::MaxOf(lower),
        psi_v: psi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub samples: usize,
    pub in_box: usize,
    pub ignored: usize,
    pub violations: usize,
}

/// Samples points around the truncations and checks
/// `u ∈ C ∩ box ⟺ u ∈ T_{T,b₁} − T_{T,b₂}` away from a `10⁻⁹` band.
pub fn verify_difference_identity(
    h: &Hypertube,
    upper: &TruncationSpec,
    lower: &TruncationSpec,
    family: &BoxFamily,
    t: f64,
    samples: usize,
    seed: u64,
) -> IdentityReport {
    const BAND: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = h.q();
    let m = q.dim();
    let k = h.k_basis.ncols();
    let (mut lo, mut hi) = (vec![0.0; m], vec![0.0; m]);
    for j in 0..m {
        let vals = q.vertices().iter().map(|p| p[j]);
        let mn = vals.clone().fold(f64::INFINITY, f64::min);
        let mx = vals.fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.2 * (mx - mn) + 1e-3;
        lo[j] = mn - pad;
        hi[j] = mx + pad;
    }
    let b_vals: Vec<f64> = q
        .vertices()
        .iter()
        .flat_map(|p| [upper.b.eval(p), lower.b.eval(p)])
        .collect();
    let b_min = b_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let b_max = b_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_lo = t + b_min - 0.5 * (b_max - b_min) - 0.5;
    let t_hi = t + b_max + 0.5 * (b_max - b_min) + 0.5;
    // Transversal extent of C per unit of t.
    let spread = h
        .cone
        .rays()
        .iter()
        .map(|ray| {
            let c = h.coordinates(ray);
            if c.t > 0.0 {
                c.y.amax() / c.t
            } else {
                1.0
            }
        })
        .fold(0.0f64, f64::max);
    let y_half = 1.2 * spread * t_hi.max(1.0) + 1e-3;

    let scale = t.max(1.0);
    let mut report = IdentityReport {
        samples,
        in_box: 0,
        ignored: 0,
        violations: 0,
    };
    for i in 0..samples {
        let x = DVector::from_fn(m, |j, _| rng.random_range(lo[j]..=hi[j]));
        let y = DVector::from_fn(k, |_, _| rng.random_range(-y_half..=y_half));
        let tt = if i % 10 == 0 {
            rng.random_range(-1.0..=t_hi)
        } else {
            rng.random_range(t_lo..=t_hi)
        };
        let c = TubeCoordinates { x, y, t: tt };
        let u = h.assemble(&c);
        let amb = h.space.to_ambient(&u);

        let cone_margin = h.cone.facet_margin(&u);
        let q_margin = q.margin(&c.x);
        let box_margin = family.margin(&amb, t);
        let up = upper.t + upper.b.eval(&c.x) - tt;
        let low = lower.t + lower.b.eval(&c.x) - tt;
        let near = [cone_margin, q_margin, box_margin, up, low, tt]
            .iter()
            .any(|m| m.abs() < BAND * scale);
        let box_side = cone_margin >= 0.0 && box_margin >= 0.0;
        let in_upper = h.truncation_contains_intrinsic(upper, &u);
        let in_lower = h.truncation_contains_intrinsic(lower, &u);
        let tube_side = in_upper && !in_lower;
        if box_side {
            report.in_box += 1;
        }
        if box_side != tube_side {
            if near {
                report.ignored += 1;
            } else {
                report.violations += 1;
            }
        }
    }
    report
}
