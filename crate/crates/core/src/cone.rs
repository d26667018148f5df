//! Limit cones, growth indicators and critical exponents estimated from a
//! spectrum sample.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chamber::ChamberSpace;
use crate::critical::ConcaveModel;
use crate::linalg::{linear_fit, min_norm_in_hull, null_space, rank};
use crate::polyhedral::{GeometryError, PolyCone};
use crate::spectra::{Projection, SampleKind, SpectraError, SpectrumSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("sample has no usable entries")]
    EmptySample,
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("functional is nonpositive ({value}) on the projection of {word}")]
    Nonpositive { value: f64, word: String },
    #[error("direction is too close to the cone boundary (margin {margin:e})")]
    NearBoundary { margin: f64 },
    #[error("invalid linear map: {0}")]
    InvalidMap(String),
    #[error("direction {0:?} is outside the model chamber")]
    OutsideChamber(Vec<f64>),
}

/// A linear form acting on concatenated chamber vectors by dot product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    coefficients: Vec<f64>,
}

impl LinearFunctional {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, ConeError> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(ConeError::InvalidMap(
                "coefficients must be finite and nonempty".into(),
            ));
        }
        Ok(Self { coefficients })
    }

    pub(crate) fn raw(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn apply(&self, u: &[f64]) -> f64 {
        self.coefficients.iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * t).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// A surjective linear map `a → R^d` given by `d` functionals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMapPhi {
    rows: Vec<LinearFunctional>,
}

impl LinearMapPhi {
    pub fn new(rows: Vec<LinearFunctional>) -> Result<Self, ConeError> {
        let dim = rows
            .first()
            .map(|r| r.dim())
            .ok_or_else(|| ConeError::InvalidMap("no rows".into()))?;
        if rows.iter().any(|r| r.dim() != dim) {
            return Err(ConeError::InvalidMap("rows have different lengths".into()));
        }
        let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].coefficients[j]);
        if rank(&m, 1e-10) != rows.len() {
            return Err(ConeError::InvalidMap("rows are linearly dependent".into()));
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ConeError> {
        Self::new(
            rows.into_iter()
                .map(LinearFunctional::new)
                .collect::<Result<_, _>>()?,
        )
    }

    pub fn rows(&self) -> &[LinearFunctional] {
        &self.rows
    }

    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.apply(u)).collect()
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scaled_rows(&self, factors: &[f64]) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .zip(factors)
                .map(|(r, &t)| r.scaled(t))
                .collect(),
        }
    }

    /// The map in intrinsic coordinates (`d × rank`).
    pub fn intrinsic(&self, space: &ChamberSpace) -> Result<DMatrix<f64>, ConeError> {
        let mut m = DMatrix::zeros(self.d(), space.rank());
        for (i, r) in self.rows.iter().enumerate() {
            let c = space.functional_to_intrinsic(&r.coefficients)?;
            m.set_row(i, &c.transpose());
        }
        if rank(&m, 1e-10) != self.d() {
            return Err(ConeError::InvalidMap(
                "map is not surjective on the chamber subspace".into(),
            ));
        }
        Ok(m)
    }
}

/// Directions of Jordan projections and their conic hull.
#[derive(Clone, Debug)]
pub struct LimitConeEstimate {
    space: ChamberSpace,
    directions: Vec<DVector<f64>>,
    hull: PolyCone,
    min_length: usize,
}

/// Hull of the Jordan directions of loxodromic classes of length at least
/// `min_length`.
pub fn estimate_limit_cone(
    sample: &SpectrumSample,
    space: &ChamberSpace,
    min_length: usize,
) -> Result<LimitConeEstimate, ConeError> {
    let mut dirs = Vec::new();
    for e in sample.loxodromic_entries() {
        if e.word.len() < min_length {
            continue;
        }
        let x = space.to_intrinsic(&e.projection(Projection::Jordan))?;
        if x.norm() > 0.0 {
            dirs.push(x.normalize());
        }
    }
    LimitConeEstimate::from_directions(space.clone(), dirs, min_length)
}

impl LimitConeEstimate {
    pub fn from_directions(
        space: ChamberSpace,
        directions: Vec<DVector<f64>>,
        min_length: usize,
    ) -> Result<Self, ConeError> {
        if directions.is_empty() {
            return Err(ConeError::EmptySample);
        }
        for d in &directions {
            if space.chamber_margin(d) < -1e-9 {
                return Err(ConeError::OutsideChamber(space.to_ambient(d)));
            }
        }
        let hull = PolyCone::from_generators(&directions)?;
        Ok(Self {
            space,
            directions,
            hull,
            min_length,
        })
    }

    pub fn space(&self) -> &ChamberSpace {
        &self.space
    }

    /// Unit directions in intrinsic coordinates.
    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn hull(&self) -> &PolyCone {
        &self.hull
    }

    pub fn min_length(&self) -> usize {
        self.min_length
    }

    /// Extreme rays as concatenated chamber vectors.
    pub fn rays_ambient(&self) -> Vec<Vec<f64>> {
        self.hull
            .rays()
            .iter()
            .map(|r| self.space.to_ambient(r))
            .collect()
    }

    /// The hull dilated outward by `dilation` and pulled back where needed
    /// so every ray keeps at least half of its original distance to the
    /// chamber walls.
    pub fn working_cone(&self, dilation: f64) -> Result<PolyCone, ConeError> {
        let rays = self.hull.rays();
        if rays.len() < 2 {
            return Ok(self.hull.clone());
        }
        let c = self.hull.center();
        let pts: Vec<DVector<f64>> = rays.iter().map(|r| r / r.dot(&c)).collect();
        let centroid = pts.iter().fold(DVector::zeros(c.len()), |a, p| a + p) / pts.len() as f64;
        let moved: Vec<DVector<f64>> = pts
            .iter()
            .map(|p| {
                let target = 0.5 * self.space.chamber_margin(p);
                let at = |theta: f64| &centroid + (p - &centroid) * theta;
                if self.space.chamber_margin(&at(dilation)) >= target {
                    return at(dilation);
                }
                let (mut lo, mut hi) = (1.0, dilation);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.space.chamber_margin(&at(mid)) >= target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                at(lo)
            })
            .collect();
        Ok(PolyCone::from_generators(&moved)?)
    }
}

fn angle(u: &DVector<f64>, unit_dir: &DVector<f64>) -> f64 {
    (u.dot(unit_dir) / u.norm()).clamp(-1.0, 1.0).acos()
}

/// Entries whose projection lies in the open cone of half-angle `aperture`
/// about `direction` and has Euclidean norm at most `t`.
pub fn directional_count(
    sample: &SpectrumSample,
    direction: &[f64],
    aperture: f64,
    t: f64,
    projection: Projection,
) -> usize {
    let dir = DVector::from_column_slice(direction).normalize();
    sample
        .entries()
        .iter()
        .filter(|e| projection == Projection::Cartan || e.loxodromic())
        .filter(|e| {
            let u = DVector::from_vec(e.projection(projection));
            let n = u.norm();
            n > 0.0 && n <= t && angle(&u, &dir) < aperture
        })
        .count()
}

/// Tuning for growth-rate regressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSettings {
    /// Half-angle of counting cones, radians.
    pub aperture: f64,
    pub projection: Projection,
    /// Regression window; `None` selects the top half of the complete range.
    pub window: Option<(f64, f64)>,
    pub min_count: usize,
    /// Relative slack on the word-length growth bound used for completeness.
    pub margin: f64,
    pub grid_points: usize,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        Self {
            aperture: 0.15,
            projection: Projection::Jordan,
            window: None,
            min_count: 30,
            margin: 0.1,
            grid_points: 24,
        }
    }
}

/// Slope of `log(count(T) · T^p)` over a window, with `p = 1` for class
/// samples (prime-geodesic correction) and `p = 0` for element samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub points: Vec<(f64, usize)>,
}

fn poly_power(kind: SampleKind) -> f64 {
    match kind {
        SampleKind::Classes => 1.0,
        SampleKind::Elements => 0.0,
    }
}

/// Fits the growth rate of the sorted `values`, counting `#{value ≤ T}`.
pub fn fit_growth(
    sorted: &[f64],
    horizon: f64,
    power: f64,
    settings: &GrowthSettings,
) -> Result<GrowthFit, ConeError> {
    let (lo, hi) = match settings.window {
        Some(w) => w,
        None => {
            if sorted.len() < settings.min_count {
                return Err(ConeError::Insufficient(format!(
                    "only {} entries, need {}",
                    sorted.len(),
                    settings.min_count
                )));
            }
            let start = sorted[settings.min_count - 1];
            if horizon <= start {
                return Err(ConeError::Insufficient(format!(
                    "completeness horizon {horizon:.3} is below the first well-populated value {start:.3}"
                )));
            }
            (0.5 * (start + horizon), horizon)
        }
    };
    if !(lo < hi) || lo <= 0.0 {
        return Err(ConeError::Insufficient(format!("empty window ({lo}, {hi})")));
    }
    let n = settings.grid_points.max(4);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let count = sorted.partition_point(|&v| v <= t);
        if count == 0 {
            return Err(ConeError::Insufficient(format!("zero count at T = {t:.3}")));
        }
        xs.push(t);
        ys.push((count as f64).ln() + power * t.ln());
        points.push((t, count));
    }
    let (rate, _, _) = linear_fit(&xs, &ys)
        .ok_or_else(|| ConeError::Insufficient("degenerate regression".into()))?;
    Ok(GrowthFit {
        rate,
        window: (lo, hi),
        points,
    })
}

struct Cloud {
    units: Vec<DVector<f64>>,
    norms: Vec<f64>,
    horizon: f64,
    power: f64,
}

impl Cloud {
    fn new(sample: &SpectrumSample, settings: &GrowthSettings) -> Result<Self, ConeError> {
        let p = settings.projection;
        let keep = |e: &crate::spectra::SampleEntry| p == Projection::Cartan || e.loxodromic();
        let norm = |e: &crate::spectra::SampleEntry| {
            e.projection(p).iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        let mut units = Vec::new();
        let mut norms = Vec::new();
        for e in sample.entries().iter().filter(|e| keep(e)) {
            let u = DVector::from_vec(e.projection(p));
            let n = u.norm();
            if n > 0.0 {
                units.push(u / n);
                norms.push(n);
            }
        }
        if units.is_empty() {
            return Err(ConeError::EmptySample);
        }
        let horizon = sample
            .growth_bound(|e| if keep(e) { norm(e) } else { f64::INFINITY }, settings.margin)?
            .horizon(sample.max_len());
        Ok(Self {
            units,
            norms,
            horizon,
            power: poly_power(sample.kind()),
        })
    }

    fn rate(&self, direction: &DVector<f64>, settings: &GrowthSettings) -> Result<GrowthFit, ConeError> {
        let dir = direction.normalize();
        let cos_ap = settings.aperture.cos();
        let mut vals: Vec<f64> = self
            .units
            .iter()
            .zip(&self.norms)
            .filter(|(u, _)| settings.aperture >= std::f64::consts::PI || u.dot(&dir) > cos_ap)
            .map(|(_, &n)| n)
            .collect();
        vals.sort_by(f64::total_cmp);
        fit_growth(&vals, self.horizon, self.power, settings)
    }
}

/// `ψ̂(direction)`: the growth rate of projections inside a narrow cone about
/// `direction` (concatenated chamber coordinates).
pub fn estimate_growth_indicator(
    sample: &SpectrumSample,
    direction: &[f64],
    settings: &GrowthSettings,
) -> Result<f64, ConeError> {
    let cloud = Cloud::new(sample, settings)?;
    Ok(cloud
        .rate(&DVector::from_column_slice(direction), settings)?
        .rate)
}

/// Critical exponent of `#{ψ(projection) < T}`.
pub fn estimate_delta(
    sample: &SpectrumSample,
    psi: &LinearFunctional,
    settings: &GrowthSettings,
) -> Result<f64, ConeError> {
    Ok(estimate_delta_fit(sample, psi, settings)?.rate)
}

pub fn estimate_delta_fit(
    sample: &SpectrumSample,
    psi: &LinearFunctional,
    settings: &GrowthSettings,
) -> Result<GrowthFit, ConeError> {
    let p = settings.projection;
    let mut vals = Vec::new();
    for e in sample.entries() {
        if p == Projection::Jordan && !e.loxodromic() {
            continue;
        }
        let v = psi.apply(&e.projection(p));
        if v <= 0.0 {
            return Err(ConeError::Nonpositive {
                value: v,
                word: e.word.to_string(),
            });
        }
        vals.push(v);
    }
    if vals.is_empty() {
        return Err(ConeError::EmptySample);
    }
    vals.sort_by(f64::total_cmp);
    let keep = |e: &crate::spectra::SampleEntry| p == Projection::Cartan || e.loxodromic();
    let horizon = sample
        .growth_bound(
            |e| if keep(e) { psi.apply(&e.projection(p)) } else { f64::INFINITY },
            settings.margin,
        )?
        .horizon(sample.max_len());
    fit_growth(&vals, horizon, poly_power(sample.kind()), settings)
}

/// A smoothed, exactly homogeneous and concave model of the growth
/// indicator: `ψ(w) = ⟨w, c⟩ · g(s(w))` with `s(w)` the coordinates of
/// `w/⟨w, c⟩` on the transversal plane through `c` and `g` a concave
/// quadratic fitted to raw directional rates.
#[derive(Clone, Debug)]
pub struct GrowthIndicatorEstimate {
    space: ChamberSpace,
    center: DVector<f64>,
    basis: DMatrix<f64>,
    constant: f64,
    linear: DVector<f64>,
    hessian: DMatrix<f64>,
    cone: PolyCone,
    settings: GrowthSettings,
    window: (f64, f64),
    raw: Vec<(DVector<f64>, f64)>,
}

impl GrowthIndicatorEstimate {
    /// Fits the model to raw rates on a grid of directions inside the cone.
    pub fn fit(
        sample: &SpectrumSample,
        cone: &LimitConeEstimate,
        settings: &GrowthSettings,
    ) -> Result<Self, ConeError> {
        let cloud = Cloud::new(sample, settings)?;
        let space = cone.space();
        let hull = cone.hull();
        let c = hull.center();
        let mut grid: Vec<DVector<f64>> = vec![c.clone()];
        let rays = hull.rays();
        let step = (rays.len() / 12).max(1);
        let picked: Vec<DVector<f64>> = rays.iter().step_by(step).map(|r| r / r.dot(&c)).collect();
        let mut anchors = picked.clone();
        for i in 0..picked.len() {
            for j in i + 1..picked.len() {
                anchors.push((&picked[i] + &picked[j]) * 0.5);
            }
        }
        for level in [0.3, 0.55, 0.8] {
            for a in &anchors {
                grid.push((&c + (a - &c) * level).normalize());
            }
        }
        let mut raw = Vec::new();
        let mut window = (f64::INFINITY, f64::NEG_INFINITY);
        for dir in &grid {
            let amb = DVector::from_vec(space.to_ambient(dir));
            if let Ok(fit) = cloud.rate(&amb, settings) {
                window.0 = window.0.min(fit.window.0);
                window.1 = window.1.max(fit.window.1);
                raw.push((dir.clone(), fit.rate));
            }
        }
        if raw.is_empty() {
            return Err(ConeError::Insufficient(
                "no direction has enough counts for a growth fit".into(),
            ));
        }
        let mut est = Self::from_raw(space.clone(), hull.clone(), raw)?;
        est.settings = settings.clone();
        est.window = window;
        Ok(est)
    }

    /// Fits the concave quadratic slice model to `(direction, value)` pairs
    /// (intrinsic coordinates; directions need not be unit).
    pub fn from_raw(
        space: ChamberSpace,
        cone: PolyCone,
        raw: Vec<(DVector<f64>, f64)>,
    ) -> Result<Self, ConeError> {
        let dim = space.rank();
        let center = cone.center();
        let basis = null_space(&DMatrix::from_row_slice(1, dim, center.as_slice()), 1e-12);
        let m = dim - 1;
        let mut pts = Vec::with_capacity(raw.len());
        for (w, val) in &raw {
            let h = w.dot(&center);
            if h <= 0.0 {
                return Err(ConeError::Insufficient("direction opposite to the cone".into()));
            }
            pts.push((basis.transpose() * w / h, val / h));
        }
        let quad_terms = m * (m + 1) / 2;
        let floor = 1e-3 * pts.iter().map(|(_, g)| g.abs()).fold(1e-3, f64::max);
        let mut hessian = -DMatrix::identity(m, m) * floor;
        if pts.len() >= 1 + m + quad_terms + 2 && m > 0 {
            let cols = 1 + m + quad_terms;
            let design = DMatrix::from_fn(pts.len(), cols, |i, j| {
                let s = &pts[i].0;
                quad_feature(s, j)
            });
            let rhs = DVector::from_fn(pts.len(), |i, _| pts[i].1);
            if let Ok(sol) = design.clone().svd(true, true).solve(&rhs, 1e-12) {
                let mut h = DMatrix::zeros(m, m);
                let mut k = 1 + m;
                for a in 0..m {
                    for b in a..m {
                        let coeff = sol[k];
                        if a == b {
                            h[(a, a)] = coeff;
                        } else {
                            h[(a, b)] = coeff;
                            h[(b, a)] = coeff;
                        }
                        k += 1;
                    }
                }
                let eig = h.symmetric_eigen();
                let clamped = eig.eigenvalues.map(|l| l.min(-floor));
                hessian = &eig.eigenvectors
                    * DMatrix::from_diagonal(&clamped)
                    * eig.eigenvectors.transpose();
            }
        }
        // Affine part with the Hessian fixed.
        let (constant, linear) = {
            let design = DMatrix::from_fn(pts.len(), 1 + m, |i, j| {
                if j == 0 {
                    1.0
                } else {
                    pts[i].0[j - 1]
                }
            });
            let rhs = DVector::from_fn(pts.len(), |i, _| {
                let s = &pts[i].0;
                pts[i].1 - 0.5 * (s.transpose() * &hessian * s)[0]
            });
            match design.svd(true, true).solve(&rhs, 1e-12) {
                Ok(sol) => (sol[0], DVector::from_fn(m, |i, _| sol[i + 1])),
                Err(_) => (
                    pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64,
                    DVector::zeros(m),
                ),
            }
        };
        Ok(Self {
            space,
            center,
            basis,
            constant,
            linear,
            hessian,
            cone,
            settings: GrowthSettings::default(),
            window: (0.0, 0.0),
            raw,
        })
    }

    pub fn space(&self) -> &ChamberSpace {
        &self.space
    }

    pub fn cone(&self) -> &PolyCone {
        &self.cone
    }

    pub fn aperture(&self) -> f64 {
        self.settings.aperture
    }

    /// Union of the regression windows used for the raw rates.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Raw `(direction, rate)` pairs the model was fitted to.
    pub fn raw(&self) -> &[(DVector<f64>, f64)] {
        &self.raw
    }

    fn slice_value(&self, s: &DVector<f64>) -> (f64, DVector<f64>) {
        let hs = &self.hessian * s;
        let g = self.constant + self.linear.dot(s) + 0.5 * s.dot(&hs);
        (g, &self.linear + hs)
    }

    /// Model value at a concatenated chamber vector.
    pub fn evaluate_ambient(&self, u: &[f64]) -> Result<f64, ConeError> {
        Ok(self.value(&self.space.to_intrinsic(u)?))
    }
}

fn quad_feature(s: &DVector<f64>, j: usize) -> f64 {
    let m = s.len();
    if j == 0 {
        return 1.0;
    }
    if j <= m {
        return s[j - 1];
    }
    let mut k = m + 1;
    for a in 0..m {
        for b in a..m {
            if k == j {
                return if a == b { 0.5 * s[a] * s[a] } else { s[a] * s[b] };
            }
            k += 1;
        }
    }
    unreachable!("feature index in range")
}

impl ConcaveModel for GrowthIndicatorEstimate {
    fn dim(&self) -> usize {
        self.space.rank()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        let h = w.dot(&self.center);
        if h <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let s = self.basis.transpose() * w / h;
        h * self.slice_value(&s).0
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let h = w.dot(&self.center);
        let s = self.basis.transpose() * w / h;
        let (g, dg) = self.slice_value(&s);
        &self.center * g + (&self.basis - &self.center * s.transpose()) * dg
    }
}

/// Tangent form of a homogeneous model at `v`: central differences of step
/// `step` along the sphere, radial part from homogeneity.
pub fn tangent_form_on_sphere(
    model: &dyn ConcaveModel,
    cone: &PolyCone,
    v: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>, ConeError> {
    let unit = v.normalize();
    let margin = cone.facet_margin(&unit);
    if margin < 2.0 * step {
        return Err(ConeError::NearBoundary { margin });
    }
    let perp = null_space(&DMatrix::from_row_slice(1, unit.len(), unit.as_slice()), 1e-12);
    let mut grad = &unit * model.value(&unit);
    for j in 0..perp.ncols() {
        let e = perp.column(j).into_owned();
        let plus = (&unit + &e * step).normalize();
        let minus = (&unit - &e * step).normalize();
        // Both points have norm 1 on the sphere; rescale to the chord.
        let scale = (1.0 + step * step).sqrt();
        let d = (model.value(&plus) - model.value(&minus)) * scale / (2.0 * step);
        grad += e * d;
    }
    Ok(grad)
}

/// Ambient tangent form of the growth-indicator model at an ambient `v`.
pub fn estimate_tangent_form(
    gi: &GrowthIndicatorEstimate,
    v: &[f64],
) -> Result<LinearFunctional, ConeError> {
    let x = gi.space.to_intrinsic(v)?;
    let g = tangent_form_on_sphere(gi, &gi.cone, &x, 1e-3)?;
    LinearFunctional::new(gi.space.functional_to_ambient(&g))
}

/// `ker φ ∩ cone = {0}`, tested as `dist(0, conv φ(rays)) > tol`.
pub fn check_properness(
    phi: &LinearMapPhi,
    cone: &LimitConeEstimate,
    tol: f64,
) -> Result<bool, ConeError> {
    Ok(properness_margin(phi, cone.space(), cone.hull())? > tol)
}

/// Distance from the origin to the convex hull of the images of the unit rays.
pub fn properness_margin(
    phi: &LinearMapPhi,
    space: &ChamberSpace,
    cone: &PolyCone,
) -> Result<f64, ConeError> {
    let m = phi.intrinsic(space)?;
    let images: Vec<DVector<f64>> = cone.rays().iter().map(|r| &m * r).collect();
    Ok(min_norm_in_hull(&images).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridValue {
    pub direction: Vec<f64>,
    pub psi_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub functional: Vec<f64>,
    pub delta: Option<f64>,
    pub error: Option<String>,
}

/// Hull rays, model values on a direction grid and critical exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub min_length: usize,
    pub aperture: f64,
    pub hull_rays: Vec<Vec<f64>>,
    pub growth_grid: Vec<GridValue>,
    pub deltas: Vec<DeltaValue>,
}

impl ConeReport {
    pub fn build(
        sample: &SpectrumSample,
        cone: &LimitConeEstimate,
        gi: &GrowthIndicatorEstimate,
        functionals: &[LinearFunctional],
        settings: &GrowthSettings,
    ) -> Self {
        let growth_grid = gi
            .raw()
            .iter()
            .map(|(d, _)| GridValue {
                direction: cone.space().to_ambient(d),
                psi_hat: gi.value(d),
            })
            .collect();
        let deltas = functionals
            .iter()
            .map(|f| match estimate_delta(sample, f, settings) {
                Ok(d) => DeltaValue {
                    functional: f.coefficients().to_vec(),
                    delta: Some(d),
                    error: None,
                },
                Err(e) => DeltaValue {
                    functional: f.coefficients().to_vec(),
                    delta: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        Self {
            min_length: cone.min_length(),
            aperture: settings.aperture,
            hull_rays: cone.rays_ambient(),
            growth_grid,
            deltas,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn properness_on_quadrant() {
        let space = ChamberSpace::orthant(2).unwrap();
        let cone = LimitConeEstimate::from_directions(
            space.clone(),
            vec![v(&[1.0, 0.2]).normalize(), v(&[0.2, 1.0]).normalize()],
            1,
        )
        .unwrap();
        let id = LinearMapPhi::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(check_properness(&id, &cone, 1e-9).unwrap());
        let diff = LinearMapPhi::from_rows(vec![vec![1.0, -1.0]]).unwrap();
        assert!(!check_properness(&diff, &cone, 1e-9).unwrap());
    }

    #[test]
    fn dependent_rows_rejected() {
        assert!(LinearMapPhi::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn quadratic_model_reproduces_concave_data() {
        let space = ChamberSpace::orthant(2).unwrap();
        let cone = PolyCone::from_generators(&[v(&[1.0, 0.1]), v(&[0.1, 1.0])]).unwrap();
        let truth = |w: &DVector<f64>| 2.0 * (w[0] * w[1]).sqrt();
        let raw: Vec<(DVector<f64>, f64)> = (0..15)
            .map(|i| {
                let a = 0.3 + 0.97 * i as f64 / 14.0;
                let w = v(&[a.cos(), a.sin()]);
                let val = truth(&w);
                (w, val)
            })
            .collect();
        let model = GrowthIndicatorEstimate::from_raw(space, cone, raw).unwrap();
        let w = v(&[1.0, 1.0]);
        assert!((model.value(&w) - 2.0).abs() < 0.05);
        assert!((model.value(&(&w * 3.0)) - 3.0 * model.value(&w)).abs() < 1e-12);
        let g = model.gradient(&w);
        let h = 1e-6;
        let fd = (model.value(&v(&[1.0 + h, 1.0])) - model.value(&v(&[1.0 - h, 1.0]))) / (2.0 * h);
        assert!((g[0] - fd).abs() < 1e-6);
    }

    #[test]
    fn growth_fit_recovers_exponential() {
        let vals: Vec<f64> = (1..20000).map(|k| (k as f64).ln() / 0.5).collect();
        let s = GrowthSettings::default();
        let fit = fit_growth(&vals, 19.0, 0.0, &s).unwrap();
        assert!((fit.rate - 0.5).abs() < 0.01, "{}", fit.rate);
        assert!(fit_growth(&vals[..10], 19.0, 0.0, &s).is_err());
    }
}
