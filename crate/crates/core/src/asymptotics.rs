//! Laplace-type asymptotics of truncation integrals and the predicted
//! counting asymptotics built on them.

use std::f64::consts::PI;

use gauss_quad::{GaussHermite, GaussLegendre};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chamber::ChamberSpace;
use crate::cone::{LinearFunctional, LinearMapPhi};
use crate::hypertube::{
    build_from_box_family, BoxDecomposition, BoxFamily, Hypertube, OffsetFunction, TruncationSpec,
    TubeError,
};
use crate::polyhedral::{GeometryError, PolyCone, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Tube(#[from] TubeError),
    #[error("inner product is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("defect form is degenerate on the transversal directions")]
    DegenerateDefect,
    #[error("vector is outside ker ψ_v (residual {0:e})")]
    OutsideKernel(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature and Monte Carlo disagree: {quadrature} vs {monte_carlo}")]
    Disagreement { quadrature: f64, monte_carlo: f64 },
    #[error("quadrature rule: {0}")]
    Rule(String),
}

/// `I(u) = ⟨u,u⟩ − ⟨u,v⟩²/⟨v,v⟩` for an inner product on intrinsic
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectForm {
    inner: DMatrix<f64>,
    v: DVector<f64>,
    reduced: DMatrix<f64>,
}

impl DefectForm {
    pub fn new(inner: DMatrix<f64>, v: DVector<f64>) -> Result<Self, AsymptoticError> {
        let n = v.len();
        if inner.nrows() != n || inner.ncols() != n {
            return Err(AsymptoticError::InvalidParameter(
                "inner product and v have different dimensions".into(),
            ));
        }
        if (&inner - inner.transpose()).amax() > 1e-12 * inner.amax().max(1.0) {
            return Err(AsymptoticError::NotPositiveDefinite);
        }
        if Cholesky::new(inner.clone()).is_none() {
            return Err(AsymptoticError::NotPositiveDefinite);
        }
        let sv = &inner * &v;
        let vsv = v.dot(&sv);
        let reduced = &inner - &sv * sv.transpose() / vsv;
        Ok(Self { inner, v, reduced })
    }

    pub fn euclidean(v: DVector<f64>) -> Self {
        let n = v.len();
        Self::new(DMatrix::identity(n, n), v).expect("identity is positive definite")
    }

    pub fn inner_product(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    /// Matrix of the quadratic form `I`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.reduced * u))
    }
}

/// `I(u)` for `u ∈ ker ψ_v`.
pub fn defect(form: &DefectForm, psi_v: &DVector<f64>, u: &DVector<f64>) -> Result<f64, AsymptoticError> {
    let scale = psi_v.norm() * u.norm();
    let leak = psi_v.dot(u).abs();
    if scale > 0.0 && leak > 1e-9 * scale {
        return Err(AsymptoticError::OutsideKernel(leak / scale));
    }
    Ok(form.eval(u))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    /// Exponent `δ_v = ψ(v)`.
    pub delta_v: f64,
    pub kappa_v: f64,
    /// Norm of the mixing constant `|m_X|`.
    pub m_x_norm: f64,
    /// Fraction of holonomy patterns selected.
    pub theta_fraction: f64,
}

impl AsymptoticParams {
    pub fn new(
        delta_v: f64,
        kappa_v: f64,
        m_x_norm: f64,
        theta_fraction: f64,
    ) -> Result<Self, AsymptoticError> {
        if !(delta_v > 0.0) || !(kappa_v > 0.0) || !(m_x_norm > 0.0) {
            return Err(AsymptoticError::InvalidParameter(
                "δ_v, κ_v and |m_X| must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&theta_fraction) {
            return Err(AsymptoticError::InvalidParameter("θ fraction outside [0, 1]".into()));
        }
        Ok(Self {
            delta_v,
            kappa_v,
            m_x_norm,
            theta_fraction,
        })
    }

    /// Unit mixing constants, full holonomy.
    pub fn unit(delta_v: f64) -> Result<Self, AsymptoticError> {
        Self::new(delta_v, 1.0, 1.0, 1.0)
    }

    fn prefactor(&self) -> f64 {
        self.kappa_v / self.m_x_norm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrationMethod {
    Quadrature,
    MonteCarlo,
}

/// Node counts and sample sizes for the truncation integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Gauss–Legendre order per direction of `Q` (capped at 24 in the plane).
    pub q_order: usize,
    pub t_panels: usize,
    pub t_order: usize,
    pub hermite_order: usize,
    /// `t` is integrated over the last `window/δ` below the truncation.
    pub window: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            q_order: 64,
            t_panels: 12,
            t_order: 16,
            hermite_order: 24,
            window: 45.0,
            samples: 400_000,
            seed: 7,
        }
    }
}

/// Precomputed pieces of the Gaussian substitution on the hypertube frame.
struct Frame<'a> {
    h: &'a Hypertube,
    /// Lower Cholesky factor of `KᵀIK`.
    chol_l: DMatrix<f64>,
    /// `(KᵀIK)⁻¹ KᵀIW`.
    shift: DMatrix<f64>,
    /// `WᵀIW − (KᵀIW)ᵀ(KᵀIK)⁻¹KᵀIW`.
    schur: DMatrix<f64>,
    /// `π^{k/2}/√det(KᵀIK)`.
    gaussian: f64,
    /// `L^{-T}`.
    chol_lt_inv: DMatrix<f64>,
}

impl<'a> Frame<'a> {
    fn new(h: &'a Hypertube, form: &DefectForm) -> Result<Self, AsymptoticError> {
        let i = form.matrix();
        let w = h.w_basis();
        let k = h.k_basis();
        let kk = k.ncols();
        let p = w.transpose() * i * w;
        if kk == 0 {
            return Ok(Self {
                h,
                chol_l: DMatrix::zeros(0, 0),
                shift: DMatrix::zeros(0, w.ncols()),
                schur: p,
                gaussian: 1.0,
                chol_lt_inv: DMatrix::zeros(0, 0),
            });
        }
        let m = k.transpose() * i * k;
        let chol = Cholesky::<f64, Dyn>::new(m.clone()).ok_or(AsymptoticError::DegenerateDefect)?;
        let b = k.transpose() * i * w;
        let shift = chol.solve(&b);
        let schur = p - b.transpose() * &shift;
        let l = chol.l();
        let det_l: f64 = l.diagonal().iter().product();
        if !(det_l > 0.0) {
            return Err(AsymptoticError::DegenerateDefect);
        }
        let chol_lt_inv = l
            .transpose()
            .try_inverse()
            .ok_or(AsymptoticError::DegenerateDefect)?;
        Ok(Self {
            h,
            chol_l: l,
            shift,
            schur,
            gaussian: PI.powf(kk as f64 / 2.0) / det_l,
            chol_lt_inv,
        })
    }

    /// Point of `tv + √t u` for the Gaussian variable `z` (`e^{-|z|²}`).
    fn point(&self, q: &DVector<f64>, t: f64, z: &DVector<f64>) -> DVector<f64> {
        let h = self.h;
        let mut u = h.v() * t + h.w_basis() * q;
        if z.len() > 0 {
            let y = &self.chol_lt_inv * z * t.sqrt() - &self.shift * q;
            u += h.k_basis() * y;
        }
        u
    }

    /// `e^{-qᵀSq/t}`: the residual Gaussian factor after completing the
    /// square in the `K` directions.
    fn damping(&self, q: &DVector<f64>, t: f64) -> f64 {
        if q.len() == 0 {
            return 1.0;
        }
        (-(q.dot(&(&self.schur * q))) / t).exp()
    }
}

fn gl_nodes(order: usize) -> Result<Vec<(f64, f64)>, AsymptoticError> {
    Ok(GaussLegendre::new(order.max(2))
        .map_err(|e| AsymptoticError::Rule(e.to_string()))?
        .as_node_weight_pairs()
        .to_vec())
}

fn gh_product(order: usize, k: usize) -> Result<Vec<(DVector<f64>, f64)>, AsymptoticError> {
    if k == 0 {
        return Ok(vec![(DVector::zeros(0), 1.0)]);
    }
    let rule = GaussHermite::new(order.max(2)).map_err(|e| AsymptoticError::Rule(e.to_string()))?;
    let nodes = rule.as_node_weight_pairs();
    let mut out = vec![(Vec::new(), 1.0)];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * nodes.len());
        for (p, w) in &out {
            for &(x, wx) in nodes {
                let mut q: Vec<f64> = p.clone();
                q.push(x);
                next.push((q, w * wx));
            }
        }
        out = next;
    }
    Ok(out
        .into_iter()
        .map(|(p, w)| (DVector::from_vec(p), w))
        .collect())
}

/// Split of the scaled integral `∫∫ f_T` by where `w = q√(T/t)` falls:
/// inside `Q` (`a`), in `hull(Q ∪ {0}) − Q` (`b`), elsewhere (`c`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegralSplit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl IntegralSplit {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c
    }
}

fn classify(q_poly: &Polytope, w: &DVector<f64>) -> usize {
    if q_poly.dim() == 0 || q_poly.contains(w, 1e-12) {
        return 0;
    }
    // w ∈ hull(Q ∪ {0}) iff λw ∈ Q for some λ ≥ 1.
    let (mut lo, mut hi) = (1.0f64, f64::INFINITY);
    for (a, c) in q_poly.halfspaces() {
        let s = a.dot(w);
        if s > 0.0 {
            hi = hi.min(c / s);
        } else if s < 0.0 {
            lo = lo.max(c / s);
        } else if c < 0.0 {
            return 2;
        }
    }
    if lo <= hi {
        1
    } else {
        2
    }
}

fn q_nodes(
    q: &Polytope,
    b: &OffsetFunction,
    order: usize,
) -> Result<Vec<(DVector<f64>, f64, f64)>, AsymptoticError> {
    let order = if q.dim() >= 2 { order.min(24) } else { order };
    let mut out = Vec::new();
    for (cell, piece) in b.cells(q) {
        for (x, w) in cell.quadrature(order)? {
            let bx = piece.eval(&x);
            out.push((x, w, bx));
        }
    }
    Ok(out)
}

/// `L(T_{T,b}(v)) e^{−δT}` split by the position of `w`, by tensor-product
/// Gauss rules: Legendre over the cells of `Q` where `b` is affine,
/// composite Legendre in `t`, Hermite in the `K` directions after completing
/// the square.
pub fn integral_split(
    h: &Hypertube,
    spec: &TruncationSpec,
    params: &AsymptoticParams,
    form: &DefectForm,
    budget: &Budget,
) -> Result<IntegralSplit, AsymptoticError> {
    let frame = Frame::new(h, form)?;
    let delta = params.delta_v;
    let m = h.q().dim() as f64;
    let big_t = spec.t;
    let qn = q_nodes(h.q(), &spec.b, budget.q_order)?;
    let tn = gl_nodes(budget.t_order)?;
    let zn = gh_product(budget.hermite_order, h.k_basis().ncols())?;
    let parts: Vec<[f64; 3]> = qn
        .par_iter()
        .map(|(q, wq, bq)| {
            let mut acc = [0.0f64; 3];
            let hi = big_t + bq;
            if hi <= 0.0 {
                return acc;
            }
            let lo = (hi - budget.window / delta).max(0.0);
            let width = (hi - lo) / budget.t_panels as f64;
            for p in 0..budget.t_panels {
                let a = lo + width * p as f64;
                for &(x, wx) in &tn {
                    let (t, wt) = if a == 0.0 {
                        // t = width σ² removes the t^{-m/2} endpoint singularity.
                        let sigma = 0.5 * (x + 1.0);
                        (width * sigma * sigma, wx * width * sigma)
                    } else {
                        (a + 0.5 * width * (x + 1.0), 0.5 * width * wx)
                    };
                    if t <= 0.0 {
                        continue;
                    }
                    let base = wq * wt * (delta * (t - big_t)).exp() * t.powf(-m / 2.0) * frame.damping(q, t);
                    if base == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (z, wz) in &zn {
                        if h.cone().facet_margin(&frame.point(q, t, z)) >= 0.0 {
                            inner += wz;
                        }
                    }
                    let w = q * (big_t / t).sqrt();
                    acc[classify(h.q(), &w)] += base * inner / frame.chol_det_scale();
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0f64; 3];
    for p in parts {
        for j in 0..3 {
            total[j] += p[j];
        }
    }
    let pre = params.prefactor() * big_t.powf(m / 2.0);
    Ok(IntegralSplit {
        a: total[0] * pre,
        b: total[1] * pre,
        c: total[2] * pre,
    })
}

impl Frame<'_> {
    fn chol_det_scale(&self) -> f64 {
        if self.chol_l.nrows() == 0 {
            1.0
        } else {
            self.chol_l.diagonal().iter().product()
        }
    }
}

/// `L(T_{T,b}(v)) e^{−δT}`.
pub fn integral_l_scaled(
    h: &Hypertube,
    spec: &TruncationSpec,
    params: &AsymptoticParams,
    form: &DefectForm,
    method: IntegrationMethod,
    budget: &Budget,
) -> Result<f64, AsymptoticError> {
    let m = h.q().dim() as f64;
    match method {
        IntegrationMethod::Quadrature => Ok(integral_split(h, spec, params, form, budget)?.total()
            / spec.t.powf(m / 2.0).max(f64::MIN_POSITIVE)),
        IntegrationMethod::MonteCarlo => monte_carlo(h, spec, params, form, budget),
    }
}

/// `L(T_{T,b}(v)) = (κ/|m|) ∫_{tv+√t u ∈ T_{T,b}} e^{δt} e^{−I(u)} dt du`.
pub fn integral_l(
    h: &Hypertube,
    spec: &TruncationSpec,
    params: &AsymptoticParams,
    form: &DefectForm,
    method: IntegrationMethod,
    budget: &Budget,
) -> Result<f64, AsymptoticError> {
    Ok(integral_l_scaled(h, spec, params, form, method, budget)? * (params.delta_v * spec.t).exp())
}

/// Runs both methods and fails when they differ by more than `rel_tol`.
pub fn integral_l_checked(
    h: &Hypertube,
    spec: &TruncationSpec,
    params: &AsymptoticParams,
    form: &DefectForm,
    budget: &Budget,
    rel_tol: f64,
) -> Result<f64, AsymptoticError> {
    let qv = integral_l_scaled(h, spec, params, form, IntegrationMethod::Quadrature, budget)?;
    let mc = integral_l_scaled(h, spec, params, form, IntegrationMethod::MonteCarlo, budget)?;
    if (qv - mc).abs() > rel_tol * qv.abs().max(mc.abs()) {
        return Err(AsymptoticError::Disagreement {
            quadrature: qv,
            monte_carlo: mc,
        });
    }
    Ok(qv * (params.delta_v * spec.t).exp())
}

fn bounding_box(q: &Polytope) -> (Vec<f64>, Vec<f64>) {
    let m = q.dim();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in q.vertices() {
        for j in 0..m {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    (lo, hi)
}

const MC_BLOCK: usize = 4096;

/// Uniform `q`, exponentially tilted `t`, Gaussian `z`; blocks of samples use
/// independent streams so the result does not depend on the thread count.
fn monte_carlo(
    h: &Hypertube,
    spec: &TruncationSpec,
    params: &AsymptoticParams,
    form: &DefectForm,
    budget: &Budget,
) -> Result<f64, AsymptoticError> {
    let frame = Frame::new(h, form)?;
    let delta = params.delta_v;
    let q = h.q();
    let m = q.dim();
    let k = h.k_basis().ncols();
    let vol = if m == 0 { 1.0 } else { q.volume() };
    let (lo, hi) = bounding_box(q);
    let exp = Exp::new(delta).map_err(|e| AsymptoticError::InvalidParameter(e.to_string()))?;
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2)
        .map_err(|e| AsymptoticError::InvalidParameter(e.to_string()))?;
    let blocks = budget.samples.div_ceil(MC_BLOCK).max(1);
    let sums: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
            rng.set_stream(blk as u64);
            let n = MC_BLOCK.min(budget.samples.saturating_sub(blk * MC_BLOCK)).max(1);
            let mut s = 0.0;
            for _ in 0..n {
                let qx = loop {
                    let x = DVector::from_fn(m, |j, _| rng.random_range(lo[j]..=hi[j]));
                    if m == 0 || q.contains(&x, 0.0) {
                        break x;
                    }
                };
                let bq = spec.b.eval(&qx);
                let tau: f64 = exp.sample(&mut rng);
                let t = spec.t + bq - tau;
                if t <= 0.0 {
                    continue;
                }
                let z = DVector::from_fn(k, |_, _| normal.sample(&mut rng));
                if h.cone().facet_margin(&frame.point(&qx, t, &z)) < 0.0 {
                    continue;
                }
                s += (delta * bq).exp() / delta * t.powf(-(m as f64) / 2.0) * frame.damping(&qx, t);
            }
            s
        })
        .collect();
    let total: f64 = sums.iter().sum();
    let n = budget.samples.max(1) as f64;
    Ok(params.prefactor() * vol * frame.gaussian * total / n)
}

/// `∫_{V ∩ ker ψ_v} e^{−I}` in closed form.
pub fn gaussian_factor(h: &Hypertube, form: &DefectForm) -> Result<f64, AsymptoticError> {
    Ok(Frame::new(h, form)?.gaussian)
}

/// Importance-sampled `∫_{V ∩ ker ψ_v} e^{−I}` with a standard normal proposal.
pub fn gaussian_factor_mc(
    h: &Hypertube,
    form: &DefectForm,
    samples: usize,
    seed: u64,
) -> Result<f64, AsymptoticError> {
    let k = h.k_basis();
    if k.ncols() == 0 {
        return Ok(1.0);
    }
    let m = k.transpose() * form.matrix() * k;
    let scale = 1.0 / m.symmetric_eigenvalues().min().max(1e-12).sqrt();
    let normal = Normal::new(0.0, scale).map_err(|e| AsymptoticError::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = k.ncols() as f64;
    let norm = (2.0 * PI * scale * scale).powf(dim / 2.0);
    let mut s = 0.0;
    for _ in 0..samples {
        let y = DVector::from_fn(k.ncols(), |_, _| normal.sample(&mut rng));
        let pdf = (-y.norm_squared() / (2.0 * scale * scale)).exp() / norm;
        s += (-y.dot(&(&m * &y))).exp() / pdf;
    }
    Ok(s / samples as f64)
}

/// `c(T, v, b) = κ/(δ|m|) · ∫_{V ∩ ker ψ_v} e^{−I} · ∫_Q e^{δ b}`.
pub fn constant_c(
    h: &Hypertube,
    b: &OffsetFunction,
    params: &AsymptoticParams,
    form: &DefectForm,
) -> Result<f64, AsymptoticError> {
    let g = gaussian_factor(h, form)?;
    let q_int: f64 = q_nodes(h.q(), b, 64)?
        .iter()
        .map(|(_, w, bq)| w * (params.delta_v * bq).exp())
        .sum();
    Ok(params.prefactor() / params.delta_v * g * q_int)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub t: f64,
    /// `L e^{−δT}`.
    pub l_scaled: f64,
    pub c: f64,
    pub ratio: f64,
    pub split: IntegralSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    /// `|ratio − 1|` at the last grid point.
    pub final_deviation: f64,
    /// Number of tail steps where the deviation grew by more than the slack.
    pub tail_increases: usize,
}

/// `ratio(T) = L(T) T^{(d−1)/2} e^{−δT} / c` along an increasing grid.
pub fn ratio_convergence_check(
    h: &Hypertube,
    b: &OffsetFunction,
    psi_v: &DVector<f64>,
    t_grid: &[f64],
    params: &AsymptoticParams,
    form: &DefectForm,
    budget: &Budget,
) -> Result<RatioReport, AsymptoticError> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AsymptoticError::InvalidParameter("T grid must increase".into()));
    }
    let c = constant_c(h, b, params, form)?;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let spec = TruncationSpec::new(h, b.clone(), t, psi_v)?;
        let split = integral_split(h, &spec, params, form, budget)?;
        let m = h.q().dim() as f64;
        let l_scaled = split.total() / t.powf(m / 2.0);
        rows.push(RatioRow {
            t,
            l_scaled,
            c,
            ratio: split.total() / c,
            split,
        });
    }
    let devs: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    let tail = devs.len() / 2;
    let tail_increases = devs[tail..]
        .windows(2)
        .filter(|w| w[1] > w[0] + 1e-3)
        .count();
    Ok(RatioReport {
        final_deviation: devs.last().copied().unwrap_or(f64::NAN),
        rows,
        tail_increases,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictionKind {
    /// Classes with Jordan projection in a truncation.
    Jordan,
    /// Elements with Cartan projection in a truncation.
    Cartan,
    /// Classes with `φ(λ)` in the box.
    CorrelationJordan,
    /// Elements with `φ(μ)` in the box.
    CorrelationCartan,
}

/// Closed-form count asymptotic at scale `t` for a hypertube with `d − 1`
/// transversal directions.
pub fn predict_counts(
    kind: PredictionKind,
    params: &AsymptoticParams,
    c: f64,
    c_upper: f64,
    c_lower: f64,
    d: usize,
    t: f64,
) -> f64 {
    let growth = (params.delta_v * t).exp();
    let jordan_exp = (d as f64 + 1.0) / 2.0;
    let cartan_exp = (d as f64 - 1.0) / 2.0;
    let jordan_scale = params.m_x_norm * params.theta_fraction;
    match kind {
        PredictionKind::Jordan => c * jordan_scale * growth / t.powf(jordan_exp),
        PredictionKind::Cartan => c * growth / t.powf(cartan_exp),
        PredictionKind::CorrelationJordan => {
            (c_upper - c_lower) * jordan_scale * growth / t.powf(jordan_exp)
        }
        PredictionKind::CorrelationCartan => {
            (c_upper - c_lower) / params.m_x_norm * growth / t.powf(cartan_exp)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub c: f64,
    pub ratio: f64,
    pub prediction_jordan: f64,
    pub prediction_cartan: f64,
}

/// Prediction table from a ratio report: truncation predictions use `c` of
/// the report's offset.
pub fn prediction_table(report: &RatioReport, params: &AsymptoticParams, d: usize) -> Vec<PredictionRow> {
    report
        .rows
        .iter()
        .map(|r| PredictionRow {
            t: r.t,
            l: r.l_scaled * (params.delta_v * r.t).exp(),
            c: r.c,
            ratio: r.ratio,
            prediction_jordan: predict_counts(PredictionKind::Jordan, params, r.c, 0.0, 0.0, d, r.t),
            prediction_cartan: predict_counts(PredictionKind::Cartan, params, r.c, 0.0, 0.0, d, r.t),
        })
        .collect()
}

pub fn prediction_csv(rows: &[PredictionRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reference instance on the rank-3 orthant: `φ = (w₁, w₂ + w₃)`,
/// `r = (1, 2)`, `ε = (½, ½)`, `ψ_v = (w₁ + w₂ + w₃)/3`, `v = (1, 1, 1)`, and
/// the cone spanned by `(1, .2, .2)` and its permutations, dilated by
/// `cone_dilation` about its center.
pub fn synthetic_decomposition(cone_dilation: f64) -> Result<BoxDecomposition, AsymptoticError> {
    let space = ChamberSpace::orthant(3)?;
    let phi = LinearMapPhi::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]])
        .map_err(TubeError::from)?;
    let family = BoxFamily::new(phi, vec![1.0, 2.0], vec![0.5, 0.5])?;
    let mut cone = PolyCone::from_generators(&[
        DVector::from_vec(vec![1.0, 0.2, 0.2]),
        DVector::from_vec(vec![0.2, 1.0, 0.2]),
        DVector::from_vec(vec![0.2, 0.2, 1.0]),
    ])?;
    if cone_dilation != 1.0 {
        cone = cone.dilated(cone_dilation)?;
    }
    let psi = LinearFunctional::new(vec![1.0 / 3.0; 3]).map_err(TubeError::from)?;
    Ok(build_from_box_family(&family, &space, &[1.0, 1.0, 1.0], &psi, &cone, 1e-9)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypertube::BoxDecomposition;

    fn synthetic() -> BoxDecomposition {
        synthetic_decomposition(1.0).unwrap()
    }

    #[test]
    fn defect_basics() {
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let form = DefectForm::euclidean(v.clone());
        let psi = v.clone() / 3.0;
        let u = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        assert_eq!(defect(&form, &psi, &DVector::zeros(3)).unwrap(), 0.0);
        assert!((defect(&form, &psi, &u).unwrap() - 2.0).abs() < 1e-12);
        assert!((defect(&form, &psi, &(&u * 3.0)).unwrap() - 18.0).abs() < 1e-12);
        assert!(defect(&form, &psi, &v).is_err());
    }

    #[test]
    fn constant_scales() {
        let dec = synthetic();
        let form = DefectForm::euclidean(dec.tube.v().clone());
        let p = AsymptoticParams::unit(1.0).unwrap();
        let c = constant_c(&dec.tube, &dec.upper, &p, &form).unwrap();
        let c2 = constant_c(&dec.tube, &dec.upper.shifted(0.5), &p, &form).unwrap();
        assert!((c2 / c - 0.5f64.exp()).abs() < 1e-10);
        let p2 = AsymptoticParams::new(1.0, 2.0, 4.0, 1.0).unwrap();
        let c3 = constant_c(&dec.tube, &dec.upper, &p2, &form).unwrap();
        assert!((c3 / c - 0.5).abs() < 1e-12);
        let zero = OffsetFunction::constant(dec.tube.q().dim(), 0.0);
        let g = gaussian_factor(&dec.tube, &form).unwrap();
        let c0 = constant_c(&dec.tube, &zero, &p, &form).unwrap();
        assert!((c0 - g * dec.tube.q().volume()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_factor_matches_sampling() {
        let dec = synthetic();
        let form = DefectForm::euclidean(dec.tube.v().clone());
        let g = gaussian_factor(&dec.tube, &form).unwrap();
        let mc = gaussian_factor_mc(&dec.tube, &form, 200_000, 1).unwrap();
        assert!((g - mc).abs() / g < 5e-3, "{g} {mc}");
    }

    #[test]
    fn methods_agree_and_ratio_converges() {
        let dec = synthetic();
        let form = DefectForm::euclidean(dec.tube.v().clone());
        let p = AsymptoticParams::unit(1.0).unwrap();
        let budget = Budget::default();
        let spec = dec.spec_upper(120.0).unwrap();
        let q = integral_l_scaled(&dec.tube, &spec, &p, &form, IntegrationMethod::Quadrature, &budget)
            .unwrap();
        let mc = integral_l_scaled(&dec.tube, &spec, &p, &form, IntegrationMethod::MonteCarlo, &budget)
            .unwrap();
        assert!((q - mc).abs() / q < 0.01, "{q} {mc}");
        let rep = ratio_convergence_check(
            &dec.tube,
            &dec.upper,
            &dec.psi_v,
            &[40.0, 80.0, 160.0],
            &p,
            &form,
            &budget,
        )
        .unwrap();
        assert!(rep.final_deviation < 0.02, "{rep:?}");
    }

    #[test]
    fn prediction_closed_forms() {
        let p = AsymptoticParams::new(0.8, 1.0, 2.0, 0.5).unwrap();
        let j = predict_counts(PredictionKind::Jordan, &p, 3.0, 0.0, 0.0, 2, 10.0);
        let c = predict_counts(PredictionKind::Cartan, &p, 3.0, 0.0, 0.0, 2, 10.0);
        assert!((c / j - 10.0 / (2.0 * 0.5)).abs() < 1e-9);
        let shifted = predict_counts(PredictionKind::Cartan, &p, 3.0, 0.0, 0.0, 2, 12.0);
        let expect = c * (0.8f64 * 2.0).exp() * (10.0f64 / 12.0).powf(0.5);
        assert!((shifted - expect).abs() < 1e-9 * expect);
    }
}
