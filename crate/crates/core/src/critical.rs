//! The critical vector: the maximizer of a concave homogeneous model on an
//! affine slice `{φ = r}` of a cone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chamber::ChamberSpace;
use crate::cone::{ConeError, LinearFunctional, LinearMapPhi};
use crate::linalg::{min_norm_solution, nnls, null_space};
use crate::polyhedral::{GeometryError, PolyCone};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalError {
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("r = {0:?} is not in the interior of the projected cone")]
    OutsideProjectedCone(Vec<f64>),
    #[error("ascent left the cone interior")]
    LeftCone,
    #[error("no convergence within {iterations} iterations (kernel residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("multistart seeds disagree by {spread:e}")]
    NonUnique { spread: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// A degree-one homogeneous concave function on intrinsic coordinates.
pub trait ConcaveModel: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &DVector<f64>) -> f64;

    /// Central differences with a relative step of `10⁻⁵` unless overridden.
    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let h = 1e-5 * w.norm().max(1e-8);
        DVector::from_fn(w.len(), |i, _| {
            let mut p = w.clone();
            let mut m = w.clone();
            p[i] += h;
            m[i] -= h;
            (self.value(&p) - self.value(&m)) / (2.0 * h)
        })
    }
}

/// `scale · (w₁⋯wₙ)^{1/n}` on the open positive orthant.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricMeanModel {
    pub scale: f64,
    pub dim: usize,
}

impl ConcaveModel for GeometricMeanModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        if w.iter().any(|&x| x <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let n = w.len() as f64;
        self.scale * (w.iter().map(|x| x.ln()).sum::<f64>() / n).exp()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let v = self.value(w);
        let n = w.len() as f64;
        w.map(|x| v / (n * x))
    }
}

/// A linear functional viewed as a (flat) concave model.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub coefficients: DVector<f64>,
}

impl ConcaveModel for LinearModel {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        self.coefficients.dot(w)
    }

    fn gradient(&self, _w: &DVector<f64>) -> DVector<f64> {
        self.coefficients.clone()
    }
}

/// Maximize `model` over `{w ∈ cone : φ w = r}`, all in intrinsic coordinates.
pub struct CriticalVectorProblem<'a> {
    model: &'a dyn ConcaveModel,
    space: ChamberSpace,
    phi: DMatrix<f64>,
    r: DVector<f64>,
    cone: PolyCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalVectorResult {
    /// Concatenated chamber coordinates.
    pub v_star: Vec<f64>,
    #[serde(skip)]
    pub v_intrinsic: DVector<f64>,
    /// `ψ(v⋆) = δ`.
    pub value: f64,
    pub tangent: LinearFunctional,
    #[serde(skip)]
    pub tangent_intrinsic: DVector<f64>,
    pub kernel_residual: f64,
    /// The cone constraint was binding when the ascent stopped.
    pub boundary_active: bool,
    /// Largest distance between multistart solutions, relative to `‖v⋆‖`.
    pub seed_spread: f64,
}

impl<'a> CriticalVectorProblem<'a> {
    pub fn new(
        model: &'a dyn ConcaveModel,
        space: &ChamberSpace,
        phi: &LinearMapPhi,
        r: &[f64],
        cone: &PolyCone,
    ) -> Result<Self, CriticalError> {
        let m = phi.intrinsic(space)?;
        if r.len() != phi.d() {
            return Err(CriticalError::Dimension(format!(
                "r has {} entries, φ has {} rows",
                r.len(),
                phi.d()
            )));
        }
        if model.dim() != space.rank() || cone.dim() != space.rank() {
            return Err(CriticalError::Dimension(
                "model, cone and chamber space disagree".into(),
            ));
        }
        let r = DVector::from_column_slice(r);
        let images: Vec<DVector<f64>> = cone.rays().iter().map(|x| &m * x).collect();
        let image = PolyCone::from_generators(&images)
            .map_err(|_| CriticalError::OutsideProjectedCone(r.iter().copied().collect()))?;
        if image.span_dim() != phi.d() || image.facet_margin(&r.normalize()) <= 1e-12 {
            return Err(CriticalError::OutsideProjectedCone(r.iter().copied().collect()));
        }
        Ok(Self {
            model,
            space: space.clone(),
            phi: m,
            r,
            cone: cone.clone(),
        })
    }

    pub fn phi_intrinsic(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn kernel_basis(&self) -> DMatrix<f64> {
        null_space(&self.phi, 1e-12)
    }

    fn residual_of(&self, tangent: &DVector<f64>) -> f64 {
        let k = self.kernel_basis();
        let n = tangent.norm().max(1e-300);
        (0..k.ncols())
            .map(|j| tangent.dot(&k.column(j)).abs() / n)
            .fold(0.0, f64::max)
    }

    /// Result record (tangent, residual) at an arbitrary feasible point.
    pub fn evaluate_at(&self, v: &DVector<f64>) -> CriticalVectorResult {
        let tangent = self.model.gradient(v);
        CriticalVectorResult {
            v_star: self.space.to_ambient(v),
            v_intrinsic: v.clone(),
            value: self.model.value(v),
            tangent: LinearFunctional::raw(self.space.functional_to_ambient(&tangent)),
            kernel_residual: self.residual_of(&tangent),
            tangent_intrinsic: tangent,
            boundary_active: false,
            seed_spread: 0.0,
        }
    }

    /// Feasible point with all ray weights at least `η`, found by NNLS.
    fn interior_point(&self, weights: &DVector<f64>) -> Option<DVector<f64>> {
        let rays = self.cone.rays();
        let dim = self.space.rank();
        let rmat = DMatrix::from_fn(dim, rays.len(), |i, j| rays[j][i]);
        let a = &self.phi * &rmat;
        let base = &a * weights;
        let tau = self.r.norm() / base.norm().max(1e-300);
        let mut eta = 0.5 * tau;
        for _ in 0..60 {
            let target = &self.r - &base * eta;
            let mu = nnls(&a, &target);
            if (&a * &mu - &target).norm() <= 1e-11 * self.r.norm().max(1.0) {
                let lam = weights * eta + mu;
                return Some(&rmat * lam);
            }
            eta *= 0.5;
        }
        None
    }

    fn ascend(&self, start: DVector<f64>, tol: f64) -> Result<(DVector<f64>, bool), CriticalError> {
        let k = self.kernel_basis();
        let mut w = start;
        let mut f = self.model.value(&w);
        let mut step = 0.1 * w.norm();
        let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
        let mut blocked;
        let max_iter = 20_000;
        for _ in 0..max_iter {
            let grad = self.model.gradient(&w);
            let g = k.transpose() * &grad;
            let gnorm = g.norm();
            if gnorm <= 1e-3 * tol * grad.norm() {
                return Ok((w, false));
            }
            // Barzilai–Borwein initial step.
            if let Some((pz, pg)) = &prev {
                let s = k.transpose() * (&w - pz);
                let y = &g - pg;
                let sy = s.dot(&y);
                if sy < 0.0 {
                    step = (s.dot(&s) / -sy).min(10.0 * w.norm() / gnorm);
                }
            } else {
                step = 0.1 * w.norm() / gnorm;
            }
            let dir = &k * &g;
            let mut alpha = step;
            let mut accepted = false;
            blocked = false;
            for _ in 0..80 {
                let cand = &w + &dir * alpha;
                if self.cone.facet_margin(&cand) <= 1e-12 * cand.norm() {
                    blocked = true;
                    alpha *= 0.5;
                    continue;
                }
                let fc = self.model.value(&cand);
                if fc >= f + 1e-4 * alpha * gnorm * gnorm {
                    prev = Some((w.clone(), g.clone()));
                    w = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                let residual = self.residual_of(&grad);
                if residual <= tol {
                    return Ok((w, false));
                }
                if blocked {
                    return Ok((w, true));
                }
                return Err(CriticalError::NoConvergence {
                    iterations: max_iter,
                    residual,
                });
            }
        }
        let residual = self.residual_of(&self.model.gradient(&w));
        if residual <= tol {
            Ok((w, false))
        } else {
            Err(CriticalError::NoConvergence {
                iterations: max_iter,
                residual,
            })
        }
    }

    fn seeds(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let nrays = self.cone.rays().len();
        let mut out = Vec::with_capacity(count);
        // Seed 0: minimum-norm feasible point, blended toward an interior point.
        if let Some(p0) = self.interior_point(&DVector::from_element(nrays, 1.0)) {
            let w0 = min_norm_solution(&self.phi, &self.r).unwrap_or_else(|| p0.clone());
            let target = 0.5 * self.cone.facet_margin(&p0.normalize());
            let at = |theta: f64| &w0 * (1.0 - theta) + &p0 * theta;
            let mut lo = 0.0;
            if self.cone.facet_margin(&w0.normalize()) < target {
                let (mut a, mut b) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if self.cone.facet_margin(&at(mid).normalize()) >= target {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                lo = b;
            }
            out.push(at(lo));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tries = 0;
        while out.len() < count && tries < 20 * count {
            tries += 1;
            let weights = DVector::from_fn(nrays, |_, _| rng.random_range(0.05..1.0));
            if let Some(p) = self.interior_point(&weights) {
                out.push(p);
            }
        }
        out
    }

    /// Multistart projected gradient ascent on the slice.
    pub fn solve(&self, tol: f64) -> Result<CriticalVectorResult, CriticalError> {
        let k = self.kernel_basis();
        if k.ncols() == 0 {
            let v = self
                .phi
                .clone()
                .lu()
                .solve(&self.r)
                .ok_or_else(|| CriticalError::Dimension("φ is not invertible".into()))?;
            if self.cone.facet_margin(&v) < -1e-12 * v.norm() {
                return Err(CriticalError::OutsideProjectedCone(self.r.iter().copied().collect()));
            }
            return Ok(self.evaluate_at(&v));
        }
        let seeds = self.seeds(5, 0x5eed);
        if seeds.is_empty() {
            return Err(CriticalError::OutsideProjectedCone(self.r.iter().copied().collect()));
        }
        let mut sols = Vec::with_capacity(seeds.len());
        for s in seeds {
            sols.push(self.ascend(s, tol)?);
        }
        let scale = sols[0].0.norm().max(1e-300);
        let mut spread: f64 = 0.0;
        for a in &sols {
            for b in &sols {
                spread = spread.max((&a.0 - &b.0).norm() / scale);
            }
        }
        let best = sols
            .iter()
            .max_by(|a, b| {
                let fa = self.model.value(&a.0);
                let fb = self.model.value(&b.0);
                fa.total_cmp(&fb).then_with(|| {
                    b.0.iter()
                        .zip(a.0.iter())
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            })
            .expect("at least one seed");
        let mut result = self.evaluate_at(&best.0);
        result.boundary_active = sols.iter().any(|s| s.1);
        result.seed_spread = spread;
        if spread > 10.0 * tol && !result.boundary_active {
            return Err(CriticalError::NonUnique { spread });
        }
        Ok(result)
    }
}

/// Solves with the default chamber-space conversions.
pub fn solve_critical_vector(
    problem: &CriticalVectorProblem<'_>,
    tol: f64,
) -> Result<CriticalVectorResult, CriticalError> {
    problem.solve(tol)
}

/// `|tangent(u)| ≤ tol · ‖tangent‖ · ‖u‖` for a basis `u` of `ker φ`.
pub fn verify_kernel_inclusion(
    tangent: &LinearFunctional,
    phi: &LinearMapPhi,
    space: &ChamberSpace,
    tol: f64,
) -> Result<bool, CriticalError> {
    let m = phi.intrinsic(space)?;
    let t = space.functional_to_intrinsic(tangent.coefficients())?;
    let k = null_space(&m, 1e-12);
    let n = t.norm();
    Ok((0..k.ncols()).all(|j| t.dot(&k.column(j)).abs() <= tol * n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta: f64,
    /// `min_i δ_i r_i`.
    pub bound: f64,
    pub satisfied: bool,
    /// All `δ_i r_i` agree, so the inequality is expected to be strict.
    pub strict_expected: bool,
    pub margin: f64,
}

/// Compares `ψ(v⋆)` with the per-factor bound `min_i δ_i r_i`.
pub fn sup_value_bound_check(
    delta: f64,
    per_factor_deltas: &[f64],
    r: &[f64],
    slack: f64,
) -> BoundReport {
    let products: Vec<f64> = per_factor_deltas.iter().zip(r).map(|(d, r)| d * r).collect();
    let bound = products.iter().copied().fold(f64::INFINITY, f64::min);
    let top = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BoundReport {
        delta,
        bound,
        satisfied: delta <= bound + slack,
        strict_expected: products.len() > 1 && top - bound <= slack,
        margin: bound - delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrant() -> (ChamberSpace, PolyCone) {
        let space = ChamberSpace::orthant(2).unwrap();
        let cone = PolyCone::from_generators(&[
            DVector::from_vec(vec![1.0, 0.05]),
            DVector::from_vec(vec![0.05, 1.0]),
        ])
        .unwrap();
        (space, cone)
    }

    #[test]
    fn synthetic_square_root() {
        let (space, cone) = quadrant();
        let model = GeometricMeanModel { scale: 2.0, dim: 2 };
        let phi = LinearMapPhi::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = CriticalVectorProblem::new(&model, &space, &phi, &[1.0], &cone).unwrap();
        let res = p.solve(1e-6).unwrap();
        assert!((res.v_star[0] - 0.5).abs() < 1e-6 && (res.v_star[1] - 0.5).abs() < 1e-6);
        assert!((res.value - 1.0).abs() < 1e-9);
        assert!(res.kernel_residual < 1e-6);
        assert!(res.seed_spread < 1e-5);
        assert!(verify_kernel_inclusion(&res.tangent, &phi, &space, 1e-6).unwrap());
        let off = p.evaluate_at(&DVector::from_vec(vec![0.55, 0.45]));
        assert!(!verify_kernel_inclusion(&off.tangent, &phi, &space, 1e-6).unwrap());
    }

    #[test]
    fn tube_case_is_preimage() {
        let (space, cone) = quadrant();
        let model = GeometricMeanModel { scale: 2.0, dim: 2 };
        let phi = LinearMapPhi::from_rows(vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let res = CriticalVectorProblem::new(&model, &space, &phi, &[0.3, 1.0], &cone)
            .unwrap()
            .solve(1e-9)
            .unwrap();
        assert_eq!(res.v_star, vec![0.3, 0.7]);
        assert_eq!(res.kernel_residual, 0.0);
    }

    #[test]
    fn outside_projected_cone() {
        let (space, cone) = quadrant();
        let model = GeometricMeanModel { scale: 2.0, dim: 2 };
        let phi = LinearMapPhi::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            CriticalVectorProblem::new(&model, &space, &phi, &[-1.0], &cone),
            Err(CriticalError::OutsideProjectedCone(_))
        ));
    }

    #[test]
    fn bound_report() {
        let rep = sup_value_bound_check(0.8, &[1.0, 1.0], &[1.0, 1.0], 1e-3);
        assert!(rep.satisfied && rep.strict_expected);
        let rep = sup_value_bound_check(0.8, &[1.0, 2.0], &[1.0, 1.0], 1e-3);
        assert!(!rep.strict_expected);
        assert_eq!(rep.bound, 1.0);
    }
}
