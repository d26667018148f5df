//! Product chamber spaces and their intrinsic coordinates.
//!
//! A chamber vector of an `SL_n` factor is a trace-zero `n`-tuple, so the
//! concatenated projections of a tuple of representations live in a proper
//! subspace of the ambient coordinates. Geometry (cones, slices, integrals)
//! runs in an orthonormal basis of that subspace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::polyhedral::GeometryError;

/// One factor of a product chamber space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    /// Trace-zero `n`-tuples with nonincreasing entries.
    SpecialLinear(usize),
    /// Plain `R^m` with the positive orthant as chamber (synthetic models).
    Orthant(usize),
}

impl Factor {
    pub fn ambient_dim(self) -> usize {
        match self {
            Factor::SpecialLinear(n) | Factor::Orthant(n) => n,
        }
    }

    pub fn rank(self) -> usize {
        match self {
            Factor::SpecialLinear(n) => n - 1,
            Factor::Orthant(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChamberSpace {
    factors: Vec<Factor>,
    embed: DMatrix<f64>,
    walls: DMatrix<f64>,
}

fn helmert(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, j| {
        let k = (j + 1) as f64;
        let scale = (k * (k + 1.0)).sqrt();
        if i <= j {
            1.0 / scale
        } else if i == j + 1 {
            -k / scale
        } else {
            0.0
        }
    })
}

impl ChamberSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self, GeometryError> {
        if factors.is_empty() {
            return Err(GeometryError::Invalid("no factors".into()));
        }
        if factors.iter().any(|f| match f {
            Factor::SpecialLinear(n) => *n < 2,
            Factor::Orthant(m) => *m < 1,
        }) {
            return Err(GeometryError::Invalid("factor of dimension too small".into()));
        }
        let ambient: usize = factors.iter().map(|f| f.ambient_dim()).sum();
        let rank: usize = factors.iter().map(|f| f.rank()).sum();
        let mut embed = DMatrix::zeros(ambient, rank);
        let mut wall_rows: Vec<DVector<f64>> = Vec::new();
        let (mut row, mut col) = (0, 0);
        for f in &factors {
            let block = match f {
                Factor::SpecialLinear(n) => helmert(*n),
                Factor::Orthant(m) => DMatrix::identity(*m, *m),
            };
            embed
                .view_mut((row, col), (block.nrows(), block.ncols()))
                .copy_from(&block);
            match f {
                Factor::SpecialLinear(n) => {
                    for j in 0..n - 1 {
                        let mut a = DVector::zeros(ambient);
                        a[row + j] = 1.0;
                        a[row + j + 1] = -1.0;
                        wall_rows.push(a);
                    }
                }
                Factor::Orthant(m) => {
                    for j in 0..*m {
                        let mut a = DVector::zeros(ambient);
                        a[row + j] = 1.0;
                        wall_rows.push(a);
                    }
                }
            }
            row += f.ambient_dim();
            col += f.rank();
        }
        let mut walls = DMatrix::zeros(wall_rows.len(), rank);
        for (i, a) in wall_rows.iter().enumerate() {
            let w = embed.transpose() * a;
            let n = w.norm();
            walls.set_row(i, &(w / n).transpose());
        }
        Ok(Self {
            factors,
            embed,
            walls,
        })
    }

    /// Product of `SL_n` chambers for the given block sizes.
    pub fn special_linear(dims: &[usize]) -> Result<Self, GeometryError> {
        Self::new(dims.iter().map(|&n| Factor::SpecialLinear(n)).collect())
    }

    pub fn orthant(m: usize) -> Result<Self, GeometryError> {
        Self::new(vec![Factor::Orthant(m)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn ambient_dim(&self) -> usize {
        self.embed.nrows()
    }

    /// Dimension of the intrinsic coordinate space.
    pub fn rank(&self) -> usize {
        self.embed.ncols()
    }

    /// Columns: orthonormal basis of the subspace, in ambient coordinates.
    pub fn embedding(&self) -> &DMatrix<f64> {
        &self.embed
    }

    /// Unit inward wall normals in intrinsic coordinates; the closed
    /// chamber is `walls · x ≥ 0`.
    pub fn walls(&self) -> &DMatrix<f64> {
        &self.walls
    }

    pub fn to_intrinsic(&self, u: &[f64]) -> Result<DVector<f64>, GeometryError> {
        if u.len() != self.ambient_dim() {
            return Err(GeometryError::Dimension {
                expected: self.ambient_dim(),
                got: u.len(),
            });
        }
        Ok(self.embed.transpose() * DVector::from_column_slice(u))
    }

    pub fn to_ambient(&self, x: &DVector<f64>) -> Vec<f64> {
        (&self.embed * x).iter().copied().collect()
    }

    /// Intrinsic coefficients of an ambient linear functional.
    pub fn functional_to_intrinsic(&self, coeffs: &[f64]) -> Result<DVector<f64>, GeometryError> {
        self.to_intrinsic(coeffs)
    }

    /// Ambient coefficients of an intrinsic linear functional.
    pub fn functional_to_ambient(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        self.to_ambient(coeffs)
    }

    /// `min_j ⟨wall_j, x⟩ / ‖x‖`; positive exactly on the open chamber.
    pub fn chamber_margin(&self, x: &DVector<f64>) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        (&self.walls * x).min() / n
    }

    /// Range of ambient coordinates belonging to factor `i`.
    pub fn factor_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.factors[..i].iter().map(|f| f.ambient_dim()).sum();
        start..start + self.factors[i].ambient_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_orthonormal_and_trace_zero() {
        let s = ChamberSpace::special_linear(&[2, 3]).unwrap();
        assert_eq!((s.ambient_dim(), s.rank()), (5, 3));
        let e = s.embedding();
        assert!((e.transpose() * e - DMatrix::identity(3, 3)).norm() < 1e-12);
        let ones2 = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((e.transpose() * ones2).norm() < 1e-12);
        let u = [1.0, -1.0, 2.0, 0.5, -2.5];
        let back = s.to_ambient(&s.to_intrinsic(&u).unwrap());
        for (a, b) in back.iter().zip(u) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn chamber_margin_sign() {
        let s = ChamberSpace::special_linear(&[3]).unwrap();
        let inside = s.to_intrinsic(&[1.0, 0.0, -1.0]).unwrap();
        let wall = s.to_intrinsic(&[1.0, 1.0, -2.0]).unwrap();
        let outside = s.to_intrinsic(&[-1.0, 0.0, 1.0]).unwrap();
        assert!(s.chamber_margin(&inside) > 0.0);
        assert!(s.chamber_margin(&wall).abs() < 1e-12);
        assert!(s.chamber_margin(&outside) < 0.0);
    }
}
