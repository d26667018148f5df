//! Cartan and Jordan projections of words under matrix representations.
//!
//! Products of long words are carried as [`GradedMatrix`] values: the
//! exterior powers `Λᵏg` for `k = 1..n-1`, each with its own accumulated log
//! scale. The top singular value (resp. spectral radius) of `Λᵏg` is
//! `σ₁⋯σₖ` (resp. `|λ₁⋯λₖ|`) and is computed to full relative precision even
//! when `g` itself is far too ill-conditioned for a direct SVD, so every
//! entry of `μ(g)` and `λ(g)` is recovered as a difference of partial sums.

use std::fmt;

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::word::{walk_words, ConjugacyClass, GeneratorAlphabet, Letter, Shard, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("matrix is singular or not square")]
    Singular,
    #[error("representation `{name}`: {reason}")]
    InvalidRepresentation { name: String, reason: String },
    #[error("word uses generator {index} but the representation has {rank}")]
    GeneratorOutOfRange { index: usize, rank: usize },
    #[error("entry magnitude {magnitude:e} exceeds ceiling {ceiling:e}; use graded evaluation")]
    Overflow { magnitude: f64, ceiling: f64 },
    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),
    #[error("holonomy undefined: {0}")]
    NotLoxodromic(String),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid Hilbert configuration: {0}")]
    Hilbert(String),
    #[error("not enough data to fit a growth bound: {0}")]
    GrowthBound(String),
}

/// Default gap tolerance for loxodromicity.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// A point of the model Weyl chamber: nonincreasing entries (natural logs of
/// moduli) summing to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberVector {
    entries: Vec<f64>,
}

impl ChamberVector {
    /// Checked constructor: entries must be nonincreasing and sum to zero
    /// within `1e-8`.
    pub fn new(entries: Vec<f64>) -> Result<Self, SpectraError> {
        let sum: f64 = entries.iter().sum();
        let scale = entries.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if entries.windows(2).any(|p| p[0] < p[1] - 1e-12 * scale) || sum.abs() > 1e-8 * scale {
            return Err(SpectraError::InvalidRepresentation {
                name: "chamber vector".into(),
                reason: format!("{entries:?} is not a sorted trace-zero tuple"),
            });
        }
        Ok(Self { entries })
    }

    /// Sorts into nonincreasing order without checking the trace.
    pub fn from_unsorted(mut entries: Vec<f64>) -> Self {
        entries.sort_by(|a, b| b.total_cmp(a));
        Self { entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|x| x * t).collect(),
        }
    }

    pub fn distance(&self, other: &ChamberVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Simple roots `x_j − x_{j+1}`.
    pub fn simple_roots(&self) -> Vec<f64> {
        self.entries.windows(2).map(|p| p[0] - p[1]).collect()
    }

    pub fn min_simple_root(&self) -> f64 {
        self.simple_roots()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Log-modulus resolution of an eigenvalue cluster in a `dim × dim` matrix
/// whose norm is `ratio` times its spectral radius: `(64ε·ratio)^{1/dim}`,
/// capped at `10⁻⁴`.
fn cluster_tolerance(dim: usize, ratio: f64) -> f64 {
    if dim <= 1 {
        return 0.0;
    }
    (64.0 * f64::EPSILON * ratio.max(1.0)).powf(1.0 / dim as f64).min(1e-4)
}

/// `i(x) = −w₀x`: reverse and negate.
pub fn opposition_involution(x: &ChamberVector) -> ChamberVector {
    ChamberVector {
        entries: x.entries.iter().rev().map(|v| -v).collect(),
    }
}

/// Eigenvalue sign pattern ordered by decreasing modulus, up to a global
/// sign; canonical form has a leading `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HolonomySign {
    signs: Vec<i8>,
}

impl HolonomySign {
    pub fn new(mut signs: Vec<i8>) -> Self {
        if signs.first().copied().unwrap_or(1) < 0 {
            for s in &mut signs {
                *s = -*s;
            }
        }
        Self { signs }
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Pointwise product (the group law of the sign group).
    pub fn product(&self, other: &HolonomySign) -> HolonomySign {
        HolonomySign::new(
            self.signs
                .iter()
                .zip(&other.signs)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Bits of the canonical form after the leading entry (`1` for `−`).
    pub fn bits(&self) -> Vec<bool> {
        self.signs.iter().skip(1).map(|&s| s < 0).collect()
    }

    pub fn parse(text: &str) -> Option<HolonomySign> {
        let signs = text
            .chars()
            .map(|c| match c {
                '+' => Some(1),
                '-' => Some(-1),
                _ => None,
            })
            .collect::<Option<Vec<i8>>>()?;
        if signs.is_empty() {
            return None;
        }
        Some(HolonomySign::new(signs))
    }
}

impl fmt::Display for HolonomySign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.signs {
            write!(f, "{}", if s > 0 { '+' } else { '-' })?;
        }
        Ok(())
    }
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Matrix of `k×k` minors of `g`, rows and columns in lexicographic subset order.
pub fn exterior_power(g: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let subsets = k_subsets(g.nrows(), k);
    let m = subsets.len();
    let mut out = DMatrix::zeros(m, m);
    for (i, rows) in subsets.iter().enumerate() {
        for (j, cols) in subsets.iter().enumerate() {
            let minor = DMatrix::from_fn(k, k, |a, b| g[(rows[a], cols[b])]);
            out[(i, j)] = minor.determinant();
        }
    }
    out
}

const RESCALE_ABOVE: f64 = 1e64;

/// A determinant-normalized matrix carried through its exterior powers
/// `Λ¹g, …, Λⁿ⁻¹g`, each with an accumulated natural-log scale.
#[derive(Clone, Debug)]
pub struct GradedMatrix {
    n: usize,
    powers: Vec<DMatrix<f64>>,
    log_scales: Vec<f64>,
    det_sign: f64,
}

impl GradedMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            powers: (1..n)
                .map(|k| {
                    let m = k_subsets(n, k).len();
                    DMatrix::identity(m, m)
                })
                .collect(),
            log_scales: vec![0.0; n.saturating_sub(1)],
            det_sign: 1.0,
        }
    }

    /// Normalizes `g` to `|det| = 1` and builds its exterior powers.
    pub fn from_matrix(g: &DMatrix<f64>) -> Result<Self, SpectraError> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(SpectraError::Singular);
        }
        let det = g.determinant();
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !det.is_finite() || det.abs() <= 1e-300 || det.abs() <= (1e-14 * scale).powi(n as i32)
        {
            return Err(SpectraError::Singular);
        }
        let normalized = g / det.abs().powf(1.0 / n as f64);
        let mut out = Self {
            n,
            powers: (1..n).map(|k| exterior_power(&normalized, k)).collect(),
            log_scales: vec![0.0; n - 1],
            det_sign: det.signum(),
        };
        out.rescale();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn det_sign(&self) -> f64 {
        self.det_sign
    }

    fn rescale(&mut self) {
        for (m, s) in self.powers.iter_mut().zip(self.log_scales.iter_mut()) {
            let mag = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if mag > RESCALE_ABOVE || (mag > 0.0 && mag < 1.0 / RESCALE_ABOVE) {
                *m /= mag;
                *s += mag.ln();
            }
        }
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &GradedMatrix) -> GradedMatrix {
        debug_assert_eq!(self.n, other.n);
        let mut out = GradedMatrix {
            n: self.n,
            powers: self
                .powers
                .iter()
                .zip(&other.powers)
                .map(|(a, b)| a * b)
                .collect(),
            log_scales: self
                .log_scales
                .iter()
                .zip(&other.log_scales)
                .map(|(a, b)| a + b)
                .collect(),
            det_sign: self.det_sign * other.det_sign,
        };
        out.rescale();
        out
    }

    /// `selfᵐ` by repeated squaring.
    pub fn pow(&self, mut m: u32) -> GradedMatrix {
        let mut result = GradedMatrix::identity(self.n);
        let mut base = self.clone();
        while m > 0 {
            if m & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            m >>= 1;
        }
        result
    }

    /// The underlying determinant-normalized matrix (first exterior power).
    pub fn matrix(&self) -> DMatrix<f64> {
        match self.powers.first() {
            Some(m) => m * self.log_scales[0].exp(),
            None => DMatrix::from_element(1, 1, self.det_sign),
        }
    }

    fn from_partial_sums(&self, partial: &[f64]) -> ChamberVector {
        // partial[k-1] = log of the k-fold product; the full product is 0.
        let mut entries = Vec::with_capacity(self.n);
        let mut prev = 0.0;
        for &s in partial {
            entries.push(s - prev);
            prev = s;
        }
        entries.push(-prev);
        let mean = entries.iter().sum::<f64>() / self.n as f64;
        ChamberVector::from_unsorted(entries.into_iter().map(|x| x - mean).collect())
    }

    /// Cartan projection `μ`.
    pub fn cartan(&self) -> ChamberVector {
        let partial: Vec<f64> = self
            .powers
            .iter()
            .zip(&self.log_scales)
            .map(|(m, s)| {
                let top = if m.nrows() == 1 {
                    m[(0, 0)].abs()
                } else {
                    m.clone().svd(false, false).singular_values.max()
                };
                top.ln() + s
            })
            .collect();
        self.from_partial_sums(&partial)
    }

    fn top_eigenvalues(&self) -> Result<Vec<(Complex<f64>, f64)>, SpectraError> {
        // For each power: (top eigenvalue normalized to unit modulus, log modulus).
        self.powers
            .iter()
            .zip(&self.log_scales)
            .map(|(m, s)| {
                let eig = if m.nrows() == 1 {
                    vec![Complex::new(m[(0, 0)], 0.0)]
                } else {
                    m.complex_eigenvalues().iter().copied().collect::<Vec<_>>()
                };
                let top = eig
                    .iter()
                    .copied()
                    .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                    .ok_or_else(|| SpectraError::Eigen("empty spectrum".into()))?;
                let modulus = top.norm();
                if !modulus.is_finite() || modulus <= 0.0 {
                    return Err(SpectraError::Eigen(format!("degenerate top eigenvalue {top}")));
                }
                // Moduli in a defective cluster scatter by about ε^{1/size}
                // while their mean log stays accurate, so the top cluster is
                // represented by that mean.
                let top_log = modulus.ln();
                let tol = cluster_tolerance(eig.len(), m.norm() / modulus);
                let (sum, count) = eig
                    .iter()
                    .map(|z| z.norm().ln())
                    .filter(|l| top_log - l <= tol)
                    .fold((0.0, 0usize), |(s, c), l| (s + l, c + 1));
                Ok((top / modulus, sum / count as f64 + s))
            })
            .collect()
    }

    /// Jordan projection `λ`.
    pub fn jordan(&self) -> Result<ChamberVector, SpectraError> {
        let partial: Vec<f64> = self.top_eigenvalues()?.into_iter().map(|(_, l)| l).collect();
        Ok(self.from_partial_sums(&partial))
    }

    pub fn is_loxodromic(&self, gap_tol: f64) -> bool {
        match self.jordan() {
            Ok(l) => l.simple_roots().into_iter().all(|g| g > gap_tol),
            Err(_) => false,
        }
    }

    /// Eigenvalue signs by decreasing modulus; requires a loxodromic element.
    pub fn holonomy(&self, gap_tol: f64) -> Result<HolonomySign, SpectraError> {
        if !self.is_loxodromic(gap_tol) {
            return Err(SpectraError::NotLoxodromic(
                "eigenvalue moduli are not separated".into(),
            ));
        }
        let tops = self.top_eigenvalues()?;
        let mut prefix_signs = Vec::with_capacity(self.n + 1);
        prefix_signs.push(1.0);
        for (unit, _) in &tops {
            if unit.im.abs() > 1e-6 {
                return Err(SpectraError::NotLoxodromic(format!(
                    "top eigenvalue of an exterior power is not real ({unit})"
                )));
            }
            prefix_signs.push(unit.re.signum());
        }
        prefix_signs.push(self.det_sign);
        let signs = prefix_signs
            .windows(2)
            .map(|p| (p[0] * p[1]) as i8)
            .collect();
        Ok(HolonomySign::new(signs))
    }
}

/// A named list of determinant-normalized invertible generator matrices.
#[derive(Clone, Debug)]
pub struct Representation {
    name: String,
    dimension: usize,
    generators: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    graded: Vec<GradedMatrix>,
    graded_inverses: Vec<GradedMatrix>,
    magnitude_ceiling: f64,
}

impl Representation {
    pub fn new(name: impl Into<String>, generators: Vec<DMatrix<f64>>) -> Result<Self, SpectraError> {
        let name = name.into();
        let bad = |reason: String| SpectraError::InvalidRepresentation {
            name: name.clone(),
            reason,
        };
        let dimension = generators
            .first()
            .map(|g| g.nrows())
            .ok_or_else(|| bad("no generators".into()))?;
        if dimension < 2 {
            return Err(bad(format!("dimension {dimension} < 2")));
        }
        let mut normalized = Vec::with_capacity(generators.len());
        let mut inverses = Vec::with_capacity(generators.len());
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != dimension || g.ncols() != dimension {
                return Err(bad(format!("generator {} is not {dimension}×{dimension}", i + 1)));
            }
            let det = g.determinant();
            if !det.is_finite() || det.abs() < 1e-300 {
                return Err(bad(format!("generator {} is singular", i + 1)));
            }
            let h = g / det.abs().powf(1.0 / dimension as f64);
            if (h.determinant().abs() - 1.0).abs() > 1e-9 {
                return Err(bad(format!("generator {} could not be normalized", i + 1)));
            }
            let inv = h
                .clone()
                .try_inverse()
                .ok_or_else(|| bad(format!("generator {} is not invertible", i + 1)))?;
            normalized.push(h);
            inverses.push(inv);
        }
        let graded = normalized
            .iter()
            .map(GradedMatrix::from_matrix)
            .collect::<Result<Vec<_>, _>>()?;
        let graded_inverses = inverses
            .iter()
            .map(GradedMatrix::from_matrix)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            name,
            dimension,
            generators: normalized,
            inverses,
            graded,
            graded_inverses,
            magnitude_ceiling: 1e150,
        })
    }

    pub fn with_magnitude_ceiling(mut self, ceiling: f64) -> Self {
        self.magnitude_ceiling = ceiling;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of generators.
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    fn letter_matrix(&self, l: Letter) -> Result<&DMatrix<f64>, SpectraError> {
        let i = l.generator();
        let src = if l.is_inverse() { &self.inverses } else { &self.generators };
        src.get(i).ok_or(SpectraError::GeneratorOutOfRange {
            index: i + 1,
            rank: self.rank(),
        })
    }

    pub fn graded_letter(&self, l: Letter) -> &GradedMatrix {
        if l.is_inverse() {
            &self.graded_inverses[l.generator()]
        } else {
            &self.graded[l.generator()]
        }
    }

    /// Plain product of generator matrices in word order.
    pub fn evaluate(&self, w: &Word) -> Result<DMatrix<f64>, SpectraError> {
        let mut acc = DMatrix::identity(self.dimension, self.dimension);
        for &l in w.letters() {
            acc = &acc * self.letter_matrix(l)?;
            let mag = acc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if mag > self.magnitude_ceiling {
                return Err(SpectraError::Overflow {
                    magnitude: mag,
                    ceiling: self.magnitude_ceiling,
                });
            }
        }
        Ok(acc)
    }

    /// Product carried through exterior powers with log rescaling.
    pub fn evaluate_graded(&self, w: &Word) -> Result<GradedMatrix, SpectraError> {
        let mut acc = GradedMatrix::identity(self.dimension);
        for &l in w.letters() {
            if l.generator() >= self.rank() {
                return Err(SpectraError::GeneratorOutOfRange {
                    index: l.generator() + 1,
                    rank: self.rank(),
                });
            }
            acc = acc.mul(self.graded_letter(l));
        }
        Ok(acc)
    }

    /// SHA-256 over the dimension and the exact bits of every normalized entry.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dimension as u64).to_le_bytes());
        h.update((self.rank() as u64).to_le_bytes());
        for g in &self.generators {
            for r in 0..self.dimension {
                for c in 0..self.dimension {
                    h.update(g[(r, c)].to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Product of generators/inverses in word order.
pub fn evaluate(rep: &Representation, w: &Word) -> Result<DMatrix<f64>, SpectraError> {
    rep.evaluate(w)
}

/// Sorted logs of singular values of the determinant-normalized matrix.
pub fn cartan_projection(g: &DMatrix<f64>) -> Result<ChamberVector, SpectraError> {
    Ok(GradedMatrix::from_matrix(g)?.cartan())
}

/// Sorted logs of eigenvalue moduli of the determinant-normalized matrix.
pub fn jordan_projection(g: &DMatrix<f64>) -> Result<ChamberVector, SpectraError> {
    GradedMatrix::from_matrix(g)?.jordan()
}

pub fn is_loxodromic(g: &DMatrix<f64>, gap_tol: f64) -> bool {
    GradedMatrix::from_matrix(g)
        .map(|gm| gm.is_loxodromic(gap_tol))
        .unwrap_or(false)
}

pub fn holonomy_sign(g: &DMatrix<f64>) -> Result<HolonomySign, SpectraError> {
    GradedMatrix::from_matrix(g)?.holonomy(DEFAULT_GAP_TOL)
}

/// Hilbert translation length `(λ₁ − λ₃)/2` of a rank-two (3×3) element.
pub fn hilbert_length(lambda: &ChamberVector) -> Result<f64, SpectraError> {
    if lambda.dim() != 3 {
        return Err(SpectraError::Dimension {
            expected: 3,
            got: lambda.dim(),
        });
    }
    Ok(0.5 * (lambda.entries[0] - lambda.entries[2]))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Hilbert distance between `x` and `y` given boundary points `w`, `z`
/// with `w, x, y, z` collinear in that order.
pub fn hilbert_distance(w: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<f64, SpectraError> {
    let dim = w.len();
    if [x, y, z].iter().any(|p| p.len() != dim) || dim == 0 {
        return Err(SpectraError::Hilbert("points must share a dimension".into()));
    }
    let wz = dist(w, z);
    if wz <= 0.0 {
        return Err(SpectraError::Hilbert("boundary points coincide".into()));
    }
    let dir: Vec<f64> = w.iter().zip(z).map(|(a, b)| (b - a) / wz).collect();
    let param = |p: &[f64]| -> Result<f64, SpectraError> {
        let off: Vec<f64> = p.iter().zip(w).map(|(a, b)| a - b).collect();
        let t: f64 = off.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let perp = off
            .iter()
            .zip(&dir)
            .map(|(o, d)| (o - t * d).powi(2))
            .sum::<f64>()
            .sqrt();
        if perp > 1e-9 * wz.max(1.0) {
            return Err(SpectraError::Hilbert("points are not collinear".into()));
        }
        Ok(t)
    };
    let (tx, ty) = (param(x)?, param(y)?);
    if !(0.0 < tx && tx <= ty && ty < wz) {
        return Err(SpectraError::Hilbert(
            "points must be ordered w, x, y, z with w ≠ x and y ≠ z".into(),
        ));
    }
    let ratio = (dist(w, y) * dist(x, z)) / (dist(w, x) * dist(y, z));
    Ok(0.5 * ratio.ln())
}

/// Projections and holonomy of one element under one representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepSpectrum {
    pub lambda: ChamberVector,
    pub mu: ChamberVector,
    pub holonomy: Option<HolonomySign>,
    pub loxodromic: bool,
}

impl RepSpectrum {
    pub fn of(g: &GradedMatrix, gap_tol: f64) -> Result<Self, SpectraError> {
        let lambda = g.jordan()?;
        let loxodromic = lambda.simple_roots().iter().all(|&x| x > gap_tol);
        let holonomy = if loxodromic { g.holonomy(gap_tol).ok() } else { None };
        Ok(Self {
            lambda,
            mu: g.cartan(),
            holonomy,
            loxodromic,
        })
    }
}

/// Which projection an estimator reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    Jordan,
    Cartan,
}

/// Whether a sample indexes conjugacy classes or group elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    Classes,
    Elements,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEntry {
    pub word: Word,
    pub spectra: Vec<RepSpectrum>,
}

impl SampleEntry {
    pub fn loxodromic(&self) -> bool {
        self.spectra.iter().all(|s| s.loxodromic)
    }

    /// Concatenated projection over all representations.
    pub fn projection(&self, p: Projection) -> Vec<f64> {
        self.spectra
            .iter()
            .flat_map(|s| match p {
                Projection::Jordan => s.lambda.entries().iter().copied(),
                Projection::Cartan => s.mu.entries().iter().copied(),
            })
            .collect()
    }

    pub fn holonomy(&self) -> Option<Vec<HolonomySign>> {
        self.spectra.iter().map(|s| s.holonomy.clone()).collect()
    }
}

/// Spectral data of every class (or element) up to a word length, for a
/// tuple of representations of the same free group.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSample {
    kind: SampleKind,
    max_len: usize,
    dims: Vec<usize>,
    entries: Vec<SampleEntry>,
}

impl SpectrumSample {
    pub fn from_entries(
        kind: SampleKind,
        max_len: usize,
        dims: Vec<usize>,
        mut entries: Vec<SampleEntry>,
    ) -> Self {
        entries.sort_by(|a, b| a.word.shortlex_cmp(&b.word));
        Self {
            kind,
            max_len,
            dims,
            entries,
        }
    }

    /// Jordan and Cartan data of every nontrivial conjugacy class of
    /// cyclically reduced length `<= max_len`, computed shard by shard in
    /// parallel and merged in canonical order.
    pub fn for_classes(
        reps: &[Representation],
        alphabet: &GeneratorAlphabet,
        max_len: usize,
        shard_count: usize,
        gap_tol: f64,
    ) -> Result<Self, SpectraError> {
        check_reps(reps, alphabet)?;
        let parts: Vec<Vec<SampleEntry>> = Shard::all(shard_count)
            .into_par_iter()
            .map(|shard| {
                crate::word::enumerate_conjugacy_classes(alphabet, max_len, shard)
                    .into_iter()
                    .map(|c| class_entry(reps, &c, gap_tol))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::from_entries(
            SampleKind::Classes,
            max_len,
            reps.iter().map(|r| r.dimension()).collect(),
            parts.into_iter().flatten().collect(),
        ))
    }

    /// Data of every nontrivial element of word length `<= max_len`.
    pub fn for_elements(
        reps: &[Representation],
        alphabet: &GeneratorAlphabet,
        max_len: usize,
        shard_count: usize,
        gap_tol: f64,
    ) -> Result<Self, SpectraError> {
        check_reps(reps, alphabet)?;
        let parts: Vec<Vec<SampleEntry>> = Shard::all(shard_count)
            .into_par_iter()
            .map(|shard| {
                let mut out = Vec::new();
                let mut err = None;
                walk_products(reps, alphabet, max_len, shard, &mut |w, gs| {
                    if w.is_empty() || err.is_some() {
                        return;
                    }
                    match gs
                        .iter()
                        .map(|g| RepSpectrum::of(g, gap_tol))
                        .collect::<Result<Vec<_>, _>>()
                    {
                        Ok(spectra) => out.push(SampleEntry {
                            word: Word::from_letters(w.iter().copied()),
                            spectra,
                        }),
                        Err(e) => err = Some(e),
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(out),
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::from_entries(
            SampleKind::Elements,
            max_len,
            reps.iter().map(|r| r.dimension()).collect(),
            parts.into_iter().flatten().collect(),
        ))
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Dimension of each representation block.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &[SampleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries loxodromic in every representation.
    pub fn loxodromic_entries(&self) -> impl Iterator<Item = &SampleEntry> {
        self.entries.iter().filter(|e| e.loxodromic())
    }

    /// Minimum of `f` over entries of each word length `1..=max_len`.
    pub fn per_length_minima<F>(&self, f: F) -> Vec<(usize, f64)>
    where
        F: Fn(&SampleEntry) -> f64,
    {
        let mut mins = vec![f64::INFINITY; self.max_len + 1];
        for e in &self.entries {
            let v = f(e);
            let l = e.word.len();
            if l <= self.max_len && v < mins[l] {
                mins[l] = v;
            }
        }
        mins.into_iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| v.is_finite())
            .collect()
    }

    /// Lower linear growth bound of `f` along word length, with a relative
    /// safety margin on the slope.
    pub fn growth_bound<F>(&self, f: F, margin: f64) -> Result<LinearLowerBound, SpectraError>
    where
        F: Fn(&SampleEntry) -> f64,
    {
        LinearLowerBound::fit(&self.per_length_minima(f), margin)
    }
}

fn check_reps(reps: &[Representation], alphabet: &GeneratorAlphabet) -> Result<(), SpectraError> {
    for r in reps {
        if r.rank() != alphabet.rank() {
            return Err(SpectraError::InvalidRepresentation {
                name: r.name().to_string(),
                reason: format!(
                    "has {} generators but the free group has rank {}",
                    r.rank(),
                    alphabet.rank()
                ),
            });
        }
    }
    Ok(())
}

fn class_entry(
    reps: &[Representation],
    c: &ConjugacyClass,
    gap_tol: f64,
) -> Result<SampleEntry, SpectraError> {
    let spectra = reps
        .iter()
        .map(|r| RepSpectrum::of(&r.evaluate_graded(c.representative())?, gap_tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleEntry {
        word: c.representative().clone(),
        spectra,
    })
}

/// Depth-first walk over the words of a shard with running graded products
/// under every representation.
pub fn walk_products<V>(
    reps: &[Representation],
    alphabet: &GeneratorAlphabet,
    max_len: usize,
    shard: Shard,
    visit: &mut V,
) where
    V: FnMut(&[Letter], &[GradedMatrix]),
{
    let root: Vec<GradedMatrix> = reps
        .iter()
        .map(|r| GradedMatrix::identity(r.dimension()))
        .collect();
    let step = |state: &Vec<GradedMatrix>, l: Letter| -> Vec<GradedMatrix> {
        state
            .iter()
            .zip(reps)
            .map(|(g, r)| g.mul(r.graded_letter(l)))
            .collect()
    };
    walk_words(alphabet, max_len, shard, root, &step, &mut |w, s| visit(w, s));
}

/// `value(len) ≥ slope·len − intercept` for every observed word length; the
/// slope is the tail growth rate shrunk by the safety margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearLowerBound {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearLowerBound {
    pub fn fit(minima: &[(usize, f64)], margin: f64) -> Result<Self, SpectraError> {
        if minima.len() < 2 {
            return Err(SpectraError::GrowthBound("need at least two word lengths".into()));
        }
        let (l_hi, v_hi) = minima[minima.len() - 1];
        let (l_lo, v_lo) = minima[minima.len() / 2];
        let (l_lo, v_lo) = if l_lo == l_hi { minima[0] } else { (l_lo, v_lo) };
        let raw = (v_hi - v_lo) / (l_hi - l_lo) as f64;
        if raw <= 0.0 || !raw.is_finite() {
            return Err(SpectraError::GrowthBound(format!(
                "per-length minima do not grow (tail slope {raw})"
            )));
        }
        let slope = raw * (1.0 - margin);
        let intercept = minima
            .iter()
            .map(|&(l, v)| slope * l as f64 - v)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { slope, intercept })
    }

    pub fn at(&self, len: usize) -> f64 {
        self.slope * len as f64 - self.intercept
    }

    /// Values below this are attained only by words of length `<= max_len`.
    pub fn horizon(&self, max_len: usize) -> f64 {
        self.at(max_len + 1)
    }

    /// Largest word length that can attain a value `<= value`.
    pub fn max_length_for(&self, value: f64) -> f64 {
        (value + self.intercept) / self.slope
    }
}

/// Per-length minimum of `min simple root(μ)/ℓ` over all words of length
/// `ℓ ≤ max_len`.
pub fn anosov_gap_profile(
    rep: &Representation,
    max_len: usize,
) -> Vec<(usize, f64)> {
    let alphabet = GeneratorAlphabet::standard(rep.rank()).expect("rank checked at construction");
    let mut mins = vec![f64::INFINITY; max_len + 1];
    walk_products(
        std::slice::from_ref(rep),
        &alphabet,
        max_len,
        Shard::whole(),
        &mut |w, gs| {
            if !w.is_empty() {
                let v = gs[0].cartan().min_simple_root() / w.len() as f64;
                if v < mins[w.len()] {
                    mins[w.len()] = v;
                }
            }
        },
    );
    mins.into_iter().enumerate().skip(1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn diagonal_projections() {
        let mu = cartan_projection(&diag(&[3.0, 1.0, 1.0 / 3.0])).unwrap();
        let l3 = 3f64.ln();
        for (a, b) in mu.entries().iter().zip([l3, 0.0, -l3]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let lam = jordan_projection(&diag(&[2.0, 1.0, 0.5])).unwrap();
        let l2 = 2f64.ln();
        for (a, b) in lam.entries().iter().zip([l2, 0.0, -l2]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn unipotent_and_rotation_are_zero() {
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 2.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        assert!(jordan_projection(&u).unwrap().norm() < 1e-6);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!(cartan_projection(&r).unwrap().norm() < 1e-12);
        assert!(!is_loxodromic(&DMatrix::identity(3, 3), 0.1));
    }

    #[test]
    fn singular_rejected() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(cartan_projection(&z), Err(SpectraError::Singular));
    }

    #[test]
    fn holonomy_patterns() {
        assert_eq!(holonomy_sign(&diag(&[2.0, 1.0, 0.5])).unwrap().signs(), &[1, 1, 1]);
        assert_eq!(holonomy_sign(&diag(&[-2.0, 1.0, -0.5])).unwrap().signs(), &[1, -1, 1]);
        assert!(holonomy_sign(&DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn near_degenerate_gap() {
        let a = 2.0001;
        let g = diag(&[2.0, a, 1.0 / (2.0 * a)]);
        assert!(!is_loxodromic(&g, 0.01));
        assert!(is_loxodromic(&diag(&[2.0, 1.0, 0.5]), 0.1));
    }

    #[test]
    fn opposition() {
        let x = ChamberVector::new(vec![2.0, 1.0, -3.0]).unwrap();
        assert_eq!(opposition_involution(&x).entries(), &[3.0, -1.0, -2.0]);
        let s = ChamberVector::new(vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(opposition_involution(&s), s);
    }

    #[test]
    fn hilbert() {
        let l = ChamberVector::new(vec![4f64.ln(), 0.0, -(4f64.ln())]).unwrap();
        assert_abs_diff_eq!(hilbert_length(&l).unwrap(), 4f64.ln(), epsilon = 1e-15);
        let d = hilbert_distance(&[-1.0], &[0.0], &[0.5], &[1.0]).unwrap();
        assert_abs_diff_eq!(d, 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert_eq!(hilbert_distance(&[-1.0], &[0.2], &[0.2], &[1.0]).unwrap(), 0.0);
        assert!(hilbert_distance(&[-1.0], &[0.5], &[0.0], &[1.0]).is_err());
        let two = ChamberVector::new(vec![1.0, -1.0]).unwrap();
        assert!(hilbert_length(&two).is_err());
    }

    #[test]
    fn evaluate_and_overflow() {
        let a = diag(&[1e3, 1e-3]);
        let rep = Representation::new("big", vec![a.clone(), a])
            .unwrap()
            .with_magnitude_ceiling(1e20);
        let w = crate::word::reduce(&[1, 1, 1, 1, 1, 1, 1, 1], 2).unwrap();
        assert!(matches!(rep.evaluate(&w), Err(SpectraError::Overflow { .. })));
        let g = rep.evaluate_graded(&w).unwrap();
        assert_abs_diff_eq!(g.cartan().entries()[0], 24.0 * 10f64.ln(), epsilon = 1e-9);
        let e = rep.evaluate(&Word::empty()).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }
}
