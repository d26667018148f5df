//! Box and truncation counts over classes (Jordan) and elements (Cartan),
//! completeness horizons and exponent fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chamber::ChamberSpace;
use crate::hypertube::{BoxDecomposition, BoxFamily};
use crate::linalg::linear_fit;
use crate::spectra::{
    walk_products, HolonomySign, LinearLowerBound, Projection, Representation, SpectrumSample,
};
use crate::word::{GeneratorAlphabet, Shard, Word};

use super::LabError;

/// Relative slack on the word-length growth slope behind the horizons.
pub const HORIZON_MARGIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountKind {
    /// Conjugacy classes by Jordan projection.
    Jordan,
    /// Group elements by Cartan projection.
    Cartan,
}

impl CountKind {
    /// Power `p` of the polynomial correction `T^p` for a `d`-row box.
    pub fn poly_exponent(self, d: usize) -> f64 {
        match self {
            CountKind::Jordan => (d as f64 + 1.0) / 2.0,
            CountKind::Cartan => (d as f64 - 1.0) / 2.0,
        }
    }
}

/// What to count and where.
#[derive(Clone, Copy, Debug)]
pub struct CountContext<'a> {
    pub space: &'a ChamberSpace,
    pub family: &'a BoxFamily,
    pub decomposition: Option<&'a BoxDecomposition>,
    pub t_grid: &'a [f64],
    pub theta: Option<&'a [Vec<HolonomySign>]>,
}

impl CountContext<'_> {
    /// `max_i (φ_i(u) − ε_i)/r_i`: a point at or above `T` on this scale
    /// cannot lie in the box at scale `T`.
    pub fn entry_scale(&self, u: &[f64]) -> f64 {
        let f = self.family;
        f.phi
            .apply(u)
            .iter()
            .zip(&f.r)
            .zip(&f.epsilon)
            .map(|((p, r), e)| (p - e) / r)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A projection in some box whose point lies outside the cone `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalElement {
    pub word: String,
    pub projection: Vec<f64>,
    /// Grid values of `T` whose box contains the projection.
    pub t_values: Vec<f64>,
}

/// Counts of one kind along the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindCounts {
    pub kind: CountKind,
    pub t_grid: Vec<f64>,
    pub box_counts: Vec<u64>,
    /// Counts in the truncations with the upper and lower offsets.
    pub upper: Option<Vec<u64>>,
    pub lower: Option<Vec<u64>>,
    pub theta: Option<Vec<u64>>,
    /// Counts are complete for `T ≤ horizon`.
    pub horizon: f64,
    pub exceptional: Vec<ExceptionalElement>,
    /// Number of classes or elements scanned.
    pub population: u64,
}

impl KindCounts {
    pub fn censored(&self, t: f64) -> bool {
        t > self.horizon
    }

    /// Grid points where `box = upper − lower + #exceptional(T)` fails.
    pub fn identity_mismatches(&self) -> Vec<f64> {
        let (Some(up), Some(low)) = (&self.upper, &self.lower) else {
            return Vec::new();
        };
        self.t_grid
            .iter()
            .enumerate()
            .filter(|&(i, &t)| {
                let extra = self
                    .exceptional
                    .iter()
                    .filter(|e| e.t_values.contains(&t))
                    .count() as i64;
                self.box_counts[i] as i64 != up[i] as i64 - low[i] as i64 + extra
            })
            .map(|(_, &t)| t)
            .collect()
    }

    /// Number of exceptional entries at each grid point.
    pub fn exceptional_per_t(&self) -> Vec<u64> {
        self.t_grid
            .iter()
            .map(|t| self.exceptional.iter().filter(|e| e.t_values.contains(t)).count() as u64)
            .collect()
    }
}

/// Per-shard accumulator.
#[derive(Clone, Debug)]
struct Tally {
    box_counts: Vec<u64>,
    upper: Vec<u64>,
    lower: Vec<u64>,
    theta: Vec<u64>,
    exceptional: Vec<(Word, ExceptionalElement)>,
    minima: Vec<f64>,
    population: u64,
}

impl Tally {
    fn new(grid: usize, max_len: usize) -> Self {
        Self {
            box_counts: vec![0; grid],
            upper: vec![0; grid],
            lower: vec![0; grid],
            theta: vec![0; grid],
            exceptional: Vec::new(),
            minima: vec![f64::INFINITY; max_len + 1],
            population: 0,
        }
    }

    fn observe(
        &mut self,
        ctx: &CountContext<'_>,
        word: &dyn Fn() -> Word,
        len: usize,
        u: &[f64],
        holonomy: Option<&[HolonomySign]>,
    ) -> Result<(), LabError> {
        self.population += 1;
        let scale = ctx.entry_scale(u);
        if len < self.minima.len() && scale < self.minima[len] {
            self.minima[len] = scale;
        }
        let placed = match ctx.decomposition {
            Some(dec) => {
                let x = ctx.space.to_intrinsic(u)?;
                let tube = &dec.tube;
                let c = tube.coordinates(&x);
                let inside = tube.cone().facet_margin(&x) >= 0.0 && tube.q().contains(&c.x, 0.0);
                Some((inside, c.t, dec.upper.eval(&c.x), dec.lower.eval(&c.x)))
            }
            None => None,
        };
        let in_theta = match (ctx.theta, holonomy) {
            (Some(patterns), Some(h)) => patterns.iter().any(|p| p.as_slice() == h),
            _ => false,
        };
        let mut outside_hits = Vec::new();
        for (i, &t) in ctx.t_grid.iter().enumerate() {
            let in_box = ctx.family.contains(u, t);
            if in_box {
                self.box_counts[i] += 1;
                if in_theta {
                    self.theta[i] += 1;
                }
            }
            if let Some((inside, tc, b1, b2)) = placed {
                if inside && tc >= 0.0 {
                    if tc <= t + b1 {
                        self.upper[i] += 1;
                    }
                    if tc <= t + b2 {
                        self.lower[i] += 1;
                    }
                }
                if in_box && !inside {
                    outside_hits.push(t);
                }
            }
        }
        if !outside_hits.is_empty() {
            let w = word();
            self.exceptional.push((
                w.clone(),
                ExceptionalElement {
                    word: w.to_string(),
                    projection: u.to_vec(),
                    t_values: outside_hits,
                },
            ));
        }
        Ok(())
    }

    fn merge(mut self, other: Tally) -> Tally {
        let add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.box_counts, &other.box_counts);
        add(&mut self.upper, &other.upper);
        add(&mut self.lower, &other.lower);
        add(&mut self.theta, &other.theta);
        self.exceptional.extend(other.exceptional);
        for (a, b) in self.minima.iter_mut().zip(&other.minima) {
            *a = a.min(*b);
        }
        self.population += other.population;
        self
    }

    fn finish(
        mut self,
        kind: CountKind,
        ctx: &CountContext<'_>,
        max_len: usize,
    ) -> Result<KindCounts, LabError> {
        let minima: Vec<(usize, f64)> = self
            .minima
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| v.is_finite())
            .map(|(l, &v)| (l, v))
            .collect();
        let horizon = LinearLowerBound::fit(&minima, HORIZON_MARGIN)?.horizon(max_len);
        self.exceptional.sort_by(|a, b| a.0.shortlex_cmp(&b.0));
        let with_tube = ctx.decomposition.is_some();
        Ok(KindCounts {
            kind,
            t_grid: ctx.t_grid.to_vec(),
            box_counts: self.box_counts,
            upper: with_tube.then_some(self.upper),
            lower: with_tube.then_some(self.lower),
            theta: ctx.theta.map(|_| self.theta),
            horizon,
            exceptional: self.exceptional.into_iter().map(|(_, e)| e).collect(),
            population: self.population,
        })
    }
}

/// Jordan counts over the loxodromic classes of a class sample.
pub fn count_classes(sample: &SpectrumSample, ctx: &CountContext<'_>) -> Result<KindCounts, LabError> {
    let mut tally = Tally::new(ctx.t_grid.len(), sample.max_len());
    for e in sample.loxodromic_entries() {
        let u = e.projection(Projection::Jordan);
        let hol = e.holonomy();
        tally.observe(ctx, &|| e.word.clone(), e.word.len(), &u, hol.as_deref())?;
    }
    if tally.population == 0 {
        return Err(LabError::EmptyEnumeration);
    }
    tally.finish(CountKind::Jordan, ctx, sample.max_len())
}

/// Cartan counts over every nontrivial element of word length `<= max_len`,
/// streamed shard by shard and reduced in shard order.
pub fn count_elements(
    reps: &[Representation],
    alphabet: &GeneratorAlphabet,
    max_len: usize,
    shard_count: usize,
    ctx: &CountContext<'_>,
) -> Result<KindCounts, LabError> {
    let tallies: Vec<Tally> = Shard::all(shard_count)
        .into_par_iter()
        .map(|shard| {
            let mut tally = Tally::new(ctx.t_grid.len(), max_len);
            let mut err = None;
            let mut u = Vec::new();
            walk_products(reps, alphabet, max_len, shard, &mut |w, gs| {
                if w.is_empty() || err.is_some() {
                    return;
                }
                u.clear();
                for g in gs {
                    u.extend_from_slice(g.cartan().entries());
                }
                let word = || Word::from_letters(w.iter().copied());
                if let Err(e) = tally.observe(ctx, &word, w.len(), &u, None) {
                    err = Some(e);
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(tally),
            }
        })
        .collect::<Result<_, _>>()?;
    let total = tallies
        .into_iter()
        .reduce(Tally::merge)
        .unwrap_or_else(|| Tally::new(ctx.t_grid.len(), max_len));
    if total.population == 0 {
        return Err(LabError::EmptyEnumeration);
    }
    total.finish(CountKind::Cartan, ctx, max_len)
}

/// One row of the merged count table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    #[serde(rename = "T")]
    pub t: f64,
    pub jordan_count: u64,
    pub cartan_count: u64,
    pub theta_count: Option<u64>,
    pub censored: bool,
}

/// Jordan and Cartan box counts on a common grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    pub records: Vec<CountRecord>,
    pub jordan_horizon: f64,
    pub cartan_horizon: f64,
}

impl CountSeries {
    pub fn new(jordan: &KindCounts, cartan: &KindCounts) -> Self {
        let records = jordan
            .t_grid
            .iter()
            .enumerate()
            .map(|(i, &t)| CountRecord {
                t,
                jordan_count: jordan.box_counts[i],
                cartan_count: cartan.box_counts[i],
                theta_count: jordan.theta.as_ref().map(|v| v[i]),
                censored: jordan.censored(t) || cartan.censored(t),
            })
            .collect();
        Self {
            records,
            jordan_horizon: jordan.horizon,
            cartan_horizon: cartan.horizon,
        }
    }

    /// Fit input for one kind, censored by that kind's horizon.
    pub fn points(&self, kind: CountKind) -> Vec<SeriesPoint> {
        let horizon = match kind {
            CountKind::Jordan => self.jordan_horizon,
            CountKind::Cartan => self.cartan_horizon,
        };
        self.records
            .iter()
            .map(|r| SeriesPoint {
                t: r.t,
                count: match kind {
                    CountKind::Jordan => r.jordan_count,
                    CountKind::Cartan => r.cartan_count,
                } as f64,
                censored: r.t > horizon,
            })
            .collect()
    }

    /// CSV with columns `T, jordan_count, cartan_count, theta_count, censored`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub count: f64,
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: CountKind,
    pub delta_hat: f64,
    pub intercept: f64,
    pub poly_exponent_used: f64,
    pub points_used: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// `min_i δ̂_i r_i`, when per-factor exponents are supplied.
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

impl FitResult {
    /// Attaches the per-factor upper bound with additive `slack`.
    pub fn with_bound(mut self, factor_deltas: &[f64], r: &[f64], slack: f64) -> Self {
        let bound = factor_deltas
            .iter()
            .zip(r)
            .map(|(d, r)| d * r)
            .fold(f64::INFINITY, f64::min);
        self.bound = Some(bound);
        self.bound_satisfied = Some(self.delta_hat <= bound + slack);
        self
    }
}

/// Least-squares slope of `log(count · T^p)` against `T` over uncensored
/// positive points inside `window`.
pub fn fit_exponent(
    points: &[SeriesPoint],
    kind: CountKind,
    d: usize,
    window: Option<(f64, f64)>,
) -> Result<FitResult, LabError> {
    let p = kind.poly_exponent(d);
    let used: Vec<&SeriesPoint> = points
        .iter()
        .filter(|s| !s.censored && s.count > 0.0 && s.t > 0.0)
        .filter(|s| window.is_none_or(|(lo, hi)| s.t >= lo && s.t <= hi))
        .collect();
    if used.len() < 4 {
        return Err(LabError::Insufficient(format!(
            "{} uncensored positive points in the window, need 4",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = used.iter().map(|s| s.count.ln() + p * s.t.ln()).collect();
    let (slope, intercept, residuals) =
        linear_fit(&xs, &ys).ok_or_else(|| LabError::Insufficient("degenerate fit".into()))?;
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(FitResult {
        kind,
        delta_hat: slope,
        intercept,
        poly_exponent_used: p,
        points_used: xs,
        residuals,
        rms_residual: rms,
        bound: None,
        bound_satisfied: None,
    })
}
