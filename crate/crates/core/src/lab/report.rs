//! Holonomy group estimate, prediction comparison and report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    predict_counts, ratio_convergence_check, AsymptoticParams, Budget, DefectForm, PredictionKind,
    PredictionRow,
};
use crate::cone::ConeReport;
use crate::linalg::linear_fit;
use crate::spectra::{HolonomySign, SpectrumSample};

use super::count::{
    count_classes, count_elements, fit_exponent, CountContext, CountKind, CountSeries, FitResult,
    KindCounts,
};
use super::{Analysis, Experiment, LabError, BOUND_SLACK};

/// Subgroup of sign-pattern tuples generated by observed holonomies, kept
/// as a row-reduced basis over GF(2).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolonomyGroup {
    /// Bits per representation (dimension minus one).
    widths: Vec<usize>,
    basis: Vec<Vec<bool>>,
}

impl HolonomyGroup {
    pub fn trivial(dims: &[usize]) -> Self {
        Self {
            widths: dims.iter().map(|n| n.saturating_sub(1)).collect(),
            basis: Vec::new(),
        }
    }

    /// Generated by the holonomy tuples of all loxodromic classes.
    pub fn from_sample(sample: &SpectrumSample) -> Self {
        let mut g = Self::trivial(sample.dims());
        for e in sample.loxodromic_entries() {
            if let Some(h) = e.holonomy() {
                g.insert(&h);
            }
        }
        g
    }

    fn bits(&self, tuple: &[HolonomySign]) -> Option<Vec<bool>> {
        if tuple.len() != self.widths.len() {
            return None;
        }
        let mut out = Vec::new();
        for (h, &w) in tuple.iter().zip(&self.widths) {
            let b = h.bits();
            if b.len() != w {
                return None;
            }
            out.extend(b);
        }
        Some(out)
    }

    fn reduce(&self, mut v: Vec<bool>) -> Vec<bool> {
        for row in &self.basis {
            let pivot = row.iter().position(|&b| b).expect("basis rows are nonzero");
            if v[pivot] {
                v.iter_mut().zip(row).for_each(|(a, b)| *a ^= b);
            }
        }
        v
    }

    /// Adds a generator; returns whether the group grew.
    pub fn insert(&mut self, tuple: &[HolonomySign]) -> bool {
        let Some(v) = self.bits(tuple) else {
            return false;
        };
        let r = self.reduce(v);
        let Some(pivot) = r.iter().position(|&b| b) else {
            return false;
        };
        for row in &mut self.basis {
            if row[pivot] {
                row.iter_mut().zip(&r).for_each(|(a, b)| *a ^= b);
            }
        }
        self.basis.push(r);
        self.basis
            .sort_by_key(|row| row.iter().position(|&b| b).unwrap_or(usize::MAX));
        true
    }

    pub fn contains(&self, tuple: &[HolonomySign]) -> bool {
        self.bits(tuple)
            .is_some_and(|v| self.reduce(v).iter().all(|&b| !b))
    }

    /// Dimension over GF(2).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn order(&self) -> f64 {
        2f64.powi(self.rank() as i32)
    }

    /// `|Θ ∩ M̂|/|M̂|` over the distinct patterns of `theta`.
    pub fn theta_fraction(&self, theta: &[Vec<HolonomySign>]) -> f64 {
        let mut seen: Vec<&Vec<HolonomySign>> = Vec::new();
        for t in theta {
            if self.contains(t) && !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen.len() as f64 / self.order()
    }

    /// Basis tuples in sign-string form.
    pub fn generators(&self) -> Vec<Vec<String>> {
        self.basis
            .iter()
            .map(|row| {
                let mut out = Vec::new();
                let mut at = 0;
                for &w in &self.widths {
                    let mut s = String::from("+");
                    for &b in &row[at..at + w] {
                        s.push(if b { '-' } else { '+' });
                    }
                    at += w;
                    out.push(s);
                }
                out
            })
            .collect()
    }
}

/// Observed over predicted counts after fitting one free scale per kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionComparison {
    /// Fitted multiplier of the Jordan prediction (absorbs `κ|m|`).
    pub jordan_scale: f64,
    /// Fitted multiplier of the Cartan prediction (absorbs `κ/|m|`).
    pub cartan_scale: f64,
    /// `√(jordan_scale · cartan_scale)`, a stand-in for `κ`.
    pub kappa_product: f64,
    /// `√(jordan_scale / cartan_scale)`, a stand-in for `|m|`.
    pub m_x_product: f64,
    pub rows: Vec<ComparisonRow>,
    /// Slope of `log ratio` against `T`.
    pub jordan_drift: f64,
    pub cartan_drift: f64,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub jordan_ratio: Option<f64>,
    pub cartan_ratio: Option<f64>,
}

fn usable(obs: f64, pred: f64, censored: bool) -> bool {
    !censored && obs > 0.0 && pred > 0.0 && pred.is_finite()
}

fn scale_and_ratios(obs: &[(f64, f64, bool)], preds: &[f64]) -> (f64, Vec<Option<f64>>, f64) {
    let logs: Vec<f64> = obs
        .iter()
        .zip(preds)
        .filter(|((_, o, c), p)| usable(*o, **p, *c))
        .map(|((_, o, _), p)| (o / p).ln())
        .collect();
    if logs.is_empty() {
        return (f64::NAN, vec![None; obs.len()], f64::NAN);
    }
    let scale = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let ratios: Vec<Option<f64>> = obs
        .iter()
        .zip(preds)
        .map(|(&(_, o, c), &p)| usable(o, p, c).then(|| o / (scale * p)))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = obs
        .iter()
        .zip(&ratios)
        .filter_map(|(&(t, _, _), r)| r.map(|r| (t, r.ln())))
        .unzip();
    let drift = linear_fit(&xs, &ys).map_or(0.0, |(s, _, _)| s);
    (scale, ratios, drift)
}

/// Fits the two free scalars and reports per-`T` ratios and drift.
pub fn compare_to_prediction(series: &CountSeries, predictions: &[PredictionRow]) -> PredictionComparison {
    let jordan: Vec<(f64, f64, bool)> = series
        .points(CountKind::Jordan)
        .iter()
        .map(|p| (p.t, p.count, p.censored))
        .collect();
    let cartan: Vec<(f64, f64, bool)> = series
        .points(CountKind::Cartan)
        .iter()
        .map(|p| (p.t, p.count, p.censored))
        .collect();
    let pj: Vec<f64> = predictions.iter().map(|p| p.prediction_jordan).collect();
    let pc: Vec<f64> = predictions.iter().map(|p| p.prediction_cartan).collect();
    let (js, jr, jd) = scale_and_ratios(&jordan, &pj);
    let (cs, cr, cd) = scale_and_ratios(&cartan, &pc);
    let rows: Vec<ComparisonRow> = series
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| ComparisonRow {
            t: r.t,
            jordan_ratio: jr[i],
            cartan_ratio: cr[i],
        })
        .collect();
    let max_deviation = jr
        .iter()
        .chain(&cr)
        .flatten()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    PredictionComparison {
        jordan_scale: js,
        cartan_scale: cs,
        kappa_product: (js * cs).sqrt(),
        m_x_product: (js / cs).sqrt(),
        rows,
        jordan_drift: jd,
        cartan_drift: cd,
        max_deviation,
    }
}

/// Everything a full run produces.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub series: CountSeries,
    pub jordan: KindCounts,
    pub cartan: KindCounts,
    pub jordan_fit: Option<FitResult>,
    pub cartan_fit: Option<FitResult>,
    pub predictions: Vec<PredictionRow>,
    pub comparison: PredictionComparison,
    pub holonomy: HolonomyGroup,
    pub theta_fraction: f64,
    pub cone: ConeReport,
    pub summary: String,
    pub tube_text: String,
}

impl Experiment {
    fn count_context<'a>(&'a self, analysis: &'a Analysis, theta: Option<&'a [Vec<HolonomySign>]>) -> CountContext<'a> {
        CountContext {
            space: &self.space,
            family: &self.family,
            decomposition: Some(&analysis.decomposition),
            t_grid: &self.config.t_grid,
            theta,
        }
    }

    /// Jordan box, truncation and Θ counts over the class sample.
    pub fn jordan_counts(&self, analysis: &Analysis) -> Result<KindCounts, LabError> {
        let theta = self.config.theta_patterns();
        count_classes(&self.sample, &self.count_context(analysis, theta.as_deref()))
    }

    /// Cartan box and truncation counts over all elements.
    pub fn cartan_counts(&self, analysis: &Analysis) -> Result<KindCounts, LabError> {
        count_elements(
            &self.reps,
            &self.alphabet,
            self.config.max_word_length,
            self.config.shard_count,
            &self.count_context(analysis, None),
        )
    }

    /// Box-count predictions from the truncation integrals of both offsets.
    pub fn predictions(
        &self,
        analysis: &Analysis,
        holonomy: &HolonomyGroup,
        budget: &Budget,
    ) -> Result<Vec<PredictionRow>, LabError> {
        let dec = &analysis.decomposition;
        let theta_fraction = self
            .config
            .theta_patterns()
            .map_or(1.0, |t| holonomy.theta_fraction(&t));
        let params = AsymptoticParams::new(analysis.critical.value, 1.0, 1.0, theta_fraction.max(1e-12))?;
        let form = DefectForm::euclidean(dec.tube.v().clone());
        let grid = &self.config.t_grid;
        let up = ratio_convergence_check(&dec.tube, &dec.upper, &dec.psi_v, grid, &params, &form, budget)?;
        let low = ratio_convergence_check(&dec.tube, &dec.lower, &dec.psi_v, grid, &params, &form, budget)?;
        let d = self.phi.d();
        Ok(up
            .rows
            .iter()
            .zip(&low.rows)
            .map(|(a, b)| {
                let growth = (params.delta_v * a.t).exp();
                let c = a.c - b.c;
                let l = (a.l_scaled - b.l_scaled) * growth;
                PredictionRow {
                    t: a.t,
                    l,
                    c,
                    ratio: (a.ratio * a.c - b.ratio * b.c) / c,
                    prediction_jordan: predict_counts(
                        PredictionKind::CorrelationJordan,
                        &params,
                        0.0,
                        a.c,
                        b.c,
                        d,
                        a.t,
                    ),
                    prediction_cartan: predict_counts(
                        PredictionKind::CorrelationCartan,
                        &params,
                        0.0,
                        a.c,
                        b.c,
                        d,
                        a.t,
                    ),
                }
            })
            .collect())
    }

    /// Counts, fits, predictions and the text summary.
    pub fn report(&self, analysis: &Analysis, budget: &Budget) -> Result<ExperimentReport, LabError> {
        let jordan = self.jordan_counts(analysis)?;
        let cartan = self.cartan_counts(analysis)?;
        let series = CountSeries::new(&jordan, &cartan);
        let d = self.phi.d();
        let r = &self.config.r;
        let fit = |kind| {
            fit_exponent(&series.points(kind), kind, d, None)
                .ok()
                .map(|f| f.with_bound(&analysis.factor_deltas, r, BOUND_SLACK))
        };
        let jordan_fit = fit(CountKind::Jordan);
        let cartan_fit = fit(CountKind::Cartan);
        let holonomy = HolonomyGroup::from_sample(&self.sample);
        let theta_fraction = self
            .config
            .theta_patterns()
            .map_or(1.0, |t| holonomy.theta_fraction(&t));
        let predictions = self.predictions(analysis, &holonomy, budget)?;
        let comparison = compare_to_prediction(&series, &predictions);
        let cone = ConeReport::build(
            &self.sample,
            &analysis.model_cone,
            &analysis.growth,
            self.phi.rows(),
            &self.growth_settings(),
        );
        let dec = &analysis.decomposition;
        let tube_text = dec
            .tube
            .to_text(&[("upper", &dec.upper), ("lower", &dec.lower)]);
        let mut report = ExperimentReport {
            series,
            jordan,
            cartan,
            jordan_fit,
            cartan_fit,
            predictions,
            comparison,
            holonomy,
            theta_fraction,
            cone,
            summary: String::new(),
            tube_text,
        };
        report.summary = summary_text(self, analysis, &report);
        Ok(report)
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn fit_line(name: &str, fit: &Option<FitResult>) -> String {
    match fit {
        Some(f) => format!(
            "{name} fit: delta_hat {:.6}, T^p with p = {}, {} points, rms residual {:.4}, bound {:.6}, satisfied {}\n",
            f.delta_hat,
            f.poly_exponent_used,
            f.points_used.len(),
            f.rms_residual,
            f.bound.unwrap_or(f64::NAN),
            f.bound_satisfied.unwrap_or(false)
        ),
        None => format!("{name} fit: insufficient uncensored data\n"),
    }
}

fn summary_text(exp: &Experiment, analysis: &Analysis, rep: &ExperimentReport) -> String {
    let cfg = &exp.config;
    let crit = &analysis.critical;
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}", cfg.name);
    let _ = writeln!(
        s,
        "max word length {}, {} classes, {} elements",
        cfg.max_word_length,
        rep.jordan.population,
        rep.cartan.population
    );
    let _ = writeln!(s, "properness margin {:.6}", analysis.properness_margin);
    let _ = writeln!(s, "critical vector {}", fmt_vec(&crit.v_star));
    let _ = writeln!(s, "growth indicator at critical vector {:.6}", crit.value);
    let _ = writeln!(s, "tangent form {}", fmt_vec(crit.tangent.coefficients()));
    let _ = writeln!(s, "kernel residual {:.3e}, cone boundary active {}", crit.kernel_residual, crit.boundary_active);
    let _ = writeln!(s, "per-row exponents {}", fmt_vec(&analysis.factor_deltas));
    let b = &analysis.bound;
    let _ = writeln!(
        s,
        "bound min_i delta_i r_i {:.6}, margin {:.6}, satisfied {}, strict expected {}",
        b.bound, b.margin, b.satisfied, b.strict_expected
    );
    let _ = writeln!(
        s,
        "completeness horizon: jordan {:.4}, cartan {:.4}",
        rep.jordan.horizon, rep.cartan.horizon
    );
    let censored: Vec<String> = rep
        .series
        .records
        .iter()
        .filter(|r| r.censored)
        .map(|r| format!("{}", r.t))
        .collect();
    let _ = writeln!(s, "censored T: {}", if censored.is_empty() { "none".into() } else { censored.join(" ") });
    s.push_str(&fit_line("jordan", &rep.jordan_fit));
    s.push_str(&fit_line("cartan", &rep.cartan_fit));
    let jm = rep.jordan.identity_mismatches();
    let _ = writeln!(
        s,
        "jordan box = upper - lower truncation: {}",
        if jm.is_empty() { "exact on every grid point".to_string() } else { format!("fails at T = {jm:?}") }
    );
    let cm = rep.cartan.identity_mismatches();
    let _ = writeln!(
        s,
        "cartan box = upper - lower + exceptional: {}; {} exceptional elements",
        if cm.is_empty() { "exact on every grid point".to_string() } else { format!("fails at T = {cm:?}") },
        rep.cartan.exceptional.len()
    );
    for e in &rep.cartan.exceptional {
        let _ = writeln!(s, "  exceptional {} at T = {:?}", e.word, e.t_values);
    }
    let _ = writeln!(
        s,
        "holonomy group: order {}, generators {:?}",
        rep.holonomy.order(),
        rep.holonomy.generators()
    );
    let _ = writeln!(s, "theta fraction {:.6}", rep.theta_fraction);
    let c = &rep.comparison;
    let _ = writeln!(
        s,
        "prediction scales: jordan {:.6e}, cartan {:.6e} (kappa-like {:.6e}, |m|-like {:.6e}; not identifiable at this scale)",
        c.jordan_scale, c.cartan_scale, c.kappa_product, c.m_x_product
    );
    let _ = writeln!(
        s,
        "ratio drift per unit T: jordan {:.6}, cartan {:.6}; max deviation {:.4}",
        c.jordan_drift, c.cartan_drift, c.max_deviation
    );
    s
}

/// Box and truncation counts of both kinds, with exceptional Cartan counts.
pub fn truncation_csv(j: &KindCounts, c: &KindCounts) -> String {
    let mut s = String::from("T,jordan_box,jordan_upper,jordan_lower,cartan_box,cartan_upper,cartan_lower,cartan_exceptional\n");
    let col = |v: &Option<Vec<u64>>, i: usize| v.as_ref().map_or(String::new(), |v| v[i].to_string());
    let exc = c.exceptional_per_t();
    for (i, t) in j.t_grid.iter().enumerate() {
        s.push_str(&format!(
            "{t:?},{},{},{},{},{},{},{}\n",
            j.box_counts[i],
            col(&j.upper, i),
            col(&j.lower, i),
            c.box_counts[i],
            col(&c.upper, i),
            col(&c.lower, i),
            exc[i]
        ));
    }
    s
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), LabError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| LabError::Io { path, source })
}

/// Writes `counts.csv`, `truncation_counts.csv`, `predictions.csv`,
/// `summary.txt`, `cone.json`, `tube.txt` and `config.toml` into `dir`.
pub fn emit_report(exp: &Experiment, report: &ExperimentReport, dir: &Path) -> Result<(), LabError> {
    std::fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir, "counts.csv", &report.series.to_csv()?)?;
    write_file(dir, "predictions.csv", &crate::asymptotics::prediction_csv(&report.predictions)?)?;
    write_file(dir, "summary.txt", &report.summary)?;
    write_file(dir, "cone.json", &report.cone.to_json())?;
    write_file(dir, "tube.txt", &report.tube_text)?;
    write_file(dir, "truncation_counts.csv", &truncation_csv(&report.jordan, &report.cartan))?;
    write_file(dir, "config.toml", &exp.config.to_toml_string())
}
