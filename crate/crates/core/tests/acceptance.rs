//! Acceptance criteria, run in sequence with one pass/fail line each.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use corrlab::asymptotics::{
    integral_l_scaled, predict_counts, ratio_convergence_check, synthetic_decomposition,
    AsymptoticParams, Budget, DefectForm, IntegrationMethod, PredictionKind,
};
use corrlab::chamber::ChamberSpace;
use corrlab::cone::LinearMapPhi;
use corrlab::critical::{CriticalVectorProblem, GeometricMeanModel};
use corrlab::hypertube::verify_difference_identity;
use corrlab::lab::config::{bundled, BUNDLED};
use corrlab::lab::{fit_exponent, CountKind, CountSeries, Experiment, KindCounts, SeriesPoint};
use corrlab::polyhedral::PolyCone;
use corrlab::spectra::{
    cartan_projection, hilbert_distance, hilbert_length, jordan_projection, opposition_involution,
    ChamberVector, GradedMatrix,
};
use corrlab::word::{
    enumerate_conjugacy_classes, enumerate_words, reduce, sort_classes, ConjugacyClass,
    GeneratorAlphabet, Shard,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_diff(a: &ChamberVector, b: &[f64]) -> f64 {
    a.entries().iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn prepare(name: &str, max_len: usize) -> Result<Experiment, String> {
    let mut cfg = bundled(name).ok_or_else(|| format!("no bundled config {name}"))?;
    cfg.max_word_length = max_len;
    Experiment::prepare(cfg, Path::new("."), None).map_err(|e| format!("{name}: {e}"))
}

// Spectral projections of conjugated model elements.

/// A test element with its exact inverse and analytic projections.
struct Model {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    loxodromic: bool,
    /// Conjugators must be exact (integer, unimodular) for defective elements.
    defective: bool,
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn model_element(rng: &mut ChaCha8Rng, kind: usize) -> Model {
    match kind {
        // Diagonal with distinct moduli and random signs.
        0 => {
            let n = rng.random_range(2..=3usize);
            let mut logs: Vec<f64> = (0..n).map(|i| i as f64 * 0.9 + rng.random_range(0.0..0.5)).collect();
            let mean = logs.iter().sum::<f64>() / n as f64;
            logs.iter_mut().for_each(|x| *x -= mean);
            let signs: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { -1.0 } else { 1.0 }).collect();
            let diag = |p: f64| DMatrix::from_fn(n, n, |i, j| if i == j { signs[i] * (p * logs[i]).exp() } else { 0.0 });
            let l = sorted_desc(logs.clone());
            Model { matrix: diag(1.0), inverse: diag(-1.0), lambda: l.clone(), mu: l, loxodromic: true, defective: false }
        }
        // Scaled rotation block next to a real eigenvalue.
        1 => {
            let a: f64 = rng.random_range(0.2..1.5);
            let th: f64 = rng.random_range(0.3..2.8);
            let block = |p: f64| {
                let (c, s, e) = ((p * th).cos(), (p * th).sin(), (p * a).exp());
                DMatrix::from_row_slice(3, 3, &[e * c, -e * s, 0.0, e * s, e * c, 0.0, 0.0, 0.0, (-2.0 * p * a).exp()])
            };
            let l = vec![a, a, -2.0 * a];
            Model { matrix: block(1.0), inverse: block(-1.0), lambda: l.clone(), mu: l, loxodromic: false, defective: false }
        }
        // Unipotent with one size-two block; singular values (√(x²+4) ± x)/2.
        _ => {
            let n = rng.random_range(2..=3usize);
            let x = rng.random_range(1..=24) as f64 / 8.0;
            let unip = |y: f64| DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else if (i, j) == (0, 1) { y } else { 0.0 });
            let s1: f64 = 0.5 * ((x * x + 4.0).sqrt() + x);
            let mut mu = vec![s1.ln(), -s1.ln()];
            if n == 3 {
                mu.insert(1, 0.0);
            }
            Model { matrix: unip(x), inverse: unip(-x), lambda: vec![0.0; n], mu, loxodromic: false, defective: true }
        }
    }
}

/// Product of elementary integer matrices and its exact inverse.
fn unimodular(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut h = DMatrix::identity(n, n);
    let mut h_inv = DMatrix::identity(n, n);
    for _ in 0..4 {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let k = rng.random_range(-2i32..=2) as f64;
        let mut e = DMatrix::identity(n, n);
        e[(i, j)] = k;
        let mut e_inv = DMatrix::identity(n, n);
        e_inv[(i, j)] = -k;
        h = &h * e;
        h_inv = e_inv * &h_inv;
    }
    (h, h_inv)
}

fn criterion_spectra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut worst_limit: f64 = 0.0;
    let err = |e: corrlab::spectra::SpectraError| e.to_string();
    for i in 0..50 {
        let model = model_element(&mut rng, i % 3);
        let n = model.matrix.nrows();
        let (h, h_inv) = if model.defective {
            unimodular(&mut rng, n)
        } else {
            let x: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let h = DMatrix::identity(n, n) + x * 0.3;
            let h_inv = h.clone().try_inverse().ok_or("singular conjugator")?;
            (h, h_inv)
        };
        let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let g = &h * &model.matrix * &h_inv;
        let g_inv = &h * &model.inverse * &h_inv;
        let lambda = jordan_projection(&g).map_err(err)?;
        let mu = cartan_projection(&(&k * &model.matrix * k.transpose())).map_err(err)?;
        worst = worst
            .max(max_diff(&lambda, &model.lambda))
            .max(max_diff(&jordan_projection(&model.matrix).map_err(err)?, lambda.entries()))
            .max(max_diff(&mu, &model.mu));
        let graded = GradedMatrix::from_matrix(&g).map_err(err)?;
        for m in 2..=8u32 {
            let scaled: Vec<f64> = lambda.entries().iter().map(|v| m as f64 * v).collect();
            worst = worst.max(max_diff(&graded.pow(m).jordan().map_err(err)?, &scaled));
        }
        let mu_g = cartan_projection(&g).map_err(err)?;
        worst = worst
            .max(max_diff(&jordan_projection(&g_inv).map_err(err)?, opposition_involution(&lambda).entries()))
            .max(max_diff(&cartan_projection(&g_inv).map_err(err)?, opposition_involution(&mu_g).entries()));
        if model.loxodromic {
            let y: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let near = &k * (DMatrix::identity(n, n) + y * 0.002);
            let near_inv = near.clone().try_inverse().ok_or("singular conjugator")?;
            let g2 = &near * &model.matrix * near_inv;
            let big = GradedMatrix::from_matrix(&g2).map_err(err)?.pow(64).cartan();
            let lam2 = jordan_projection(&g2).map_err(err)?;
            worst_limit = worst_limit.max(big.scaled(1.0 / 64.0).distance(&lam2));
        }
    }
    let elapsed = start.elapsed();
    check(worst < 1e-8, || format!("projection error {worst:.2e}"))?;
    check(worst_limit < 1e-3, || format!("|mu(g^64)/64 - lambda(g)| = {worst_limit:.2e}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "50 conjugates, max error {worst:.1e}, power-limit gap {worst_limit:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// Enumeration.

fn raw_sequences(rank: usize, len: usize) -> Vec<Vec<i32>> {
    let symbols: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| symbols.iter().map(move |&s| [p.clone(), vec![s]].concat()))
            .collect();
    }
    out
}

fn criterion_enumeration() -> Outcome {
    let alphabet = GeneratorAlphabet::standard(2).map_err(|e| e.to_string())?;
    let words = enumerate_words(&alphabet, 6, Shard::whole());
    let mut per_len = Vec::new();
    for len in 1..=6 {
        let raw = raw_sequences(2, len);
        let reduced: BTreeSet<Vec<i32>> = raw.iter().filter(|s| s.windows(2).all(|w| w[0] != -w[1])).cloned().collect();
        let got: BTreeSet<Vec<i32>> = words.iter().filter(|w| w.len() == len).map(|w| w.signed_indices()).collect();
        check(got == reduced, || format!("reduced words differ at length {len}"))?;
        let orbits: BTreeSet<Vec<i32>> = reduced
            .iter()
            .filter(|s| s.len() < 2 || s[0] != -s[s.len() - 1])
            .map(|s| (0..s.len()).map(|k| [&s[k..], &s[..k]].concat()).min().unwrap_or_default())
            .collect();
        let oracle: BTreeSet<String> = orbits
            .iter()
            .map(|s| ConjugacyClass::of(&reduce(s, 2).unwrap()).unwrap().representative().to_string())
            .collect();
        let classes = enumerate_conjugacy_classes(&alphabet, 6, Shard::whole());
        let of_len: Vec<String> = classes.iter().filter(|c| c.len() == len).map(|c| c.representative().to_string()).collect();
        check(of_len.len() == oracle.len(), || format!("class count {} vs {} at length {len}", of_len.len(), oracle.len()))?;
        check(of_len.iter().cloned().collect::<BTreeSet<_>>() == oracle, || format!("class sets differ at length {len}"))?;
        per_len.push(format!("{}/{}", reduced.len(), oracle.len()));
    }
    let reference = sharded(&alphabet, 1);
    for shards in [3, 8] {
        check(sharded(&alphabet, shards) == reference, || format!("{shards} shards disagree"))?;
    }
    Ok(format!("words/classes per length {}, shards 1/3/8 agree", per_len.join(" ")))
}

fn sharded(alphabet: &GeneratorAlphabet, shards: usize) -> (Vec<String>, Vec<ConjugacyClass>) {
    let mut words: Vec<String> = Shard::all(shards)
        .into_iter()
        .flat_map(|s| enumerate_words(alphabet, 8, s))
        .map(|w| w.to_string())
        .collect();
    words.sort();
    let mut classes: Vec<ConjugacyClass> = Shard::all(shards)
        .into_iter()
        .flat_map(|s| enumerate_conjugacy_classes(alphabet, 8, s))
        .collect();
    sort_classes(&mut classes);
    (words, classes)
}

// Box decomposition identity.

fn criterion_identity() -> Outcome {
    let mut parts = Vec::new();
    for (name, _) in BUNDLED {
        let start = Instant::now();
        let exp = prepare(name, 10)?;
        let an = exp.analyze().map_err(|e| format!("{name}: {e}"))?;
        let dec = &an.decomposition;
        let t = 20.0;
        let upper = dec.spec_upper(t).map_err(|e| e.to_string())?;
        let lower = dec.spec_lower(t).map_err(|e| e.to_string())?;
        let rep = verify_difference_identity(&dec.tube, &upper, &lower, &exp.family, t, 10_000, 17);
        let mut corrupted = upper.clone();
        corrupted.b = upper.b.shifted(0.1);
        let control = verify_difference_identity(&dec.tube, &corrupted, &lower, &exp.family, t, 10_000, 17);
        let elapsed = start.elapsed();
        check(rep.violations == 0, || format!("{name}: {} violations", rep.violations))?;
        check(rep.in_box > 0, || format!("{name}: no samples in the box"))?;
        check(control.violations > 0, || format!("{name}: corrupted offset not detected"))?;
        check(elapsed < Duration::from_secs(10), || format!("{name}: took {elapsed:?}"))?;
        parts.push(format!("{name} 0/{} (control {})", rep.in_box, control.violations));
    }
    Ok(format!("10^4 samples at T = 20: {}", parts.join(", ")))
}

// Critical vector.

fn criterion_critical() -> Outcome {
    let space = ChamberSpace::orthant(2).map_err(|e| e.to_string())?;
    let cone = PolyCone::from_generators(&[DVector::from_vec(vec![1.0, 0.05]), DVector::from_vec(vec![0.05, 1.0])])
        .map_err(|e| e.to_string())?;
    let model = GeometricMeanModel { scale: 2.0, dim: 2 };
    let phi = LinearMapPhi::from_rows(vec![vec![1.0, 1.0]]).map_err(|e| e.to_string())?;
    let res = CriticalVectorProblem::new(&model, &space, &phi, &[1.0], &cone)
        .and_then(|p| p.solve(1e-8))
        .map_err(|e| e.to_string())?;
    let v_err = (res.v_star[0] - 0.5).abs().max((res.v_star[1] - 0.5).abs());
    let tan = res.tangent.coefficients();
    let t_err = (tan[0] - 1.0).abs().max((tan[1] - 1.0).abs());
    check(v_err < 1e-6, || format!("v* = {:?}", res.v_star))?;
    check(t_err < 1e-6, || format!("tangent = {tan:?}"))?;
    check(res.kernel_residual < 1e-6, || format!("kernel residual {:.2e}", res.kernel_residual))?;
    check(res.seed_spread < 1e-5, || format!("seed spread {:.2e}", res.seed_spread))?;
    let tube_phi = LinearMapPhi::from_rows(vec![vec![1.0, 0.0], vec![1.0, 1.0]]).map_err(|e| e.to_string())?;
    let tube = CriticalVectorProblem::new(&model, &space, &tube_phi, &[0.3, 1.0], &cone)
        .and_then(|p| p.solve(1e-8))
        .map_err(|e| e.to_string())?;
    check(tube.v_star == vec![0.3, 0.7], || format!("tube case v* = {:?}", tube.v_star))?;
    Ok(format!(
        "v* error {v_err:.1e}, tangent error {t_err:.1e}, residual {:.1e}, 5-seed spread {:.1e}, tube case exact",
        res.kernel_residual, res.seed_spread
    ))
}

// Truncation integrals.

fn criterion_integrals() -> Outcome {
    let dec = synthetic_decomposition(1.0).map_err(|e| e.to_string())?;
    let form = DefectForm::euclidean(dec.tube.v().clone());
    let params = AsymptoticParams::unit(1.0).map_err(|e| e.to_string())?;
    let budget = Budget::default();
    let grid = [20.0, 40.0, 80.0, 160.0];
    let rep = ratio_convergence_check(&dec.tube, &dec.upper, &dec.psi_v, &grid, &params, &form, &budget)
        .map_err(|e| e.to_string())?;
    check(rep.final_deviation <= 0.02, || format!("ratio at 160 off by {:.4}", rep.final_deviation))?;
    let spec = dec.spec_upper(120.0).map_err(|e| e.to_string())?;
    let q = integral_l_scaled(&dec.tube, &spec, &params, &form, IntegrationMethod::Quadrature, &budget)
        .map_err(|e| e.to_string())?;
    let mc = integral_l_scaled(&dec.tube, &spec, &params, &form, IntegrationMethod::MonteCarlo, &budget)
        .map_err(|e| e.to_string())?;
    let gap = (q - mc).abs() / q;
    check(gap <= 0.01, || format!("quadrature {q} vs monte carlo {mc}"))?;
    let wide = synthetic_decomposition(1.1).map_err(|e| e.to_string())?;
    check(wide.tube.cone() != dec.tube.cone(), || "dilation left the cone unchanged".into())?;
    let wide_rep = ratio_convergence_check(&wide.tube, &wide.upper, &wide.psi_v, &grid, &params, &form, &budget)
        .map_err(|e| e.to_string())?;
    let (r0, r1) = (rep.rows[3].ratio, wide_rep.rows[3].ratio);
    let shift = (r1 - r0).abs() / r0;
    check(shift <= 0.02, || format!("dilated cone moved the ratio by {shift:.4}"))?;
    Ok(format!(
        "ratio(160) = {r0:.5}, quadrature/MC gap {gap:.1e} at T = 120, dilated-cone shift {shift:.1e}"
    ))
}

// Count identity on the bundled configurations.

fn uncensored_mismatches(k: &KindCounts) -> Vec<f64> {
    k.identity_mismatches().into_iter().filter(|&t| !k.censored(t)).collect()
}

fn criterion_count_identity() -> Outcome {
    let mut parts = Vec::new();
    for (name, _) in BUNDLED {
        let exp = prepare(name, 12)?;
        let an = exp.analyze().map_err(|e| format!("{name}: {e}"))?;
        let j = exp.jordan_counts(&an).map_err(|e| format!("{name}: {e}"))?;
        let c = exp.cartan_counts(&an).map_err(|e| format!("{name}: {e}"))?;
        for k in [&j, &c] {
            let bad = uncensored_mismatches(k);
            check(bad.is_empty(), || format!("{name} {:?}: identity fails at T = {bad:?}", k.kind))?;
            check(k.upper.is_some() && k.lower.is_some(), || format!("{name}: truncation counts missing"))?;
            let live = k.t_grid.iter().zip(&k.box_counts).filter(|(t, &n)| !k.censored(**t) && n > 0).count();
            check(live > 0, || format!("{name} {:?}: no uncensored nonzero box counts", k.kind))?;
        }
        parts.push(format!(
            "{name} ({} exceptional)",
            j.exceptional.len() + c.exceptional.len()
        ));
    }
    Ok(format!("box = upper - lower + exceptional at every uncensored T: {}", parts.join(", ")))
}

// Exponent fit on closed-form series.

fn criterion_fit_recovery() -> Outcome {
    let d = 2;
    let mut worst: f64 = 0.0;
    for delta in [0.4, 0.7, 1.0] {
        let params = AsymptoticParams::unit(delta).map_err(|e| e.to_string())?;
        let mut used = Vec::new();
        for (kind, pk) in [(CountKind::Jordan, PredictionKind::Jordan), (CountKind::Cartan, PredictionKind::Cartan)] {
            let points: Vec<SeriesPoint> = (1..=40)
                .map(|i| {
                    let t = 0.5 * i as f64;
                    SeriesPoint { t, count: predict_counts(pk, &params, 3.7, 0.0, 0.0, d, t), censored: false }
                })
                .collect();
            let fit = fit_exponent(&points, kind, d, None).map_err(|e| e.to_string())?;
            worst = worst.max((fit.delta_hat - delta).abs());
            used.push(fit.poly_exponent_used);
        }
        check((used[0] - used[1] - 1.0).abs() < 1e-12, || format!("polynomial exponents {used:?}"))?;
    }
    check(worst < 1e-6, || format!("max recovery error {worst:.2e}"))?;
    Ok(format!("delta in {{0.4, 0.7, 1.0}} recovered to {worst:.1e}, Jordan/Cartan powers differ by 1"))
}

// Correlation exponent for the Schottky pair.

fn jordan_points(k: &KindCounts) -> Vec<SeriesPoint> {
    k.t_grid
        .iter()
        .zip(&k.box_counts)
        .map(|(&t, &n)| SeriesPoint { t, count: n as f64, censored: k.censored(t) })
        .collect()
}

fn criterion_pair_exponent() -> Outcome {
    let start = Instant::now();
    let mut cfg = bundled("schottky-pair").ok_or("missing pair config")?;
    cfg.max_word_length = 14;
    cfg.shard_count = 8;
    let exp = Experiment::prepare(cfg, Path::new("."), None).map_err(|e| e.to_string())?;
    let an = exp.analyze().map_err(|e| e.to_string())?;
    let d = exp.phi.d();
    let j = exp.jordan_counts(&an).map_err(|e| e.to_string())?;
    let c = exp.cartan_counts(&an).map_err(|e| e.to_string())?;
    let series = CountSeries::new(&j, &c);
    let fit = fit_exponent(&series.points(CountKind::Jordan), CountKind::Jordan, d, None).map_err(|e| e.to_string())?;
    let bound = an.bound.bound;
    let lo = an.critical.value - 0.15;
    let hi = bound + 0.05;
    check(lo <= fit.delta_hat && fit.delta_hat <= hi, || {
        format!("fit {:.4} outside [{lo:.4}, {hi:.4}]", fit.delta_hat)
    })?;

    // Rows rescaled so every per-row exponent times r equals one.
    let eq = exp.with_equalized_rates(&an.factor_deltas).map_err(|e| e.to_string())?;
    let an2 = eq.analyze().map_err(|e| e.to_string())?;
    let j2 = eq.jordan_counts(&an2).map_err(|e| e.to_string())?;
    let fit2 = fit_exponent(&jordan_points(&j2), CountKind::Jordan, d, None).map_err(|e| e.to_string())?;
    let bound2 = an2
        .factor_deltas
        .iter()
        .zip(&eq.config.r)
        .map(|(a, b)| a * b)
        .fold(f64::INFINITY, f64::min);
    let margin = bound2 - fit2.delta_hat;
    check(margin > 0.0, || format!("equalized fit {:.4} not below {bound2:.4}", fit2.delta_hat))?;

    // Censoring.
    let horizon = j.horizon.min(c.horizon);
    check(series.records.iter().all(|r| r.censored == (r.t > horizon)), || "censored flags disagree with the horizons".into())?;
    let censored: Vec<f64> = series.points(CountKind::Jordan).iter().filter(|p| p.censored).map(|p| p.t).collect();
    check(!censored.is_empty(), || "no censored grid points at this length".into())?;
    check(fit.points_used.iter().all(|t| !censored.contains(t)), || "fit used a censored point".into())?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(15 * 60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "fit {:.4} in [{lo:.4}, {hi:.4}]; equalized fit {:.4} below {bound2:.4} (margin {margin:.4}); {} censored points excluded; {:.0}s",
        fit.delta_hat,
        fit2.delta_hat,
        censored.len(),
        elapsed.as_secs_f64()
    ))
}

// Hilbert geometry.

/// Symmetric square of a 2×2 matrix, which preserves a form of signature (2, 1).
fn symmetric_square(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    DMatrix::from_row_slice(3, 3, &[
        a * a, 2.0 * a * b, b * b,
        a * c, a * d + b * c, b * d,
        c * c, 2.0 * c * d, d * d,
    ])
}

fn criterion_hilbert() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_len: f64 = 0.0;
    let mut n = 0;
    while n < 50 {
        let m: DMatrix<f64> = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
        let det = m.determinant();
        if det.abs() < 0.1 {
            continue;
        }
        let mut g = m / det.abs().sqrt();
        if g.determinant() < 0.0 {
            g.column_mut(0).neg_mut();
        }
        let tr = g.trace().abs();
        if tr <= 2.05 {
            continue;
        }
        let translation = 2.0 * (0.5 * tr).acosh();
        let lambda = jordan_projection(&symmetric_square(&g)).map_err(|e| e.to_string())?;
        let len = hilbert_length(&lambda).map_err(|e| e.to_string())?;
        worst_len = worst_len.max((len - translation).abs());
        n += 1;
    }
    check(worst_len < 1e-8, || format!("Hilbert length error {worst_len:.2e}"))?;
    let mut worst_dist: f64 = 0.0;
    for _ in 0..50 {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = [th.cos(), th.sin()];
        let mut s: f64 = rng.random_range(-0.95..0.95);
        let mut t: f64 = rng.random_range(-0.95..0.95);
        if s > t {
            std::mem::swap(&mut s, &mut t);
        }
        let at = |p: f64| [p * dir[0], p * dir[1]];
        let dist = hilbert_distance(&at(-1.0), &at(s), &at(t), &at(1.0)).map_err(|e| e.to_string())?;
        worst_dist = worst_dist.max((dist - (t.atanh() - s.atanh())).abs());
    }
    check(worst_dist < 1e-12, || format!("disk distance error {worst_dist:.2e}"))?;
    Ok(format!("50 elements, length error {worst_len:.1e}; 50 diameters, distance error {worst_dist:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("spectral projections", criterion_spectra),
        ("word and class enumeration", criterion_enumeration),
        ("box decomposition identity", criterion_identity),
        ("critical vector", criterion_critical),
        ("truncation integrals", criterion_integrals),
        ("count identity", criterion_count_identity),
        ("exponent fit recovery", criterion_fit_recovery),
        ("schottky pair exponent", criterion_pair_exponent),
        ("hilbert geometry", criterion_hilbert),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
