//! End-to-end behavior of experiments on small word lengths.

use std::path::Path;

use corrlab::asymptotics::Budget;
use corrlab::cache::Cache;
use corrlab::chamber::ChamberSpace;
use corrlab::hypertube::BoxFamily;
use corrlab::cone::LinearMapPhi;
use corrlab::lab::config::{bundled, RepresentationSpec, BUNDLED};
use corrlab::lab::count::{count_classes, count_elements, CountContext};
use corrlab::lab::{emit_report, CountSeries, Experiment, ExperimentConfig, KindCounts};
use corrlab::word::{enumerate_conjugacy_classes, enumerate_words, GeneratorAlphabet, Shard};
use nalgebra::DMatrix;

fn pair(max_len: usize) -> ExperimentConfig {
    let mut cfg = bundled("schottky-pair").unwrap();
    cfg.max_word_length = max_len;
    cfg
}

fn prepare(cfg: ExperimentConfig) -> Experiment {
    Experiment::prepare(cfg, Path::new("."), None).unwrap()
}

fn box_counts(exp: &Experiment, family: &BoxFamily) -> (KindCounts, KindCounts) {
    let ctx = CountContext {
        space: &exp.space,
        family,
        decomposition: None,
        t_grid: &exp.config.t_grid,
        theta: None,
    };
    let j = count_classes(&exp.sample, &ctx).unwrap();
    let c = count_elements(&exp.reps, &exp.alphabet, exp.config.max_word_length, 2, &ctx).unwrap();
    (j, c)
}

#[test]
fn bundled_configs_round_trip() {
    for (name, _) in BUNDLED {
        let cfg = bundled(name).unwrap();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.to_toml_string(), text, "{name}");
    }
}

#[test]
fn missing_fields_are_named() {
    let mut text = pair(6).to_toml_string();
    for key in ["r = ", "epsilon = "] {
        let start = text.find(key).unwrap();
        let end = start + text[start..].find('\n').unwrap() + 1;
        text.replace_range(start..end, "");
    }
    let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
    let fields = err.fields();
    assert!(fields.contains(&"r") && fields.contains(&"epsilon"), "{err}");
    assert_eq!(fields.len(), 2, "{err}");
}

#[test]
fn invalid_values_are_named() {
    let mut cfg = pair(6);
    cfg.epsilon = vec![-1.0, 1.0];
    cfg.t_grid = vec![3.0, 2.0];
    let err = cfg.validate().unwrap_err();
    let fields = err.fields();
    assert!(fields.contains(&"epsilon") && fields.contains(&"t_grid"), "{err}");
}

#[test]
fn widening_epsilon_never_decreases_counts() {
    let exp = prepare(pair(8));
    let narrow = exp.family.clone();
    let wide = BoxFamily::new(
        exp.phi.clone(),
        exp.config.r.clone(),
        exp.config.epsilon.iter().map(|e| e + 0.4).collect(),
    )
    .unwrap();
    let (jn, cn) = box_counts(&exp, &narrow);
    let (jw, cw) = box_counts(&exp, &wide);
    assert!(jn.box_counts.iter().zip(&jw.box_counts).all(|(a, b)| a <= b));
    assert!(cn.box_counts.iter().zip(&cw.box_counts).all(|(a, b)| a <= b));
    assert!(jw.box_counts.iter().sum::<u64>() > jn.box_counts.iter().sum::<u64>());
}

#[test]
fn joint_row_scaling_preserves_counts() {
    let exp = prepare(pair(8));
    let factors = [2.0, 0.5];
    let scale = |v: &[f64]| v.iter().zip(&factors).map(|(x, f)| x * f).collect::<Vec<_>>();
    let rows: Vec<Vec<f64>> = exp
        .config
        .phi_rows
        .iter()
        .zip(&factors)
        .map(|(row, f)| row.iter().map(|x| x * f).collect())
        .collect();
    let scaled = BoxFamily::new(
        LinearMapPhi::from_rows(rows).unwrap(),
        scale(&exp.config.r),
        scale(&exp.config.epsilon),
    )
    .unwrap();
    let (j0, c0) = box_counts(&exp, &exp.family);
    let (j1, c1) = box_counts(&exp, &scaled);
    assert_eq!(j0.box_counts, j1.box_counts);
    assert_eq!(c0.box_counts, c1.box_counts);
}

#[test]
fn counts_do_not_depend_on_shard_count() {
    let mut reference: Option<(KindCounts, KindCounts)> = None;
    for shards in [1, 3, 8] {
        let mut cfg = pair(8);
        cfg.shard_count = shards;
        let exp = prepare(cfg);
        let an = exp.analyze().unwrap();
        let counts = (exp.jordan_counts(&an).unwrap(), exp.cartan_counts(&an).unwrap());
        match &reference {
            None => reference = Some(counts),
            Some(r) => assert_eq!(&counts, r, "{shards} shards"),
        }
    }
}

/// Translation length `2 acosh(|tr|/2)` of a hyperbolic element of SL(2, R).
fn translation_length(g: &DMatrix<f64>) -> f64 {
    2.0 * (0.5 * g.trace().abs()).acosh()
}

/// `2 log σ₁` from the Frobenius norm of a determinant-one 2×2 matrix.
fn cartan_gap(g: &DMatrix<f64>) -> f64 {
    let f2 = g.norm_squared();
    let s1 = 0.5 * ((f2 + 2.0).sqrt() + (f2 - 2.0).max(0.0).sqrt());
    2.0 * s1.ln()
}

#[test]
fn single_schottky_group_matches_direct_filter() {
    let (la, lb) = (2.21f64, 2.63f64);
    let a = vec![vec![(la / 2.0).exp(), 0.0], vec![0.0, (-la / 2.0).exp()]];
    let (c, s) = ((lb / 2.0).cosh(), (lb / 2.0).sinh());
    let b = vec![vec![c, s], vec![s, c]];
    let mut cfg = pair(7);
    cfg.representations = vec![RepresentationSpec {
        name: "schottky".into(),
        generators: Some(vec![a, b]),
        file: None,
    }];
    cfg.phi_rows = vec![vec![1.0, -1.0]];
    cfg.r = vec![1.0];
    cfg.epsilon = vec![0.75];
    cfg.theta = None;
    cfg.t_grid = (1..=24).map(|i| 0.5 * i as f64).collect();
    let exp = prepare(cfg);
    let (j, cc) = box_counts(&exp, &exp.family);
    let alphabet = GeneratorAlphabet::standard(2).unwrap();
    let rep = &exp.reps[0];
    let lengths: Vec<f64> = enumerate_conjugacy_classes(&alphabet, 7, Shard::whole())
        .iter()
        .map(|cl| translation_length(&rep.evaluate(cl.representative()).unwrap()))
        .collect();
    let gaps: Vec<f64> = enumerate_words(&alphabet, 7, Shard::whole())
        .iter()
        .filter(|w| !w.is_empty())
        .map(|w| cartan_gap(&rep.evaluate(w).unwrap()))
        .collect();
    let in_box = |x: f64, t: f64| t <= x && x <= t + 0.75;
    for (i, &t) in exp.config.t_grid.iter().enumerate() {
        let jordan = lengths.iter().filter(|&&x| in_box(x, t)).count() as u64;
        let cartan = gaps.iter().filter(|&&x| in_box(x, t)).count() as u64;
        assert_eq!(j.box_counts[i], jordan, "jordan at T = {t}");
        assert_eq!(cc.box_counts[i], cartan, "cartan at T = {t}");
    }
    assert!(j.box_counts.iter().sum::<u64>() > 0);
}

#[test]
fn scales_below_the_smallest_projection_count_nothing() {
    let mut cfg = pair(6);
    cfg.t_grid = vec![0.01, 0.05, 10.0];
    let exp = prepare(cfg);
    let (j, c) = box_counts(&exp, &exp.family);
    assert_eq!(j.box_counts[..2], [0, 0]);
    assert_eq!(c.box_counts[..2], [0, 0]);
}

#[test]
fn count_table_header() {
    let exp = prepare(pair(7));
    let an = exp.analyze().unwrap();
    let series = CountSeries::new(&exp.jordan_counts(&an).unwrap(), &exp.cartan_counts(&an).unwrap());
    let csv = series.to_csv().unwrap();
    assert_eq!(csv.lines().next().unwrap(), "T,jordan_count,cartan_count,theta_count,censored");
    assert_eq!(csv.lines().count(), exp.config.t_grid.len() + 1);
}

#[test]
fn cached_sample_matches_fresh_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let fresh = prepare(pair(7));
    let first = Experiment::prepare(pair(7), Path::new("."), Some(&cache)).unwrap();
    let second = Experiment::prepare(pair(7), Path::new("."), Some(&cache)).unwrap();
    assert_eq!(first.sample, fresh.sample);
    assert_eq!(second.sample, fresh.sample);
}

#[test]
fn reports_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let budget = Budget {
        samples: 20_000,
        ..Budget::default()
    };
    for d in &dirs {
        let exp = prepare(pair(8));
        let an = exp.analyze().unwrap();
        let report = exp.report(&an, &budget).unwrap();
        emit_report(&exp, &report, d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 7, "{names:?}");
    for name in names {
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between runs");
    }
}

#[test]
fn chamber_space_of_bundled_configs() {
    for (name, _) in BUNDLED {
        let cfg = bundled(name).unwrap();
        let reps = cfg.representations(Path::new(".")).unwrap();
        let dims: Vec<usize> = reps.iter().map(|r| r.dimension()).collect();
        let space = ChamberSpace::special_linear(&dims).unwrap();
        assert!(cfg.phi_rows.iter().all(|row| row.len() == space.ambient_dim()), "{name}");
    }
}

#[test]
fn truncation_counts_are_nested_in_t() {
    for (name, _) in BUNDLED {
        let mut cfg = bundled(name).unwrap();
        cfg.max_word_length = 8;
        let exp = prepare(cfg);
        let an = exp.analyze().unwrap();
        let j = exp.jordan_counts(&an).unwrap();
        for counts in [j.upper.as_ref().unwrap(), j.lower.as_ref().unwrap()] {
            assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{name}: {counts:?}");
        }
    }
}

#[test]
fn fitted_exponent_respects_per_row_bound() {
    use corrlab::lab::{fit_exponent, CountKind, SeriesPoint, BOUND_SLACK};
    for (name, _) in BUNDLED {
        let mut cfg = bundled(name).unwrap();
        cfg.max_word_length = 14;
        let exp = prepare(cfg);
        let an = exp.analyze().unwrap();
        let j = exp.jordan_counts(&an).unwrap();
        let points: Vec<SeriesPoint> = j
            .t_grid
            .iter()
            .zip(&j.box_counts)
            .map(|(&t, &n)| SeriesPoint { t, count: n as f64, censored: j.censored(t) })
            .collect();
        let fit = fit_exponent(&points, CountKind::Jordan, exp.phi.d(), None)
            .unwrap()
            .with_bound(&an.factor_deltas, &exp.config.r, BOUND_SLACK);
        assert_eq!(fit.bound_satisfied, Some(true), "{name}: {fit:?}");
    }
}
