//! Command-line front end for correlation experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corrlab::asymptotics::{prediction_csv, Budget};
use corrlab::cache::{resolve_cache_dir, Cache};
use corrlab::hypertube::verify_difference_identity;
use corrlab::lab::config::bundled;
use corrlab::lab::report::{truncation_csv, HolonomyGroup};
use corrlab::lab::{emit_report, Analysis, CountSeries, Experiment, ExperimentConfig, LabError};
use corrlab::spectra::{Projection, SampleEntry};
use corrlab::word::{is_primitive, reduced_word_count, GeneratorAlphabet};

#[derive(Parser)]
#[command(name = "corrlab", version, about = "Correlated Jordan and Cartan spectra of free matrix groups")]
struct Cli {
    /// Experiment file (TOML) or the name of a bundled configuration.
    #[arg(long, global = true, default_value = "schottky-pair")]
    config: String,
    /// Cache directory; falls back to $CORRLAB_CACHE_DIR.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Overrides the configured shard count.
    #[arg(long, global = true)]
    shards: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "corrlab-out")]
    out: PathBuf,
    /// Overrides the configured maximal word length.
    #[arg(long, global = true)]
    max_len: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduced-word and conjugacy-class counts per length.
    Enumerate,
    /// Jordan and Cartan projections of every class.
    Spectra,
    /// Limit cone, growth-indicator grid and per-row exponents.
    Cone,
    /// Critical vector, tangent form and the per-row bound.
    Critical,
    /// Hypertube, offsets and the sampled difference identity.
    Tube {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Scale at which the identity is sampled.
        #[arg(long, default_value_t = 20.0)]
        t: f64,
    },
    /// Box and truncation counts along the grid.
    Count,
    /// Predicted counts from the truncation integrals.
    Predict,
    /// Every artifact plus a text summary.
    Report,
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), LabError> {
    let path = Path::new(&cli.config);
    let (mut cfg, base) = if path.exists() {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (ExperimentConfig::load(path)?, base)
    } else if let Some(cfg) = bundled(&cli.config) {
        (cfg, PathBuf::from("."))
    } else {
        return Err(LabError::Insufficient(format!(
            "`{}` is neither a file nor a bundled configuration",
            cli.config
        )));
    };
    if let Some(s) = cli.shards {
        cfg.shard_count = s;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(l) = cli.max_len {
        cfg.max_word_length = l;
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn cache(cli: &Cli, cfg: &ExperimentConfig) -> Option<Cache> {
    let explicit = cli
        .cache_dir
        .clone()
        .or_else(|| cfg.cache_dir.as_ref().map(PathBuf::from));
    resolve_cache_dir(explicit.as_deref()).map(Cache::new)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf, LabError> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| LabError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn prepare(cli: &Cli) -> Result<Experiment, LabError> {
    let (cfg, base) = load_config(cli)?;
    let cache = cache(cli, &cfg);
    Experiment::prepare(cfg, &base, cache.as_ref())
}

fn budget(exp: &Experiment) -> Budget {
    Budget {
        seed: exp.config.seed,
        ..Budget::default()
    }
}

fn enumerate(cli: &Cli) -> Result<(), LabError> {
    let (cfg, base) = load_config(cli)?;
    let rank = cfg.representations(&base)?[0].rank();
    let alphabet = GeneratorAlphabet::standard(rank)?;
    let classes = match cache(cli, &cfg) {
        Some(c) => c.classes(&alphabet, cfg.max_word_length, cfg.shard_count)?,
        None => {
            let mut all: Vec<_> = corrlab::word::Shard::all(cfg.shard_count)
                .into_iter()
                .flat_map(|s| corrlab::word::enumerate_conjugacy_classes(&alphabet, cfg.max_word_length, s))
                .collect();
            corrlab::word::sort_classes(&mut all);
            all
        }
    };
    let mut csv = String::from("length,words,classes,primitive_classes\n");
    for len in 1..=cfg.max_word_length {
        let words = reduced_word_count(rank, len) - reduced_word_count(rank, len - 1);
        let of_len: Vec<_> = classes.iter().filter(|c| c.len() == len).collect();
        let primitive = of_len.iter().filter(|c| is_primitive(c)).count();
        csv.push_str(&format!("{len},{words},{},{primitive}\n", of_len.len()));
    }
    print!("{csv}");
    write(&cli.out, "enumerate.csv", &csv)?;
    Ok(())
}

fn spectra_row(entry: &SampleEntry) -> String {
    let fmt = |v: Vec<f64>| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    let hol = entry
        .holonomy()
        .map(|h| h.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{}\n",
        entry.word,
        entry.word.len(),
        fmt(entry.projection(Projection::Jordan)),
        fmt(entry.projection(Projection::Cartan)),
        hol,
        entry.loxodromic()
    )
}

fn spectra(cli: &Cli) -> Result<(), LabError> {
    let exp = prepare(cli)?;
    let mut csv = String::from("word,length,jordan,cartan,holonomy,loxodromic\n");
    for e in exp.sample.entries() {
        csv.push_str(&spectra_row(e));
    }
    let path = write(&cli.out, "spectra.csv", &csv)?;
    println!("{} classes written to {}", exp.sample.len(), path.display());
    Ok(())
}

fn analyzed(cli: &Cli) -> Result<(Experiment, Analysis), LabError> {
    let exp = prepare(cli)?;
    let analysis = exp.analyze()?;
    Ok((exp, analysis))
}

fn cone(cli: &Cli) -> Result<(), LabError> {
    let (exp, an) = analyzed(cli)?;
    let report = corrlab::cone::ConeReport::build(
        &exp.sample,
        &an.model_cone,
        &an.growth,
        exp.phi.rows(),
        &exp.growth_settings(),
    );
    println!("hull rays: {}", report.hull_rays.len());
    println!("properness margin: {:.6}", an.properness_margin);
    println!("per-row exponents: {:?}", an.factor_deltas);
    write(&cli.out, "cone.json", &report.to_json())?;
    Ok(())
}

fn critical(cli: &Cli) -> Result<(), LabError> {
    let (_, an) = analyzed(cli)?;
    let c = &an.critical;
    println!("critical vector: {:?}", c.v_star);
    println!("value: {:.6}", c.value);
    println!("tangent form: {:?}", c.tangent.coefficients());
    println!("kernel residual: {:.3e}", c.kernel_residual);
    println!(
        "bound min_i delta_i r_i: {:.6} (margin {:.6}, satisfied {})",
        an.bound.bound, an.bound.margin, an.bound.satisfied
    );
    write(&cli.out, "critical.json", &json(&(c, &an.bound)))?;
    Ok(())
}

fn tube(cli: &Cli, samples: usize, t: f64) -> Result<(), LabError> {
    let (exp, an) = analyzed(cli)?;
    let dec = &an.decomposition;
    let upper = dec.spec_upper(t)?;
    let lower = dec.spec_lower(t)?;
    let rep = verify_difference_identity(&dec.tube, &upper, &lower, &exp.family, t, samples, exp.config.seed);
    println!(
        "identity at T = {t}: {} samples, {} in box, {} in boundary band, {} violations",
        rep.samples, rep.in_box, rep.ignored, rep.violations
    );
    write(
        &cli.out,
        "tube.txt",
        &dec.tube.to_text(&[("upper", &dec.upper), ("lower", &dec.lower)]),
    )?;
    write(&cli.out, "identity.json", &json(&rep))?;
    Ok(())
}

fn count(cli: &Cli) -> Result<(), LabError> {
    let (exp, an) = analyzed(cli)?;
    let j = exp.jordan_counts(&an)?;
    let c = exp.cartan_counts(&an)?;
    let series = CountSeries::new(&j, &c);
    let csv = series.to_csv()?;
    print!("{csv}");
    println!("horizons: jordan {:.4}, cartan {:.4}", j.horizon, c.horizon);
    write(&cli.out, "counts.csv", &csv)?;
    write(&cli.out, "truncation_counts.csv", &truncation_csv(&j, &c))?;
    Ok(())
}

fn predict(cli: &Cli) -> Result<(), LabError> {
    let (exp, an) = analyzed(cli)?;
    let holonomy = HolonomyGroup::from_sample(&exp.sample);
    let rows = exp.predictions(&an, &holonomy, &budget(&exp))?;
    let csv = prediction_csv(&rows)?;
    print!("{csv}");
    write(&cli.out, "predictions.csv", &csv)?;
    Ok(())
}

fn report(cli: &Cli) -> Result<(), LabError> {
    let (exp, an) = analyzed(cli)?;
    let rep = exp.report(&an, &budget(&exp))?;
    emit_report(&exp, &rep, &cli.out)?;
    print!("{}", rep.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Enumerate => enumerate(&cli),
        Command::Spectra => spectra(&cli),
        Command::Cone => cone(&cli),
        Command::Critical => critical(&cli),
        Command::Tube { samples, t } => tube(&cli, *samples, *t),
        Command::Count => count(&cli),
        Command::Predict => predict(&cli),
        Command::Report => report(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
