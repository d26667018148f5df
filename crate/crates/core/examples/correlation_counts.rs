//! Jordan and Cartan correlation counts for a Schottky pair, with the
//! truncation identity per grid point and exponent fits.

use corrlab::lab::config::bundled;
use corrlab::lab::{fit_exponent, CountKind, CountSeries, Experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_len = std::env::args().nth(1).map_or(Ok(10), |a| a.parse())?;
    let mut cfg = bundled("schottky-pair").expect("bundled configuration");
    cfg.max_word_length = max_len;
    let exp = Experiment::prepare(cfg, std::path::Path::new("."), None)?;
    let an = exp.analyze()?;
    let jordan = exp.jordan_counts(&an)?;
    let cartan = exp.cartan_counts(&an)?;
    let series = CountSeries::new(&jordan, &cartan);
    print!("{}", series.to_csv()?);
    println!("horizons: jordan {:.2}, cartan {:.2}", jordan.horizon, cartan.horizon);
    println!(
        "identity mismatches: jordan {:?}, cartan {:?}",
        jordan.identity_mismatches(),
        cartan.identity_mismatches()
    );
    let d = exp.phi.d();
    for kind in [CountKind::Jordan, CountKind::Cartan] {
        match fit_exponent(&series.points(kind), kind, d, None) {
            Ok(fit) => {
                let fit = fit.with_bound(&an.factor_deltas, &exp.config.r, 0.05);
                println!(
                    "{kind:?}: fitted exponent {:.4} from {} points, critical value {:.4}, bound {:?}",
                    fit.delta_hat,
                    fit.points_used.len(),
                    an.critical.value,
                    fit.bound
                );
            }
            Err(e) => println!("{kind:?}: {e}"),
        }
    }
    Ok(())
}
