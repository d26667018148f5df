//! Recovering an exponential rate from a closed-form count series.

use corrlab::asymptotics::{predict_counts, AsymptoticParams, PredictionKind};
use corrlab::lab::{fit_exponent, CountKind, SeriesPoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 2;
    for delta in [0.4, 0.7, 1.0] {
        let params = AsymptoticParams::unit(delta)?;
        for (kind, pk) in [(CountKind::Jordan, PredictionKind::Jordan), (CountKind::Cartan, PredictionKind::Cartan)] {
            let points: Vec<SeriesPoint> = (1..=30)
                .map(|i| {
                    let t = i as f64;
                    SeriesPoint {
                        t,
                        count: predict_counts(pk, &params, 2.5, 0.0, 0.0, d, t),
                        censored: t > 25.0,
                    }
                })
                .collect();
            let fit = fit_exponent(&points, kind, d, None)?;
            println!(
                "delta {delta}: {kind:?} fit {:.9} (polynomial exponent {}, {} points)",
                fit.delta_hat,
                fit.poly_exponent_used,
                fit.points_used.len()
            );
        }
    }
    Ok(())
}
