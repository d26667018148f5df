//! Box decomposition of a correlation box into a difference of two hypertube
//! truncations, checked by sampling.

use corrlab::asymptotics::synthetic_decomposition;
use corrlab::cone::LinearMapPhi;
use corrlab::hypertube::{verify_difference_identity, BoxFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dec = synthetic_decomposition(1.0)?;
    let phi = LinearMapPhi::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]])?;
    let family = BoxFamily::new(phi, vec![1.0, 2.0], vec![0.5, 0.5])?;
    println!("{}", dec.tube.to_text(&[("upper", &dec.upper), ("lower", &dec.lower)]));
    for t in [5.0, 20.0, 80.0] {
        let upper = dec.spec_upper(t)?;
        let lower = dec.spec_lower(t)?;
        let rep = verify_difference_identity(&dec.tube, &upper, &lower, &family, t, 20_000, 1);
        println!(
            "T = {t:>4}: {} samples, {} in the box, {} violations",
            rep.samples, rep.in_box, rep.violations
        );
    }
    let shifted = dec.spec_upper(20.0)?;
    let mut corrupted = shifted.clone();
    corrupted.b = shifted.b.shifted(0.1);
    let rep = verify_difference_identity(&dec.tube, &corrupted, &dec.spec_lower(20.0)?, &family, 20.0, 20_000, 1);
    println!("upper offset shifted by 0.1: {} violations", rep.violations);
    Ok(())
}
