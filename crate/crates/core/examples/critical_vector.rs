//! Critical vector of a concave model on a slice of the chamber: the
//! closed-form geometric-mean case, then the estimate for a Schottky pair.

use corrlab::chamber::ChamberSpace;
use corrlab::cone::LinearMapPhi;
use corrlab::critical::{CriticalVectorProblem, GeometricMeanModel};
use corrlab::lab::config::bundled;
use corrlab::lab::Experiment;
use corrlab::polyhedral::PolyCone;
use nalgebra::DVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 2·sqrt(w1 w2) on the slice w1 + w2 = 1 peaks at (1/2, 1/2).
    let space = ChamberSpace::orthant(2)?;
    let cone = PolyCone::from_generators(&[DVector::from_vec(vec![1.0, 0.05]), DVector::from_vec(vec![0.05, 1.0])])?;
    let model = GeometricMeanModel { scale: 2.0, dim: 2 };
    let phi = LinearMapPhi::from_rows(vec![vec![1.0, 1.0]])?;
    let res = CriticalVectorProblem::new(&model, &space, &phi, &[1.0], &cone)?.solve(1e-8)?;
    println!("closed form: v* = {:?}, value {:.8}, tangent {:?}", res.v_star, res.value, res.tangent.coefficients());
    println!("kernel residual {:.2e}, seed spread {:.2e}", res.kernel_residual, res.seed_spread);

    let mut cfg = bundled("schottky-pair").expect("bundled configuration");
    cfg.max_word_length = 10;
    let exp = Experiment::prepare(cfg, std::path::Path::new("."), None)?;
    let an = exp.analyze()?;
    let c = &an.critical;
    println!("schottky pair: v* = {:?}", c.v_star);
    println!("  value {:.4}, kernel residual {:.2e}", c.value, c.kernel_residual);
    println!("  per-row bound {:.4}, margin {:.4}", an.bound.bound, an.bound.margin);
    Ok(())
}
