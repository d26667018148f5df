//! Truncation integrals against their closed-form constant, by quadrature
//! and Monte Carlo.

use corrlab::asymptotics::{
    integral_l_scaled, ratio_convergence_check, synthetic_decomposition, AsymptoticParams, Budget,
    DefectForm, IntegrationMethod,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dec = synthetic_decomposition(1.0)?;
    let form = DefectForm::euclidean(dec.tube.v().clone());
    let params = AsymptoticParams::unit(1.0)?;
    let budget = Budget::default();
    let rep = ratio_convergence_check(
        &dec.tube,
        &dec.upper,
        &dec.psi_v,
        &[10.0, 20.0, 40.0, 80.0, 160.0],
        &params,
        &form,
        &budget,
    )?;
    println!("     T      L e^-dT          c      ratio");
    for r in &rep.rows {
        println!("{:>6} {:>12.6e} {:>10.6e} {:>10.6}", r.t, r.l_scaled, r.c, r.ratio);
    }
    let spec = dec.spec_upper(120.0)?;
    let q = integral_l_scaled(&dec.tube, &spec, &params, &form, IntegrationMethod::Quadrature, &budget)?;
    let mc = integral_l_scaled(&dec.tube, &spec, &params, &form, IntegrationMethod::MonteCarlo, &budget)?;
    println!("T = 120: quadrature {q:.6e}, monte carlo {mc:.6e}, relative gap {:.2e}", (q - mc).abs() / q);
    Ok(())
}
