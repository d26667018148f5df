//! Limit cone, growth indicator and per-row exponents for a pair of
//! Schottky subgroups of SL(2, R), from classes up to length 10.

use corrlab::cone::ConeReport;
use corrlab::lab::config::bundled;
use corrlab::lab::Experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = bundled("schottky-pair").expect("bundled configuration");
    cfg.max_word_length = 10;
    let exp = Experiment::prepare(cfg, std::path::Path::new("."), None)?;
    let an = exp.analyze()?;
    println!("classes: {}", exp.sample.len());
    println!("limit cone rays (ambient):");
    for ray in an.full_cone.rays_ambient() {
        println!("  {ray:?}");
    }
    println!("properness margin of phi: {:.4}", an.properness_margin);
    println!("per-row exponents: {:?}", an.factor_deltas);
    let report = ConeReport::build(&exp.sample, &an.model_cone, &an.growth, exp.phi.rows(), &exp.growth_settings());
    println!("growth indicator on {} grid directions:", report.growth_grid.len());
    for g in report.growth_grid.iter().step_by(4) {
        println!("  {:?} -> {:.4}", g.direction, g.psi_hat);
    }
    Ok(())
}
