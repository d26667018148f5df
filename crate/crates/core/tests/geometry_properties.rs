//! Cones, critical vectors and box decompositions on randomized instances.

use corrlab::chamber::ChamberSpace;
use corrlab::cone::{LinearFunctional, LinearMapPhi};
use corrlab::critical::{CriticalVectorProblem, GeometricMeanModel};
use corrlab::hypertube::{build_from_box_family, verify_difference_identity, BoxFamily, TubeCoordinates};
use corrlab::polyhedral::PolyCone;
use nalgebra::DVector;
use proptest::prelude::*;

fn near_axis_cone(n: usize, spread: f64) -> PolyCone {
    let gens: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { spread }))
        .collect();
    PolyCone::from_generators(&gens).unwrap()
}

fn positive_vec(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cone_contains_convex_combinations(
        gens in prop::collection::vec(positive_vec(3, 0.05, 1.0), 3..7),
        weights in positive_vec(7, 0.0, 1.0),
    ) {
        let pts: Vec<DVector<f64>> = gens.iter().map(|g| DVector::from_vec(g.clone())).collect();
        let cone = PolyCone::from_generators(&pts).unwrap();
        for p in &pts {
            prop_assert!(cone.contains(p, 1e-9));
        }
        let combo = pts.iter().zip(&weights).fold(DVector::zeros(3), |a, (p, w)| a + p * *w);
        prop_assert!(cone.contains(&combo, 1e-9));
        prop_assert!(!cone.contains(&DVector::from_vec(vec![-1.0, -1.0, -1.0]), 1e-9));
        let wide = cone.dilated(1.2).unwrap();
        for p in &pts {
            prop_assert!(wide.facet_margin(&p.normalize()) >= -1e-12);
        }
    }

    #[test]
    fn geometric_mean_critical_vector_is_closed_form(
        n in 2usize..=3,
        a in positive_vec(3, 0.5, 2.0),
        r in 0.5f64..3.0,
        scale in 0.5f64..2.0,
    ) {
        // max (w₁⋯wₙ)^{1/n} on a·w = r is attained at wᵢ = r/(n aᵢ).
        let space = ChamberSpace::orthant(n).unwrap();
        let cone = near_axis_cone(n, 0.02);
        let model = GeometricMeanModel { scale, dim: n };
        let phi = LinearMapPhi::from_rows(vec![a[..n].to_vec()]).unwrap();
        let problem = CriticalVectorProblem::new(&model, &space, &phi, &[r], &cone).unwrap();
        let res = problem.solve(1e-7).unwrap();
        for i in 0..n {
            let expect = r / (n as f64 * a[i]);
            prop_assert!((res.v_star[i] - expect).abs() < 1e-5 * (1.0 + expect), "{:?}", res.v_star);
        }
        prop_assert!(res.kernel_residual < 1e-6);
        prop_assert!(res.seed_spread < 1e-4);
    }

    #[test]
    fn box_identity_on_random_families(
        v in positive_vec(3, 0.8, 1.2),
        eps in positive_vec(2, 0.1, 1.0),
        mix in 0.2f64..0.8,
        t in 2.0f64..40.0,
        seed in any::<u64>(),
    ) {
        let space = ChamberSpace::orthant(3).unwrap();
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]];
        let phi = LinearMapPhi::from_rows(rows.clone()).unwrap();
        let r = phi.apply(&v);
        let family = BoxFamily::new(phi, r, eps).unwrap();
        let psi = LinearFunctional::new(vec![mix, 1.0 - mix, 1.0 - mix]).unwrap();
        let cone = near_axis_cone(3, 0.25);
        let dec = build_from_box_family(&family, &space, &v, &psi, &cone, 1e-9).unwrap();
        let upper = dec.spec_upper(t).unwrap();
        let lower = dec.spec_lower(t).unwrap();
        for vert in dec.tube.q().vertices() {
            prop_assert!(upper.b.eval(vert) >= lower.b.eval(vert) - 1e-12);
        }
        let rep = verify_difference_identity(&dec.tube, &upper, &lower, &family, t, 3000, seed);
        prop_assert_eq!(rep.violations, 0);
        prop_assert!(rep.in_box > 0);
    }

    #[test]
    fn unit_offset_slab(x_frac in 0.0f64..1.0, y in -0.2f64..0.2, s in 0.0f64..1.0, t in 5.0f64..30.0) {
        let dec = corrlab::asymptotics::synthetic_decomposition(1.0).unwrap();
        let tube = &dec.tube;
        let m = tube.q().dim();
        let zero = corrlab::hypertube::OffsetFunction::constant(m, 0.0);
        let one = corrlab::hypertube::OffsetFunction::constant(m, 1.0);
        let base = dec.spec_upper(t).unwrap();
        let mut at_zero = base.clone();
        at_zero.b = zero;
        let mut at_one = base;
        at_one.b = one;
        // A point of Q: interpolate between two vertices.
        let verts = tube.q().vertices();
        let x = &verts[0] * (1.0 - x_frac) + &verts[verts.len() - 1] * x_frac;
        let k = tube.k_basis().ncols();
        let tt = t - 0.5 + 2.0 * s;
        let u = tube.assemble(&TubeCoordinates { x, y: DVector::from_element(k, y), t: tt });
        if tube.cone().facet_margin(&u) > 1e-9 {
            let in_one = tube.truncation_contains_intrinsic(&at_one, &u);
            let in_zero = tube.truncation_contains_intrinsic(&at_zero, &u);
            prop_assert_eq!(in_one && !in_zero, tt > t && tt <= t + 1.0);
        }
    }
}

#[test]
fn corrupted_offset_is_detected() {
    let dec = corrlab::asymptotics::synthetic_decomposition(1.0).unwrap();
    let phi = LinearMapPhi::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
    let family = BoxFamily::new(phi, vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
    let mut upper = dec.spec_upper(20.0).unwrap();
    let lower = dec.spec_lower(20.0).unwrap();
    assert_eq!(verify_difference_identity(&dec.tube, &upper, &lower, &family, 20.0, 5000, 3).violations, 0);
    upper.b = upper.b.shifted(0.1);
    assert!(verify_difference_identity(&dec.tube, &upper, &lower, &family, 20.0, 5000, 3).violations > 0);
}
