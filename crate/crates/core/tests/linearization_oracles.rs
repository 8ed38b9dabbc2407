use nalgebra::DVector;
use proptest::prelude::*;
use safegov::linearization::{
    ackermann_plant, brunovsky_realization, feedback_linearize, AckermannParams, NonlinearPlant,
};
use safegov::sim::step_plant;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Along the closed-loop vector field, `d/dt Phi(x) = A Phi(x) + B v`,
    /// checked with a central difference of the coordinate map.
    #[test]
    fn linearized_coordinates_follow_integrator_chains(
        psi in -3.0f64..3.0, delta in -1.2f64..1.2, v in 0.2f64..4.0, a in -2.0f64..2.0,
        v1 in -3.0f64..3.0, v2 in -3.0f64..3.0, l in 0.3f64..2.0,
    ) {
        let plant = ackermann_plant(AckermannParams::new(l, 10.0, 0.05).unwrap());
        let real = brunovsky_realization(plant.relative_degree()).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, psi, delta, v, a]);
        let vcmd = DVector::from_vec(vec![v1, v2]);
        let u = feedback_linearize(&plant, &x, &vcmd).unwrap();
        let field = plant.drift(&x) + plant.input_matrix(&x) * &u;
        let h = 1e-6;
        let fd = (plant.coordinate_map(&(&x + &field * h)) - plant.coordinate_map(&(&x - &field * h))) / (2.0 * h);
        let expect = &real.a * plant.coordinate_map(&x) + &real.b * &vcmd;
        let scale = 1.0 + expect.amax();
        let err = (fd - &expect).amax();
        prop_assert!(err < 1e-6 * scale, "mismatch {}", err);
    }
}

/// Integrates the plant under the linearizing law and recovers the output
/// jerk by a fourth-order finite difference.
#[test]
fn output_jerk_equals_virtual_input() {
    let plant = ackermann_plant(AckermannParams::new(0.8, 10.0, 0.05).unwrap());
    let vcmd = DVector::from_vec(vec![0.7, -0.4]);
    let dt = 1e-3;
    let mut x = DVector::from_vec(vec![0.0, 0.0, 0.3, 0.1, 1.5, 0.2]);
    let zero = DVector::zeros(2);
    let mut ys = Vec::new();
    for k in 0..9 {
        ys.push(plant.output(&x));
        let u = feedback_linearize(&plant, &x, &vcmd).unwrap();
        x = step_plant(&plant, k as f64 * dt, &x, &u, &zero, dt).unwrap();
    }
    // third derivative at the centre sample, O(h^4) stencil
    let c = 4;
    let jerk = (-&ys[c + 3] + &ys[c + 2] * 8.0 - &ys[c + 1] * 13.0 + &ys[c - 1] * 13.0 - &ys[c - 2] * 8.0 + &ys[c - 3])
        / (8.0 * dt * dt * dt);
    assert!((&jerk - &vcmd).amax() < 1e-3, "jerk {jerk:?}");
}
