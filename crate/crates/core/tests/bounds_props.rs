use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use safegov::bounds::{
    ellipsoid_contains, invariant_ellipsoid_check, peak_bound, BoundMethod, Ellipsoid, RelaxedLinearSystem,
};
use safegov::numkit::{spectral_abscissa, SymMatrix};
use safegov::sim::{monte_carlo_peak, DisturbanceKind, MonteCarloSpec};

fn system(a: &[f64], n: usize, b: &[f64], m: usize, c: &[f64]) -> Option<RelaxedLinearSystem> {
    let a = DMatrix::from_row_slice(n, n, a);
    let s = spectral_abscissa(&a).ok()?;
    let a = a - DMatrix::identity(n, n) * (s + 0.5);
    let b = DMatrix::from_row_slice(n, m, b);
    let c = DMatrix::from_row_slice(1, n, c);
    RelaxedLinearSystem::new(a, b, c, SymMatrix::identity(1)).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The Lyapunov certificate describes an invariant ellipsoid that holds
    /// the initial state, and the bound scales with the square of the input.
    /// The invariance test runs on `P / ||P||` with `B` scaled to match, so the
    /// absolute eigenvalue tolerance is applied at unit scale.
    #[test]
    fn lyapunov_certificate_and_scaling(
        a in prop::collection::vec(-2.0f64..2.0, 9),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        c in prop::collection::vec(-1.0f64..1.0, 3),
        z in prop::collection::vec(-1.0f64..1.0, 3),
        k in 0.2f64..5.0,
    ) {
        let Some(sys) = system(&a, 3, &b, 1, &c) else { return Ok(()) };
        prop_assume!(DVector::from_column_slice(&b).norm() > 1e-3);
        // uncontrollable draws have a singular Q and an infinite bound for z0 != 0
        let ult = peak_bound(&sys, &DVector::zeros(3), BoundMethod::Lyap).unwrap();
        prop_assume!(ult.certificate.is_positive_definite());
        let z0 = DVector::from_column_slice(&z);
        let pb = peak_bound(&sys, &z0, BoundMethod::Lyap).unwrap();
        // the certificate is Q; the invariant ellipsoid is {z : z^T Q^-1 z <= r}
        // with r = max(z0^T Q^-1 z0, 1)
        let q_inv = pb.certificate.inverse().unwrap();
        let r = q_inv.quad_form(&z0).max(1.0);
        let p = q_inv.scaled(1.0 / r);
        let scale = p.norm().max(1.0);
        let p_unit = p.scaled(1.0 / scale);
        let sys_unit = RelaxedLinearSystem::new(
            sys.a_bar().clone(), sys.b_bar() * scale.sqrt(), sys.c_bar().clone(), SymMatrix::identity(1),
        ).unwrap();
        prop_assert!(invariant_ellipsoid_check(&sys_unit, &p_unit, pb.alpha_star));
        let ell = Ellipsoid::new(p, DVector::zeros(3)).unwrap();
        prop_assert!(ellipsoid_contains(&ell, &(z0.clone() * (1.0 - 1e-9))));

        // scaling both B and z0 by k scales the peak by k^2
        let scaled = RelaxedLinearSystem::new(
            sys.a_bar().clone(), sys.b_bar() * k, sys.c_bar().clone(), SymMatrix::identity(1),
        ).unwrap();
        let pk = peak_bound(&scaled, &(z0 * k), BoundMethod::Lyap).unwrap();
        prop_assert!((pk.delta - k * k * pb.delta).abs() <= 1e-6 * pk.delta.max(1.0));
    }
}

#[test]
fn sampled_peaks_stay_below_both_bounds() {
    let a = [0.3, -1.0, 0.2, 0.5, 0.1, -0.7, 1.1, 0.4, -0.2];
    let sys = system(&a, 3, &[1.0, 0.5, -0.3, 0.2, 0.0, 1.0], 2, &[1.0, -0.5, 0.25]).unwrap();
    let z0 = DVector::from_vec(vec![0.5, -0.2, 0.3]);
    let spec = MonteCarloSpec { trials: 300, horizon_s: 15.0, hold_s: 0.05, sample_s: 0.005, kind: DisturbanceKind::Extremal };
    let mc = monte_carlo_peak(&sys, &z0, &spec, 5).unwrap();
    let lyap = peak_bound(&sys, &z0, BoundMethod::Lyap).unwrap().delta;
    let sdp = peak_bound(&sys, &z0, BoundMethod::Sdp).unwrap().delta;
    assert!(sdp <= lyap + 1e-6, "sdp {sdp} lyap {lyap}");
    assert!(mc.peak <= sdp + 1e-6, "sampled {} above sdp {sdp}", mc.peak);
}

#[test]
fn zero_disturbance_from_rest_has_zero_peak() {
    let sys = system(&[0.0; 4], 2, &[1.0, 1.0], 1, &[1.0, 0.0]).unwrap();
    let spec = MonteCarloSpec { trials: 4, horizon_s: 1.0, kind: DisturbanceKind::Zero, ..Default::default() };
    assert_eq!(monte_carlo_peak(&sys, &DVector::zeros(2), &spec, 0).unwrap().peak, 0.0);
}

#[test]
fn scalar_constant_input_peak_approaches_one() {
    let sys = RelaxedLinearSystem::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        SymMatrix::identity(1),
    )
    .unwrap();
    let spec = MonteCarloSpec { trials: 2, horizon_s: 20.0, hold_s: 20.0, sample_s: 0.01, kind: DisturbanceKind::Extremal };
    let peak = monte_carlo_peak(&sys, &DVector::zeros(1), &spec, 1).unwrap().peak;
    // x(t) = 1 - e^{-t}
    assert!(peak < 1.0 && (peak - (1.0 - (-20f64).exp()).powi(2)).abs() < 1e-12, "{peak}");
}
