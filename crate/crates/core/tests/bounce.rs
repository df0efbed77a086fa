use proptest::prelude::*;
use thinfilm_core::bounce::*;
use thinfilm_core::integrate::{integrate, IntegratorConfig};
use thinfilm_core::systems::{rhs_frozen_plane, FnField, FrozenPlaneField};

fn vbar_default() -> SeparatrixTable {
    compute_separatrix(SeparatrixKind::Vbar, (-30.0, 30.0), 601).unwrap()
}

#[test]
fn critical_point_and_eigenvalues_closed_forms() {
    let pe = eig_pe();
    let u = 1.8f64.cbrt();
    assert!((pe.point.u - u).abs() <= 1e-10);
    assert!((pe.point.v + u * u / 3.0).abs() <= 1e-10);
    let c = (1.0f64 / 15.0).cbrt();
    assert!((pe.lambda_plus.re - 3.5 * c).abs() <= 1e-10);
    assert!((pe.lambda_plus.im - 0.5 * 11f64.sqrt() * c).abs() <= 1e-10);
    assert!((pe.lambda_minus - pe.lambda_plus.conj()).norm() <= 1e-10);
    assert!((pe.lambda_plus.re - 1.41918).abs() < 1e-5);
}

#[test]
fn region_labels_follow_isocline_signs() {
    let cases = [
        (0.0, 1.0, Region::R4),
        (0.0, -1.0, Region::R1),
        (3.0, -4.0, Region::R2),
        (2.0, -0.5, Region::R3),
        (-1.0, 1.0, Region::R5),
        (-5.0, 0.05, Region::R4),
    ];
    for (u, v, r) in cases {
        assert_eq!(classify_region(&PhasePoint { u, v }), r, "({u}, {v})");
    }
}

#[test]
fn vbar_frozen_values() {
    let t = vbar_default();
    assert_eq!(t.samples.len(), 601);
    assert!((t.eval(0.0).unwrap() - 1.0507572528624).abs() < 1e-9);
    assert!((t.eval(20.0).unwrap() - 213.535055035).abs() < 1e-6);
    assert!((t.eval(-20.0).unwrap() - 0.0249994792).abs() < 1e-9);
    assert!((t.eval(-20.0).unwrap() - 1.0 / 40.0).abs() < 0.05 / 40.0);
    assert!(t.eval(31.0).is_none());
}

#[test]
fn vbar_stays_in_r4_and_grows_quadratically() {
    let t = vbar_default();
    assert!(t
        .samples
        .iter()
        .all(|&(u, v)| classify_region(&PhasePoint { u, v }) == Region::R4));
    let wide = compute_separatrix(SeparatrixKind::Vbar, (-30.0, 100.0), 1301).unwrap();
    let e = vbar_correction_exponent(&wide, (10.0, 100.0)).unwrap();
    assert!(e <= 0.85, "correction exponent {e}");
    assert!((e - 0.78448).abs() < 1e-3);
    let u = 100.0;
    assert!((wide.eval(u).unwrap() / (0.5 * u * u) - 1.0).abs() < 0.05);
}

#[test]
fn vbar_request_below_seed_is_rejected() {
    assert!(compute_separatrix(SeparatrixKind::Vbar, (-1e4, 0.0), 10).is_err());
    assert!(compute_separatrix(SeparatrixKind::Vbar, (1.0, 0.0), 10).is_err());
}

#[test]
fn vhat_turns_at_frozen_abscissa_and_converges_to_pe() {
    let t = compute_separatrix(SeparatrixKind::Vhat, (1.25, 30.0), 300).unwrap();
    assert_eq!(t.u_range, (1.25, 30.0));
    let conv = vhat_convergence().unwrap();
    assert!(
        (conv.rate - conv.expected_rate).abs() / conv.expected_rate < 1e-3,
        "{conv:?}"
    );
    let full = compute_separatrix(SeparatrixKind::Vhat, (0.5, 30.0), 300).unwrap();
    assert!(
        (full.u_range.0 - 1.2157418802).abs() < 1e-8,
        "{:?}",
        full.u_range
    );
}

#[test]
fn matching_amplitude_frozen_and_scales_like_k5() {
    let (_, m) = matching_solution(1.0, (-1e6, 400.0)).unwrap();
    assert!(
        (m.amplitude_a - 0.604923895916).abs() < 1e-9 * 0.605 * 10.0,
        "{}",
        m.amplitude_a
    );
    assert!((m.gamma_out / m.amplitude_a - 1.0).abs() < 1e-2);
    let ratios: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&k| {
            matching_solution(k, default_matching_range(k))
                .unwrap()
                .1
                .amplitude_a
                / k.powi(5)
        })
        .collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo - 1.0 < 1e-2, "{ratios:?}");
}

#[test]
fn matching_rejects_shallow_seed() {
    assert!(matching_solution(1.0, (-10.0, 400.0)).is_err());
    assert!(matching_solution(-1.0, (-1e4, 400.0)).is_err());
}

#[test]
fn backward_perturbation_departs_from_incoming_line() {
    let d = matching_sensitivity(1.0, -1e4, 1e-3).unwrap();
    assert!((d - 2.4998).abs() < 1e-3, "{d}");
    assert!(matching_sensitivity(1.0, -1e4, 0.0).unwrap() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn neighbouring_orbits_contract_onto_vbar(u0 in -25.0f64..-5.0, dv in -0.5f64..0.5) {
        // Integrated forward in u, a nearby orbit ends closer to the separatrix.
        let t = vbar_default();
        let v0 = t.eval(u0).unwrap() * (1.0 + dv);
        let field = FnField(|u: f64, y: &[f64; 1]| {
            let f = rhs_frozen_plane(u, y[0]);
            [f[1] / f[0]]
        });
        let cfg = IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..IntegratorConfig::default() };
        let tr = integrate(&field, [v0], (u0, u0 + 4.0), &[], &cfg).unwrap();
        let gap0 = (v0 - t.eval(u0).unwrap()).abs();
        let gap1 = (tr.last_state()[0] - t.eval(u0 + 4.0).unwrap()).abs();
        prop_assert!(gap1 <= gap0 + 1e-9);
    }

    #[test]
    fn orbits_started_in_r4_remain_there(u0 in -3.0f64..3.0, v0 in 0.05f64..5.0) {
        let p = PhasePoint { u: u0, v: v0 };
        prop_assume!(classify_region(&p) == Region::R4);
        let cfg = IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..IntegratorConfig::default() };
        let tr = integrate(&FrozenPlaneField, [u0, v0], (0.0, 2.0), &[], &cfg).unwrap();
        for (_, y) in &tr.samples {
            let r = classify_region(&PhasePoint { u: y[0], v: y[1] });
            prop_assert!(r == Region::R4 || r == Region::OnIsocline);
        }
    }
}
