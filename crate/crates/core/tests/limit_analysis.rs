use proptest::prelude::*;
use thinfilm_core::integrate::integrate;
use thinfilm_core::limit_analysis::*;
use thinfilm_core::systems::{LimitField, LimitState};

#[test]
fn eigen_structure_closed_forms() {
    let e = eigen_ps();
    let c = 3f64.cbrt();
    assert!((e.lambda1 + c).abs() <= 1e-10);
    assert!((e.lambda2.re - 0.5 * c).abs() <= 1e-10);
    assert!((e.lambda2.im - 0.5 * c * 3f64.sqrt()).abs() <= 1e-10);
    assert!(eigen_residuals(&e).iter().all(|r| *r <= 1e-10));
    assert_eq!(e.v1[2], 1.0);
}

#[test]
fn touchdown_branch_constant_is_stable_across_offsets() {
    let cfg = LimitRunConfig::default();
    let mut consts = vec![];
    for offset in [1e-5, 1e-6, 1e-7] {
        let r = dichotomy(StableSide::Minus, offset, 50.0, &cfg).unwrap();
        assert_eq!(r.verdict, LimitVerdict::Touchdown);
        assert!(r.tau_star.unwrap() < 0.0);
        consts.push(r.fit_constant);
    }
    let target = touchdown_constant();
    for c in &consts {
        assert!((c - target).abs() / target < 1e-3, "constant {c}");
        assert!(
            (c - 1.43730894).abs() < 1e-6,
            "frozen constant drifted: {c}"
        );
    }
    let spread = consts.iter().cloned().fold(f64::MIN, f64::max)
        / consts.iter().cloned().fold(f64::MAX, f64::min)
        - 1.0;
    assert!(spread < 1e-3);
}

#[test]
fn touchdown_times_shift_with_log_offset() {
    // Each decade of offset delays touchdown by ln 10 / 3^{1/3} in τ.
    let cfg = LimitRunConfig::default();
    let ts: Vec<f64> = [1e-5, 1e-6, 1e-7]
        .iter()
        .map(|o| {
            dichotomy(StableSide::Minus, *o, 50.0, &cfg)
                .unwrap()
                .tau_star
                .unwrap()
        })
        .collect();
    let step = 10f64.ln() / 3f64.cbrt();
    assert!(((ts[0] - ts[1]) - step).abs() < 1e-3);
    assert!(((ts[1] - ts[2]) - step).abs() < 1e-3);
}

#[test]
fn blowup_branch_follows_cubic_law() {
    let cfg = LimitRunConfig::default();
    let r = dichotomy(StableSide::Plus, 1e-6, 50.0, &cfg).unwrap();
    assert_eq!(r.verdict, LimitVerdict::BlowUp);
    assert!((r.fit_constant - 1.0).abs() < 0.05);
    assert!((r.fit_constant - 0.99999999995).abs() < 1e-8);
}

#[test]
fn seed_reconverges_forward() {
    let cfg = LimitRunConfig::default();
    for side in [StableSide::Plus, StableSide::Minus] {
        let d = forward_reconvergence_distance(side, 1e-4, 10.0, &cfg).unwrap();
        assert!(d < 1e-5, "{side:?}: {d}");
        for offset in [1e-4, 1e-5, 1e-6] {
            let d = forward_reconvergence_distance(side, offset, 5.0 / 3f64.cbrt(), &cfg).unwrap();
            assert!(d < offset, "{side:?}, {offset}: {d}");
        }
    }
}

#[test]
fn bad_offsets_rejected() {
    let cfg = LimitRunConfig::default();
    assert!(stable_manifold_trajectory(StableSide::Plus, 0.0, 10.0, &cfg).is_err());
    assert!(stable_manifold_trajectory(StableSide::Plus, 1e-3, 10.0, &cfg).is_err());
    assert!(stable_manifold_trajectory(StableSide::Plus, 1e-5, -1.0, &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn lyapunov_is_nondecreasing(phi in 0.3f64..3.0, w in -2.0f64..2.0, psi in -2.0f64..2.0, back in any::<bool>()) {
        let cfg = LimitRunConfig::default();
        let span = if back { (0.0, -20.0) } else { (0.0, 20.0) };
        let events = phi_events::<3>(cfg.eps_touch, cfg.phi_max);
        let tr = integrate(&LimitField, [phi, w, psi], span, &events, &cfg.integrator).unwrap();
        prop_assert!(lyapunov_violation(&tr) <= 1e-7);
    }

    #[test]
    fn lyapunov_rate_is_psi_squared(phi in 0.3f64..3.0, w in -2.0f64..2.0, psi in -2.0f64..2.0) {
        let s = LimitState { phi, w, psi };
        let f = thinfilm_core::systems::rhs_limit(&s);
        let h = 1e-6;
        let plus = LimitState { phi: phi + h * f[0], w: w + h * f[1], psi: psi + h * f[2] };
        let minus = LimitState { phi: phi - h * f[0], w: w - h * f[1], psi: psi - h * f[2] };
        let rate = (lyapunov(&plus) - lyapunov(&minus)) / (2.0 * h);
        prop_assert!((rate - psi * psi).abs() < 1e-6 * (1.0 + psi * psi + f.iter().map(|x| x.abs()).sum::<f64>()));
    }
}
