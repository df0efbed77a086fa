use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use thinfilm_core::integrate::{integrate, IntegratorConfig};
use thinfilm_core::systems::{rhs_compact, rhs_limit, CompactField, OriginalField};
use thinfilm_core::transforms::*;
use thinfilm_core::{LimitState, ModelParams};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn critical_point_maps_to_far_field_profile() {
    // Φ = 1, W = Ψ = 0 is H = (ξ²+1)^{-1/3} at every ξ.
    for &xi in &[-40.0, -1.0, 0.0, 2.0, 300.0] {
        let p = phys_of_compact(&CompactState {
            phi: 1.0,
            w: 0.0,
            psi: 0.0,
            theta: theta_of_xi(xi),
        })
        .unwrap();
        let q = xi * xi + 1.0;
        assert!(rel(p.h, q.powf(-1.0 / 3.0)) < 1e-12);
        assert!((p.dh + (2.0 / 3.0) * xi * q.powf(-4.0 / 3.0)).abs() < 1e-12);
    }
}

#[test]
fn slices_are_rejected_by_inverse_maps() {
    for theta in [FRAC_PI_2, -FRAC_PI_2] {
        let s = CompactState {
            phi: 1.0,
            w: 0.0,
            psi: 0.0,
            theta,
        };
        assert!(s.on_slice());
        assert!(phys_of_compact(&s).is_err());
    }
}

#[test]
fn tau_grows_like_power_law() {
    // τ(ξ) ~ (9/17) ξ^{17/9} for large ξ.
    let x = 1e4;
    assert!(rel(tau_of_xi(x), 9.0 / 17.0 * x.powf(17.0 / 9.0)) < 1e-3);
}

#[test]
fn compact_system_on_slice_equals_limit_system() {
    let p = ModelParams::new(0.7);
    for theta in [FRAC_PI_2, -FRAC_PI_2] {
        let s = CompactState {
            phi: 1.3,
            w: -0.2,
            psi: 0.4,
            theta,
        };
        let c = rhs_compact(&s, &p);
        let l = rhs_limit(&LimitState {
            phi: 1.3,
            w: -0.2,
            psi: 0.4,
        });
        assert_eq!(&c[..3], &l[..]);
        assert_eq!(c[3], 0.0);
    }
}

#[test]
fn compact_and_original_systems_agree() {
    // Integrate the physical equation in ξ and the compact system in τ from
    // the same state and compare at the common endpoint.
    let cfg = IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorConfig::default()
    };
    for &a in &[-2.0, 0.0, 1.0] {
        let params = ModelParams::new(a);
        let start = PhysState {
            xi: -1.5,
            h: 0.9,
            dh: 0.3,
            d2h: -0.2,
        };
        let xi_end = 1.2;
        let orig = integrate(
            &OriginalField { params },
            [start.h, start.dh, start.d2h],
            (start.xi, xi_end),
            &[],
            &cfg,
        )
        .unwrap();
        let c0 = compact_of_phys(&start).unwrap();
        let (t0, t1) = (tau_of_xi(start.xi), tau_of_xi(xi_end));
        let comp = integrate(&CompactField { params }, c0.to_array(), (t0, t1), &[], &cfg).unwrap();
        let end = CompactState::from_array(&comp.last_state());
        assert!(
            (end.theta - theta_of_xi(xi_end)).abs() < 1e-10,
            "theta drift at a = {a}"
        );
        let p = phys_of_compact(&end).unwrap();
        let y = orig.last_state();
        assert!(
            (p.h - y[0]).abs() < 1e-8,
            "H mismatch at a = {a}: {} vs {}",
            p.h,
            y[0]
        );
        assert!((p.dh - y[1]).abs() < 1e-8);
        assert!((p.d2h - y[2]).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn phys_compact_round_trip(xi in -1e3f64..1e3, h in 0.01f64..10.0, dh in -5.0f64..5.0, d2h in -5.0f64..5.0) {
        let s = PhysState { xi, h, dh, d2h };
        let back = phys_of_compact(&compact_of_phys(&s).unwrap()).unwrap();
        let scale = 1.0 + xi.abs();
        prop_assert!((back.xi - xi).abs() <= 1e-12 * scale * scale);
        prop_assert!(rel(back.h, h) < 1e-10);
        prop_assert!((back.dh - dh).abs() < 1e-9 * (1.0 + dh.abs()));
        prop_assert!((back.d2h - d2h).abs() < 1e-8 * (1.0 + d2h.abs()));
    }

    #[test]
    fn compact_phys_round_trip(theta in -1.5f64..1.5, phi in 0.01f64..10.0, w in -5.0f64..5.0, psi in -5.0f64..5.0) {
        let s = CompactState { phi, w, psi, theta };
        let back = compact_of_phys(&phys_of_compact(&s).unwrap()).unwrap();
        prop_assert!((back.theta - theta).abs() < 1e-14);
        prop_assert!(rel(back.phi, phi) < 1e-12);
        prop_assert!((back.w - w).abs() < 1e-10 * (1.0 + w.abs()));
        prop_assert!((back.psi - psi).abs() < 1e-10 * (1.0 + psi.abs()));
    }

    #[test]
    fn tau_is_odd_and_increasing(x in 0.0f64..500.0, dx in 1e-3f64..10.0) {
        prop_assert_eq!(tau_of_xi(-x), -tau_of_xi(x));
        prop_assert!(tau_of_xi(x + dx) > tau_of_xi(x));
    }

    #[test]
    fn xi_tau_round_trip(xi in -1e4f64..1e4) {
        let back = xi_of_tau(tau_of_xi(xi)).unwrap();
        prop_assert!((back - xi).abs() <= 1e-9 * (1.0 + xi.abs()));
    }

    #[test]
    fn angle_rate_matches_tau_map(xi in -200.0f64..200.0) {
        // dθ/dτ from the system equals (dθ/dξ)/(dτ/dξ).
        let s = CompactState { phi: 1.0, w: 0.0, psi: 0.0, theta: theta_of_xi(xi) };
        let rate = rhs_compact(&s, &ModelParams::new(0.0))[3];
        let expected = 1.0 / ((xi * xi + 1.0) * dtau_dxi(xi));
        prop_assert!(rel(rate, expected) < 1e-12);
    }

    #[test]
    fn bounce_round_trip(xi in -50.0f64..50.0, h in 1e-3f64..10.0, dh in -5.0f64..5.0, d2h in -5.0f64..5.0) {
        let s = PhysState { xi, h, dh, d2h };
        let back = phys_of_bounce(&bounce_of_phys(&s).unwrap()).unwrap();
        prop_assert_eq!(back.xi, xi);
        prop_assert!(rel(back.h, h) < 1e-14);
        prop_assert!((back.dh - dh).abs() < 1e-13 * (1.0 + dh.abs()));
        prop_assert!((back.d2h - d2h).abs() < 1e-12 * (1.0 + d2h.abs()));
    }
}
