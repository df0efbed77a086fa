use proptest::prelude::*;
use std::f64::consts::PI;
use thinfilm_core::error::Error;
use thinfilm_core::integrate::{integrate, IntegratorConfig, Trajectory};
use thinfilm_core::oscillation::*;
use thinfilm_core::polyfamily::{double_zero, eval_pbar, zeta0_root, PolyParams};
use thinfilm_core::shooting::{find_heteroclinic, ShootConfig};
use thinfilm_core::systems::{CompactField, FnField};
use thinfilm_core::transforms::{compact_of_phys, tau_of_xi};
use thinfilm_core::{ModelParams, PhysState};

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..IntegratorConfig::default()
    }
}

fn shifted_sine() -> Trajectory<2> {
    let f = FnField(|_t: f64, y: &[f64; 2]| [y[1], -(y[0] - 2.0)]);
    integrate(
        &f,
        [2.0 + 5f64.sin(), 5f64.cos()],
        (5.0, -30.0),
        &[],
        &tight(),
    )
    .unwrap()
}

#[test]
fn sine_maxima_are_located() {
    let seq = extract_extrema(&shifted_sine(), DEFAULT_PROMINENCE);
    assert_eq!(seq.maxima.len(), 6);
    for (k, &(t, phi)) in seq.maxima.iter().enumerate() {
        assert!(
            (t - (PI / 2.0 - 2.0 * PI * k as f64)).abs() < 1e-9,
            "k = {k}: {t}"
        );
        assert!((phi - 3.0).abs() < 1e-9);
    }
    for (k, &(t, phi)) in seq.minima.iter().enumerate() {
        assert!((t - (1.5 * PI - 2.0 * PI * k as f64)).abs() < 1e-9);
        assert!((phi - 1.0).abs() < 1e-9);
    }
    assert!(seq.interleaved());
}

#[test]
fn monotone_trajectory_has_no_extrema() {
    let f = FnField(|_t: f64, _y: &[f64; 2]| [1.0, 0.0]);
    let tr = integrate(&f, [1.0, 1.0], (0.0, -10.0), &[], &tight()).unwrap();
    assert_eq!(
        extract_extrema(&tr, DEFAULT_PROMINENCE),
        ExtremaSequence::default()
    );
}

#[test]
fn shallow_wiggles_are_filtered() {
    let f = FnField(|_t: f64, y: &[f64; 2]| [y[1], -(y[0] - 100.0)]);
    let tr = integrate(&f, [100.0, 1e-3], (0.0, -20.0), &[], &tight()).unwrap();
    assert!(extract_extrema(&tr, DEFAULT_PROMINENCE).maxima.is_empty());
    assert!(!extract_extrema(&tr, 0.0).maxima.is_empty());
}

#[test]
fn rescaling_identities_on_candidate() {
    let res = find_heteroclinic(
        &ModelParams::new(1.0),
        -1e-2,
        (-2.5e-3, 2.5e-3),
        &ShootConfig::default(),
    )
    .unwrap();
    let traj = &res.trajectory;
    let seq = extract_extrema(traj, DEFAULT_PROMINENCE);
    assert!(!seq.maxima.is_empty());
    for i in 0..seq.maxima.len() {
        let r = rescale_max(traj, &seq, i).unwrap();
        assert!((r.delta_n * r.phi_star.powi(3) - 1.0).abs() <= 1e-12);
        assert!((r.m_n * r.xi_star.abs().powf(17.0 / 3.0) / r.phi_star - 1.0).abs() <= 1e-12);
        assert!(r.beta_n < 0.0, "{r:?}");
        assert!((r.tau_star - tau_of_xi(r.xi_star)).abs() <= 1e-6 * (1.0 + r.tau_star.abs()));
    }
    assert!(rescale_max(traj, &seq, seq.maxima.len()).is_err());
    let rep = analyse(traj, DEFAULT_PROMINENCE, DEEP_THRESHOLD);
    assert_eq!(rep.rescaled.len(), seq.maxima.len());
    assert_eq!(rep.comparisons.len(), rep.rescaled.len());
    assert_eq!(rep.deep_maxima, seq.deep_maxima(DEEP_THRESHOLD).len());
    if rep.iteration.is_none() {
        assert!(rep.warnings.iter().any(|w| w.contains("iteration")));
    }
}

/// A compact trajectory started at `ξ*` on the polynomial profile with
/// `(M, β)`, run forward far enough to cover the comparison window.
fn polynomial_start(xi_star: f64, m: f64, beta: f64, a: f64, reach: f64) -> Trajectory<4> {
    let c = m.cbrt();
    let scale = xi_star.abs().powi(5) * m;
    let p = eval_pbar(0.0, &PolyParams::new(m, beta));
    let phys = PhysState {
        xi: xi_star,
        h: scale * p.value,
        dh: scale * p.d1 / (-xi_star * c),
        d2h: scale * p.d2 / (xi_star * xi_star * c * c),
    };
    let s = compact_of_phys(&phys).unwrap();
    let t0 = tau_of_xi(xi_star);
    let t1 = tau_of_xi(xi_star * (1.0 - c * reach));
    integrate(
        &CompactField {
            params: ModelParams::new(a),
        },
        s.to_array(),
        (t0, t1),
        &[],
        &tight(),
    )
    .unwrap()
}

#[test]
fn polynomial_profile_is_reproduced_far_out() {
    for xi_star in [-50.0, -100.0] {
        let m = 0.1;
        let beta = double_zero(m).unwrap().beta_star;
        let zeta0 = zeta0_root(&PolyParams::new(m, beta)).unwrap();
        let tr = polynomial_start(xi_star, m, beta, 1.0, zeta0);
        let tau_star = tau_of_xi(xi_star);
        let phi_star = tr.dense_eval(tau_star).unwrap()[0];
        let ax: f64 = -xi_star;
        let r = RescaledMax {
            tau_star,
            phi_star,
            xi_star,
            m_n: m,
            beta_n: beta,
            delta_n: 1.0 / (ax.powi(17) * m.powi(3)),
        };
        let cmp = compare_to_polynomial(&tr, &r).unwrap();
        assert!((cmp.zeta0 - zeta0).abs() < 1e-12);
        assert!((cmp.zeta_end - 0.9 * zeta0).abs() < 1e-12);
        assert!(cmp.beta_rel_gap < 1e-12);
        assert!(cmp.max_rel_dev < 0.05, "xi* = {xi_star}: {cmp:?}");
        assert!(
            cmp.d1_dev < 0.05 && cmp.d2_dev < 0.05,
            "xi* = {xi_star}: {cmp:?}"
        );
        assert_eq!(cmp.samples, 200);
    }
}

#[test]
fn comparison_needs_window_coverage() {
    let m = 0.1;
    let beta = double_zero(m).unwrap().beta_star;
    let tr = polynomial_start(-50.0, m, beta, 1.0, 0.1);
    let tau_star = tau_of_xi(-50.0);
    let r = RescaledMax {
        tau_star,
        phi_star: tr.dense_eval(tau_star).unwrap()[0],
        xi_star: -50.0,
        m_n: m,
        beta_n: beta,
        delta_n: 1.0,
    };
    assert!(matches!(
        compare_to_polynomial(&tr, &r),
        Err(Error::WindowEmpty(_))
    ));
}

#[test]
fn monotonicity_reads_backward() {
    let seq = ExtremaSequence {
        maxima: vec![(0.0, 1e8), (-1.0, 1e4), (-2.0, 3e2)],
        minima: vec![(-0.5, 1e-5), (-1.5, 1e-3)],
    };
    let m = check_monotonicity(&seq, 1e2);
    assert!(m.maxima_decrease_backward && m.minima_increase_backward);
    assert!(seq.interleaved());
    let flipped = ExtremaSequence {
        maxima: vec![(0.0, 3e2), (-1.0, 1e4)],
        minima: vec![],
    };
    assert!(!check_monotonicity(&flipped, 1e2).maxima_decrease_backward);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn planted_iteration_exponent(p in 5.0f64..15.0, lc in -2.0f64..2.0, start in 1.2f64..2.0) {
        let mut vals = vec![start];
        for _ in 0..3 {
            let last: f64 = *vals.last().unwrap();
            let next = lc + p * last.ln();
            prop_assume!(next < 600.0);
            vals.push(next.exp());
        }
        vals.reverse();
        let seq = ExtremaSequence {
            maxima: vals.iter().enumerate().map(|(i, v)| (-(i as f64), *v)).collect(),
            minima: vec![],
        };
        let fit = iteration_exponent(&seq, 0.0).unwrap();
        prop_assert!((fit.exponent_max - p).abs() < 1e-8 * p);
    }

    #[test]
    fn sine_extrema_for_any_phase(phase in 0.0f64..6.28, amp in 0.1f64..1.0) {
        let f = FnField(|_t: f64, y: &[f64; 2]| [y[1], -(y[0] - 2.0)]);
        let tr = integrate(&f, [2.0 + amp * phase.sin(), amp * phase.cos()], (0.0, -20.0), &[], &tight()).unwrap();
        let seq = extract_extrema(&tr, DEFAULT_PROMINENCE);
        for &(t, phi) in &seq.maxima {
            let k = ((t + phase - PI / 2.0) / (2.0 * PI)).round();
            prop_assert!((t + phase - PI / 2.0 - 2.0 * PI * k).abs() < 1e-8);
            prop_assert!((phi - 2.0 - amp).abs() < 1e-9);
        }
        prop_assert!(seq.interleaved());
        prop_assert!(seq.maxima.windows(2).all(|w| w[0].0 > w[1].0));
    }
}
