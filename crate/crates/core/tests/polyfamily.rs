use proptest::prelude::*;
use thinfilm_core::polyfamily::*;

fn log_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(-8.0 + 16.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Direct expansion in `Z`, independent of the shifted evaluation.
fn p_direct(z: f64, m: f64, beta: f64) -> f64 {
    (z - 1.0).powi(3) * (z * z + 3.0 * z + 6.0) / 60.0
        + m / 9.0 * (5.0 * z * z - 16.0 * z + 20.0)
        + beta / 2.0 * (z - 1.0).powi(2)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn double_zero_residuals_on_log_grid() {
    for m in log_grid(33) {
        let d = double_zero(m).unwrap();
        assert!(
            d.residual_value <= 1e-10 && d.residual_slope <= 1e-10,
            "m = {m}: {d:?}"
        );
        assert!(d.z_star > 1.0 && d.z_star < 4.0);
        assert!(d.beta_star < 0.0);
        assert!(d.second_deriv_at_star > 0.0);
    }
}

#[test]
fn double_zero_at_unit_m_is_frozen() {
    let d = double_zero(1.0).unwrap();
    assert!((d.beta_star + 2.0558146).abs() < 1e-7, "{}", d.beta_star);
    let p = PolyParams::new(1.0, d.beta_star);
    assert!(p_direct(d.z_star, 1.0, d.beta_star).abs() < 1e-12);
    assert!(eval_p(d.z_star, &p).d1.abs() < 1e-12);
}

#[test]
fn double_zero_locus_is_unique_in_interval() {
    for m in log_grid(9) {
        let n = 20000;
        let mut changes = 0;
        let mut prev = double_zero_residual(1.0 + 1e-12, m);
        for i in 1..=n {
            let z = 1.0 + 3.0 * i as f64 / n as f64;
            let r = double_zero_residual(z, m);
            if r.signum() != prev.signum() {
                changes += 1;
            }
            prev = r;
        }
        assert_eq!(changes, 1, "m = {m}");
    }
}

#[test]
fn small_m_asymptotics() {
    let m: f64 = 1e-8;
    let d = double_zero(m).unwrap();
    let c = m.cbrt();
    assert!(rel(d.z_star - 1.0, (12.0 * m).cbrt()) < 0.05);
    assert!(rel(d.beta_star, -(1.5 * m).cbrt()) < 0.05);
    let p = PolyParams::new(m, d.beta_star);
    let (z0, slope) = z0_root(&p).unwrap();
    assert!(rel(z0 - 1.0, -(12.0 * m).cbrt() / 2.0) < 0.05);
    assert!(rel(slope, 1.5f64.powf(5.0 / 3.0) * m.powf(2.0 / 3.0)) < 0.05);
    let zm = zeta_markers(m).unwrap();
    assert!(rel(zm.zeta_star, -12f64.cbrt() * (1.0 + c)) < 0.05);
    assert!(rel(zm.second_deriv_at_zeta_star, 1.5f64.cbrt()) < 0.05);
    assert!(rel(zm.zeta0, 1.5f64.cbrt()) < 0.05);
    assert!(rel(zm.slope_at_zeta0, -1.5f64.powf(5.0 / 3.0)) < 0.05);
    assert!((zm.zeta_star + 2.28443).abs() < 1e-4);
}

#[test]
fn large_m_asymptotics() {
    let m: f64 = 1e8;
    let d = double_zero(m).unwrap();
    assert!((d.z_star - 4.0).abs() < 1e-2);
    assert!(rel(d.beta_star, -8.0 * m / 9.0) < 0.05);
    let p = PolyParams::new(m, d.beta_star);
    let (z0, slope) = z0_root(&p).unwrap();
    assert!(rel(z0, -(20.0 * m / 3.0).cbrt()) < 0.05);
    assert!(rel(slope, (20.0f64 / 3.0).cbrt() * m.powf(4.0 / 3.0) / 3.0) < 0.05);
}

#[test]
fn intermediate_grid_points_behave() {
    for m in [1e-6, 1e6] {
        let zm = zeta_markers(m).unwrap();
        assert!(zm.zeta_star < 0.0 && zm.zeta0 > 0.0 && zm.slope_at_zeta0 < 0.0);
    }
}

#[test]
fn trichotomy_at_unit_m() {
    let bs = double_zero(1.0).unwrap().beta_star;
    assert!(matches!(
        count_roots_right(&PolyParams::new(1.0, bs + 0.1)).unwrap(),
        RootCount::ZeroRoots
    ));
    match count_roots_right(&PolyParams::new(1.0, bs)).unwrap() {
        RootCount::DoubleRoot(z) => assert!((z - double_zero(1.0).unwrap().z_star).abs() < 1e-4),
        other => panic!("expected a double root, got {other:?}"),
    }
    match count_roots_right(&PolyParams::new(1.0, bs - 0.1)).unwrap() {
        RootCount::TwoRoots(l, r) => {
            assert!(1.0 < l && l < r);
            assert!(
                p_direct(l, 1.0, bs - 0.1).abs() < 1e-12
                    && p_direct(r, 1.0, bs - 0.1).abs() < 1e-12
            );
        }
        other => panic!("expected two roots, got {other:?}"),
    }
}

#[test]
fn slope_constant_is_frozen() {
    let grid: Vec<f64> = (0..=60)
        .map(|i| 10f64.powf(-3.0 + 0.1 * i as f64))
        .collect();
    let c0 = fitted_slope_constant(&grid).unwrap();
    assert!((c0 - 1.72898).abs() < 1e-4, "{c0}");
}

#[test]
fn nonpositive_m_rejected() {
    assert!(double_zero(0.0).is_err());
    assert!(double_zero(-1.0).is_err());
    assert!(z0_root(&PolyParams::new(f64::NAN, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn shifted_evaluation_matches_direct(z in -5.0f64..6.0, lm in -3.0f64..3.0, beta in -5.0f64..5.0) {
        let m = 10f64.powf(lm);
        let v = eval_p(z, &PolyParams::new(m, beta));
        let d = p_direct(z, m, beta);
        prop_assert!((v.value - d).abs() <= 1e-12 * (1.0 + d.abs() + m * 10.0 + z.powi(5).abs()));
        prop_assert!((v.d3 - z * z).abs() <= 1e-12 * (1.0 + z * z));
    }

    #[test]
    fn rescaled_matches_original(zeta in -4.0f64..4.0, lm in -4.0f64..4.0, beta in -3.0f64..0.0) {
        let m = 10f64.powf(lm);
        let c = m.cbrt();
        let p = PolyParams::new(m, beta);
        let bar = eval_pbar(zeta, &p);
        let orig = eval_p(1.0 - c * zeta, &p);
        let scale = 1.0 + bar.value.abs() + (c * zeta).abs().powi(5) / m + zeta.abs().powi(3) + beta.abs() * zeta * zeta / c;
        prop_assert!((bar.value - orig.value / m).abs() <= 1e-10 * scale);
        prop_assert!((bar.d1 + c * orig.d1 / m).abs() <= 1e-9 * scale);
    }

    #[test]
    fn root_count_is_monotone_in_beta(lm in -4.0f64..4.0, db in 1e-3f64..1.0) {
        let m = 10f64.powf(lm);
        let bs = double_zero(m).unwrap().beta_star;
        let step = db * bs.abs().max(1e-3);
        let above = matches!(count_roots_right(&PolyParams::new(m, bs + step)).unwrap(), RootCount::ZeroRoots);
        let below = matches!(count_roots_right(&PolyParams::new(m, bs - step)).unwrap(), RootCount::TwoRoots(..));
        prop_assert!(above && below);
    }

    #[test]
    fn zeta0_is_a_root_of_rescaled(lm in -6.0f64..6.0) {
        let m = 10f64.powf(lm);
        let bs = double_zero(m).unwrap().beta_star;
        let p = PolyParams::new(m, bs);
        let z0 = zeta0_root(&p).unwrap();
        prop_assert!(z0 > 0.0);
        prop_assert!(eval_pbar(z0, &p).value.abs() < 1e-8);
    }
}
