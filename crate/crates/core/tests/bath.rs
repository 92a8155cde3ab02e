use heom_core::bath::*;
use heom_core::quad::{integrate_real, QuadOptions};
use proptest::prelude::*;

#[test]
fn ohmic_fit_is_small_and_holds_off_grid() {
    let spec = BathSpec::reference(1.0);
    let grid = TimeGrid::for_bath(&spec, 200.0, 300);
    let report = fit_modes(&spec, &grid, &FitOptions::for_spec(&spec)).unwrap();
    assert!(report.modes.len() <= 10, "K = {}", report.modes.len());
    assert!(report.residual <= 1e-3);

    let oracle = CorrelationOracle::new(spec).unwrap();
    let held = TimeGrid::held_out(&spec, 200.0, 150);
    let worst = held
        .times
        .iter()
        .map(|&t| (report.modes.correlation(t) - oracle.eval(t).unwrap()).norm())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3 * oracle.c0(), "held-out error {:e}", worst / oracle.c0());

    for w in [1.0, -1.0] {
        let rel = (report.modes.noise_power(w) - spec.noise_power(w)).abs() / spec.noise_power(w);
        assert!(rel < 1e-2, "S({w}) off by {rel:e}");
    }

    let table = ModeTable { spec, modes: report.modes.clone(), residual: report.residual };
    let back = read_modes(&write_modes(&table)).unwrap();
    assert_eq!(back, table);
}

#[test]
fn correlation_at_zero_is_the_integral_of_the_noise_power() {
    let spec = BathSpec::reference(0.5);
    let oracle = CorrelationOracle::new(spec).unwrap();
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_panels: 100_000 };
    let g = |w: f64| spec.noise_power(w) + spec.noise_power(-w);
    // ω = u² near zero, where S grows like ω^{s−1}; ω = 40/v for the tail.
    let (a, _) = integrate_real(|u| 2.0 * u * g(u * u), 0.0, 1.0, 16, opts).unwrap();
    let (b, _) = integrate_real(g, 1.0, 40.0, 64, opts).unwrap();
    let (tail, _) = integrate_real(|v: f64| if v <= 0.0 { 0.0 } else { g(40.0 / v) * 40.0 / (v * v) }, 0.0, 1.0, 16, opts).unwrap();
    let c0 = oracle.eval(0.0).unwrap();
    assert!((c0.re - (a + b + tail)).abs() < 1e-8 * c0.re, "{} vs {}", c0.re, a + b + tail);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detailed_balance(s in 0.05f64..1.5, w in 0.01f64..20.0) {
        let spec = BathSpec::reference(s);
        let ratio = spec.noise_power(-w) / spec.noise_power(w);
        prop_assert!((ratio / (-spec.beta * w).exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mode_spectrum_is_the_transform_of_its_correlation(
        d_re in -1.0f64..1.0, d_im in -1.0f64..1.0, omega in -3.0f64..3.0, gamma in 0.2f64..4.0, w in -4.0f64..4.0,
    ) {
        let mode = Mode { d_re, d_im, omega, gamma };
        let modes = BathModes::new(vec![mode]).unwrap();
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_panels: 100_000 };
        let t_end = 40.0 / gamma;
        let (re, _) = integrate_real(|t| (mode.eval(t) * num_complex::Complex64::new(0.0, w * t).exp()).re, 0.0, t_end, 64, opts).unwrap();
        let numeric = re / std::f64::consts::PI;
        prop_assert!((modes.noise_power(w) - numeric).abs() < 1e-8, "{} vs {}", modes.noise_power(w), numeric);
    }

    #[test]
    fn sub_ohmic_spectrum_follows_its_power_law(s in 0.05f64..1.0, w in 1e-4f64..1e-2) {
        let spec = BathSpec::reference(s);
        let expected = spec.kappa * w.powf(s);
        prop_assert!((spec.spectral_density(w) / expected - 1.0).abs() < 1e-6);
    }
}
