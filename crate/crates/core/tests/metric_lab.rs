use nalgebra::DMatrix;
use proptest::prelude::*;
use ybl_core::certify::build_certificate;
use ybl_core::metric::{
    axis_energy_from_metric, curvature_expansion_check, error_term_norms, exp_deviation, glued_h, loglog_slope,
    matrix_exp, matrix_exp_eigen, scalar_curvature_near_flat, single_bump_sup, Bump, Cutoff, ErrorTermConfig,
    SingleBumpProfile,
};
use ybl_core::radial::f_axis;
use ybl_core::report::rel_diff;
use ybl_core::{GluedBumpSpec, LabError, MetricAtPoint, PerturbParams, WeylForm};

fn tau25() -> f64 {
    build_certificate(25).unwrap().tau_f64()
}

fn symmetric(n: usize, vals: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| vals[i * n + j]);
    (&m + m.transpose()) * 0.5
}

#[test]
fn parameter_validation() {
    assert!(PerturbParams::new(0.0, 0.5, 0.5).is_err());
    assert!(PerturbParams::new(0.1, 1.5, 0.5).is_err());
    assert!(PerturbParams::new(0.6, 0.5, 0.5).is_err());
    let p = PerturbParams::new(0.1, 0.5, 0.5).unwrap();
    assert_eq!(p.outer_radius(), 0.75);
}

#[test]
fn bump_vanishes_outside_its_support() {
    let w = WeylForm::random_factored(6, 4, 2).unwrap();
    let p = PerturbParams::new(0.1, 0.5, 0.4).unwrap();
    let bump = Bump::centered(&w, SingleBumpProfile::new(-7.0, p));
    let mut x = vec![0.0; 6];
    x[2] = p.outer_radius();
    assert_eq!(bump.h(&x).norm(), 0.0);
    assert_eq!(bump.h(&[0.0; 6]).norm(), 0.0);
    x[2] = 0.05;
    x[4] = 0.03;
    assert!(bump.h(&x).norm() > 0.0);
}

#[test]
fn sup_norm_scales_with_lambda_to_the_eighth() {
    let w = WeylForm::random_factored(8, 4, 3).unwrap();
    let a = single_bump_sup(&w, -7.0, PerturbParams::new(0.02, 0.5, 0.5).unwrap(), 500, 1);
    let b = single_bump_sup(&w, -7.0, PerturbParams::new(0.01, 0.5, 0.5).unwrap(), 500, 1);
    assert!(rel_diff(a / b, 256.0) < 1e-9, "{}", a / b);
}

#[test]
fn glued_spec_rejects_a_band_ending_at_two() {
    let full = Cutoff { start: 1.0, end: 2.0 };
    assert!(matches!(GluedBumpSpec::with_cutoff(20, 60, full), Err(LabError::OverlappingSupports(_))));
    assert!(GluedBumpSpec::new(0, 10).is_err());
    assert!(GluedBumpSpec::new(30, 20).is_err());
}

#[test]
fn glued_field_vanishes_at_centres_and_far_away() {
    let spec = GluedBumpSpec::new(20, 60).unwrap();
    let w = WeylForm::random_factored(25, 4, 7).unwrap();
    let tau = tau25();
    for nn in [20, 37, 60] {
        assert_eq!(glued_h(&spec, &w, tau, &spec.center(nn, 25)).norm(), 0.0);
        assert_eq!(spec.active(&spec.center(nn, 25)), vec![nn]);
    }
    let mut far = vec![0.0; 25];
    far[0] = 0.5;
    assert_eq!(glued_h(&spec, &w, tau, &far).norm(), 0.0);
    far[0] = -0.01;
    assert!(spec.active(&far).is_empty());
}

#[test]
fn axis_energy_two_ways() {
    let w = WeylForm::random_factored(25, 4, 5).unwrap();
    let tau = tau25();
    for eps in [0.8, 1.0, 1.4] {
        let a = axis_energy_from_metric(&w, tau, eps).unwrap();
        let b = f_axis(25, tau, &w, eps).unwrap();
        assert!(rel_diff(a, b) < 1e-6, "eps = {eps}: {a} vs {b}");
    }
}

#[test]
fn zero_field_has_zero_curvature_and_remainder() {
    let w = WeylForm::random_factored(6, 4, 1).unwrap().scaled(0.0);
    let p = PerturbParams::new(0.1, 0.5, 0.5).unwrap();
    let bump = Bump::centered(&w, SingleBumpProfile::new(-7.0, p));
    let pt = curvature_expansion_check(&bump, &[0.05, 0.02, 0.0, 0.0, 0.01, 0.0], 1e-4).unwrap();
    assert_eq!(pt.r_numeric, 0.0);
    assert_eq!(pt.r_expansion, 0.0);
}

#[test]
fn conformally_flat_curvature() {
    // g = (1 + |x|^2/4)^-2 I in dimension 4, scalar curvature n(n-1) = 12.
    let dev = |p: &[f64]| -> ybl_core::Result<DMatrix<f64>> {
        let r2: f64 = p.iter().map(|v| v * v).sum();
        let c = (1.0 + r2 / 4.0).powi(-2) - 1.0;
        Ok(DMatrix::identity(4, 4) * c)
    };
    let r = scalar_curvature_near_flat(&dev, &[0.2, -0.1, 0.3, 0.05], 1e-3).unwrap();
    assert!((r.value - 12.0).abs() < 1e-5, "{r:?}");
}

#[test]
fn error_term_is_tiny_and_shrinks_with_lambda() {
    let w = WeylForm::random_factored(25, 4, 7).unwrap();
    let tau = tau25();
    let configs: Vec<ErrorTermConfig> = [0.04, 0.02]
        .iter()
        .map(|&l| ErrorTermConfig::standard(25, PerturbParams::new(l, 0.5, 0.5).unwrap()).unwrap())
        .collect();
    let norms: Vec<f64> = error_term_norms(&w, tau, &configs, 4000, 3).unwrap().iter().map(|e| e.value).collect();
    assert!(norms.iter().all(|v| *v > 0.0 && *v < 1e-6), "{norms:?}");
    let slope = loglog_slope(&[0.04, 0.02], &norms);
    assert!((slope - 8.0).abs() < 0.5, "{slope}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_of_tracefree_has_unit_determinant(n in 2usize..8, vals in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let mut h = symmetric(n, &vals);
        let t = h.trace() / n as f64;
        for i in 0..n {
            h[(i, i)] -= t;
        }
        let (g, gi) = matrix_exp(&h).unwrap();
        prop_assert!((g.determinant() - 1.0).abs() < 1e-12 * g.norm().powi(n as i32));
        let id = DMatrix::<f64>::identity(n, n);
        prop_assert!((&g * &gi - &id).amax() < 1e-12 * g.norm() * gi.norm());
        let e = matrix_exp_eigen(&h).unwrap();
        prop_assert!((&g - &e).amax() < 1e-10 * g.norm());
    }

    #[test]
    fn deviation_is_accurate_for_small_fields(n in 2usize..8, vals in proptest::collection::vec(-1.0f64..1.0, 64), scale in 1e-12f64..1e-3) {
        let h = symmetric(n, &vals) * scale;
        let d = exp_deviation(&h);
        let series = &h + &h * &h * 0.5;
        let hn = h.norm();
        prop_assert!((&d - &series).norm() <= hn.powi(3) + 1e-15 * hn);
    }

    #[test]
    fn metric_at_a_point_is_positive_definite(seed in 0u64..500, k in 0usize..6) {
        let w = WeylForm::random_factored(5, 3, seed).unwrap();
        let x: Vec<f64> = (0..5).map(|i| ((i + k) as f64 * 0.7).sin()).collect();
        let m = MetricAtPoint::new(&x, w.h(&x)).unwrap();
        prop_assert!(m.g.clone().cholesky().is_some());
        prop_assert!((m.h.trace()).abs() < 1e-12 * (1.0 + m.h.norm()));
    }

    #[test]
    fn loglog_slope_recovers_powers(p in -10.0f64..10.0, c in 0.1f64..10.0) {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        prop_assert!((loglog_slope(&xs, &ys) - p).abs() < 1e-10);
    }
}
