use proptest::prelude::*;
use ybl_core::certify::build_certificate;
use ybl_core::radial::{
    certified_slope_bound, radial_moment, radial_moment_quadrature, scaled_moment, total_derivative_identity_check,
    total_derivative_integrated,
};
use ybl_core::report::rel_diff;
use ybl_core::{AxisModel, LabError, WeylForm};

fn model(n: usize, seed: u64) -> AxisModel {
    let cert = build_certificate(n as i64).unwrap();
    let w = WeylForm::random_factored(n, 4, seed).unwrap();
    AxisModel::from_certificate(&cert, &w.contractions()).unwrap()
}

#[test]
fn elementary_moment() {
    let m = radial_moment(4.0, 3.0).unwrap();
    assert!((m.value - 1.0 / 12.0).abs() < 1e-15);
    assert!(m.convergent);
}

#[test]
fn divergent_moments_are_errors() {
    assert!(matches!(radial_moment(2.0, 3.0), Err(LabError::Divergent { .. })));
    assert!(matches!(radial_moment(3.0, -1.0), Err(LabError::Divergent { .. })));
    assert!(radial_moment_quadrature(1.0, 1.0, 1e-10).is_err());
}

#[test]
fn scaled_moment_power_of_eps() {
    let (n, p, beta) = (25usize, 24.0, 30.0);
    let ratio = scaled_moment(n, p, beta, 2.0).unwrap() / scaled_moment(n, p, beta, 1.0).unwrap();
    let power = n as f64 - 1.0 + beta - 2.0 * p;
    assert!(rel_diff(ratio, 2f64.powf(power)) < 1e-14);
}

#[test]
fn energy_is_negative_at_the_critical_point() {
    for n in [25, 33, 42, 51] {
        let m = model(n, 1);
        assert!(m.f_axis(1.0) < 0.0, "n = {n}");
        assert!(m.d2f_deps2(1.0) > 0.0, "n = {n}");
        assert!(m.df_deps(1.0).abs() <= 1e-9 * m.d2f_deps2(1.0), "n = {n}");
    }
}

#[test]
fn certified_slope_is_tiny() {
    for n in [25, 51] {
        let cert = build_certificate(n).unwrap();
        assert!(certified_slope_bound(&cert).unwrap() <= 1e-12);
    }
}

#[test]
fn closed_form_matches_quadrature() {
    let m = model(25, 2);
    for eps in [0.6, 1.0, 1.3, 1.9] {
        assert!(rel_diff(m.f_axis(eps), m.f_axis_quadrature(eps)) < 1e-9, "eps = {eps}");
    }
}

#[test]
fn derivatives_match_differences() {
    let m = model(30, 3);
    let d1 = |e: f64, h: f64| (m.f_axis(e + h) - m.f_axis(e - h)) / (2.0 * h);
    let d2 = |e: f64, h: f64| (m.f_axis(e + h) - 2.0 * m.f_axis(e) + m.f_axis(e - h)) / (h * h);
    for eps in [0.7, 1.0, 1.6] {
        let h = 1e-3 * eps;
        let fd1 = (4.0 * d1(eps, 0.5 * h) - d1(eps, h)) / 3.0;
        let fd2 = (4.0 * d2(eps, 0.5 * h) - d2(eps, h)) / 3.0;
        let scale = m.f_axis(eps).abs() + eps * m.df_deps(eps).abs() + eps * eps * m.d2f_deps2(eps).abs();
        assert!((fd1 - m.df_deps(eps)).abs() * eps <= 1e-8 * scale, "eps = {eps}");
        assert!((fd2 - m.d2f_deps2(eps)).abs() * eps * eps <= 1e-6 * scale, "eps = {eps}");
    }
}

#[test]
fn hessian_closed_form_matches_quadrature() {
    let m = model(25, 4);
    let closed = m.hessian_xixi(1.0);
    let quad = m.hessian_xixi_quadrature(1.0);
    assert!((&closed - &quad).norm() <= 1e-9 * closed.norm());
    assert!((&closed - closed.transpose()).amax() <= 1e-12 * closed.amax());
    assert!(rel_diff(m.hessian_factor_j(1.0), m.hessian_factor_j_via_poly(1.0)) < 1e-12);
}

#[test]
fn total_derivative_identity() {
    let tau = build_certificate(25).unwrap().tau_f64();
    let grid: Vec<f64> = (1..=200).map(|k| 0.02 * k as f64).collect();
    for eps in [0.5, 1.0, 1.7] {
        assert!(total_derivative_identity_check(25, eps, tau, &grid) < 1e-10);
        let (lhs, rhs) = total_derivative_integrated(25, eps, tau).unwrap();
        assert!(rel_diff(lhs, rhs) < 1e-10, "{lhs} {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_recurrences(n in 19u32..=80, k in 0u32..60) {
        let n = n as f64;
        let beta = (k as f64).min(2.0 * n - 8.0);
        let m = |p: f64, b: f64| radial_moment(p, b).unwrap().value;
        let r1 = m(n - 2.0, beta + 2.0) / m(n - 2.0, beta);
        prop_assert!(rel_diff(r1, (beta + 1.0) / (2.0 * n - beta - 7.0)) < 1e-13);
        let r2 = m(n, beta + 2.0) / m(n, beta);
        prop_assert!(rel_diff(r2, (beta + 1.0) / (2.0 * n - beta - 3.0)) < 1e-13);
    }

    #[test]
    fn beta_closed_form_matches_quadrature(p in 2.0f64..40.0, frac in 0.05f64..0.95) {
        let beta = frac * (2.0 * p - 1.0) - 0.5;
        prop_assume!(beta > -0.5);
        let closed = radial_moment(p, beta).unwrap().value;
        let quad = radial_moment_quadrature(p, beta, 1e-12).unwrap();
        prop_assert!(rel_diff(closed, quad) < 1e-9, "{} {}", closed, quad);
    }
}
