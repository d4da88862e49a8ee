use proptest::prelude::*;
use ybl_core::certify::{
    build_certificate, certify_dimension, dimension_coefficients, poly_i, poly_j, sweep, CertificateJson,
    RationalInterval, ASSERTED_RANGE,
};
use ybl_core::rational::{dyadic_unit, int, rat, Poly};
use ybl_core::{LabError, Rational, TauPoly};

#[test]
fn tau_at_25_is_frozen() {
    let c = certify_dimension(25).unwrap();
    assert!((c.tau_f64() - -7.040728686322227).abs() < 1e-12);
    assert!(c.interval.lo < c.interval.hi);
}

#[test]
fn coefficients_at_25() {
    let i = poly_i(25).unwrap();
    let j = poly_j(25).unwrap();
    assert_eq!(i.coeff(2), TauPoly::monomial(rat(3315, 899), 2));
    assert_eq!(j.coeff(2), TauPoly::monomial(rat(850, 341), 1));
    assert_eq!(dimension_coefficients(25).unwrap().a, rat(6630, 899));
}

#[test]
fn asserted_range_certifies() {
    let certs = sweep(*ASSERTED_RANGE.start(), *ASSERTED_RANGE.end()).unwrap();
    assert_eq!(certs.len(), 27);
    for c in &certs {
        assert!(c.passed(), "n = {}", c.n);
        assert!(c.asserted());
        assert!(c.interval.width() <= dyadic_unit(40));
        assert!(c.interval.hi < int(-7));
    }
}

#[test]
fn tau_profile_over_the_range() {
    let taus: Vec<f64> = sweep(25, 51).unwrap().iter().map(|c| c.tau_f64()).collect();
    let (argmin, min) = taus.iter().enumerate().fold((0, f64::INFINITY), |b, (k, &t)| if t < b.1 { (k, t) } else { b });
    assert_eq!(argmin + 25, 33);
    assert!((min - -7.50616381280442).abs() < 1e-12);
    assert!((taus[26] - -7.451590083710919).abs() < 1e-12);
    assert!(taus.iter().all(|t| (-7.51..-7.0).contains(t)));
}

#[test]
fn outside_the_range_certificates_still_build() {
    for n in [52, 60] {
        let c = build_certificate(n).unwrap();
        assert!(!c.asserted());
        assert!(!c.checks.is_empty());
    }
}

#[test]
fn pole_dimensions_are_errors() {
    assert!(matches!(poly_i(14), Err(LabError::PoleDimension(14))));
    assert!(matches!(dimension_coefficients(10), Err(LabError::UnsupportedDimension { .. })));
}

#[test]
fn certificate_json_round_trip() {
    let js = certify_dimension(31).unwrap().to_json();
    let text = serde_json::to_string(&js).unwrap();
    let back: CertificateJson = serde_json::from_str(&text).unwrap();
    assert_eq!(back, js);
    assert!(back.checks.iter().all(|c| c.verdict == "PASS"));
    let lo: f64 = back.tau_interval[0].parse().unwrap();
    assert!((lo - back.tau_approx).abs() < 1e-12);
}

fn small_poly() -> impl Strategy<Value = TauPoly> {
    proptest::collection::vec((-20i64..20, 1i64..9), 0..5)
        .prop_map(|cs| Poly::new(cs.into_iter().map(|(p, q)| rat(p, q)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in small_poly(), q in small_poly(), num in -50i64..50, den in 1i64..20) {
        let x = rat(num, den);
        prop_assert_eq!((p.clone() * q.clone()).eval(&x), p.eval(&x) * q.eval(&x));
        prop_assert_eq!((p.clone() + q.clone()).eval(&x), p.eval(&x) + q.eval(&x));
    }

    #[test]
    fn derivative_obeys_product_rule(p in small_poly(), q in small_poly()) {
        let lhs = (p.clone() * q.clone()).derivative();
        let rhs = p.derivative() * q.clone() + p * q.derivative();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn interval_evaluation_encloses(p in small_poly(), a in -30i64..30, w in 1i64..30, k in 0i64..=10) {
        let iv = RationalInterval::new(int(a), int(a + w));
        let x: Rational = int(a) + rat(w * k, 10);
        let e = iv.eval(&p);
        let v = p.eval(&x);
        prop_assert!(e.lo <= v && v <= e.hi);
    }

    #[test]
    fn radial_polynomials_vanish_at_the_origin(n in 19i64..200) {
        prop_assume!(![12, 14, 16, 18].contains(&n));
        let i = poly_i(n).unwrap();
        let j = poly_j(n).unwrap();
        prop_assert!(i.coeff(0) == TauPoly::new(vec![]));
        prop_assert!(j.coeff(0) == TauPoly::new(vec![]));
    }
}
