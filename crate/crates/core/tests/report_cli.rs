use proptest::prelude::*;
use ybl_core::commands::{
    cmd_bubble_check, cmd_certify, cmd_profile, cmd_sphere_check, exit_code, golden_section, tau_for, MetricConfig,
    ProfileConfig, ScalingConfig, SphereConfig,
};
use ybl_core::report::{rel_diff, Method};
use ybl_core::{Check, CheckReport, LabError, Verdict};

fn fixed_epoch() {
    std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
}

#[test]
fn certify_reports_every_check() {
    let out = cmd_certify(25, 27).unwrap();
    let r = &out.report;
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(exit_code(r), 0);
    assert!(r.count(Verdict::Pass) > 3 * 10);
    assert!(r.checks.iter().all(|c| c.provenance == Method::Exact && c.lhs_exact.is_some()));
    let table = out.table.unwrap();
    assert_eq!(table.rows.len(), 3);
}

#[test]
fn certify_outside_the_range_is_informational() {
    let r = cmd_certify(52, 53).unwrap().report;
    assert_eq!(r.count(Verdict::Pass) + r.count(Verdict::Fail), 0);
    assert!(r.count(Verdict::Info) > 0);
    assert_eq!(exit_code(&r), 0);
}

#[test]
fn certify_rejects_bad_ranges() {
    assert!(matches!(cmd_certify(30, 29), Err(LabError::EmptyRange { .. })));
    assert!(cmd_certify(12, 12).is_err());
}

#[test]
fn profile_finds_the_minimum_at_one() {
    let cfg = ProfileConfig::new(25);
    let out = cmd_profile(&cfg).unwrap();
    assert!(out.report.passed(), "{}", out.report.summary());
    assert_eq!(out.table.unwrap().rows.len(), cfg.steps);
}

#[test]
fn profile_validates_its_grid() {
    let mut cfg = ProfileConfig::new(25);
    cfg.steps = 2;
    assert!(cmd_profile(&cfg).is_err());
    let mut cfg = ProfileConfig::new(25);
    cfg.eps_min = 3.0;
    assert!(cmd_profile(&cfg).is_err());
}

#[test]
fn sphere_check_is_deterministic() {
    fixed_epoch();
    let cfg = SphereConfig::new(6, 3, 20_000);
    let a = cmd_sphere_check(&cfg).unwrap().report;
    let b = cmd_sphere_check(&cfg).unwrap().report;
    assert!(a.passed(), "{}", a.summary());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.seed, Some(3));
}

#[test]
fn sphere_check_rejects_small_samples() {
    assert!(cmd_sphere_check(&SphereConfig::new(6, 1, 10)).is_err());
}

#[test]
fn bubble_check_passes() {
    let r = cmd_bubble_check(25, 1).unwrap().report;
    assert!(r.passed(), "{}", r.summary());
    assert!(cmd_bubble_check(2, 1).is_err());
}

#[test]
fn config_defaults() {
    let m = MetricConfig::new(25);
    assert_eq!((m.lambda, m.mu, m.rho), (0.02, 0.5, 0.5));
    assert_eq!(m.amplitudes(), [0.1, 0.05, 0.025]);
    let s = ScalingConfig::new(25);
    let (lambdas, mus) = s.grids();
    assert_eq!(lambdas, vec![0.04, 0.02, 0.01]);
    assert_eq!(mus, vec![0.5, 0.25, 0.125]);
    let (tau, certified) = tau_for(25);
    assert!(certified && (tau + 7.0407286863).abs() < 1e-9);
    assert!(!tau_for(10).1);
}

#[test]
fn golden_section_finds_a_parabola_minimum() {
    let x = golden_section(|x| (x - 1.3) * (x - 1.3), 0.0, 3.0, 1e-10);
    assert!((x - 1.3).abs() < 1e-8);
}

#[test]
fn report_round_trips_through_a_file() {
    let dir = std::env::temp_dir().join(format!("ybl-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let r = cmd_certify(25, 25).unwrap().report;
    r.write_json(&path).unwrap();
    let back = CheckReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, r);
    std::fs::remove_dir_all(&dir).unwrap();
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Pass), Just(Verdict::Fail), Just(Verdict::Info)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_fails_iff_some_check_fails(vs in proptest::collection::vec(verdict(), 0..12)) {
        let mut r = CheckReport::new("prop", None);
        for (k, v) in vs.iter().enumerate() {
            let mut c = Check::info(format!("c{k}"), k as f64, 0.0, Method::Fit);
            c.verdict = *v;
            r.push(c);
        }
        let any_fail = vs.contains(&Verdict::Fail);
        prop_assert_eq!(r.verdict == Verdict::Fail, any_fail);
        prop_assert_eq!(exit_code(&r), any_fail as i32);
        let expected = if any_fail { "FAIL" } else { "PASS" };
        let summary = r.summary();
        prop_assert!(summary.lines().last().unwrap().starts_with(expected));
    }

    #[test]
    fn close_agrees_with_relative_difference(a in -1e6f64..1e6, b in -1e6f64..1e6, tol in 1e-12f64..1.0) {
        let c = Check::close("x", a, b, tol, Method::ClosedForm);
        prop_assert_eq!(c.verdict == Verdict::Pass, rel_diff(a, b) <= tol);
    }

    #[test]
    fn json_round_trip(
        names in proptest::collection::vec("[a-z ]{1,12}", 1..6),
        vals in proptest::collection::vec(-1e300f64..1e300, 6),
        seed in proptest::option::of(any::<u64>()),
    ) {
        let mut r = CheckReport::new("prop", seed);
        r.param("n", 25).param("lambda", vals[0]);
        for (k, name) in names.iter().enumerate() {
            r.push(Check::within(name.clone(), vals[k], vals[k + 1], 1e-3, Method::MonteCarlo).with_note("note"));
        }
        let back = CheckReport::from_json(&r.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}
