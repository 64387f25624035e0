use std::path::PathBuf;

use affine_harness::{load_scenario, run_suite, CheckKind, HarnessError, Report, Scenario, Status};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn inline(text: &str) -> Scenario {
    Scenario::from_json(text, "inline").unwrap()
}

/// Report JSON with the timing fields removed.
fn without_timings(r: &Report) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for c in v["checks"].as_array_mut().unwrap() {
        c.as_object_mut().unwrap().remove("ms");
    }
    v.to_string()
}

#[test]
fn minimal_scenario_loads_with_defaults() {
    let s = load_scenario(scenario_path("sphere-minimal.json")).unwrap();
    assert_eq!(s.manifold, "sphere");
    assert!(s.checks.is_empty());
    let report = run_suite(&s).unwrap();
    assert!(report.checks.is_empty() && report.passed());
    // An empty report is still a well-formed document.
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 0);
    assert_eq!(v["meta"]["manifold"], "sphere");
    assert_eq!(v["meta"]["catalog_version"], affine_core::catalog::CATALOG_VERSION);
}

#[test]
fn unknown_manifold_is_a_catalog_error() {
    let err = Scenario::from_json(r#"{"manifold": "torus5", "connection": "flat"}"#, "inline").unwrap_err();
    match err {
        HarnessError::UnknownCatalogName { kind, name } => assert_eq!((kind, name.as_str()), ("manifold", "torus5")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_check_keys_are_parse_errors() {
    let text = r#"{"manifold": "sphere", "connection": "round", "checks": [{"kind": "gram_rank", "tolerence": 1}]}"#;
    assert!(matches!(Scenario::from_json(text, "inline"), Err(HarnessError::Parse { .. })));
    let text = r#"{"manifold": "sphere", "connection": "round", "checks": [{"kind": "gram_rnak"}]}"#;
    assert!(matches!(Scenario::from_json(text, "inline"), Err(HarnessError::Parse { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_scenario(scenario_path("nope.json")), Err(HarnessError::Io { .. })));
}

#[test]
fn so3_suite_lists_its_twelve_checks() {
    let s = load_scenario(scenario_path("sphere-so3.json")).unwrap();
    let kinds: Vec<CheckKind> = s.checks.iter().map(|c| c.kind).collect();
    assert_eq!(kinds.len(), 12);
    for k in [
        CheckKind::ChangeOfVariable,
        CheckKind::KillingResidual,
        CheckKind::Equivalence,
        CheckKind::HorizontalProjection,
        CheckKind::LiftBracket,
        CheckKind::KillingExtension,
        CheckKind::AutomorphismAffine,
        CheckKind::KappaPullback,
        CheckKind::ExpCommutes,
        CheckKind::FrameHomomorphism,
        CheckKind::GramRank,
        CheckKind::ParameterFlow,
    ] {
        assert!(kinds.contains(&k), "{k}");
    }
}

#[test]
fn flat_plane_suite_passes() {
    let s = load_scenario(scenario_path("flat-plane-affine.json")).unwrap();
    let report = run_suite(&s).unwrap();
    assert!(report.passed(), "{}", report.summary());
    assert_eq!(report.checks.len(), s.checks.len());
    // Results keep the scenario's order.
    for (c, spec) in report.checks.iter().zip(&s.checks) {
        assert_eq!(c.kind, spec.kind);
        assert!(c.worst.is_some());
    }
}

#[test]
fn unsatisfiable_killing_tolerance_fails_with_residuals() {
    let s = inline(
        r#"{"manifold": "sphere", "connection": "round", "fields": ["L1", "L2"], "tol_kill": 1e-20,
            "checks": [{"kind": "killing_residual", "samples": 20}, {"kind": "automorphism_affine", "samples": 9}]}"#,
    );
    let report = run_suite(&s).unwrap();
    for c in &report.checks {
        assert_eq!(c.status, Status::Fail, "{}", c.name);
        let w = c.worst.expect("the residual is reported");
        assert!(w > 1e-20 && w < 1e-12, "{}: {w}", c.name);
    }
    assert!(report.checks[1].error.as_deref().unwrap().contains("not an infinitesimal affine automorphism"), "{:?}", report.checks[1].error);
}

#[test]
fn non_killing_field_fails_automorphism_checks() {
    let s = inline(
        r#"{"manifold": "flat-plane", "connection": "flat", "fields": ["quadratic"],
            "checks": [{"kind": "killing_residual", "samples": 5}, {"kind": "exp_commutes", "samples": 2}]}"#,
    );
    let report = run_suite(&s).unwrap();
    assert!((report.checks[0].worst.unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(report.checks[1].status, Status::Fail);
    assert!(report.checks[1].error.is_some());
}

#[test]
fn single_field_pair_checks_report_a_setup_error() {
    let s = inline(r#"{"manifold": "sphere", "connection": "round", "fields": ["L1"], "checks": [{"kind": "lift_bracket"}]}"#);
    let c = &run_suite(&s).unwrap().checks[0];
    assert_eq!(c.status, Status::Fail);
    assert_eq!(c.worst, None);
    assert!(c.error.as_deref().unwrap().contains("two fields"));
}

#[test]
fn gram_rank_detects_the_dilation() {
    let s = inline(
        r#"{"manifold": "sphere", "connection": "round", "fields": ["L1", "L2", "L3", "dilation"],
            "checks": [{"kind": "gram_rank"}, {"kind": "gram_rank", "name": "so3 only", "fields": ["L1", "L2", "L3"], "expected_rank": 4}]}"#,
    );
    let report = run_suite(&s).unwrap();
    assert_eq!(report.checks[0].status, Status::Pass);
    assert_eq!(report.checks[1].name, "so3 only");
    assert_eq!(report.checks[1].worst, Some(1.0));
    assert_eq!(report.checks[1].status, Status::Fail);
}

#[test]
fn incomplete_manifold_fails_completeness() {
    let s = inline(r#"{"manifold": "unit-disk", "connection": "flat", "checks": [{"kind": "completeness", "samples": 4, "horizon": 10}]}"#);
    let c = &run_suite(&s).unwrap().checks[0];
    assert_eq!(c.worst, Some(4.0));
    assert_eq!(c.status, Status::Fail);
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let text = r#"{"manifold": "sphere", "connection": "round", "fields": ["L1", "L3"], "rng_seed": 11,
        "checks": [{"kind": "change_of_variable", "samples": 20}, {"kind": "killing_residual", "samples": 20},
                   {"kind": "lift_bracket", "samples": 5}, {"kind": "parameter_flow", "samples": 1},
                   {"kind": "killing_extension", "samples": 1, "seed": 3}]}"#;
    let a = run_suite(&inline(text)).unwrap();
    let b = run_suite(&inline(text)).unwrap();
    assert_eq!(without_timings(&a), without_timings(&b));
    // A different seed draws different samples.
    let c = run_suite(&inline(&text.replace("\"rng_seed\": 11", "\"rng_seed\": 12"))).unwrap();
    assert_ne!(a.checks[0].worst, c.checks[0].worst);
    // An explicit check seed ignores the scenario seed.
    assert_eq!(a.checks[4].worst, c.checks[4].worst);
}

#[test]
fn tol_scale_loosens_measured_checks() {
    let text = r#"{"manifold": "sphere", "connection": "round", "fields": ["L1"],
        "checks": [{"kind": "horizontal_projection", "samples": 1, "tolerance": 1e-9}]}"#;
    let tight = run_suite(&inline(text)).unwrap();
    assert_eq!(tight.checks[0].status, Status::Fail);
    let mut s = inline(text);
    s.tol_scale = 1e6;
    let loose = run_suite(&s).unwrap();
    assert_eq!(loose.checks[0].status, Status::Pass);
    assert_eq!(loose.checks[0].tolerance, 1e-3);
    assert_eq!(loose.meta.tol_scale, 1e6);
}
