use serde_json::{json, Value};

use photofeedback::analysis::{classify_response, oscillation_metrics, ResponseClass};
use photofeedback::dynamics::integrate::integrate;
use photofeedback::scenarios::calibration::ShippedCalibration;
use photofeedback::scenarios::overrides::apply_overrides;
use photofeedback::scenarios::registry::oscillator;
use photofeedback::scenarios::{descriptor, run_scenario, BaseConfig};
use photofeedback::Error;

fn response_columns(csv: &str) -> (Vec<f64>, Vec<f64>) {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let xi = header.iter().position(|h| *h == "intensity_mw_cm2").unwrap();
    let yi = header.iter().position(|h| *h == "delta_alpha_rad").unwrap();
    lines
        .map(|l| {
            let cells: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            (cells[xi], cells[yi])
        })
        .unzip()
}

#[test]
fn negative_feedback_panel_reclassifies_as_saturating() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_scenario("fig1e_negative", &[], Some(dir.path())).unwrap();
    assert!(summary.passed);
    let csv = std::fs::read_to_string(dir.path().join("fig1e_negative_response.csv")).unwrap();
    let (x, y) = response_columns(&csv);
    assert_eq!(x.len(), 12);
    let c = classify_response(&x, &y).unwrap();
    assert_eq!(c.class, ResponseClass::Saturating);
    let on_disk: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig1e_negative_summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["config_hash"], json!(summary.config_hash));
    assert!(summary.files.iter().any(|f| f == "fig1e_negative_summary.json"));
}

#[test]
fn reruns_write_identical_panels() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = run_scenario("fig1e_none", &[], Some(a.path())).unwrap();
    let sb = run_scenario("fig1e_none", &[], Some(b.path())).unwrap();
    assert_eq!(sa.config_hash, sb.config_hash);
    assert_eq!(sa.outputs, sb.outputs);
    let panel = "fig1e_none_response.csv";
    assert_eq!(
        std::fs::read(a.path().join(panel)).unwrap(),
        std::fs::read(b.path().join(panel)).unwrap()
    );
}

#[test]
fn unknown_scenario() {
    match run_scenario("fig7_missing", &[], None) {
        Err(Error::UnknownScenario(name)) => assert_eq!(name, "fig7_missing"),
        other => panic!("expected UnknownScenario, got {other:?}"),
    }
}

#[test]
fn override_changes_hash_and_outcome() {
    let base = run_scenario("fig4_bend", &[], None).unwrap();
    let flipped = run_scenario("fig4_bend", &[("q0".into(), json!(0.5))], None).unwrap();
    assert_ne!(base.config_hash, flipped.config_hash);
    assert!(base.passed);
    assert!(!flipped.passed);
}

#[test]
fn rejected_overrides_leave_config_untouched() {
    let desc = descriptor("fig3_oscillator").unwrap();
    let before = serde_json::to_value(&desc.base).unwrap();
    for bad in [
        ("material.no_such_field", json!(1.0)),
        ("lights[9].intensity_mw_cm2", json!(1.0)),
        ("material.joint_stiffness", json!("stiff")),
    ] {
        let r = desc.base.with_overrides(&[(bad.0.to_string(), bad.1)]);
        assert!(matches!(r, Err(Error::InvalidOverride(_))), "{r:?}");
    }
    assert_eq!(serde_json::to_value(&desc.base).unwrap(), before);
    assert!(matches!(
        run_scenario("fig3_oscillator", &[("material.nope".into(), json!(1))], None),
        Err(Error::InvalidOverride(_))
    ));
}

#[test]
fn oscillator_frequency_is_intensity_insensitive() {
    let mut cfg = oscillator(&ShippedCalibration::shipped());
    cfg.integrator.t_end = 15.0;
    let brighter = apply_overrides(&cfg, &[("lights[0].intensity_mw_cm2".into(), json!(240.0))]).unwrap();
    let f1 = |c| {
        let t = integrate(c, None).unwrap();
        oscillation_metrics(&t.time, t.d()).unwrap().f1.expect("oscillates")
    };
    let (a, b) = (f1(&cfg), f1(&brighter));
    assert!((b / a - 1.0).abs() < 0.05, "f1 {a} -> {b}");
}

#[test]
fn registry_bases_have_expected_kinds() {
    for name in ["fig2_chain2", "fig4_spring", "fig1e_none"] {
        let d = descriptor(name).unwrap();
        let kind = match d.base {
            BaseConfig::Single(_) => "single",
            BaseConfig::Chain(_) => "chain",
            BaseConfig::Reduced(_) => "reduced",
        };
        let expected = match name {
            "fig2_chain2" => "chain",
            "fig4_spring" => "reduced",
            _ => "single",
        };
        assert_eq!(kind, expected);
    }
}
