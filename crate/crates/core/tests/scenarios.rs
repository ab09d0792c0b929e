use std::path::PathBuf;

use tackroute::io::presets::{test1, test2, test3};
use tackroute::io::{load_scenario, save_scenario, ScenarioBundle};
use tackroute::{validate_scenario, HeadingConvention, Scenario};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn same_model(a: &Scenario, b: &Scenario) {
    assert_eq!(a.wind, b.wind);
    assert_eq!(a.polar, b.polar);
    assert_eq!(a.grid, b.grid);
    assert_eq!(a.costs, b.costs);
    assert_eq!(a.target, b.target);
    assert_eq!(a.modes.count(), b.modes.count());
}

#[test]
fn shipped_files_match_presets() {
    same_model(&load_scenario(shipped("test1.toml")).unwrap().scenario, &test1(0.0));
    same_model(&load_scenario(shipped("test2.toml")).unwrap().scenario, &test2(0.15, 0.05));
    let coast = load_scenario(shipped("test3.toml")).unwrap().scenario;
    let preset = test3();
    same_model(&coast, &preset);
    assert_eq!(coast.obstacles, preset.obstacles);
}

#[test]
fn shipped_files_validate() {
    for name in ["test1.toml", "test2.toml", "test3.toml"] {
        let s = load_scenario(shipped(name)).unwrap().scenario;
        assert!(validate_scenario(&s).is_empty(), "{name}");
        assert_eq!(s.wind.heading, HeadingConvention::Rotation);
    }
}

#[test]
fn coastal_round_trip_keeps_the_mask() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coast.toml");
    let bundle = ScenarioBundle::new(test3());
    save_scenario(&bundle, &path).unwrap();
    let back = load_scenario(&path).unwrap();
    same_model(&back.scenario, &bundle.scenario);
    assert_eq!(back.scenario.obstacles, bundle.scenario.obstacles);
    assert_eq!(back.solver, bundle.solver);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario("/nonexistent/scenario.toml").unwrap_err();
    assert!(matches!(err, tackroute::Error::Io { .. }), "{err:?}");
}
