//! Scenario files, obstacle rasters, result export and built-in presets.
//!
//! All floating-point output uses 17 significant digits (or the shortest
//! round-trip form in headers), so files are byte-identical across runs with
//! identical inputs.

mod export;
mod mask;
pub mod presets;
mod scenario_file;

use std::path::{Path, PathBuf};

pub use export::{
    export_policy, export_stats, export_trajectory, export_value, import_policy, import_value,
    stats_text,
};
pub use mask::MaskFile;
pub use presets::{preset, preset_bundle};
pub use scenario_file::{
    load_scenario, parse_scenario, save_scenario, scenario_to_string, ObstacleSource,
    ScenarioBundle,
};

use crate::domain::validate_scenario;
use crate::error::{Error, Result};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "TACKROUTE_OUT_DIR";

/// `explicit`, else `$TACKROUTE_OUT_DIR`, else `./out`.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

/// A scenario file path, or a preset name such as `test1:sigma=0.05` when no
/// such file exists. The result is validated.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioBundle> {
    let path = Path::new(arg);
    if path.exists() || !presets::is_preset_name(arg) {
        return load_scenario(path);
    }
    let bundle = preset_bundle(arg)?;
    let v = validate_scenario(&bundle.scenario);
    if v.is_empty() {
        Ok(bundle)
    } else {
        Err(Error::Invalid(v))
    }
}

/// Writes `<name>.toml` (run parameters plus the full scenario) into `dir`;
/// obstacles go to `<name>.mask` next to it. Feeding the embedded scenario
/// back with the same parameters reproduces every output file.
pub fn write_manifest(dir: &Path, name: &str, bundle: &ScenarioBundle, run: &[(&str, String)]) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.toml"));
    let mut text = String::from("[run]\n");
    text.push_str(&format!("version = {:?}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in run {
        text.push_str(&format!("{k} = {v:?}\n"));
    }
    text.push('\n');
    let mut mask_rel = None;
    if let Some(mask) = &bundle.scenario.obstacles {
        let rel = PathBuf::from(format!("{name}.mask"));
        MaskFile::from_mask(mask)?.write(dir.join(&rel))?;
        mask_rel = Some(rel);
    }
    let mut plain = bundle.clone();
    plain.obstacles = None;
    let doc = scenario_to_string(&plain, mask_rel.as_deref());
    // Nest the scenario tables under `scenario.`.
    for line in doc.lines() {
        if let Some(rest) = line.strip_prefix('[') {
            text.push_str("[scenario.");
            text.push_str(rest);
        } else {
            text.push_str(line);
        }
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads back the scenario embedded in a manifest.
pub fn read_manifest_scenario(path: impl AsRef<Path>) -> Result<ScenarioBundle> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::parse(&origin, e.message()))?;
    let scenario = table
        .get("scenario")
        .ok_or_else(|| Error::parse(&origin, "manifest lacks a scenario table"))?;
    let inner = toml::to_string(scenario).map_err(|e| Error::parse(&origin, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&inner, base, &origin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_round_trip_through_text() {
        for name in ["test1:sigma=0.05", "test2:drift=0.3,sigma=0.1"] {
            let b = preset_bundle(name).unwrap();
            let text = scenario_to_string(&b, None);
            let back = parse_scenario(&text, Path::new("."), "t").unwrap();
            assert_eq!(back, b, "{name}");
        }
    }

    #[test]
    fn scenario_and_manifest_round_trip_with_mask() {
        let dir = tempfile::tempdir().unwrap();
        let b = preset_bundle("test3:dx=0.1").unwrap();
        let p = dir.path().join("coast.toml");
        save_scenario(&b, &p).unwrap();
        let back = load_scenario(&p).unwrap();
        assert_eq!(back.scenario, b.scenario);
        assert!(back.obstacles.is_some());

        write_manifest(dir.path(), "manifest", &b, &[("command", "solve".into()), ("seed", "3".into())]).unwrap();
        let m = read_manifest_scenario(dir.path().join("manifest.toml")).unwrap();
        assert_eq!(m.scenario, b.scenario);
        assert_eq!(m.solver, b.solver);
    }

    #[test]
    fn negative_sigma_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let b = preset_bundle("test1:dx=0.1").unwrap();
        let text = scenario_to_string(&b, None).replace("diffusion = 0.0", "diffusion = -0.1");
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, text).unwrap();
        match load_scenario(&p) {
            Err(Error::Invalid(v)) => assert!(v.iter().any(|v| v.path == "wind.diffusion")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("broken.toml");
        std::fs::write(&p, "[grid]\nx1 = 3\n").unwrap();
        assert!(matches!(load_scenario(&p), Err(Error::Parse { .. })));
        assert!(matches!(load_scenario(dir.path().join("missing.toml")), Err(Error::Io { .. })));
    }

    #[test]
    fn out_dir_precedence() {
        assert_eq!(output_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }
}
