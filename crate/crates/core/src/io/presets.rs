//! Built-in scenarios: the constant-wind windward leg (`test1`), the drifting
//! wind with a parabolic polar (`test2`) and the coastal course (`test3`).
//!
//! Names take optional parameters, e.g. `test1:sigma=0.05` or
//! `test2:drift=0.3,sigma=0.05,dx=0.05`. `dx` sets all three grid steps and
//! `dt` the time step.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::domain::{
    Axis, CostSpec, GridSpec, HeadingConvention, ModeSet, PolarKind, PolarModel, Scenario,
    SwitchCostTable, TargetSpec, WindModel,
};
use crate::error::{Error, Result};

use super::mask::MaskFile;
use super::scenario_file::ScenarioBundle;

/// Hand-digitized coastline raster for `test3` (0.1 cells over the course box).
pub const COAST_MASK: &str = include_str!("../../data/coast.mask");

/// Start points of `test1`/`test2` trajectories.
pub const WINDWARD_STARTS: [[f64; 3]; 3] = [[-0.7, 0.0, 0.0], [0.0, 0.0, 0.0], [0.7, 0.0, 0.0]];

/// Start points A, B, C of `test3`; the wind initially blows from 0.5 rad.
pub const COAST_STARTS: [[f64; 3]; 3] = [[-0.8, 0.2, 0.5], [0.3, 0.3, 0.5], [0.0, 0.2, 0.5]];

const FULL_DX: f64 = 0.02;
const FULL_DT: f64 = 0.1;

fn base(dx: f64, dt: f64) -> Scenario {
    Scenario {
        modes: ModeSet::tacks(),
        wind: WindModel {
            mean_speed: 1.0,
            drift: 0.0,
            diffusion: 0.0,
            theta_box: [-1.0, 1.0],
            heading: HeadingConvention::default(),
        },
        polar: PolarModel {
            kind: PolarKind::standard_parabola(),
            control: [0.0, FRAC_PI_2],
            frozen_angle: None,
        },
        grid: GridSpec::new(
            Axis::new(-1.4, 1.4, dx),
            Axis::new(0.0, 2.0, dx),
            Axis::new(-1.0, 1.0, dx),
            dt,
        ),
        costs: CostSpec {
            discount: 1e-6,
            stopping_cost: 100.0,
            switching: SwitchCostTable::uniform(2, 2.0),
        },
        target: TargetSpec {
            center: [0.0, 1.8],
            radius: 0.04,
        },
        obstacles: None,
    }
}

/// Frozen angle π/4 at constant speed 0.05, no drift.
pub fn test1(sigma: f64) -> Scenario {
    test1_on(sigma, FULL_DX, FULL_DT)
}

pub fn test1_on(sigma: f64, dx: f64, dt: f64) -> Scenario {
    let mut s = base(dx, dt);
    s.wind.diffusion = sigma;
    s.polar.kind = PolarKind::Constant { speed: 0.05 };
    s.polar.frozen_angle = Some(FRAC_PI_4);
    s
}

/// Parabolic polar with free steering angle in `[0, π/2]`.
pub fn test2(drift: f64, sigma: f64) -> Scenario {
    test2_on(drift, sigma, FULL_DX, FULL_DT)
}

pub fn test2_on(drift: f64, sigma: f64, dx: f64, dt: f64) -> Scenario {
    let mut s = base(dx, dt);
    s.wind.drift = drift;
    s.wind.diffusion = sigma;
    s
}

/// `test2` dynamics with clockwise drift and the coastline obstacle.
pub fn test3() -> Scenario {
    test3_on(FULL_DX, FULL_DT)
}

pub fn test3_on(dx: f64, dt: f64) -> Scenario {
    let mut s = test2_on(-0.15, 0.05, dx, dt);
    let raster = MaskFile::parse(COAST_MASK, "coast.mask").expect("embedded mask parses");
    s.obstacles = Some(raster.resample(&s.grid));
    s
}

/// Looks up a preset by name, with optional `key=value` parameters.
pub fn preset(spec: &str) -> Result<Scenario> {
    let err = |m: String| Error::parse(spec, m);
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut sigma = None;
    let mut drift = None;
    let mut dx = FULL_DX;
    let mut dt = FULL_DT;
    for p in params.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| err(format!("parameter {p:?} is not key=value")))?;
        let v: f64 = v.parse().map_err(|_| err(format!("parameter {k} is not a number")))?;
        match k {
            "sigma" => sigma = Some(v),
            "drift" => drift = Some(v),
            "dx" => dx = v,
            "dt" => dt = v,
            _ => return Err(err(format!("unknown parameter {k}"))),
        }
    }
    match name {
        "test1" if drift.is_none() => Ok(test1_on(sigma.unwrap_or(0.0), dx, dt)),
        "test2" => Ok(test2_on(drift.unwrap_or(0.15), sigma.unwrap_or(0.05), dx, dt)),
        "test3" if sigma.is_none() && drift.is_none() => Ok(test3_on(dx, dt)),
        "test1" | "test3" => Err(err(format!("{name} does not take that parameter"))),
        _ => Err(err(format!("unknown preset {name}"))),
    }
}

/// [`preset`] wrapped with default solver settings.
pub fn preset_bundle(spec: &str) -> Result<ScenarioBundle> {
    preset(spec).map(ScenarioBundle::new)
}

pub fn is_preset_name(spec: &str) -> bool {
    let name = spec.split(':').next().unwrap_or("");
    matches!(name, "test1" | "test2" | "test3")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{polar_speed, validate_scenario, Mode};

    #[test]
    fn presets_are_valid() {
        for name in ["test1", "test1:sigma=0.1", "test2", "test2:drift=0.3,sigma=0", "test3"] {
            let s = preset(name).unwrap();
            assert!(validate_scenario(&s).is_empty(), "{name}: {:?}", validate_scenario(&s));
        }
    }

    #[test]
    fn test1_parameters() {
        let s = preset("test1:sigma=0.02").unwrap();
        assert_eq!(s.costs.discount, 1e-6);
        assert_eq!(s.costs.switching.get(Mode::new(1), Mode::new(2)), 2.0);
        assert_eq!(s.costs.switching.get(Mode::new(2), Mode::new(1)), 2.0);
        assert_eq!(s.costs.stopping_cost, 100.0);
        assert_eq!(s.wind.diffusion, 0.02);
        assert_eq!(s.polar.frozen_angle, Some(FRAC_PI_4));
        assert_eq!(s.polar.kind, PolarKind::Constant { speed: 0.05 });
        assert_eq!(s.grid.shape(), [141, 101, 101]);
        assert_eq!(s.grid.dt, 0.1);
        assert_eq!(s.target.center, [0.0, 1.8]);
        assert_eq!(s.target.radius, 0.04);
    }

    #[test]
    fn test2_peak_at_quarter_pi() {
        let s = preset("test2").unwrap();
        assert_eq!(s.polar.kind, PolarKind::standard_parabola());
        assert_eq!(s.polar.control, [0.0, FRAC_PI_2]);
        let r = |u| polar_speed(&s.polar, 1.0, Mode::new(1), u).unwrap();
        assert!(r(FRAC_PI_4) > r(FRAC_PI_4 - 1e-3) && r(FRAC_PI_4) > r(FRAC_PI_4 + 1e-3));
        assert_eq!(s.wind.drift, 0.15);
    }

    #[test]
    fn test3_has_coast_clear_of_target_and_starts() {
        let s = test3();
        let m = s.obstacles.as_ref().unwrap();
        assert!(m.count() > 0);
        assert_eq!(s.wind.drift, -0.15);
        assert_eq!(s.wind.diffusion, 0.05);
        assert_eq!(s.wind.mean_speed, 1.0);
        for x in COAST_STARTS {
            assert!(!m.contains(x[0], x[1]));
            assert_eq!(x[2], 0.5);
        }
    }

    #[test]
    fn bad_names() {
        assert!(preset("test4").is_err());
        assert!(preset("test1:drift=0.1").is_err());
        assert!(preset("test1:sigma").is_err());
        assert!(preset("test2:gamma=1").is_err());
        assert!(is_preset_name("test2:drift=0.3"));
        assert!(!is_preset_name("scenarios/test2.toml"));
    }
}
