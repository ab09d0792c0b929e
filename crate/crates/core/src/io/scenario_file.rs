use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_scenario, Axis, CostSpec, GridSpec, ModeSet, PolarModel, Scenario, SwitchCostTable, TargetSpec, WindModel,
};
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::solver::{SolverConfig, SweepMode};

use super::mask::MaskFile;

/// A scenario plus the solver settings and mask reference it was loaded with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub scenario: Scenario,
    pub solver: SolverConfig,
    pub obstacles: Option<ObstacleSource>,
}

/// Where the obstacle raster came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSource {
    pub mask: PathBuf,
    /// Override of the raster origin from the mask header.
    pub origin: Option<[f64; 2]>,
    /// Override of the raster cell size from the mask header.
    pub cellsize: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct Document {
    pub grid: GridSection,
    pub modes: ModesSection,
    pub wind: WindModel,
    pub polar: PolarModel,
    pub costs: CostsSection,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacles: Option<ObstaclesSection>,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GridSection {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    /// `[Δx1, Δx2, Δx3]`.
    pub step: [f64; 3],
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModesSection {
    pub count: usize,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CostsSection {
    pub discount: f64,
    pub stopping_cost: f64,
    pub switching: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ObstaclesSection {
    pub mask: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cellsize: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub(crate) struct SolverSection {
    pub controls: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub sweep: SweepMode,
    pub execution: Execution,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection::from(&SolverConfig::default())
    }
}

impl From<&SolverConfig> for SolverSection {
    fn from(c: &SolverConfig) -> Self {
        SolverSection {
            controls: c.control_samples,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
            sweep: c.sweep,
            execution: c.execution,
        }
    }
}

impl SolverSection {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            control_samples: self.controls,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            sweep: self.sweep,
            execution: self.execution,
            ..SolverConfig::default()
        }
    }
}

impl Document {
    pub(crate) fn from_bundle(b: &ScenarioBundle, mask_path: Option<PathBuf>) -> Self {
        let s = &b.scenario;
        let g = &s.grid;
        Document {
            grid: GridSection {
                x1: [g.axes[0].min, g.axes[0].max],
                x2: [g.axes[1].min, g.axes[1].max],
                step: [g.axes[0].step, g.axes[1].step, g.axes[2].step],
                dt: g.dt,
            },
            modes: ModesSection {
                count: s.modes.count(),
                labels: s.modes.labels.clone(),
            },
            wind: s.wind,
            polar: s.polar.clone(),
            costs: CostsSection {
                discount: s.costs.discount,
                stopping_cost: s.costs.stopping_cost,
                switching: s.costs.switching.rows(),
            },
            target: s.target,
            obstacles: mask_path.map(|mask| ObstaclesSection {
                mask,
                origin: b.obstacles.as_ref().and_then(|o| o.origin),
                cellsize: b.obstacles.as_ref().and_then(|o| o.cellsize),
            }),
            solver: SolverSection::from(&b.solver),
        }
    }

    /// Builds the bundle; relative mask paths resolve against `base`.
    pub(crate) fn into_bundle(self, base: &Path, origin: &str) -> Result<ScenarioBundle> {
        if self.modes.count != self.modes.labels.len() {
            return Err(Error::parse(origin, "modes.count does not match the number of labels"));
        }
        let theta = self.wind.theta_box;
        let grid = GridSpec::new(
            Axis::new(self.grid.x1[0], self.grid.x1[1], self.grid.step[0]),
            Axis::new(self.grid.x2[0], self.grid.x2[1], self.grid.step[1]),
            Axis::new(theta[0], theta[1], self.grid.step[2]),
            self.grid.dt,
        );
        let mut scenario = Scenario {
            modes: ModeSet {
                labels: self.modes.labels,
            },
            wind: self.wind,
            polar: self.polar,
            grid,
            costs: CostSpec {
                discount: self.costs.discount,
                stopping_cost: self.costs.stopping_cost,
                switching: SwitchCostTable::from_rows(self.costs.switching),
            },
            target: self.target,
            obstacles: None,
        };
        let mut source = None;
        if let Some(o) = self.obstacles {
            let path = if o.mask.is_absolute() {
                o.mask.clone()
            } else {
                base.join(&o.mask)
            };
            let mut raster = MaskFile::read(&path)?;
            if let Some(origin) = o.origin {
                raster.origin = origin;
            }
            if let Some(h) = o.cellsize {
                raster.cellsize = h;
            }
            scenario.obstacles = Some(raster.resample(&grid));
            source = Some(ObstacleSource {
                mask: o.mask,
                origin: o.origin,
                cellsize: o.cellsize,
            });
        }
        Ok(ScenarioBundle {
            scenario,
            solver: self.solver.config(),
            obstacles: source,
        })
    }
}

fn check(bundle: ScenarioBundle) -> Result<ScenarioBundle> {
    let mut v = validate_scenario(&bundle.scenario);
    v.extend(bundle.solver.validate());
    if v.is_empty() {
        Ok(bundle)
    } else {
        Err(Error::Invalid(v))
    }
}

/// Parses a scenario document without validating it. Relative mask paths
/// resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path, origin: &str) -> Result<ScenarioBundle> {
    let doc: Document = toml::from_str(text).map_err(|e| Error::parse(origin, e.message()))?;
    doc.into_bundle(base, origin)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    check(parse_scenario(&text, base, &path.display().to_string())?)
}

/// Serializes a bundle. Obstacles are referenced by `mask_path`, which the
/// caller must have written (see [`save_scenario`]).
pub fn scenario_to_string(bundle: &ScenarioBundle, mask_path: Option<&Path>) -> String {
    let doc = Document::from_bundle(bundle, mask_path.map(Path::to_path_buf));
    toml::to_string(&doc).expect("scenario documents always serialize")
}

/// Writes the scenario file, plus `<stem>.mask` next to it when the scenario
/// has obstacles.
pub fn save_scenario(bundle: &ScenarioBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut mask_rel = None;
    if let Some(mask) = &bundle.scenario.obstacles {
        let stem = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
        let name = PathBuf::from(format!("{stem}.mask"));
        let dir = path.parent().unwrap_or(Path::new("."));
        MaskFile::from_mask(mask)?.write(dir.join(&name))?;
        mask_rel = Some(name);
    }
    let mut out = bundle.clone();
    // The written mask is node-aligned, so header overrides no longer apply.
    out.obstacles = None;
    let text = scenario_to_string(&out, mask_rel.as_deref());
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl ScenarioBundle {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioBundle {
            scenario,
            solver: SolverConfig::default(),
            obstacles: None,
        }
    }
}
