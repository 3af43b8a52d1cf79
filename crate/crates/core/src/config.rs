//! JSON run configuration. Every key has a desk-scale default, so `{}` is a
//! valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{BoundaryMode, SolverConfig, TimeGrid};
use crate::inversion::LandweberConfig;
use crate::material::NeoHookeanParams;
use crate::mesh::PlateMesh;
use crate::observation::{SensorLayout, DEFAULT_COMPONENT};
use crate::scenario::{DamageSquare, ExcitationParams, Scenario, DAMAGED_VALUE};
use crate::sparse::CgConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub extents: [[f64; 2]; 3],
    pub cells: [usize; 3],
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            extents: [[-0.1, 0.1], [-15.0, 15.0], [-15.0, 15.0]],
            cells: [2, 8, 8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub theta: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            horizon: 4.0,
            steps: 16,
            theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub bulk_modulus: f64,
    pub shear_modulus: f64,
    pub density: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let p = NeoHookeanParams::plate();
        Self {
            bulk_modulus: p.bulk_modulus,
            shear_modulus: p.shear_modulus,
            density: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    pub knots_per_axis: usize,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self { knots_per_axis: 8 }
    }
}

/// A named layout (`A`, `B`, `C`) or explicit damage squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Overrides the named layout when present.
    pub damage: Option<Vec<DamageSquare>>,
    /// Coefficient assigned to damaged knots of a named layout.
    pub damaged_value: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "A".into(),
            damage: None,
            damaged_value: DAMAGED_VALUE,
        }
    }
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<Scenario> {
        if let Some(damage) = &self.damage {
            return Ok(Scenario {
                name: self.name.clone(),
                damage: damage.clone(),
            });
        }
        let mut s = Scenario::named(&self.name)?;
        for sq in &mut s.damage {
            sq.value = self.damaged_value;
        }
        Ok(s)
    }
}

/// Either `layout` (e.g. `{"per_edge": 9}`) or an explicit `nodes` list;
/// three sensors per edge when both are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub layout: Option<SensorLayout>,
    pub nodes: Option<Vec<usize>>,
    pub component: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            layout: None,
            nodes: None,
            component: DEFAULT_COMPONENT,
        }
    }
}

impl SensorConfig {
    pub fn resolve(&self) -> Result<SensorLayout> {
        match (&self.layout, &self.nodes) {
            (Some(l), None) => Ok(l.clone()),
            (None, Some(n)) => Ok(SensorLayout::Nodes(n.clone())),
            (None, None) => Ok(SensorLayout::PerEdge(3)),
            (Some(_), Some(_)) => Err(Error::InvalidParameter(
                "sensors accept 'layout' or 'nodes', not both".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub mode: BoundaryMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub cg: CgConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            cg: s.cg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Probe length of the halving protocol; 0 keeps `landweber.omega`.
    pub probe_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write the displacement history on `simulate`.
    pub write_field: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_field: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub material: MaterialConfig,
    pub dictionary: DictionaryConfig,
    pub scenario: ScenarioConfig,
    /// Sensor data when present, full displacement data when `null`.
    pub sensors: Option<SensorConfig>,
    pub excitation: ExcitationParams,
    pub landweber: LandweberConfig,
    pub calibration: CalibrationConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverSettings,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Desk-scale config for a named scenario with sensor data.
    pub fn for_scenario(name: &str) -> Result<Self> {
        Scenario::named(name)?;
        Ok(Self {
            scenario: ScenarioConfig {
                name: name.to_ascii_uppercase(),
                ..ScenarioConfig::default()
            },
            sensors: Some(SensorConfig::default()),
            output: OutputConfig {
                dir: PathBuf::from(format!("out_{}", name.to_ascii_lowercase())),
                ..OutputConfig::default()
            },
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.time_grid()?;
        self.material_params()?;
        self.solver_config().validate()?;
        self.landweber.validate()?;
        if let Some(s) = &self.sensors {
            s.resolve()?;
        }
        self.scenario.resolve()?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.horizon, self.time.steps, self.time.theta)
    }

    pub fn material_params(&self) -> Result<NeoHookeanParams> {
        NeoHookeanParams::new(self.material.bulk_modulus, self.material.shear_modulus)
    }

    pub fn build_mesh(&self) -> Result<PlateMesh> {
        let e = self.mesh.extents;
        PlateMesh::build(
            [(e[0][0], e[0][1]), (e[1][0], e[1][1]), (e[2][0], e[2][1])],
            self.mesh.cells,
            &crate::mesh::LayerSpec::OuterElementLayers,
        )
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            density: self.material.density,
            newton_tol: self.solver.newton_tol,
            newton_max_iter: self.solver.newton_max_iter,
            cg: self.solver.cg,
            boundary: self.boundary.mode,
        }
    }
}
