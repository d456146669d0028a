//! Scenario configuration: a single JSON document describing the floor,
//! the robot, every camera (homography, seed click, gains, optional virtual
//! split), exploration and executor settings.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{Homography, NoiseParams};
use crate::control::{PdParams, WalkParams};
use crate::error::{Error, Result};
use crate::field::PotentialParams;
use crate::grid::Pixel;
use crate::handover::DEFAULT_N_MIN;
use crate::plan::ExecParams;
use crate::world::{Limits, RobotState, WorldMap};

fn default_dt() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulation and control period, seconds.
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub world: WorldMap,
    pub robot: RobotConfig,
    #[serde(default)]
    pub noise: NoiseParams,
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub executor: ExecParams,
    #[serde(default)]
    pub graph: GraphConfig,
    /// Missions visited in order by `run` when no mission file is given.
    #[serde(default)]
    pub missions: Vec<Mission>,
    #[serde(default)]
    pub mission_generator: MissionGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// `[x, y, theta]` in meters and radians.
    pub start: [f64; 3],
    pub footprint_radius: f64,
    #[serde(default)]
    pub limits: Limits,
}

impl RobotConfig {
    pub fn start_state(&self) -> RobotState {
        RobotState::new(self.start[0], self.start[1], self.start[2], self.footprint_radius)
    }
}

/// Per-camera controller and field tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub kp: f64,
    pub kd: f64,
    pub v_const: f64,
    pub omega_max: f64,
    pub w_att: f64,
    pub w_rep: f64,
    pub d0: f64,
}

impl Default for Gains {
    fn default() -> Self {
        let pd = PdParams::default();
        Self {
            kp: pd.kp,
            kd: pd.kd,
            v_const: pd.v_const,
            omega_max: pd.omega_max,
            w_att: 1.0,
            w_rep: 4.0,
            d0: 8.0,
        }
    }
}

impl Gains {
    pub fn pd(&self, dt: f64) -> PdParams {
        PdParams {
            kp: self.kp,
            kd: self.kd,
            v_const: self.v_const,
            omega_max: self.omega_max,
            dt,
        }
    }

    pub fn potential(&self) -> PotentialParams {
        PotentialParams {
            w_att: self.w_att,
            w_rep: self.w_rep,
            d0: self.d0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub id: String,
    pub width: usize,
    pub height: usize,
    /// Row-major ground-to-image homography.
    pub homography: [f64; 9],
    /// The operator's click on the floor.
    pub seed_pixel: Pixel,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfig>,
}

impl CameraConfig {
    pub fn homography(&self) -> Homography {
        Homography(self.homography)
    }
}

/// Virtual split: pixels left of the directed `line` (image coordinates)
/// form sub-view `ids[0]`, the rest `ids[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ids: [String; 2],
    pub line: [[f64; 2]; 2],
    pub interface: Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    /// Total exploration ticks, shared evenly between physical cameras.
    pub ticks: u64,
    /// Walking speed, m/s; exploration may run faster than missions.
    pub v_const: f64,
    pub lookahead_px: f64,
    pub omega_rot: f64,
    pub theta_tol: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        let w = WalkParams::default();
        Self {
            ticks: 10_000,
            v_const: w.v_const,
            lookahead_px: w.lookahead_px,
            omega_rot: w.omega_rot,
            theta_tol: w.theta_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub n_min: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { n_min: DEFAULT_N_MIN }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mission {
    pub camera: String,
    pub goal: Pixel,
}

/// Random missions used when neither a mission file nor `missions` is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionGenerator {
    pub count: usize,
    /// Minimum goal clearance in the destination view, pixels.
    pub min_clearance_px: f64,
}

impl Default for MissionGenerator {
    fn default() -> Self {
        Self {
            count: 20,
            min_clearance_px: 8.0,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Ids of the views missions address: physical cameras, with split
    /// cameras replaced by their two sub-views.
    pub fn view_ids(&self) -> Vec<String> {
        self.cameras
            .iter()
            .flat_map(|c| match &c.split {
                Some(s) => s.ids.to_vec(),
                None => vec![c.id.clone()],
            })
            .collect()
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |field: String, why: &str| Err(Error::Config(format!("{field}: {why}")));
        self.world.validate()?;
        if !(self.dt > 0.0) {
            return bad("dt".into(), "must be positive");
        }
        if !(self.robot.footprint_radius > 0.0) {
            return bad("robot.footprint_radius".into(), "must be positive");
        }
        if self.cameras.is_empty() {
            return bad("cameras".into(), "at least one camera is required");
        }
        let mut ids = BTreeSet::new();
        for (i, c) in self.cameras.iter().enumerate() {
            let at = |f: &str| format!("cameras[{i}].{f}");
            if !ids.insert(c.id.clone()) {
                return bad(at("id"), "duplicate camera id");
            }
            if c.width < 3 || c.height < 3 {
                return bad(at("width"), "image must be at least 3x3");
            }
            if c.homography().inverse().is_err() {
                return bad(at("homography"), "not invertible");
            }
            if c.seed_pixel.0 >= c.width || c.seed_pixel.1 >= c.height {
                return bad(at("seed_pixel"), "outside the image");
            }
            let g = &c.gains;
            if g.pd(self.dt).validate().is_err() {
                return bad(at("gains"), "kp, kd >= 0 and v_const, omega_max > 0 required");
            }
            if g.potential().validate().is_err() {
                return bad(at("gains"), "w_att, w_rep >= 0 and d0 > 0 required");
            }
            if let Some(s) = &c.split {
                if s.interface.0 >= c.width || s.interface.1 >= c.height {
                    return bad(at("split.interface"), "outside the image");
                }
                if s.ids[0] == s.ids[1] {
                    return bad(at("split.ids"), "sub-view ids must differ");
                }
                for id in &s.ids {
                    if !ids.insert(id.clone()) {
                        return bad(at("split.ids"), "duplicate camera id");
                    }
                }
            }
        }
        let e = &self.exploration;
        if !(e.v_const > 0.0 && e.omega_rot > 0.0 && e.lookahead_px > 0.0 && e.theta_tol > 0.0) {
            return bad("exploration".into(), "v_const, omega_rot, lookahead_px and theta_tol must be positive");
        }
        let views = self.view_ids();
        for (i, m) in self.missions.iter().enumerate() {
            if !views.contains(&m.camera) {
                return bad(format!("missions[{i}].camera"), "unknown camera");
            }
            let cam = self
                .cameras
                .iter()
                .find(|c| c.id == m.camera || c.split.as_ref().is_some_and(|s| s.ids.contains(&m.camera)))
                .expect("view ids come from cameras");
            if m.goal.0 >= cam.width || m.goal.1 >= cam.height {
                return bad(format!("missions[{i}].goal"), "outside the image");
            }
        }
        Ok(())
    }
}
