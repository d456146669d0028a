//! Ground-truth world: axis-aligned floor plan, unicycle kinematics,
//! footprint collision and rasterization of the floor into camera views.

use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::control::wrap_angle;
use crate::error::Result;
use crate::grid::Grid;

/// Closed axis-aligned rectangle in meters, serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Self {
        Rect::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Euclidean distance from `(x, y)` to the rectangle, 0 inside.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

impl WorldMap {
    pub fn new(bounds: Rect, obstacles: Vec<Rect>) -> Result<Self> {
        let w = Self { bounds, obstacles };
        w.validate()?;
        Ok(w)
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.bounds.area() > 0.0) {
            return Err(Error::Config("world.bounds must have positive area".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !self.bounds.contains_rect(o) {
                return Err(Error::Config(format!(
                    "world.obstacles[{i}] lies outside world.bounds"
                )));
            }
        }
        Ok(())
    }

    /// Free floor: inside bounds and outside every obstacle.
    pub fn is_free(&self, x: f64, y: f64) -> bool {
        self.bounds.contains(x, y) && !self.obstacles.iter().any(|o| o.contains(x, y))
    }

    /// Distance from `(x, y)` to the nearest obstacle or bounds edge.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        let b = &self.bounds;
        let to_bounds = (x - b.x0).min(b.x1 - x).min(y - b.y0).min(b.y1 - y);
        self.obstacles
            .iter()
            .map(|o| o.distance(x, y))
            .fold(to_bounds, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`.
    pub theta: f64,
    pub footprint_radius: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64, footprint_radius: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            footprint_radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// Forward speed, m/s.
    pub v: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn clamped(self, limits: &Limits) -> Self {
        Self {
            v: self.v.clamp(-limits.v_max, limits.v_max),
            omega: self.omega.clamp(-limits.omega_max, limits.omega_max),
        }
    }
}

/// Actuator saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_max: 0.3,
            omega_max: 1.5,
        }
    }
}

/// One Euler step of the unicycle model. `dt` must be positive.
pub fn step_robot(state: &RobotState, cmd: VelocityCommand, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0);
    RobotState {
        x: state.x + cmd.v * state.theta.cos() * dt,
        y: state.y + cmd.v * state.theta.sin() * dt,
        theta: wrap_angle(state.theta + cmd.omega * dt),
        footprint_radius: state.footprint_radius,
    }
}

/// True iff the footprint disc touches an obstacle or leaves the bounds.
/// Contact on an edge counts.
pub fn check_collision(world: &WorldMap, state: &RobotState) -> bool {
    let r = state.footprint_radius;
    let b = &world.bounds;
    if state.x - r < b.x0 || state.x + r > b.x1 || state.y - r < b.y0 || state.y + r > b.y1 {
        return true;
    }
    world
        .obstacles
        .iter()
        .any(|o| o.distance(state.x, state.y) <= r)
}

/// Per-camera occupancy raster: `true` marks free floor.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyImage {
    pub free: Grid<bool>,
}

impl OccupancyImage {
    pub fn width(&self) -> usize {
        self.free.width()
    }

    pub fn height(&self) -> usize {
        self.free.height()
    }

    pub fn is_free(&self, u: usize, v: usize) -> bool {
        *self.free.get(u, v)
    }
}

/// Pixel `p` is free iff its back-projection onto the ground lies in front
/// of the camera, inside the bounds and outside every obstacle.
pub fn rasterize_view(world: &WorldMap, camera: &CameraModel) -> Result<OccupancyImage> {
    let inv = camera.homography.inverse()?;
    let free = Grid::from_fn(camera.width, camera.height, |u, v| {
        match camera.back_project_with(&inv, u as f64, v as f64) {
            Some((x, y)) => world.is_free(x, y),
            None => false,
        }
    });
    Ok(OccupancyImage { free })
}
