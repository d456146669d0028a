//! Viewpoint model: ground-plane homography (simulation-side truth),
//! simulated detector and one-click drivable-region segmentation.
//!
//! Nothing on the control side reads [`CameraModel::homography`]; controllers
//! only see [`Detection`]s and masks.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::wrap_angle;
use crate::error::{Error, Result};
use crate::grid::{Grid, Pixel, SubPixel};
use crate::world::{OccupancyImage, RobotState};

/// Homogeneous `w` at or below this is treated as behind the camera.
pub const EPS_W: f64 = 1e-9;

/// Distance ahead of the robot, in meters, projected to recover image heading.
pub const HEADING_PROBE_M: f64 = 0.05;

/// Row-major 3x3 map from ground `(x, y, 1)` to image `(u, v, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography(pub [f64; 9]);

impl Homography {
    pub const IDENTITY: Homography = Homography([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f, g, h, i] = self.0;
        a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    }

    pub fn apply(&self, x: f64, y: f64) -> [f64; 3] {
        let m = &self.0;
        [
            m[0] * x + m[1] * y + m[2],
            m[3] * x + m[4] * y + m[5],
            m[6] * x + m[7] * y + m[8],
        ]
    }

    pub fn inverse(&self) -> Result<Homography> {
        let det = self.det();
        let scale = self.0.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::SingularHomography { det });
        }
        let [a, b, c, d, e, f, g, h, i] = self.0;
        Ok(Homography([
            (e * i - f * h) / det,
            (c * h - b * i) / det,
            (b * f - c * e) / det,
            (f * g - d * i) / det,
            (a * i - c * g) / det,
            (c * d - a * f) / det,
            (d * h - e * g) / det,
            (b * g - a * h) / det,
            (a * e - b * d) / det,
        ]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub homography: Homography,
    pub mask: Option<DrivableMask>,
}

impl CameraModel {
    pub fn new(id: impl Into<String>, width: usize, height: usize, homography: Homography) -> Result<Self> {
        let id = id.into();
        if width < 3 || height < 3 {
            return Err(Error::Config(format!("camera {id}: image must be at least 3x3")));
        }
        homography.inverse()?;
        Ok(Self {
            id,
            width,
            height,
            homography,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: DrivableMask) -> Result<Self> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(Error::Config(format!(
                "camera {}: mask is {}x{}, image is {}x{}",
                self.id,
                mask.width(),
                mask.height(),
                self.width,
                self.height
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn in_frame(&self, p: SubPixel) -> bool {
        p.0 >= 0.0 && p.1 >= 0.0 && p.0 <= (self.width - 1) as f64 && p.1 <= (self.height - 1) as f64
    }

    /// Ground point seen at image position `(u, v)`, given the precomputed
    /// inverse. `None` above the horizon.
    pub fn back_project_with(&self, inv: &Homography, u: f64, v: f64) -> Option<(f64, f64)> {
        let [x, y, w] = inv.apply(u, v);
        if w.abs() <= f64::MIN_POSITIVE {
            return None;
        }
        let (gx, gy) = (x / w, y / w);
        (self.homography.apply(gx, gy)[2] > EPS_W).then_some((gx, gy))
    }

    pub fn back_project(&self, p: SubPixel) -> Result<Option<(f64, f64)>> {
        let inv = self.homography.inverse()?;
        Ok(self.back_project_with(&inv, p.0, p.1))
    }
}

/// Perspective projection of a ground point; `None` behind the camera or
/// outside the image.
pub fn project(camera: &CameraModel, x: f64, y: f64) -> Option<SubPixel> {
    let [u, v, w] = camera.homography.apply(x, y);
    if w <= EPS_W {
        return None;
    }
    let p = SubPixel(u / w, v / w);
    camera.in_frame(p).then_some(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_px: f64,
    pub sigma_theta: f64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        sigma_px: 0.0,
        sigma_theta: 0.0,
    };
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sigma_px: 1.0,
            sigma_theta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub camera_id: String,
    pub center: SubPixel,
    /// `atan2(dv, du)` in image space, `(-pi, pi]`.
    pub heading: f64,
    pub tick: u64,
}

/// Simulated detector. Visibility is in-frame and on-mask for the noiseless
/// center; noise is added afterwards and the center clamped into the image.
pub fn detect<R: Rng + ?Sized>(
    camera: &CameraModel,
    state: &RobotState,
    noise: &NoiseParams,
    tick: u64,
    rng: &mut R,
) -> Result<Option<Detection>> {
    let mask = camera
        .mask
        .as_ref()
        .ok_or_else(|| Error::MissingMask(camera.id.clone()))?;
    let Some(center) = project(camera, state.x, state.y) else {
        return Ok(None);
    };
    if !mask.contains(center) {
        return Ok(None);
    }
    let [pu, pv, pw] = camera.homography.apply(
        state.x + HEADING_PROBE_M * state.theta.cos(),
        state.y + HEADING_PROBE_M * state.theta.sin(),
    );
    let heading = if pw > EPS_W {
        (pv / pw - center.1).atan2(pu / pw - center.0)
    } else {
        // Probe fell behind the camera: the robot faces away from it.
        (center.1 - pv / pw).atan2(center.0 - pu / pw)
    };

    let px = Normal::new(0.0, noise.sigma_px.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let ang =
        Normal::new(0.0, noise.sigma_theta.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let du = px.sample(rng);
    let dv = px.sample(rng);
    let dh = ang.sample(rng);
    let center = SubPixel(
        (center.0 + du).clamp(0.0, (camera.width - 1) as f64),
        (center.1 + dv).clamp(0.0, (camera.height - 1) as f64),
    );
    Ok(Some(Detection {
        camera_id: camera.id.clone(),
        center,
        heading: wrap_angle(heading + dh),
        tick,
    }))
}

/// Boolean floor mask; `true` is drivable.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivableMask {
    cells: Grid<bool>,
}

impl DrivableMask {
    pub fn new(cells: Grid<bool>) -> Result<Self> {
        if !cells.cells().iter().any(|&c| c) {
            return Err(Error::Config("drivable mask has no drivable cell".into()));
        }
        Ok(Self { cells })
    }

    pub fn width(&self) -> usize {
        self.cells.width()
    }

    pub fn height(&self) -> usize {
        self.cells.height()
    }

    pub fn cells(&self) -> &Grid<bool> {
        &self.cells
    }

    pub fn is_drivable(&self, p: Pixel) -> bool {
        p.0 < self.width() && p.1 < self.height() && *self.cells.at(p)
    }

    /// Whether the nearest pixel to `p` is drivable.
    pub fn contains(&self, p: SubPixel) -> bool {
        p.nearest(self.width(), self.height())
            .is_some_and(|q| *self.cells.at(q))
    }

    pub fn count(&self) -> usize {
        self.cells.cells().iter().filter(|&&c| c).count()
    }

    pub fn drivable_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.cells.iter().filter(|(_, &c)| c).map(|(p, _)| p)
    }

    /// Single 4-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(start) = self.drivable_pixels().next() else {
            return false;
        };
        flood(&self.cells, start, |_, &c| c).cells().iter().filter(|&&c| c).count() == self.count()
    }
}

/// 4-connected flood fill from `seed` over cells accepted by `pass`.
fn flood<T>(grid: &Grid<T>, seed: Pixel, pass: impl Fn(Pixel, &T) -> bool) -> Grid<bool> {
    let mut out = Grid::new(grid.width(), grid.height(), false);
    if !pass(seed, grid.at(seed)) {
        return out;
    }
    let mut queue = VecDeque::from([seed]);
    *out.get_mut(seed.0, seed.1) = true;
    while let Some(p) = queue.pop_front() {
        for q in grid.neighbours4(p) {
            if !*out.at(q) && pass(q, grid.at(q)) {
                *out.get_mut(q.0, q.1) = true;
                queue.push_back(q);
            }
        }
    }
    out
}

/// One-click segmentation: the 4-connected component of free pixels
/// containing `seed`. The outermost pixel ring is never drivable, so every
/// mask is enclosed by obstacles.
pub fn segment_drivable(image: &OccupancyImage, seed: Pixel) -> Result<DrivableMask> {
    let (w, h) = (image.width(), image.height());
    if seed.0 >= w || seed.1 >= h {
        return Err(Error::OutOfImage {
            u: seed.0,
            v: seed.1,
            width: w,
            height: h,
        });
    }
    let interior = |p: Pixel| p.0 > 0 && p.1 > 0 && p.0 + 1 < w && p.1 + 1 < h;
    if !interior(seed) || !image.is_free(seed.0, seed.1) {
        return Err(Error::SeedOnObstacle { u: seed.0, v: seed.1 });
    }
    DrivableMask::new(flood(&image.free, seed, |p, &free| free && interior(p)))
}
