//! Simulation context: the world, the physical cameras with their masks,
//! the views missions address (physical or virtual), and one deterministic
//! noise stream per physical camera.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::camera::{detect, CameraModel, Detection, DrivableMask, NoiseParams};
use crate::control::{RandomWalk, WalkParams};
use crate::error::{Error, Result};
use crate::field::{distance_transform, DistanceField};
use crate::grid::{Grid, Pixel, SubPixel};
use crate::handover::{split_virtual_camera, CoDetectionLog, HandoverEdge, VirtualSplit};
use crate::rng::{self, Stream};
use crate::scenario::{ExplorationConfig, Gains, ScenarioConfig};
use crate::world::{check_collision, rasterize_view, step_robot, Limits, OccupancyImage, RobotState, VelocityCommand, WorldMap};

/// A camera as addressed by plans: a whole physical view or one half of a
/// split one.
#[derive(Debug, Clone)]
pub struct View {
    /// For a sub-view, `camera.mask` is its half of the parent mask.
    pub camera: CameraModel,
    /// Sub-views only: the parent's partition and which side is ours.
    pub side: Option<(Grid<bool>, bool)>,
    /// Index into [`Rig::cameras`].
    pub physical: usize,
    /// Mask potential fields are built on. For a sub-view this is the whole
    /// parent mask: the split line is not an obstacle.
    pub support: DrivableMask,
    /// Clearance over `support`.
    pub distance: DistanceField,
    pub gains: Gains,
}

impl View {
    pub fn id(&self) -> &str {
        &self.camera.id
    }

    pub fn mask(&self) -> &DrivableMask {
        self.camera.mask.as_ref().expect("views always carry a mask")
    }

    /// Whether a detection of the parent camera belongs to this view.
    pub fn owns(&self, center: SubPixel) -> bool {
        match &self.side {
            None => true,
            Some((partition, flag)) => center
                .nearest(partition.width(), partition.height())
                .is_some_and(|p| *partition.at(p) == *flag),
        }
    }
}

pub struct Rig {
    pub world: WorldMap,
    /// Physical cameras with their full masks.
    pub cameras: Vec<CameraModel>,
    pub views: Vec<View>,
    pub configured_edges: Vec<HandoverEdge>,
    pub noise: NoiseParams,
    pub limits: Limits,
    pub footprint: f64,
    pub dt: f64,
    pub seed: u64,
    seed_pixels: Vec<Pixel>,
    streams: Vec<Stream>,
}

/// Occupancy image of every physical camera, in config order.
pub fn render_views(cfg: &ScenarioConfig) -> Result<Vec<(String, OccupancyImage)>> {
    cfg.cameras
        .iter()
        .map(|c| {
            let cam = CameraModel::new(&c.id, c.width, c.height, c.homography())?;
            Ok((c.id.clone(), rasterize_view(&cfg.world, &cam)?))
        })
        .collect()
}

/// Masks from each camera's seed click.
pub fn segment_views(
    cfg: &ScenarioConfig,
    images: &[(String, OccupancyImage)],
) -> Result<BTreeMap<String, DrivableMask>> {
    cfg.cameras
        .iter()
        .zip(images)
        .map(|(c, (_, img))| Ok((c.id.clone(), crate::camera::segment_drivable(img, c.seed_pixel)?)))
        .collect()
}

impl Rig {
    /// Renders and segments every view, then assembles the rig.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let images = render_views(cfg)?;
        let masks = segment_views(cfg, &images)?;
        Self::new(cfg, &masks)
    }

    pub fn new(cfg: &ScenarioConfig, masks: &BTreeMap<String, DrivableMask>) -> Result<Self> {
        cfg.validate()?;
        let mut cameras = Vec::new();
        let mut views = Vec::new();
        let mut configured_edges = Vec::new();
        for (i, c) in cfg.cameras.iter().enumerate() {
            let mask = masks
                .get(&c.id)
                .ok_or_else(|| Error::MissingArtifact(format!("mask for camera {}", c.id)))?
                .clone();
            let cam = CameraModel::new(&c.id, c.width, c.height, c.homography())?.with_mask(mask.clone())?;
            let distance = distance_transform(&mask);
            match &c.split {
                None => views.push(View {
                    camera: cam.clone(),
                    side: None,
                    physical: i,
                    support: mask,
                    distance,
                    gains: c.gains,
                }),
                Some(s) => {
                    let split = VirtualSplit::from_line(&c.id, c.width, c.height, s.line[0], s.line[1], s.interface);
                    let (a, b, edges) = split_virtual_camera(&cam, &split, (&s.ids[0], &s.ids[1]))?;
                    for (sub, flag) in [(a, true), (b, false)] {
                        views.push(View {
                            camera: sub,
                            side: Some((split.partition.clone(), flag)),
                            physical: i,
                            support: mask.clone(),
                            distance: distance.clone(),
                            gains: c.gains,
                        });
                    }
                    configured_edges.extend(edges);
                }
            }
            cameras.push(cam);
        }
        let mut rig = Self {
            world: cfg.world.clone(),
            cameras,
            views,
            configured_edges,
            noise: cfg.noise,
            limits: cfg.robot.limits,
            footprint: cfg.robot.footprint_radius,
            dt: cfg.dt,
            seed: cfg.seed,
            seed_pixels: cfg.cameras.iter().map(|c| c.seed_pixel).collect(),
            streams: Vec::new(),
        };
        rig.reseed("default");
        Ok(rig)
    }

    /// Re-derives every camera's noise stream for a named stage, so stages
    /// are reproducible independently of what ran before them.
    pub fn reseed(&mut self, stage: &str) {
        self.streams = self
            .cameras
            .iter()
            .map(|c| rng::stream(self.seed, &format!("{stage}/detect/{}", c.id)))
            .collect();
    }

    pub fn view_index(&self, id: &str) -> Option<usize> {
        self.views.iter().position(|v| v.id() == id)
    }

    pub fn view(&self, id: &str) -> Result<&View> {
        self.view_index(id)
            .map(|i| &self.views[i])
            .ok_or_else(|| Error::UnknownCamera(id.to_string()))
    }

    pub fn view_ids(&self) -> Vec<String> {
        self.views.iter().map(|v| v.id().to_string()).collect()
    }

    pub fn distance_fields(&self) -> BTreeMap<String, DistanceField> {
        self.views
            .iter()
            .map(|v| (v.id().to_string(), v.distance.clone()))
            .collect()
    }

    /// One detection per view that sees the robot, in view order. Each
    /// physical camera detects once; both halves of a split camera share the
    /// parent's detection, since they are the same image.
    pub fn detect_all(&mut self, state: &RobotState, tick: u64) -> Result<Vec<Detection>> {
        let mut physical = Vec::with_capacity(self.cameras.len());
        for (cam, stream) in self.cameras.iter().zip(self.streams.iter_mut()) {
            physical.push(detect(cam, state, &self.noise, tick, stream)?);
        }
        let mut out = Vec::new();
        for view in &self.views {
            if let Some(d) = &physical[view.physical] {
                out.push(Detection {
                    camera_id: view.id().to_string(),
                    ..d.clone()
                });
            }
        }
        Ok(out)
    }

    /// Keeps, for each split camera, only the sub-view on whose side of the
    /// split the detection falls.
    pub fn owned<'a>(&self, detections: &'a [Detection]) -> Vec<&'a Detection> {
        detections
            .iter()
            .filter(|d| self.view_index(&d.camera_id).is_some_and(|i| self.views[i].owns(d.center)))
            .collect()
    }

    /// Ground point under a view pixel. Simulation side only: used to place
    /// the robot, never by controllers.
    pub fn ground_point(&self, view: &str, p: Pixel) -> Result<(f64, f64)> {
        let v = self.view(view)?;
        v.camera
            .back_project(p.to_subpixel())?
            .ok_or_else(|| Error::Config(format!("pixel {p:?} of camera {view} is above the horizon")))
    }

    pub fn step(&self, state: &RobotState, cmd: VelocityCommand) -> RobotState {
        step_robot(state, cmd.clamped(&self.limits), self.dt)
    }

    pub fn collides(&self, state: &RobotState) -> bool {
        check_collision(&self.world, state)
    }

    /// Random-walk exploration, one physical camera after another, logging
    /// every tick's co-detections.
    pub fn explore(&mut self, cfg: &ExplorationConfig) -> Result<Exploration> {
        self.reseed("explore");
        let mut log = CoDetectionLog::new();
        let mut report = Exploration::default();
        let n = self.cameras.len() as u64;
        let mut tick = 0u64;
        for ci in 0..self.cameras.len() {
            let budget = cfg.ticks / n + u64::from((ci as u64) < cfg.ticks % n);
            let cam_id = self.cameras[ci].id.clone();
            let params = WalkParams {
                lookahead_px: cfg.lookahead_px,
                v_const: cfg.v_const,
                omega_rot: cfg.omega_rot,
                theta_tol: cfg.theta_tol,
                ..WalkParams::default()
            };
            let mut walk_rng = rng::stream(self.seed, &format!("explore/walk/{cam_id}"));
            let home = self.home(ci)?;
            let footprint = self.footprint;
            let place = move |r: &mut Stream| RobotState::new(home.0, home.1, PI - r.random_range(0.0..2.0 * PI), footprint);
            let mut state = place(&mut walk_rng);
            let mut walk = RandomWalk::new(params);
            for _ in 0..budget {
                let dets = self.detect_all(&state, tick)?;
                let owned: Vec<Detection> = self.owned(&dets).into_iter().cloned().collect();
                log.log_codetections(&owned);
                tick += 1;
                let driver = dets
                    .iter()
                    .find(|d| self.views[self.view_index(&d.camera_id).expect("attributed")].physical == ci);
                let mask = self.cameras[ci].mask.as_ref().expect("rig cameras carry masks");
                let cmd = match driver.map(|d| walk.command(mask, d, &mut walk_rng)) {
                    Some(Ok(cmd)) => cmd,
                    _ => {
                        report.repositions += 1;
                        state = place(&mut walk_rng);
                        walk = RandomWalk::new(params);
                        continue;
                    }
                };
                let next = self.step(&state, cmd);
                if self.collides(&next) {
                    // Bumped into something the probe missed: stay put and turn.
                    report.collisions += 1;
                    walk.bounce(&mut walk_rng);
                } else {
                    state = next;
                }
            }
        }
        report.ticks = tick;
        report.log = log;
        Ok(report)
    }

    /// Ground point under the camera's seed click.
    fn home(&self, ci: usize) -> Result<(f64, f64)> {
        let cam = &self.cameras[ci];
        let seed = self
            .seed_pixels
            .get(ci)
            .copied()
            .ok_or_else(|| Error::Config(format!("camera {} has no seed pixel", cam.id)))?;
        cam.back_project(seed.to_subpixel())?
            .ok_or_else(|| Error::Config(format!("seed pixel of camera {} is above the horizon", cam.id)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Exploration {
    pub log: CoDetectionLog,
    pub ticks: u64,
    /// Times the supervisor re-placed the robot after losing it.
    pub repositions: usize,
    pub collisions: usize,
}
