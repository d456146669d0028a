//! The operator pipeline as library calls: every stage reads the artifacts
//! of earlier stages from an output directory and writes its own.
//!
//! ```text
//! out/
//!   views/<camera>.pgm        render-views
//!   masks/<camera>.pgm        segment
//!   codetections.json         explore
//!   graph.json                build-graph
//!   outcomes.json             run
//!   traces/mission_NN.jsonl   run
//!   replay/NN_<camera>.ppm    replay
//!   fields/<camera>_U_V.ppm   fields
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{project, DrivableMask};
use crate::error::{Error, Result};
use crate::field::compute_potential;
use crate::grid::Pixel;
use crate::handover::{build_graph, CoDetectionLog, HandoverGraph};
use crate::plan::{astar, execute, make_plan, MissionOutcome, Status, TraversalPlan, TraversalTrace};
use crate::pnm;
use crate::rig::{render_views, Exploration, Rig};
use crate::rng;
use crate::scenario::{Mission, MissionGenerator, ScenarioConfig};
use crate::world::{OccupancyImage, RobotState};

pub const VIEWS_DIR: &str = "views";
pub const MASKS_DIR: &str = "masks";
pub const CODETECTIONS: &str = "codetections.json";
pub const GRAPH: &str = "graph.json";
pub const OUTCOMES: &str = "outcomes.json";
pub const TRACES_DIR: &str = "traces";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn trace_path(out: &Path, mission: usize) -> PathBuf {
    out.join(TRACES_DIR).join(format!("mission_{mission:02}.jsonl"))
}

/// Writes one occupancy image per physical camera.
pub fn stage_render(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join(VIEWS_DIR);
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for (id, img) in render_views(cfg)? {
        let path = dir.join(format!("{id}.pgm"));
        pnm::write(&path, &pnm::encode_pgm(&pnm::occupancy_image(&img)))?;
        written.push(path);
    }
    Ok(written)
}

/// Segments each rendered view from its camera's seed click.
pub fn stage_segment(cfg: &ScenarioConfig, out: &Path) -> Result<BTreeMap<String, DrivableMask>> {
    let dir = out.join(MASKS_DIR);
    ensure_dir(&dir)?;
    let mut masks = BTreeMap::new();
    for c in &cfg.cameras {
        let img = pnm::decode_pgm(&read(&out.join(VIEWS_DIR).join(format!("{}.pgm", c.id)))?)?;
        if (img.width(), img.height()) != (c.width, c.height) {
            return Err(Error::Image(format!("view of camera {} has the wrong size", c.id)));
        }
        let occupancy = OccupancyImage { free: img.map(|&p| p > 0) };
        let mask = crate::camera::segment_drivable(&occupancy, c.seed_pixel)?;
        pnm::write(&dir.join(format!("{}.pgm", c.id)), &pnm::encode_pgm(&pnm::mask_image(&mask)))?;
        masks.insert(c.id.clone(), mask);
    }
    Ok(masks)
}

pub fn load_masks(cfg: &ScenarioConfig, out: &Path) -> Result<BTreeMap<String, DrivableMask>> {
    cfg.cameras
        .iter()
        .map(|c| {
            let img = pnm::decode_pgm(&read(&out.join(MASKS_DIR).join(format!("{}.pgm", c.id)))?)?;
            Ok((c.id.clone(), pnm::mask_from_image(&img)?))
        })
        .collect()
}

pub fn stage_explore(cfg: &ScenarioConfig, out: &Path) -> Result<Exploration> {
    let mut rig = Rig::new(cfg, &load_masks(cfg, out)?)?;
    let report = rig.explore(&cfg.exploration)?;
    info!(
        "explored {} ticks: {} co-detections, {} repositions, {} collisions",
        report.ticks,
        report.log.len(),
        report.repositions,
        report.collisions
    );
    write_json(&out.join(CODETECTIONS), &report.log)?;
    Ok(report)
}

/// Learned edges from the co-detection log plus the configured edges of
/// every virtual split, which replace any learned edge on the same pair.
pub fn graph_from_log(rig: &Rig, log: &CoDetectionLog, n_min: usize) -> Result<HandoverGraph> {
    if log.is_empty() {
        warn!("co-detection log is empty: the graph will have no learned edges");
    }
    let mut graph = build_graph(log, &rig.distance_fields(), &rig.view_ids(), n_min)?;
    for e in &rig.configured_edges {
        graph.upsert(e.clone());
    }
    Ok(graph)
}

pub fn stage_build_graph(cfg: &ScenarioConfig, out: &Path) -> Result<HandoverGraph> {
    let rig = Rig::new(cfg, &load_masks(cfg, out)?)?;
    let text = String::from_utf8(read(&out.join(CODETECTIONS))?).map_err(|e| Error::Config(e.to_string()))?;
    let log: CoDetectionLog = serde_json::from_str(&text)?;
    let graph = graph_from_log(&rig, &log, cfg.graph.n_min)?;
    if !graph.is_strongly_connected() {
        warn!("handover graph is not strongly connected");
    }
    std::fs::write(out.join(GRAPH), graph.to_json()?)?;
    Ok(graph)
}

pub fn load_graph(out: &Path) -> Result<HandoverGraph> {
    let text = String::from_utf8(read(&out.join(GRAPH))?).map_err(|e| Error::Config(e.to_string()))?;
    HandoverGraph::from_json(&text)
}

/// Uniformly random missions: a random view, then a random goal among its
/// pixels with enough clearance.
pub fn generate_missions(rig: &Rig, gen: &MissionGenerator) -> Result<Vec<Mission>> {
    let mut r = rng::stream(rig.seed, "missions");
    let candidates: Vec<Vec<Pixel>> = rig
        .views
        .iter()
        .map(|v| {
            v.mask()
                .drivable_pixels()
                .filter(|&p| v.distance.at(p) >= gen.min_clearance_px)
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return Err(Error::Config(format!(
            "mission_generator.min_clearance_px: some camera has no pixel with clearance {}",
            gen.min_clearance_px
        )));
    }
    Ok((0..gen.count)
        .map(|_| {
            let i = r.random_range(0..rig.views.len());
            let goal = candidates[i][r.random_range(0..candidates[i].len())];
            Mission {
                camera: rig.views[i].id().to_string(),
                goal,
            }
        })
        .collect())
}

/// Missions from the scenario's list, or generated when it is empty.
pub fn scenario_missions(cfg: &ScenarioConfig, rig: &Rig) -> Result<Vec<Mission>> {
    if cfg.missions.is_empty() {
        generate_missions(rig, &cfg.mission_generator)
    } else {
        Ok(cfg.missions.clone())
    }
}

/// The view to start from: among views owning the robot's detection, the
/// one with the fewest handovers to `dst`, ties to the smaller id sequence.
/// Views that see the robot outside obstacle influence (clearance of at
/// least the view's `d0`) are preferred: near the mask rim the robot may
/// drift onto pixels where the gradient is undefined.
pub fn start_camera(rig: &mut Rig, graph: &HandoverGraph, state: &RobotState, dst: &str, tick: u64) -> Result<Option<Vec<String>>> {
    let dets = rig.detect_all(state, tick)?;
    let mut best: Option<(bool, Vec<String>)> = None;
    for d in rig.owned(&dets) {
        if !graph.has_node(&d.camera_id) {
            continue;
        }
        let view = rig.view(&d.camera_id)?;
        let rim = d
            .center
            .nearest(view.camera.width, view.camera.height)
            .is_none_or(|p| view.distance.at(p) < view.gains.d0);
        if let Some(path) = astar(graph, &d.camera_id, dst)? {
            let key = (rim, path.len(), path);
            if best.as_ref().is_none_or(|(r, b)| (key.0, key.1, &key.2) < (*r, b.len(), b)) {
                best = Some((key.0, key.2));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub index: usize,
    pub camera: String,
    pub goal: Pixel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<TraversalPlan>,
    pub outcome: MissionOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs missions back to back. Each starts where the previous one ended;
/// after a failure the robot is put back down on the failed goal.
pub fn run_missions(
    cfg: &ScenarioConfig,
    rig: &mut Rig,
    graph: &HandoverGraph,
    missions: &[Mission],
) -> Result<Vec<(MissionReport, TraversalTrace)>> {
    let mut state = cfg.robot.start_state();
    let mut out = Vec::new();
    for (k, m) in missions.iter().enumerate() {
        rig.reseed(&format!("run/{k}"));
        if !graph.has_node(&m.camera) {
            return Err(Error::UnknownCamera(m.camera.clone()));
        }
        let view = rig.view(&m.camera)?;
        if !view.support.is_drivable(m.goal) {
            return Err(Error::GoalNotDrivable { u: m.goal.0, v: m.goal.1 });
        }
        let mut report = MissionReport {
            index: k,
            camera: m.camera.clone(),
            goal: m.goal,
            plan: None,
            outcome: MissionOutcome {
                status: Status::LostRobot,
                failing_camera: None,
                ticks: 0,
                handovers: Vec::new(),
                final_pose: [state.x, state.y, state.theta],
            },
            error: None,
        };
        let mut trace = TraversalTrace::default();
        match start_camera(rig, graph, &state, &m.camera, 0)? {
            None => report.error = Some("no camera with a route to the destination sees the robot".into()),
            Some(path) => {
                let plan = make_plan(graph, &path[0], &m.camera, m.goal)?;
                rig.reseed(&format!("run/{k}"));
                let (outcome, t) = execute(&plan, rig, state, &cfg.executor)?;
                report.plan = Some(plan);
                report.outcome = outcome;
                trace = t;
            }
        }
        info!("mission {k} -> {} {:?}: {:?}", m.camera, m.goal, report.outcome.status);
        let [x, y, theta] = report.outcome.final_pose;
        state = RobotState::new(x, y, theta, cfg.robot.footprint_radius);
        if report.outcome.status != Status::Success {
            let (gx, gy) = rig.ground_point(&m.camera, m.goal)?;
            state = RobotState::new(gx, gy, theta, cfg.robot.footprint_radius);
        }
        out.push((report, trace));
    }
    Ok(out)
}

pub fn stage_run(cfg: &ScenarioConfig, out: &Path, missions: Option<Vec<Mission>>) -> Result<Vec<MissionReport>> {
    let mut rig = Rig::new(cfg, &load_masks(cfg, out)?)?;
    let graph = load_graph(out)?;
    let missions = match missions {
        Some(m) => m,
        None => scenario_missions(cfg, &rig)?,
    };
    let results = run_missions(cfg, &mut rig, &graph, &missions)?;
    ensure_dir(&out.join(TRACES_DIR))?;
    let mut reports = Vec::new();
    for (report, trace) in results {
        std::fs::write(trace_path(out, report.index), trace.to_jsonl()?)?;
        reports.push(report);
    }
    write_json(&out.join(OUTCOMES), &reports)?;
    Ok(reports)
}

/// Re-renders a mission trace over each camera's mask: the active camera's
/// detections in red, the other ticks' true positions in blue.
pub fn stage_replay(cfg: &ScenarioConfig, out: &Path, mission: usize) -> Result<Vec<PathBuf>> {
    let rig = Rig::new(cfg, &load_masks(cfg, out)?)?;
    let text = String::from_utf8(read(&trace_path(out, mission))?).map_err(|e| Error::Config(e.to_string()))?;
    let trace = TraversalTrace::from_jsonl(&text)?;
    let dir = out.join("replay");
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for view in &rig.views {
        let mut dots = Vec::new();
        for r in &trace.records {
            if let Some(p) = project(&view.camera, r.pose[0], r.pose[1]).and_then(|p| p.nearest(view.camera.width, view.camera.height)) {
                dots.push(((p.0, p.1), [60, 90, 255]));
            }
        }
        for r in trace.records.iter().filter(|r| r.camera == view.id()) {
            if let Some(p) = r.detection.as_ref().and_then(|d| d.center.nearest(view.camera.width, view.camera.height)) {
                dots.push(((p.0, p.1), [255, 40, 40]));
            }
        }
        let path = dir.join(format!("{mission:02}_{}.ppm", view.id()));
        pnm::write(&path, &pnm::encode_ppm(&pnm::overlay(&view.support, dots)))?;
        written.push(path);
    }
    Ok(written)
}

/// Potential-field images for goals given as `(camera, pixel)`.
pub fn stage_fields(cfg: &ScenarioConfig, out: &Path, goals: &[Mission]) -> Result<Vec<PathBuf>> {
    let rig = Rig::new(cfg, &load_masks(cfg, out)?)?;
    let dir = out.join("fields");
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for g in goals {
        let view = rig.view(&g.camera)?;
        let field = compute_potential(&view.support, &view.distance, g.goal, view.gains.potential())?;
        let path = dir.join(format!("{}_{}_{}.ppm", g.camera, g.goal.0, g.goal.1));
        pnm::write(&path, &pnm::encode_ppm(&pnm::field_image(&field)))?;
        written.push(path);
    }
    Ok(written)
}

/// Pixels along a world polyline as seen by `view`, sampled every `step`
/// meters, consecutive duplicates and off-image points dropped.
pub fn project_polyline(rig: &Rig, view: &str, points: &[(f64, f64)], step: f64) -> Result<Vec<Pixel>> {
    let cam = &rig.view(view)?.camera;
    let mut out: Vec<Pixel> = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = (((b.0 - a.0).hypot(b.1 - a.1)) / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            if let Some(p) = project(cam, x, y).and_then(|p| p.nearest(cam.width, cam.height)) {
                if out.last() != Some(&p) {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}
