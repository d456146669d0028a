#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use camrelay::field::compute_potential;
use camrelay::handover::{descent_clash, CoDetectionLog};
use camrelay::pipeline::{self, graph_from_log, project_polyline, run_missions, MissionReport};
use camrelay::plan::{execute, MissionOutcome, TraversalPlan, TraversalTrace};
use camrelay::rig::Rig;
use camrelay::scenario::ScenarioConfig;
use camrelay::world::RobotState;
use camrelay::{rng, Pixel};

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenario_path(name)).unwrap()
}

/// Every stage of the CLI pipeline into `out`, as `camrelay <stage>` would.
pub fn full_pipeline(cfg: &ScenarioConfig, out: &Path) -> Vec<MissionReport> {
    pipeline::stage_render(cfg, out).unwrap();
    pipeline::stage_segment(cfg, out).unwrap();
    pipeline::stage_explore(cfg, out).unwrap();
    pipeline::stage_build_graph(cfg, out).unwrap();
    pipeline::stage_run(cfg, out, None).unwrap()
}

/// Starts the robot 12-24 px from the single hall goal, heading roughly
/// tangentially, so a fast robot swings around a goal that lies outside any
/// obstacle's influence.
pub fn orbit_trial(cfg: &ScenarioConfig, seed: u64) -> MissionOutcome {
    let mut rig = Rig::from_config(cfg).unwrap();
    let mission = &cfg.missions[0];
    let (gx, gy) = rig.ground_point(&mission.camera, mission.goal).unwrap();
    // Pixels per meter near the goal, measured through the homography.
    let (ex, ey) = rig.ground_point(&mission.camera, Pixel(mission.goal.0 + 10, mission.goal.1)).unwrap();
    let px_per_m = 10.0 / (ex - gx).hypot(ey - gy);

    let mut r = rng::stream(seed, "orbit");
    let radius = r.random_range(12.0..24.0) / px_per_m;
    let angle: f64 = r.random_range(-PI..PI);
    let theta = angle + FRAC_PI_2 + Normal::new(0.0, 0.1).unwrap().sample(&mut r);
    let start = RobotState::new(gx + radius * angle.cos(), gy + radius * angle.sin(), theta, cfg.robot.footprint_radius);

    let plan = TraversalPlan {
        cameras: vec![mission.camera.clone()],
        waypoints: vec![],
        final_goal: mission.goal,
    };
    rig.reseed(&format!("orbit/{seed}"));
    execute(&plan, &mut rig, start, &cfg.executor).unwrap().0
}

/// The L-corner scenario with the virtual split removed; missions target the
/// physical view instead.
pub fn unsplit(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    for cam in &mut cfg.cameras {
        if let Some(split) = cam.split.take() {
            for m in &mut cfg.missions {
                if split.ids.contains(&m.camera) {
                    m.camera = cam.id.clone();
                }
            }
        }
    }
    cfg
}

/// One corner mission with the start pose jittered by the seed. The graph
/// holds only the configured split edges; the corridor is seen by one camera.
pub fn l_corner_trial(cfg: &ScenarioConfig, seed: u64) -> (MissionReport, TraversalTrace) {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let mut r = rng::stream(seed, "start");
    let [x, y, theta] = cfg.robot.start;
    cfg.robot.start = [
        x + r.random_range(-0.15..0.15),
        y + r.random_range(-0.15..0.15),
        theta + r.random_range(-0.3..0.3),
    ];
    let mut rig = Rig::from_config(&cfg).unwrap();
    let graph = graph_from_log(&rig, &CoDetectionLog::new(), cfg.graph.n_min).unwrap();
    let missions = cfg.missions.clone();
    run_missions(&cfg, &mut rig, &graph, &missions).unwrap().remove(0)
}

/// Largest adjacent-pixel descent-direction change along the corridor
/// centerline, with one field over the whole view (`unsplit`) and with each
/// half's own field on the centerline pixels it owns (`split`). Pixels
/// within the handover radius of a field's goal are skipped.
pub fn corner_clash(cfg: &ScenarioConfig) -> (f64, f64) {
    let exclude = cfg.executor.r_handover;
    let (reach, width) = (cfg.world.bounds.x1, cfg.world.obstacles[0].x0);
    let mid = width / 2.0;
    let centerline = [(reach - 0.1, mid), (mid, mid), (mid, reach - 0.1)];
    let goal = cfg.missions[0].goal;

    let whole = unsplit(cfg);
    let rig = Rig::from_config(&whole).unwrap();
    let parent = &whole.cameras[0].id;
    let view = rig.view(parent).unwrap();
    let path = project_polyline(&rig, parent, &centerline, 0.01).unwrap();
    let field = compute_potential(&view.support, &view.distance, goal, view.gains.potential()).unwrap();
    let before = descent_clash(&field, &path, exclude);

    let rig = Rig::from_config(cfg).unwrap();
    let split = cfg.cameras[0].split.as_ref().unwrap();
    let mut after: f64 = 0.0;
    for (id, g) in [(&split.ids[0], split.interface), (&split.ids[1], goal)] {
        let half = rig.view(id).unwrap();
        let field = compute_potential(&half.support, &half.distance, g, half.gains.potential()).unwrap();
        let own: Vec<Pixel> = path.iter().copied().filter(|p| half.owns(p.to_subpixel())).collect();
        after = after.max(descent_clash(&field, &own, exclude));
    }
    (before, after)
}
