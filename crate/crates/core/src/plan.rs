//! Camera-level planning over the handover graph and the relay executor that
//! drives a mission through the planned cameras.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::camera::Detection;
use crate::control::{low_level_command, PdState};
use crate::error::{Error, Result};
use crate::field::{compute_potential, PotentialField};
use crate::grid::{Pixel, SubPixel};
use crate::handover::HandoverGraph;
use crate::rig::Rig;
use crate::world::{RobotState, VelocityCommand};

/// Shortest camera sequence from `src` to `dst` counted in handovers.
///
/// Unit edge costs with a zero heuristic: there is no geometry to estimate
/// with. Among equally short paths the lexicographically smallest id
/// sequence wins.
pub fn astar(graph: &HandoverGraph, src: &str, dst: &str) -> Result<Option<Vec<String>>> {
    for id in [src, dst] {
        if !graph.has_node(id) {
            return Err(Error::UnknownCamera(id.to_string()));
        }
    }
    let mut open = BinaryHeap::new();
    let mut closed = BTreeSet::new();
    open.push(Reverse((0usize, vec![src.to_string()])));
    while let Some(Reverse((cost, path))) = open.pop() {
        let last = path.last().expect("paths are never empty").clone();
        if last == dst {
            return Ok(Some(path));
        }
        if !closed.insert(last.clone()) {
            continue;
        }
        for next in graph.successors(&last) {
            if closed.contains(next) {
                continue;
            }
            let mut p = path.clone();
            p.push(next.to_string());
            open.push(Reverse((cost + 1, p)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalPlan {
    pub cameras: Vec<String>,
    /// `waypoints[i]` is where camera `i` hands over to camera `i + 1`.
    pub waypoints: Vec<Pixel>,
    pub final_goal: Pixel,
}

impl TraversalPlan {
    /// Goal pixel for the `i`-th camera of the plan.
    pub fn goal(&self, i: usize) -> Pixel {
        self.waypoints.get(i).copied().unwrap_or(self.final_goal)
    }
}

pub fn make_plan(graph: &HandoverGraph, src: &str, dst: &str, final_goal: Pixel) -> Result<TraversalPlan> {
    let cameras = astar(graph, src, dst)?.ok_or_else(|| Error::Unreachable {
        src: src.to_string(),
        dst: dst.to_string(),
    })?;
    let waypoints = cameras
        .windows(2)
        .map(|w| graph.edge(&w[0], &w[1]).expect("astar follows edges").handover)
        .collect();
    Ok(TraversalPlan {
        cameras,
        waypoints,
        final_goal,
    })
}

fn default_t_max() -> u64 {
    6000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecParams {
    /// Success radius around the final goal, pixels.
    pub r_goal: f64,
    /// Handover radius around a waypoint, pixels.
    pub r_handover: f64,
    pub t_max: u64,
    /// Ticks without a usable detection before the robot counts as lost.
    pub grace: u64,
    pub r_orbit: f64,
    pub t_orbit: u64,
}

impl Default for ExecParams {
    fn default() -> Self {
        Self {
            r_goal: 5.0,
            r_handover: 10.0,
            t_max: default_t_max(),
            grace: 20,
            r_orbit: 40.0,
            t_orbit: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Success,
    Collision,
    Orbit,
    LostRobot,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub tick: u64,
    pub from: String,
    pub to: String,
    /// Outgoing camera's detection that triggered the handover.
    pub at: SubPixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionOutcome {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_camera: Option<String>,
    pub ticks: u64,
    pub handovers: Vec<HandoverEvent>,
    /// Pose after the last simulated step.
    pub final_pose: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDetection {
    pub center: SubPixel,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    /// World pose `[x, y, theta]` at the start of the tick.
    pub pose: [f64; 3],
    pub camera: String,
    pub detection: Option<TraceDetection>,
    pub command: VelocityCommand,
    pub descent: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraversalTrace {
    pub records: Vec<TraceRecord>,
}

impl TraversalTrace {
    /// One JSON record per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

fn pose(s: &RobotState) -> [f64; 3] {
    [s.x, s.y, s.theta]
}

/// Potential field for each camera of the plan toward its goal.
pub fn plan_fields(plan: &TraversalPlan, rig: &Rig) -> Result<Vec<PotentialField>> {
    plan.cameras
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let view = rig.view(id)?;
            compute_potential(&view.support, &view.distance, plan.goal(i), view.gains.potential())
        })
        .collect()
}

/// Runs one mission as a camera relay from `start`.
///
/// Each tick: detect in every view; while the active camera's detection is
/// within `r_handover` of its waypoint, hand over to the next camera (PD
/// memory reset); command from the active camera's field if it sees the
/// robot, otherwise stop and wait; step and check for collision.
pub fn execute(plan: &TraversalPlan, rig: &mut Rig, start: RobotState, params: &ExecParams) -> Result<(MissionOutcome, TraversalTrace)> {
    let fields = plan_fields(plan, rig)?;
    let last = plan.cameras.len() - 1;
    let mut active = 0usize;
    let mut pd = PdState::default();
    let mut state = start;
    let mut lost = 0u64;
    let mut orbit = 0u64;
    let mut handovers = Vec::new();
    let mut trace = TraversalTrace::default();

    let finish = |status: Status, active: usize, ticks: u64, handovers: Vec<HandoverEvent>, state: &RobotState| {
        MissionOutcome {
            status,
            failing_camera: (status != Status::Success).then(|| plan.cameras[active].clone()),
            ticks,
            handovers,
            final_pose: pose(state),
        }
    };

    for tick in 0..params.t_max {
        let dets = rig.detect_all(&state, tick)?;
        let find = |id: &str| -> Option<Detection> { dets.iter().find(|d| d.camera_id == id).cloned() };
        let mut det = find(&plan.cameras[active]);
        while let Some(d) = &det {
            if active == last || d.center.distance(plan.goal(active).to_subpixel()) > params.r_handover {
                break;
            }
            handovers.push(HandoverEvent {
                tick,
                from: plan.cameras[active].clone(),
                to: plan.cameras[active + 1].clone(),
                at: d.center,
            });
            active += 1;
            pd = PdState::default();
            orbit = 0;
            det = find(&plan.cameras[active]);
        }

        let mut record = TraceRecord {
            tick,
            pose: pose(&state),
            camera: plan.cameras[active].clone(),
            detection: det.as_ref().map(|d| TraceDetection {
                center: d.center,
                heading: d.heading,
            }),
            command: VelocityCommand::STOP,
            descent: None,
        };

        let mut usable = false;
        if let Some(d) = &det {
            let r = d.center.distance(plan.goal(active).to_subpixel());
            if active == last && r <= params.r_goal {
                trace.records.push(record);
                return Ok((finish(Status::Success, active, tick + 1, handovers, &state), trace));
            }
            orbit = if r > params.r_goal && r <= params.r_orbit { orbit + 1 } else { 0 };
            if orbit >= params.t_orbit {
                trace.records.push(record);
                return Ok((finish(Status::Orbit, active, tick + 1, handovers, &state), trace));
            }
            let view = rig.view(&plan.cameras[active])?;
            if let Ok((cmd, next, descent)) = low_level_command(&fields[active], d, &view.gains.pd(rig.dt), pd) {
                pd = next;
                record.command = cmd;
                record.descent = Some(descent);
                usable = true;
            }
        }
        if usable {
            lost = 0;
        } else {
            lost += 1;
            if lost >= params.grace {
                trace.records.push(record);
                return Ok((finish(Status::LostRobot, active, tick + 1, handovers, &state), trace));
            }
        }

        let cmd = record.command;
        trace.records.push(record);
        state = rig.step(&state, cmd);
        if rig.collides(&state) {
            return Ok((finish(Status::Collision, active, tick + 1, handovers, &state), trace));
        }
    }
    Ok((finish(Status::Timeout, active, params.t_max, handovers, &state), trace))
}
