mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use common::scenario_path;

fn camrelay(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camrelay"))
        .arg(config)
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("no JSON error record");
    serde_json::from_str(line).unwrap()
}

fn edited(name: &str, dir: &Path, edit: impl FnOnce(&mut Value)) -> std::path::PathBuf {
    let mut v: Value = serde_json::from_slice(&std::fs::read(scenario_path(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn desk_stages_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = (scenario_path("desk"), dir.path());
    for stage in ["render-views", "segment", "explore", "build-graph"] {
        ok(&camrelay(&cfg, out, &[stage]));
    }
    let graph: Value = serde_json::from_slice(&std::fs::read(out.join("graph.json")).unwrap()).unwrap();
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 4);

    let stdout = ok(&camrelay(&cfg, out, &["run", "--strict"]));
    let outcomes: Vec<Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(outcomes.len(), 20);
    assert!(outcomes.iter().all(|o| o["status"] == "Success"));
    assert!(out.join("traces/mission_19.jsonl").exists());

    let replay = ok(&camrelay(&cfg, out, &["replay", "--mission", "3"]));
    assert_eq!(replay.lines().count(), 4);
    let fields = ok(&camrelay(&cfg, out, &["fields", "--goal", "room2:39,60"]));
    assert!(fields.trim().ends_with("room2_39_60.ppm"));
}

#[test]
fn plan_within_one_camera_is_a_single_camera_plan() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = (scenario_path("desk"), dir.path());
    for stage in ["render-views", "segment", "explore", "build-graph"] {
        ok(&camrelay(&cfg, out, &[stage]));
    }
    let plan: Value =
        serde_json::from_str(&ok(&camrelay(&cfg, out, &["plan", "--src", "corridor", "--dst", "corridor", "--goal", "120,30"])))
            .unwrap();
    assert_eq!(plan["cameras"], serde_json::json!(["corridor"]));
    assert_eq!(plan["waypoints"], serde_json::json!([]));

    let o = camrelay(&cfg, out, &["plan", "--src", "corridor", "--dst", "attic", "--goal", "1,1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["kind"], "UnknownCamera");
}

#[test]
fn empty_exploration_log_gives_edgeless_graph_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = (scenario_path("desk"), dir.path());
    ok(&camrelay(&cfg, out, &["render-views"]));
    ok(&camrelay(&cfg, out, &["segment"]));
    std::fs::write(out.join("codetections.json"), r#"{"samples": []}"#).unwrap();
    let o = camrelay(&cfg, out, &["build-graph"]);
    let graph: Value = serde_json::from_str(&ok(&o)).unwrap();
    assert_eq!(graph["edges"], serde_json::json!([]));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("WARN") && stderr.contains("empty"), "stderr: {stderr}");
}

#[test]
fn validation_errors_exit_1_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("desk", dir.path(), |v| v["cameras"][1]["id"] = v["cameras"][0]["id"].clone());
    let o = camrelay(&cfg, dir.path(), &["render-views"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_record(&o);
    assert_eq!(e["error"], "validation");
    assert!(e["message"].as_str().unwrap().contains("cameras"));

    let o = camrelay(&dir.path().join("missing.json"), dir.path(), &["render-views"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_on_a_wall_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    // World (3.5, 3.5) is inside the corner block.
    let cfg = edited("l_corner", dir.path(), |v| v["cameras"][0]["seed_pixel"] = serde_json::json!([145, 75]));
    ok(&camrelay(&cfg, dir.path(), &["render-views"]));
    let o = camrelay(&cfg, dir.path(), &["segment"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"], "stage");
}

#[test]
fn strict_run_with_failed_missions_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("l_corner", dir.path(), |v| {
        let cam = &mut v["cameras"][0];
        cam.as_object_mut().unwrap().remove("split");
        let parent = cam["id"].clone();
        v["missions"][0]["camera"] = parent;
    });
    for stage in ["render-views", "segment", "explore", "build-graph"] {
        ok(&camrelay(&cfg, dir.path(), &[stage]));
    }
    ok(&camrelay(&cfg, dir.path(), &["run"]));
    let o = camrelay(&cfg, dir.path(), &["run", "--strict"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_record(&o)["failed"], 1);
}

#[test]
fn seed_flag_and_mission_file_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, out) = (scenario_path("desk"), dir.path());
    for stage in ["render-views", "segment", "explore", "build-graph"] {
        ok(&camrelay(&cfg, out, &[stage]));
    }
    let missions = out.join("missions.json");
    std::fs::write(&missions, r#"[{"camera": "room2", "goal": [39, 60]}, {"camera": "corridor", "goal": [30, 30]}]"#).unwrap();
    let stdout = ok(&camrelay(&cfg, out, &["run", "--missions", missions.to_str().unwrap()]));
    assert_eq!(stdout.lines().count(), 2);

    let first = std::fs::read(out.join("codetections.json")).unwrap();
    ok(&camrelay(&cfg, out, &["explore", "--seed", "99"]));
    assert_ne!(first, std::fs::read(out.join("codetections.json")).unwrap());
}
