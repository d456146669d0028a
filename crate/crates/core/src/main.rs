use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use camrelay::pipeline;
use camrelay::plan::{make_plan, Status};
use camrelay::scenario::{Mission, ScenarioConfig};
use camrelay::{Error, Pixel};

#[derive(Parser)]
#[command(name = "camrelay", version, about = "Calibration-less multi-camera visual servoing pipeline")]
struct Cli {
    /// Scenario configuration (JSON).
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding the artifacts of every stage.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Exit with status 3 when any mission does not succeed.
    #[arg(long, global = true)]
    strict: bool,
    /// JSON list of `{camera, goal}` missions replacing the scenario's.
    #[arg(long, global = true)]
    missions: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Occupancy image per camera.
    RenderViews,
    /// Drivable masks from the seed clicks.
    Segment,
    /// Random-walk exploration and co-detection log.
    Explore,
    /// Handover graph from the co-detection log.
    BuildGraph,
    /// Camera path and waypoints for one mission.
    Plan {
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        /// Goal pixel in the destination camera, `u,v`.
        #[arg(long, value_parser = parse_pixel)]
        goal: Pixel,
    },
    /// Executes missions; writes traces and outcome summaries.
    Run,
    /// Renders a mission trace over every camera view.
    Replay {
        #[arg(long, default_value_t = 0)]
        mission: usize,
    },
    /// Potential-field images; goals as `camera:u,v`, or the missions' goals.
    Fields {
        #[arg(long = "goal", value_parser = parse_goal)]
        goals: Vec<Mission>,
    },
}

fn parse_pixel(s: &str) -> Result<Pixel, String> {
    let (u, v) = s.split_once(',').ok_or("expected u,v")?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok(Pixel(n(u)?, n(v)?))
}

fn parse_goal(s: &str) -> Result<Mission, String> {
    let (camera, px) = s.split_once(':').ok_or("expected camera:u,v")?;
    Ok(Mission {
        camera: camera.to_string(),
        goal: parse_pixel(px)?,
    })
}

enum Failure {
    Validation(Error),
    Stage(Error),
    Missions(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Validation(e),
            e => Failure::Stage(e),
        }
    }
}

fn load_missions(path: &Path) -> Result<Vec<Mission>, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(&cli.config).map_err(|e| match e {
        Error::Io(_) => Failure::Validation(Error::Config(format!("cannot read {}: {e}", cli.config.display()))),
        e => Failure::Validation(e),
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let missions = cli.missions.as_deref().map(load_missions).transpose().map_err(Failure::Validation)?;
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out).map_err(Error::from)?;
    match &cli.command {
        Command::RenderViews => {
            for p in pipeline::stage_render(&cfg, out)? {
                println!("{}", p.display());
            }
        }
        Command::Segment => {
            for (id, m) in pipeline::stage_segment(&cfg, out)? {
                println!("{}", json!({"camera": id, "drivable": m.count()}));
            }
        }
        Command::Explore => {
            let r = pipeline::stage_explore(&cfg, out)?;
            println!(
                "{}",
                json!({"ticks": r.ticks, "codetections": r.log.len(), "repositions": r.repositions, "collisions": r.collisions})
            );
        }
        Command::BuildGraph => {
            let g = pipeline::stage_build_graph(&cfg, out)?;
            print!("{}", g.to_json()?);
        }
        Command::Plan { src, dst, goal } => {
            let graph = pipeline::load_graph(out)?;
            let plan = make_plan(&graph, src, dst, *goal)?;
            println!("{}", serde_json::to_string_pretty(&plan).map_err(Error::from)?);
        }
        Command::Run => {
            let reports = pipeline::stage_run(&cfg, out, missions)?;
            let mut failed = 0;
            for r in &reports {
                println!("{}", serde_json::to_string(&r.outcome).map_err(Error::from)?);
                failed += usize::from(r.outcome.status != Status::Success);
            }
            if cli.strict && failed > 0 {
                return Err(Failure::Missions(failed));
            }
        }
        Command::Replay { mission } => {
            for p in pipeline::stage_replay(&cfg, out, *mission)? {
                println!("{}", p.display());
            }
        }
        Command::Fields { goals } => {
            let goals = if goals.is_empty() {
                missions.unwrap_or_else(|| cfg.missions.clone())
            } else {
                goals.clone()
            };
            for p in pipeline::stage_fields(&cfg, out, &goals)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn error_record(kind: &str, e: &Error) -> String {
    let variant = format!("{e:?}");
    let name = variant.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error");
    json!({"error": kind, "kind": name, "message": e.to_string()}).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("{}", error_record("validation", &e));
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{}", error_record("stage", &e));
            ExitCode::from(2)
        }
        Err(Failure::Missions(n)) => {
            eprintln!("{}", json!({"error": "missions", "failed": n}));
            ExitCode::from(3)
        }
    }
}
