//! Calibration-less, multi-camera visual servoing in simulation.
//!
//! A robot is driven purely in image space: each camera owns a drivable
//! mask, a Euclidean distance transform of that mask and a potential field
//! toward its current goal pixel. Cameras are linked by a directed handover
//! graph learned from simultaneous detections during random exploration;
//! missions are planned over that graph and executed as a relay, each camera
//! steering the robot to the pixel where the next camera is known to see it.
//!
//! Stages:
//!
//! 1. [`world`]: ground-truth floor plan, unicycle kinematics, rasterized views.
//! 2. [`camera`]: projection, simulated detector, one-click segmentation.
//! 3. [`field`]: distance transform and potential field with gradient sampling.
//! 4. [`control`]: PD heading controller and random-walk explorer.
//! 5. [`handover`]: co-detection logging, handover selection, graph, virtual splits.
//! 6. [`plan`]: A* over the handover graph and the relay executor.
//!
//! [`scenario`] and [`pipeline`] tie the stages together for the CLI.

pub mod camera;
pub mod control;
pub mod error;
pub mod field;
pub mod grid;
pub mod handover;
pub mod pipeline;
pub mod plan;
pub mod pnm;
pub mod rig;
pub mod rng;
pub mod scenario;
pub mod world;

pub use error::{Error, Result};
pub use grid::{Grid, Pixel, SubPixel};
