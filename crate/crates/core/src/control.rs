//! Image-space controllers: the PD heading controller that descends a
//! potential field, and the bouncing random walk used for exploration.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{Detection, DrivableMask};
use crate::error::{Error, Result};
use crate::field::{sample_gradient, PotentialField};
use crate::grid::SubPixel;
use crate::world::VelocityCommand;

/// Descent vectors shorter than this count as a flat field.
pub const FLAT_GRADIENT: f64 = 1e-9;

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdParams {
    pub kp: f64,
    pub kd: f64,
    /// Constant forward speed, m/s.
    pub v_const: f64,
    pub omega_max: f64,
    /// Control period, seconds.
    pub dt: f64,
}

impl Default for PdParams {
    fn default() -> Self {
        Self {
            kp: 2.0,
            kd: 0.4,
            v_const: 0.25,
            omega_max: 1.5,
            dt: 0.05,
        }
    }
}

impl PdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.v_const > 0.0 && self.omega_max > 0.0 && self.dt > 0.0) {
            return Err(Error::Config(format!("invalid PD params {self:?}")));
        }
        Ok(())
    }
}

/// Derivative memory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PdState {
    pub prev_error: f64,
    pub initialized: bool,
}

/// One PD update. The derivative term is zero on the first call; the error
/// difference is wrapped so a heading error crossing +-pi does not spike.
pub fn pd_step(state: PdState, error: f64, params: &PdParams) -> (f64, PdState) {
    let derivative = if state.initialized {
        wrap_angle(error - state.prev_error) / params.dt
    } else {
        0.0
    };
    let raw = params.kp * error + params.kd * derivative;
    let omega = raw.clamp(-params.omega_max, params.omega_max);
    (
        omega,
        PdState {
            prev_error: error,
            initialized: true,
        },
    )
}

/// Steers the image heading toward steepest descent at a constant speed.
/// Returns the command, the new PD state and the descent vector used.
pub fn low_level_command(
    field: &PotentialField,
    det: &Detection,
    pd: &PdParams,
    state: PdState,
) -> Result<(VelocityCommand, PdState, [f64; 2])> {
    let g = sample_gradient(field, det.center)?;
    let descent = [-g[0], -g[1]];
    let error = if descent[0].hypot(descent[1]) < FLAT_GRADIENT {
        0.0
    } else {
        wrap_angle(descent[1].atan2(descent[0]) - det.heading)
    };
    let (omega, next) = pd_step(state, error, pd);
    Ok((VelocityCommand::new(pd.v_const, omega), next, descent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub lookahead_px: f64,
    pub v_const: f64,
    pub omega_rot: f64,
    /// Heading tolerance for ending a rotation, radians.
    pub theta_tol: f64,
    /// Target redraws before falling back to reversing the heading.
    pub max_redraws: u32,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            lookahead_px: 8.0,
            v_const: 0.25,
            omega_rot: 1.5,
            theta_tol: 0.15,
            max_redraws: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WalkMode {
    Straight,
    Rotating { target: f64, redraws: u32 },
}

/// Drive straight until the lookahead probe leaves the mask, then rotate in
/// place to a uniformly drawn heading and go again.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    pub params: WalkParams,
    mode: WalkMode,
}

impl RandomWalk {
    pub fn new(params: WalkParams) -> Self {
        Self {
            params,
            mode: WalkMode::Straight,
        }
    }

    pub fn is_rotating(&self) -> bool {
        matches!(self.mode, WalkMode::Rotating { .. })
    }

    /// Forces a fresh random rotation, as after hitting something the
    /// probe did not see.
    pub fn bounce<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.mode = WalkMode::Rotating {
            target: Self::draw_target(rng),
            redraws: 0,
        };
    }

    fn probe_clear(&self, mask: &DrivableMask, center: SubPixel, heading: f64) -> bool {
        let l = self.params.lookahead_px;
        mask.contains(SubPixel(center.0 + l * heading.cos(), center.1 + l * heading.sin()))
    }

    fn draw_target<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        // Uniform on (-pi, pi].
        PI - rng.random_range(0.0..TAU)
    }

    pub fn command<R: Rng + ?Sized>(
        &mut self,
        mask: &DrivableMask,
        det: &Detection,
        rng: &mut R,
    ) -> Result<VelocityCommand> {
        if !mask.contains(det.center) {
            return Err(Error::OffMask {
                u: det.center.0,
                v: det.center.1,
            });
        }
        let h = det.heading;
        loop {
            match self.mode {
                WalkMode::Straight => {
                    if self.probe_clear(mask, det.center, h) {
                        return Ok(VelocityCommand::new(self.params.v_const, 0.0));
                    }
                    self.mode = WalkMode::Rotating {
                        target: Self::draw_target(rng),
                        redraws: 0,
                    };
                }
                WalkMode::Rotating { target, redraws } => {
                    let err = wrap_angle(target - h);
                    if err.abs() >= self.params.theta_tol {
                        let omega = self.params.omega_rot.copysign(err);
                        return Ok(VelocityCommand::new(0.0, omega));
                    }
                    if self.probe_clear(mask, det.center, h) {
                        self.mode = WalkMode::Straight;
                        continue;
                    }
                    let target = if redraws + 1 >= self.params.max_redraws {
                        wrap_angle(h + PI)
                    } else {
                        Self::draw_target(rng)
                    };
                    self.mode = WalkMode::Rotating {
                        target,
                        redraws: redraws + 1,
                    };
                    if redraws + 1 > self.params.max_redraws {
                        // Cornered even after reversing: spin and re-probe.
                        return Ok(VelocityCommand::new(0.0, self.params.omega_rot));
                    }
                }
            }
        }
    }
}
