//! Swing-foot trajectory: quintic blend in the horizontal plane and two
//! cubic segments in height through an apex.

use nalgebra::{Vector2, Vector3};

use crate::planner::S2SPlan;
use crate::{Error, Result};

pub const DEFAULT_SWING_APEX: f64 = 0.08;

/// Swing-foot pose and its rate with respect to swing phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingPose {
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Derivative of the position with respect to phase.
    pub velocity: Vector3<f64>,
}

impl SwingPose {
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self { position, yaw, velocity: Vector3::zeros() }
    }
}

/// Quintic `p(s) = p0 + v0 s + c3 s^3 + c4 s^4 + c5 s^5` on `s in [0, 1]`
/// with zero start acceleration and zero end velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Quintic {
    p0: f64,
    v0: f64,
    c3: f64,
    c4: f64,
    c5: f64,
}

impl Quintic {
    fn fit(p0: f64, v0: f64, p1: f64) -> Self {
        // end conditions p(1) = p1, p'(1) = 0, p''(1) = 0
        let d = p1 - p0 - v0;
        let e = -v0;
        Self { p0, v0, c3: 10.0 * d - 4.0 * e, c4: -15.0 * d + 7.0 * e, c5: 6.0 * d - 3.0 * e }
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        let p = self.p0 + s * (self.v0 + s * s * (self.c3 + s * (self.c4 + s * self.c5)));
        let v = self.v0 + s * s * (3.0 * self.c3 + s * (4.0 * self.c4 + 5.0 * self.c5 * s));
        (p, v)
    }
}

/// Cubic with prescribed end values and end slopes on `s in [0, 1]`.
fn hermite(p0: f64, v0: f64, p1: f64, v1: f64, s: f64) -> (f64, f64) {
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let p = h00 * p0 + h10 * v0 + h01 * p1 + h11 * v1;
    let dp = (6.0 * s2 - 6.0 * s) * p0 + (3.0 * s2 - 4.0 * s + 1.0) * v0 + (-6.0 * s2 + 6.0 * s) * p1 + (3.0 * s2 - 2.0 * s) * v1;
    (p, dp)
}

/// Swing trajectory re-fitted at `phase0` from the current swing pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingTarget {
    pub landing: Vector3<f64>,
    pub landing_yaw: f64,
    pub apex: f64,
    start: SwingPose,
    phase0: f64,
    x: Quintic,
    y: Quintic,
}

impl SwingTarget {
    /// Trajectory from `start` at `phase0` to `landing` at phase 1.
    pub fn new(start: SwingPose, phase0: f64, landing: Vector3<f64>, landing_yaw: f64, apex: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&phase0) {
            return Err(Error::Domain("swing re-fit phase must lie in [0, 1)"));
        }
        let span = 1.0 - phase0;
        let landing = Vector3::new(landing.x, landing.y, 0.0);
        Ok(Self {
            landing,
            landing_yaw,
            apex,
            start,
            phase0,
            x: Quintic::fit(start.position.x, start.velocity.x * span, landing.x),
            y: Quintic::fit(start.position.y, start.velocity.y * span, landing.y),
        })
    }

    /// Pose at swing `phase` in `[phase0, 1]`; earlier phases return the
    /// start pose.
    pub fn pose(&self, phase: f64) -> SwingPose {
        let phase = phase.clamp(self.phase0, 1.0);
        let span = 1.0 - self.phase0;
        let s = (phase - self.phase0) / span;
        let (px, vx) = self.x.eval(s);
        let (py, vy) = self.y.eval(s);
        let (pz, vz) = self.height(phase);
        let yaw = self.start.yaw + (self.landing_yaw - self.start.yaw) * blend(s);
        SwingPose { position: Vector3::new(px, py, pz), yaw, velocity: Vector3::new(vx / span, vy / span, vz) }
    }

    /// Height and its phase derivative. Before the apex phase the height
    /// rises to `apex` with zero slope there; afterwards it descends to the
    /// ground with zero slope at touchdown.
    fn height(&self, phase: f64) -> (f64, f64) {
        let z0 = self.start.position.z;
        let dz0 = self.start.velocity.z;
        if self.phase0 < 0.5 {
            if phase <= 0.5 {
                let w = 0.5 - self.phase0;
                let (p, dp) = hermite(z0, dz0 * w, self.apex, 0.0, (phase - self.phase0) / w);
                (p, dp / w)
            } else {
                let (p, dp) = hermite(self.apex, 0.0, 0.0, 0.0, (phase - 0.5) / 0.5);
                (p, dp / 0.5)
            }
        } else {
            let w = 1.0 - self.phase0;
            let (p, dp) = hermite(z0, dz0 * w, 0.0, 0.0, (phase - self.phase0) / w);
            (p, dp / w)
        }
    }
}

fn blend(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Swing trajectory of the current step towards the landing spot of the
/// first planned step, continuous in position and velocity with `current`
/// at `phase`.
pub fn swing_target(
    plan: &S2SPlan,
    yaws: &[f64],
    positions: &[Vector2<f64>],
    current: &SwingPose,
    phase: f64,
    apex: f64,
) -> Result<SwingTarget> {
    if !(0.0..=1.0).contains(&phase) {
        return Err(Error::Domain("swing phase must lie in [0, 1]"));
    }
    if plan.len() < 2 || positions.len() < 2 || yaws.len() < 2 {
        return Err(Error::Domain("swing target needs at least two planned steps"));
    }
    let landing = Vector3::new(positions[1].x, positions[1].y, 0.0);
    SwingTarget::new(*current, phase.min(1.0 - 1e-9), landing, yaws[1], apex)
}
