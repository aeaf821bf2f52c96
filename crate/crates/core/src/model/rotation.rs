//! ZYX (yaw-pitch-roll) Euler-angle kinematics.
//!
//! Angles are stored as `(roll, pitch, yaw)` and `R = Rz(yaw) Ry(pitch)
//! Rx(roll)`. Angular velocities are expressed in the world frame.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::math::{cos, sin};
use crate::{Error, Result};

/// Pitch magnitude beyond which the Euler-rate map is treated as singular.
pub const PITCH_SINGULARITY_MARGIN: f64 = 0.01;

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_z2(a: f64) -> Matrix2<f64> {
    let (s, c) = (sin(a), cos(a));
    Matrix2::new(c, -s, s, c)
}

pub fn rotate2(a: f64, v: &Vector2<f64>) -> Vector2<f64> {
    rot_z2(a) * v
}

pub fn euler_to_rot(theta: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(theta.z) * rot_y(theta.y) * rot_x(theta.x)
}

/// Partial derivatives of `euler_to_rot` with respect to roll, pitch, yaw.
pub fn euler_to_rot_partials(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (rx, ry, rz) = (rot_x(theta.x), rot_y(theta.y), rot_z(theta.z));
    let ex = skew(&Vector3::x());
    let ey = skew(&Vector3::y());
    let ez = skew(&Vector3::z());
    [rz * ry * rx * ex, rz * ry * ey * rx, ez * rz * ry * rx]
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn check_pitch(pitch: f64) -> Result<()> {
    if !pitch.is_finite() || pitch.abs() >= core::f64::consts::FRAC_PI_2 - PITCH_SINGULARITY_MARGIN {
        return Err(Error::Singularity { pitch });
    }
    Ok(())
}

/// Matrix mapping world angular velocity to Euler-angle rates.
pub fn euler_rate_matrix(theta: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_pitch(theta.y)?;
    let (sp, cp) = (sin(theta.y), cos(theta.y));
    let (sy, cy) = (sin(theta.z), cos(theta.z));
    let tp = sp / cp;
    #[rustfmt::skip]
    let m = Matrix3::new(
        cy / cp,      sy / cp,      0.0,
        -sy,          cy,           0.0,
        tp * cy,      tp * sy,      1.0,
    );
    Ok(m)
}

/// Jacobian of `euler_rate_matrix(theta) * omega` with respect to `theta`.
pub fn euler_rate_jacobian(theta: &Vector3<f64>, omega: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_pitch(theta.y)?;
    let (sp, cp) = (sin(theta.y), cos(theta.y));
    let (sy, cy) = (sin(theta.z), cos(theta.z));
    let a = cy * omega.x + sy * omega.y;
    let b = -sy * omega.x + cy * omega.y;
    let mut j = Matrix3::zeros();
    // d/d pitch
    j[(0, 1)] = a * sp / (cp * cp);
    j[(2, 1)] = a / (cp * cp);
    // d/d yaw
    j[(0, 2)] = b / cp;
    j[(1, 2)] = -a;
    j[(2, 2)] = sp / cp * b;
    Ok(j)
}

/// Recovers `(roll, pitch, yaw)` from a rotation matrix.
pub fn rot_to_euler(r: &Matrix3<f64>) -> Vector3<f64> {
    let pitch = crate::math::asin((-r[(2, 0)]).clamp(-1.0, 1.0));
    let roll = crate::math::atan2(r[(2, 1)], r[(2, 2)]);
    let yaw = crate::math::atan2(r[(1, 0)], r[(0, 0)]);
    Vector3::new(roll, pitch, yaw)
}
