//! Single rigid body (SRB) dynamics driven by foot wrenches.
//!
//! State layout (13): `p_com`, `theta` (roll, pitch, yaw), `v_com`, `omega`
//! (world frame), and the gravity entry. Input layout (12): left force, left
//! moment, right force, right moment, all in the world frame.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::rotation::{euler_rate_jacobian, euler_rate_matrix, euler_to_rot, euler_to_rot_partials, skew};
use super::{ModelParams, Side};
use crate::{Error, Result};

pub const SRB_NX: usize = 13;
pub const SRB_NU: usize = 12;

pub type SrbVector = SVector<f64, SRB_NX>;
pub type SrbMatrix = SMatrix<f64, SRB_NX, SRB_NX>;
pub type SrbInputMatrix = SMatrix<f64, SRB_NX, SRB_NU>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrbState {
    pub p_com: Vector3<f64>,
    pub theta: Vector3<f64>,
    pub v_com: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub g_entry: f64,
}

impl SrbState {
    /// Upright at rest at `p_com`.
    pub fn at_rest(p_com: Vector3<f64>, g: f64) -> Self {
        Self {
            p_com,
            theta: Vector3::zeros(),
            v_com: Vector3::zeros(),
            omega: Vector3::zeros(),
            g_entry: g,
        }
    }

    pub fn to_vector(&self) -> SrbVector {
        let mut v = SrbVector::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.p_com);
        v.fixed_rows_mut::<3>(3).copy_from(&self.theta);
        v.fixed_rows_mut::<3>(6).copy_from(&self.v_com);
        v.fixed_rows_mut::<3>(9).copy_from(&self.omega);
        v[12] = self.g_entry;
        v
    }

    pub fn from_vector(v: &SrbVector) -> Self {
        Self {
            p_com: v.fixed_rows::<3>(0).into(),
            theta: v.fixed_rows::<3>(3).into(),
            v_com: v.fixed_rows::<3>(6).into(),
            omega: v.fixed_rows::<3>(9).into(),
            g_entry: v[12],
        }
    }
}

/// Force and moment applied at a foot point, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootWrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl FootWrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| *v == 0.0)
    }
}

/// Wrenches at both feet.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SrbInput {
    pub left: FootWrench,
    pub right: FootWrench,
}

impl SrbInput {
    pub fn foot(&self, side: Side) -> &FootWrench {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn foot_mut(&mut self, side: Side) -> &mut FootWrench {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn to_vector(&self) -> SVector<f64, SRB_NU> {
        let mut v = SVector::<f64, SRB_NU>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.left.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.left.moment);
        v.fixed_rows_mut::<3>(6).copy_from(&self.right.force);
        v.fixed_rows_mut::<3>(9).copy_from(&self.right.moment);
        v
    }

    pub fn from_vector(v: &SVector<f64, SRB_NU>) -> Self {
        Self {
            left: FootWrench {
                force: v.fixed_rows::<3>(0).into(),
                moment: v.fixed_rows::<3>(3).into(),
            },
            right: FootWrench {
                force: v.fixed_rows::<3>(6).into(),
                moment: v.fixed_rows::<3>(9).into(),
            },
        }
    }
}

/// World positions of both feet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPositions {
    pub left: Vector3<f64>,
    pub right: Vector3<f64>,
}

impl FootPositions {
    /// Both wrench application points at the same location.
    pub fn both_at(p: Vector3<f64>) -> Self {
        Self { left: p, right: p }
    }

    pub fn get(&self, side: Side) -> &Vector3<f64> {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Stance foot pose; the ground is flat so `p_stf.z == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceInfo {
    pub side: Side,
    pub p_stf: Vector3<f64>,
    pub psi_stf: f64,
}

/// World-frame inertia `R diag(i_body) R^T`.
pub(crate) fn world_inertia(theta: &Vector3<f64>, i_body: &Vector3<f64>) -> Matrix3<f64> {
    let r = euler_to_rot(theta);
    r * Matrix3::from_diagonal(i_body) * r.transpose()
}

pub(crate) fn world_inertia_inverse(theta: &Vector3<f64>, i_body: &Vector3<f64>) -> Matrix3<f64> {
    let r = euler_to_rot(theta);
    r * Matrix3::from_diagonal(&i_body.map(|v| 1.0 / v)) * r.transpose()
}

pub(crate) fn body_inertia(params: &ModelParams) -> Vector3<f64> {
    Vector3::from(params.i_com)
}

/// Newton-Euler time derivative of the SRB state.
pub fn srb_derivative(x: &SrbState, u: &SrbInput, feet: &FootPositions, params: &ModelParams) -> Result<SrbVector> {
    srb_derivative_with_inertia(x, u, feet, params, &body_inertia(params))
}

pub(crate) fn srb_derivative_with_inertia(
    x: &SrbState,
    u: &SrbInput,
    feet: &FootPositions,
    params: &ModelParams,
    i_body: &Vector3<f64>,
) -> Result<SrbVector> {
    let rates = euler_rate_matrix(&x.theta)? * x.omega;
    let force = u.left.force + u.right.force;
    let moment = (feet.left - x.p_com).cross(&u.left.force)
        + u.left.moment
        + (feet.right - x.p_com).cross(&u.right.force)
        + u.right.moment;
    let iw = world_inertia(&x.theta, i_body);
    let iw_inv = world_inertia_inverse(&x.theta, i_body);
    let omega_dot = iw_inv * (moment - x.omega.cross(&(iw * x.omega)));
    let v_dot = force / params.m_com - Vector3::z() * x.g_entry;

    let mut d = SrbVector::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&x.v_com);
    d.fixed_rows_mut::<3>(3).copy_from(&rates);
    d.fixed_rows_mut::<3>(6).copy_from(&v_dot);
    d.fixed_rows_mut::<3>(9).copy_from(&omega_dot);
    Ok(d)
}

/// Continuous-time Jacobians of the SRB dynamics at `x_ref` with zero input,
/// plus the drift `f(x_ref, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrbJacobians {
    pub a: SrbMatrix,
    pub b: SrbInputMatrix,
    pub drift: SrbVector,
}

pub(crate) fn srb_jacobians_with_inertia(
    x_ref: &SrbState,
    feet: &FootPositions,
    params: &ModelParams,
    i_body: &Vector3<f64>,
) -> Result<SrbJacobians> {
    let theta = &x_ref.theta;
    let omega = &x_ref.omega;
    let e = euler_rate_matrix(theta)?;
    let de = euler_rate_jacobian(theta, omega)?;
    let iw = world_inertia(theta, i_body);
    let iw_inv = world_inertia_inverse(theta, i_body);

    let mut a = SrbMatrix::zeros();
    // p_dot = v
    a.fixed_view_mut::<3, 3>(0, 6).copy_from(&Matrix3::identity());
    // theta_dot = E(theta)^-1 omega
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&de);
    a.fixed_view_mut::<3, 3>(3, 9).copy_from(&e);
    // v_dot = -g e_z
    a[(8, 12)] = -1.0;
    // omega_dot = -Iw^-1 (omega x Iw omega)
    let iw_omega = iw * omega;
    let gyro = -(omega.cross(&iw_omega));
    let d_omega = -iw_inv * (skew(omega) * iw - skew(&iw_omega));
    a.fixed_view_mut::<3, 3>(9, 9).copy_from(&d_omega);
    let r = euler_to_rot(theta);
    let ib = Matrix3::from_diagonal(i_body);
    for (k, dr) in euler_to_rot_partials(theta).iter().enumerate() {
        let d_iw = dr * ib * r.transpose() + r * ib * dr.transpose();
        let d_gyro = -(omega.cross(&(d_iw * omega)));
        let col = -iw_inv * d_iw * iw_inv * gyro + iw_inv * d_gyro;
        a.fixed_view_mut::<3, 1>(9, 3 + k).copy_from(&col);
    }

    let mut b = SrbInputMatrix::zeros();
    let inv_m = Matrix3::identity() / params.m_com;
    for (off, foot) in [(0usize, &feet.left), (6usize, &feet.right)] {
        b.fixed_view_mut::<3, 3>(6, off).copy_from(&inv_m);
        b.fixed_view_mut::<3, 3>(9, off).copy_from(&(iw_inv * skew(&(foot - x_ref.p_com))));
        b.fixed_view_mut::<3, 3>(9, off + 3).copy_from(&iw_inv);
    }

    let drift = srb_derivative_with_inertia(x_ref, &SrbInput::default(), feet, params, i_body)?;
    Ok(SrbJacobians { a, b, drift })
}

/// Discrete model `x+ = a x + b u + c` obtained by forward Euler on the
/// first-order expansion about `x_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrbLinearization {
    pub a: SrbMatrix,
    pub b: SrbInputMatrix,
    pub c: SrbVector,
}

/// Linearizes the SRB dynamics about `x_ref` (zero input) with wrench
/// moment arms taken from `feet`, discretized with step `dt`.
pub fn srb_linearize(x_ref: &SrbState, feet: &FootPositions, params: &ModelParams, dt: f64) -> Result<SrbLinearization> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::Domain("discretization step must be non-negative"));
    }
    let j = srb_jacobians_with_inertia(x_ref, feet, params, &body_inertia(params))?;
    Ok(discretize(&j, &x_ref.to_vector(), dt))
}

pub(crate) fn discretize(j: &SrbJacobians, x_ref: &SrbVector, dt: f64) -> SrbLinearization {
    SrbLinearization {
        a: SrbMatrix::identity() + j.a * dt,
        b: j.b * dt,
        c: (j.drift - j.a * x_ref) * dt,
    }
}
