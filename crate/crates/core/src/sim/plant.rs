//! Nonlinear plant of the decomposed rigid body with time-triggered stance
//! switching.

use nalgebra::Vector3;

use crate::model::rotation::{euler_to_rot, rot_z};
use crate::model::srb::srb_derivative_with_inertia;
use crate::model::{
    alip_state_from_robot, lower_body_inertia, AlipState, DsrbInput, DsrbState, DsrbVector, FootPositions,
    ModelParams, Side, StanceInfo, DSRB_NX,
};
use crate::refgen::SwingPose;
use crate::{Error, Result};

/// Maximum distance between the COM and a foot.
pub const LEG_REACH: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DisturbanceKind {
    /// Force applied at the COM, world frame.
    ComForce,
    /// Moment applied to the torso, world frame. Its component about the
    /// body z axis drives the torso yaw joint; the rest acts on the body.
    TorsoMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub vector: Vector3<f64>,
    pub t_start: f64,
    pub duration: f64,
}

impl Disturbance {
    pub fn new(kind: DisturbanceKind, vector: Vector3<f64>, t_start: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::param("duration", "disturbance duration must be positive"));
        }
        Ok(Self { kind, vector, t_start, duration })
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }
}

/// Disturbance force and moment acting at time `t`.
pub fn active_wrench(disturbances: &[Disturbance], t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for d in disturbances.iter().filter(|d| d.is_active(t)) {
        match d.kind {
            DisturbanceKind::ComForce => force += d.vector,
            DisturbanceKind::TorsoMoment => moment += d.vector,
        }
    }
    (force, moment)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub dsrb: DsrbState,
    pub stance: StanceInfo,
    pub swing_pose: SwingPose,
    pub t: f64,
    /// Time since the last impact.
    pub t_step: f64,
}

impl PlantState {
    pub fn feet(&self) -> FootPositions {
        let mut feet = FootPositions::both_at(self.stance.p_stf);
        match self.stance.side {
            Side::Left => feet.right = self.swing_pose.position,
            Side::Right => feet.left = self.swing_pose.position,
        }
        feet
    }

    /// ALIP state about the stance foot in the stance yaw frame.
    pub fn alip_state(&self, params: &ModelParams) -> AlipState {
        let rt = rot_z(self.stance.psi_stf).transpose();
        let s = &self.dsrb.srb;
        alip_state_from_robot(&(rt * (s.p_com - self.stance.p_stf)), &(rt * s.v_com), &(rt * s.omega), params)
    }

    /// Yaw angular momentum of the lower body and torso about the body z
    /// axis, when upright.
    pub fn yaw_momentum(&self, params: &ModelParams) -> f64 {
        let wz = self.dsrb.srb.omega.z;
        params.i_lb_z * wz + params.i_tr_z * (wz + self.dsrb.dpsi_tr)
    }
}

/// Time derivative of the plant state under input `u` and a disturbance
/// wrench.
///
/// The lower body carries the roll/pitch inertia of the whole upper body
/// and the lower-body yaw inertia. The torso yaws relative to it, so its
/// absolute yaw acceleration is `omega_dot_z + psi_tr_ddot`.
pub fn plant_derivative(
    x: &DsrbState,
    u: &DsrbInput,
    feet: &FootPositions,
    dist_force: &Vector3<f64>,
    dist_moment: &Vector3<f64>,
    params: &ModelParams,
) -> Result<DsrbVector> {
    let s = &x.srb;
    let i_body = lower_body_inertia(params);
    let base = srb_derivative_with_inertia(s, &u.feet(), feet, params, &i_body)?;
    let r = euler_to_rot(&s.theta);
    let (ex, ey, ez) = (r * Vector3::x(), r * Vector3::y(), r * Vector3::z());
    let g = s.g_entry;

    let arm_force = params.r_la[2] * u.f_la_x + params.r_ra[2] * u.f_ra_x;
    let mut moment = ey * arm_force - ez * u.tau_tr;
    for (p_arm, m_arm) in [(x.p_la, params.m_la), (x.p_ra, params.m_ra)] {
        moment += (ex * p_arm).cross(&(Vector3::z() * (-m_arm * g)));
    }
    let torso_dist = ez.dot(dist_moment);
    moment += dist_moment - ez * torso_dist;

    let iw_inv = r * nalgebra::Matrix3::from_diagonal(&i_body.map(|v| 1.0 / v)) * r.transpose();
    let omega_dot = base.fixed_rows::<3>(9) + iw_inv * moment;
    let v_dot = base.fixed_rows::<3>(6) + (ex * (u.f_la_x + u.f_ra_x) + dist_force) / params.m_com;
    let torso_torque = u.tau_tr + torso_dist - params.r_la[1] * u.f_la_x - params.r_ra[1] * u.f_ra_x;
    let psi_tr_ddot = torso_torque / params.i_tr_z - ez.dot(&omega_dot);

    let mut d = DsrbVector::zeros();
    d.fixed_rows_mut::<6>(0).copy_from(&base.fixed_rows::<6>(0));
    d.fixed_rows_mut::<3>(6).copy_from(&v_dot);
    d.fixed_rows_mut::<3>(9).copy_from(&omega_dot);
    d[13] = x.dpsi_tr;
    d[14] = x.v_la;
    d[15] = x.v_ra;
    d[16] = psi_tr_ddot;
    d[17] = -u.f_la_x / params.m_la;
    d[18] = -u.f_ra_x / params.m_ra;
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// Advances the plant by `dt` with the input held and the disturbance
/// wrench sampled at the start of the step. The stance foot is stationary.
pub fn step_plant(
    state: &PlantState,
    u: &DsrbInput,
    disturbances: &[Disturbance],
    dt: f64,
    integrator: Integrator,
    params: &ModelParams,
) -> Result<PlantState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain("integration step must be positive"));
    }
    let feet = state.feet();
    let (df, dm) = active_wrench(disturbances, state.t);
    let f = |v: &DsrbVector| plant_derivative(&DsrbState::from_vector(v), u, &feet, &df, &dm, params);
    let x = state.dsrb.to_vector();
    let next: DsrbVector = match integrator {
        Integrator::Euler => x + f(&x)? * dt,
        Integrator::Rk4 => {
            let k1 = f(&x)?;
            let k2 = f(&(x + k1 * (dt / 2.0)))?;
            let k3 = f(&(x + k2 * (dt / 2.0)))?;
            let k4 = f(&(x + k3 * dt))?;
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    };
    debug_assert_eq!(next.len(), DSRB_NX);
    let mut out = *state;
    out.dsrb = DsrbState::from_vector(&next);
    out.t += dt;
    out.t_step += dt;
    Ok(out)
}

/// Switches stance to the landing pose. The body state is untouched and the
/// previous stance foot becomes the swing foot at rest. Returns whether the
/// landing is within leg reach of the COM.
pub fn apply_impact(state: &PlantState, landing: &Vector3<f64>, landing_yaw: f64) -> (PlantState, bool) {
    let mut out = *state;
    out.swing_pose = SwingPose::at_rest(state.stance.p_stf, state.stance.psi_stf);
    out.stance = StanceInfo { side: state.stance.side.other(), p_stf: *landing, psi_stf: landing_yaw };
    out.t_step = 0.0;
    let reachable = (landing - state.dsrb.srb.p_com).norm() <= LEG_REACH;
    (out, reachable)
}
