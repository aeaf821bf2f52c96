//! Reference generation: turns a step plan into stance-foot schedules,
//! prediction-node timing and SRB reference trajectories.

use alloc::vec::Vec;

use nalgebra::{Vector2, Vector3};

use crate::model::rotation::rot_z2;
use crate::model::{alip_transition, hlip_period1, hlip_period2, AlipState, ModelParams, Side, SrbState, StanceInfo};
use crate::planner::S2SPlan;
use crate::{Error, Result};

mod swing;

pub use swing::{swing_target, SwingPose, SwingTarget, DEFAULT_SWING_APEX};

/// How node velocity references are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum VelocityReference {
    /// Desired HLIP pre-impact velocity of the node's step, constant within
    /// the step.
    HlipPreImpact,
    /// Commanded velocity.
    Commanded,
    /// Velocity implied by the backward-flowed ALIP momenta.
    Alip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RefGenConfig {
    pub dt: f64,
    /// Number of predicted nodes after the current one.
    pub n_nodes: usize,
    pub velocity_reference: VelocityReference,
    pub swing_apex: f64,
    /// Bend the node grid onto planned impacts (see
    /// [`schedule_nodes_aligned`]).
    pub align_impacts: bool,
}

impl Default for RefGenConfig {
    fn default() -> Self {
        Self { dt: 0.025, n_nodes: 10, velocity_reference: VelocityReference::Alip, swing_apex: DEFAULT_SWING_APEX, align_impacts: true }
    }
}

/// Velocity and turn-rate command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Command {
    pub v: [f64; 2],
    pub omega: f64,
}

/// Timing of prediction nodes. Node `n + 1` sits `dt_seq[n]` after node `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSchedule {
    pub dt_seq: Vec<f64>,
    /// Step whose impact is the next one at or after the node time.
    pub step_of_node: Vec<usize>,
    pub t2i: Vec<f64>,
    /// Stance foot during the interval that starts at the node.
    pub contact: Vec<Side>,
    /// Step active during the interval that starts at the node.
    pub contact_step: Vec<usize>,
    /// Set when the horizon outlasts the plan and the last step is held.
    pub held: bool,
}

impl NodeSchedule {
    pub fn len(&self) -> usize {
        self.t2i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t2i.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrbReferenceTrajectory {
    pub x_ref: Vec<SrbState>,
    /// Stance foot of the interval starting at each node.
    pub p_stf_ref: Vec<Vector3<f64>>,
    pub psi_stf_ref: Vec<f64>,
    pub schedule: NodeSchedule,
}

impl SrbReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.x_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_ref.is_empty()
    }
}

/// Stance yaw of every planned step: each step turns by `omega_cmd` times
/// the period of the step before it.
pub fn yaw_schedule(omega_cmd: f64, plan: &S2SPlan, psi0: f64) -> Vec<f64> {
    let mut yaws = Vec::with_capacity(plan.len());
    let mut psi = psi0;
    for k in 0..plan.len() {
        yaws.push(psi);
        psi += omega_cmd * plan.t[k];
    }
    yaws
}

/// Stance foot position of every planned step, accumulating the rotated
/// step lengths from the current stance foot at `origin`.
pub fn stance_positions(plan: &S2SPlan, yaws: &[f64], origin: &Vector2<f64>) -> Vec<Vector2<f64>> {
    let mut out = Vec::with_capacity(plan.len());
    let mut p = *origin;
    for k in 0..plan.len() {
        out.push(p);
        p += rot_z2(yaws[k]) * plan.l[k].to_vector();
    }
    out
}

fn impact_times(plan: &S2SPlan, t_curr: f64) -> Vec<f64> {
    let mut impacts = Vec::with_capacity(plan.len());
    let mut t = plan.t[0] - t_curr;
    impacts.push(t.max(0.0));
    for k in 1..plan.len() {
        t += plan.t[k];
        impacts.push(t);
    }
    impacts
}

fn check_schedule_inputs(plan: &S2SPlan, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Domain("node period must be strictly positive"));
    }
    if plan.is_empty() {
        return Err(Error::Domain("plan has no steps"));
    }
    Ok(())
}

/// Assigns `n_nodes` nodes spaced `dt` apart, starting now (`t_curr` into
/// the first planned step), to planned steps.
pub fn schedule_nodes(plan: &S2SPlan, dt: f64, n_nodes: usize, t_curr: f64) -> Result<NodeSchedule> {
    check_schedule_inputs(plan, dt)?;
    let times: Vec<f64> = (0..n_nodes).map(|n| n as f64 * dt).collect();
    Ok(schedule_at(plan, &impact_times(plan, t_curr), &times, dt))
}

/// Like [`schedule_nodes`], but the grid is bent so that a node falls on
/// every impact: an interval that would contain an impact is shortened or
/// stretched (by at most a quarter period) to end on it. The contact switch
/// of the prediction then coincides with the planned one.
pub fn schedule_nodes_aligned(plan: &S2SPlan, dt: f64, n_nodes: usize, t_curr: f64) -> Result<NodeSchedule> {
    check_schedule_inputs(plan, dt)?;
    let impacts = impact_times(plan, t_curr);
    let mut times = Vec::with_capacity(n_nodes);
    let mut t = 0.0;
    for n in 0..n_nodes {
        times.push(t);
        // the first interval may be arbitrarily short, later ones keep a
        // quarter period
        let min_gap = if n == 0 { 1e-9 * dt } else { 0.25 * dt };
        let next_impact = impacts.iter().copied().find(|&ti| ti > t + min_gap);
        t = match next_impact {
            Some(ti) if ti < t + 1.25 * dt => ti,
            _ => t + dt,
        };
    }
    Ok(schedule_at(plan, &impacts, &times, dt))
}

fn schedule_at(plan: &S2SPlan, impacts: &[f64], times: &[f64], dt: f64) -> NodeSchedule {
    // Absorb round-off so that a node sitting on an impact instant is
    // attributed to the step that ends there.
    let slack = 1e-9 * dt;
    let last = plan.len() - 1;
    let n_nodes = times.len();
    let mut s = NodeSchedule {
        dt_seq: Vec::with_capacity(n_nodes),
        step_of_node: Vec::with_capacity(n_nodes),
        t2i: Vec::with_capacity(n_nodes),
        contact: Vec::with_capacity(n_nodes),
        contact_step: Vec::with_capacity(n_nodes),
        held: false,
    };
    for (n, &t_n) in times.iter().enumerate() {
        let k = impacts.iter().position(|&ti| ti + slack >= t_n).unwrap_or_else(|| {
            s.held = true;
            last
        });
        let kc = impacts.iter().position(|&ti| ti > t_n + slack).unwrap_or(last);
        s.dt_seq.push(times.get(n + 1).map_or(dt, |t1| t1 - t_n));
        s.step_of_node.push(k);
        s.t2i.push((impacts[k] - t_n).max(0.0));
        s.contact.push(plan.stance_sides[kc]);
        s.contact_step.push(kc);
    }
    s
}

/// ALIP reference at node `n`: the pre-impact state of the node's step,
/// flowed backwards by the node's time-until-impact.
pub fn alip_ref_at_node(plan: &S2SPlan, schedule: &NodeSchedule, n: usize, params: &ModelParams) -> Result<AlipState> {
    if n >= schedule.len() {
        return Err(Error::Dimension { what: "node index", expected: schedule.len(), got: n });
    }
    let k = schedule.step_of_node[n];
    let tr = alip_transition(params, -schedule.t2i[n])?;
    Ok(tr.apply(&plan.x_pre[k], &plan.tau[k]))
}

/// HLIP desired pre-impact velocities `(v_x, v_y)` of a step taken from
/// stance `side`.
fn hlip_velocity(side: Side, t_des: f64, l_y_offset: f64, cmd: &Command, params: &ModelParams) -> Result<Vector2<f64>> {
    let sag = hlip_period1(t_des, params.p_z_des, params.g, cmd.v[0])?;
    let lat = hlip_period2(t_des, params.p_z_des, params.g, cmd.v[1], l_y_offset, side.step_sign())?;
    Ok(Vector2::new(sag.v_pre, lat.v_pre))
}

/// Parameters of the desired HLIP orbit used for velocity references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub t_des: f64,
    pub l_y_offset: f64,
}

/// SRB reference at every node: COM over the rotated ALIP offset from the
/// node's stance foot at the nominal height, level attitude, yaw advancing
/// at the commanded rate within each step.
#[allow(clippy::too_many_arguments)]
pub fn assemble_srb_refs(
    plan: &S2SPlan,
    yaws: &[f64],
    positions: &[Vector2<f64>],
    schedule: &NodeSchedule,
    cmd: &Command,
    orbit: &OrbitSpec,
    velocity_reference: VelocityReference,
    params: &ModelParams,
) -> Result<SrbReferenceTrajectory> {
    let n_nodes = schedule.len();
    let mut x_ref = Vec::with_capacity(n_nodes);
    let mut p_stf_ref = Vec::with_capacity(n_nodes);
    let mut psi_stf_ref = Vec::with_capacity(n_nodes);
    let mp = params.m_com * params.p_z_des;
    for n in 0..n_nodes {
        let k = schedule.step_of_node[n];
        let alip = alip_ref_at_node(plan, schedule, n, params)?;
        let rot = rot_z2(yaws[k]);
        let p_xy = positions[k] + rot * Vector2::new(alip.p_x, alip.p_y);
        let v_local = match velocity_reference {
            VelocityReference::HlipPreImpact => hlip_velocity(plan.stance_sides[k], orbit.t_des, orbit.l_y_offset, cmd, params)?,
            VelocityReference::Commanded => Vector2::new(cmd.v[0], cmd.v[1]),
            VelocityReference::Alip => Vector2::new(alip.l_y / mp, -alip.l_x / mp),
        };
        let v_xy = rot * v_local;
        let elapsed = plan.t[k] - schedule.t2i[n];
        let yaw = yaws[k] + cmd.omega * elapsed.max(0.0);
        x_ref.push(SrbState {
            p_com: Vector3::new(p_xy.x, p_xy.y, params.p_z_des),
            theta: Vector3::new(0.0, 0.0, yaw),
            v_com: Vector3::new(v_xy.x, v_xy.y, 0.0),
            omega: Vector3::new(0.0, 0.0, cmd.omega),
            g_entry: params.g,
        });
        let kc = schedule.contact_step[n];
        p_stf_ref.push(Vector3::new(positions[kc].x, positions[kc].y, 0.0));
        psi_stf_ref.push(yaws[kc]);
    }
    Ok(SrbReferenceTrajectory { x_ref, p_stf_ref, psi_stf_ref, schedule: schedule.clone() })
}

/// Full pipeline from a plan to the SRB references for `n_nodes + 1` nodes
/// (the current node plus the prediction horizon).
pub fn generate_references(
    plan: &S2SPlan,
    stance: &StanceInfo,
    t_curr: f64,
    cmd: &Command,
    orbit: &OrbitSpec,
    config: &RefGenConfig,
    params: &ModelParams,
) -> Result<SrbReferenceTrajectory> {
    let yaws = yaw_schedule(cmd.omega, plan, stance.psi_stf);
    let positions = stance_positions(plan, &yaws, &stance.p_stf.xy());
    let schedule = if config.align_impacts {
        schedule_nodes_aligned(plan, config.dt, config.n_nodes + 1, t_curr)?
    } else {
        schedule_nodes(plan, config.dt, config.n_nodes + 1, t_curr)?
    };
    assemble_srb_refs(plan, &yaws, &positions, &schedule, cmd, orbit, config.velocity_reference, params)
}
