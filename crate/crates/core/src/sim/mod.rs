//! Closed-loop simulation: nonlinear plant, planner, reference generator
//! and MPC co-simulated at fixed rates.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::rotation::rot_z2;
use crate::model::{alip_flow, AnkleTorque, DsrbInput, DsrbState, ModelParams, Side, SrbState, StanceInfo};
use crate::mpc::{solve_mpc, wrench_to_plant_input, MpcConfig, MpcSolution, MpcVariant};
use crate::planner::{build_step_references, solve_nmpc, warm_start_shift, PlannerConfig, PlannerQuery, S2SPlan};
use crate::refgen::{
    generate_references, stance_positions, swing_target, yaw_schedule, Command, OrbitSpec, RefGenConfig, SwingPose,
    SwingTarget,
};
use crate::{Error, Result};

mod plant;

pub use plant::{
    active_wrench, apply_impact, plant_derivative, step_plant, Disturbance, DisturbanceKind, Integrator, PlantState,
    LEG_REACH,
};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub dt_sim: f64,
    pub integrator: Integrator,
    pub episode_length: f64,
    /// MPC period; a multiple of `dt_sim`.
    pub dt_mpc: f64,
    /// Planner period; a multiple of `dt_sim`.
    pub dt_planner: f64,
    pub max_tilt: f64,
    /// Allowed COM height band as fractions of the nominal height.
    pub height_band: [f64; 2],
    /// Standard deviation of Gaussian noise on the state seen by the
    /// controller (position, attitude, velocity, angular velocity).
    pub estimate_noise_std: f64,
    /// Torso yaw servo used when the controller leaves the torso unactuated.
    pub torso_kp: f64,
    pub torso_kd: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_sim: 0.001,
            integrator: Integrator::Rk4,
            episode_length: 10.0,
            dt_mpc: 0.002,
            dt_planner: 0.025,
            max_tilt: 0.5,
            height_band: [0.4, 1.5],
            estimate_noise_std: 0.0,
            torso_kp: 300.0,
            torso_kd: 30.0,
        }
    }
}

fn ticks_per(period: f64, dt: f64) -> Option<usize> {
    let n = crate::math::round(period / dt);
    (n >= 1.0 && (n * dt - period).abs() <= 1e-9 * period.max(1.0)).then_some(n as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_sim > 0.0 && self.episode_length >= 0.0) {
            return Err(Error::param("dt_sim", "must be positive"));
        }
        if ticks_per(self.dt_mpc, self.dt_sim).is_none() || ticks_per(self.dt_planner, self.dt_sim).is_none() {
            return Err(Error::param("dt_sim", "must divide the MPC and planner periods"));
        }
        if !(self.max_tilt > 0.0 && self.height_band[0] < self.height_band[1]) {
            return Err(Error::param("success thresholds", "tilt must be positive and the height band ordered"));
        }
        if !(self.estimate_noise_std >= 0.0) {
            return Err(Error::param("estimate_noise_std", "must be non-negative"));
        }
        Ok(())
    }
}

/// Piecewise-constant command profile: each entry holds from its start time
/// until the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandProfile {
    segments: Vec<(f64, Command)>,
}

impl CommandProfile {
    pub fn constant(cmd: Command) -> Self {
        Self { segments: alloc::vec![(0.0, cmd)] }
    }

    pub fn new(mut segments: Vec<(f64, Command)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::param("command profile", "needs at least one segment"));
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { segments })
    }

    pub fn at(&self, t: f64) -> Command {
        let mut cmd = self.segments[0].1;
        for (t0, c) in &self.segments {
            if *t0 <= t {
                cmd = *c;
            }
        }
        cmd
    }
}

/// Everything needed to run one closed-loop episode.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParams,
    pub planner: PlannerConfig,
    pub mpc: MpcConfig,
    pub refgen: RefGenConfig,
    pub sim: SimConfig,
    pub commands: CommandProfile,
    pub disturbances: Vec<Disturbance>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(variant: MpcVariant, commands: CommandProfile) -> Self {
        Self {
            params: ModelParams::default(),
            planner: PlannerConfig::default(),
            mpc: MpcConfig::with_variant(variant),
            refgen: RefGenConfig::default(),
            sim: SimConfig::default(),
            commands,
            disturbances: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Failure {
    Tilt { t: f64 },
    Height { t: f64 },
    Singularity { t: f64 },
    Reach { t: f64 },
    Controller { t: f64 },
}

/// One plant tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSample {
    pub t: f64,
    pub t_step: f64,
    pub stance: StanceInfo,
    pub swing: Vector3<f64>,
    pub x: DsrbState,
    pub u: DsrbInput,
    pub plan_id: u32,
    pub dist_force: Vector3<f64>,
    pub dist_moment: Vector3<f64>,
}

/// A completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t_impact: f64,
    /// Stance side during the step that just ended.
    pub side: Side,
    pub period: f64,
    /// Realized step in the previous stance yaw frame.
    pub length: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerCounters {
    pub mpc_solves: usize,
    pub mpc_degraded: usize,
    pub mpc_errors: usize,
    pub mpc_qp_iterations: usize,
    pub planner_solves: usize,
    pub planner_errors: usize,
    pub planner_not_converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub samples: Vec<LogSample>,
    pub steps: Vec<StepRecord>,
    pub disturbances: Vec<Disturbance>,
    pub failure: Option<Failure>,
    pub counters: ControllerCounters,
    pub p_z_des: f64,
}

pub const CSV_HEADER: &str = "t,t_step,stance,p_stf_x,p_stf_y,psi_stf,swing_x,swing_y,swing_z,\
p_x,p_y,p_z,roll,pitch,yaw,v_x,v_y,v_z,w_x,w_y,w_z,psi_tr,p_la,p_ra,dpsi_tr,v_la,v_ra,\
f_l_x,f_l_y,f_l_z,m_l_x,m_l_y,m_l_z,f_r_x,f_r_y,f_r_z,m_r_x,m_r_y,m_r_z,tau_tr,f_la,f_ra,\
plan_id,d_f_x,d_f_y,d_f_z,d_m_x,d_m_y,d_m_z";

impl EpisodeLog {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Sample at or just after `t`, or the last one.
    pub fn sample_at(&self, t: f64) -> Option<&LogSample> {
        let i = self.samples.partition_point(|s| s.t < t - 1e-9);
        self.samples.get(i).or(self.samples.last())
    }

    pub fn final_yaw(&self) -> Option<f64> {
        self.samples.last().map(|s| s.x.srb.theta.z)
    }

    /// Mean COM velocity over `[t0, t1]`, from the displacement.
    pub fn mean_velocity(&self, t0: f64, t1: f64) -> Result<Vector3<f64>> {
        let (a, b) = (self.sample_at(t0).ok_or(Error::EmptyLog)?, self.sample_at(t1).ok_or(Error::EmptyLog)?);
        if !(b.t > a.t) {
            return Err(Error::Domain("velocity window is empty"));
        }
        Ok((b.x.srb.p_com - a.x.srb.p_com) / (b.t - a.t))
    }

    /// Mean COM velocity over `[t0, t1]` in the heading frame of each
    /// sample, averaged over samples.
    pub fn mean_heading_velocity(&self, t0: f64, t1: f64) -> Result<Vector2<f64>> {
        let mut sum = Vector2::zeros();
        let mut n = 0usize;
        for s in self.samples.iter().filter(|s| s.t >= t0 && s.t <= t1) {
            let v = s.x.srb.v_com.xy();
            sum += rot_z2(s.x.srb.theta.z).transpose() * v;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyLog);
        }
        Ok(sum / n as f64)
    }

    /// One CSV row per plant tick, with [`CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 400);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let x = &s.x;
            let side = match s.stance.side {
                Side::Left => "L",
                Side::Right => "R",
            };
            let _ = write!(out, "{:.4},{:.4},{side}", s.t, s.t_step);
            let mut vals: Vec<f64> = Vec::with_capacity(48);
            vals.extend([s.stance.p_stf.x, s.stance.p_stf.y, s.stance.psi_stf]);
            vals.extend(s.swing.iter());
            vals.extend(x.srb.p_com.iter());
            vals.extend(x.srb.theta.iter());
            vals.extend(x.srb.v_com.iter());
            vals.extend(x.srb.omega.iter());
            vals.extend([x.psi_tr, x.p_la, x.p_ra, x.dpsi_tr, x.v_la, x.v_ra]);
            for w in [&s.u.left, &s.u.right] {
                vals.extend(w.force.iter());
                vals.extend(w.moment.iter());
            }
            vals.extend([s.u.tau_tr, s.u.f_la_x, s.u.f_ra_x]);
            for v in vals {
                let _ = write!(out, ",{v:.6}");
            }
            let _ = write!(out, ",{}", s.plan_id);
            for v in s.dist_force.iter().chain(s.dist_moment.iter()) {
                let _ = write!(out, ",{v:.3}");
            }
            out.push('\n');
        }
        out
    }
}

/// Episode success: no failure flag and every sample within the tilt and
/// height limits.
pub fn success(log: &EpisodeLog, config: &SimConfig) -> Result<bool> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if log.failure.is_some() {
        return Ok(false);
    }
    Ok(log.samples.iter().all(|s| within_limits(&s.x.srb, config, log.p_z_des)))
}

fn within_limits(x: &SrbState, config: &SimConfig, p_z_des: f64) -> bool {
    let z = x.p_com.z;
    x.theta.x.abs() <= config.max_tilt
        && x.theta.y.abs() <= config.max_tilt
        && z >= config.height_band[0] * p_z_des
        && z <= config.height_band[1] * p_z_des
}

/// Pelvis yaw `settle` seconds after `t_push`.
pub fn pelvis_yaw_after_recovery(log: &EpisodeLog, t_push: f64, settle: f64) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let t = t_push + settle;
    if log.duration() + 1e-9 < t {
        return Err(Error::Domain("log does not span the settle window"));
    }
    Ok(log.sample_at(t).map(|s| s.x.srb.theta.z).unwrap_or(0.0))
}

/// Plant state on the nominal in-place or walking orbit of `cmd`, at the
/// start of a left-stance step with the stance foot at the origin.
pub fn initial_state(cmd: &Command, planner: &PlannerConfig, params: &ModelParams) -> Result<PlantState> {
    let side = Side::Left;
    let query = PlannerQuery { x0: Default::default(), t_curr: 0.0, stance_side: side, v_cmd: cmd.v, omega_cmd: 0.0 };
    let refs = build_step_references(&query, planner, params)?;
    let alip = alip_flow(params, &refs[0].x_des, &AnkleTorque::ZERO, -planner.t_des)?;
    let mp = params.m_com * params.p_z_des;
    let srb = SrbState {
        p_com: Vector3::new(alip.p_x, alip.p_y, params.p_z_des),
        theta: Vector3::zeros(),
        v_com: Vector3::new(alip.l_y / mp, -alip.l_x / mp, 0.0),
        omega: Vector3::zeros(),
        g_entry: params.g,
    };
    let swing = Vector3::new(0.0, side.step_sign() * planner.l_y_offset, 0.0);
    Ok(PlantState {
        dsrb: DsrbState::from_srb(srb),
        stance: StanceInfo { side, p_stf: Vector3::zeros(), psi_stf: 0.0 },
        swing_pose: SwingPose::at_rest(swing, 0.0),
        t: 0.0,
        t_step: 0.0,
    })
}

struct Controller<'a> {
    sc: &'a Scenario,
    orbit: OrbitSpec,
    refgen: RefGenConfig,
    plan: Option<S2SPlan>,
    plan_time: f64,
    plan_id: u32,
    mpc: Option<MpcSolution>,
    swing: Option<SwingTarget>,
    u: DsrbInput,
    counters: ControllerCounters,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl<'a> Controller<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        let noise = if sc.sim.estimate_noise_std > 0.0 {
            Some(Normal::new(0.0, sc.sim.estimate_noise_std).map_err(|_| Error::param("estimate_noise_std", "invalid"))?)
        } else {
            None
        };
        Ok(Self {
            sc,
            orbit: OrbitSpec { t_des: sc.planner.t_des, l_y_offset: sc.planner.l_y_offset },
            refgen: RefGenConfig { dt: sc.mpc.dt, n_nodes: sc.mpc.n_nodes, ..sc.refgen },
            plan: None,
            plan_time: 0.0,
            plan_id: 0,
            mpc: None,
            swing: None,
            u: DsrbInput::default(),
            counters: ControllerCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            noise,
        })
    }

    fn estimate(&mut self, state: &PlantState) -> PlantState {
        let mut est = *state;
        if let Some(dist) = self.noise {
            let s = &mut est.dsrb.srb;
            for v in [&mut s.p_com, &mut s.theta, &mut s.v_com, &mut s.omega] {
                for c in v.iter_mut() {
                    *c += dist.sample(&mut self.rng);
                }
            }
        }
        est
    }

    fn replan(&mut self, state: &PlantState) {
        // inside the final margin the impact time is committed
        if let Some(plan) = &self.plan {
            if plan.t[0] - state.t_step < self.sc.planner.first_step_margin {
                return;
            }
        }
        let cmd = self.sc.commands.at(state.t);
        let query = PlannerQuery {
            x0: state.alip_state(&self.sc.params),
            t_curr: state.t_step,
            stance_side: state.stance.side,
            v_cmd: cmd.v,
            omega_cmd: cmd.omega,
        };
        let warm = self.plan.as_ref().map(|p| warm_start_shift(p, state.t - self.plan_time, false));
        self.counters.planner_solves += 1;
        match solve_nmpc(&query, &self.sc.planner, &self.sc.params, warm.as_ref()) {
            Ok(plan) => {
                if plan.status != crate::planner::PlanStatus::Converged {
                    self.counters.planner_not_converged += 1;
                }
                self.plan = Some(plan);
                self.plan_time = state.t;
                self.plan_id += 1;
            }
            Err(_) => self.counters.planner_errors += 1,
        }
        self.refit_swing(state);
    }

    fn plan_geometry(&self, plan: &S2SPlan, state: &PlantState) -> (Vec<f64>, Vec<Vector2<f64>>) {
        let omega = self.sc.commands.at(state.t).omega;
        let yaws = yaw_schedule(omega, plan, state.stance.psi_stf);
        let positions = stance_positions(plan, &yaws, &state.stance.p_stf.xy());
        (yaws, positions)
    }

    fn refit_swing(&mut self, state: &PlantState) {
        let Some(plan) = &self.plan else { return };
        let (yaws, positions) = self.plan_geometry(plan, state);
        let phase = (state.t_step / plan.t[0]).clamp(0.0, 1.0);
        self.swing = swing_target(plan, &yaws, &positions, &state.swing_pose, phase, self.refgen.swing_apex).ok();
    }

    fn swing_pose(&self, state: &PlantState) -> SwingPose {
        match (&self.swing, &self.plan) {
            (Some(s), Some(plan)) => s.pose((state.t_step / plan.t[0]).clamp(0.0, 1.0)),
            _ => state.swing_pose,
        }
    }

    fn control(&mut self, state: &PlantState) {
        if self.plan.is_none() {
            self.counters.mpc_errors += 1;
            return;
        }
        let cmd = self.sc.commands.at(state.t);
        let est = self.estimate(state);
        let Some(plan) = &self.plan else { return };
        let refs = generate_references(plan, &est.stance, est.t_step, &cmd, &self.orbit, &self.refgen, &self.sc.params);
        let result = refs.and_then(|r| solve_mpc(&est.dsrb, &r, &self.sc.mpc, &self.sc.params, self.mpc.as_ref()));
        self.counters.mpc_solves += 1;
        match result {
            Ok(sol) => {
                if sol.degraded {
                    self.counters.mpc_degraded += 1;
                }
                self.counters.mpc_qp_iterations += sol.iterations;
                self.u = wrench_to_plant_input(&sol, self.sc.mpc.variant);
                self.mpc = Some(sol);
            }
            Err(_) => self.counters.mpc_errors += 1,
        }
    }

    /// Input applied to the plant: the held MPC input plus the torso servo
    /// when the controller does not actuate the torso.
    fn plant_input(&self, state: &PlantState) -> DsrbInput {
        let mut u = self.u;
        // the swing foot carries no load
        match state.stance.side {
            Side::Left => u.right = Default::default(),
            Side::Right => u.left = Default::default(),
        }
        if self.sc.mpc.variant == MpcVariant::Srb {
            let x = &state.dsrb;
            u.tau_tr = -self.sc.sim.torso_kp * x.psi_tr - self.sc.sim.torso_kd * x.dpsi_tr;
            u.f_la_x = 0.0;
            u.f_ra_x = 0.0;
        }
        u
    }
}

/// Runs one closed-loop episode from the nominal initial state of the first
/// command.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeLog> {
    let init = initial_state(&scenario.commands.at(0.0), &scenario.planner, &scenario.params)?;
    run_episode_from(scenario, init)
}

pub fn run_episode_from(scenario: &Scenario, init: PlantState) -> Result<EpisodeLog> {
    let sc = scenario;
    sc.sim.validate()?;
    sc.mpc.validate()?;
    sc.planner.validate()?;
    sc.params.validate()?;
    let dt = sc.sim.dt_sim;
    let mpc_every = ticks_per(sc.sim.dt_mpc, dt).ok_or(Error::param("dt_mpc", "not a multiple of dt_sim"))?;
    let plan_every = ticks_per(sc.sim.dt_planner, dt).ok_or(Error::param("dt_planner", "not a multiple of dt_sim"))?;
    let n_ticks = crate::math::round(sc.sim.episode_length / dt) as usize;

    let mut ctl = Controller::new(sc)?;
    let mut state = init;
    let mut log = EpisodeLog {
        samples: Vec::with_capacity(n_ticks + 1),
        steps: Vec::new(),
        disturbances: sc.disturbances.clone(),
        failure: None,
        counters: ControllerCounters::default(),
        p_z_des: sc.params.p_z_des,
    };

    ctl.replan(&state);
    if ctl.plan.is_none() {
        return Err(Error::Domain("initial plan failed"));
    }
    for tick in 0..=n_ticks {
        // impact when the current step has run its planned duration
        if let Some(plan) = &ctl.plan {
            if state.t_step >= plan.t[0] - 0.5 * dt {
                let (_, positions) = ctl.plan_geometry(plan, &state);
                let landing = Vector3::new(positions[1].x, positions[1].y, 0.0);
                let prev = state.stance;
                let period = state.t_step;
                let (next, reachable) = apply_impact(&state, &landing, state.dsrb.srb.theta.z);
                let step = rot_z2(prev.psi_stf).transpose() * (landing - prev.p_stf).xy();
                log.steps.push(StepRecord { t_impact: state.t, side: prev.side, period, length: step });
                state = next;
                if !reachable {
                    log.failure = Some(Failure::Reach { t: state.t });
                }
                let shifted = warm_start_shift(plan, 0.0, true);
                ctl.plan = Some(shifted);
                ctl.plan_time = state.t;
                ctl.swing = None;
                ctl.replan(&state);
            }
        }
        if log.failure.is_none() && !within_limits(&state.dsrb.srb, &sc.sim, sc.params.p_z_des) {
            let t = state.t;
            log.failure = Some(if state.dsrb.srb.p_com.z < sc.sim.height_band[0] * sc.params.p_z_des
                || state.dsrb.srb.p_com.z > sc.sim.height_band[1] * sc.params.p_z_des
            {
                Failure::Height { t }
            } else {
                Failure::Tilt { t }
            });
        }
        if log.failure.is_none() && (state.dsrb.srb.p_com - state.stance.p_stf).norm() > LEG_REACH {
            log.failure = Some(Failure::Reach { t: state.t });
        }
        if tick > 0 && tick % plan_every == 0 {
            ctl.replan(&state);
        }
        if tick % mpc_every == 0 {
            ctl.control(&state);
            if ctl.mpc.is_none() {
                log.failure = Some(Failure::Controller { t: state.t });
            }
        }
        let u = ctl.plant_input(&state);
        state.swing_pose = ctl.swing_pose(&state);
        let (df, dm) = active_wrench(&sc.disturbances, state.t);
        log.samples.push(LogSample {
            t: state.t,
            t_step: state.t_step,
            stance: state.stance,
            swing: state.swing_pose.position,
            x: state.dsrb,
            u,
            plan_id: ctl.plan_id,
            dist_force: df,
            dist_moment: dm,
        });
        if log.failure.is_some() || tick == n_ticks {
            break;
        }
        match step_plant(&state, &u, &sc.disturbances, dt, sc.sim.integrator, &sc.params) {
            Ok(next) => state = next,
            Err(Error::Singularity { .. }) => {
                log.failure = Some(Failure::Singularity { t: state.t });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    log.counters = ctl.counters;
    Ok(log)
}

#[cfg(test)]
mod tests;
