//! Step planner: nonlinear MPC over the step-to-step ALIP dynamics that
//! jointly chooses pre-impact states, step lengths, step periods and ankle
//! torques over a horizon of K steps.
//!
//! Decision vector, per step `k`: `x_pre[k]` (4), `l[k]` (2), `T[k]` (1),
//! `tau[k]` (2). Step `k` is taken from stance `stance_sides[k]`; it ends at
//! `x_pre[k]` and the swing foot then lands at `l[k]`. `T[0]` is the full
//! period of the current step, so its remaining time is `T[0] - t_curr`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix4, Matrix4x2, Vector4};

use crate::model::{
    alip_system_matrices, alip_transition, desired_step_lengths, hlip_period1, hlip_period2, hlip_to_alip, reset_matrix,
    AlipState, AnkleTorque, ModelParams, Side, StepLength,
};
use crate::qp::{qp_solve, QpProblem, QpSettings, QpStatus};
use crate::{Error, Result};

const NV: usize = 9;
const IX: usize = 0;
const IL: usize = 4;
const IT: usize = 6;
const ITAU: usize = 7;

/// Sanity bound on ALIP positions accepted in a query.
pub const MAX_ALIP_POSITION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SqpSettings {
    pub max_iter: usize,
    /// Converged when the step and the dynamics residual fall below this.
    pub tol: f64,
    /// Lower bound on the l1 merit penalty weight.
    pub merit_penalty: f64,
    /// Adds the dynamics curvature with respect to the step periods
    /// (weighted by the latest multipliers) to the Gauss-Newton Hessian.
    pub exact_curvature: bool,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self { max_iter: 15, tol: 1e-7, merit_penalty: 10.0, exact_curvature: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PlannerConfig {
    pub k_steps: usize,
    pub q_x: [f64; 4],
    pub r_l: [f64; 2],
    pub r_t: f64,
    pub r_tau: [f64; 2],
    pub x_lb: [f64; 4],
    pub x_ub: [f64; 4],
    pub l_x_lb: f64,
    pub l_x_ub: f64,
    /// Smallest lateral step magnitude towards the swing side.
    pub l_y_inner: f64,
    /// Largest lateral step magnitude towards the swing side.
    pub l_y_outer: f64,
    pub t_lb: f64,
    pub t_ub: f64,
    pub tau_lb: [f64; 2],
    pub tau_ub: [f64; 2],
    pub t_des: f64,
    pub l_y_offset: f64,
    /// Minimum remaining time of the current step.
    pub first_step_margin: f64,
    pub sqp: SqpSettings,
    pub qp: QpSettings,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k_steps: 4,
            q_x: [10.0, 1.0, 10.0, 1.0],
            r_l: [1.0, 1.0],
            r_t: 5.0,
            r_tau: [0.01, 0.01],
            x_lb: [-1.0, -50.0, -1.0, -50.0],
            x_ub: [1.0, 50.0, 1.0, 50.0],
            l_x_lb: -0.5,
            l_x_ub: 0.5,
            l_y_inner: 0.10,
            l_y_outer: 0.45,
            t_lb: 0.25,
            t_ub: 0.5,
            tau_lb: [-15.0, -5.0],
            tau_ub: [15.0, 5.0],
            t_des: 0.4,
            l_y_offset: 0.2,
            first_step_margin: 0.05,
            sqp: SqpSettings::default(),
            qp: QpSettings::default(),
        }
    }
}

impl PlannerConfig {
    /// Period fixed at `t`: `t_lb = t_ub = t_des = t`.
    pub fn fixed_period(t: f64) -> Self {
        Self { t_lb: t, t_ub: t, t_des: t, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_steps < 2 {
            return Err(Error::param("k_steps", "horizon needs at least two steps"));
        }
        let weights = self.q_x.iter().chain(&self.r_l).chain(&self.r_tau).chain(core::iter::once(&self.r_t));
        if weights.clone().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        if !(self.t_lb > 0.0 && self.t_lb <= self.t_ub) {
            return Err(Error::param("t_lb/t_ub", "need 0 < t_lb <= t_ub"));
        }
        if !(self.t_des > 0.0) {
            return Err(Error::param("t_des", "must be strictly positive"));
        }
        if !(0.0 <= self.l_y_inner && self.l_y_inner <= self.l_y_outer) || self.l_x_lb > self.l_x_ub {
            return Err(Error::param("step bounds", "must be ordered"));
        }
        if (0..4).any(|i| self.x_lb[i] > self.x_ub[i]) || (0..2).any(|i| self.tau_lb[i] > self.tau_ub[i]) {
            return Err(Error::param("state/torque bounds", "must be ordered"));
        }
        if !(self.l_y_offset > 0.0) {
            return Err(Error::param("l_y_offset", "must be strictly positive"));
        }
        Ok(())
    }

    /// Lateral step bounds for a step with stance indicator `gamma`.
    pub fn l_y_bounds(&self, gamma: f64) -> (f64, f64) {
        if gamma > 0.0 {
            (self.l_y_inner, self.l_y_outer)
        } else {
            (-self.l_y_outer, -self.l_y_inner)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerQuery {
    pub x0: AlipState,
    /// Time since the beginning of the current step.
    pub t_curr: f64,
    pub stance_side: Side,
    pub v_cmd: [f64; 2],
    pub omega_cmd: f64,
}

/// Desired values for one planned step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReference {
    pub x_des: AlipState,
    pub l_des: StepLength,
    pub t_des: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    Converged,
    MaxIter,
    /// Built without optimization (initial guesses and shifted plans).
    Guess,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlannerStats {
    pub iterations: usize,
    pub qp_iterations: usize,
    pub objective: f64,
    pub dynamics_residual: f64,
    pub step_norm: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2SPlan {
    pub x_pre: Vec<AlipState>,
    pub l: Vec<StepLength>,
    pub t: Vec<f64>,
    pub tau: Vec<AnkleTorque>,
    pub stance_sides: Vec<Side>,
    /// Time into the first step when the plan was computed.
    pub t_curr: f64,
    pub status: PlanStatus,
    pub stats: PlannerStats,
}

impl S2SPlan {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Remaining time of the current step at `t_curr`.
    pub fn remaining_first(&self) -> f64 {
        self.t[0] - self.t_curr
    }

    fn to_vector(&self) -> DVector<f64> {
        let k = self.len();
        let mut z = DVector::zeros(NV * k);
        for i in 0..k {
            let o = NV * i;
            z.fixed_rows_mut::<4>(o + IX).copy_from(&self.x_pre[i].to_vector());
            z[o + IL] = self.l[i].l_x;
            z[o + IL + 1] = self.l[i].l_y;
            z[o + IT] = self.t[i];
            z[o + ITAU] = self.tau[i].tau_y;
            z[o + ITAU + 1] = self.tau[i].tau_x;
        }
        z
    }

    fn from_vector(z: &DVector<f64>, sides: Vec<Side>, t_curr: f64) -> Self {
        let k = z.len() / NV;
        let mut plan = S2SPlan {
            x_pre: Vec::with_capacity(k),
            l: Vec::with_capacity(k),
            t: Vec::with_capacity(k),
            tau: Vec::with_capacity(k),
            stance_sides: sides,
            t_curr,
            status: PlanStatus::Guess,
            stats: PlannerStats::default(),
        };
        for i in 0..k {
            let o = NV * i;
            plan.x_pre.push(AlipState::new(z[o], z[o + 1], z[o + 2], z[o + 3]));
            plan.l.push(StepLength::new(z[o + IL], z[o + IL + 1]));
            plan.t.push(z[o + IT]);
            plan.tau.push(AnkleTorque::new(z[o + ITAU], z[o + ITAU + 1]));
        }
        plan
    }

    /// Largest violation of the step-to-step dynamics along the plan,
    /// starting from `x0`.
    pub fn dynamics_residual(&self, x0: &AlipState, params: &ModelParams) -> Result<f64> {
        let mut worst = 0.0f64;
        let first = alip_transition(params, self.t[0] - self.t_curr)?.apply(x0, &self.tau[0]);
        worst = worst.max((first.to_vector() - self.x_pre[0].to_vector()).amax());
        for k in 1..self.len() {
            let x = crate::model::s2s(params, &self.x_pre[k - 1], self.t[k], &self.tau[k], &self.l[k - 1])?;
            worst = worst.max((x.to_vector() - self.x_pre[k].to_vector()).amax());
        }
        Ok(worst)
    }
}

fn stance_sequence(first: Side, k: usize) -> Vec<Side> {
    let mut sides = Vec::with_capacity(k);
    let mut s = first;
    for _ in 0..k {
        sides.push(s);
        s = s.other();
    }
    sides
}

/// Desired pre-impact states, step lengths and periods for every step of
/// the horizon, from the HLIP period-1 (sagittal) and period-2 (lateral)
/// orbits at the desired period.
pub fn build_step_references(query: &PlannerQuery, config: &PlannerConfig, params: &ModelParams) -> Result<Vec<StepReference>> {
    let sag = hlip_period1(config.t_des, params.p_z_des, params.g, query.v_cmd[0])?;
    stance_sequence(query.stance_side, config.k_steps)
        .into_iter()
        .map(|side| {
            let gamma = side.step_sign();
            let lat = hlip_period2(config.t_des, params.p_z_des, params.g, query.v_cmd[1], config.l_y_offset, gamma)?;
            Ok(StepReference {
                x_des: hlip_to_alip(&sag, &lat, params),
                l_des: desired_step_lengths(query.v_cmd, config.t_des, gamma, config.l_y_offset),
                t_des: config.t_des,
                side,
            })
        })
        .collect()
}

/// Initial guess for the next solve. After a completed step the plan is
/// rotated by one step and the entry two steps from the end (same stance
/// side) is repeated; otherwise only the elapsed time advances.
pub fn warm_start_shift(prev: &S2SPlan, elapsed: f64, stepped: bool) -> S2SPlan {
    let mut next = prev.clone();
    next.status = PlanStatus::Guess;
    if stepped {
        let k = prev.len();
        let tail = k.saturating_sub(2);
        next.x_pre.remove(0);
        next.x_pre.push(prev.x_pre[tail]);
        next.l.remove(0);
        next.l.push(prev.l[tail]);
        next.t.remove(0);
        next.t.push(prev.t[tail]);
        next.tau.remove(0);
        next.tau.push(prev.tau[tail]);
        next.stance_sides.remove(0);
        next.stance_sides.push(prev.stance_sides[tail]);
        next.t_curr = elapsed;
    } else {
        next.t_curr = prev.t_curr + elapsed;
    }
    next
}

/// The assembled optimization problem for one query.
struct Nlp<'a> {
    params: &'a ModelParams,
    x0: Vector4<f64>,
    t_curr: f64,
    k: usize,
    z_des: DVector<f64>,
    w: DVector<f64>,
    lb: DVector<f64>,
    ub: DVector<f64>,
    a: Matrix4<f64>,
    b: Matrix4x2<f64>,
    bd: Matrix4x2<f64>,
}

impl<'a> Nlp<'a> {
    fn new(query: &PlannerQuery, config: &PlannerConfig, params: &'a ModelParams, refs: &[StepReference]) -> Result<Self> {
        let k = config.k_steps;
        let n = NV * k;
        let mut z_des = DVector::zeros(n);
        let mut w = DVector::zeros(n);
        let mut lb = DVector::zeros(n);
        let mut ub = DVector::zeros(n);
        let t0_lb = config.t_lb.max(query.t_curr + config.first_step_margin);
        if t0_lb > config.t_ub {
            return Err(Error::InfeasibleWindow { t_curr: query.t_curr, t_ub: config.t_ub });
        }
        for (i, r) in refs.iter().enumerate() {
            let o = NV * i;
            z_des.fixed_rows_mut::<4>(o + IX).copy_from(&r.x_des.to_vector());
            z_des[o + IL] = r.l_des.l_x;
            z_des[o + IL + 1] = r.l_des.l_y;
            z_des[o + IT] = r.t_des;
            for j in 0..4 {
                w[o + IX + j] = config.q_x[j];
                lb[o + IX + j] = config.x_lb[j];
                ub[o + IX + j] = config.x_ub[j];
            }
            w[o + IL] = config.r_l[0];
            w[o + IL + 1] = config.r_l[1];
            w[o + IT] = config.r_t;
            w[o + ITAU] = config.r_tau[0];
            w[o + ITAU + 1] = config.r_tau[1];
            let (ly_lb, ly_ub) = config.l_y_bounds(r.side.step_sign());
            lb[o + IL] = config.l_x_lb;
            ub[o + IL] = config.l_x_ub;
            lb[o + IL + 1] = ly_lb;
            ub[o + IL + 1] = ly_ub;
            lb[o + IT] = if i == 0 { t0_lb } else { config.t_lb };
            ub[o + IT] = config.t_ub;
            for j in 0..2 {
                lb[o + ITAU + j] = config.tau_lb[j];
                ub[o + ITAU + j] = config.tau_ub[j];
            }
        }
        let (a, b) = alip_system_matrices(params)?;
        Ok(Self { params, x0: query.x0.to_vector(), t_curr: query.t_curr, k, z_des, w, lb, ub, a, b, bd: reset_matrix() })
    }

    fn cost(&self, z: &DVector<f64>) -> f64 {
        (z - &self.z_des).component_mul(&(z - &self.z_des)).dot(&self.w)
    }

    fn cost_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        (z - &self.z_des).component_mul(&self.w) * 2.0
    }

    fn duration(&self, z: &DVector<f64>, i: usize) -> f64 {
        let t = z[NV * i + IT];
        if i == 0 {
            t - self.t_curr
        } else {
            t
        }
    }

    /// Start state of the flow for step `i`: the current state for the
    /// first step, the post-impact state of the previous step otherwise.
    fn start_state(&self, z: &DVector<f64>, i: usize) -> Vector4<f64> {
        if i == 0 {
            self.x0
        } else {
            let o = NV * (i - 1);
            z.fixed_rows::<4>(o + IX) + self.bd * z.fixed_rows::<2>(o + IL)
        }
    }

    fn constraints(&self, z: &DVector<f64>, with_jacobian: bool) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = NV * self.k;
        let mut c = DVector::zeros(4 * self.k);
        let mut jac = if with_jacobian { DMatrix::zeros(4 * self.k, n) } else { DMatrix::zeros(0, 0) };
        for i in 0..self.k {
            let o = NV * i;
            let tr = alip_transition(self.params, self.duration(z, i))?;
            let start = self.start_state(z, i);
            let tau = z.fixed_rows::<2>(o + ITAU).into_owned();
            let flow = tr.phi * start + tr.gamma * tau;
            c.fixed_rows_mut::<4>(4 * i).copy_from(&(z.fixed_rows::<4>(o + IX) - flow));
            if with_jacobian {
                let r = 4 * i;
                jac.view_mut((r, o + IX), (4, 4)).copy_from(&Matrix4::identity());
                let d_phi = self.a * tr.phi;
                let d_gamma = tr.phi * self.b;
                jac.view_mut((r, o + IT), (4, 1)).copy_from(&(-(d_phi * start + d_gamma * tau)));
                jac.view_mut((r, o + ITAU), (4, 2)).copy_from(&(-tr.gamma));
                if i > 0 {
                    let p = NV * (i - 1);
                    jac.view_mut((r, p + IX), (4, 4)).copy_from(&(-tr.phi));
                    jac.view_mut((r, p + IL), (4, 2)).copy_from(&(-(tr.phi * self.bd)));
                }
            }
        }
        Ok((c, jac))
    }

    /// Forward rollout of the pre-impact states from the controls in `z`.
    fn rollout(&self, z: &mut DVector<f64>) -> Result<()> {
        for i in 0..self.k {
            let o = NV * i;
            let tr = alip_transition(self.params, self.duration(z, i))?;
            let start = self.start_state(z, i);
            let tau = z.fixed_rows::<2>(o + ITAU).into_owned();
            let x = tr.phi * start + tr.gamma * tau;
            z.fixed_rows_mut::<4>(o + IX).copy_from(&x);
        }
        Ok(())
    }

    /// Adds `sum_j y_j * hess(c_j)` to `h`. Only pairs involving a step
    /// period have nonzero curvature.
    fn add_constraint_curvature(&self, z: &DVector<f64>, y: &DVector<f64>, h: &mut DMatrix<f64>) -> Result<()> {
        for i in 0..self.k {
            let o = NV * i;
            let yi = y.fixed_rows::<4>(4 * i).into_owned();
            if yi.amax() == 0.0 {
                continue;
            }
            let tr = alip_transition(self.params, self.duration(z, i))?;
            let start = self.start_state(z, i);
            let tau = z.fixed_rows::<2>(o + ITAU).into_owned();
            let a_phi = self.a * tr.phi;
            let it = o + IT;
            h[(it, it)] -= yi.dot(&(self.a * a_phi * start + a_phi * self.b * tau));
            let cross_tau = -(tr.phi * self.b).transpose() * yi;
            for j in 0..2 {
                h[(it, o + ITAU + j)] += cross_tau[j];
                h[(o + ITAU + j, it)] += cross_tau[j];
            }
            if i > 0 {
                let p = NV * (i - 1);
                let cross_x = -a_phi.transpose() * yi;
                let cross_l = -(a_phi * self.bd).transpose() * yi;
                for j in 0..4 {
                    h[(it, p + IX + j)] += cross_x[j];
                    h[(p + IX + j, it)] += cross_x[j];
                }
                for j in 0..2 {
                    h[(it, p + IL + j)] += cross_l[j];
                    h[(p + IL + j, it)] += cross_l[j];
                }
            }
        }
        Ok(())
    }

    fn clamp(&self, z: &mut DVector<f64>) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lb[i], self.ub[i]);
        }
    }
}

fn check_query(query: &PlannerQuery, config: &PlannerConfig) -> Result<()> {
    if !query.x0.is_finite() || query.x0.p_x.abs() > MAX_ALIP_POSITION || query.x0.p_y.abs() > MAX_ALIP_POSITION {
        return Err(Error::Domain("ALIP state is not finite or outside the sanity bound"));
    }
    if !(query.t_curr >= 0.0) {
        return Err(Error::Domain("time into the step must be non-negative"));
    }
    if query.t_curr >= config.t_ub {
        return Err(Error::InfeasibleWindow { t_curr: query.t_curr, t_ub: config.t_ub });
    }
    Ok(())
}

/// Smallest eigenvalue kept in the SQP Hessian.
const CURVATURE_FLOOR: f64 = 1e-6;

/// Projects a symmetric matrix onto the cone of matrices with eigenvalues
/// at least `floor`.
fn convexify(h: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = h.symmetric_eigen();
    if eig.eigenvalues.min() >= floor {
        let mut sym = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
        sym = (&sym + sym.transpose()) * 0.5;
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let sym = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (&sym + sym.transpose()) * 0.5
}

/// Initial guess: desired controls with dynamically consistent pre-impact
/// states.
fn cold_guess(nlp: &Nlp) -> Result<DVector<f64>> {
    let mut z = nlp.z_des.clone();
    nlp.clamp(&mut z);
    nlp.rollout(&mut z)?;
    Ok(z)
}

/// Solves the step-planning NLP by SQP with Gauss-Newton Hessian, exact
/// constraint Jacobians and an l1-merit backtracking line search.
pub fn solve_nmpc(query: &PlannerQuery, config: &PlannerConfig, params: &ModelParams, warm: Option<&S2SPlan>) -> Result<S2SPlan> {
    #[cfg(feature = "std")]
    let started = std::time::Instant::now();
    config.validate()?;
    params.validate()?;
    check_query(query, config)?;
    let refs = build_step_references(query, config, params)?;
    let nlp = Nlp::new(query, config, params, &refs)?;
    let sides: Vec<Side> = refs.iter().map(|r| r.side).collect();
    let n = NV * nlp.k;
    let m_eq = 4 * nlp.k;

    let mut z = match warm {
        Some(w) if w.len() == nlp.k && w.stance_sides == sides => {
            let mut z = w.to_vector();
            nlp.clamp(&mut z);
            z
        }
        _ => cold_guess(&nlp)?,
    };

    let mut cost_hess = DMatrix::zeros(n, n);
    for i in 0..n {
        cost_hess[(i, i)] = 2.0 * nlp.w[i];
    }
    let mut y_eq = DVector::zeros(m_eq);
    let mut y_qp: Option<DVector<f64>> = None;
    let mut a_qp = DMatrix::zeros(m_eq + n, n);
    a_qp.view_mut((m_eq, 0), (n, n)).copy_from(&DMatrix::identity(n, n));

    let mut mu = config.sqp.merit_penalty;
    let mut status = PlanStatus::MaxIter;
    let mut stats = PlannerStats::default();
    for iter in 1..=config.sqp.max_iter {
        stats.iterations = iter;
        let (c, jac) = nlp.constraints(&z, true)?;
        let grad = nlp.cost_gradient(&z);
        a_qp.view_mut((0, 0), (m_eq, n)).copy_from(&jac);
        let mut lower = DVector::zeros(m_eq + n);
        let mut upper = DVector::zeros(m_eq + n);
        lower.rows_mut(0, m_eq).copy_from(&(-&c));
        upper.rows_mut(0, m_eq).copy_from(&(-&c));
        lower.rows_mut(m_eq, n).copy_from(&(&nlp.lb - &z));
        upper.rows_mut(m_eq, n).copy_from(&(&nlp.ub - &z));
        // guard against round-off pushing a box row out of order
        for i in m_eq..m_eq + n {
            if lower[i] > upper[i] {
                lower[i] = upper[i];
            }
        }
        let hess = if config.sqp.exact_curvature && y_eq.amax() > 0.0 {
            let mut h = cost_hess.clone();
            nlp.add_constraint_curvature(&z, &y_eq, &mut h)?;
            convexify(h, CURVATURE_FLOOR)
        } else {
            cost_hess.clone()
        };
        let qp = QpProblem { p_mat: hess, q_vec: grad.clone(), a_mat: a_qp.clone(), lower, upper };
        let d0 = DVector::zeros(n);
        let sol = qp_solve(&qp, &config.qp, y_qp.as_ref().map(|y| (&d0, y)))?;
        stats.qp_iterations += sol.iterations;
        if sol.status == QpStatus::PrimalInfeasible {
            break;
        }
        let d = sol.z;
        let step_norm = d.amax();
        let viol = c.amax();
        stats.step_norm = step_norm;
        if step_norm <= config.sqp.tol && viol <= config.sqp.tol {
            status = PlanStatus::Converged;
            break;
        }
        y_eq.copy_from(&sol.y.rows(0, m_eq));
        y_qp = Some(sol.y.clone());
        mu = mu.max(1.1 * y_eq.amax());
        let merit = |zz: &DVector<f64>, cc: &DVector<f64>| nlp.cost(zz) + mu * cc.lp_norm(1);
        let phi0 = merit(&z, &c);
        let slope = grad.dot(&d) - mu * c.lp_norm(1);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let mut trial = &z + &d * alpha;
            nlp.clamp(&mut trial);
            let (ct, _) = nlp.constraints(&trial, false)?;
            if merit(&trial, &ct) <= phi0 + 1e-4 * alpha * slope.min(0.0) {
                z = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no merit decrease is available along d; the iterate is
            // stationary to working precision
            if viol <= config.sqp.tol.max(1e-9) {
                status = PlanStatus::Converged;
            }
            break;
        }
    }

    // Make the pre-impact states exactly consistent with the controls.
    nlp.rollout(&mut z)?;
    let mut plan = S2SPlan::from_vector(&z, sides, query.t_curr);
    plan.status = status;
    stats.objective = nlp.cost(&z);
    stats.dynamics_residual = plan.dynamics_residual(&query.x0, params)?;
    #[cfg(feature = "std")]
    {
        stats.wall_time_s = started.elapsed().as_secs_f64();
    }
    plan.stats = stats;
    Ok(plan)
}

/// Quadratic planner cost of `plan` against `refs`, evaluated with the
/// weights of `config`.
pub fn plan_cost(plan: &S2SPlan, refs: &[StepReference], config: &PlannerConfig) -> f64 {
    let mut cost = 0.0;
    for (k, r) in refs.iter().enumerate().take(plan.len()) {
        let dx = plan.x_pre[k].to_vector() - r.x_des.to_vector();
        for j in 0..4 {
            cost += config.q_x[j] * dx[j] * dx[j];
        }
        let dl = plan.l[k].to_vector() - r.l_des.to_vector();
        cost += config.r_l[0] * dl[0] * dl[0] + config.r_l[1] * dl[1] * dl[1];
        let dt = plan.t[k] - r.t_des;
        cost += config.r_t * dt * dt;
        cost += config.r_tau[0] * plan.tau[k].tau_y * plan.tau[k].tau_y + config.r_tau[1] * plan.tau[k].tau_x * plan.tau[k].tau_x;
    }
    cost
}

#[cfg(test)]
mod tests;
