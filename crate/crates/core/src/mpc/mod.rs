//! Linear MPC over the SRB or decomposed SRB model.
//!
//! The QP is condensed: states are eliminated through the linearized
//! dynamics and the decision vector holds, per node, the stance-foot wrench
//! (and for the decomposed model the torso torque and arm forces). The swing
//! foot wrench is identically zero and therefore not a decision variable.
//! Upper-body state bounds become rows of the prediction matrices.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::model::rotation::rot_z;
use crate::model::{
    dsrb_linearize, srb_linearize, DsrbInput, DsrbState, FootPositions, FootWrench, ModelParams, Side, DSRB_NU, DSRB_NX,
    SRB_NX,
};
use crate::qp::{qp_solve_active_set, QpMethod, QpProblem, QpSettings, QpSolver, QpStatus, QP_INFINITY};
use crate::refgen::SrbReferenceTrajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MpcVariant {
    Srb,
    Dsrb,
}

impl MpcVariant {
    pub fn nx(self) -> usize {
        match self {
            MpcVariant::Srb => SRB_NX,
            MpcVariant::Dsrb => DSRB_NX,
        }
    }

    /// Decision variables per node.
    pub fn nu(self) -> usize {
        match self {
            MpcVariant::Srb => 6,
            MpcVariant::Dsrb => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MpcConfig {
    pub variant: MpcVariant,
    pub n_nodes: usize,
    pub dt: f64,
    pub q_position: [f64; 3],
    pub q_orientation: [f64; 3],
    pub q_velocity: [f64; 3],
    pub q_angular_velocity: [f64; 3],
    pub q_gravity: f64,
    /// Torso yaw and arm positions.
    pub q_upper: [f64; 3],
    pub q_upper_rate: [f64; 3],
    pub r_force: f64,
    pub r_moment: f64,
    pub r_torso: f64,
    pub r_arm: f64,
    pub mu: f64,
    pub mu_z: f64,
    pub foot_half_length: f64,
    pub foot_half_width: f64,
    pub f_z_min: f64,
    pub f_z_max: f64,
    pub arm_force_max: f64,
    pub torso_torque_max: f64,
    pub arm_position_max: f64,
    pub torso_yaw_max: f64,
    pub qp_method: QpMethod,
    /// ADMM settings.
    pub qp: QpSettings,
    pub active_set_max_iter: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            variant: MpcVariant::Srb,
            n_nodes: 10,
            dt: 0.025,
            q_position: [100.0; 3],
            q_orientation: [150.0; 3],
            q_velocity: [10.0; 3],
            q_angular_velocity: [10.0; 3],
            q_gravity: 0.0,
            q_upper: [50.0; 3],
            q_upper_rate: [1.0; 3],
            r_force: 1e-6,
            r_moment: 1e-4,
            r_torso: 1e-3,
            r_arm: 1e-3,
            mu: 0.6,
            mu_z: 0.04,
            foot_half_length: 0.10,
            foot_half_width: 0.03,
            f_z_min: 10.0,
            f_z_max: 1000.0,
            arm_force_max: 50.0,
            torso_torque_max: 80.0,
            arm_position_max: 0.15,
            torso_yaw_max: 0.8,
            qp_method: QpMethod::ActiveSet,
            qp: QpSettings { eps_abs: 1e-4, eps_rel: 1e-4, max_iter: 1000, ..QpSettings::default() },
            active_set_max_iter: 500,
        }
    }
}

impl MpcConfig {
    pub fn with_variant(variant: MpcVariant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || !(self.dt > 0.0) {
            return Err(Error::param("n_nodes/dt", "horizon must be non-empty with a positive step"));
        }
        let scalars = [self.q_gravity, self.r_force, self.r_moment, self.r_torso, self.r_arm];
        let mut weights = self
            .q_position
            .iter()
            .chain(&self.q_orientation)
            .chain(&self.q_velocity)
            .chain(&self.q_angular_velocity)
            .chain(&self.q_upper)
            .chain(&self.q_upper_rate)
            .chain(scalars.iter());
        if weights.any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        if !(self.mu > 0.0 && self.mu_z >= 0.0) {
            return Err(Error::param("mu/mu_z", "friction coefficients must be positive"));
        }
        if !(0.0 <= self.f_z_min && self.f_z_min <= self.f_z_max) {
            return Err(Error::param("f_z_min/f_z_max", "must be ordered and non-negative"));
        }
        if !(self.foot_half_length >= 0.0 && self.foot_half_width >= 0.0) {
            return Err(Error::param("foot size", "must be non-negative"));
        }
        let bounds = [self.arm_force_max, self.torso_torque_max, self.arm_position_max, self.torso_yaw_max];
        if bounds.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::param("upper-body bounds", "must be non-negative"));
        }
        Ok(())
    }

    fn state_weights(&self) -> DVector<f64> {
        let nx = self.variant.nx();
        let mut q = DVector::zeros(nx);
        for i in 0..3 {
            q[i] = self.q_position[i];
            q[3 + i] = self.q_orientation[i];
            q[6 + i] = self.q_velocity[i];
            q[9 + i] = self.q_angular_velocity[i];
        }
        q[12] = self.q_gravity;
        if nx == DSRB_NX {
            for i in 0..3 {
                q[13 + i] = self.q_upper[i];
                q[16 + i] = self.q_upper_rate[i];
            }
        }
        q
    }

    fn input_weights(&self) -> DVector<f64> {
        let nu = self.variant.nu();
        let mut r = DVector::zeros(nu);
        for i in 0..3 {
            r[i] = self.r_force;
            r[3 + i] = self.r_moment;
        }
        if nu == 9 {
            r[6] = self.r_torso;
            r[7] = self.r_arm;
            r[8] = self.r_arm;
        }
        r
    }
}

/// Condensed QP and the prediction data needed to recover states.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub qp: QpProblem,
    /// Free response of the predicted states `x_1..x_N` (stacked).
    pub free_response: DVector<f64>,
    /// Input-to-state prediction matrix.
    pub prediction: DMatrix<f64>,
    pub contact: Vec<Side>,
    pub variant: MpcVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub u0: DsrbInput,
    pub inputs: Vec<DsrbInput>,
    /// Predicted states `x_1..x_N`.
    pub predicted: Vec<DsrbState>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
    /// Set when the QP did not reach its tolerances.
    pub degraded: bool,
    z: DVector<f64>,
    y: DVector<f64>,
}

impl MpcSolution {
    /// Primal and dual QP iterates, usable as a warm start.
    pub fn qp_iterates(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.z, &self.y)
    }
}

fn reference_vector(refs: &SrbReferenceTrajectory, n: usize, nx: usize) -> DVector<f64> {
    let mut r = DVector::zeros(nx);
    r.rows_mut(0, SRB_NX).copy_from(&refs.x_ref[n].to_vector());
    r
}

/// Builds the condensed MPC QP. Node `n` of `refs` is the reference at
/// `n * dt` from now; `refs` must hold at least `n_nodes + 1` nodes.
pub fn build_mpc_qp(x0: &DsrbState, refs: &SrbReferenceTrajectory, config: &MpcConfig, params: &ModelParams) -> Result<MpcQp> {
    config.validate()?;
    let n_nodes = config.n_nodes;
    if refs.len() < n_nodes + 1 || refs.schedule.len() < n_nodes + 1 || refs.p_stf_ref.len() < n_nodes + 1 {
        return Err(Error::Dimension { what: "reference nodes", expected: n_nodes + 1, got: refs.len().min(refs.schedule.len()) });
    }
    let variant = config.variant;
    let nx = variant.nx();
    let nu = variant.nu();
    let nv = nu * n_nodes;

    let x0_vec = match variant {
        MpcVariant::Srb => DVector::from_column_slice(x0.srb.to_vector().as_slice()),
        MpcVariant::Dsrb => DVector::from_column_slice(x0.to_vector().as_slice()),
    };

    // prediction: x_{n+1} = F[n] + G[n] U
    let mut free = DVector::zeros(nx * n_nodes);
    let mut pred = DMatrix::zeros(nx * n_nodes, nv);
    let mut prev_f = x0_vec.clone();
    let mut contact = Vec::with_capacity(n_nodes);
    for n in 0..n_nodes {
        let side = refs.schedule.contact[n];
        contact.push(side);
        let stance = refs.p_stf_ref[n];
        let feet = FootPositions::both_at(stance);
        let lin_point = if n == 0 { x0.srb } else { refs.x_ref[n] };
        let dt = refs.schedule.dt_seq.get(n).copied().unwrap_or(config.dt);
        let (a, b_full, c) = match variant {
            MpcVariant::Srb => {
                let l = srb_linearize(&lin_point, &feet, params, dt)?;
                (
                    DMatrix::from_column_slice(nx, nx, l.a.as_slice()),
                    DMatrix::from_column_slice(nx, 12, l.b.as_slice()),
                    DVector::from_column_slice(l.c.as_slice()),
                )
            }
            MpcVariant::Dsrb => {
                let l = dsrb_linearize(&lin_point, &feet, params, dt)?;
                (
                    DMatrix::from_column_slice(nx, nx, l.a.as_slice()),
                    DMatrix::from_column_slice(nx, DSRB_NU, l.b.as_slice()),
                    DVector::from_column_slice(l.c.as_slice()),
                )
            }
        };
        // reduced input matrix: stance wrench columns and upper-body inputs
        let mut b = DMatrix::zeros(nx, nu);
        let off = 6 * side.index();
        b.columns_mut(0, 6).copy_from(&b_full.columns(off, 6));
        if nu == 9 {
            b.columns_mut(6, 3).copy_from(&b_full.columns(12, 3));
        }
        let f = &a * &prev_f + &c;
        free.rows_mut(nx * n, nx).copy_from(&f);
        if n > 0 {
            let prev_rows = pred.view((nx * (n - 1), 0), (nx, nu * n)).into_owned();
            pred.view_mut((nx * n, 0), (nx, nu * n)).copy_from(&(&a * prev_rows));
        }
        pred.view_mut((nx * n, nu * n), (nx, nu)).copy_from(&b);
        prev_f = f;
    }

    // cost
    let qw = config.state_weights();
    let rw = config.input_weights();
    let mut hess = DMatrix::zeros(nv, nv);
    let mut grad = DVector::zeros(nv);
    for n in 0..n_nodes {
        let cols = nu * (n + 1);
        let g = pred.view((nx * n, 0), (nx, cols));
        let mut qg = g.into_owned();
        for (i, mut row) in qg.row_iter_mut().enumerate() {
            row *= qw[i];
        }
        let err = free.rows(nx * n, nx) - reference_vector(refs, n + 1, nx);
        let mut h_block = hess.view_mut((0, 0), (cols, cols));
        h_block.gemm_tr(2.0, &g, &qg, 1.0);
        let mut g_part = grad.rows_mut(0, cols);
        g_part.gemv_tr(2.0, &qg, &err, 1.0);
    }
    // input effort is weighted by interval length so that shortened
    // intervals near an impact are not pushed towards zero input
    for n in 0..n_nodes {
        let scale = refs.schedule.dt_seq.get(n).map_or(1.0, |dt| dt / config.dt);
        for i in 0..nu {
            hess[(nu * n + i, nu * n + i)] += 2.0 * rw[i] * scale;
        }
    }

    // constraints
    let rows_per_node = if nu == 9 { 14 } else { 11 };
    let state_rows = if nu == 9 { 3 * n_nodes } else { 0 };
    let m = rows_per_node * n_nodes + state_rows;
    let mut a_mat = DMatrix::zeros(m, nv);
    let mut lower = DVector::from_element(m, -QP_INFINITY);
    let mut upper = DVector::zeros(m);
    for n in 0..n_nodes {
        let r0 = rows_per_node * n;
        let c0 = nu * n;
        let rot = rot_z(refs.psi_stf_ref[n]);
        // foot-frame components of world force/moment: rot^T * v
        let ex: Vector3<f64> = rot.column(0).into();
        let ey: Vector3<f64> = rot.column(1).into();
        let mut row = |r: usize, f_coef: Vector3<f64>, m_coef: Vector3<f64>, lo: f64, hi: f64| {
            for j in 0..3 {
                a_mat[(r0 + r, c0 + j)] = f_coef[j];
                a_mat[(r0 + r, c0 + 3 + j)] = m_coef[j];
            }
            lower[r0 + r] = lo;
            upper[r0 + r] = hi;
        };
        let ez = Vector3::z();
        let zero = Vector3::zeros();
        row(0, ez, zero, config.f_z_min, config.f_z_max);
        row(1, ex - ez * config.mu, zero, -QP_INFINITY, 0.0);
        row(2, -ex - ez * config.mu, zero, -QP_INFINITY, 0.0);
        row(3, ey - ez * config.mu, zero, -QP_INFINITY, 0.0);
        row(4, -ey - ez * config.mu, zero, -QP_INFINITY, 0.0);
        row(5, -ez * config.foot_half_length, ey, -QP_INFINITY, 0.0);
        row(6, -ez * config.foot_half_length, -ey, -QP_INFINITY, 0.0);
        row(7, -ez * config.foot_half_width, ex, -QP_INFINITY, 0.0);
        row(8, -ez * config.foot_half_width, -ex, -QP_INFINITY, 0.0);
        row(9, -ez * config.mu_z, ez, -QP_INFINITY, 0.0);
        row(10, -ez * config.mu_z, -ez, -QP_INFINITY, 0.0);
        if nu == 9 {
            let bounds = [config.torso_torque_max, config.arm_force_max, config.arm_force_max];
            for (j, b) in bounds.iter().enumerate() {
                a_mat[(r0 + 11 + j, c0 + 6 + j)] = 1.0;
                lower[r0 + 11 + j] = -b;
                upper[r0 + 11 + j] = *b;
            }
        }
    }
    if nu == 9 {
        let base = rows_per_node * n_nodes;
        let limits = [config.torso_yaw_max, config.arm_position_max, config.arm_position_max];
        for n in 0..n_nodes {
            for (j, lim) in limits.iter().enumerate() {
                let r = base + 3 * n + j;
                let s = nx * n + 13 + j;
                a_mat.row_mut(r).copy_from(&pred.row(s));
                lower[r] = -lim - free[s];
                upper[r] = lim - free[s];
            }
        }
    }

    let qp = QpProblem { p_mat: hess, q_vec: grad, a_mat, lower, upper };
    Ok(MpcQp { qp, free_response: free, prediction: pred, contact, variant })
}

fn expand_input(z: &DVector<f64>, n: usize, side: Side, variant: MpcVariant) -> DsrbInput {
    let nu = variant.nu();
    let o = nu * n;
    let w = FootWrench {
        force: Vector3::new(z[o], z[o + 1], z[o + 2]),
        moment: Vector3::new(z[o + 3], z[o + 4], z[o + 5]),
    };
    let mut u = DsrbInput::default();
    match side {
        Side::Left => u.left = w,
        Side::Right => u.right = w,
    }
    if nu == 9 {
        u.tau_tr = z[o + 6];
        u.f_la_x = z[o + 7];
        u.f_ra_x = z[o + 8];
    }
    u
}

/// Solves the MPC and returns the first input together with the predicted
/// trajectory. A previous solution is used as a warm start when its size
/// matches.
pub fn solve_mpc(
    x0: &DsrbState,
    refs: &SrbReferenceTrajectory,
    config: &MpcConfig,
    params: &ModelParams,
    warm: Option<&MpcSolution>,
) -> Result<MpcSolution> {
    let mqp = build_mpc_qp(x0, refs, config, params)?;
    let warm = warm.filter(|w| w.z.len() == mqp.qp.n() && w.y.len() == mqp.qp.m());
    let sol = match config.qp_method {
        QpMethod::Admm => {
            let mut solver = QpSolver::new(mqp.qp.clone(), config.qp)?;
            if let Some(w) = warm {
                solver.warm_start(&w.z, &w.y)?;
            }
            solver.solve()
        }
        QpMethod::ActiveSet => qp_solve_active_set(&mqp.qp, config.active_set_max_iter, warm.map(|w| &w.y))?,
    };
    let nx = mqp.variant.nx();
    let states = &mqp.free_response + &mqp.prediction * &sol.z;
    let predicted = (0..config.n_nodes)
        .map(|n| {
            let mut v = nalgebra::SVector::<f64, DSRB_NX>::zeros();
            v.rows_mut(0, nx).copy_from(&states.rows(nx * n, nx));
            DsrbState::from_vector(&v)
        })
        .collect();
    let inputs: Vec<DsrbInput> = (0..config.n_nodes).map(|n| expand_input(&sol.z, n, mqp.contact[n], mqp.variant)).collect();
    Ok(MpcSolution {
        u0: inputs[0],
        inputs,
        predicted,
        degraded: sol.status != QpStatus::Solved,
        status: sol.status,
        iterations: sol.iterations,
        objective: sol.objective,
        z: sol.z,
        y: sol.y,
    })
}

/// Plant input from an MPC solution; the SRB variant leaves the upper-body
/// channels at zero.
pub fn wrench_to_plant_input(sol: &MpcSolution, variant: MpcVariant) -> DsrbInput {
    let mut u = sol.u0;
    if variant == MpcVariant::Srb {
        u.tau_tr = 0.0;
        u.f_la_x = 0.0;
        u.f_ra_x = 0.0;
    }
    u
}

#[cfg(test)]
mod tests;
