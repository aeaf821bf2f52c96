//! Dense convex QP solver based on the ADMM operator-splitting scheme.
//!
//! Solves `min 1/2 z'Pz + q'z  s.t.  l <= Az <= u` with Ruiz equilibration,
//! per-row step sizes (stiffer on equality rows), adaptive `rho`, primal
//! infeasibility detection and an active-set polishing step.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{math, Error, Result};

mod active_set;
mod sparse;

pub use active_set::qp_solve_active_set;
use sparse::CscMatrix;

/// Bounds at or beyond this magnitude are treated as infinite.
pub const QP_INFINITY: f64 = 1e20;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const SCALING_MIN: f64 = 1e-4;
const SCALING_MAX: f64 = 1e4;

/// Which algorithm solves a QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum QpMethod {
    /// Operator splitting, see [`QpSolver`].
    #[default]
    Admm,
    /// Dual active set, see [`qp_solve_active_set`]; needs `P` positive
    /// definite.
    ActiveSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p_mat: DMatrix<f64>,
    pub q_vec: DVector<f64>,
    pub a_mat: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    /// Validates dimensions, symmetry and bound ordering.
    pub fn new(
        p_mat: DMatrix<f64>,
        q_vec: DVector<f64>,
        a_mat: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let qp = Self { p_mat, q_vec, a_mat, lower, upper };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n(&self) -> usize {
        self.q_vec.len()
    }

    pub fn m(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let m = self.m();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { what, expected, got })
            }
        };
        dim("cost matrix rows", n, self.p_mat.nrows())?;
        dim("cost matrix columns", n, self.p_mat.ncols())?;
        dim("constraint matrix columns", n, self.a_mat.ncols())?;
        dim("constraint matrix rows", m, self.a_mat.nrows())?;
        dim("upper bound length", m, self.upper.len())?;
        if !self.q_vec.iter().all(|v| v.is_finite()) {
            return Err(Error::param("q_vec", "must be finite"));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.p_mat[(i, j)], self.p_mat[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::param("p_mat", "must be symmetric"));
                }
            }
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::param("lower/upper", "bounds must satisfy lower <= upper"));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p_mat * z)) + self.q_vec.dot(z)
    }

    /// `(|Az - clamp(Az)|_inf, |Pz + q + A'y|_inf)`.
    pub fn kkt_residuals(&self, z: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
        let az = &self.a_mat * z;
        let prim = az
            .iter()
            .enumerate()
            .map(|(i, v)| (v - v.clamp(self.lower[i], self.upper[i])).abs())
            .fold(0.0, f64::max);
        let dual = (&self.p_mat * z + &self.q_vec + self.a_mat.tr_mul(y)).amax();
        (prim, dual)
    }
}

/// Returns a copy of `problem` with new linear cost and bounds.
pub fn qp_update_vectors(
    problem: &QpProblem,
    new_q: &DVector<f64>,
    new_lower: &DVector<f64>,
    new_upper: &DVector<f64>,
) -> Result<QpProblem> {
    check_vector_dims(problem, new_q, new_lower, new_upper)?;
    let mut out = problem.clone();
    out.q_vec.copy_from(new_q);
    out.lower.copy_from(new_lower);
    out.upper.copy_from(new_upper);
    out.validate()?;
    Ok(out)
}

fn check_vector_dims(problem: &QpProblem, q: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    for (what, expected, got) in [
        ("q_vec length", problem.n(), q.len()),
        ("lower bound length", problem.m(), l.len()),
        ("upper bound length", problem.m(), u.len()),
    ] {
        if expected != got {
            return Err(Error::Dimension { what, expected, got });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub max_iter: usize,
    pub adaptive_rho: bool,
    /// Iterations between `rho` adaptations.
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-6,
            max_iter: 4000,
            adaptive_rho: true,
            adaptive_rho_interval: 25,
            scaling_iters: 10,
            polish: true,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return Err(Error::param("rho/sigma", "must be strictly positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::param("alpha", "must lie in (0, 2)"));
        }
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) || self.eps_abs + self.eps_rel == 0.0 {
            return Err(Error::param("eps_abs/eps_rel", "must be non-negative and not both zero"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub objective: f64,
    pub polished: bool,
}

/// Solves `problem` from scratch, optionally warm started from a primal and
/// dual guess.
pub fn qp_solve(
    problem: &QpProblem,
    settings: &QpSettings,
    warm: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<QpSolution> {
    let mut solver = QpSolver::new(problem.clone(), *settings)?;
    if let Some((z, y)) = warm {
        solver.warm_start(z, y)?;
    }
    Ok(solver.solve())
}

/// Solver workspace holding the scaled problem and the factorized linear
/// system, reusable across solves that only change `q`, `l` and `u`.
#[derive(Debug, Clone)]
pub struct QpSolver {
    settings: QpSettings,
    problem: QpProblem,
    // scaled data
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    a_sp: CscMatrix,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
    rho: f64,
    rho_vec: DVector<f64>,
    factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    // iterates in scaled space
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

impl QpSolver {
    pub fn new(problem: QpProblem, settings: QpSettings) -> Result<Self> {
        problem.validate()?;
        settings.validate()?;
        let n = problem.n();
        let m = problem.m();
        let mut s = Self {
            settings,
            p: problem.p_mat.clone(),
            q: problem.q_vec.clone(),
            a: problem.a_mat.clone(),
            a_sp: CscMatrix::from_dense(&problem.a_mat),
            l: problem.lower.clone(),
            u: problem.upper.clone(),
            d: DVector::from_element(n, 1.0),
            e: DVector::from_element(m, 1.0),
            c: 1.0,
            rho: settings.rho,
            rho_vec: DVector::zeros(m),
            factor: None,
            x: DVector::zeros(n),
            z: DVector::zeros(m),
            y: DVector::zeros(m),
            problem,
        };
        s.scale();
        s.a_sp = CscMatrix::from_dense(&s.a);
        s.scale_vectors();
        s.set_rho_vec();
        s.factorize()?;
        Ok(s)
    }

    pub fn problem(&self) -> &QpProblem {
        &self.problem
    }

    /// Replaces `q`, `l` and `u` keeping the scaling and factorization.
    pub fn update_vectors(&mut self, q: &DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) -> Result<()> {
        let updated = qp_update_vectors(&self.problem, q, lower, upper)?;
        let rows_changed = (0..self.problem.m()).any(|i| {
            (self.problem.lower[i] == self.problem.upper[i]) != (updated.lower[i] == updated.upper[i])
                || is_free(self.problem.lower[i], self.problem.upper[i]) != is_free(updated.lower[i], updated.upper[i])
        });
        self.problem = updated;
        self.scale_vectors();
        if rows_changed {
            self.set_rho_vec();
            self.factorize()?;
        }
        Ok(())
    }

    /// Sets the iterates from an unscaled primal/dual pair.
    pub fn warm_start(&mut self, z: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if z.len() != self.problem.n() {
            return Err(Error::Dimension { what: "warm-start primal length", expected: self.problem.n(), got: z.len() });
        }
        if y.len() != self.problem.m() {
            return Err(Error::Dimension { what: "warm-start dual length", expected: self.problem.m(), got: y.len() });
        }
        self.x = z.component_div(&self.d);
        self.z = self.a_sp.mul(&self.x);
        self.y = y.component_div(&self.e) * self.c;
        Ok(())
    }

    fn scale(&mut self) {
        let n = self.p.nrows();
        let m = self.a.nrows();
        let mut dt = alloc::vec![1.0f64; n];
        let mut et = alloc::vec![1.0f64; m];
        for _ in 0..self.settings.scaling_iters {
            // column-major storage: column j occupies [j*rows, (j+1)*rows)
            let (p, a) = (self.p.as_slice(), self.a.as_slice());
            et.fill(0.0);
            for j in 0..n {
                let mut norm = p[j * n..(j + 1) * n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                for (i, v) in a[j * m..(j + 1) * m].iter().enumerate() {
                    let av = v.abs();
                    norm = norm.max(av);
                    et[i] = et[i].max(av);
                }
                dt[j] = 1.0 / math::sqrt(limit_scaling(norm));
            }
            for v in et.iter_mut() {
                *v = 1.0 / math::sqrt(limit_scaling(*v));
            }
            let (p, a) = (self.p.as_mut_slice(), self.a.as_mut_slice());
            for j in 0..n {
                for (i, v) in p[j * n..(j + 1) * n].iter_mut().enumerate() {
                    *v *= dt[i] * dt[j];
                }
                for (i, v) in a[j * m..(j + 1) * m].iter_mut().enumerate() {
                    *v *= et[i] * dt[j];
                }
            }
            for j in 0..n {
                self.d[j] *= dt[j];
            }
            for i in 0..m {
                self.e[i] *= et[i];
            }
            // cost scaling
            let p = self.p.as_slice();
            let mean_col = if n > 0 {
                (0..n).map(|j| p[j * n..(j + 1) * n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()))).sum::<f64>() / n as f64
            } else {
                1.0
            };
            let q_norm = self.problem.q_vec.component_mul(&self.d).amax() * self.c;
            let gamma = 1.0 / limit_scaling(mean_col.max(q_norm));
            self.p *= gamma;
            self.c *= gamma;
        }
    }

    fn scale_vectors(&mut self) {
        self.q = self.problem.q_vec.component_mul(&self.d) * self.c;
        for i in 0..self.problem.m() {
            self.l[i] = scale_bound(self.problem.lower[i], self.e[i]);
            self.u[i] = scale_bound(self.problem.upper[i], self.e[i]);
        }
    }

    fn set_rho_vec(&mut self) {
        for i in 0..self.problem.m() {
            let (l, u) = (self.problem.lower[i], self.problem.upper[i]);
            self.rho_vec[i] = if is_free(l, u) {
                RHO_MIN
            } else if l == u {
                RHO_EQ_SCALE * self.rho
            } else {
                self.rho
            };
        }
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.p.nrows();
        let mut k = self.p.clone();
        for i in 0..n {
            k[(i, i)] += self.settings.sigma;
        }
        self.a_sp.add_weighted_gram(&self.rho_vec, &mut k);
        self.factor = Some(k.cholesky().ok_or(Error::NotPositiveDefinite("QP linear system"))?);
        Ok(())
    }

    fn unscaled(&self) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let x = self.x.component_mul(&self.d);
        let z = self.z.component_div(&self.e);
        let y = self.y.component_mul(&self.e) / self.c;
        (x, z, y)
    }

    /// Returns primal/dual residuals and their tolerances in unscaled units.
    fn residuals(&self) -> (f64, f64, f64, f64, f64, f64) {
        let m = self.problem.m();
        let ax = self.a_sp.mul(&self.x).component_div(&self.e);
        let z = self.z.component_div(&self.e);
        let px = (&self.p * &self.x).component_div(&self.d) / self.c;
        let aty = self.a_sp.tr_mul(&self.y).component_div(&self.d) / self.c;
        let q = &self.problem.q_vec;
        let r_prim = if m > 0 { (&ax - &z).amax() } else { 0.0 };
        let r_dual = (&px + q + &aty).amax();
        let prim_scale = if m > 0 { ax.amax().max(z.amax()) } else { 0.0 };
        let dual_scale = px.amax().max(aty.amax()).max(q.amax());
        let eps_p = self.settings.eps_abs + self.settings.eps_rel * prim_scale;
        let eps_d = self.settings.eps_abs + self.settings.eps_rel * dual_scale;
        (r_prim, r_dual, eps_p, eps_d, prim_scale, dual_scale)
    }

    fn primal_infeasible(&self, dy: &DVector<f64>) -> bool {
        let norm = dy.amax();
        if norm < 1e-30 {
            return false;
        }
        let eps = self.settings.eps_prim_inf * norm;
        let mut support = 0.0;
        for i in 0..dy.len() {
            let v = dy[i];
            if v > 0.0 {
                if self.u[i] >= QP_INFINITY {
                    if v > eps {
                        return false;
                    }
                    continue;
                }
                support += self.u[i] * v;
            } else if v < 0.0 {
                if self.l[i] <= -QP_INFINITY {
                    if -v > eps {
                        return false;
                    }
                    continue;
                }
                support += self.l[i] * v;
            }
        }
        // certificate in unscaled space: |D A' dy| small
        let atdy = self.a_sp.tr_mul(dy).component_div(&self.d);
        let unscaled_norm = dy.component_mul(&self.e).amax();
        atdy.amax() <= self.settings.eps_prim_inf * unscaled_norm && support < -eps
    }

    pub fn solve(&mut self) -> QpSolution {
        let n = self.problem.n();
        let m = self.problem.m();
        let st = self.settings;
        let mut status = QpStatus::MaxIter;
        let mut iterations = 0;
        let mut rhs = DVector::zeros(n);
        let mut z_tilde = DVector::zeros(m);
        for k in 1..=st.max_iter {
            iterations = k;
            // x-update via the reduced KKT system
            rhs.copy_from(&(&self.x * st.sigma - &self.q));
            if m > 0 {
                let w = self.rho_vec.component_mul(&self.z) - &self.y;
                rhs += self.a_sp.tr_mul(&w);
            }
            let x_tilde = self.factor.as_ref().expect("factorized").solve(&rhs);
            self.a_sp.mul_to(&x_tilde, &mut z_tilde);
            self.x = &x_tilde * st.alpha + &self.x * (1.0 - st.alpha);
            let z_relaxed = &z_tilde * st.alpha + &self.z * (1.0 - st.alpha);
            let y_prev = self.y.clone();
            for i in 0..m {
                let v = z_relaxed[i] + self.y[i] / self.rho_vec[i];
                let zi = v.clamp(self.l[i], self.u[i]);
                self.y[i] += self.rho_vec[i] * (z_relaxed[i] - zi);
                self.z[i] = zi;
            }

            let (r_prim, r_dual, eps_p, eps_d, prim_scale, dual_scale) = self.residuals();
            if r_prim <= eps_p && r_dual <= eps_d {
                status = QpStatus::Solved;
                break;
            }
            if m > 0 && k % 5 == 0 {
                let dy = &self.y - &y_prev;
                if self.primal_infeasible(&dy) {
                    status = QpStatus::PrimalInfeasible;
                    break;
                }
            }
            if st.adaptive_rho && m > 0 && k % st.adaptive_rho_interval == 0 {
                let num = r_prim / prim_scale.max(1e-30);
                let den = r_dual / dual_scale.max(1e-30);
                let ratio = math::sqrt(num / den.max(1e-30));
                let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                    self.rho = new_rho;
                    self.set_rho_vec();
                    if self.factorize().is_err() {
                        break;
                    }
                }
            }
        }

        let (x, _, y) = self.unscaled();
        let (r_prim, r_dual, ..) = self.residuals();
        let mut sol = QpSolution {
            objective: self.problem.objective(&x),
            z: x,
            y,
            status,
            iterations,
            primal_res: r_prim,
            dual_res: r_dual,
            polished: false,
        };
        if st.polish && status != QpStatus::PrimalInfeasible {
            self.polish(&mut sol);
        }
        sol
    }

    /// Re-solves the equality-constrained problem on the active set guessed
    /// by ADMM and keeps the result when its KKT residuals improve.
    fn polish(&mut self, sol: &mut QpSolution) {
        let pr = &self.problem;
        let n = pr.n();
        let (_, z_unscaled, _) = self.unscaled();
        let mut active: Vec<(usize, f64)> = Vec::new();
        for i in 0..pr.m() {
            let (l, u) = (pr.lower[i], pr.upper[i]);
            let (z, y) = (z_unscaled[i], sol.y[i]);
            if l == u || (l > -QP_INFINITY && z - l < -y) {
                active.push((i, l));
            } else if u < QP_INFINITY && u - z < y {
                active.push((i, u));
            }
        }
        let na = active.len();
        if na > n {
            return;
        }
        let dim = n + na;
        let delta = 1e-9;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&pr.p_mat);
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            rhs[i] = -pr.q_vec[i];
        }
        for (r, &(row, b)) in active.iter().enumerate() {
            for j in 0..n {
                let v = pr.a_mat[(row, j)];
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = v;
            }
            rhs[n + r] = b;
        }
        let mut reg = kkt.clone();
        for i in 0..n {
            reg[(i, i)] += delta;
        }
        for i in n..dim {
            reg[(i, i)] -= delta;
        }
        let Some(lu) = Some(reg.lu()) else { return };
        let Some(mut s) = lu.solve(&rhs) else { return };
        for _ in 0..5 {
            let r = &rhs - &kkt * &s;
            match lu.solve(&r) {
                Some(ds) => s += ds,
                None => return,
            }
        }
        if !s.iter().all(|v| v.is_finite()) {
            return;
        }
        let z_pol = s.rows(0, n).into_owned();
        let mut y_pol = DVector::zeros(pr.m());
        for (r, &(row, _)) in active.iter().enumerate() {
            y_pol[row] = s[n + r];
        }
        // sign consistency of the multipliers
        for &(row, b) in &active {
            let (l, u) = (pr.lower[row], pr.upper[row]);
            if l != u && ((b == l && y_pol[row] > 1e-9) || (b == u && y_pol[row] < -1e-9)) {
                return;
            }
        }
        let (p_res, d_res) = pr.kkt_residuals(&z_pol, &y_pol);
        let tol = self.settings.eps_abs.max(1e-12);
        let improves = p_res <= sol.primal_res.max(tol) && d_res <= sol.dual_res.max(tol);
        if improves {
            sol.objective = pr.objective(&z_pol);
            sol.z = z_pol;
            sol.y = y_pol;
            sol.primal_res = p_res;
            sol.dual_res = d_res;
            sol.polished = true;
            let (_, _, eps_p, eps_d, ..) = self.residuals();
            if sol.status == QpStatus::MaxIter && p_res <= eps_p && d_res <= eps_d {
                sol.status = QpStatus::Solved;
            }
            // keep the workspace consistent with the polished point for
            // later warm starts
            self.x = sol.z.component_div(&self.d);
            self.z = self.a_sp.mul(&self.x);
            self.y = sol.y.component_div(&self.e) * self.c;
        }
    }
}

fn is_free(l: f64, u: f64) -> bool {
    l <= -QP_INFINITY && u >= QP_INFINITY
}

fn scale_bound(v: f64, e: f64) -> f64 {
    if v >= QP_INFINITY {
        f64::INFINITY
    } else if v <= -QP_INFINITY {
        f64::NEG_INFINITY
    } else {
        v * e
    }
}

fn limit_scaling(v: f64) -> f64 {
    if v < SCALING_MIN {
        1.0
    } else {
        v.min(SCALING_MAX)
    }
}

#[cfg(test)]
mod tests;
