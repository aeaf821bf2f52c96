//! Dual active-set QP method (Goldfarb-Idnani) for strictly convex
//! problems. Starts from the unconstrained minimizer and adds violated
//! constraints one at a time while keeping the multipliers dual feasible,
//! using a QR factorization of the active normals updated with Givens
//! rotations.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::sparse::CscMatrix;
use super::{QpProblem, QpSolution, QpStatus, QP_INFINITY};
use crate::{math, Error, Result};

/// One-sided constraint `sign * a_row' z >= b`.
#[derive(Debug, Clone, Copy)]
struct Constraint {
    row: usize,
    sign: f64,
    b: f64,
    equality: bool,
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = math::sqrt(a * a + b * b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_columns(j: &mut DMatrix<f64>, c0: usize, c1: usize, c: f64, s: f64) {
    let n = j.nrows();
    let data = j.as_mut_slice();
    let (lo, hi) = data.split_at_mut(c1 * n);
    let a = &mut lo[c0 * n..(c0 + 1) * n];
    let b = &mut hi[..n];
    for k in 0..n {
        let (x, y) = (a[k], b[k]);
        a[k] = c * x + s * y;
        b[k] = -s * x + c * y;
    }
}

struct Workspace {
    n: usize,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    active: Vec<usize>,
    mult: Vec<f64>,
}

impl Workspace {
    fn q(&self) -> usize {
        self.active.len()
    }

    /// Appends a constraint with normal image `d = J' n`, reducing `d` to
    /// its first `q + 1` entries.
    fn add(&mut self, mut d: DVector<f64>, index: usize, mult: f64) {
        let q = self.q();
        for i in (q + 1..self.n).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(d[i - 1], d[i]);
            d[i - 1] = h;
            d[i] = 0.0;
            rotate_columns(&mut self.j, i - 1, i, c, s);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(index);
        self.mult.push(mult);
    }

    fn drop(&mut self, pos: usize) {
        let q = self.q();
        self.active.remove(pos);
        self.mult.remove(pos);
        for col in pos..q - 1 {
            for i in 0..=col + 1 {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for jj in pos..q - 1 {
            let (c, s, h) = givens(self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            self.r[(jj, jj)] = h;
            self.r[(jj + 1, jj)] = 0.0;
            for k in jj + 1..q - 1 {
                let (a, b) = (self.r[(jj, k)], self.r[(jj + 1, k)]);
                self.r[(jj, k)] = c * a + s * b;
                self.r[(jj + 1, k)] = -s * a + c * b;
            }
            rotate_columns(&mut self.j, jj, jj + 1, c, s);
        }
    }

    /// `R^-1 d[..q]` by back substitution.
    fn dual_direction(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.q();
        let mut r = alloc::vec![0.0; q];
        for i in (0..q).rev() {
            let mut s = d[i];
            for k in i + 1..q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }
}

/// Solves the problem exactly (up to round-off) with the dual active-set
/// method. `P` must be positive definite. A previous dual vector, if given,
/// is used to add its active constraints first.
pub fn qp_solve_active_set(problem: &QpProblem, max_iter: usize, warm_y: Option<&DVector<f64>>) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.n();
    let m = problem.m();
    let chol = problem.p_mat.clone().cholesky().ok_or(Error::NotPositiveDefinite("active-set QP cost"))?;
    let l = chol.l();
    let mut j = DMatrix::identity(n, n);
    if !l.transpose().solve_upper_triangular_mut(&mut j) {
        return Err(Error::NotPositiveDefinite("active-set QP cost"));
    }
    let mut x = -chol.solve(&problem.q_vec);

    let mut cons = Vec::with_capacity(2 * m);
    for i in 0..m {
        let (lo, hi) = (problem.lower[i], problem.upper[i]);
        if lo == hi {
            cons.push(Constraint { row: i, sign: 1.0, b: lo, equality: true });
            continue;
        }
        if lo > -QP_INFINITY {
            cons.push(Constraint { row: i, sign: 1.0, b: lo, equality: false });
        }
        if hi < QP_INFINITY {
            cons.push(Constraint { row: i, sign: -1.0, b: -hi, equality: false });
        }
    }
    let mut preferred = alloc::vec![false; cons.len()];
    if let Some(y) = warm_y.filter(|y| y.len() == m) {
        for (k, c) in cons.iter().enumerate() {
            let yi = y[c.row];
            preferred[k] = c.equality || (c.sign > 0.0 && yi < 0.0) || (c.sign < 0.0 && yi > 0.0);
        }
    }

    let a_sp = CscMatrix::from_dense(&problem.a_mat);
    let mut ws = Workspace { n, j, r: DMatrix::zeros(n, n), active: Vec::new(), mult: Vec::new() };
    let mut is_active = alloc::vec![false; cons.len()];
    let scale = 1.0 + problem.lower.iter().chain(problem.upper.iter()).filter(|v| v.abs() < QP_INFINITY).fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut status = QpStatus::MaxIter;
    let mut iterations = 0;
    let mut ax = DVector::zeros(m);
    let mut normal = DVector::zeros(n);

    'outer: while iterations < max_iter {
        iterations += 1;
        a_sp.mul_to(&x, &mut ax);
        // equalities first, then preferred constraints, then the rest
        let mut pick: Option<(usize, f64, u8)> = None;
        for (k, c) in cons.iter().enumerate() {
            if is_active[k] {
                continue;
            }
            let mut s = c.sign * ax[c.row] - c.b;
            if c.equality {
                s = -s.abs();
            }
            if s >= -tol {
                continue;
            }
            let class = if c.equality {
                0
            } else if preferred[k] {
                1
            } else {
                2
            };
            let better = match pick {
                None => true,
                Some((_, ps, pc)) => class < pc || (class == pc && s < ps),
            };
            if better {
                pick = Some((k, s, class));
            }
        }
        let Some((p, _, _)) = pick else {
            status = QpStatus::Solved;
            break;
        };
        if cons[p].equality && cons[p].sign * ax[cons[p].row] - cons[p].b > 0.0 {
            cons[p].sign = -cons[p].sign;
            cons[p].b = -cons[p].b;
        }
        let cp = cons[p];
        for (k, v) in normal.iter_mut().enumerate() {
            *v = cp.sign * problem.a_mat[(cp.row, k)];
        }
        let mut u_new = 0.0;
        loop {
            let d = ws.j.tr_mul(&normal);
            let q = ws.q();
            let z = ws.j.columns(q, n - q) * d.rows(q, n - q);
            let r = ws.dual_direction(&d);
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (pos, &k) in ws.active.iter().enumerate() {
                if !cons[k].equality && r[pos] > 0.0 {
                    let ratio = ws.mult[pos] / r[pos];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(pos);
                    }
                }
            }
            let zn = z.dot(&normal);
            let s_p = normal.dot(&x) - cp.b;
            let t2 = if zn > 1e-14 * normal.norm_squared().max(1e-300) { -s_p / zn } else { f64::INFINITY };
            if t1.is_infinite() && t2.is_infinite() {
                status = QpStatus::PrimalInfeasible;
                break 'outer;
            }
            let t = t1.min(t2);
            for (pos, m) in ws.mult.iter_mut().enumerate() {
                *m -= t * r[pos];
            }
            u_new += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                ws.add(d, p, u_new);
                is_active[p] = true;
                break;
            }
            let pos = drop_at.expect("partial step has a blocking constraint");
            is_active[ws.active[pos]] = false;
            ws.drop(pos);
            iterations += 1;
            if iterations >= max_iter {
                break 'outer;
            }
        }
    }

    let mut y = DVector::zeros(m);
    for (pos, &k) in ws.active.iter().enumerate() {
        y[cons[k].row] -= cons[k].sign * ws.mult[pos];
    }
    let (primal_res, dual_res) = problem.kkt_residuals(&x, &y);
    Ok(QpSolution {
        objective: problem.objective(&x),
        z: x,
        y,
        status,
        iterations,
        primal_res,
        dual_res,
        polished: false,
    })
}
