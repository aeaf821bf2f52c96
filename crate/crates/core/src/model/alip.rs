use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector3, Vector4};

use super::ModelParams;
use crate::{math, Error, Result};

/// ALIP state about the stance foot, ordered `(p_x, L_y, p_y, L_x)` when
/// converted to a vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlipState {
    pub p_x: f64,
    pub l_y: f64,
    pub p_y: f64,
    pub l_x: f64,
}

impl AlipState {
    pub const fn new(p_x: f64, l_y: f64, p_y: f64, l_x: f64) -> Self {
        Self { p_x, l_y, p_y, l_x }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.p_x, self.l_y, self.p_y, self.l_x)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Stance ankle torques: `tau_y` acts on `L_y`, `tau_x` on `L_x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnkleTorque {
    pub tau_y: f64,
    pub tau_x: f64,
}

impl AnkleTorque {
    pub const ZERO: AnkleTorque = AnkleTorque { tau_y: 0.0, tau_x: 0.0 };

    pub const fn new(tau_y: f64, tau_x: f64) -> Self {
        Self { tau_y, tau_x }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.tau_y, self.tau_x)
    }
}

/// Landing displacement of the swing foot relative to the stance foot, in
/// the stance yaw frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepLength {
    pub l_x: f64,
    pub l_y: f64,
}

impl StepLength {
    pub const fn new(l_x: f64, l_y: f64) -> Self {
        Self { l_x, l_y }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.l_x, self.l_y)
    }
}

/// Flow of the actuated ALIP over a fixed duration:
/// `x(t0 + T) = phi x(t0) + gamma tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlipTransition {
    pub phi: Matrix4<f64>,
    pub gamma: Matrix4x2<f64>,
    pub duration: f64,
    pub lambda: f64,
}

impl AlipTransition {
    pub fn apply(&self, x: &AlipState, tau: &AnkleTorque) -> AlipState {
        AlipState::from_vector(&(self.phi * x.to_vector() + self.gamma * tau.to_vector()))
    }
}

/// Continuous-time ALIP matrices `(A, B)`.
pub fn alip_system_matrices(params: &ModelParams) -> Result<(Matrix4<f64>, Matrix4x2<f64>)> {
    check_alip_params(params)?;
    let inv_mp = 1.0 / (params.m_com * params.p_z_des);
    let mg = params.m_com * params.g;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, inv_mp, 0.0,  0.0,
        mg,  0.0,    0.0,  0.0,
        0.0, 0.0,    0.0, -inv_mp,
        0.0, 0.0,   -mg,   0.0,
    );
    #[rustfmt::skip]
    let b = Matrix4x2::new(
        0.0, 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    );
    Ok((a, b))
}

fn check_alip_params(params: &ModelParams) -> Result<()> {
    if !(params.m_com > 0.0 && params.m_com.is_finite()) {
        return Err(Error::param("m_com", "must be finite and strictly positive"));
    }
    if !(params.p_z_des > 0.0 && params.p_z_des.is_finite()) {
        return Err(Error::param("p_z_des", "must be finite and strictly positive"));
    }
    if !(params.g > 0.0 && params.g.is_finite()) {
        return Err(Error::param("g", "must be finite and strictly positive"));
    }
    Ok(())
}

/// Exact inverse of the ALIP system matrix; each 2x2 block is anti-diagonal.
fn alip_a_inverse(params: &ModelParams) -> Matrix4<f64> {
    let mp = params.m_com * params.p_z_des;
    let inv_mg = 1.0 / (params.m_com * params.g);
    #[rustfmt::skip]
    let inv = Matrix4::new(
        0.0, inv_mg, 0.0,  0.0,
        mp,  0.0,    0.0,  0.0,
        0.0, 0.0,    0.0, -inv_mg,
        0.0, 0.0,   -mp,   0.0,
    );
    inv
}

/// State-transition and input matrices of the ALIP over `duration` seconds.
/// Negative durations flow the dynamics backwards.
pub fn alip_transition(params: &ModelParams, duration: f64) -> Result<AlipTransition> {
    let (a, b) = alip_system_matrices(params)?;
    if !duration.is_finite() {
        return Err(Error::Domain("ALIP transition duration must be finite"));
    }
    let phi = math::expm(&(a * duration));
    let gamma = alip_a_inverse(params) * (phi - Matrix4::identity()) * b;
    Ok(AlipTransition {
        phi,
        gamma,
        duration,
        lambda: params.lambda(),
    })
}

/// Derivatives of the transition matrices with respect to the duration:
/// `(A phi(T), phi(T) B)`.
pub fn alip_transition_derivative(params: &ModelParams, duration: f64) -> Result<(Matrix4<f64>, Matrix4x2<f64>)> {
    let (a, b) = alip_system_matrices(params)?;
    let tr = alip_transition(params, duration)?;
    Ok((a * tr.phi, tr.phi * b))
}

/// Flows `x0` for `duration` seconds under a constant ankle torque.
pub fn alip_flow(params: &ModelParams, x0: &AlipState, tau: &AnkleTorque, duration: f64) -> Result<AlipState> {
    Ok(alip_transition(params, duration)?.apply(x0, tau))
}

/// Foot-switch reset: positions are re-expressed about the new stance foot,
/// angular momenta are unchanged.
pub fn reset(x_pre: &AlipState, step: &StepLength) -> AlipState {
    AlipState {
        p_x: x_pre.p_x - step.l_x,
        l_y: x_pre.l_y,
        p_y: x_pre.p_y - step.l_y,
        l_x: x_pre.l_x,
    }
}

/// 4x2 reset input matrix mapping `(l_x, l_y)` into the position rows.
pub fn reset_matrix() -> Matrix4x2<f64> {
    #[rustfmt::skip]
    let bd = Matrix4x2::new(
        -1.0,  0.0,
         0.0,  0.0,
         0.0, -1.0,
         0.0,  0.0,
    );
    bd
}

/// Step-to-step map between consecutive pre-impact states: the foot switch
/// with `step` is applied to `x_pre`, then the next stance phase of
/// `duration` seconds is flowed with torque `tau`.
pub fn s2s(params: &ModelParams, x_pre: &AlipState, duration: f64, tau: &AnkleTorque, step: &StepLength) -> Result<AlipState> {
    if !(duration > 0.0) {
        return Err(Error::Domain("step period must be strictly positive"));
    }
    alip_flow(params, &reset(x_pre, step), tau, duration)
}

/// Nominal step lengths for a planar velocity command.
pub fn desired_step_lengths(v_cmd: [f64; 2], t_des: f64, gamma: f64, l_y_offset: f64) -> StepLength {
    StepLength {
        l_x: v_cmd[0] * t_des,
        l_y: v_cmd[1] * t_des + l_y_offset * gamma,
    }
}

/// Approximate ALIP state from the COM position relative to the stance foot,
/// the COM velocity and the body angular velocity, all in the stance yaw
/// frame.
pub fn alip_state_from_robot(
    p_rel: &Vector3<f64>,
    v: &Vector3<f64>,
    omega: &Vector3<f64>,
    params: &ModelParams,
) -> AlipState {
    let m = params.m_com;
    let [ix, iy, _] = params.i_com;
    AlipState {
        p_x: p_rel.x,
        l_y: m * p_rel.z * v.x - m * p_rel.x * v.z + iy * omega.y,
        p_y: p_rel.y,
        l_x: -m * p_rel.z * v.y + m * p_rel.y * v.z + ix * omega.x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cosh, sinh, sqrt};

    fn params() -> ModelParams {
        ModelParams::default()
    }

    /// Closed-form flow of one 2x2 block using A^2 = lambda^2 I.
    fn block_oracle(p: &ModelParams, t: f64) -> [[f64; 2]; 2] {
        let lam = sqrt(p.g / p.p_z_des);
        let mpz = p.m_com * p.p_z_des;
        [
            [cosh(lam * t), sinh(lam * t) / (lam * mpz)],
            [p.m_com * p.g * sinh(lam * t) / lam, cosh(lam * t)],
        ]
    }

    #[test]
    fn system_matrix_entries() {
        let p = params();
        let (a, b) = alip_system_matrices(&p).unwrap();
        assert_eq!(a[(0, 1)], 1.0 / (35.0 * 0.62));
        assert_eq!(a[(1, 0)], 35.0 * 9.81);
        assert_eq!(a[(2, 3)], -1.0 / (35.0 * 0.62));
        assert_eq!(a[(3, 2)], -35.0 * 9.81);
        for j in 0..2 {
            assert_eq!(b[(0, j)], 0.0);
            assert_eq!(b[(2, j)], 0.0);
        }
        assert_eq!(b[(1, 0)], 1.0);
        assert_eq!(b[(3, 1)], 1.0);
    }

    #[test]
    fn system_matrix_squares_to_lambda_squared() {
        let p = params();
        let (a, _) = alip_system_matrices(&p).unwrap();
        let a2 = a * a;
        let l2 = p.g / p.p_z_des;
        assert!((a2 - Matrix4::identity() * l2).amax() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = params();
        p.m_com = 0.0;
        assert!(alip_system_matrices(&p).is_err());
        let mut p = params();
        p.p_z_des = -0.1;
        assert!(alip_transition(&p, 0.3).is_err());
    }

    #[test]
    fn zero_duration_is_identity() {
        let tr = alip_transition(&params(), 0.0).unwrap();
        assert_eq!(tr.phi, Matrix4::identity());
        assert_eq!(tr.gamma, Matrix4x2::zeros());
    }

    #[test]
    fn transition_matches_closed_form_block() {
        let p = params();
        let t = 0.35;
        let tr = alip_transition(&p, t).unwrap();
        let o = block_oracle(&p, t);
        for i in 0..2 {
            for j in 0..2 {
                let tol = 1e-12 * o[i][j].abs().max(1.0);
                assert!((tr.phi[(i, j)] - o[i][j]).abs() < tol);
            }
        }
        // frontal block has the same structure with negated off-diagonals
        assert!((tr.phi[(2, 3)] + o[0][1]).abs() < 1e-12);
        assert!((tr.phi[(3, 2)] + o[1][0]).abs() < 1e-9);
        // no coupling between the sagittal and frontal pairs
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(tr.phi[(i, j)], 0.0);
                assert_eq!(tr.phi[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn derivative_at_zero_is_system_matrices() {
        let p = params();
        let (a, b) = alip_system_matrices(&p).unwrap();
        let (da, db) = alip_transition_derivative(&p, 0.0).unwrap();
        assert_eq!(da, a);
        assert_eq!(db, b);
    }

    #[test]
    fn derivative_commutes_with_a() {
        let p = params();
        let (a, _) = alip_system_matrices(&p).unwrap();
        let tr = alip_transition(&p, 0.42).unwrap();
        let lhs = a * tr.phi;
        let rhs = tr.phi * a;
        assert!((lhs - rhs).amax() < 1e-9 * lhs.amax());
    }

    #[test]
    fn flow_closed_form() {
        let p = params();
        let t = 0.35;
        let x = alip_flow(&p, &AlipState::new(0.1, 0.0, 0.0, 0.0), &AnkleTorque::ZERO, t).unwrap();
        let lam = p.lambda();
        assert!((x.p_x - 0.1 * cosh(lam * t)).abs() < 1e-13);
        let ly = 0.1 * p.m_com * p.g * sinh(lam * t) / lam;
        assert!((x.l_y - ly).abs() < 1e-11 * ly);
        assert_eq!(x.p_y, 0.0);
        assert_eq!(x.l_x, 0.0);
    }

    #[test]
    fn flow_zero_duration_returns_input() {
        let x0 = AlipState::new(0.03, -1.2, 0.08, 2.5);
        let x = alip_flow(&params(), &x0, &AnkleTorque::new(3.0, -2.0), 0.0).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn sagittal_torque_stays_in_sagittal_block() {
        let x = alip_flow(&params(), &AlipState::default(), &AnkleTorque::new(1.0, 0.0), 0.3).unwrap();
        assert!(x.p_x != 0.0 && x.l_y != 0.0);
        assert_eq!(x.p_y, 0.0);
        assert_eq!(x.l_x, 0.0);
    }

    #[test]
    fn reset_examples() {
        let x = AlipState::new(0.1, 2.0, -0.05, 1.0);
        assert_eq!(reset(&x, &StepLength::default()), x);
        let r = reset(&x, &StepLength::new(0.3, -0.2));
        assert!((r.p_x + 0.2).abs() < 1e-15);
        assert!((r.p_y - 0.15).abs() < 1e-15);
        assert_eq!(r.l_y, 2.0);
        assert_eq!(r.l_x, 1.0);
    }

    #[test]
    fn reset_matrix_matches_reset() {
        let x = AlipState::new(0.1, 2.0, -0.05, 1.0);
        let l = StepLength::new(0.3, -0.2);
        let v = x.to_vector() + reset_matrix() * l.to_vector();
        assert_eq!(AlipState::from_vector(&v), reset(&x, &l));
    }

    #[test]
    fn s2s_is_reset_then_flow() {
        let p = params();
        let x = AlipState::new(0.05, 1.0, -0.1, 2.0);
        let l = StepLength::new(0.2, 0.25);
        let tau = AnkleTorque::new(2.0, -1.0);
        let a = s2s(&p, &x, 0.4, &tau, &l).unwrap();
        let b = alip_flow(&p, &reset(&x, &l), &tau, 0.4).unwrap();
        assert_eq!(a, b);
        // with no step and no torque it is the plain flow
        let c = s2s(&p, &x, 0.4, &AnkleTorque::ZERO, &StepLength::default()).unwrap();
        assert_eq!(c, alip_flow(&p, &x, &AnkleTorque::ZERO, 0.4).unwrap());
    }

    #[test]
    fn s2s_rejects_nonpositive_period() {
        let p = params();
        let x = AlipState::default();
        assert!(matches!(
            s2s(&p, &x, 0.0, &AnkleTorque::ZERO, &StepLength::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn desired_lengths() {
        let l = desired_step_lengths([0.3, 0.0], 0.4, 1.0, 0.2);
        assert!((l.l_x - 0.12).abs() < 1e-15);
        assert!((l.l_y - 0.2).abs() < 1e-15);
        let l = desired_step_lengths([0.0, 0.0], 0.4, -1.0, 0.2);
        assert_eq!(l, StepLength::new(0.0, -0.2));
        let a = desired_step_lengths([0.1, 0.15], 0.4, 1.0, 0.2);
        let b = desired_step_lengths([0.1, 0.15], 0.4, -1.0, 0.2);
        assert!((a.l_y + b.l_y - 2.0 * 0.15 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn robot_state_extraction() {
        let p = params();
        let x = alip_state_from_robot(
            &Vector3::new(0.0, 0.0, 0.62),
            &Vector3::new(0.3, 0.0, 0.0),
            &Vector3::zeros(),
            &p,
        );
        assert!((x.l_y - 35.0 * 0.62 * 0.3).abs() < 1e-12);
        assert_eq!(x.l_x, 0.0);
        let x = alip_state_from_robot(&Vector3::new(0.0, 0.0, 0.62), &Vector3::zeros(), &Vector3::new(0.0, 0.7, 0.0), &p);
        assert!((x.l_y - p.i_com[1] * 0.7).abs() < 1e-15);
    }

    #[test]
    fn robot_state_matches_point_mass_plus_rotor_momentum() {
        // L = r x (m v) + I omega about the stance point, brute force.
        let p = params();
        let cases = [
            ([0.05, -0.08, 0.6], [0.2, -0.1, 0.05], [0.3, -0.2, 0.1]),
            ([-0.1, 0.12, 0.64], [-0.3, 0.25, -0.04], [-0.5, 0.1, 0.9]),
        ];
        for (r, v, w) in cases {
            let r = Vector3::from(r);
            let v = Vector3::from(v);
            let w = Vector3::from(w);
            let lin = r.cross(&(v * p.m_com));
            let rot = Vector3::new(p.i_com[0] * w.x, p.i_com[1] * w.y, p.i_com[2] * w.z);
            let l = lin + rot;
            let x = alip_state_from_robot(&r, &v, &w, &p);
            assert!((x.l_y - l.y).abs() < 1e-12);
            assert!((x.l_x - l.x).abs() < 1e-12);
        }
    }
}
