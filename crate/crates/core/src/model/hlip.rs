//! Periodic orbits of the hybrid LIP with zero double support, used as
//! desired pre-impact states for the step planner.

use nalgebra::{Matrix2, Vector2};

use super::{AlipState, ModelParams};
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Sagittal,
    Frontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitKind {
    Period1,
    Period2,
}

/// Desired pre-impact position (relative to the stance foot) and velocity
/// of one HLIP axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlipOrbitTarget {
    pub p_pre: f64,
    pub v_pre: f64,
    pub axis: Axis,
    pub orbit: OrbitKind,
}

/// Flow matrix of the LIP `(p, v)` over `t` seconds.
pub fn lip_flow_matrix(lambda: f64, t: f64) -> Matrix2<f64> {
    let (c, s) = (math::cosh(lambda * t), math::sinh(lambda * t));
    Matrix2::new(c, s / lambda, lambda * s, c)
}

/// One nominal step between pre-impact states: the foot moves by `step`,
/// then the stance phase of `t` seconds is flowed with no input.
pub fn lip_step(lambda: f64, t: f64, x_pre: Vector2<f64>, step: f64) -> Vector2<f64> {
    lip_flow_matrix(lambda, t) * Vector2::new(x_pre[0] - step, x_pre[1])
}

fn check(t_ssp: f64, p_z: f64, g: f64) -> Result<f64> {
    if !(t_ssp > 0.0 && t_ssp.is_finite()) {
        return Err(Error::Domain("single-support period must be strictly positive"));
    }
    if !(p_z > 0.0 && g > 0.0) {
        return Err(Error::param("p_z", "height and gravity must be strictly positive"));
    }
    Ok(math::sqrt(g / p_z))
}

/// Period-1 orbit: the pre-impact state is mapped to itself by a single
/// nominal step of length `v_cmd * t_ssp`.
pub fn hlip_period1(t_ssp: f64, p_z: f64, g: f64, v_cmd: f64) -> Result<HlipOrbitTarget> {
    let lambda = check(t_ssp, p_z, g)?;
    let p_pre = 0.5 * v_cmd * t_ssp;
    // coth(lambda T / 2) = sinh(lambda T) / (cosh(lambda T) - 1)
    let lt = lambda * t_ssp;
    let coth_half = math::sinh(lt) / (math::cosh(lt) - 1.0);
    Ok(HlipOrbitTarget {
        p_pre,
        v_pre: lambda * coth_half * p_pre,
        axis: Axis::Sagittal,
        orbit: OrbitKind::Period1,
    })
}

/// Period-2 orbit for the lateral axis. Step lengths alternate between
/// `v_cmd T + gamma w` and `v_cmd T - gamma w`; the returned state is the
/// pre-impact state whose following step uses `gamma`.
pub fn hlip_period2(t_ssp: f64, p_z: f64, g: f64, v_cmd: f64, l_y_offset: f64, gamma: f64) -> Result<HlipOrbitTarget> {
    let lambda = check(t_ssp, p_z, g)?;
    if !(l_y_offset > 0.0) {
        return Err(Error::param("l_y_offset", "step width must be strictly positive"));
    }
    if gamma != 1.0 && gamma != -1.0 {
        return Err(Error::param("gamma", "stance indicator must be -1 or +1"));
    }
    let u1 = v_cmd * t_ssp + l_y_offset * gamma;
    let u2 = v_cmd * t_ssp - l_y_offset * gamma;
    // x = M (M (x - e u1) - e u2)  =>  (I - M^2) x = -(M^2 e u1 + M e u2)
    let m = lip_flow_matrix(lambda, t_ssp);
    let e = Vector2::new(1.0, 0.0);
    let m2 = m * m;
    let rhs = -(m2 * e * u1 + m * e * u2);
    let x = (Matrix2::identity() - m2)
        .lu()
        .solve(&rhs)
        .ok_or(Error::Domain("period-2 orbit is degenerate"))?;
    Ok(HlipOrbitTarget {
        p_pre: x[0],
        v_pre: x[1],
        axis: Axis::Frontal,
        orbit: OrbitKind::Period2,
    })
}

/// Converts sagittal (`x`) and lateral (`y`) HLIP targets into an ALIP
/// pre-impact state.
pub fn hlip_to_alip(x: &HlipOrbitTarget, y: &HlipOrbitTarget, params: &ModelParams) -> AlipState {
    let mp = params.m_com * params.p_z_des;
    AlipState {
        p_x: x.p_pre,
        l_y: mp * x.v_pre,
        p_y: y.p_pre,
        l_x: -mp * y.v_pre,
    }
}
