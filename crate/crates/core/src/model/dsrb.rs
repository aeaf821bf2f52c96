//! Decomposed single rigid body (DSRB): the SRB lower body plus a torso that
//! yaws about the pelvis and two arm point masses that slide along the body
//! x axis.
//!
//! State layout (19): the 13 SRB entries, then `psi_tr`, `p_la`, `p_ra`,
//! `dpsi_tr`, `v_la`, `v_ra`. Input layout (15): the 12 SRB wrench entries,
//! then `tau_tr`, `f_la_x`, `f_ra_x`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::rotation::euler_to_rot;
use super::srb::{srb_jacobians_with_inertia, FootPositions, FootWrench, SrbInput, SrbState, SRB_NU, SRB_NX};
use super::{ModelParams, Side};
use crate::{Error, Result};

pub const DSRB_NX: usize = 19;
pub const DSRB_NU: usize = 15;

pub type DsrbVector = SVector<f64, DSRB_NX>;
pub type DsrbMatrix = SMatrix<f64, DSRB_NX, DSRB_NX>;
pub type DsrbInputMatrix = SMatrix<f64, DSRB_NX, DSRB_NU>;

/// Index of the first upper-body state entry.
pub const DSRB_UPPER: usize = SRB_NX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsrbState {
    pub srb: SrbState,
    /// Torso yaw relative to the lower body.
    pub psi_tr: f64,
    /// Arm-mass displacements along the body x axis from their nominal
    /// offsets.
    pub p_la: f64,
    pub p_ra: f64,
    pub dpsi_tr: f64,
    pub v_la: f64,
    pub v_ra: f64,
}

impl DsrbState {
    pub fn from_srb(srb: SrbState) -> Self {
        Self { srb, psi_tr: 0.0, p_la: 0.0, p_ra: 0.0, dpsi_tr: 0.0, v_la: 0.0, v_ra: 0.0 }
    }

    pub fn to_vector(&self) -> DsrbVector {
        let mut v = DsrbVector::zeros();
        v.fixed_rows_mut::<SRB_NX>(0).copy_from(&self.srb.to_vector());
        v[13] = self.psi_tr;
        v[14] = self.p_la;
        v[15] = self.p_ra;
        v[16] = self.dpsi_tr;
        v[17] = self.v_la;
        v[18] = self.v_ra;
        v
    }

    pub fn from_vector(v: &DsrbVector) -> Self {
        Self {
            srb: SrbState::from_vector(&v.fixed_rows::<SRB_NX>(0).into()),
            psi_tr: v[13],
            p_la: v[14],
            p_ra: v[15],
            dpsi_tr: v[16],
            v_la: v[17],
            v_ra: v[18],
        }
    }

    pub fn has_zero_upper_body(&self) -> bool {
        [self.psi_tr, self.p_la, self.p_ra, self.dpsi_tr, self.v_la, self.v_ra]
            .iter()
            .all(|v| *v == 0.0)
    }
}

/// Foot wrenches plus the upper-body inputs. Arm forces act on the body
/// along its x axis; the arm masses receive the opposite force.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DsrbInput {
    pub left: FootWrench,
    pub right: FootWrench,
    pub tau_tr: f64,
    pub f_la_x: f64,
    pub f_ra_x: f64,
}

impl DsrbInput {
    pub fn from_srb(u: &SrbInput) -> Self {
        Self { left: u.left, right: u.right, ..Default::default() }
    }

    pub fn foot(&self, side: Side) -> &FootWrench {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn feet(&self) -> SrbInput {
        SrbInput { left: self.left, right: self.right }
    }

    pub fn to_vector(&self) -> SVector<f64, DSRB_NU> {
        let mut v = SVector::<f64, DSRB_NU>::zeros();
        v.fixed_rows_mut::<SRB_NU>(0).copy_from(&self.feet().to_vector());
        v[12] = self.tau_tr;
        v[13] = self.f_la_x;
        v[14] = self.f_ra_x;
        v
    }

    pub fn from_vector(v: &SVector<f64, DSRB_NU>) -> Self {
        let feet = SrbInput::from_vector(&v.fixed_rows::<SRB_NU>(0).into());
        Self { left: feet.left, right: feet.right, tau_tr: v[12], f_la_x: v[13], f_ra_x: v[14] }
    }
}

/// Force and moment on the body from an arm pushing along the body x axis
/// at offset `r` (body frame).
pub fn arm_reaction_wrench(f_x: f64, r: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::new(f_x, 0.0, 0.0), Vector3::new(0.0, r.z * f_x, -r.y * f_x))
}

/// Continuous Jacobians of the DSRB model at a reference, with the SRB
/// drift evaluated at zero input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsrbJacobians {
    pub a: DsrbMatrix,
    pub b: DsrbInputMatrix,
    pub drift: DsrbVector,
}

/// Discrete DSRB model `x+ = a x + b u + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsrbLinearization {
    pub a: DsrbMatrix,
    pub b: DsrbInputMatrix,
    pub c: DsrbVector,
}

/// Body inertia used by the lower body: the SRB inertia with its yaw entry
/// replaced by the lower-body yaw inertia.
pub fn lower_body_inertia(params: &ModelParams) -> Vector3<f64> {
    Vector3::new(params.i_com[0], params.i_com[1], params.i_lb_z)
}

/// Linear DSRB dynamics about `x_ref`. The upper-body couplings are
/// expressed in the body frame of the reference attitude; at zero reference
/// attitude they reduce to the constant body-frame entries.
pub fn dsrb_matrices(x_ref: &SrbState, feet: &FootPositions, params: &ModelParams) -> Result<DsrbJacobians> {
    let srb = srb_jacobians_with_inertia(x_ref, feet, params, &lower_body_inertia(params))?;
    let mut a = DsrbMatrix::zeros();
    let mut b = DsrbInputMatrix::zeros();
    let mut drift = DsrbVector::zeros();
    a.fixed_view_mut::<SRB_NX, SRB_NX>(0, 0).copy_from(&srb.a);
    b.fixed_view_mut::<SRB_NX, SRB_NU>(0, 0).copy_from(&srb.b);
    drift.fixed_rows_mut::<SRB_NX>(0).copy_from(&srb.drift);

    let r = euler_to_rot(&x_ref.theta);
    let [_, iy, _] = params.i_com;
    let (ex, ey, ez) = (r * Vector3::x(), r * Vector3::y(), r * Vector3::z());
    let (psi, p_la, p_ra, dpsi, v_la, v_ra) = (13, 14, 15, 16, 17, 18);
    let (tau, f_la, f_ra) = (12, 13, 14);

    // integrators
    a[(psi, dpsi)] = 1.0;
    a[(p_la, v_la)] = 1.0;
    a[(p_ra, v_ra)] = 1.0;

    // arm-mass gravity moments about the body pitch axis
    let col_la: Vector3<f64> = ey * (params.m_la * params.g / iy);
    let col_ra: Vector3<f64> = ey * (params.m_ra * params.g / iy);
    a.fixed_view_mut::<3, 1>(9, p_la).copy_from(&col_la);
    a.fixed_view_mut::<3, 1>(9, p_ra).copy_from(&col_ra);

    // torso torque: equal and opposite on the lower body
    b.fixed_view_mut::<3, 1>(9, tau).copy_from(&(-ez / params.i_lb_z));
    b[(dpsi, tau)] = 1.0 / params.i_tr_z;

    for (col, m_arm, r_arm, acc) in [(f_la, params.m_la, params.r_la, v_la), (f_ra, params.m_ra, params.r_ra, v_ra)] {
        b.fixed_view_mut::<3, 1>(6, col).copy_from(&(ex / params.m_com));
        b.fixed_view_mut::<3, 1>(9, col).copy_from(&(ey * (r_arm[2] / iy)));
        b[(dpsi, col)] = -r_arm[1] / params.i_tr_z;
        b[(acc, col)] = -1.0 / m_arm;
    }
    Ok(DsrbJacobians { a, b, drift })
}

/// Forward-Euler discretization of [`dsrb_matrices`] with the affine term
/// that makes the expansion exact at `x_ref`.
pub fn dsrb_linearize(x_ref: &SrbState, feet: &FootPositions, params: &ModelParams, dt: f64) -> Result<DsrbLinearization> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::Domain("discretization step must be non-negative"));
    }
    let j = dsrb_matrices(x_ref, feet, params)?;
    let x = DsrbState::from_srb(*x_ref).to_vector();
    Ok(DsrbLinearization {
        a: DsrbMatrix::identity() + j.a * dt,
        b: j.b * dt,
        c: (j.drift - j.a * x) * dt,
    })
}

/// World-frame inertia of the lower body at attitude `theta`.
pub fn lower_body_world_inertia(theta: &Vector3<f64>, params: &ModelParams) -> Matrix3<f64> {
    super::srb::world_inertia(theta, &lower_body_inertia(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::srb::discretize;

    fn reference() -> SrbState {
        SrbState {
            p_com: Vector3::new(0.02, 0.05, 0.62),
            theta: Vector3::new(0.0, 0.0, 0.0),
            v_com: Vector3::new(0.3, 0.0, 0.0),
            omega: Vector3::new(0.0, 0.0, 0.2),
            g_entry: 9.81,
        }
    }

    #[test]
    fn round_trip_vectors() {
        let mut x = DsrbState::from_srb(reference());
        x.psi_tr = 0.1;
        x.v_ra = -0.3;
        assert_eq!(DsrbState::from_vector(&x.to_vector()), x);
        let u = DsrbInput { tau_tr: 1.0, f_la_x: 2.0, f_ra_x: 3.0, ..Default::default() };
        assert_eq!(DsrbInput::from_vector(&u.to_vector()), u);
    }

    #[test]
    fn reduces_to_srb_with_lower_body_inertia() {
        let p = ModelParams::default();
        let feet = FootPositions::both_at(Vector3::new(0.0, 0.1, 0.0));
        let x_ref = reference();
        let d = dsrb_linearize(&x_ref, &feet, &p, 0.01).unwrap();
        let s = discretize(
            &srb_jacobians_with_inertia(&x_ref, &feet, &p, &lower_body_inertia(&p)).unwrap(),
            &x_ref.to_vector(),
            0.01,
        );
        let mut x = DsrbState::from_srb(x_ref);
        x.srb.p_com.x += 0.01;
        x.srb.omega.y = 0.05;
        let mut u = DsrbInput::default();
        u.left.force = Vector3::new(3.0, -2.0, 340.0);
        let next = d.a * x.to_vector() + d.b * u.to_vector() + d.c;
        let next_srb = s.a * x.srb.to_vector() + s.b * u.feet().to_vector() + s.c;
        assert!((next.fixed_rows::<SRB_NX>(0) - next_srb).amax() < 1e-12);
        assert!(next.fixed_rows::<6>(13).amax() == 0.0);
    }

    #[test]
    fn torso_torque_is_equal_and_opposite() {
        let p = ModelParams::default();
        let j = dsrb_matrices(&reference(), &FootPositions::both_at(Vector3::zeros()), &p).unwrap();
        assert_eq!(j.b[(16, 12)], 1.0 / p.i_tr_z);
        assert!((j.b[(11, 12)] + 1.0 / p.i_lb_z).abs() < 1e-15);
        assert_eq!(j.b[(9, 12)], 0.0);
        assert_eq!(j.b[(10, 12)], 0.0);
    }

    #[test]
    fn arm_force_yaws_the_torso() {
        let p = ModelParams::default();
        let j = dsrb_matrices(&reference(), &FootPositions::both_at(Vector3::zeros()), &p).unwrap();
        let dd_psi = j.b[(16, 13)] * 10.0;
        assert!((dd_psi + 10.0 * 0.25 / p.i_tr_z).abs() < 1e-14);
        assert_eq!(j.b[(17, 13)], -1.0 / p.m_la);
        assert_eq!(j.b[(10, 13)], p.r_la[2] / p.i_com[1]);
        assert_eq!(j.b[(6, 13)], 1.0 / p.m_com);
    }

    #[test]
    fn gravity_row_is_constant() {
        let p = ModelParams::default();
        let j = dsrb_matrices(&reference(), &FootPositions::both_at(Vector3::zeros()), &p).unwrap();
        assert!(j.a.row(12).iter().all(|v| *v == 0.0));
        assert!(j.b.row(12).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn arm_reaction_matches_cross_product() {
        let r = Vector3::new(0.05, 0.25, 0.25);
        for f in [-7.0, 0.0, 10.0] {
            let (force, moment) = arm_reaction_wrench(f, &r);
            let full = r.cross(&force);
            assert_eq!(moment.y, full.y);
            assert_eq!(moment.z, full.z);
            assert_eq!(moment.x, 0.0);
        }
        let (_, m) = arm_reaction_wrench(10.0, &r);
        assert_eq!(m, Vector3::new(0.0, 2.5, -2.5));
    }
}
