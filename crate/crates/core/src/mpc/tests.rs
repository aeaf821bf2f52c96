use super::*;
use crate::model::{srb_derivative, SrbState};
use crate::refgen::NodeSchedule;

fn standing_refs(params: &ModelParams, n_nodes: usize, stance: Side) -> SrbReferenceTrajectory {
    let x = SrbState::at_rest(Vector3::new(0.0, 0.0, params.p_z_des), params.g);
    let n = n_nodes + 1;
    SrbReferenceTrajectory {
        x_ref: alloc::vec![x; n],
        p_stf_ref: alloc::vec![Vector3::zeros(); n],
        psi_stf_ref: alloc::vec![0.0; n],
        schedule: NodeSchedule {
            dt_seq: alloc::vec![0.025; n],
            step_of_node: alloc::vec![0; n],
            t2i: alloc::vec![1.0; n],
            contact: alloc::vec![stance; n],
            contact_step: alloc::vec![0; n],
            held: false,
        },
    }
}

fn tight() -> MpcConfig {
    MpcConfig { qp: QpSettings { eps_abs: 1e-7, eps_rel: 1e-7, max_iter: 4000, ..QpSettings::default() }, ..MpcConfig::default() }
}

#[test]
fn static_equilibrium_supports_weight() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 10, Side::Left);
    let x0 = DsrbState::from_srb(refs.x_ref[0]);
    let sol = solve_mpc(&x0, &refs, &tight(), &params, None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    let w = params.m_com * params.g;
    assert!((sol.u0.left.force.z - w).abs() < 0.01 * w, "F_z {}", sol.u0.left.force.z);
    assert!(sol.u0.left.force.xy().norm() < 1e-3 * w);
    for (x, r) in sol.predicted.iter().zip(&refs.x_ref[1..]) {
        assert!((x.srb.p_com - r.p_com).norm() < 2e-3);
    }
}

#[test]
fn swing_wrench_is_zero_and_gravity_constant() {
    let params = ModelParams::default();
    for stance in [Side::Left, Side::Right] {
        let refs = standing_refs(&params, 10, stance);
        let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
        x0.srb.v_com.y = 0.2;
        let sol = solve_mpc(&x0, &refs, &MpcConfig::default(), &params, None).unwrap();
        for u in &sol.inputs {
            assert!(u.foot(stance.other()).is_zero());
            assert!(u.foot(stance).force.z > 0.0);
        }
        for x in &sol.predicted {
            assert!((x.srb.g_entry - params.g).abs() < 1e-9);
        }
    }
}

#[test]
fn lateral_offset_pushes_back() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 10, Side::Left);
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.srb.v_com.y = 0.3;
    let sol = solve_mpc(&x0, &refs, &tight(), &params, None).unwrap();
    assert!(sol.u0.left.force.y < 0.0, "F_y {}", sol.u0.left.force.y);
    x0.srb.v_com.y = -0.3;
    let sol = solve_mpc(&x0, &refs, &tight(), &params, None).unwrap();
    assert!(sol.u0.left.force.y > 0.0);
}

#[test]
fn contact_constraints_hold_in_foot_frame() {
    let params = ModelParams::default();
    let cfg = tight();
    let mut refs = standing_refs(&params, 10, Side::Right);
    let yaw = 0.7;
    for p in refs.psi_stf_ref.iter_mut() {
        *p = yaw;
    }
    for x in refs.x_ref.iter_mut() {
        x.theta.z = yaw;
    }
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.srb.v_com = Vector3::new(1.0, -0.8, 0.0);
    x0.srb.omega = Vector3::new(0.5, -0.5, 1.0);
    let sol = solve_mpc(&x0, &refs, &cfg, &params, None).unwrap();
    let rot = rot_z(yaw);
    let tol = 1e-3;
    for u in &sol.inputs {
        let w = u.foot(Side::Right);
        let f = rot.transpose() * w.force;
        let m = rot.transpose() * w.moment;
        assert!(f.z >= cfg.f_z_min - tol && f.z <= cfg.f_z_max + tol);
        assert!(f.x.abs() <= cfg.mu * f.z + tol && f.y.abs() <= cfg.mu * f.z + tol);
        assert!(m.y.abs() <= cfg.foot_half_length * f.z + tol);
        assert!(m.x.abs() <= cfg.foot_half_width * f.z + tol);
        assert!(m.z.abs() <= cfg.mu_z * f.z + tol);
    }
}

#[test]
fn variant_reduction_matches_srb() {
    let mut params = ModelParams::default();
    params.i_lb_z = params.i_com[2];
    let refs = standing_refs(&params, 10, Side::Left);
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.srb.v_com = Vector3::new(0.2, 0.1, 0.0);
    let srb = solve_mpc(&x0, &refs, &tight(), &params, None).unwrap();
    let mut dcfg = tight();
    dcfg.variant = MpcVariant::Dsrb;
    // upper body locked at zero: the extra channels are unused
    dcfg.arm_force_max = 0.0;
    dcfg.torso_torque_max = 0.0;
    let dsrb = solve_mpc(&x0, &refs, &dcfg, &params, None).unwrap();
    let d = (srb.u0.left.force - dsrb.u0.left.force).norm() + (srb.u0.left.moment - dsrb.u0.left.moment).norm();
    assert!(d < 1e-2, "difference {d}");
}

#[test]
fn dsrb_upper_state_bounds_hold() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 10, Side::Left);
    let mut cfg = tight();
    cfg.variant = MpcVariant::Dsrb;
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.dpsi_tr = 3.0;
    x0.v_la = 0.5;
    let sol = solve_mpc(&x0, &refs, &cfg, &params, None).unwrap();
    assert_eq!(sol.status, QpStatus::Solved);
    for x in &sol.predicted {
        assert!(x.psi_tr.abs() <= cfg.torso_yaw_max + 1e-4);
        assert!(x.p_la.abs() <= cfg.arm_position_max + 1e-4);
    }
    // the torso is braked: torque opposes its rate
    assert!(sol.u0.tau_tr < 0.0);
}

#[test]
fn first_prediction_matches_nonlinear_flow() {
    // linearized at x0, the first node is the explicit Euler step of the
    // nonlinear dynamics under u0, so it trails RK4 by O(dt^2)
    let params = ModelParams::default();
    for dt in [0.02, 0.01, 0.005] {
        let mut refs = standing_refs(&params, 4, Side::Left);
        refs.schedule.dt_seq = alloc::vec![dt; 5];
        let mut cfg = tight();
        cfg.n_nodes = 4;
        let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
        x0.srb.v_com = Vector3::new(0.3, -0.2, 0.05);
        x0.srb.omega = Vector3::new(0.4, 0.3, -0.5);
        x0.srb.theta = Vector3::new(0.05, -0.04, 0.1);
        let sol = solve_mpc(&x0, &refs, &cfg, &params, None).unwrap();
        let u = sol.u0.feet();
        let feet = FootPositions::both_at(Vector3::zeros());
        let f = |x: &SrbState| srb_derivative(x, &u, &feet, &params).unwrap();
        let x = x0.srb.to_vector();
        let k1 = f(&SrbState::from_vector(&x));
        let k2 = f(&SrbState::from_vector(&(x + k1 * (dt / 2.0))));
        let k3 = f(&SrbState::from_vector(&(x + k2 * (dt / 2.0))));
        let k4 = f(&SrbState::from_vector(&(x + k3 * dt)));
        let x1 = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let pred = sol.predicted[0].srb.to_vector();
        let euler = (pred - (x + k1 * dt)).amax();
        assert!(euler < 1e-9, "dt {dt}: Euler mismatch {euler:e}");
        let err = (pred - x1).amax();
        assert!(err < 150.0 * dt * dt, "dt {dt}: error {err}");
    }
}

#[test]
fn warm_start_cuts_iterations() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 10, Side::Left);
    let cfg = MpcConfig { qp_method: QpMethod::Admm, ..MpcConfig::with_variant(MpcVariant::Dsrb) };
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.srb.v_com = Vector3::new(0.4, 0.2, 0.0);
    let cold = solve_mpc(&x0, &refs, &cfg, &params, None).unwrap();
    x0.srb.p_com += x0.srb.v_com * 0.002;
    let cold2 = solve_mpc(&x0, &refs, &cfg, &params, None).unwrap();
    let warm = solve_mpc(&x0, &refs, &cfg, &params, Some(&cold)).unwrap();
    assert!(2 * warm.iterations <= cold2.iterations, "warm {} cold {}", warm.iterations, cold2.iterations);
}

#[test]
fn short_references_are_rejected() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 3, Side::Left);
    let x0 = DsrbState::from_srb(refs.x_ref[0]);
    assert!(matches!(solve_mpc(&x0, &refs, &MpcConfig::default(), &params, None), Err(Error::Dimension { .. })));
}

#[test]
fn solver_methods_agree() {
    let params = ModelParams::default();
    let refs = standing_refs(&params, 10, Side::Right);
    let mut x0 = DsrbState::from_srb(refs.x_ref[0]);
    x0.srb.v_com = Vector3::new(0.5, -0.6, 0.1);
    x0.srb.omega = Vector3::new(0.3, 0.0, 2.0);
    x0.dpsi_tr = 2.0;
    for variant in [MpcVariant::Srb, MpcVariant::Dsrb] {
        let exact = MpcConfig { variant, ..tight() };
        let admm = MpcConfig { qp_method: QpMethod::Admm, ..exact };
        let a = solve_mpc(&x0, &refs, &exact, &params, None).unwrap();
        let b = solve_mpc(&x0, &refs, &admm, &params, None).unwrap();
        assert_eq!(a.status, QpStatus::Solved);
        assert!((a.objective - b.objective).abs() <= 1e-5 * (1.0 + a.objective.abs()), "{} vs {}", a.objective, b.objective);
        assert!((a.u0.right.force - b.u0.right.force).norm() < 0.5);
    }
}
