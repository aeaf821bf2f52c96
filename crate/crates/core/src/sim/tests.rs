use super::*;
use crate::model::{reset, FootWrench, StepLength};

fn standing(params: &ModelParams, side: Side) -> PlantState {
    let srb = SrbState::at_rest(Vector3::new(0.0, 0.0, params.p_z_des), params.g);
    PlantState {
        dsrb: DsrbState::from_srb(srb),
        stance: StanceInfo { side, p_stf: Vector3::zeros(), psi_stf: 0.0 },
        swing_pose: SwingPose::at_rest(Vector3::new(0.0, -side.step_sign() * 0.2, 0.0), 0.0),
        t: 0.0,
        t_step: 0.0,
    }
}

fn support(params: &ModelParams) -> DsrbInput {
    DsrbInput {
        left: FootWrench { force: Vector3::new(0.0, 0.0, params.m_com * params.g), moment: Vector3::zeros() },
        ..Default::default()
    }
}

#[test]
fn free_fall_is_ballistic() {
    let params = ModelParams::default();
    let mut s = standing(&params, Side::Left);
    s.dsrb.srb.v_com = Vector3::new(0.3, -0.1, 0.5);
    let dt = 0.001;
    let next = step_plant(&s, &DsrbInput::default(), &[], dt, Integrator::Rk4, &params).unwrap();
    let dv = next.dsrb.srb.v_com - s.dsrb.srb.v_com;
    assert!((dv.z + params.g * dt).abs() < 1e-12);
    assert!(dv.xy().norm() < 1e-15);
    let dz = next.dsrb.srb.p_com.z - s.dsrb.srb.p_com.z;
    assert!((dz - (0.5 * dt - 0.5 * params.g * dt * dt)).abs() < 1e-12);
    assert_eq!(next.t, dt);
}

#[test]
fn held_equilibrium_does_not_drift() {
    let params = ModelParams::default();
    let s0 = standing(&params, Side::Left);
    let u = support(&params);
    let mut s = s0;
    for _ in 0..1000 {
        s = step_plant(&s, &u, &[], 0.001, Integrator::Rk4, &params).unwrap();
    }
    let drift = (s.dsrb.to_vector() - s0.dsrb.to_vector()).amax();
    assert!(drift <= 1e-6, "drift {drift}");
    assert!((s.t - 1.0).abs() < 1e-9);
}

#[test]
fn torso_torque_conserves_yaw_momentum() {
    let params = ModelParams::default();
    let mut s = standing(&params, Side::Left);
    s.dsrb.srb.omega.z = 0.4;
    s.dsrb.dpsi_tr = -0.2;
    let h0 = s.yaw_momentum(&params);
    let u = DsrbInput { tau_tr: 25.0, ..support(&params) };
    for _ in 0..200 {
        s = step_plant(&s, &u, &[], 0.001, Integrator::Rk4, &params).unwrap();
    }
    // the torque did act on the joint
    assert!(s.dsrb.dpsi_tr > 10.0);
    assert!((s.yaw_momentum(&params) - h0).abs() < 1e-9);
}

#[test]
fn torso_moment_disturbance_spins_the_torso() {
    let params = ModelParams::default();
    let s0 = standing(&params, Side::Left);
    let d = Disturbance::new(DisturbanceKind::TorsoMoment, Vector3::new(0.0, 0.0, 10.0), 0.0, 1.0).unwrap();
    let mut s = s0;
    for _ in 0..100 {
        s = step_plant(&s, &support(&params), &[d], 0.001, Integrator::Rk4, &params).unwrap();
    }
    let expected = 10.0 * 0.1;
    assert!((s.yaw_momentum(&params) - expected).abs() < 1e-9);
    assert!(s.dsrb.dpsi_tr > 0.0 && s.dsrb.srb.omega.z.abs() < 1e-12);
}

#[test]
fn rk4_is_fourth_order() {
    let params = ModelParams::default();
    let mut s0 = standing(&params, Side::Left);
    s0.dsrb.srb.v_com = Vector3::new(0.2, 0.1, 1.0);
    s0.dsrb.srb.omega = Vector3::new(0.8, -0.6, 1.5);
    s0.dsrb.dpsi_tr = 0.5;
    let u = DsrbInput { tau_tr: 3.0, f_la_x: 2.0, ..Default::default() };
    let run = |dt: f64| {
        let mut s = s0;
        let n = crate::math::round(1.0 / dt) as usize;
        for _ in 0..n {
            s = step_plant(&s, &u, &[], dt, Integrator::Rk4, &params).unwrap();
        }
        s.dsrb.to_vector()
    };
    let reference = run(0.0005);
    let e1 = (run(0.02) - reference).amax();
    let e2 = (run(0.01) - reference).amax();
    assert!(e1 / e2 >= 8.0, "errors {e1} {e2}");

    let euler = |dt: f64| {
        let mut s = s0;
        for _ in 0..crate::math::round(1.0 / dt) as usize {
            s = step_plant(&s, &u, &[], dt, Integrator::Euler, &params).unwrap();
        }
        (s.dsrb.to_vector() - reference).amax()
    };
    let ratio = euler(0.01) / euler(0.005);
    assert!(ratio > 1.7 && ratio < 2.3, "euler ratio {ratio}");
}

#[test]
fn stance_momentum_rate_matches_alip() {
    // point GRF through the stance foot: L_y about the foot grows at m g p_x
    let params = ModelParams::default();
    let mut s = standing(&params, Side::Left);
    s.dsrb.srb.p_com.x = 0.02;
    s.dsrb.srb.p_com.y = -0.01;
    let w = params.m_com * params.g;
    let u = support(&params);
    let a0 = s.alip_state(&params);
    let h = 0.01;
    for _ in 0..10 {
        s = step_plant(&s, &u, &[], 0.001, Integrator::Rk4, &params).unwrap();
    }
    let a1 = s.alip_state(&params);
    let rate_y = (a1.l_y - a0.l_y) / h;
    let rate_x = (a1.l_x - a0.l_x) / h;
    assert!((rate_y - w * 0.02).abs() <= 0.05 * w * 0.02, "{rate_y}");
    assert!((rate_x - (-w * -0.01)).abs() <= 0.05 * w * 0.01, "{rate_x}");
}

#[test]
fn impact_switches_stance_only() {
    let params = ModelParams::default();
    let mut s = standing(&params, Side::Left);
    s.dsrb.srb.v_com = Vector3::new(0.3, -0.2, 0.0);
    s.dsrb.srb.omega = Vector3::new(0.1, 0.2, 0.3);
    s.t_step = 0.3;
    let landing = Vector3::new(0.1, -0.2, 0.0);
    let (next, ok) = apply_impact(&s, &landing, 0.1);
    assert!(ok);
    assert_eq!(next.dsrb, s.dsrb);
    assert_eq!(next.stance.side, Side::Right);
    assert_eq!(next.stance.p_stf, landing);
    assert_eq!(next.swing_pose.position, s.stance.p_stf);
    assert_eq!(next.t_step, 0.0);
    assert_eq!(next.t, s.t);

    let (same, ok) = apply_impact(&s, &s.stance.p_stf, s.stance.psi_stf);
    assert!(ok);
    assert_eq!(same.stance.p_stf, s.stance.p_stf);
    assert_eq!(same.stance.psi_stf, s.stance.psi_stf);
    assert_eq!(same.stance.side, Side::Right);
    assert_eq!(same.dsrb, s.dsrb);

    let (_, ok) = apply_impact(&s, &Vector3::new(1.0, 0.0, 0.0), 0.0);
    assert!(!ok);
}

#[test]
fn impact_obeys_alip_reset() {
    let params = ModelParams::default();
    let mut s = standing(&params, Side::Left);
    s.dsrb.srb.p_com = Vector3::new(0.08, 0.05, params.p_z_des);
    s.dsrb.srb.v_com = Vector3::new(0.4, -0.3, 0.0);
    s.dsrb.srb.omega = Vector3::new(0.2, -0.1, 0.0);
    let before = s.alip_state(&params);
    let step = StepLength { l_x: 0.15, l_y: -0.22 };
    let (next, _) = apply_impact(&s, &Vector3::new(step.l_x, step.l_y, 0.0), 0.0);
    let after = next.alip_state(&params);
    let expected = reset(&before, &step);
    assert!((after.to_vector() - expected.to_vector()).amax() < 1e-12);
}

#[test]
fn disturbance_window() {
    assert!(Disturbance::new(DisturbanceKind::ComForce, Vector3::x(), 1.0, 0.0).is_err());
    let d = Disturbance::new(DisturbanceKind::ComForce, Vector3::new(50.0, 0.0, 0.0), 1.0, 0.1).unwrap();
    assert!(!d.is_active(0.999) && d.is_active(1.0) && d.is_active(1.099) && !d.is_active(1.1));
    let m = Disturbance::new(DisturbanceKind::TorsoMoment, Vector3::z(), 1.05, 0.1).unwrap();
    let (f, mo) = active_wrench(&[d, m], 1.06);
    assert_eq!(f, Vector3::new(50.0, 0.0, 0.0));
    assert_eq!(mo, Vector3::z());
}

fn log_of(samples: Vec<LogSample>) -> EpisodeLog {
    EpisodeLog {
        samples,
        steps: Vec::new(),
        disturbances: Vec::new(),
        failure: None,
        counters: ControllerCounters::default(),
        p_z_des: 0.62,
    }
}

fn sample(t: f64, z: f64, yaw: f64) -> LogSample {
    let mut x = DsrbState::from_srb(SrbState::at_rest(Vector3::new(0.0, 0.0, z), 9.81));
    x.srb.theta.z = yaw;
    LogSample {
        t,
        t_step: 0.0,
        stance: StanceInfo { side: Side::Left, p_stf: Vector3::zeros(), psi_stf: 0.0 },
        swing: Vector3::zeros(),
        x,
        u: DsrbInput::default(),
        plan_id: 0,
        dist_force: Vector3::zeros(),
        dist_moment: Vector3::zeros(),
    }
}

#[test]
fn success_predicate() {
    let cfg = SimConfig::default();
    assert!(matches!(success(&log_of(Vec::new()), &cfg), Err(Error::EmptyLog)));
    let good = log_of((0..10).map(|i| sample(i as f64 * 0.1, 0.62, 0.0)).collect());
    assert!(success(&good, &cfg).unwrap());
    let mut low = good.clone();
    low.samples[5].x.srb.p_com.z = 0.2;
    assert!(!success(&low, &cfg).unwrap());
    let mut tilted = good.clone();
    tilted.samples[3].x.srb.theta.y = 0.6;
    assert!(!success(&tilted, &cfg).unwrap());
    let mut flagged = good;
    flagged.failure = Some(Failure::Reach { t: 0.5 });
    assert!(!success(&flagged, &cfg).unwrap());
}

#[test]
fn yaw_after_recovery_reads_the_settled_sample() {
    let log = log_of((0..=40).map(|i| sample(i as f64 * 0.1, 0.62, i as f64 * 0.01)).collect());
    let yaw = pelvis_yaw_after_recovery(&log, 1.0, 2.5).unwrap();
    assert!((yaw - 0.35).abs() < 1e-12);
    assert!(pelvis_yaw_after_recovery(&log, 2.0, 3.0).is_err());
    assert!(pelvis_yaw_after_recovery(&log_of(Vec::new()), 0.0, 0.0).is_err());
}

#[test]
fn command_profile_is_piecewise_constant() {
    let a = Command { v: [0.0, 0.0], omega: 0.0 };
    let b = Command { v: [0.3, 0.0], omega: 0.0 };
    let p = CommandProfile::new(alloc::vec![(2.0, b), (0.0, a)]).unwrap();
    assert_eq!(p.at(1.99), a);
    assert_eq!(p.at(2.0), b);
    assert!(CommandProfile::new(Vec::new()).is_err());
}

#[test]
fn config_rejects_incommensurate_rates() {
    let cfg = SimConfig { dt_mpc: 0.0025, dt_sim: 0.001, ..SimConfig::default() };
    assert!(cfg.validate().is_err());
    assert!(SimConfig::default().validate().is_ok());
}
