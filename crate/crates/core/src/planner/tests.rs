use super::*;
use crate::model::alip_flow;

fn on_orbit_query(v_cmd: [f64; 2], side: Side, config: &PlannerConfig, params: &ModelParams) -> PlannerQuery {
    let mut q = PlannerQuery { x0: AlipState::default(), t_curr: 0.0, stance_side: side, v_cmd, omega_cmd: 0.0 };
    let refs = build_step_references(&q, config, params).unwrap();
    q.x0 = alip_flow(params, &refs[0].x_des, &AnkleTorque::ZERO, -config.t_des).unwrap();
    q
}

#[test]
fn references_alternate_laterally() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let q = PlannerQuery { x0: AlipState::default(), t_curr: 0.0, stance_side: Side::Left, v_cmd: [0.0, 0.0], omega_cmd: 0.0 };
    let refs = build_step_references(&q, &c, &p).unwrap();
    assert_eq!(refs.len(), 4);
    for pair in refs.windows(2) {
        assert_eq!(pair[0].l_des.l_y, -pair[1].l_des.l_y);
        assert!((pair[0].x_des.p_y + pair[1].x_des.p_y).abs() < 1e-12);
        assert_ne!(pair[0].side, pair[1].side);
    }
    assert_eq!(refs[0].l_des, StepLength::new(0.0, -0.2));
}

#[test]
fn forward_reference_step_length() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let q = PlannerQuery { x0: AlipState::default(), t_curr: 0.0, stance_side: Side::Right, v_cmd: [0.3, 0.0], omega_cmd: 0.0 };
    let refs = build_step_references(&q, &c, &p).unwrap();
    assert!(refs.iter().all(|r| (r.l_des.l_x - 0.12).abs() < 1e-15));
}

#[test]
fn references_are_step_to_step_fixed_points() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let q = PlannerQuery { x0: AlipState::default(), t_curr: 0.0, stance_side: Side::Left, v_cmd: [0.3, 0.1], omega_cmd: 0.0 };
    let refs = build_step_references(&q, &c, &p).unwrap();
    for pair in refs.windows(2) {
        let next = crate::model::s2s(&p, &pair[0].x_des, c.t_des, &AnkleTorque::ZERO, &pair[0].l_des).unwrap();
        assert!((next.to_vector() - pair[1].x_des.to_vector()).amax() < 1e-10);
    }
}

#[test]
fn on_orbit_query_returns_orbit() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    for v in [[0.0, 0.0], [0.3, 0.0], [0.2, -0.05]] {
        let q = on_orbit_query(v, Side::Left, &c, &p);
        let plan = solve_nmpc(&q, &c, &p, None).unwrap();
        assert_eq!(plan.status, PlanStatus::Converged);
        assert!(plan.stats.objective <= 1e-8, "objective {}", plan.stats.objective);
        for k in 0..plan.len() {
            assert!((plan.t[k] - c.t_des).abs() < 1e-6);
        }
    }
}

#[test]
fn plan_satisfies_bounds_and_dynamics() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let mut q = on_orbit_query([0.3, 0.0], Side::Right, &c, &p);
    q.x0.l_y += 4.0;
    q.x0.l_x -= 3.0;
    q.t_curr = 0.12;
    let plan = solve_nmpc(&q, &c, &p, None).unwrap();
    assert!(plan.stats.dynamics_residual <= 1e-6);
    assert!(plan.t[0] >= q.t_curr + c.first_step_margin - 1e-12);
    for k in 0..plan.len() {
        assert!(plan.t[k] >= c.t_lb - 1e-12 && plan.t[k] <= c.t_ub + 1e-12);
        let (lo, hi) = c.l_y_bounds(plan.stance_sides[k].step_sign());
        assert!(plan.l[k].l_y >= lo - 1e-12 && plan.l[k].l_y <= hi + 1e-12);
        assert!(plan.tau[k].tau_y.abs() <= c.tau_ub[0] + 1e-12);
    }
}

#[test]
fn lateral_push_shortens_first_step_and_widens_it() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    // left stance: the swing (right) foot lands towards -y
    let base = on_orbit_query([0.0, 0.0], Side::Left, &c, &p);
    let nominal = solve_nmpc(&base, &c, &p, None).unwrap();
    let mut prev_t = nominal.t[0];
    let mut prev_l = nominal.l[0].l_y.abs();
    for push in [2.0, 4.0, 6.0] {
        let mut q = base;
        q.x0.l_x += push; // positive L_x drives the COM towards -y
        let plan = solve_nmpc(&q, &c, &p, None).unwrap();
        assert!(plan.t[0] <= prev_t + 1e-9, "push {push}: {} vs {prev_t}", plan.t[0]);
        assert!(plan.l[0].l_y.abs() >= prev_l - 1e-9);
        prev_t = plan.t[0];
        prev_l = plan.l[0].l_y.abs();
    }
    assert!(prev_t < nominal.t[0]);
    assert!(prev_l > nominal.l[0].l_y.abs());
}

#[test]
fn clamped_window_and_infeasible_window() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let mut q = on_orbit_query([0.0, 0.0], Side::Left, &c, &p);
    q.t_curr = 0.44;
    let plan = solve_nmpc(&q, &c, &p, None).unwrap();
    assert!(plan.t[0] >= 0.49 - 1e-12);
    q.t_curr = 0.47;
    assert!(matches!(solve_nmpc(&q, &c, &p, None), Err(Error::InfeasibleWindow { .. })));
    q.t_curr = 0.6;
    assert!(matches!(solve_nmpc(&q, &c, &p, None), Err(Error::InfeasibleWindow { .. })));
}

#[test]
fn shift_without_step_is_identity_at_zero_elapsed() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let plan = solve_nmpc(&on_orbit_query([0.3, 0.0], Side::Left, &c, &p), &c, &p, None).unwrap();
    let g = warm_start_shift(&plan, 0.0, false);
    assert_eq!(g.x_pre, plan.x_pre);
    assert_eq!(g.t, plan.t);
    let s = warm_start_shift(&plan, 0.0, true);
    assert_eq!(s.x_pre[0], plan.x_pre[1]);
    assert_eq!(s.l[0], plan.l[1]);
    assert_eq!(s.stance_sides[0], plan.stance_sides[1]);
    assert_eq!(s.stance_sides[3], plan.stance_sides[2]);
}

#[test]
fn warm_start_needs_no_more_iterations() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let mut q = on_orbit_query([0.3, 0.0], Side::Left, &c, &p);
    q.x0.l_y += 2.0;
    let first = solve_nmpc(&q, &c, &p, None).unwrap();
    let mut q2 = q;
    q2.t_curr = 0.025;
    q2.x0 = alip_flow(&p, &q.x0, &first.tau[0], 0.025).unwrap();
    let cold = solve_nmpc(&q2, &c, &p, None).unwrap();
    let warm = solve_nmpc(&q2, &c, &p, Some(&warm_start_shift(&first, 0.025, false))).unwrap();
    assert!(warm.stats.iterations <= cold.stats.iterations);
    assert!((warm.stats.objective - cold.stats.objective).abs() < 1e-6 * (1.0 + cold.stats.objective));
}

#[test]
fn deterministic() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let mut q = on_orbit_query([0.3, 0.0], Side::Left, &c, &p);
    q.x0.p_y += 0.03;
    let a = solve_nmpc(&q, &c, &p, None).unwrap();
    let b = solve_nmpc(&q, &c, &p, None).unwrap();
    assert_eq!(a.x_pre, b.x_pre);
    assert_eq!(a.t, b.t);
}

#[test]
fn nominal_velocity_tracking() {
    let p = ModelParams::default();
    let c = PlannerConfig::default();
    let plan = solve_nmpc(&on_orbit_query([0.3, 0.0], Side::Right, &c, &p), &c, &p, None).unwrap();
    let mean: f64 = (0..plan.len()).map(|k| plan.l[k].l_x / plan.t[k]).sum::<f64>() / plan.len() as f64;
    assert!((mean - 0.3).abs() <= 0.05 * 0.3);
}
