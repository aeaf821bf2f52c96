//! Solver timing on the queries of a nominal closed-loop trace.
//!
//! A nominal episode is simulated first. Its log is then replayed: at every
//! planner tick the step planner is solved cold and warm, and at every MPC
//! tick the MPC is rebuilt and solved, each timed in isolation.

use std::time::Instant;

use loco_core::mpc::{solve_mpc, MpcSolution};
use loco_core::planner::{solve_nmpc, warm_start_shift, PlannerQuery, S2SPlan};
use loco_core::refgen::{generate_references, OrbitSpec, RefGenConfig, SwingPose};
use loco_core::sim::{run_episode, PlantState};

use crate::config::{variant_name, HarnessConfig, PeriodMode};
use crate::summary::{RunSummary, SolverTiming, WallStats};
use crate::{Error, Result};

fn ticks(period: f64, dt: f64) -> usize {
    (period / dt).round().max(1.0) as usize
}

fn timing(name: &str, samples: Vec<f64>) -> SolverTiming {
    let total = samples.iter().sum();
    SolverTiming { solver: name.into(), stats: WallStats::from_samples(samples, total) }
}

pub fn run_bench(cfg: &HarnessConfig) -> Result<RunSummary> {
    let spec = &cfg.bench;
    let sc = cfg.walking(spec.variant, PeriodMode::Adaptive, spec.v_cmd, spec.length);
    let log = run_episode(&sc)?;
    if log.failure.is_some() {
        return Err(Error::spec("bench: the nominal trace failed"));
    }
    let cmd = sc.commands.at(0.0);
    let plan_every = ticks(sc.sim.dt_planner, sc.sim.dt_sim);
    let mpc_every = ticks(sc.sim.dt_mpc, sc.sim.dt_sim);
    let orbit = OrbitSpec { t_des: sc.planner.t_des, l_y_offset: sc.planner.l_y_offset };
    let refgen = RefGenConfig { dt: sc.mpc.dt, n_nodes: sc.mpc.n_nodes, ..sc.refgen };

    let (mut cold, mut warm, mut mpc) = (Vec::new(), Vec::new(), Vec::new());
    let mut plan: Option<S2SPlan> = None;
    let mut plan_time = 0.0;
    let mut prev_mpc: Option<MpcSolution> = None;
    let mut prev_side = None;
    for (i, s) in log.samples.iter().enumerate() {
        let state = PlantState { dsrb: s.x, stance: s.stance, swing_pose: SwingPose::at_rest(s.swing, 0.0), t: s.t, t_step: s.t_step };
        let impact = prev_side.is_some_and(|side| side != s.stance.side);
        prev_side = Some(s.stance.side);
        if impact {
            plan = plan.map(|p| warm_start_shift(&p, 0.0, true));
            plan_time = s.t;
        }
        let held = plan.as_ref().is_some_and(|p| p.t[0] - s.t_step < sc.planner.first_step_margin);
        if (impact || i % plan_every == 0) && !held {
            let query = PlannerQuery {
                x0: state.alip_state(&sc.params),
                t_curr: s.t_step,
                stance_side: s.stance.side,
                v_cmd: cmd.v,
                omega_cmd: cmd.omega,
            };
            let guess = plan.as_ref().map(|p| warm_start_shift(p, s.t - plan_time, false));
            let t = Instant::now();
            let cold_result = solve_nmpc(&query, &sc.planner, &sc.params, None);
            let cold_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let result = solve_nmpc(&query, &sc.planner, &sc.params, guess.as_ref());
            // paired samples: only queries that have a warm start
            if guess.is_some() {
                warm.push(t.elapsed().as_secs_f64());
                cold.push(cold_s);
            }
            if let Ok(p) = result.or(cold_result) {
                plan = Some(p);
                plan_time = s.t;
            }
        }
        if i % mpc_every == 0 {
            let Some(p) = &plan else { continue };
            let refs = generate_references(p, &s.stance, s.t_step, &cmd, &orbit, &refgen, &sc.params)?;
            let t = Instant::now();
            let sol = solve_mpc(&s.x, &refs, &sc.mpc, &sc.params, prev_mpc.as_ref());
            mpc.push(t.elapsed().as_secs_f64());
            prev_mpc = sol.ok();
        }
    }
    let mut summary = RunSummary {
        kind: "bench".into(),
        scale: 1.0,
        seed: cfg.seed,
        variant: Some(variant_name(spec.variant).into()),
        solvers: vec![timing("nmpc_cold", cold), timing("nmpc_warm", warm), timing("mpc", mpc)],
        ..RunSummary::default()
    };
    if let (Some(c), Some(w)) = (summary.solver("nmpc_cold"), summary.solver("nmpc_warm")) {
        if c.median_s > 0.0 {
            let ratio = w.median_s / c.median_s;
            summary.metrics.insert("nmpc_warm_cold_median_ratio".into(), ratio);
        }
    }
    Ok(summary)
}
