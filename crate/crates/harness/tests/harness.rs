use loco_core::mpc::MpcVariant;
use loco_harness::config::{Axis, HarnessConfig, PeriodMode};
use loco_harness::report::{heatmap_svg, write_file};
use loco_harness::summary::{percentile, relative_improvement, BinStats};
use loco_harness::sweep::{run_pool, run_push_sweep, run_yaw_sweep};

fn small_push() -> HarnessConfig {
    let mut cfg = HarnessConfig::default();
    cfg.push.fx = Axis::new(0.0, 0.0, 0.0);
    cfg.push.fy = Axis::new(0.0, 3000.0, 3000.0);
    cfg.push.phases = vec![0.0, 0.5];
    cfg.push.settle = 0.5;
    cfg.push.recovery = 1.0;
    cfg
}

#[test]
fn config_file_overrides_defaults_and_rejects_unknown_keys() {
    let cfg = HarnessConfig::from_toml(
        "seed = 9\n\n[planner]\nt_des = 0.38\n\n[mpc]\nn_nodes = 8\n\n[push]\nscale = 0.5\nfx = { min = -100.0, max = 100.0, step = 50.0 }\n",
    )
    .unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.planner.t_des, 0.38);
    assert_eq!(cfg.planner.t_lb, 0.25);
    assert_eq!(cfg.mpc.n_nodes, 8);
    assert_eq!(cfg.push.fx.values(), vec![-100.0, -50.0, 0.0, 50.0, 100.0]);
    assert_eq!(cfg.push.phases.len(), 5);
    assert!(HarnessConfig::from_toml("[planner]\nbogus = 1\n").is_err());
    assert!(HarnessConfig::from_toml("[push]\nscale = \"x\"\n").is_err());
}

#[test]
fn fixed_mode_pins_the_period() {
    let cfg = HarnessConfig::default();
    let p = cfg.planner_for(PeriodMode::Fixed);
    assert_eq!((p.t_lb, p.t_ub, p.t_des), (0.35, 0.35, 0.35));
    let a = cfg.planner_for(PeriodMode::Adaptive);
    assert_eq!((a.t_lb, a.t_ub, a.t_des), (0.25, 0.5, 0.4));
    assert_eq!("fixed".parse::<PeriodMode>().unwrap(), PeriodMode::Fixed);
    assert!("sometimes".parse::<PeriodMode>().is_err());
}

#[test]
fn axis_values_are_inclusive() {
    assert_eq!(Axis::new(-600.0, 600.0, 100.0).values().len(), 13);
    assert_eq!(Axis::new(0.0, 400.0, 50.0).values().len(), 9);
    assert_eq!(Axis::new(30.0, 30.0, 0.0).values(), vec![30.0]);
    assert!(Axis::new(1.0, 0.0, 1.0).validate("a").is_err());
}

#[test]
fn invalid_specs_are_rejected_before_running() {
    let mut cfg = small_push();
    cfg.push.phases.clear();
    assert!(run_push_sweep(&cfg, &[PeriodMode::Fixed], 1).is_err());
    let mut cfg = small_push();
    cfg.push.phases = vec![1.2];
    assert!(run_push_sweep(&cfg, &[PeriodMode::Fixed], 1).is_err());
}

#[test]
fn pool_preserves_index_order() {
    let out = run_pool(37, 4, |i| i * i);
    assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
    assert!(run_pool(0, 3, |i| i).is_empty());
}

#[test]
fn statistics_helpers() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(percentile(&v, 0.5), 2.0);
    assert_eq!(percentile(&v, 0.95), 4.0);
    assert_eq!(percentile(&[], 0.5), 0.0);
    let b = BinStats::new(10.0, 20.0, 3, &[1.0, 3.0]);
    assert_eq!(b.mean, Some(2.0));
    assert!((b.std.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(BinStats::new(0.0, 1.0, 2, &[]).mean, None);
    assert_eq!(relative_improvement(100, 136), Some(0.36));
    assert_eq!(relative_improvement(0, 5), None);
}

#[test]
fn push_sweep_zero_cell_succeeds_and_overload_fails() {
    let cfg = small_push();
    let sweep = run_push_sweep(&cfg, &[PeriodMode::Fixed, PeriodMode::Adaptive], 2).unwrap();
    // cells x trials x modes, nothing dropped
    assert_eq!(sweep.trials.len(), 2 * 2 * 2);
    assert_eq!(sweep.grid_csv().lines().count(), 1 + 8);
    for g in &sweep.summary.groups {
        assert_eq!(g.cells.len(), 2);
        assert_eq!(g.cells[0].success_rate, 1.0, "{} zero cell", g.name);
        assert_eq!(g.cells[1].success_rate, 0.0, "{} overload cell", g.name);
        assert!(g.cells.iter().all(|c| (0.0..=1.0).contains(&c.success_rate)));
    }
    assert_eq!(sweep.summary.relative_improvement, Some(0.0));

    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "summary.json", &sweep.summary.to_json().unwrap()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "push-sweep");
    assert_eq!(json["groups"][0]["cells"][0]["success_rate"], 1.0);
    let svg = heatmap_svg(&sweep.summary);
    assert!(svg.starts_with("<svg") && svg.matches("<rect").count() == 4);
}

#[test]
fn push_sweep_is_reproducible_across_worker_counts() {
    let mut cfg = small_push();
    cfg.push.fy = Axis::new(0.0, 150.0, 150.0);
    cfg.sim.estimate_noise_std = 1e-3;
    let a = run_push_sweep(&cfg, &[PeriodMode::Adaptive], 1).unwrap();
    let b = run_push_sweep(&cfg, &[PeriodMode::Adaptive], 3).unwrap();
    assert_eq!(a.grid_csv(), b.grid_csv());
    assert_eq!(a.cells_csv(), b.cells_csv());
}

#[test]
fn yaw_sweep_zero_moment_leaves_heading_and_bins_cover_grid() {
    let mut cfg = HarnessConfig::default();
    cfg.yaw.moment = Axis::new(0.0, 40.0, 40.0);
    cfg.yaw.scale = 0.5;
    cfg.yaw.phases = vec![0.0];
    cfg.yaw.settle = 1.0;
    cfg.yaw.recovery = 1.5;
    let sweep = run_yaw_sweep(&cfg, &[MpcVariant::Srb, MpcVariant::Dsrb], 1).unwrap();
    assert_eq!(sweep.trials.len(), 4);
    for t in sweep.trials.iter().filter(|t| t.moment == 0.0) {
        assert!(t.yaw.unwrap() < 1e-3, "{:?} yaw {:?}", t.variant, t.yaw);
    }
    let srb = sweep.summary.group("srb").unwrap();
    // applied moments 0 and 20 land in bins [0, 10) and [20, 30)
    assert_eq!(srb.bins.iter().map(|b| b.lo).collect::<Vec<_>>(), vec![0.0, 20.0]);
    assert_eq!(sweep.bins_csv().lines().count(), 1 + 4);
}
