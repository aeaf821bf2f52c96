//! Disturbance sweeps: COM pushes while walking in place and torso yaw
//! moments while walking forward.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use loco_core::mpc::MpcVariant;
use loco_core::sim::{pelvis_yaw_after_recovery, run_episode, success, Disturbance, DisturbanceKind, Failure, Scenario};
use nalgebra::Vector3;
use serde::Serialize;

use crate::config::{variant_name, HarnessConfig, PeriodMode};
use crate::summary::{relative_improvement, BinStats, CellStats, GroupSummary, RunSummary, WallStats};
use crate::Result;

/// Runs `f(0..n)` on up to `jobs` threads and returns the results in index
/// order.
pub fn run_pool<T: Send, F: Fn(usize) -> T + Sync>(n: usize, jobs: usize, f: F) -> Vec<T> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.expect("every index is visited")).collect()
}

/// Outcome of one disturbed episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub success: bool,
    /// Failure kind, `error` when the episode could not run.
    pub failure: Option<&'static str>,
    pub failure_time: Option<f64>,
    pub wall_s: f64,
}

fn failure_label(f: &Failure) -> (&'static str, f64) {
    match *f {
        Failure::Tilt { t } => ("tilt", t),
        Failure::Height { t } => ("height", t),
        Failure::Singularity { t } => ("singularity", t),
        Failure::Reach { t } => ("reach", t),
        Failure::Controller { t } => ("controller", t),
    }
}

/// Runs a scenario; errors count as failures. Also returns `probe(log)` on
/// success.
fn run_outcome<R>(sc: &Scenario, probe: impl Fn(&loco_core::sim::EpisodeLog) -> Option<R>) -> (Outcome, Option<R>) {
    let start = Instant::now();
    let result = run_episode(sc);
    let wall_s = start.elapsed().as_secs_f64();
    match result {
        Ok(log) => {
            let ok = success(&log, &sc.sim).unwrap_or(false);
            let (failure, failure_time) = match &log.failure {
                Some(f) => {
                    let (k, t) = failure_label(f);
                    (Some(k), Some(t))
                }
                None if !ok => (Some("limits"), None),
                None => (None, None),
            };
            let value = if ok { probe(&log) } else { None };
            (Outcome { success: ok, failure, failure_time, wall_s }, value)
        }
        Err(_) => (Outcome { success: false, failure: Some("error"), failure_time: None, wall_s }, None),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushTrial {
    pub mode: PeriodMode,
    pub fx: f64,
    pub fy: f64,
    pub trial: usize,
    pub phase: f64,
    pub t_push: f64,
    pub outcome: Outcome,
}

pub const PUSH_CSV_HEADER: &str = "mode,fx,fy,trial,phase,t_push,success,failure,failure_t";

impl PushTrial {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.mode.name(),
            self.fx,
            self.fy,
            self.trial,
            self.phase,
            self.t_push,
            u8::from(self.outcome.success),
            self.outcome.failure.unwrap_or(""),
            opt(self.outcome.failure_time)
        )
    }
}

#[derive(Debug, Clone)]
pub struct PushSweep {
    pub trials: Vec<PushTrial>,
    pub summary: RunSummary,
}

impl PushSweep {
    /// One row per episode: cells x trials x modes.
    pub fn grid_csv(&self) -> String {
        let mut s = String::from(PUSH_CSV_HEADER);
        s.push('\n');
        for t in &self.trials {
            s += &t.csv_row();
            s.push('\n');
        }
        s
    }

    /// Heatmap table, one row per cell and mode.
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("mode,fx,fy,successes,trials,success_rate\n");
        for g in &self.summary.groups {
            for c in &g.cells {
                s += &format!("{},{},{},{},{},{}\n", g.name, c.fx, c.fy, c.successes, c.trials, c.success_rate);
            }
        }
        s
    }
}

/// Pulse start for a trial: on the orbit for `settle` seconds, then offset
/// by `phase` nominal periods.
pub fn push_time(settle: f64, phase: f64, period: f64) -> f64 {
    settle + phase * period
}

fn push_scenario(cfg: &HarnessConfig, mode: PeriodMode, fx: f64, fy: f64, phase: f64, index: usize) -> Result<(Scenario, f64)> {
    let spec = &cfg.push;
    let period = cfg.planner_for(mode).t_des;
    let t_push = push_time(spec.settle, phase, period);
    let mut sc = cfg.walking(spec.variant, mode, spec.v_cmd, t_push + spec.duration + spec.recovery);
    sc.seed = cfg.seed.wrapping_add(index as u64);
    let force = Vector3::new(fx, fy, 0.0) * spec.scale;
    sc.disturbances.push(Disturbance::new(DisturbanceKind::ComForce, force, t_push, spec.duration)?);
    Ok((sc, t_push))
}

/// Push-recovery sweep over the force grid for each period mode.
pub fn run_push_sweep(cfg: &HarnessConfig, modes: &[PeriodMode], jobs: usize) -> Result<PushSweep> {
    let spec = &cfg.push;
    spec.validate()?;
    let (xs, ys) = (spec.fx.values(), spec.fy.values());
    let mut jobs_list = Vec::new();
    for &mode in modes {
        for &fx in &xs {
            for &fy in &ys {
                for (trial, &phase) in spec.phases.iter().enumerate() {
                    jobs_list.push((mode, fx, fy, trial, phase));
                }
            }
        }
    }
    // scenarios are built up front so spec errors surface before any run
    let scenarios = jobs_list
        .iter()
        .enumerate()
        .map(|(i, &(mode, fx, fy, _, phase))| push_scenario(cfg, mode, fx, fy, phase, i))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let outcomes = run_pool(scenarios.len(), jobs, |i| run_outcome(&scenarios[i].0, |_| Some(())).0);
    let total = start.elapsed().as_secs_f64();

    let trials: Vec<PushTrial> = jobs_list
        .iter()
        .zip(&scenarios)
        .zip(outcomes)
        .map(|((&(mode, fx, fy, trial, phase), (_, t_push)), outcome)| PushTrial {
            mode,
            fx: fx * spec.scale,
            fy: fy * spec.scale,
            trial,
            phase,
            t_push: *t_push,
            outcome,
        })
        .collect();

    let groups: Vec<GroupSummary> = modes
        .iter()
        .map(|&mode| {
            let mine: Vec<&PushTrial> = trials.iter().filter(|t| t.mode == mode).collect();
            let cells = xs
                .iter()
                .flat_map(|&fx| ys.iter().map(move |&fy| (fx * spec.scale, fy * spec.scale)))
                .map(|(fx, fy)| {
                    let here: Vec<_> = mine.iter().filter(|t| t.fx == fx && t.fy == fy).collect();
                    CellStats::new(fx, fy, here.iter().filter(|t| t.outcome.success).count(), here.len())
                })
                .collect();
            GroupSummary::from_outcomes(mode.name(), mine.iter().map(|t| &t.outcome), cells, Vec::new())
        })
        .collect();
    let improvement = match (groups.iter().find(|g| g.name == "fixed"), groups.iter().find(|g| g.name == "adaptive")) {
        (Some(f), Some(a)) => relative_improvement(f.successes, a.successes),
        _ => None,
    };
    let wall = WallStats::from_samples(trials.iter().map(|t| t.outcome.wall_s).collect(), total);
    let summary = RunSummary {
        kind: "push-sweep".into(),
        scale: spec.scale,
        seed: cfg.seed,
        variant: Some(variant_name(spec.variant).into()),
        groups,
        relative_improvement: improvement,
        wall_time: Some(wall),
        ..RunSummary::default()
    };
    Ok(PushSweep { trials, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YawTrial {
    pub variant: MpcVariant,
    /// Applied (scaled) moment.
    pub moment: f64,
    pub trial: usize,
    pub phase: f64,
    pub t_push: f64,
    /// |pelvis yaw| after recovery; `None` when the episode failed.
    pub yaw: Option<f64>,
    pub outcome: Outcome,
}

pub const YAW_CSV_HEADER: &str = "variant,moment,trial,phase,t_push,success,abs_yaw,failure,failure_t";

#[derive(Debug, Clone)]
pub struct YawSweep {
    pub trials: Vec<YawTrial>,
    pub summary: RunSummary,
}

impl YawSweep {
    pub fn grid_csv(&self) -> String {
        let mut s = String::from(YAW_CSV_HEADER);
        s.push('\n');
        for t in &self.trials {
            s += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                variant_name(t.variant),
                t.moment,
                t.trial,
                t.phase,
                t.t_push,
                u8::from(t.outcome.success),
                opt(t.yaw),
                t.outcome.failure.unwrap_or(""),
                opt(t.outcome.failure_time)
            );
        }
        s
    }

    /// Per-bin statistics, one row per bin and variant.
    pub fn bins_csv(&self) -> String {
        let mut s = String::from("variant,bin_lo,bin_hi,episodes,successes,mean_abs_yaw,std_abs_yaw\n");
        for g in &self.summary.groups {
            for b in &g.bins {
                s += &format!(
                    "{},{},{},{},{},{},{}\n",
                    g.name,
                    b.lo,
                    b.hi,
                    b.episodes,
                    b.successes,
                    opt(b.mean),
                    opt(b.std)
                );
            }
        }
        s
    }
}

/// Yaw-moment sweep for each controller variant while walking forward.
pub fn run_yaw_sweep(cfg: &HarnessConfig, variants: &[MpcVariant], jobs: usize) -> Result<YawSweep> {
    let spec = &cfg.yaw;
    spec.validate()?;
    let period = cfg.planner.t_des;
    let mut plan = Vec::new();
    for &variant in variants {
        for m in spec.moment.values() {
            for (trial, &phase) in spec.phases.iter().enumerate() {
                plan.push((variant, m * spec.scale, trial, phase));
            }
        }
    }
    let dt = cfg.sim.dt_sim;
    let scenarios = plan
        .iter()
        .enumerate()
        .map(|(i, &(variant, m, _, phase))| {
            let t_push = push_time(spec.settle, phase, period);
            let mut sc = cfg.walking(variant, PeriodMode::Adaptive, spec.v_cmd, t_push + spec.recovery + 2.0 * dt);
            sc.seed = cfg.seed.wrapping_add(i as u64);
            sc.disturbances.push(Disturbance::new(DisturbanceKind::TorsoMoment, Vector3::new(0.0, 0.0, m), t_push, spec.duration)?);
            Ok((sc, t_push))
        })
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let results = run_pool(scenarios.len(), jobs, |i| {
        let (sc, t_push) = &scenarios[i];
        run_outcome(sc, |log| pelvis_yaw_after_recovery(log, *t_push, spec.recovery).ok().map(f64::abs))
    });
    let total = start.elapsed().as_secs_f64();
    let trials: Vec<YawTrial> = plan
        .iter()
        .zip(&scenarios)
        .zip(results)
        .map(|((&(variant, moment, trial, phase), (_, t_push)), (outcome, yaw))| YawTrial {
            variant,
            moment,
            trial,
            phase,
            t_push: *t_push,
            yaw,
            outcome,
        })
        .collect();

    let w = spec.bin_width;
    let bin_of = |m: f64| (m / w + 1e-9).floor() as i64;
    let mut bin_ids: Vec<i64> = trials.iter().map(|t| bin_of(t.moment)).collect();
    bin_ids.sort_unstable();
    bin_ids.dedup();
    let groups: Vec<GroupSummary> = variants
        .iter()
        .map(|&variant| {
            let mine: Vec<&YawTrial> = trials.iter().filter(|t| t.variant == variant).collect();
            let bins = bin_ids
                .iter()
                .map(|&b| {
                    let here: Vec<_> = mine.iter().filter(|t| bin_of(t.moment) == b).collect();
                    let yaws: Vec<f64> = here.iter().filter_map(|t| t.yaw).collect();
                    BinStats::new(b as f64 * w, (b + 1) as f64 * w, here.len(), &yaws)
                })
                .collect();
            let yaws: Vec<f64> = mine.iter().filter_map(|t| t.yaw).collect();
            let mut g = GroupSummary::from_outcomes(variant_name(variant), mine.iter().map(|t| &t.outcome), Vec::new(), bins);
            g.mean_metric = crate::summary::mean(&yaws);
            g
        })
        .collect();
    let mut summary = RunSummary {
        kind: "yaw-sweep".into(),
        scale: spec.scale,
        seed: cfg.seed,
        groups,
        wall_time: Some(WallStats::from_samples(trials.iter().map(|t| t.outcome.wall_s).collect(), total)),
        ..RunSummary::default()
    };
    if let (Some(srb), Some(dsrb)) = (summary.group("srb"), summary.group("dsrb")) {
        let pairs: Vec<(f64, f64)> =
            srb.bins.iter().zip(&dsrb.bins).filter_map(|(a, b)| Some((a.mean?, b.mean?))).collect();
        let lower = pairs.iter().filter(|(s, d)| d < s).count();
        if !pairs.is_empty() {
            summary.metrics.insert("dsrb_lower_bin_fraction".into(), lower as f64 / pairs.len() as f64);
        }
    }
    Ok(YawSweep { trials, summary })
}
