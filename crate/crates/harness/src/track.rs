//! Velocity and turn-rate tracking runs.

use std::time::Instant;

use loco_core::refgen::Command;
use loco_core::sim::{run_episode, success, CommandProfile, EpisodeLog};
use nalgebra::Vector2;

use crate::config::{variant_name, HarnessConfig, PeriodMode};
use crate::summary::{GroupSummary, RunSummary, WallStats};
use crate::sweep::Outcome;
use crate::{Error, Result};

/// Mean COM xy over the samples between two impacts.
fn mean_xy(log: &EpisodeLog, from_step: usize, to_step: usize) -> Option<Vector2<f64>> {
    let (t0, t1) = (log.steps.get(from_step)?.t_impact, log.steps.get(to_step)?.t_impact);
    let pts: Vec<_> = log.samples.iter().filter(|s| s.t >= t0 && s.t < t1).map(|s| s.x.srb.p_com.xy()).collect();
    (!pts.is_empty()).then(|| pts.iter().sum::<Vector2<f64>>() / pts.len() as f64)
}

/// Horizontal drift between the first and last full stride while walking in
/// place. Averaging over a stride removes the lateral sway.
pub fn stride_drift(log: &EpisodeLog) -> Option<f64> {
    let n = log.steps.len();
    if n < 5 {
        return None;
    }
    Some((mean_xy(log, n - 3, n - 1)? - mean_xy(log, 0, 2)?).norm())
}

/// Heading rate by a straight line between the settled sample and the end.
pub fn heading_rate(log: &EpisodeLog, t0: f64) -> Option<f64> {
    let (a, b) = (log.sample_at(t0)?, log.samples.last()?);
    (b.t > a.t).then(|| (b.x.srb.theta.z - a.x.srb.theta.z) / (b.t - a.t))
}

fn outcome_of(log: &EpisodeLog, ok: bool, wall_s: f64) -> Outcome {
    Outcome { success: ok, failure: (!ok).then_some("failed"), failure_time: log.failure.map(|_| log.duration()), wall_s }
}

/// Runs the hold, forward-step and turn scenarios and reports the
/// tracking errors.
pub fn run_tracking(cfg: &HarnessConfig) -> Result<RunSummary> {
    let spec = &cfg.track;
    if !(spec.length > spec.settle + 1.0 && spec.settle >= 0.0) {
        return Err(Error::spec("track: length must exceed settle by at least 1 s"));
    }
    let variant = spec.variant;
    let zero = Command::default();
    // the forward command steps up at t = 1 s from walking in place
    let t_step_cmd = 1.0;
    let cases = [
        ("hold", CommandProfile::constant(zero)),
        ("forward", CommandProfile::new(vec![(0.0, zero), (t_step_cmd, Command { v: [spec.v_step, 0.0], omega: 0.0 })])?),
        ("turn", CommandProfile::constant(Command { v: [0.0, 0.0], omega: spec.turn_rate })),
    ];
    let mut summary = RunSummary { kind: "track".into(), scale: 1.0, seed: cfg.seed, variant: Some(variant_name(variant).into()), ..RunSummary::default() };
    let mut walls = Vec::new();
    let start = Instant::now();
    for (name, profile) in cases {
        let sc = cfg.scenario(variant, PeriodMode::Adaptive, profile, spec.length);
        let t = Instant::now();
        let log = run_episode(&sc)?;
        let wall = t.elapsed().as_secs_f64();
        walls.push(wall);
        let ok = success(&log, &sc.sim)?;
        let m = &mut summary.metrics;
        match name {
            "hold" => {
                if let Some(d) = stride_drift(&log) {
                    m.insert("hold_drift_m".into(), d);
                }
            }
            "forward" => {
                let t0 = t_step_cmd + spec.settle;
                if let Ok(v) = log.mean_velocity(t0, spec.length) {
                    m.insert("forward_mean_velocity_x".into(), v.x);
                    m.insert("forward_velocity_error_x".into(), (v.x - spec.v_step).abs());
                    m.insert("forward_velocity_error_y".into(), v.y.abs());
                }
            }
            _ => {
                if let Some(r) = heading_rate(&log, spec.settle) {
                    m.insert("turn_rate".into(), r);
                    m.insert("turn_rate_rel_error".into(), ((r - spec.turn_rate) / spec.turn_rate).abs());
                }
            }
        }
        let o = outcome_of(&log, ok, wall);
        summary.groups.push(GroupSummary::from_outcomes(name, std::iter::once(&o), Vec::new(), Vec::new()));
    }
    summary.wall_time = Some(WallStats::from_samples(walls, start.elapsed().as_secs_f64()));
    Ok(summary)
}
