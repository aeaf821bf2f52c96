//! A single configurable episode, logged in full.

use loco_core::mpc::MpcVariant;
use loco_core::refgen::Command;
use loco_core::sim::{pelvis_yaw_after_recovery, run_episode, success, CommandProfile, Disturbance, DisturbanceKind, EpisodeLog};
use nalgebra::Vector3;

use crate::config::{variant_name, HarnessConfig, PeriodMode};
use crate::summary::{GroupSummary, RunSummary};
use crate::sweep::Outcome;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub variant: MpcVariant,
    pub period: PeriodMode,
    pub command: Command,
    pub length: f64,
    /// COM force pulse.
    pub force: Vector3<f64>,
    /// Torso moment pulse.
    pub moment: Vector3<f64>,
    pub t_push: f64,
    pub duration: f64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            variant: MpcVariant::Srb,
            period: PeriodMode::Adaptive,
            command: Command::default(),
            length: 5.0,
            force: Vector3::zeros(),
            moment: Vector3::zeros(),
            t_push: 1.0,
            duration: 0.1,
        }
    }
}

pub fn run_single(cfg: &HarnessConfig, spec: &EpisodeSpec) -> Result<(EpisodeLog, RunSummary)> {
    let mut sc = cfg.scenario(spec.variant, spec.period, CommandProfile::constant(spec.command), spec.length);
    if spec.force != Vector3::zeros() {
        sc.disturbances.push(Disturbance::new(DisturbanceKind::ComForce, spec.force, spec.t_push, spec.duration)?);
    }
    if spec.moment != Vector3::zeros() {
        sc.disturbances.push(Disturbance::new(DisturbanceKind::TorsoMoment, spec.moment, spec.t_push, spec.duration)?);
    }
    let start = std::time::Instant::now();
    let log = run_episode(&sc)?;
    let ok = success(&log, &sc.sim)?;
    let outcome = Outcome { success: ok, failure: (!ok).then_some("failed"), failure_time: None, wall_s: start.elapsed().as_secs_f64() };
    let mut summary = RunSummary {
        kind: "episode".into(),
        scale: 1.0,
        seed: cfg.seed,
        variant: Some(variant_name(spec.variant).into()),
        groups: vec![GroupSummary::from_outcomes(spec.period.name(), std::iter::once(&outcome), Vec::new(), Vec::new())],
        ..RunSummary::default()
    };
    let m = &mut summary.metrics;
    m.insert("duration_s".into(), log.duration());
    m.insert("steps".into(), log.steps.len() as f64);
    if let Some(yaw) = log.final_yaw() {
        m.insert("final_yaw".into(), yaw);
    }
    if let Ok(yaw) = pelvis_yaw_after_recovery(&log, spec.t_push, (spec.length - spec.t_push).min(3.0)) {
        m.insert("yaw_after_recovery".into(), yaw);
    }
    if let Some(mean) = crate::summary::mean(&log.steps.iter().skip(1).map(|s| s.period).collect::<Vec<_>>()) {
        m.insert("mean_step_period_s".into(), mean);
    }
    Ok((log, summary))
}
