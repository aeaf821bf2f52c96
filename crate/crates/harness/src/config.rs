//! Harness configuration.
//!
//! The file format is TOML: one `key = value` per line, grouped into one
//! section per module. Every key is optional and falls back to the built-in
//! default; unknown keys are rejected.
//!
//! ```toml
//! [planner]
//! t_des = 0.4
//!
//! [mpc]
//! n_nodes = 10
//!
//! [push]
//! fx = { min = -600.0, max = 600.0, step = 100.0 }
//! scale = 1.0
//! ```

use std::path::Path;
use std::str::FromStr;

use loco_core::model::ModelParams;
use loco_core::mpc::{MpcConfig, MpcVariant};
use loco_core::planner::PlannerConfig;
use loco_core::refgen::{Command, RefGenConfig};
use loco_core::sim::{CommandProfile, Scenario, SimConfig};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Step timing of the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodMode {
    /// `t_lb = t_ub = t_des` at the configured fixed period.
    Fixed,
    /// Period optimized within the planner bounds.
    Adaptive,
}

impl PeriodMode {
    pub fn name(self) -> &'static str {
        match self {
            PeriodMode::Fixed => "fixed",
            PeriodMode::Adaptive => "adaptive",
        }
    }
}

impl FromStr for PeriodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(PeriodMode::Fixed),
            "adaptive" => Ok(PeriodMode::Adaptive),
            _ => Err(Error::spec(format!("unknown period mode '{s}' (fixed|adaptive)"))),
        }
    }
}

/// Parses `srb` or `dsrb`.
pub fn parse_variant(s: &str) -> Result<MpcVariant> {
    match s {
        "srb" => Ok(MpcVariant::Srb),
        "dsrb" => Ok(MpcVariant::Dsrb),
        _ => Err(Error::spec(format!("unknown variant '{s}' (srb|dsrb)"))),
    }
}

pub fn variant_name(v: MpcVariant) -> &'static str {
    match v {
        MpcVariant::Srb => "srb",
        MpcVariant::Dsrb => "dsrb",
    }
}

/// Inclusive range `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub const fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::spec(format!("{name}: needs finite min <= max")));
        }
        if !(self.step > 0.0) && self.min != self.max {
            return Err(Error::spec(format!("{name}: step must be positive")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.min == self.max || !(self.step > 0.0) {
            return vec![self.min];
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

fn check_phases(phases: &[f64]) -> Result<()> {
    if phases.is_empty() {
        return Err(Error::spec("phases: at least one trial is required"));
    }
    if phases.iter().any(|p| !(0.0..1.0).contains(p)) {
        return Err(Error::spec("phases: offsets are fractions of a step in [0, 1)"));
    }
    Ok(())
}

/// Grid of COM force pulses applied while walking in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushSweepSpec {
    pub variant: MpcVariant,
    /// Force grid in newtons before scaling.
    pub fx: Axis,
    pub fy: Axis,
    /// Multiplier on every grid force.
    pub scale: f64,
    pub duration: f64,
    /// One trial per entry, as a fraction of the nominal step period.
    pub phases: Vec<f64>,
    /// Time walked on the nominal orbit before the earliest push.
    pub settle: f64,
    /// Time simulated after the pulse ends.
    pub recovery: f64,
    pub fixed_period: f64,
    pub v_cmd: [f64; 2],
}

impl Default for PushSweepSpec {
    fn default() -> Self {
        Self {
            variant: MpcVariant::Srb,
            fx: Axis::new(-600.0, 600.0, 100.0),
            fy: Axis::new(0.0, 400.0, 50.0),
            scale: 1.0,
            duration: 0.1,
            phases: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            settle: 1.0,
            recovery: 2.0,
            fixed_period: 0.35,
            v_cmd: [0.0, 0.0],
        }
    }
}

impl PushSweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.fx.validate("push.fx")?;
        self.fy.validate("push.fy")?;
        check_phases(&self.phases)?;
        if !(self.scale >= 0.0 && self.duration > 0.0 && self.settle >= 0.0 && self.recovery >= 0.0) {
            return Err(Error::spec("push: scale, settle and recovery must be non-negative and duration positive"));
        }
        if !(self.fixed_period > 0.0) {
            return Err(Error::spec("push.fixed_period must be positive"));
        }
        Ok(())
    }
}

/// Grid of torso yaw-moment pulses applied while walking forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YawSweepSpec {
    /// Moment grid in N m before scaling.
    pub moment: Axis,
    pub scale: f64,
    pub duration: f64,
    pub phases: Vec<f64>,
    pub settle: f64,
    /// Yaw is read this long after the pulse starts.
    pub recovery: f64,
    /// Width of the reporting bins in N m of applied (scaled) moment.
    pub bin_width: f64,
    pub v_cmd: [f64; 2],
}

impl Default for YawSweepSpec {
    fn default() -> Self {
        Self {
            moment: Axis::new(30.0, 150.0, 10.0),
            scale: 0.5,
            duration: 0.05,
            phases: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            settle: 2.0,
            recovery: 3.0,
            bin_width: 10.0,
            v_cmd: [0.3, 0.0],
        }
    }
}

impl YawSweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.moment.validate("yaw.moment")?;
        check_phases(&self.phases)?;
        if !(self.scale >= 0.0 && self.duration > 0.0 && self.settle >= 0.0 && self.recovery >= self.duration) {
            return Err(Error::spec("yaw: invalid scale, duration, settle or recovery"));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::spec("yaw.bin_width must be positive"));
        }
        Ok(())
    }
}

/// Velocity tracking scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSpec {
    pub variant: MpcVariant,
    pub length: f64,
    /// Metrics ignore the first `settle` seconds.
    pub settle: f64,
    pub v_step: f64,
    pub turn_rate: f64,
}

impl Default for TrackSpec {
    fn default() -> Self {
        Self { variant: MpcVariant::Srb, length: 10.0, settle: 2.0, v_step: 0.3, turn_rate: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub variant: MpcVariant,
    /// Length of the nominal trace whose solver queries are replayed.
    pub length: f64,
    pub v_cmd: [f64; 2],
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self { variant: MpcVariant::Srb, length: 10.0, v_cmd: [0.3, 0.0] }
    }
}

/// Everything the harness reads from a config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub model: ModelParams,
    /// Planner settings of the adaptive mode; the fixed mode pins the period.
    pub planner: PlannerConfig,
    pub mpc: MpcConfig,
    pub refgen: RefGenConfig,
    pub sim: SimConfig,
    pub push: PushSweepSpec,
    pub yaw: YawSweepSpec,
    pub track: TrackSpec,
    pub bench: BenchSpec,
    pub seed: u64,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn planner_for(&self, mode: PeriodMode) -> PlannerConfig {
        match mode {
            PeriodMode::Adaptive => self.planner,
            PeriodMode::Fixed => {
                let t = self.push.fixed_period;
                PlannerConfig { t_lb: t, t_ub: t, t_des: t, ..self.planner }
            }
        }
    }

    /// Closed-loop scenario with this configuration and no disturbances.
    pub fn scenario(&self, variant: MpcVariant, mode: PeriodMode, commands: CommandProfile, length: f64) -> Scenario {
        Scenario {
            params: self.model,
            planner: self.planner_for(mode),
            mpc: MpcConfig { variant, ..self.mpc },
            refgen: self.refgen,
            sim: SimConfig { episode_length: length, ..self.sim },
            commands,
            disturbances: Vec::new(),
            seed: self.seed,
        }
    }

    pub fn walking(&self, variant: MpcVariant, mode: PeriodMode, v: [f64; 2], length: f64) -> Scenario {
        self.scenario(variant, mode, CommandProfile::constant(Command { v, omega: 0.0 }), length)
    }
}
