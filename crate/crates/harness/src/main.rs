use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loco_core::mpc::MpcVariant;
use loco_core::refgen::Command as WalkCommand;
use loco_harness::bench::run_bench;
use loco_harness::config::{parse_variant, HarnessConfig, PeriodMode};
use loco_harness::episode::{run_single, EpisodeSpec};
use loco_harness::report::{heatmap_svg, write_file};
use loco_harness::summary::RunSummary;
use loco_harness::sweep::{run_push_sweep, run_yaw_sweep};
use loco_harness::track::run_tracking;
use loco_harness::Result;
use nalgebra::Vector3;

#[derive(Parser)]
#[command(name = "loco", version, about = "Closed-loop locomotion experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// srb or dsrb. Sweeps that compare variants run only this one.
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<MpcVariant>,
    /// fixed or adaptive. Push sweeps run only this mode.
    #[arg(long, global = true)]
    period: Option<PeriodMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Multiplier on the disturbance grid.
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// COM force pulses while walking in place, fixed vs adaptive period.
    PushSweep,
    /// Torso yaw-moment pulses while walking forward, SRB vs DSRB.
    YawSweep,
    /// Hold, forward-step and turn tracking runs.
    Track,
    /// Planner and MPC solve times on a nominal trace.
    Bench,
    /// One episode with an optional pulse, logged at every plant tick.
    Episode(EpisodeArgs),
}

#[derive(Args)]
struct EpisodeArgs {
    #[arg(long, default_value = "0")]
    id: String,
    #[arg(long, default_value_t = 5.0)]
    length: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    vx: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    vy: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    fx: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    fy: f64,
    /// Torso yaw moment [N m].
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mz: f64,
    #[arg(long, default_value_t = 1.0)]
    t_push: f64,
    #[arg(long, default_value_t = 0.1)]
    duration: f64,
}

fn load(common: &Common) -> Result<HarnessConfig> {
    let mut cfg = match &common.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(v) = common.variant {
        cfg.push.variant = v;
        cfg.track.variant = v;
        cfg.bench.variant = v;
    }
    if let Some(s) = common.scale {
        cfg.push.scale = s;
        cfg.yaw.scale = s;
    }
    Ok(cfg)
}

fn print_summary(summary: &RunSummary) {
    for g in &summary.groups {
        let metric = g.mean_metric.map(|m| format!(" mean {m:.4}")).unwrap_or_default();
        println!("{:>10}: {}/{} succeeded{metric}", g.name, g.successes, g.episodes);
    }
    if let Some(r) = summary.relative_improvement {
        println!("relative improvement {:+.1}%", 100.0 * r);
    }
    for (k, v) in &summary.metrics {
        println!("{k} = {v:.6}");
    }
    for s in &summary.solvers {
        println!("{:>10}: median {:.3} ms, p95 {:.3} ms over {}", s.solver, 1e3 * s.stats.median_s, 1e3 * s.stats.p95_s, s.stats.count);
    }
    if summary.scale != 1.0 {
        println!("disturbance scale {}", summary.scale);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli.common)?;
    let out = &cli.common.out;
    let jobs = cli.common.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = match cli.cmd {
        Cmd::PushSweep => {
            let modes = cli.common.period.map_or(vec![PeriodMode::Fixed, PeriodMode::Adaptive], |m| vec![m]);
            let sweep = run_push_sweep(&cfg, &modes, jobs)?;
            write_file(out, "grid.csv", &sweep.grid_csv())?;
            write_file(out, "cells.csv", &sweep.cells_csv())?;
            write_file(out, "heatmap.svg", &heatmap_svg(&sweep.summary))?;
            sweep.summary
        }
        Cmd::YawSweep => {
            let variants = cli.common.variant.map_or(vec![MpcVariant::Srb, MpcVariant::Dsrb], |v| vec![v]);
            let sweep = run_yaw_sweep(&cfg, &variants, jobs)?;
            write_file(out, "grid.csv", &sweep.grid_csv())?;
            write_file(out, "bins.csv", &sweep.bins_csv())?;
            sweep.summary
        }
        Cmd::Track => run_tracking(&cfg)?,
        Cmd::Bench => run_bench(&cfg)?,
        Cmd::Episode(a) => {
            let spec = EpisodeSpec {
                variant: cli.common.variant.unwrap_or(MpcVariant::Srb),
                period: cli.common.period.unwrap_or(PeriodMode::Adaptive),
                command: WalkCommand { v: [a.vx, a.vy], omega: a.omega },
                length: a.length,
                force: Vector3::new(a.fx, a.fy, 0.0),
                moment: Vector3::new(0.0, 0.0, a.mz),
                t_push: a.t_push,
                duration: a.duration,
            };
            let (log, summary) = run_single(&cfg, &spec)?;
            write_file(out, &format!("episode_{}.csv", a.id), &log.to_csv())?;
            summary
        }
    };
    write_file(out, "summary.json", &summary.to_json()?)?;
    print_summary(&summary);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
