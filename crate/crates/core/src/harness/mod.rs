//! Configured runs: fidelity curves over a parameter list, concatenated
//! sweeps, scaling fits, condition checks and frame diagnostics.

mod config;
mod persist;

pub use config::{
    four_level_example, four_level_explicit, load_config, save_config, CheckSpec, DeltaSpec, Format, OutputSpec,
    Preset, PulseSpec, RunConfig, RunSpec, SystemSpec, Window,
};
pub use persist::{write_curves_csv, write_json, write_populations_csv, write_records_csv, write_scaling_csv};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{check_prop2, check_theorem1, CheckOptions, ConditionReport, Evaluation};
use crate::control::Control;
use crate::error::{Error, Result};
use crate::frames::{verify_lemmas, FrameContext, LemmaOptions, LemmaTable};
use crate::model::sample_system;
use crate::propagator::{distance_to_target, propagate, StateVector, Trajectory};

/// Final outcome of one propagation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub run_id: usize,
    pub alpha: Vec<f64>,
    pub delta_choice: String,
    pub eps1: f64,
    pub eps2: f64,
    pub fidelity: f64,
    /// `sqrt(2 - 2 sqrt(fidelity))`.
    pub distance: f64,
    pub max_norm_drift: f64,
    pub degraded: bool,
    /// Seconds; kept out of the CSV so that it stays reproducible.
    pub wall_time: f64,
}

/// Sampled `|psi_q(s)|^2` of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub run_id: usize,
    pub alpha: Vec<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub s: Vec<f64>,
    pub fid: Vec<f64>,
    pub distance: Vec<f64>,
    pub norm_drift: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub curves: Vec<Curve>,
    pub conditions: ConditionReport,
}

impl SweepOutput {
    pub fn degraded(&self) -> bool {
        self.records.iter().any(|r| r.degraded)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcatOutput {
    pub record: SweepRecord,
    pub s: Vec<f64>,
    /// `populations[i][j] = |psi_j(s_i)|^2`.
    pub populations: Vec<Vec<f64>>,
    /// Slow times at which segments start, after the first.
    pub breakpoints: Vec<f64>,
}

/// Ordinary least squares line through `(ln eps1, ln distance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
    /// False when any run was degraded.
    pub reliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingOutput {
    pub records: Vec<SweepRecord>,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub theorem1: ConditionReport,
    pub prop2: Option<ConditionReport>,
}

impl CheckOutput {
    pub fn holds(&self) -> bool {
        self.theorem1.holds && self.prop2.as_ref().is_none_or(|r| r.holds)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::argument(format!("cannot start {workers} workers: {e}")))
}

/// `slope, intercept, rms residual` of the least-squares line through the points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::argument("a line fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::argument("abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok((slope, intercept, (rss / n).sqrt()))
}

fn check_options(cfg: &RunConfig) -> CheckOptions {
    CheckOptions {
        margin: cfg.check.margin,
        evaluation: match cfg.check.grid {
            Some(per_axis) => Evaluation::Grid { per_axis },
            None => Evaluation::Vertices,
        },
        grid_fallback: Some(101),
    }
}

pub fn run_check(cfg: &RunConfig) -> Result<CheckOutput> {
    let ens = cfg.ensemble()?;
    let (p, q) = cfg.target();
    let opts = check_options(cfg);
    let theorem1 = check_theorem1(&ens, p, q, cfg.pulse.v0, cfg.pulse.v1, &opts)?;
    let prop2 = if cfg.check.prop2 { Some(check_prop2(&ens, p, q, cfg.pulse.v0, cfg.pulse.v1, &opts)?) } else { None };
    Ok(CheckOutput { theorem1, prop2 })
}

struct Job {
    run_id: usize,
    alpha: Vec<f64>,
    label: String,
    choice: crate::model::DeltaChoice,
    eps1: f64,
    eps2: f64,
}

fn jobs(cfg: &RunConfig, scales: &[(f64, f64)], points: &[Vec<f64>]) -> Result<Vec<Job>> {
    let n = cfg.levels()?;
    let mut out = Vec::new();
    for &(eps1, eps2) in scales {
        for (i, alpha) in points.iter().enumerate() {
            for (label, choice) in cfg.delta_choices(n, i)? {
                out.push(Job { run_id: out.len(), alpha: alpha.clone(), label, choice, eps1, eps2 });
            }
        }
    }
    Ok(out)
}

fn run_job(cfg: &RunConfig, job: &Job, ctrl: &dyn Control) -> Result<(SweepRecord, Trajectory)> {
    let start = Instant::now();
    let ens = cfg.ensemble()?;
    let sys = sample_system(&ens, &job.alpha, &job.choice)?;
    let psi0 = StateVector::basis(sys.n(), cfg.initial())?;
    let traj = propagate(&sys, ctrl, &psi0, cfg.step_config())?;
    let q = cfg.target().1;
    let fin = traj.final_state();
    let record = SweepRecord {
        run_id: job.run_id,
        alpha: job.alpha.clone(),
        delta_choice: job.label.clone(),
        eps1: job.eps1,
        eps2: job.eps2,
        fidelity: fin.population(q),
        distance: distance_to_target(fin, q),
        max_norm_drift: traj.max_norm_drift,
        degraded: traj.degraded,
        wall_time: start.elapsed().as_secs_f64(),
    };
    if record.degraded {
        log::warn!("run {} degraded (norm drift {:e})", job.run_id, traj.max_norm_drift);
    }
    Ok((record, traj))
}

fn curve_of(cfg: &RunConfig, job: &Job, traj: &Trajectory) -> Curve {
    let q = cfg.target().1;
    Curve {
        run_id: job.run_id,
        alpha: job.alpha.clone(),
        eps1: job.eps1,
        eps2: job.eps2,
        s: traj.slow_times.clone(),
        fid: traj.states.iter().map(|psi| psi.population(q)).collect(),
        distance: traj.states.iter().map(|psi| distance_to_target(psi, q)).collect(),
        norm_drift: traj.states.iter().map(|psi| (psi.norm() - 1.0).abs()).collect(),
    }
}

fn log_conditions(report: &ConditionReport) {
    for v in &report.violations {
        log::warn!(
            "condition {} fails for levels ({}, {}); running anyway",
            v.condition.label(),
            v.pair.0 + 1,
            v.pair.1 + 1
        );
    }
}

/// Fidelity curves for every parameter point (and delta draw) of `cfg`.
///
/// Condition violations are logged and reported, not fatal.
pub fn run_fid_curves(cfg: &RunConfig, workers: usize) -> Result<SweepOutput> {
    let conditions = run_check(cfg)?.theorem1;
    log_conditions(&conditions);
    let (eps1, eps2) = cfg.scales()?;
    let pulse = cfg.pulse(eps1, eps2)?;
    let jobs = jobs(cfg, &[(eps1, eps2)], &cfg.system.alpha)?;
    let results: Vec<(SweepRecord, Curve)> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|job| run_job(cfg, job, &pulse).map(|(r, traj)| (r, curve_of(cfg, job, &traj))))
            .collect::<Result<_>>()
    })?;
    let (mut records, mut curves): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    records.sort_by_key(|r| r.run_id);
    curves.sort_by_key(|c| c.run_id);
    Ok(SweepOutput { records, curves, conditions })
}

/// Concatenated sweep at the first parameter point, with all populations.
pub fn run_concat(cfg: &RunConfig) -> Result<ConcatOutput> {
    let (eps1, eps2) = cfg.scales()?;
    let ctrl = cfg.concatenated(eps1, eps2)?;
    let job = jobs(cfg, &[(eps1, eps2)], &cfg.system.alpha[..1])?.remove(0);
    let (record, traj) = run_job(cfg, &job, &ctrl)?;
    let n = cfg.levels()?;
    let t_slow = cfg.pulse.t_slow;
    Ok(ConcatOutput {
        record,
        s: traj.slow_times.clone(),
        populations: traj.states.iter().map(|psi| (0..n).map(|j| psi.population(j)).collect()).collect(),
        breakpoints: (1..ctrl.segments().len()).map(|k| k as f64 * t_slow).collect(),
    })
}

/// Final distances along `eps1_list` at the first parameter point, and the
/// log-log slope.
pub fn run_scaling(cfg: &RunConfig, workers: usize) -> Result<ScalingOutput> {
    let scales = cfg.scale_list()?;
    if scales.len() < 2 {
        return Err(Error::config("run.eps1_list", "need at least two values to fit a slope"));
    }
    let first = cfg.delta_choices(cfg.levels()?, 0)?.remove(0);
    let jobs: Vec<Job> = scales
        .iter()
        .enumerate()
        .map(|(run_id, &(eps1, eps2))| Job {
            run_id,
            alpha: cfg.system.alpha[0].clone(),
            label: first.0.clone(),
            choice: first.1.clone(),
            eps1,
            eps2,
        })
        .collect();
    let mut records: Vec<SweepRecord> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let pulse = cfg.pulse(job.eps1, job.eps2)?;
                run_job(cfg, job, &pulse).map(|(r, _)| r)
            })
            .collect::<Result<_>>()
    })?;
    records.sort_by_key(|r| r.run_id);
    let x: Vec<f64> = records.iter().map(|r| r.eps1.ln()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.distance.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, intercept, residual) = fit_line(&x, &y)?;
    let reliable = !records.iter().any(|r| r.degraded);
    if !reliable {
        log::warn!("slope {slope} is unreliable: a run was degraded");
    }
    Ok(ScalingOutput { records, fit: SlopeFit { slope, intercept, residual, reliable } })
}

/// Frame diagnostics along `eps1_list` at the first parameter point.
pub fn run_frames(cfg: &RunConfig, opts: LemmaOptions) -> Result<LemmaTable> {
    let scales = cfg.scale_list()?;
    let ens = cfg.ensemble()?;
    let (label, choice) = cfg.delta_choices(ens.n(), 0)?.remove(0);
    log::info!("frame diagnostics with delta choice {label}");
    let sys = sample_system(&ens, &cfg.system.alpha[0], &choice)?;
    let (p, q) = cfg.target();
    let pulse = cfg.pulse(scales[0].0, scales[0].1)?;
    let ctx = FrameContext::new(&sys, &pulse, p, q)?;
    verify_lemmas(&ctx, &scales, opts)
}

/// Files written for one command.
pub fn output_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    dir.join(format!("{stem}.{ext}"))
}
