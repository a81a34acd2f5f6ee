//! Parameter sweeps. Entries run concurrently; results are collected in
//! input order so the outputs do not depend on scheduling.

use std::fmt::Write as _;

use dinls::bounds::{BoundsReport, TimeBound};
use dinls::initdata::DataRecipe;
use dinls::model::ModelParams;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::Check;
use crate::config::{ConfigError, ExperimentConfig, Kind, SweepAxis, SweepSection};
use crate::experiment::{lifespan_check, lifespan_norm, run_experiment, Artifacts, RunError, Summary};

pub const TABLE_HEADER: &str = "value,outcome,t_blow,bound,margin,pass";

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// Outcome label, or "error".
    pub outcome: String,
    pub t_blow: Option<f64>,
    /// Blow-up upper bound or life-span lower bound, depending on the base
    /// experiment. Infinite bounds serialize as null.
    pub bound: Option<f64>,
    /// Signed distance to the bound; positive means consistent.
    pub margin: Option<f64>,
    pub pass: bool,
    pub calibration: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    /// Largest C whose bound is still met by every calibration run.
    pub c: f64,
    /// Per calibration value, the smallest C whose bound falls below the
    /// measured blow-up time.
    pub per_run: Vec<(f64, f64)>,
    /// Re a above which the calibrated bound is infinite, for the base data.
    pub damping_threshold: Option<f64>,
    pub held_out: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub base: Kind,
    pub rows: Vec<SweepRow>,
    pub calibration: Option<Calibration>,
}

struct Entry {
    value: f64,
    calibration: bool,
    result: Result<(Artifacts, ModelParams, f64), String>,
}

/// Copy of `cfg` with the base kind and the swept parameter set to `value`.
pub fn entry_config(cfg: &ExperimentConfig, sw: &SweepSection, value: f64) -> Result<ExperimentConfig, ConfigError> {
    let mut c = cfg.clone();
    c.experiment.kind = sw.base;
    c.sweep = None;
    match sw.axis {
        SweepAxis::A => {
            c.model.a = value;
            c.model.gamma = None;
        }
        SweepAxis::Gamma => {
            c.model.a = 0.0;
            c.model.gamma = Some(value);
        }
        SweepAxis::Alpha => c.model.alpha = value,
        SweepAxis::B => c.model.b = value,
        SweepAxis::Amplitude => match c.data.as_mut() {
            Some(DataRecipe::Gaussian { amplitude, .. }) | Some(DataRecipe::ChirpedBump { amplitude, .. }) => {
                *amplitude = value
            }
            Some(DataRecipe::ScaledLambda { factor, .. }) => *factor = value,
            _ => {
                return Err(ConfigError::Invalid {
                    key: "sweep.axis".into(),
                    msg: "amplitude sweeps need gaussian, chirped_bump or scaled_lambda data".into(),
                })
            }
        },
    }
    Ok(c)
}

fn run_entry(cfg: &ExperimentConfig, sw: &SweepSection, value: f64) -> Result<(Artifacts, ModelParams, f64), String> {
    let c = entry_config(cfg, sw, value).map_err(|e| e.to_string())?;
    let p = c.params().map_err(|e| e.to_string())?;
    let art = run_experiment(&c).map_err(|e: RunError| e.to_string())?;
    let norm = art
        .summary
        .initial_data
        .as_ref()
        .map(|d| lifespan_norm(&p, d))
        .unwrap_or(f64::NAN);
    Ok((art, p, norm))
}

fn lower_bound(p: &ModelParams, norm: f64, c: f64) -> Option<TimeBound> {
    BoundsReport::evaluate(p, norm, None, c).lifespan_lower
}

/// Smallest C with lower(C) ≤ t_blow, by bisection on log C.
fn minimal_c(p: &ModelParams, norm: f64, t_blow: f64) -> Option<f64> {
    let below = |c: f64| lower_bound(p, norm, c).is_some_and(|t| t.as_f64() <= t_blow);
    let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
    if !below(hi.exp()) {
        return None;
    }
    if below(lo.exp()) {
        return Some(lo.exp());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Some(hi.exp())
}

fn row_from(entry: &Entry, base: Kind, c_override: Option<f64>) -> SweepRow {
    let mut row = SweepRow {
        value: entry.value,
        outcome: "error".into(),
        t_blow: None,
        bound: None,
        margin: None,
        pass: false,
        calibration: entry.calibration,
        error: None,
        checks: Vec::new(),
    };
    let (art, p, norm) = match &entry.result {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.clone());
            return row;
        }
    };
    let s = &art.summary;
    row.outcome = s.outcome.as_ref().map(|o| o.label().to_string()).unwrap_or_default();
    row.t_blow = s.t_blow;
    row.checks = s.checks.clone();
    row.pass = s.pass;
    match base {
        Kind::BlowupVerify => {
            row.bound = s.bounds.as_ref().and_then(|b| b.blowup_upper);
            row.margin = row.bound.zip(row.t_blow).map(|(b, t)| b - t);
        }
        Kind::LifespanVerify => {
            let lower = match c_override {
                Some(c) => lower_bound(p, *norm, c),
                None => s.bounds.as_ref().and_then(|b| b.lifespan_lower),
            };
            row.bound = lower.map(|t| t.as_f64());
            row.margin = row.bound.zip(row.t_blow).map(|(b, t)| t - b);
            if let (Some(c), Some(traj)) = (c_override, &art.trajectory) {
                let mut bounds = s.bounds.clone().expect("dynamic runs report bounds");
                bounds.lifespan_lower = lower;
                bounds.calibration_c = c;
                let check = lifespan_check(traj, &bounds);
                row.pass = check.pass;
                row.checks.retain(|ch| ch.name != "lifespan");
                row.checks.push(check);
            }
        }
        _ => {}
    }
    row
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    run_sweep_with_jobs(cfg, 1)
}

pub fn run_sweep_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<Artifacts, RunError> {
    let sw = cfg.sweep.as_ref().expect("validated");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ConfigError::Parse(format!("thread pool: {e}")))?;
    let cal_set = |v: f64| sw.calibrate && (sw.calibration_values.is_empty() || sw.calibration_values.contains(&v));
    let entries: Vec<Entry> = pool.install(|| {
        sw.values
            .par_iter()
            .map(|&value| Entry {
                value,
                calibration: cal_set(value),
                result: run_entry(cfg, sw, value),
            })
            .collect()
    });

    let mut summary = Summary::empty(cfg);
    let mut checks = Vec::new();
    let mut calibration = None;
    if sw.calibrate {
        if sw.base != Kind::LifespanVerify {
            return Err(ConfigError::Invalid {
                key: "sweep.calibrate".into(),
                msg: "calibration needs base = \"lifespan-verify\"".into(),
            }
            .into());
        }
        let mut per_run = Vec::new();
        for e in entries.iter().filter(|e| e.calibration) {
            if let Ok((art, p, norm)) = &e.result {
                if let Some(t) = art.summary.t_blow {
                    match minimal_c(p, *norm, t) {
                        Some(c) => per_run.push((e.value, c)),
                        None => summary.warnings.push(format!("value {}: no C reproduces t_blow {t}", e.value)),
                    }
                }
            }
        }
        let c = per_run.iter().map(|&(_, c)| c).fold(f64::NAN, f64::max);
        if per_run.is_empty() {
            checks.push(Check::flag("calibration", false, "no calibration run blew up"));
        } else {
            let base_cfg = entry_config(cfg, sw, sw.values[0])?;
            let p0 = base_cfg.params()?;
            let threshold = entries.iter().find_map(|e| e.result.as_ref().ok()).and_then(|(_, _, norm)| {
                let b = BoundsReport::evaluate(&p0, *norm, None, c);
                b.damping_threshold_global
            });
            calibration = Some(Calibration {
                c,
                per_run,
                damping_threshold: threshold,
                held_out: entries.iter().filter(|e| !e.calibration).count(),
            });
        }
    }
    let c_override = calibration.as_ref().map(|c| c.c);
    let rows: Vec<SweepRow> = entries.iter().map(|e| row_from(e, sw.base, c_override)).collect();
    if let Some(cal) = &calibration {
        let held: Vec<&SweepRow> = rows.iter().filter(|r| !r.calibration).collect();
        let ok = held.iter().all(|r| r.pass);
        checks.push(Check::flag(
            "calibration",
            ok,
            format!("C = {} validated on {} held-out values", cal.c, held.len()),
        ));
    }
    let table = sweep_table(&rows);
    summary.sweep = Some(SweepSummary {
        axis: sw.axis,
        base: sw.base,
        rows,
        calibration,
    });
    // Every entry counts; a run that errored or failed fails the sweep.
    let rows_ok = summary.sweep.as_ref().unwrap().rows.iter().all(|r| r.pass);
    if !rows_ok {
        let failed: Vec<String> = summary
            .sweep
            .as_ref()
            .unwrap()
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.value.to_string())
            .collect();
        checks.push(Check::flag("sweep_entries", false, format!("failed values: {}", failed.join(", "))));
    }
    summary.checks = checks;
    Ok(Artifacts {
        summary: summary.finish(),
        csv: None,
        profile: None,
        table: Some(table),
        trajectory: None,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{},{},{},{},{}",
            r.value,
            r.outcome,
            opt(r.t_blow),
            opt(r.bound),
            opt(r.margin),
            r.pass
        );
    }
    out
}
