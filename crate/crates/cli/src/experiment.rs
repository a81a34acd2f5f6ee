//! One experiment: build data, run the propagator, evaluate bounds and
//! checks, and render the artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use dinls::bounds::{BoundsReport, TimeBound};
use dinls::dynamics::{run, Outcome, Trajectory};
use dinls::functionals::{barrier_g, max_residuals, ode_residuals, VirialData};
use dinls::groundstate::{q_mass, solve_ground_state, RadialProfile};
use dinls::initdata::BuiltData;
use dinls::model::{self, ModelParams, RegimeReport};
use dinls::scattering::{kappa_monitor, scattering_state, DecayFit, KappaMonitor, ScatterReport, Verdict};
use dinls::Grid;
use serde::Serialize;

use crate::checks::{Check, Selection};
use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::sweep::{run_sweep_with_jobs, SweepSummary};

pub const CSV_HEADER: &str =
    "t,mass_u,energy_u,kinetic_K,H,variance_I,virial_V,pohozaev_P,grad_sq,sup_norm,weighted_pot,boundary_frac,dt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] dinls::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateSummary {
    pub dim: usize,
    pub b: f64,
    pub alpha: f64,
    pub q0: f64,
    pub mass: f64,
    pub q_norm: f64,
    pub q0_refined: f64,
    pub max_residual: f64,
    pub matched_radius: f64,
    /// μ^{−1/α}‖Q‖₂ for the configured μ, when μ > 0.
    pub mass_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub pass: bool,
    pub outcome: Option<Outcome>,
    pub t_blow: Option<f64>,
    pub final_time: Option<f64>,
    pub steps: Option<usize>,
    pub regimes: Option<RegimeReport>,
    pub initial_data: Option<BuiltData>,
    pub virial_data: Option<VirialData>,
    pub bounds: Option<BoundsReport>,
    pub scatter: Option<ScatterReport>,
    pub decay_fit: Option<DecayFit>,
    pub kappa_monitor: Option<KappaMonitor>,
    pub groundstate: Option<GroundStateSummary>,
    pub sweep: Option<SweepSummary>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub config: serde_json::Value,
}

impl Summary {
    pub(crate) fn empty(cfg: &ExperimentConfig) -> Summary {
        Summary {
            experiment: cfg.experiment.kind.name().into(),
            pass: false,
            outcome: None,
            t_blow: None,
            final_time: None,
            steps: None,
            regimes: None,
            initial_data: None,
            virial_data: None,
            bounds: None,
            scatter: None,
            decay_fit: None,
            kappa_monitor: None,
            groundstate: None,
            sweep: None,
            checks: Vec::new(),
            warnings: Vec::new(),
            config: serde_json::to_value(cfg).expect("config serializes"),
        }
    }

    pub(crate) fn finish(mut self) -> Summary {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Everything an experiment writes.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub summary: Summary,
    pub csv: Option<String>,
    pub profile: Option<String>,
    pub table: Option<String>,
    /// Trajectory, kept for callers that post-process in memory.
    pub trajectory: Option<Arc<Trajectory>>,
}

pub fn diagnostics_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &traj.records {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.t,
            r.mass_u,
            r.energy_u,
            r.kinetic_k,
            r.h,
            r.variance_i,
            r.virial_v,
            r.pohozaev_p,
            r.grad_sq,
            r.sup_norm,
            r.weighted_pot,
            r.boundary_frac,
            r.dt
        );
    }
    out
}

const SIMULATE_CHECKS: &[&str] = &["mass_law", "h_drift", "virial_residual", "gradient_bound", "domain"];
const BLOWUP_CHECKS: &[&str] = &["blowup_bound", "barrier"];
const LIFESPAN_CHECKS: &[&str] = &["lifespan"];
const SCATTER_CHECKS: &[&str] = &["scatters", "decay_rate", "domain"];
const GROUNDSTATE_CHECKS: &[&str] = &["gs_residual", "gs_shape", "gs_refinement", "gs_oracle"];

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    run_experiment_with_jobs(cfg, 1)
}

/// As [`run_experiment`]; sweeps run up to `jobs` entries at once.
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<Artifacts, RunError> {
    cfg.validate()?;
    match cfg.experiment.kind {
        Kind::Groundstate => groundstate(cfg),
        Kind::Sweep => run_sweep_with_jobs(cfg, jobs),
        _ => dynamic(cfg),
    }
}

/// ‖u0‖ in the norm the life-span bound is stated in.
pub fn lifespan_norm(p: &ModelParams, data: &BuiltData) -> f64 {
    match (p.dim, p.s) {
        (2, 1) => data.h1_norm,
        (_, 1) => (data.h1_norm.powi(2) - data.mass).max(0.0).sqrt(),
        _ => data.mass.sqrt(),
    }
}

fn dynamic(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    let kind = cfg.experiment.kind;
    let p = cfg.params()?;
    let mut summary = Summary::empty(cfg);
    summary.regimes = Some(model::validate_params(&p)?);

    let grid = Arc::new(Grid::new(p.dim, cfg.grid.points, cfg.grid.half_width)?);
    let recipe = cfg.data.as_ref().expect("validated");
    let data = recipe.build(grid, &p, cfg.propagator.cap_radius)?;

    // Virial data with γ from the damping; only meaningful where γ is.
    let gamma = model::blowup_gamma(&p).ok();
    let vd = VirialData::new(data.e0, data.v0, data.i0, gamma.unwrap_or(0.0)).snap_energy(cfg.bounds.energy_snap);
    if vd.e0 == 0.0 && data.e0 != 0.0 {
        summary
            .warnings
            .push(format!("E0 = {:e} treated as zero for classification", data.e0));
    }
    let norm = lifespan_norm(&p, &data);
    let bounds = BoundsReport::evaluate(&p, norm, gamma.map(|_| vd), cfg.bounds.c);

    let mut pcfg = cfg.propagator.clone();
    if pcfg.boundary_tol.is_none() {
        summary.warnings.push("boundary monitor disabled".into());
    }
    let t_final = match (cfg.experiment.t_final, kind) {
        (Some(t), _) => t,
        (None, Kind::BlowupVerify) => bounds.blowup_upper.map(|b| 1.5 * b).unwrap_or(1.0),
        (None, _) => 1.0,
    };
    let samples: Vec<f64> = if kind == Kind::ScatterVerify {
        let n = cfg.scatter.samples;
        (0..=n).map(|j| t_final * j as f64 / n as f64).collect()
    } else {
        Vec::new()
    };
    pcfg.snapshot_times.extend(samples.iter().copied());

    let traj = run(&p, &data.field, t_final, &pcfg)?;
    summary.outcome = Some(traj.outcome);
    summary.t_blow = traj.outcome.t_blow();
    summary.final_time = Some(traj.final_time);
    summary.steps = Some(traj.steps);

    let defaults: &'static [&'static str] = match kind {
        Kind::Simulate => SIMULATE_CHECKS,
        Kind::BlowupVerify => BLOWUP_CHECKS,
        Kind::LifespanVerify => LIFESPAN_CHECKS,
        Kind::ScatterVerify => SCATTER_CHECKS,
        _ => &[],
    };
    let sel = Selection::new(&cfg.checks.enabled, defaults);
    let explicit = !cfg.checks.enabled.is_empty();
    let mut checks = Vec::new();
    let skip = |name: &str, why: &str, warnings: &mut Vec<String>| {
        if explicit {
            warnings.push(format!("{name} skipped: {why}"));
        }
    };

    if sel.wants("mass_law") {
        if p.is_real_coupling() {
            checks.push(mass_law_check(&traj, cfg.checks.mass_tol));
        } else {
            skip("mass_law", "complex coupling", &mut summary.warnings);
        }
    }
    if sel.wants("h_drift") {
        if p.is_real_coupling() && p.a.im == 0.0 {
            checks.push(h_drift_check(&traj, &p, cfg.checks.h_drift_tol));
        } else {
            skip("h_drift", "complex coefficients", &mut summary.warnings);
        }
    }
    if sel.wants("virial_residual") {
        match ode_residuals(&traj.records) {
            Ok(res) => {
                let (ri, rv) = max_residuals(&res);
                checks.push(Check::at_most(
                    "virial_residual",
                    ri.max(rv),
                    cfg.checks.virial_tol,
                    format!("max |I'-4V| = {ri:e}, max |V'-4P| = {rv:e}"),
                ));
            }
            Err(e) => skip("virial_residual", &e.to_string(), &mut summary.warnings),
        }
    }
    if sel.wants("gradient_bound") {
        let window = p.mu.re > 0.0 && p.alpha < p.mass_critical_alpha() - model::CRITICAL_TOL;
        if window {
            checks.push(gradient_check(&traj, &p, cfg.checks.gradient_factor));
        } else {
            skip("gradient_bound", "needs mu > 0 and a mass-subcritical alpha", &mut summary.warnings);
        }
    }
    if sel.wants("domain") {
        let pass = !matches!(traj.outcome, Outcome::DomainExceeded { .. });
        checks.push(Check::flag("domain", pass, format!("outcome {}", traj.outcome.label())));
    }
    if sel.wants("barrier") {
        match gamma {
            Some(g) => checks.push(barrier_check(&traj, &vd.with_gamma(g), cfg.checks.barrier_factor)),
            None => skip("barrier", "no blow-up gamma for these parameters", &mut summary.warnings),
        }
    }
    if sel.wants("blowup_bound") {
        checks.push(blowup_check(&traj, &bounds));
    }
    if sel.wants("lifespan") {
        checks.push(lifespan_check(&traj, &bounds));
    }

    if kind == Kind::ScatterVerify {
        match scattering_state(&traj, &samples) {
            Ok(mut report) => {
                let window = (cfg.scatter.fit_start * t_final, cfg.scatter.fit_end * t_final);
                let fit = match report.attach_fit(&traj, window) {
                    Ok(fit) => fit,
                    Err(e) => {
                        report.fit_note = Some(e.to_string());
                        None
                    }
                };
                checks.extend(scatter_checks(&report, window, &sel, cfg));
                summary.decay_fit = fit;
                summary.scatter = Some(report);
            }
            Err(e) => {
                for name in ["scatters", "decay_rate"] {
                    if sel.wants(name) {
                        checks.push(Check::flag(name, false, format!("no scattering state: {e}")));
                    }
                }
            }
        }
        if kappa_window(&p) {
            summary.kappa_monitor = kappa_monitor(&traj, &p).ok();
        }
    }

    let csv = diagnostics_csv(&traj);
    summary.initial_data = Some(data);
    summary.virial_data = gamma.map(|g| vd.with_gamma(g));
    summary.bounds = Some(bounds);
    summary.checks = checks;
    Ok(Artifacts {
        summary: summary.finish(),
        csv: Some(csv),
        profile: None,
        table: None,
        trajectory: Some(Arc::new(traj)),
    })
}

fn scatter_checks(report: &ScatterReport, window: (f64, f64), sel: &Selection, cfg: &ExperimentConfig) -> Vec<Check> {
    let mut checks = Vec::new();
    if sel.wants("scatters") {
        checks.push(Check::flag(
            "scatters",
            report.verdict == Verdict::Scatters,
            format!(
                "last Cauchy increment {:e}, ‖v0‖_H1 = {}",
                report.cauchy_tail.last().copied().unwrap_or(f64::NAN),
                report.initial_h1
            ),
        ));
    }
    if sel.wants("decay_rate") {
        checks.push(match report.fitted_rate {
            Some(rate) => {
                let ratio = rate / report.predicted_rate;
                let c = &cfg.checks;
                Check {
                    name: "decay_rate".into(),
                    pass: ratio >= c.rate_lo && ratio <= c.rate_hi,
                    value: ratio,
                    limit: c.rate_hi,
                    detail: format!(
                        "fitted {rate} vs predicted {} over [{}, {}], accepted ratio [{}, {}]",
                        report.predicted_rate, window.0, window.1, c.rate_lo, c.rate_hi
                    ),
                }
            }
            None => Check::flag(
                "decay_rate",
                false,
                report.fit_note.clone().unwrap_or_else(|| "no fit".into()),
            ),
        });
    }
    checks
}

fn kappa_window(p: &ModelParams) -> bool {
    let n = p.n();
    let lo = p.mass_critical_alpha();
    let hi = if n > 2.0 { (4.0 - 2.0 * p.b) / (n - 2.0) } else { f64::INFINITY };
    p.alpha > lo && p.alpha <= hi
}

/// max_t |M(t) − e^{−2Re(a)t} M0| / M0.
pub fn mass_law_check(traj: &Trajectory, tol: f64) -> Check {
    let ra = traj.params.damping();
    let m0 = traj.records[0].mass_u;
    let worst = traj
        .records
        .iter()
        .map(|r| (r.mass_u - (-2.0 * ra * r.t).exp() * m0).abs() / m0)
        .fold(0.0, f64::max);
    Check::at_most("mass_law", worst, tol, format!("max relative deviation over {} records", traj.records.len()))
}

/// max_t |H(t) − H(0)| relative to |H(0)|, or to the sum of the magnitudes of
/// its two parts when H(0) nearly cancels.
pub fn h_drift_check(traj: &Trajectory, p: &ModelParams, tol: f64) -> Check {
    let r0 = &traj.records[0];
    let parts = 0.5 * r0.grad_sq + p.mu.re.abs() / (p.alpha + 2.0) * r0.weighted_pot;
    let scale = if r0.h.abs() >= 1e-3 * parts { r0.h.abs() } else { parts };
    let drift = traj.records.iter().map(|r| (r.h - r0.h).abs()).fold(0.0, f64::max) / scale;
    Check::at_most("h_drift", drift, tol, format!("H(0) = {}, scale {scale}", r0.h))
}

/// max_t e^{2Re(a)t}‖∇u(t)‖² / ‖∇u0‖².
pub fn gradient_check(traj: &Trajectory, p: &ModelParams, factor: f64) -> Check {
    let ra = p.damping();
    let g0 = traj.records[0].grad_sq;
    let worst = traj
        .records
        .iter()
        .map(|r| (2.0 * ra * r.t).exp() * r.grad_sq / g0)
        .fold(0.0, f64::max);
    let mut c = Check::at_most("gradient_bound", worst, factor, "max of e^{2at}|grad u|^2 / initial");
    if !matches!(traj.outcome, Outcome::Completed) {
        c.pass = false;
        c.detail = format!("run ended early: {}", traj.outcome.label());
    }
    c
}

/// Largest excess of I over the barrier against `factor` × the accumulated
/// residual scale T·max|I′−4V| + 2T²·max|V′−4P|.
pub fn barrier_check(traj: &Trajectory, vd: &VirialData, factor: f64) -> Check {
    let t_end = traj.final_time;
    let scale = match ode_residuals(&traj.records) {
        Ok(res) => {
            let (ri, rv) = max_residuals(&res);
            t_end * ri + 2.0 * t_end * t_end * rv
        }
        Err(_) => 0.0,
    };
    let excess = traj
        .records
        .iter()
        .map(|r| r.variance_i - barrier_g(vd, r.t))
        .fold(f64::NEG_INFINITY, f64::max);
    Check::at_most(
        "barrier",
        excess,
        factor * scale,
        format!("max I - g over the run; residual scale {scale:e}, gamma {}", vd.gamma),
    )
}

pub fn blowup_check(traj: &Trajectory, bounds: &BoundsReport) -> Check {
    let case = bounds.blow_case;
    match (bounds.blowup_upper, traj.outcome.t_blow()) {
        (Some(bound), Some(t)) => Check::at_most(
            "blowup_bound",
            t,
            bound,
            format!("case {case}: declared blow-up time vs upper bound"),
        ),
        (Some(bound), None) => Check {
            name: "blowup_bound".into(),
            pass: false,
            value: traj.final_time,
            limit: bound,
            detail: format!("no blow-up declared ({})", traj.outcome.label()),
        },
        (None, _) => Check::flag(
            "blowup_bound",
            false,
            format!("data and damping fall in no blow-up case (nearest {case})"),
        ),
    }
}

pub fn lifespan_check(traj: &Trajectory, bounds: &BoundsReport) -> Check {
    let Some(lower) = bounds.lifespan_lower else {
        return Check::flag("lifespan", false, "no life-span bound for these parameters");
    };
    match (&traj.outcome, lower) {
        (Outcome::DomainExceeded { t, .. }, _) => {
            Check::flag("lifespan", false, format!("left the domain at t = {t}; inconclusive"))
        }
        (Outcome::Completed, TimeBound::Infinite(_)) => {
            Check::flag("lifespan", true, format!("global bound; completed to {}", traj.final_time))
        }
        (Outcome::BlowupDeclared { t_blow, .. }, TimeBound::Infinite(_)) => Check {
            name: "lifespan".into(),
            pass: false,
            value: *t_blow,
            limit: f64::INFINITY,
            detail: "blow-up declared although the damping is above the global threshold".into(),
        },
        (Outcome::Completed, TimeBound::Finite(b)) => Check::flag(
            "lifespan",
            true,
            format!("completed to {} (lower bound {b})", traj.final_time),
        ),
        (Outcome::BlowupDeclared { t_blow, .. }, TimeBound::Finite(b)) => Check {
            name: "lifespan".into(),
            pass: *t_blow >= b,
            value: *t_blow,
            limit: b,
            detail: "declared blow-up time must not precede the lower bound".into(),
        },
    }
}

fn groundstate(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    let mut summary = Summary::empty(cfg);
    let (dim, b) = (cfg.model.dim, cfg.model.b);
    let opts = cfg.groundstate;
    let prof = solve_ground_state(dim, b, &opts)?;
    let refined = solve_ground_state(dim, b, &opts.refined())?;
    let c = &cfg.checks;
    let sel = Selection::new(&c.enabled, GROUNDSTATE_CHECKS);
    let q0 = prof.q0();
    let residual = prof.max_residual();
    let mut checks = Vec::new();
    if sel.wants("gs_residual") {
        checks.push(Check::at_most("gs_residual", residual, c.residual_tol, "scaled ODE residual"));
    }
    if sel.wants("gs_shape") {
        let tail = *prof.q.last().unwrap() / q0;
        checks.push(Check::flag(
            "gs_shape",
            prof.is_positive_decreasing() && tail < 1e-8,
            format!("Q(R)/Q(0) = {tail:e}"),
        ));
    }
    if sel.wants("gs_refinement") {
        checks.push(Check::at_most(
            "gs_refinement",
            (q0 - refined.q0()).abs(),
            c.refine_tol,
            "change of Q(0) under 2x radial refinement",
        ));
    }
    if sel.wants("gs_oracle") && dim == 1 && b == 0.0 {
        checks.extend(quintic_oracle(&prof, c.oracle_tol, c.oracle_mass_tol));
    }
    let p = ModelParams::new(dim, cfg.model.s, b, prof.alpha, cfg.model.mu, 0.0);
    summary.groundstate = Some(GroundStateSummary {
        dim,
        b,
        alpha: prof.alpha,
        q0,
        mass: prof.mass,
        q_norm: q_mass(&prof),
        q0_refined: refined.q0(),
        max_residual: residual,
        matched_radius: prof.r[prof.matched_index],
        mass_threshold: dinls::bounds::mass_critical_threshold(&p, q_mass(&prof)).ok(),
    });
    summary.checks = checks;
    Ok(Artifacts {
        summary: summary.finish(),
        csv: None,
        profile: Some(prof.to_csv()),
        table: None,
        trajectory: None,
    })
}

/// Sup and mass errors against Q(x) = 3^{1/4} sech^{1/2}(2x).
pub fn quintic_oracle(prof: &RadialProfile, tol: f64, mass_tol: f64) -> Vec<Check> {
    let exact = |x: f64| 3f64.powf(0.25) / (2.0 * x).cosh().sqrt();
    let sup = prof
        .r
        .iter()
        .zip(&prof.q)
        .map(|(&r, &q)| (q - exact(r)).abs())
        .fold(0.0, f64::max);
    let mass = PI * 3f64.sqrt() / 2.0;
    vec![
        Check::at_most("gs_oracle", sup, tol, "sup |Q - 3^(1/4) sech^(1/2)(2x)|"),
        Check::at_most(
            "gs_oracle",
            (prof.mass - mass).abs(),
            mass_tol,
            format!("|‖Q‖² - π√3/2|, ‖Q‖² = {}", prof.mass),
        ),
    ]
}
