//! Time evolution of the gauged field v = e^{at} u, which solves
//!
//! ```text
//! i v_t + Δv + μ h(t) |x|^{-b} |v|^α v = 0,   h(t) = e^{-αat}.
//! ```
//!
//! The main integrator is Strang splitting (half free flow, exact nonlinear
//! phase rotation, half free flow) with adaptive steps. [`picard_iterate`] is
//! an independent Duhamel fixed-point solver used to cross-check it.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{Diagnostics, DiagnosticsRecord, HAccumulator};
use crate::grid::{Field, Grid, SingularWeight, Spectral};
use crate::model::ModelParams;

/// Largest per-substep phase used by the RK4 path for complex coefficients.
const RK4_PHASE: f64 = 0.02;
const RK4_MAX_SUBSTEPS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    /// Largest time step.
    pub dt0: f64,
    /// Blow-up is declared when the adaptive step falls below this.
    pub dt_floor: f64,
    /// Step-size constant in dt = min(dt0, c_adapt / (1 + ‖v‖∞^α W_max)).
    pub c_adapt: f64,
    pub adapt: bool,
    /// Absolute threshold on ‖∇v‖²; defaults to `grad_max_factor` × initial.
    pub grad_max: Option<f64>,
    pub grad_max_factor: f64,
    /// When set, also caps the gradient threshold at this fraction of
    /// k_max² ‖v₀‖², the largest ‖∇v‖² the grid can represent. On a fixed
    /// grid a collapse saturates near that level instead of diverging.
    pub grad_resolution_fraction: Option<f64>,
    /// Absolute threshold on ‖v‖∞; defaults to `sup_max_factor` × initial.
    pub sup_max: Option<f64>,
    pub sup_max_factor: f64,
    /// Diagnostics are recorded every this many accepted steps. The H
    /// integral is a trapezoid over records, so this also bounds H accuracy.
    pub record_every: usize,
    /// Abort with `DomainExceeded` above this boundary mass fraction.
    /// `None` disables the monitor.
    pub boundary_tol: Option<f64>,
    /// Plain cap radius ε for W = max(|x|, ε)^{-b}. `None` selects the
    /// zeta-corrected origin value.
    pub cap_radius: Option<f64>,
    /// Times in (0, T] at which v is stored; steps land on them exactly.
    pub snapshot_times: Vec<f64>,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            dt0: 1e-3,
            dt_floor: 1e-10,
            c_adapt: 0.1,
            adapt: true,
            grad_max: None,
            grad_max_factor: 1e6,
            grad_resolution_fraction: None,
            sup_max: None,
            sup_max_factor: 1e6,
            record_every: 1,
            boundary_tol: Some(1e-6),
            cap_radius: None,
            snapshot_times: Vec::new(),
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt0 > 0.0) || !self.dt0.is_finite() {
            return bad(format!("dt0 = {} must be positive", self.dt0));
        }
        if !(self.dt_floor > 0.0) || self.dt_floor >= self.dt0 {
            return bad(format!("need 0 < dt_floor < dt0, got {} and {}", self.dt_floor, self.dt0));
        }
        if !(self.c_adapt > 0.0) {
            return bad(format!("c_adapt = {} must be positive", self.c_adapt));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        for (name, v) in [
            ("grad_max", self.grad_max),
            ("grad_resolution_fraction", self.grad_resolution_fraction),
            ("sup_max", self.sup_max),
            ("boundary_tol", self.boundary_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return bad(format!("{name} = {v} must be positive"));
                }
            }
        }
        if !(self.grad_max_factor > 0.0) || !(self.sup_max_factor > 0.0) {
            return bad("threshold factors must be positive".into());
        }
        if let Some(c) = self.cap_radius {
            if !(c > 0.0) {
                return bad(format!("cap_radius = {c} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupReason {
    GradientThreshold,
    AmplitudeThreshold,
    StepFloor,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowupDeclared { t_blow: f64, reason: BlowupReason },
    DomainExceeded { t: f64, fraction: f64 },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowupDeclared { .. } => "blowup_declared",
            Outcome::DomainExceeded { .. } => "domain_exceeded",
        }
    }

    pub fn t_blow(&self) -> Option<f64> {
        match self {
            Outcome::BlowupDeclared { t_blow, .. } => Some(*t_blow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub v: Field,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub records: Vec<DiagnosticsRecord>,
    /// v at `final_time`.
    pub final_state: Field,
    pub final_time: f64,
    pub snapshots: Vec<Snapshot>,
    pub outcome: Outcome,
    pub steps: usize,
    pub grad_max: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// u = e^{−a t} v at the final time.
    pub fn final_u(&self) -> Field {
        self.final_state.scaled((-self.params.a * self.final_time).exp())
    }
}

/// h(t) = e^{−α a t}.
pub fn gauge_factor(a: Complex64, alpha: f64, t: f64) -> Complex64 {
    (-alpha * a * t).exp()
}

/// ∫_t^{t+τ} e^{−α a σ} dσ for real a ≥ 0.
pub fn gauge_integral(a: f64, alpha: f64, t: f64, tau: f64) -> f64 {
    let z = alpha * a * tau;
    let phi1 = if z.abs() < 1e-12 { 1.0 - 0.5 * z } else { -(-z).exp_m1() / z };
    (-alpha * a * t).exp() * tau * phi1
}

/// Multiplies a spectrum by e^{−i|k|²τ}.
fn apply_free_symbol(hat: &mut [Complex64], k_sq: &[f64], tau: f64) {
    for (z, k2) in hat.iter_mut().zip(k_sq) {
        *z *= Complex64::from_polar(1.0, -k2 * tau);
    }
}

/// e^{iτΔ} applied exactly in Fourier space.
pub fn free_propagate(field: &Field, tau: f64, spectral: &Spectral) -> Field {
    let mut values = field.values.clone();
    if tau != 0.0 {
        spectral.forward(&mut values);
        apply_free_symbol(&mut values, spectral.k_sq(), tau);
        spectral.inverse(&mut values);
    }
    Field {
        grid: field.grid.clone(),
        values,
    }
}

#[inline]
fn modulus_pow(z: Complex64, alpha: f64) -> f64 {
    let r2 = z.norm_sqr();
    if alpha == 2.0 {
        r2
    } else if alpha == 1.0 {
        r2.sqrt()
    } else {
        r2.powf(0.5 * alpha)
    }
}

/// One RK4 integration of y' = i μ h(σ) W |y|^α y over [t, t+τ].
fn rk4_point(y0: Complex64, w: f64, t: f64, tau: f64, params: &ModelParams) -> Complex64 {
    let alpha = params.alpha;
    let rhs = |s: f64, y: Complex64| -> Complex64 {
        Complex64::i() * params.mu * gauge_factor(params.a, alpha, s) * w * modulus_pow(y, alpha) * y
    };
    let scale = params.mu.norm() * gauge_factor(params.a, alpha, t).norm() * w * modulus_pow(y0, alpha) * tau;
    let m = ((scale / RK4_PHASE).ceil() as usize).clamp(1, RK4_MAX_SUBSTEPS);
    let h = tau / m as f64;
    let mut y = y0;
    for j in 0..m {
        let s = t + j as f64 * h;
        let k1 = rhs(s, y);
        let k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1);
        let k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2);
        let k4 = rhs(s + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

fn nonlinear_in_place(values: &mut [Complex64], weight: &[f64], t: f64, tau: f64, params: &ModelParams) {
    if params.mu == Complex64::new(0.0, 0.0) || tau == 0.0 {
        return;
    }
    if params.mu.im == 0.0 && params.a.im == 0.0 {
        let coeff = params.mu.re * gauge_integral(params.a.re, params.alpha, t, tau);
        for (z, w) in values.iter_mut().zip(weight) {
            let phase = coeff * w * modulus_pow(*z, params.alpha);
            *z *= Complex64::from_polar(1.0, phase);
        }
    } else {
        for (z, w) in values.iter_mut().zip(weight) {
            *z = rk4_point(*z, *w, t, tau, params);
        }
    }
}

/// Solves v_t = i μ h W |v|^α v pointwise over [t, t+τ]: an exact phase
/// rotation for real μ and a, RK4 substeps otherwise.
pub fn nonlinear_step(field: &Field, t: f64, tau: f64, params: &ModelParams, weight: &SingularWeight) -> Result<Field> {
    let mut values = field.values.clone();
    nonlinear_in_place(&mut values, &weight.values, t, tau, params);
    let out = Field {
        grid: field.grid.clone(),
        values,
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite { t })
    }
}

/// Half free step, full nonlinear step, half free step.
pub fn strang_step(
    field: &Field,
    t: f64,
    dt: f64,
    params: &ModelParams,
    weight: &SingularWeight,
    spectral: &Spectral,
) -> Result<Field> {
    let mut values = field.values.clone();
    if dt == 0.0 {
        return Ok(field.clone());
    }
    let half: Vec<Complex64> = spectral
        .k_sq()
        .iter()
        .map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * dt))
        .collect();
    strang_in_place(&mut values, t, dt, params, &weight.values, spectral, &half);
    let out = Field {
        grid: field.grid.clone(),
        values,
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite { t })
    }
}

/// Returns ‖∇v‖² of the updated state, read off its spectrum.
fn strang_in_place(
    values: &mut [Complex64],
    t: f64,
    dt: f64,
    params: &ModelParams,
    weight: &[f64],
    spectral: &Spectral,
    half: &[Complex64],
) -> f64 {
    spectral.forward(values);
    for (z, m) in values.iter_mut().zip(half) {
        *z *= m;
    }
    spectral.inverse(values);
    nonlinear_in_place(values, weight, t, dt, params);
    spectral.forward(values);
    for (z, m) in values.iter_mut().zip(half) {
        *z *= m;
    }
    let grad = spectral.gradient_sq_norm_from_spectrum(values);
    spectral.inverse(values);
    grad
}

/// Grid, FFT plans and weight shared by every step of a simulation.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    pub spectral: Spectral,
    pub weight: Arc<SingularWeight>,
}

impl Propagator {
    pub fn new(params: ModelParams, grid: Arc<Grid>, cap_radius: Option<f64>) -> Propagator {
        let weight = Arc::new(match cap_radius {
            Some(cap) => SingularWeight::new(&grid, params.b, cap),
            None => SingularWeight::zeta_corrected(&grid, params.b),
        });
        let spectral = Spectral::new(grid.clone());
        Propagator {
            params,
            grid,
            spectral,
            weight,
        }
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics::new(self.params, self.weight.clone(), self.spectral.clone())
    }

    pub fn free_propagate(&self, field: &Field, tau: f64) -> Field {
        free_propagate(field, tau, &self.spectral)
    }

    pub fn strang_step(&self, field: &Field, t: f64, dt: f64) -> Result<Field> {
        strang_step(field, t, dt, &self.params, &self.weight, &self.spectral)
    }

    pub fn adaptive_dt(&self, config: &PropagatorConfig, sup: f64) -> f64 {
        if !config.adapt {
            return config.dt0;
        }
        let load = modulus_pow(Complex64::new(sup, 0.0), self.params.alpha) * self.weight.max();
        config.dt0.min(config.c_adapt / (1.0 + load))
    }
}

/// Marches v from u0 (v(0) = u0) to time T.
pub fn run(params: &ModelParams, u0: &Field, t_final: f64, config: &PropagatorConfig) -> Result<Trajectory> {
    config.validate()?;
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidConfig(format!("final time {t_final} must be positive")));
    }
    if !u0.is_finite() {
        return Err(Error::InitData("initial state has non-finite entries".into()));
    }
    let prop = Propagator::new(*params, u0.grid.clone(), config.cap_radius);
    let diag = prop.diagnostics();
    let mut acc = HAccumulator::new();

    let mut snap_times: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s <= t_final)
        .collect();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut snapshots = Vec::new();
    if config.snapshot_times.contains(&0.0) {
        snapshots.push(Snapshot { t: 0.0, v: u0.clone() });
    }
    let mut next_snap = 0;

    let grad0 = prop.spectral.gradient_sq_norm(u0);
    let sup0 = u0.sup_norm();
    let positive_or_inf = |x: f64| if x > 0.0 { x } else { f64::INFINITY };
    let mut grad_max = config.grad_max.unwrap_or(positive_or_inf(config.grad_max_factor * grad0));
    if let Some(f) = config.grad_resolution_fraction {
        let k = u0.grid.max_wavenumber();
        grad_max = grad_max.min(f * k * k * u0.mass());
    }
    let sup_max = config.sup_max.unwrap_or(positive_or_inf(config.sup_max_factor * sup0));

    let mut v = u0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut records = vec![diag.record(&v, 0.0, 0.0, &mut acc)];
    let mut outcome = Outcome::Completed;

    if let Some(tol) = config.boundary_tol {
        let fraction = v.boundary_mass_fraction();
        if fraction > tol {
            outcome = Outcome::DomainExceeded { t: 0.0, fraction };
        }
    }

    let mut half_cache: Option<(f64, Vec<Complex64>)> = None;
    let mut work = v.values.clone();
    let mut last_dt = 0.0;

    while outcome == Outcome::Completed && t < t_final {
        let dt_adapt = prop.adaptive_dt(config, v.sup_norm());
        if dt_adapt < config.dt_floor {
            outcome = Outcome::BlowupDeclared {
                t_blow: t,
                reason: BlowupReason::StepFloor,
            };
            break;
        }
        let target = snap_times.get(next_snap).copied().unwrap_or(t_final);
        // Land on the target when it is within round-off of one step, so
        // summed steps never leave a sliver at the end.
        let (dt, t_new, lands) = if target - t <= dt_adapt * (1.0 + 1e-6) {
            (target - t, target, true)
        } else {
            (dt_adapt, t + dt_adapt, false)
        };

        let half = match &half_cache {
            Some((cached, h)) if *cached == dt => h,
            _ => {
                let h: Vec<Complex64> = prop
                    .spectral
                    .k_sq()
                    .iter()
                    .map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * dt))
                    .collect();
                half_cache = Some((dt, h));
                &half_cache.as_ref().unwrap().1
            }
        };
        work.copy_from_slice(&v.values);
        let grad = strang_in_place(&mut work, t, dt, params, &prop.weight.values, &prop.spectral, half);
        if !grad.is_finite() || work.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            outcome = Outcome::BlowupDeclared {
                t_blow: t,
                reason: BlowupReason::NonFinite,
            };
            break;
        }
        std::mem::swap(&mut v.values, &mut work);
        t = t_new;
        steps += 1;
        last_dt = dt;

        let mut record_now = steps.is_multiple_of(config.record_every) || t >= t_final;
        if grad >= grad_max {
            outcome = Outcome::BlowupDeclared {
                t_blow: t,
                reason: BlowupReason::GradientThreshold,
            };
            record_now = true;
        } else if v.sup_norm() >= sup_max {
            outcome = Outcome::BlowupDeclared {
                t_blow: t,
                reason: BlowupReason::AmplitudeThreshold,
            };
            record_now = true;
        } else if let Some(tol) = config.boundary_tol {
            let fraction = v.boundary_mass_fraction();
            if fraction > tol {
                outcome = Outcome::DomainExceeded { t, fraction };
                record_now = true;
            }
        }
        if lands && next_snap < snap_times.len() && t == snap_times[next_snap] {
            snapshots.push(Snapshot { t, v: v.clone() });
            next_snap += 1;
        }
        if record_now {
            records.push(diag.record(&v, t, dt, &mut acc));
        }
    }

    if records.last().map(|r| r.t) != Some(t) {
        records.push(diag.record(&v, t, last_dt, &mut acc));
    }

    Ok(Trajectory {
        params: *params,
        records,
        final_state: v,
        final_time: t,
        snapshots,
        outcome,
        steps,
        grad_max,
    })
}

/// Iterates the Duhamel map
/// v(t) = e^{itΔ}u0 + iμ ∫₀ᵗ e^{i(t−s)Δ} h(s) W |v|^α v ds
/// with trapezoid quadrature on `quad_points` equal subintervals of
/// [0, T_small], until successive iterates differ by less than `tol` in sup
/// norm at every node. Returns v(T_small).
pub fn picard_iterate(
    params: &ModelParams,
    u0: &Field,
    t_small: f64,
    quad_points: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Field> {
    if !(t_small > 0.0) || quad_points == 0 {
        return Err(Error::InvalidConfig(format!(
            "need T_small > 0 and quad_points > 0, got {t_small} and {quad_points}"
        )));
    }
    let prop = Propagator::new(*params, u0.grid.clone(), None);
    let sp = &prop.spectral;
    let w = &prop.weight.values;
    let ds = t_small / quad_points as f64;
    let nodes: Vec<f64> = (0..=quad_points).map(|j| j as f64 * ds).collect();

    let u0_hat = sp.spectrum(u0);
    let free: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|&s| {
            let mut hat = u0_hat.clone();
            apply_free_symbol(&mut hat, sp.k_sq(), s);
            sp.inverse(&mut hat);
            hat
        })
        .collect();
    let step: Vec<Complex64> = sp.k_sq().iter().map(|k2| Complex64::from_polar(1.0, -k2 * ds)).collect();

    let forcing = |v: &[Complex64], s: f64| -> Vec<Complex64> {
        let c = Complex64::i() * params.mu * gauge_factor(params.a, params.alpha, s);
        v.iter()
            .zip(w)
            .map(|(z, wi)| c * wi * modulus_pow(*z, params.alpha) * z)
            .collect()
    };

    let mut iterate = free.clone();
    let mut increment = f64::INFINITY;
    for _ in 0..max_iter {
        let f: Vec<Vec<Complex64>> = iterate.iter().zip(&nodes).map(|(v, &s)| forcing(v, s)).collect();
        let mut next = Vec::with_capacity(nodes.len());
        next.push(free[0].clone());
        let mut duhamel = vec![Complex64::new(0.0, 0.0); u0.len()];
        for j in 0..quad_points {
            for (d, fj) in duhamel.iter_mut().zip(&f[j]) {
                *d += 0.5 * ds * fj;
            }
            sp.forward(&mut duhamel);
            for (d, m) in duhamel.iter_mut().zip(&step) {
                *d *= m;
            }
            sp.inverse(&mut duhamel);
            for (d, fj) in duhamel.iter_mut().zip(&f[j + 1]) {
                *d += 0.5 * ds * fj;
            }
            next.push(free[j + 1].iter().zip(&duhamel).map(|(a, b)| a + b).collect::<Vec<_>>());
        }
        increment = next
            .iter()
            .zip(&iterate)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max);
        if !increment.is_finite() {
            break;
        }
        iterate = next;
        if increment < tol {
            let values = iterate.pop().unwrap();
            return Field::from_values(u0.grid.clone(), values);
        }
    }
    Err(Error::NoContraction {
        iterations: max_iter,
        increment,
    })
}

/// Default quadrature count ceil(T_small / dt0).
pub fn default_quad_points(t_small: f64, dt0: f64) -> usize {
    ((t_small / dt0).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, n: usize, l: f64) -> Arc<Grid> {
        Arc::new(Grid::new(dim, n, l).unwrap())
    }

    fn gaussian(g: &Arc<Grid>, amp: f64) -> Field {
        Field::from_fn(g.clone(), |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            Complex64::new(amp * (-r2).exp(), 0.0)
        })
    }

    #[test]
    fn gauge_factor_examples() {
        let h = gauge_factor(Complex64::new(0.5, 0.0), 2.0, 1.0);
        assert!((h.re - (-1.0f64).exp()).abs() < 1e-15 && h.im == 0.0);
        assert_eq!(gauge_factor(Complex64::new(0.7, 0.2), 1.5, 0.0), Complex64::new(1.0, 0.0));
        assert_eq!(gauge_factor(Complex64::new(0.0, 0.0), 2.0, 3.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gauge_integral_matches_quadrature() {
        for &(a, alpha, t, tau) in &[(0.3, 2.0, 0.7, 0.05), (0.0, 1.0, 2.0, 0.1), (1e-14, 2.0, 0.0, 0.1), (2.0, 4.0, 1.0, 0.5)] {
            let m = 20_000;
            let h = tau / m as f64;
            // Composite Simpson.
            let f = |s: f64| (-alpha * a * s).exp();
            let mut sum = f(t) + f(t + tau);
            for j in 1..m {
                sum += if j % 2 == 1 { 4.0 } else { 2.0 } * f(t + j as f64 * h);
            }
            let simpson = sum * h / 3.0;
            assert!((gauge_integral(a, alpha, t, tau) - simpson).abs() < 1e-13, "a={a}");
        }
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let g = grid(1, 512, 20.0);
        let sp = Spectral::new(g.clone());
        let u = gaussian(&g, 1.0);
        let tau = 0.3;
        let out = free_propagate(&u, tau, &sp);
        let c = Complex64::new(1.0, 4.0 * tau);
        for (i, z) in out.values.iter().enumerate() {
            let x = g.coords()[i];
            let exact = c.powf(-0.5) * (-x * x / c).exp();
            assert!((z - exact).norm() < 1e-8);
        }
        assert!((out.mass() - u.mass()).abs() < 1e-12);
        assert_eq!(free_propagate(&u, 0.0, &sp), u);
        let back = free_propagate(&out, -tau, &sp);
        assert!(back.sup_distance(&u) < 1e-12);
    }

    #[test]
    fn real_coupling_phase_rotation() {
        let g = grid(1, 16, 4.0);
        let p = ModelParams::new(1, 1, 0.0, 2.0, 1.0, 0.0);
        let w = SingularWeight::new(&g, 0.0, 1.0);
        let ones = Field::from_fn(g.clone(), |_| Complex64::new(1.0, 0.0));
        let out = nonlinear_step(&ones, 0.0, 0.1, &p, &w).unwrap();
        for z in &out.values {
            assert!((z.arg() - 0.1).abs() < 1e-15);
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
        let p = ModelParams::new(1, 1, 0.5, 1.3, 2.0, 0.4);
        let u = Field::from_fn(g.clone(), |x| Complex64::from_polar(1.0 + x[0].sin(), x[0]));
        let w = SingularWeight::with_default_cap(&g, 0.5);
        let out = nonlinear_step(&u, 0.3, 0.2, &p, &w).unwrap();
        for (a, b) in out.values.iter().zip(&u.values) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_coupling_matches_scalar_oracle() {
        // y' = i·i·h W |y|² y = −h W |y|² y with h = e^{−2at}: |y|² solves
        // r' = −2 h W r², so 1/r(t+τ) = 1/r(t) + 2W ∫h.
        let g = grid(1, 16, 4.0);
        let p = ModelParams::new(1, 1, 0.0, 2.0, 0.0, 0.25).with_mu(Complex64::new(0.0, 1.0));
        let w = SingularWeight::new(&g, 0.0, 1.0);
        let u = Field::from_fn(g.clone(), |x| Complex64::from_polar(0.5 + 0.1 * x[0].cos(), 0.3));
        let (t, tau) = (0.2, 0.1);
        let out = nonlinear_step(&u, t, tau, &p, &w).unwrap();
        let ih = gauge_integral(0.25, 2.0, t, tau);
        for (a, b) in out.values.iter().zip(&u.values) {
            let r = 1.0 / (1.0 / b.norm_sqr() + 2.0 * ih);
            assert!((a.norm() - r.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn strang_linear_limit_and_zero_step() {
        let g = grid(2, 32, 6.0);
        let p = ModelParams::new(2, 1, 0.5, 1.0, 0.0, 0.3);
        let prop = Propagator::new(p, g.clone(), None);
        let u = gaussian(&g, 1.0);
        let a = prop.strang_step(&u, 0.0, 0.05).unwrap();
        let b = prop.free_propagate(&u, 0.05);
        assert!(a.sup_distance(&b) < 1e-14);
        assert_eq!(prop.strang_step(&u, 0.0, 0.0).unwrap(), u);
    }

    fn march(prop: &Propagator, u: &Field, t_end: f64, dt: f64) -> Field {
        let steps = (t_end / dt).round() as usize;
        let mut v = u.clone();
        for j in 0..steps {
            v = prop.strang_step(&v, j as f64 * dt, dt).unwrap();
        }
        v
    }

    #[test]
    fn strang_is_second_order() {
        let g = grid(1, 128, 16.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.3);
        let prop = Propagator::new(p, g.clone(), None);
        let u = Field::from_fn(g.clone(), |x| Complex64::from_polar((-x[0] * x[0]).exp(), 0.2 * x[0]));
        let dt = 0.01;
        let reference = march(&prop, &u, 0.5, dt / 16.0);
        let e1 = march(&prop, &u, 0.5, dt).sup_distance(&reference);
        let e2 = march(&prop, &u, 0.5, dt / 2.0).sup_distance(&reference);
        let ratio = e1 / e2;
        assert!((3.5..4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn linear_damping_mass_decay() {
        let g = grid(1, 256, 16.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 0.0, 0.5);
        let u = gaussian(&g, 1.0);
        let traj = run(&p, &u, 1.0, &PropagatorConfig::default()).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        let last = traj.records.last().unwrap();
        assert_eq!(last.t, 1.0);
        assert!((last.mass_u / u.mass() - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn records_are_strictly_increasing_and_snapshots_land() {
        let g = grid(1, 256, 24.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.2);
        let u = gaussian(&g, 0.8);
        let cfg = PropagatorConfig {
            dt0: 0.01,
            record_every: 3,
            snapshot_times: vec![0.123, 0.5, 0.25],
            ..Default::default()
        };
        let traj = run(&p, &u, 0.5, &cfg).unwrap();
        assert_eq!(traj.outcome, Outcome::Completed);
        let ts = traj.times();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        let snaps: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(snaps, vec![0.123, 0.25, 0.5]);
        assert_eq!(traj.final_time, 0.5);
    }

    #[test]
    fn gauge_identity_for_u_mass() {
        let g = grid(1, 256, 16.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.4);
        let u = gaussian(&g, 1.0);
        let traj = run(&p, &u, 0.5, &PropagatorConfig::default()).unwrap();
        let r = traj.records.last().unwrap();
        let u_final = traj.final_u();
        assert!((u_final.mass() - r.mass_u).abs() < 1e-12 * r.mass_u);
        // Real μ: e^{2at} M(u) is constant.
        assert!(((2.0 * 0.4 * r.t).exp() * r.mass_u / u.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn complex_coupling_mass_balance() {
        let g = grid(1, 256, 20.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 0.0, 0.1).with_mu(Complex64::new(0.5, 0.5));
        let u = gaussian(&g, 1.0);
        let cfg = PropagatorConfig {
            dt0: 1e-3,
            adapt: false,
            ..Default::default()
        };
        let traj = run(&p, &u, 0.2, &cfg).unwrap();
        let r = &traj.records;
        for w in r.windows(3).step_by(20) {
            let fd = (w[2].mass_u - w[0].mass_u) / (w[2].t - w[0].t);
            let rate = crate::functionals::mass_rate(w[1].mass_u, w[1].weighted_pot, &p);
            assert!((fd - rate).abs() < 1e-4 * rate.abs(), "{fd} vs {rate}");
        }
    }

    #[test]
    fn picard_trivial_cases() {
        let g = grid(1, 64, 8.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 0.0, 0.2);
        let u = gaussian(&g, 1.0);
        let sp = Spectral::new(g.clone());
        let v = picard_iterate(&p, &u, 0.02, 10, 1, 1e-12).unwrap();
        assert!(v.sup_distance(&free_propagate(&u, 0.02, &sp)) < 1e-14);
        let z = Field::zeros(g.clone());
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.2);
        assert_eq!(picard_iterate(&p, &z, 0.02, 10, 3, 1e-12).unwrap(), z);
    }

    #[test]
    fn picard_agrees_with_strang() {
        let g = grid(1, 128, 12.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.3);
        let u = Field::from_fn(g.clone(), |x| Complex64::from_polar(1.2 * (-x[0] * x[0]).exp(), 0.3 * x[0]));
        let t = 0.02;
        let v_picard = picard_iterate(&p, &u, t, default_quad_points(t, 5e-5), 50, 1e-13).unwrap();
        let prop = Propagator::new(p, g.clone(), None);
        let v_strang = march(&prop, &u, t, 5e-5);
        let d = v_picard.sup_distance(&v_strang);
        assert!(d < 1e-6, "distance {d}");
    }

    #[test]
    fn picard_reports_no_contraction() {
        let g = grid(1, 64, 8.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 1.0, 0.0);
        let u = gaussian(&g, 3.0);
        let err = picard_iterate(&p, &u, 0.02, 10, 2, 1e-15).unwrap_err();
        assert!(matches!(err, Error::NoContraction { iterations: 2, .. }));
    }

    #[test]
    fn config_validation() {
        assert!(PropagatorConfig::default().validate().is_ok());
        let bad = PropagatorConfig {
            dt_floor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PropagatorConfig {
            record_every: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn domain_monitor_trips_on_wide_data() {
        let g = grid(1, 64, 4.0);
        let p = ModelParams::new(1, 1, 0.5, 2.0, 0.0, 0.0);
        let u = Field::from_fn(g, |x| Complex64::new((-x[0] * x[0] / 9.0).exp(), 0.0));
        let traj = run(&p, &u, 0.1, &PropagatorConfig::default()).unwrap();
        assert!(matches!(traj.outcome, Outcome::DomainExceeded { .. }));
        let _ = PI;
    }
}
