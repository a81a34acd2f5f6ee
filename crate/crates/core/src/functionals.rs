//! Scalar functionals of a state: mass, energy, the dissipation functional K,
//! the damped conserved quantity H, and the virial triple (I, V, P) of the
//! gauged field together with the barrier g(γ, t).
//!
//! Energies use Re μ; for complex coupling the imaginary part feeds the mass
//! balance instead and is reported separately by the propagator.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, SingularWeight, Spectral};
use crate::model::ModelParams;

/// Default boundary-mass fraction above which I and V are not trusted.
pub const SIGMA_TOL: f64 = 1e-6;

/// Below this γ the barrier uses its quadratic limit.
const GAMMA_SERIES: f64 = 1e-4;

/// One row of diagnostics. `grad_sq`, `sup_norm` and `weighted_pot` refer to
/// u; `variance_i`, `virial_v` and `pohozaev_p` refer to v = e^{at} u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub energy_u: f64,
    pub kinetic_k: f64,
    pub h: f64,
    pub variance_i: f64,
    pub virial_v: f64,
    pub pohozaev_p: f64,
    pub grad_sq: f64,
    pub sup_norm: f64,
    pub weighted_pot: f64,
    pub boundary_frac: f64,
    pub dt: f64,
}

/// Initial virial data for the blow-up estimates, plus the rate γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialData {
    pub e0: f64,
    pub v0: f64,
    pub i0: f64,
    pub gamma: f64,
}

impl VirialData {
    pub fn new(e0: f64, v0: f64, i0: f64, gamma: f64) -> Self {
        VirialData { e0, v0, i0, gamma }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Measures (E0, V0, I0) of `u0` on its grid. Fails when the state is not
    /// effectively compactly supported.
    pub fn measure(u0: &Field, ctx: &Diagnostics, gamma: f64) -> Result<VirialData> {
        check_sigma(u0, ctx.sigma_tol)?;
        Ok(VirialData {
            e0: ctx.energy(u0),
            v0: virial(u0, &ctx.spectral),
            i0: variance(u0),
            gamma,
        })
    }

    /// Sets E0 to exactly zero when |E0| ≤ tol, so measured data built to have
    /// zero energy classifies as such.
    pub fn snap_energy(mut self, tol: f64) -> Self {
        if self.e0.abs() <= tol {
            self.e0 = 0.0;
        }
        self
    }
}

pub fn mass(field: &Field) -> f64 {
    field.mass()
}

/// ∫ W |f|^{α+2}.
pub fn weighted_potential(field: &Field, params: &ModelParams, weight: &SingularWeight) -> f64 {
    weight.weighted_power_integral(field, params.alpha + 2.0)
}

/// E(f) = ½‖∇f‖² − (Re μ/(α+2)) ∫ W |f|^{α+2}.
pub fn energy(field: &Field, params: &ModelParams, weight: &SingularWeight, spectral: &Spectral) -> f64 {
    let grad = spectral.gradient_sq_norm(field);
    let pot = weighted_potential(field, params, weight);
    energy_from_parts(grad, pot, params)
}

pub fn energy_from_parts(grad_sq: f64, pot: f64, params: &ModelParams) -> f64 {
    0.5 * grad_sq - params.mu.re / (params.alpha + 2.0) * pot
}

/// K(f) = ‖∇f‖² − Re μ ∫ W |f|^{α+2}.
pub fn kinetic_k(field: &Field, params: &ModelParams, weight: &SingularWeight, spectral: &Spectral) -> f64 {
    let grad = spectral.gradient_sq_norm(field);
    let pot = weighted_potential(field, params, weight);
    grad - params.mu.re * pot
}

/// ∂ₜM(u) = −2Re(a) M(u) − 2Im(μ) ∫ W |u|^{α+2}; the second term vanishes
/// for real coupling.
pub fn mass_rate(mass_u: f64, pot_u: f64, params: &ModelParams) -> f64 {
    -2.0 * params.damping() * mass_u - 2.0 * params.mu.im * pot_u
}

/// I = ∫ |x|² |f|².
pub fn variance(field: &Field) -> f64 {
    let g = &field.grid;
    let s: f64 = field
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| g.radius_sq(i) * z.norm_sqr())
        .sum();
    s * g.cell_volume()
}

/// V = Im ∫ (x·∇f) f̄ with a spectral gradient.
pub fn virial(field: &Field, spectral: &Spectral) -> f64 {
    let g = &field.grid;
    let hat = spectral.spectrum(field);
    let mut acc = vec![Complex64::new(0.0, 0.0); g.len()];
    for axis in 0..g.dim() {
        let d = spectral.derivative(&hat, axis);
        for (i, dz) in d.iter().enumerate() {
            acc[i] += dz * g.axis_coord(i, axis);
        }
    }
    let s: f64 = acc
        .iter()
        .zip(&field.values)
        .map(|(xd, z)| (xd * z.conj()).im)
        .sum();
    s * g.cell_volume()
}

/// The virial evaluated in momentum space, Σ_j Im Σ_k (i k_j f̂) conj(FFT(x_j f)).
pub fn virial_momentum(field: &Field, spectral: &Spectral) -> f64 {
    let g = &field.grid;
    let hat = spectral.spectrum(field);
    let mut total = 0.0;
    for axis in 0..g.dim() {
        let mut xf: Vec<Complex64> = field
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| z * g.axis_coord(i, axis))
            .collect();
        spectral.forward(&mut xf);
        let s: f64 = hat
            .iter()
            .zip(&xf)
            .enumerate()
            .map(|(i, (fh, xh))| {
                let dk = Complex64::new(0.0, g.axis_derivative_symbol(i, axis)) * fh;
                (xh.conj() * dk).im
            })
            .sum();
        total += s;
    }
    // Parseval: ⟨a, b⟩ = h^N / n^N Σ â conj(b̂); here the inner product is ∫ (x·∇f) f̄
    // so conjugation falls on x f, not on ∇f.
    total * g.cell_volume() / g.len() as f64
}

/// P = ½‖∇v‖² − Re μ e^{−α Re(a) t} (Nα+2b)/(4(α+2)) ∫ W |v|^{α+2}.
pub fn pohozaev_p(field: &Field, params: &ModelParams, weight: &SingularWeight, spectral: &Spectral, t: f64) -> f64 {
    let grad = spectral.gradient_sq_norm(field);
    let pot = weighted_potential(field, params, weight);
    pohozaev_from_parts(grad, pot, params, t)
}

pub fn pohozaev_from_parts(grad_sq: f64, pot: f64, params: &ModelParams, t: f64) -> f64 {
    let (n, b, alpha) = (params.n(), params.b, params.alpha);
    let coeff = (n * alpha + 2.0 * b) / (4.0 * (alpha + 2.0));
    0.5 * grad_sq - params.mu.re * (-alpha * params.damping() * t).exp() * coeff * pot
}

/// Errors when the boundary mass fraction exceeds `tol`.
pub fn check_sigma(field: &Field, tol: f64) -> Result<()> {
    let fraction = field.boundary_mass_fraction();
    if fraction > tol {
        Err(Error::SigmaInvalid { fraction, tol })
    } else {
        Ok(())
    }
}

/// Variance with the Σ-validity check.
pub fn checked_variance(field: &Field, tol: f64) -> Result<f64> {
    check_sigma(field, tol)?;
    Ok(variance(field))
}

/// Virial with the Σ-validity check.
pub fn checked_virial(field: &Field, spectral: &Spectral, tol: f64) -> Result<f64> {
    check_sigma(field, tol)?;
    Ok(virial(field, spectral))
}

/// g(γ,t) = I0 e^{γt} + (4V0/γ)(e^{γt}−1) + (16E0/γ²)(e^{γt}−1−γt), with the
/// γ → 0 limit 8E0 t² + 4V0 t + I0.
pub fn barrier_g(vd: &VirialData, t: f64) -> f64 {
    if vd.gamma.abs() < GAMMA_SERIES {
        barrier_series(vd, t)
    } else {
        barrier_exact(vd, t)
    }
}

/// Expansion of g through second order in γ.
fn barrier_series(vd: &VirialData, t: f64) -> f64 {
    let VirialData { e0, v0, i0, gamma } = *vd;
    let lin = i0 + 4.0 * v0 * t + 8.0 * e0 * t * t;
    let first = i0 * t + 2.0 * v0 * t * t + (8.0 / 3.0) * e0 * t.powi(3);
    let second = 0.5 * i0 * t * t + (2.0 / 3.0) * v0 * t.powi(3) + (2.0 / 3.0) * e0 * t.powi(4);
    lin + gamma * first + gamma * gamma * second
}

fn barrier_exact(vd: &VirialData, t: f64) -> f64 {
    let VirialData { e0, v0, i0, gamma } = *vd;
    let x = gamma * t;
    let em1 = x.exp_m1();
    // e^{x} − 1 − x without cancellation for moderate x.
    let em1x = if x.abs() < 1e-2 {
        x * x * (0.5 + x / 6.0 + x * x / 24.0 + x.powi(3) / 120.0)
    } else {
        em1 - x
    };
    i0 * x.exp() + 4.0 * v0 / gamma * em1 + 16.0 * e0 / (gamma * gamma) * em1x
}

/// Trapezoid accumulation of ∫₀ᵗ e^{2Re(a)s} ∫W|u|^{α+2} ds across records.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HAccumulator {
    last: Option<(f64, f64)>,
    integral: f64,
}

impl HAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the sample e^{2Re(a)t} pot_u(t) at time t.
    pub fn push(&mut self, t: f64, value: f64) {
        if let Some((t0, v0)) = self.last {
            self.integral += 0.5 * (t - t0) * (v0 + value);
        }
        self.last = Some((t, value));
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }
}

/// H(t) = e^{2Re(a)t} E(u(t)) − Re μ · Re(a) α/(α+2) · ∫₀ᵗ e^{2Re(a)s} pot_u ds.
pub fn h_from_parts(t: f64, energy_u: f64, integral: f64, params: &ModelParams) -> f64 {
    let ra = params.damping();
    let alpha = params.alpha;
    (2.0 * ra * t).exp() * energy_u - params.mu.re * ra * alpha / (alpha + 2.0) * integral
}

/// Recomputes H at the last record of a trajectory prefix from its columns.
pub fn h_functional(records: &[DiagnosticsRecord], params: &ModelParams) -> f64 {
    let Some(last) = records.last() else {
        return 0.0;
    };
    let ra = params.damping();
    let mut acc = HAccumulator::new();
    for r in records {
        acc.push(r.t, (2.0 * ra * r.t).exp() * r.weighted_pot);
    }
    h_from_parts(last.t, last.energy_u, acc.integral(), params)
}

/// Centered residuals of I′ = 4V and V′ = 4P at one interior sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeResidual {
    pub t: f64,
    pub variance: f64,
    pub virial: f64,
}

/// Three-point derivative on a nonuniform stencil.
fn centered_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Residuals I′−4V and V′−4P at every interior record.
pub fn ode_residuals(records: &[DiagnosticsRecord]) -> Result<Vec<OdeResidual>> {
    if records.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} records, need at least 3",
            records.len()
        )));
    }
    Ok(records
        .windows(3)
        .map(|w| {
            let t = [w[0].t, w[1].t, w[2].t];
            let di = centered_derivative(t, [w[0].variance_i, w[1].variance_i, w[2].variance_i]);
            let dv = centered_derivative(t, [w[0].virial_v, w[1].virial_v, w[2].virial_v]);
            OdeResidual {
                t: w[1].t,
                variance: di - 4.0 * w[1].virial_v,
                virial: dv - 4.0 * w[1].pohozaev_p,
            }
        })
        .collect())
}

/// Largest |I′−4V| and |V′−4P| over a residual series.
pub fn max_residuals(res: &[OdeResidual]) -> (f64, f64) {
    res.iter().fold((0.0, 0.0), |(a, b), r| {
        (f64::max(a, r.variance.abs()), f64::max(b, r.virial.abs()))
    })
}

/// Everything needed to turn a state v(t) into a [`DiagnosticsRecord`].
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub params: ModelParams,
    pub weight: Arc<SingularWeight>,
    pub spectral: Spectral,
    pub sigma_tol: f64,
}

impl Diagnostics {
    pub fn new(params: ModelParams, weight: Arc<SingularWeight>, spectral: Spectral) -> Self {
        Diagnostics {
            params,
            weight,
            spectral,
            sigma_tol: SIGMA_TOL,
        }
    }

    pub fn energy(&self, field: &Field) -> f64 {
        energy(field, &self.params, &self.weight, &self.spectral)
    }

    pub fn kinetic_k(&self, field: &Field) -> f64 {
        kinetic_k(field, &self.params, &self.weight, &self.spectral)
    }

    /// Record for v at time t. `acc` receives the H-integral sample.
    pub fn record(&self, v: &Field, t: f64, dt: f64, acc: &mut HAccumulator) -> DiagnosticsRecord {
        let p = &self.params;
        let ra = p.damping();
        let alpha = p.alpha;
        let grad_v = self.spectral.gradient_sq_norm(v);
        let pot_v = weighted_potential(v, p, &self.weight);
        let mass_v = v.mass();

        let damp2 = (-2.0 * ra * t).exp();
        let mass_u = damp2 * mass_v;
        let grad_u = damp2 * grad_v;
        let pot_u = (-(alpha + 2.0) * ra * t).exp() * pot_v;
        let sup_u = (-ra * t).exp() * v.sup_norm();
        let energy_u = energy_from_parts(grad_u, pot_u, p);
        let kinetic = grad_u - p.mu.re * pot_u;

        // e^{2Re(a)t} pot_u = e^{−α Re(a) t} pot_v
        acc.push(t, (-alpha * ra * t).exp() * pot_v);
        let h = h_from_parts(t, energy_u, acc.integral(), p);

        DiagnosticsRecord {
            t,
            mass_u,
            energy_u,
            kinetic_k: kinetic,
            h,
            variance_i: variance(v),
            virial_v: virial(v, &self.spectral),
            pohozaev_p: pohozaev_from_parts(grad_v, pot_v, p, t),
            grad_sq: grad_u,
            sup_norm: sup_u,
            weighted_pot: pot_u,
            boundary_frac: v.boundary_mass_fraction(),
            dt,
        }
    }
}
