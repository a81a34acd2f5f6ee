//! Model parameters of the damped inhomogeneous NLS
//!
//! ```text
//! i u_t + Δu + μ |x|^{-b} |u|^α u + i a u = 0,   x ∈ ℝ^N
//! ```
//!
//! together with the exponent calculus (admissible pair, Hölder exponent θ,
//! blow-up rate γ, κ and β) that every bound in [`crate::bounds`] is built on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used to decide that α sits on a window endpoint.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension N (1, 2 or 3).
    pub dim: usize,
    /// Regularity index s ∈ {0, 1}.
    pub s: u32,
    /// Singularity exponent of the weight |x|^{-b}.
    pub b: f64,
    /// Nonlinearity power.
    pub alpha: f64,
    /// Coupling; Re μ > 0 is focusing.
    pub mu: Complex64,
    /// Damping; Re a ≥ 0.
    pub a: Complex64,
}

impl ModelParams {
    pub fn new(dim: usize, s: u32, b: f64, alpha: f64, mu: f64, a: f64) -> Self {
        ModelParams {
            dim,
            s,
            b,
            alpha,
            mu: Complex64::new(mu, 0.0),
            a: Complex64::new(a, 0.0),
        }
    }

    pub fn with_mu(mut self, mu: Complex64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_damping(mut self, a: Complex64) -> Self {
        self.a = a;
        self
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    pub fn damping(&self) -> f64 {
        self.a.re
    }

    pub fn is_real_coupling(&self) -> bool {
        self.mu.im == 0.0
    }

    /// (4 − 2b)/N.
    pub fn mass_critical_alpha(&self) -> f64 {
        (4.0 - 2.0 * self.b) / self.n()
    }

    /// (4 − 2b)/(N − 2s); infinite when N = 2s.
    pub fn hs_critical_alpha(&self) -> f64 {
        let d = self.n() - 2.0 * self.s as f64;
        if d <= 0.0 {
            f64::INFINITY
        } else {
            (4.0 - 2.0 * self.b) / d
        }
    }

    /// (4 − 2b)/(N − 2); infinite for N ≤ 2.
    pub fn energy_critical_alpha(&self) -> f64 {
        if self.dim <= 2 {
            f64::INFINITY
        } else {
            (4.0 - 2.0 * self.b) / (self.n() - 2.0)
        }
    }
}

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= CRITICAL_TOL * y.abs().max(1.0)
}

/// Which hypothesis windows a parameter set lies in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RegimeReport {
    /// Local theory and life-span lower bound in H^s, s < N/2.
    pub ge: bool,
    /// α equals (4 − 2b)/(N − 2s) (inclusive endpoint of the `ge` window).
    pub ge_critical: bool,
    /// Two-dimensional H¹ theory, 0 < b < 1, any α > 0.
    pub n2: bool,
    /// Scattering for large damping (union of the `ge` and `n2` windows, Re a > 0).
    pub large_damping: bool,
    /// Defocusing global existence and scattering.
    pub sca1_defocusing: bool,
    /// Focusing, mass-subcritical.
    pub sca1_focusing: bool,
    /// Focusing, mass-critical (needs a mass threshold on the data).
    pub sca1_mass_critical: bool,
    /// Decay order of scattering solutions.
    pub decay_rate: bool,
    /// Focusing intercritical window of the κ scattering criterion.
    pub kappa_criterion: bool,
    /// Upper bounds of the life-span (μ = 1, real a > 0).
    pub blow: bool,
    /// One line per window that is not satisfied.
    pub reasons: Vec<String>,
}

impl RegimeReport {
    pub fn any(&self) -> bool {
        self.ge
            || self.n2
            || self.sca1_defocusing
            || self.sca1_focusing
            || self.sca1_mass_critical
            || self.blow
    }
}

/// Checks the hard constraints and reports, for every window, whether `p`
/// lies in its hypothesis window.
///
/// Rejects b ≤ 0, α ≤ 0, Re a < 0, N outside 1..=3, s outside {0, 1} and
/// b ≥ min(2, N) (the weight is then not locally integrable).
pub fn validate_params(p: &ModelParams) -> Result<RegimeReport> {
    if !(1..=3).contains(&p.dim) {
        return Err(Error::InvalidParams(format!("N = {} outside 1..=3", p.dim)));
    }
    if p.s > 1 {
        return Err(Error::InvalidParams(format!("s = {} outside {{0, 1}}", p.s)));
    }
    if !(p.b > 0.0) {
        return Err(Error::InvalidParams(format!("b = {} must be > 0", p.b)));
    }
    if !(p.alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha = {} must be > 0", p.alpha)));
    }
    if !(p.a.re >= 0.0) {
        return Err(Error::InvalidParams(format!("Re(a) = {} must be >= 0", p.a.re)));
    }
    let n = p.n();
    let s = p.s as f64;
    if p.b >= 2.0f64.min(n) {
        let hs = 2.0f64.min(n - 2.0 * s);
        return Err(Error::InvalidParams(format!(
            "b = {} >= min(2, N) = {}; |x|^-b is not locally integrable (and b >= min(2, N-2s) = {})",
            p.b,
            2.0f64.min(n),
            hs
        )));
    }

    let mut r = RegimeReport::default();
    let b = p.b;
    let alpha = p.alpha;
    let mu_real = p.is_real_coupling();
    let a_real = p.a.im == 0.0;

    // ge: s < N/2, 0 < b < min(2, N − 2s), 0 < α ≤ (4 − 2b)/(N − 2s)
    let ge_b = 2.0f64.min(n - 2.0 * s);
    if 2.0 * s >= n {
        r.reasons.push(format!("ge: requires s < N/2 (N = {}, s = {})", p.dim, p.s));
    } else if b >= ge_b {
        r.reasons.push(format!("ge: b = {b} >= min(2, N-2s) = {ge_b}"));
    } else {
        let crit = p.hs_critical_alpha();
        if alpha < crit || near(alpha, crit) {
            r.ge = true;
            r.ge_critical = near(alpha, crit);
        } else {
            r.reasons.push(format!("ge: alpha = {alpha} > (4-2b)/(N-2s) = {crit}"));
        }
    }

    // N2: N = 2, s = 1, 0 < b < 1
    if p.dim == 2 && p.s == 1 {
        if b < 1.0 {
            r.n2 = true;
        } else {
            r.reasons.push(format!("n2: b = {b} >= 1"));
        }
    } else {
        r.reasons.push("n2: requires N = 2, s = 1".to_string());
    }

    if p.a.re > 0.0 && (r.ge || r.n2) {
        r.large_damping = true;
    } else if p.a.re <= 0.0 {
        r.reasons.push("large_damping: requires Re(a) > 0".to_string());
    }

    // sca1 and the κ criterion: N ≥ 3, 0 < b < min(2, N − 2), Re a > 0, real μ.
    let sca_base = p.dim >= 3 && b < 2.0f64.min(n - 2.0) && p.a.re > 0.0;
    if !sca_base {
        r.reasons.push("sca1: requires N >= 3, 0 < b < min(2, N-2), Re(a) > 0".to_string());
    } else if !mu_real {
        r.reasons.push("sca1: requires real mu".to_string());
    } else {
        let mu = p.mu.re;
        let mc = p.mass_critical_alpha();
        let ec = p.energy_critical_alpha();
        if mu < 0.0 && alpha < ec && !near(alpha, ec) {
            r.sca1_defocusing = true;
        }
        if mu > 0.0 && alpha < mc && !near(alpha, mc) {
            r.sca1_focusing = true;
        }
        if mu > 0.0 && near(alpha, mc) {
            r.sca1_mass_critical = true;
        }
        if mu > 0.0 && alpha > mc && !near(alpha, mc) && (alpha < ec || near(alpha, ec)) {
            r.kappa_criterion = true;
        }
        if !(r.sca1_defocusing || r.sca1_focusing || r.sca1_mass_critical) {
            r.reasons.push(format!(
                "sca1: (mu = {mu}, alpha = {alpha}) outside the defocusing/subcritical/mass-critical windows"
            ));
        }
    }

    // Decay order: N ≥ 3, 0 ≤ b < min(2, N − 2), 0 < α ≤ (4 − 2b)/(N − 2).
    if p.dim >= 3 && b < 2.0f64.min(n - 2.0) {
        let ec = p.energy_critical_alpha();
        if alpha < ec || near(alpha, ec) {
            r.decay_rate = true;
        }
    } else {
        r.reasons.push("decay_rate: requires N >= 3, b < min(2, N-2)".to_string());
    }

    // Blow-up upper bounds: μ = 1, real a > 0, plus the dimensional windows
    // (strict inequalities on α).
    let blow_data = mu_real && p.mu.re == 1.0 && a_real && p.a.re > 0.0;
    let blow_window = match p.dim {
        2 => b < 1.0 && alpha > 2.0 - b && !near(alpha, 2.0 - b),
        d if d >= 3 => {
            let mc = p.mass_critical_alpha();
            let ec = p.energy_critical_alpha();
            b < 2.0f64.min(n - 2.0) && alpha > mc && alpha < ec && !near(alpha, mc) && !near(alpha, ec)
        }
        _ => false,
    };
    if blow_data && blow_window {
        r.blow = true;
    } else if !blow_data {
        r.reasons.push("blow: requires mu = 1 and real a > 0".to_string());
    } else {
        r.reasons.push(format!(
            "blow: alpha = {alpha} outside the intercritical window for N = {}",
            p.dim
        ));
    }

    Ok(r)
}

/// The distinguished admissible pair (γ, ρ):
/// γ = 4(α+2)/(α(N−2s)+2b), ρ = N(α+2)/(N+αs−b).
pub fn admissible_pair(p: &ModelParams) -> (f64, f64) {
    let n = p.n();
    let s = p.s as f64;
    let gamma = 4.0 * (p.alpha + 2.0) / (p.alpha * (n - 2.0 * s) + 2.0 * p.b);
    let rho = n * (p.alpha + 2.0) / (n + p.alpha * s - p.b);
    (gamma, rho)
}

/// θ = 4/(4 − 2b − α(N − 2s)); `f64::INFINITY` at the critical exponent.
pub fn theta(p: &ModelParams) -> f64 {
    let crit = p.hs_critical_alpha();
    if near(p.alpha, crit) {
        return f64::INFINITY;
    }
    let n = p.n();
    let s = p.s as f64;
    4.0 / (4.0 - 2.0 * p.b - p.alpha * (n - 2.0 * s))
}

/// γ = 4αRe(a)/(Nα − 4 + 2b), the rate in the virial barrier.
pub fn blowup_gamma(p: &ModelParams) -> Result<f64> {
    let den = p.n() * p.alpha - 4.0 + 2.0 * p.b;
    if den <= 0.0 {
        return Err(Error::NonPositiveBlowupDenominator(den));
    }
    Ok(4.0 * p.alpha * p.a.re / den)
}

/// (κ, β); β is undefined at the mass-critical exponent.
pub fn kappa_beta(p: &ModelParams) -> Result<(f64, f64)> {
    let n = p.n();
    let num = 4.0 - 2.0 * p.b - (n - 2.0) * p.alpha;
    let kden = n * p.alpha - 4.0 + 2.0 * p.b;
    let bden = 4.0 - 2.0 * p.b - n * p.alpha;
    if bden.abs() <= CRITICAL_TOL {
        return Err(Error::MassCriticalDegeneracy);
    }
    Ok((num / kden, 2.0 * num / bden))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub gamma_pair: f64,
    pub rho_pair: f64,
    pub theta: f64,
    pub gamma_blow: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
}

pub fn exponents(p: &ModelParams) -> ExponentSet {
    let (gamma_pair, rho_pair) = admissible_pair(p);
    let kb = kappa_beta(p).ok();
    ExponentSet {
        gamma_pair,
        rho_pair,
        theta: theta(p),
        gamma_blow: blowup_gamma(p).ok(),
        kappa: kb.map(|k| k.0),
        beta: kb.map(|k| k.1),
    }
}
