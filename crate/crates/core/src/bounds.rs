//! Closed-form bounds: life-span lower bounds, blow-up case classification
//! and upper bounds on the blow-up time, the damping↔γ map, the scattering
//! damping threshold and the mass-critical threshold.
//!
//! Every formula uses Re(a).

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functionals::VirialData;
use crate::model::{self, ModelParams};

/// Number of τ samples used by [`lifespan_lower_2d_opt`].
pub const TAU_GRID: usize = 64;

/// A time that may be infinite. Serializes as a number or the string
/// `"infinity"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TimeBound {
    Finite(f64),
    Infinite(InfinityTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "infinity")]
    Infinity,
}

impl TimeBound {
    pub const INFINITE: TimeBound = TimeBound::Infinite(InfinityTag::Infinity);

    pub fn from_f64(t: f64) -> TimeBound {
        if t.is_infinite() {
            TimeBound::INFINITE
        } else {
            TimeBound::Finite(t)
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            TimeBound::Finite(t) => *t,
            TimeBound::Infinite(_) => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, TimeBound::Infinite(_))
    }
}

impl Serialize for TimeBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeBound::Finite(t) => s.serialize_f64(*t),
            TimeBound::Infinite(_) => s.serialize_str("infinity"),
        }
    }
}

impl fmt::Display for TimeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeBound::Finite(t) => write!(f, "{t}"),
            TimeBound::Infinite(_) => f.write_str("infinity"),
        }
    }
}

/// (1/(k a)) log(X / (X − k a)) with its a → 0 limit 1/X and ∞ once k a ≥ X.
fn log_lifespan(k: f64, a: f64, x: f64) -> TimeBound {
    if x <= 0.0 {
        return TimeBound::INFINITE;
    }
    let r = k * a / x;
    // Rounding slack so a damping computed as the threshold counts as reaching it.
    if r >= 1.0 - 4.0 * f64::EPSILON {
        return TimeBound::INFINITE;
    }
    if r < 1e-12 {
        return TimeBound::Finite((1.0 + 0.5 * r) / x);
    }
    TimeBound::Finite(-(-r).ln_1p() / (k * a))
}

fn check_constant(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveConstant(c))
    }
}

fn subcritical_alpha_theta(p: &ModelParams) -> Result<f64> {
    let theta = model::theta(p);
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "life-span bound needs a subcritical alpha, got alpha = {} (critical {})",
            p.alpha,
            p.hs_critical_alpha()
        )));
    }
    Ok(p.alpha * theta)
}

/// Lower bound (1/(αθ Re a)) log(Cρ / (Cρ − αθ Re a)) on the life-span,
/// Cρ = C ‖u0‖_{Ḣ^s}^{αθ}. Infinite once Re a ≥ Cρ/(αθ).
pub fn lifespan_lower(p: &ModelParams, norm_u0: f64, c: f64) -> Result<TimeBound> {
    check_constant(c)?;
    let k = subcritical_alpha_theta(p)?;
    let c_rho = c * norm_u0.powf(k);
    Ok(log_lifespan(k, p.damping(), c_rho))
}

/// Damping Cρ/(αθ) at and above which [`lifespan_lower`] is infinite.
pub fn lifespan_damping_threshold(p: &ModelParams, norm_u0: f64, c: f64) -> Result<f64> {
    check_constant(c)?;
    let k = subcritical_alpha_theta(p)?;
    Ok(c * norm_u0.powf(k) / k)
}

/// Upper end of the admissible τ interval, min((1−b)/(α+1), α/(α+1)).
pub fn tau_max(p: &ModelParams) -> f64 {
    ((1.0 - p.b) / (p.alpha + 1.0)).min(p.alpha / (p.alpha + 1.0))
}

/// The two-dimensional H¹ bound with q = 2 − b − (α+1)τ:
/// (q/(2α Re a)) log(X/(X − 2α Re a/q)), X = C ‖u0‖_{H¹}^{2α/q}.
pub fn lifespan_lower_2d(p: &ModelParams, norm_h1: f64, tau: f64, c: f64) -> Result<TimeBound> {
    check_constant(c)?;
    if p.dim != 2 || p.s != 1 {
        return Err(Error::InvalidParams(format!(
            "two-dimensional bound needs N = 2, s = 1, got N = {}, s = {}",
            p.dim, p.s
        )));
    }
    let max = tau_max(p);
    if !(tau > 0.0 && tau < max) {
        return Err(Error::TauOutOfRange { tau, max });
    }
    let q = 2.0 - p.b - (p.alpha + 1.0) * tau;
    let k = 2.0 * p.alpha / q;
    Ok(log_lifespan(k, p.damping(), c * norm_h1.powf(k)))
}

/// Maximizes [`lifespan_lower_2d`] over 64 interior τ values; returns the
/// bound and the τ achieving it.
pub fn lifespan_lower_2d_opt(p: &ModelParams, norm_h1: f64, c: f64) -> Result<(TimeBound, f64)> {
    let max = tau_max(p);
    if !(max > 0.0) {
        return Err(Error::TauOutOfRange { tau: 0.0, max });
    }
    let mut best: Option<(TimeBound, f64)> = None;
    for i in 1..=TAU_GRID {
        let tau = max * i as f64 / (TAU_GRID + 1) as f64;
        let t = lifespan_lower_2d(p, norm_h1, tau, c)?;
        if best.is_none_or(|(b, _)| t.as_f64() > b.as_f64()) {
            best = Some((t, tau));
        }
    }
    Ok(best.expect("tau grid is nonempty"))
}

/// Smallest damping over the τ grid at which [`lifespan_lower_2d`] is
/// infinite.
pub fn lifespan_damping_threshold_2d(p: &ModelParams, norm_h1: f64, c: f64) -> Result<f64> {
    check_constant(c)?;
    let max = tau_max(p);
    if !(max > 0.0) {
        return Err(Error::TauOutOfRange { tau: 0.0, max });
    }
    let best = (1..=TAU_GRID)
        .map(|i| {
            let tau = max * i as f64 / (TAU_GRID + 1) as f64;
            let q = 2.0 - p.b - (p.alpha + 1.0) * tau;
            let k = 2.0 * p.alpha / q;
            c * norm_h1.powf(k) / k
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowCase {
    I,
    Ii,
    Iii,
    Iv,
    V,
    NotApplicable,
}

impl fmt::Display for BlowCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowCase::I => "i",
            BlowCase::Ii => "ii",
            BlowCase::Iii => "iii",
            BlowCase::Iv => "iv",
            BlowCase::V => "v",
            BlowCase::NotApplicable => "not_applicable",
        })
    }
}

/// [lo, hi) or [lo, hi] when `closed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
}

impl GammaInterval {
    pub fn half_open(lo: f64, hi: f64) -> Self {
        GammaInterval { lo, hi, closed: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        GammaInterval { lo, hi, closed: true }
    }

    pub fn empty() -> Self {
        GammaInterval::half_open(0.0, 0.0)
    }

    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.lo && (gamma < self.hi || (self.closed && gamma == self.hi))
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi || (self.closed && self.lo == self.hi))
    }
}

/// The hypotheses the initial data (E0, V0, I0) satisfy, each with its
/// admissible γ interval. Data with V0 < −2√(E0 I0), E0 > 0 fall in both
/// (iv) and (v), which cover adjacent γ ranges.
pub fn blow_case_classify(e0: f64, v0: f64, i0: f64) -> Vec<(BlowCase, GammaInterval)> {
    if !(i0 > 0.0) {
        return vec![(BlowCase::NotApplicable, GammaInterval::empty())];
    }
    if e0 < 0.0 {
        let hi = ((v0 * v0 - 4.0 * e0 * i0).sqrt() - v0) / (2.0 * i0);
        return vec![(BlowCase::I, GammaInterval::closed(0.0, hi))];
    }
    if e0 == 0.0 {
        if v0 < 0.0 {
            return vec![(BlowCase::Ii, GammaInterval::half_open(0.0, 4.0 * v0.abs() / i0))];
        }
        return vec![(BlowCase::NotApplicable, GammaInterval::empty())];
    }
    let root = (e0 * i0).sqrt();
    if v0 >= -2.0 * root && v0 < -(2.0f64.sqrt()) * root {
        let hi = 4.0 / (i0 * v0.abs()) * (v0 * v0 - 2.0 * e0 * i0);
        return vec![(BlowCase::Iii, GammaInterval::half_open(0.0, hi))];
    }
    if v0 < -2.0 * root {
        let disc = (v0 * v0 - 4.0 * e0 * i0).sqrt();
        let lo = 2.0 / i0 * (v0.abs() - disc);
        let hi = 2.0 / i0 * (v0.abs() + disc);
        return vec![
            (BlowCase::Iv, GammaInterval::half_open(0.0, lo)),
            (BlowCase::V, GammaInterval::half_open(lo, hi)),
        ];
    }
    vec![(BlowCase::NotApplicable, GammaInterval::empty())]
}

/// The case whose γ interval contains `vd.gamma`.
pub fn blow_case_for(vd: &VirialData) -> Result<(BlowCase, GammaInterval)> {
    let cases = blow_case_classify(vd.e0, vd.v0, vd.i0);
    if let Some(hit) = cases.iter().find(|(_, iv)| iv.contains(vd.gamma)) {
        return Ok(*hit);
    }
    let labels: Vec<String> = cases.iter().map(|(c, _)| c.to_string()).collect();
    Err(Error::GammaOutOfRange {
        gamma: vd.gamma,
        case: labels.join("/"),
    })
}

/// Upper bound on the blow-up time for the case selected by γ.
pub fn blowup_upper(vd: &VirialData) -> Result<f64> {
    let (case, _) = blow_case_for(vd)?;
    let VirialData { e0, v0, i0, gamma } = *vd;
    let out = match case {
        BlowCase::I => {
            let disc = 16.0 * (v0 * v0 - 2.0 * i0 * e0) - i0 * i0 * gamma * gamma;
            2.0 * i0 / (disc.sqrt() - i0 * gamma - 4.0 * v0)
        }
        BlowCase::Ii => {
            if gamma == 0.0 {
                i0 / (4.0 * v0.abs())
            } else {
                (i0 * gamma / (i0 * gamma + 4.0 * v0).abs()).ln_1p() / gamma
            }
        }
        BlowCase::Iii | BlowCase::Iv => {
            if gamma == 0.0 {
                v0.abs() / (4.0 * e0)
            } else {
                // log(16E0/C1) = −log1p((I0γ² + 4V0γ)/(16E0))
                -((i0 * gamma * gamma + 4.0 * v0 * gamma) / (16.0 * e0)).ln_1p() / gamma
            }
        }
        BlowCase::V => {
            let c1 = i0 * gamma * gamma + 4.0 * v0 * gamma + 16.0 * e0;
            (i0 * gamma * gamma / c1.abs()).ln_1p() / gamma
        }
        BlowCase::NotApplicable => unreachable!("empty interval never matches"),
    };
    if out.is_finite() && out > 0.0 {
        Ok(out)
    } else {
        Err(Error::GammaOutOfRange {
            gamma,
            case: case.to_string(),
        })
    }
}

/// a = γ (Nα − 4 + 2b)/(4α).
pub fn damping_from_gamma(p: &ModelParams, gamma: f64) -> Result<f64> {
    let unit = model::blowup_gamma(&p.with_damping(1.0.into()))?;
    Ok(gamma / unit)
}

/// γ = 4α Re(a)/(Nα − 4 + 2b).
pub fn gamma_from_damping(p: &ModelParams, a: f64) -> Result<f64> {
    model::blowup_gamma(&p.with_damping(a.into()))
}

/// Root a* of e^{−αθ a T0}/(αθ a) = 1/((2C)^{α+1} ‖v0‖^α), by bisection.
pub fn scatter_damping_threshold(p: &ModelParams, t0: f64, norm_v0: f64, c: f64) -> Result<f64> {
    check_constant(c)?;
    if !(t0 > 0.0) {
        return Err(Error::InvalidParams(format!("T0 = {t0} must be positive")));
    }
    let k = subcritical_alpha_theta(p)?;
    let rhs = 1.0 / ((2.0 * c).powf(p.alpha + 1.0) * norm_v0.powf(p.alpha));
    if rhs.is_infinite() {
        return Ok(0.0);
    }
    // Compare logs: the left side spans (∞, 0) over a ∈ (0, ∞).
    let f = |a: f64| -k * a * t0 - (k * a).ln() - rhs.ln();
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoBracket { lo, hi });
        }
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn mass_critical_coupling(p: &ModelParams) -> Result<f64> {
    if (p.alpha - p.mass_critical_alpha()).abs() > model::CRITICAL_TOL * p.alpha.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "mass-critical threshold needs alpha = (4-2b)/N = {}, got {}",
            p.mass_critical_alpha(),
            p.alpha
        )));
    }
    if !(p.mu.re > 0.0) || p.mu.im != 0.0 {
        return Err(Error::InvalidParams(format!("mass-critical threshold needs real mu > 0, got {}", p.mu)));
    }
    Ok(p.mu.re)
}

/// μ^{−1/α} ‖Q‖₂.
pub fn mass_critical_threshold(p: &ModelParams, q_mass: f64) -> Result<f64> {
    let mu = mass_critical_coupling(p)?;
    Ok(mu.powf(-1.0 / p.alpha) * q_mass)
}

/// True when ‖u0‖₂ lies strictly below the threshold.
pub fn below_mass_threshold(p: &ModelParams, q_mass: f64, norm_u0: f64) -> Result<bool> {
    Ok(norm_u0 < mass_critical_threshold(p, q_mass)?)
}

/// F(u0) = 2E(0)‖Q‖^α/(‖Q‖^α − μ‖u0‖^α) · exp(μ‖u0‖^α/(‖Q‖^α − μ‖u0‖^α)),
/// which bounds e^{2Re(a)t}‖∇u(t)‖².
pub fn mass_critical_bound(p: &ModelParams, q_mass: f64, norm_u0: f64, e0: f64) -> Result<f64> {
    let mu = mass_critical_coupling(p)?;
    let threshold = mu.powf(-1.0 / p.alpha) * q_mass;
    if norm_u0 >= threshold {
        return Err(Error::ThresholdViolated {
            norm: norm_u0,
            threshold,
        });
    }
    let qa = q_mass.powf(p.alpha);
    let ua = mu * norm_u0.powf(p.alpha);
    let gap = qa - ua;
    Ok(2.0 * e0 * qa / gap * (ua / gap).exp())
}

/// The constant (N + 2 − b)/(μN) multiplying F(u0) in the weighted
/// potential bound.
pub fn mass_critical_potential_constant(p: &ModelParams) -> Result<f64> {
    let mu = mass_critical_coupling(p)?;
    Ok((p.n() + 2.0 - p.b) / (mu * p.n()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lifespan_lower: Option<TimeBound>,
    pub damping_threshold_global: Option<f64>,
    pub blow_case: BlowCase,
    pub gamma_interval: GammaInterval,
    pub blowup_upper: Option<f64>,
    pub gamma: Option<f64>,
    /// τ maximizing the two-dimensional bound, when that bound is used.
    pub tau: Option<f64>,
    pub calibration_c: f64,
}

impl BoundsReport {
    /// Collects every bound that applies to `p` with data summarized by
    /// ‖u0‖_{Ḣ^s} (‖u0‖_{H¹} for N = 2, s = 1) and, when available, its
    /// virial data.
    pub fn evaluate(p: &ModelParams, norm_u0: f64, virial: Option<VirialData>, c: f64) -> BoundsReport {
        let (lifespan, threshold, tau) = if p.dim == 2 && p.s == 1 {
            match lifespan_lower_2d_opt(p, norm_u0, c) {
                Ok((t, tau)) => (Some(t), lifespan_damping_threshold_2d(p, norm_u0, c).ok(), Some(tau)),
                Err(_) => (None, None, None),
            }
        } else {
            (
                lifespan_lower(p, norm_u0, c).ok(),
                lifespan_damping_threshold(p, norm_u0, c).ok(),
                None,
            )
        };
        let gamma = gamma_from_damping(p, p.damping()).ok();
        let (mut case, mut interval, mut upper) = (BlowCase::NotApplicable, GammaInterval::empty(), None);
        if let (Some(vd), Some(g)) = (virial, gamma) {
            let vd = vd.with_gamma(g);
            match blow_case_for(&vd) {
                Ok((cs, iv)) => {
                    case = cs;
                    interval = iv;
                    upper = blowup_upper(&vd).ok();
                }
                Err(_) => {
                    if let Some((cs, iv)) = blow_case_classify(vd.e0, vd.v0, vd.i0).last() {
                        case = *cs;
                        interval = *iv;
                    }
                }
            }
        }
        BoundsReport {
            lifespan_lower: lifespan,
            damping_threshold_global: threshold,
            blow_case: case,
            gamma_interval: interval,
            blowup_upper: upper,
            gamma,
            tau,
            calibration_c: c,
        }
    }
}
