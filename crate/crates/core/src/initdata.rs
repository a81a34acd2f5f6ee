//! Initial data: Gaussians, chirped compactly supported bumps and the
//! amplitude tunings that place data at zero energy, at negative energy or
//! inside the positive-energy window.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::functionals::{variance, virial, weighted_potential, Diagnostics};
use crate::grid::{Field, Grid};
use crate::model::ModelParams;

/// A · e^{−|x|²/w²} · e^{−ic|x|²}. The width must stay below L/4.
pub fn gaussian(grid: Arc<Grid>, width: f64, amplitude: f64, chirp: f64) -> Result<Field> {
    let l = grid.half_width();
    if !(width > 0.0 && width < l / 4.0) {
        return Err(Error::InitData(format!("width {width} outside (0, L/4) for L = {l}")));
    }
    Ok(Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar(amplitude * (-r2 / (width * width)).exp(), -chirp * r2)
    }))
}

/// Smooth C^∞ step: 1 for s ≤ 0, 0 for s ≥ 1.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (f(1.0 - s), f(s));
    a / (a + b)
}

/// Radial cutoff equal to 1 inside 0.6L and vanishing beyond 0.8L.
pub fn cutoff(r: f64, half_width: f64) -> f64 {
    let (r0, r1) = (0.6 * half_width, 0.8 * half_width);
    smooth_step((r - r0) / (r1 - r0))
}

/// Gaussian times the compact cutoff: a chirped bump e^{−ic|x|²}Θ(x).
pub fn chirped_bump(grid: Arc<Grid>, width: f64, amplitude: f64, chirp: f64) -> Result<Field> {
    let l = grid.half_width();
    let mut f = gaussian(grid.clone(), width, amplitude, chirp)?;
    for (i, z) in f.values.iter_mut().enumerate() {
        *z *= cutoff(grid.radius(i), l);
    }
    Ok(f)
}

/// Closed-form moments of the Gaussian on R^N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMoments {
    pub mass: f64,
    pub variance: f64,
    pub virial: f64,
}

pub fn gaussian_moments(dim: usize, width: f64, amplitude: f64, chirp: f64) -> GaussianMoments {
    let n = dim as f64;
    let mass = amplitude * amplitude * (std::f64::consts::FRAC_PI_2).powf(n / 2.0) * width.powf(n);
    let variance = mass * n * width * width / 4.0;
    GaussianMoments {
        mass,
        variance,
        virial: -2.0 * chirp * variance,
    }
}

fn focusing_potential(phi: &Field, ctx: &Diagnostics) -> Result<(f64, f64)> {
    let mu = ctx.params.mu.re;
    if !(mu > 0.0) {
        return Err(Error::InitData(format!("Re μ = {mu} ≤ 0: the energy cannot be made negative")));
    }
    let pot = weighted_potential(phi, &ctx.params, &ctx.weight);
    if !(pot > 0.0) {
        return Err(Error::InitData("weighted norm ∫W|ψ|^{α+2} vanishes".into()));
    }
    Ok((mu, pot))
}

/// Zero of E(σψ) in σ for Re μ > 0:
/// σ^α = ((α+2)/(2 Re μ)) ‖∇ψ‖² / ∫W|ψ|^{α+2}.
pub fn sigma_zero_energy(psi: &Field, ctx: &Diagnostics) -> Result<f64> {
    let (mu, pot) = focusing_potential(psi, ctx)?;
    let alpha = ctx.params.alpha;
    let grad = ctx.spectral.gradient_sq_norm(psi);
    Ok(((alpha + 2.0) / (2.0 * mu) * grad / pot).powf(1.0 / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaTuning {
    /// Exact crossing E(λ*φ) = 0.
    pub lambda_star: f64,
    /// Smallest λ = 2^k with E(λφ) < 0.
    pub lambda: f64,
}

/// Amplitude making E(λφ) negative, found by doubling from 1 and compared
/// with the closed-form crossing.
pub fn tune_lambda_negative_energy(phi: &Field, ctx: &Diagnostics) -> Result<LambdaTuning> {
    let lambda_star = sigma_zero_energy(phi, ctx)?;
    let mut lambda = 1.0;
    let mut guard = 0;
    while ctx.energy(&phi.scaled(Complex64::new(lambda, 0.0))) >= 0.0 {
        lambda *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InitData("doubling search for negative energy diverged".into()));
        }
    }
    Ok(LambdaTuning { lambda_star, lambda })
}

/// Open interval (σ_min, σ_max) of amplitudes with
/// (α+2)(½‖∇ψ‖² − 4‖xψ‖²)/∫W|ψ|^{α+2} < σ^α < ((α+2)/2)‖∇ψ‖²/∫W|ψ|^{α+2},
/// both sides divided by Re μ. A negative left end is clamped to σ_min = 0.
pub fn sigma_window(psi: &Field, ctx: &Diagnostics) -> Result<(f64, f64)> {
    let (mu, pot) = focusing_potential(psi, ctx)?;
    let alpha = ctx.params.alpha;
    let grad = ctx.spectral.gradient_sq_norm(psi);
    let xsq = variance(psi);
    let left = (alpha + 2.0) * (0.5 * grad - 4.0 * xsq) / (mu * pot);
    let right = (alpha + 2.0) / 2.0 * grad / (mu * pot);
    if left >= right {
        return Err(Error::InitData(format!("empty σ window: left {left} ≥ right {right}")));
    }
    let root = |s: f64| if s > 0.0 { s.powf(1.0 / alpha) } else { 0.0 };
    Ok((root(left), root(right)))
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_position() -> f64 {
    0.5
}

fn default_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataRecipe {
    Gaussian {
        width: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        chirp: f64,
    },
    ChirpedBump {
        width: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        chirp: f64,
    },
    /// factor · λ* times the unit-amplitude Gaussian.
    ScaledLambda {
        width: f64,
        #[serde(default)]
        chirp: f64,
        #[serde(default = "default_factor")]
        factor: f64,
    },
    /// σψ at zero energy. With `target_variance` set, the width is solved
    /// so that I(σψ) equals it and `width` is the initial guess.
    SigmaZeroEnergy {
        width: f64,
        #[serde(default)]
        chirp: f64,
        #[serde(default)]
        target_variance: Option<f64>,
    },
    /// σψ with σ^α at fraction `position` of the way across the window.
    SigmaWindow {
        width: f64,
        #[serde(default)]
        chirp: f64,
        #[serde(default = "default_position")]
        position: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BuiltData {
    #[serde(skip)]
    pub field: Field,
    pub recipe: DataRecipe,
    /// Width actually used.
    pub width: f64,
    /// Overall amplitude factor applied to the shape.
    pub scale: f64,
    pub mass: f64,
    pub e0: f64,
    pub v0: f64,
    pub i0: f64,
    pub h1_norm: f64,
}

impl DataRecipe {
    pub fn width(&self) -> f64 {
        match *self {
            DataRecipe::Gaussian { width, .. }
            | DataRecipe::ChirpedBump { width, .. }
            | DataRecipe::ScaledLambda { width, .. }
            | DataRecipe::SigmaZeroEnergy { width, .. }
            | DataRecipe::SigmaWindow { width, .. } => width,
        }
    }

    /// Builds the field with the same weight the propagator will use.
    pub fn build(&self, grid: Arc<Grid>, params: &ModelParams, cap_radius: Option<f64>) -> Result<BuiltData> {
        let ctx = Propagator::new(*params, grid.clone(), cap_radius).diagnostics();
        let (field, width, scale) = match *self {
            DataRecipe::Gaussian { width, amplitude, chirp } => (gaussian(grid, width, amplitude, chirp)?, width, amplitude),
            DataRecipe::ChirpedBump { width, amplitude, chirp } => {
                (chirped_bump(grid, width, amplitude, chirp)?, width, amplitude)
            }
            DataRecipe::ScaledLambda { width, chirp, factor } => {
                let phi = gaussian(grid, width, 1.0, chirp)?;
                let lambda = factor * tune_lambda_negative_energy(&phi, &ctx)?.lambda_star;
                (phi.scaled(Complex64::new(lambda, 0.0)), width, lambda)
            }
            DataRecipe::SigmaZeroEnergy {
                width,
                chirp,
                target_variance,
            } => {
                let width = match target_variance {
                    Some(target) => solve_width_for_variance(&grid, &ctx, chirp, target, width)?,
                    None => width,
                };
                let psi = chirped_bump(grid, width, 1.0, chirp)?;
                let sigma = sigma_zero_energy(&psi, &ctx)?;
                (psi.scaled(Complex64::new(sigma, 0.0)), width, sigma)
            }
            DataRecipe::SigmaWindow { width, chirp, position } => {
                if !(position > 0.0 && position < 1.0) {
                    return Err(Error::InitData(format!("window position {position} outside (0, 1)")));
                }
                let psi = chirped_bump(grid, width, 1.0, chirp)?;
                let (lo, hi) = sigma_window(&psi, &ctx)?;
                let alpha = params.alpha;
                let s_alpha = lo.powf(alpha) + position * (hi.powf(alpha) - lo.powf(alpha));
                let sigma = s_alpha.powf(1.0 / alpha);
                (psi.scaled(Complex64::new(sigma, 0.0)), width, sigma)
            }
        };
        Ok(BuiltData {
            mass: field.mass(),
            e0: ctx.energy(&field),
            v0: virial(&field, &ctx.spectral),
            i0: variance(&field),
            h1_norm: ctx.spectral.h1_norm(&field),
            field,
            recipe: self.clone(),
            width,
            scale,
        })
    }
}

/// Width w of the zero-energy chirped bump σ(w)ψ_w whose variance equals
/// `target`, by bisection on ln w. The initial guess sets the bracket scale.
pub fn solve_width_for_variance(grid: &Arc<Grid>, ctx: &Diagnostics, chirp: f64, target: f64, guess: f64) -> Result<f64> {
    let l = grid.half_width();
    let eval = |w: f64| -> Result<f64> {
        let psi = chirped_bump(grid.clone(), w, 1.0, chirp)?;
        let sigma = sigma_zero_energy(&psi, ctx)?;
        Ok(sigma * sigma * variance(&psi) - target)
    };
    let w_max = 0.999 * l / 4.0;
    let mut lo = (guess / 16.0).max(4.0 * grid.spacing());
    let mut hi = w_max;
    let (flo, fhi) = (eval(lo)?, eval(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let increasing = fhi > flo;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
        if (eval(mid)? > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
