//! Uniform periodic Cartesian grids on [−L, L)^N, FFT plumbing, the capped
//! singular weight |x|^{-b} and rectangle-rule quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Fraction of the half-width beyond which a point counts as boundary shell.
pub const BOUNDARY_SHELL: f64 = 0.9;

/// Point count above which line FFTs are distributed over the rayon pool.
const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
    spacing: f64,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl Grid {
    /// Builds the grid with `points_per_axis` points on each of `dim` axes.
    /// Requires a power of two ≥ 16 and L > 0.
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} outside 1..=3")));
        }
        if points_per_axis < 16 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} is not a power of two >= 16"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be > 0")));
        }
        let n = points_per_axis;
        let spacing = 2.0 * half_width / n as f64;
        let coords = (0..n).map(|i| -half_width + i as f64 * spacing).collect();
        let wavenumbers = (0..n)
            .map(|j| {
                let j = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                PI * j / half_width
            })
            .collect();
        Ok(Grid {
            dim,
            n,
            half_width,
            spacing,
            coords,
            wavenumbers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers π j / L in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Largest resolved wavenumber π n / (2L).
    pub fn max_wavenumber(&self) -> f64 {
        PI * self.n as f64 / (2.0 * self.half_width)
    }

    fn axis_index(&self, idx: usize, axis: usize) -> usize {
        let stride = self.n.pow((self.dim - 1 - axis) as u32);
        (idx / stride) % self.n
    }

    pub fn axis_coord(&self, idx: usize, axis: usize) -> f64 {
        self.coords[self.axis_index(idx, axis)]
    }

    pub fn axis_wavenumber(&self, idx: usize, axis: usize) -> f64 {
        self.wavenumbers[self.axis_index(idx, axis)]
    }

    /// Wavenumber with the Nyquist mode zeroed, for odd-order derivatives.
    pub fn axis_derivative_symbol(&self, idx: usize, axis: usize) -> f64 {
        let j = self.axis_index(idx, axis);
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumbers[j]
        }
    }

    pub fn radius_sq(&self, idx: usize) -> f64 {
        (0..self.dim).map(|d| self.axis_coord(idx, d).powi(2)).sum()
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.radius_sq(idx).sqrt()
    }

    pub fn k_sq(&self, idx: usize) -> f64 {
        (0..self.dim).map(|d| self.axis_wavenumber(idx, d).powi(2)).sum()
    }

    pub fn k_sq_array(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.k_sq(i)).collect()
    }

    pub fn radius_array(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.radius(i)).collect()
    }

    /// True for points with max_j |x_j| ≥ 0.9 L.
    pub fn in_boundary_shell(&self, idx: usize) -> bool {
        let edge = BOUNDARY_SHELL * self.half_width;
        (0..self.dim).any(|d| self.axis_coord(idx, d).abs() >= edge)
    }

    /// Rectangle rule: Σ f · h^N.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn integrate_complex(&self, f: &[Complex64]) -> Complex64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter().sum::<Complex64>() * self.cell_volume()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}^{} points on [-{}, {})^{} (h = {})",
            self.n, self.dim, self.half_width, self.half_width, self.dim, self.spacing
        )
    }
}

/// Complex state on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Field {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Field { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every grid point; `f` receives the point's coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> Complex64) -> Field {
        let dim = grid.dim();
        let mut x = [0.0; 3];
        let values = (0..grid.len())
            .map(|i| {
                for (d, xd) in x.iter_mut().enumerate().take(dim) {
                    *xd = grid.axis_coord(i, d);
                }
                f(&x[..dim])
            })
            .collect();
        Field { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ∫ |f|².
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Fraction of the mass in the outer shell max_j |x_j| ≥ 0.9 L.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let shell: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_boundary_shell(*i))
            .map(|(_, z)| z.norm_sqr())
            .sum();
        shell / total
    }

    pub fn scale(&mut self, factor: Complex64) {
        for z in &mut self.values {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Field {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// max |self − other|.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Analytic continuation of the lattice sum Σ'_{j ∈ Z^N} |j|^{-s}, for
/// 0 < s < N, via the theta-function splitting
///
/// Γ(s/2) π^{-s/2} Z(s) = 2/(s−N) − 2/s
///     + Σ' [ (π|j|²)^{-s/2} Γ(s/2, π|j|²) + (π|j|²)^{-(N−s)/2} Γ((N−s)/2, π|j|²) ].
pub fn lattice_zeta(dim: usize, s: f64) -> f64 {
    assert!((1..=3).contains(&dim) && s > 0.0 && s < dim as f64);
    let n = dim as f64;
    let upper = |a: f64, x: f64| puruspe::gammq(a, x) * puruspe::gamma(a);
    let reach: i64 = 5;
    let side = (2 * reach + 1) as usize;
    let mut sum = 0.0;
    for flat in 0..side.pow(dim as u32) {
        let mut q = 0i64;
        let mut rest = flat;
        for _ in 0..dim {
            let j = (rest % side) as i64 - reach;
            rest /= side;
            q += j * j;
        }
        if q == 0 {
            continue;
        }
        let x = PI * q as f64;
        sum += x.powf(-s / 2.0) * upper(s / 2.0, x) + x.powf(-(n - s) / 2.0) * upper((n - s) / 2.0, x);
    }
    let total = 2.0 / (s - n) - 2.0 / s + sum;
    total * PI.powf(s / 2.0) / puruspe::gamma(s / 2.0)
}

/// Discrete weight W(x) = |x|^{-b} away from the origin. The origin value
/// is either a plain cap ε^{-b} or the lattice-zeta correction −Z_N(b) h^{-b},
/// which removes the leading O(h^{N−b}) error of the rectangle rule for
/// ∫ |x|^{-b} g.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularWeight {
    pub b: f64,
    /// Radius ε with W ≤ ε^{-b}; for the corrected weight ε = W(0)^{-1/b}.
    pub cap_radius: f64,
    pub values: Vec<f64>,
    max: f64,
}

impl SingularWeight {
    /// W = max(|x|, ε)^{-b}.
    pub fn new(grid: &Grid, b: f64, cap_radius: f64) -> SingularWeight {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                if b == 0.0 {
                    1.0
                } else {
                    grid.radius(i).max(cap_radius).powf(-b)
                }
            })
            .collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        SingularWeight {
            b,
            cap_radius,
            values,
            max,
        }
    }

    /// Cap at half the grid spacing.
    pub fn with_half_spacing_cap(grid: &Grid, b: f64) -> SingularWeight {
        SingularWeight::new(grid, b, grid.spacing() / 2.0)
    }

    /// |x|^{-b} off the origin, −Z_N(b) h^{-b} at the origin.
    pub fn zeta_corrected(grid: &Grid, b: f64) -> SingularWeight {
        if b == 0.0 {
            return SingularWeight::new(grid, 0.0, grid.spacing());
        }
        let h = grid.spacing();
        let origin = -lattice_zeta(grid.dim(), b) * h.powf(-b);
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let r = grid.radius(i);
                if r < 0.5 * h {
                    origin
                } else {
                    r.powf(-b)
                }
            })
            .collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        SingularWeight {
            b,
            cap_radius: max.powf(-1.0 / b),
            values,
            max,
        }
    }

    /// The weight used throughout: the zeta-corrected origin value.
    pub fn with_default_cap(grid: &Grid, b: f64) -> SingularWeight {
        SingularWeight::zeta_corrected(grid, b)
    }

    /// Largest value of W on the grid.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// ∫ W |f|^p.
    pub fn weighted_power_integral(&self, field: &Field, p: f64) -> f64 {
        let s: f64 = field
            .values
            .iter()
            .zip(&self.values)
            .map(|(z, w)| w * z.norm().powf(p))
            .sum();
        s * field.grid.cell_volume()
    }
}

/// Forward/inverse N-dimensional FFT on a fixed grid.
///
/// The forward transform is unnormalized; the inverse divides by n^N.
#[derive(Clone)]
pub struct Spectral {
    grid: Arc<Grid>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k_sq: Arc<Vec<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Arc<Grid>) -> Spectral {
        let mut planner = FftPlanner::new();
        let n = grid.points_per_axis();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k_sq = Arc::new(grid.k_sq_array());
        Spectral { grid, fwd, inv, k_sq }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// |k|² in FFT order, Nyquist modes included.
    pub fn k_sq(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let norm = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let total = data.len();
        assert_eq!(total, self.grid.len());
        let parallel = total >= PARALLEL_THRESHOLD;
        let lines_per_task = (total / n / 64).max(1);

        let run_lines = |buf: &mut [Complex64]| {
            if parallel {
                buf.par_chunks_mut(n * lines_per_task)
                    .for_each(|chunk| plan.process(chunk));
            } else {
                plan.process(buf);
            }
        };

        // Last axis is contiguous.
        run_lines(data);
        if dim == 1 {
            return;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); total];
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            // Gather lines along `axis` into contiguous rows.
            let mut line = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    let row = &mut scratch[line * n..(line + 1) * n];
                    for (i, slot) in row.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    line += 1;
                }
            }
            run_lines(&mut scratch);
            let mut line = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    let row = &scratch[line * n..(line + 1) * n];
                    for (i, value) in row.iter().enumerate() {
                        data[base + i * stride] = *value;
                    }
                    line += 1;
                }
            }
        }
    }

    /// Forward transform of a copy of `field`.
    pub fn spectrum(&self, field: &Field) -> Vec<Complex64> {
        let mut hat = field.values.clone();
        self.forward(&mut hat);
        hat
    }

    /// ∫ |∇f|² by Parseval: h^N / n^N · Σ |k|² |f̂_k|².
    pub fn gradient_sq_norm(&self, field: &Field) -> f64 {
        let hat = self.spectrum(field);
        self.gradient_sq_norm_from_spectrum(&hat)
    }

    pub fn gradient_sq_norm_from_spectrum(&self, hat: &[Complex64]) -> f64 {
        let s: f64 = hat.iter().zip(self.k_sq.iter()).map(|(z, k2)| k2 * z.norm_sqr()).sum();
        s * self.grid.cell_volume() / self.grid.len() as f64
    }

    /// ∫ |f|² evaluated on the Fourier side.
    pub fn mass_from_spectrum(&self, hat: &[Complex64]) -> f64 {
        let s: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
        s * self.grid.cell_volume() / self.grid.len() as f64
    }

    /// ∂_axis f from its spectrum.
    pub fn derivative(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = hat
            .iter()
            .enumerate()
            .map(|(i, z)| z * Complex64::new(0.0, self.grid.axis_derivative_symbol(i, axis)))
            .collect();
        self.inverse(&mut out);
        out
    }

    /// H¹ norm (‖f‖² + ‖∇f‖²)^{1/2}, computed on the Fourier side.
    pub fn h1_norm(&self, field: &Field) -> f64 {
        let hat = self.spectrum(field);
        (self.mass_from_spectrum(&hat) + self.gradient_sq_norm_from_spectrum(&hat)).sqrt()
    }
}
