//! Radial ground state for the mass-critical power α = (4 − 2b)/N: the
//! positive decreasing solution of
//!
//! ```text
//! Q'' + ((N−1)/r) Q' − Q + r^{-b} Q^{1+α} = 0,   Q'(0) = 0,   Q(∞) = 0,
//! ```
//!
//! found by shooting on Q(0) with bisection between undershooting (Q turns
//! back up) and overshooting (Q crosses zero) initial values.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateOptions {
    /// Outer radius R.
    pub radius: f64,
    /// Relative tolerance on Q(0).
    pub tol: f64,
    /// First node of the graded grid.
    pub r_min: f64,
    /// Geometric growth factor of the graded part.
    pub ratio: f64,
    /// Spacing of the uniform outer part.
    pub h_max: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            radius: 20.0,
            tol: 1e-15,
            r_min: 1e-6,
            ratio: 1.01,
            h_max: 0.005,
        }
    }
}

impl GroundStateOptions {
    /// Halves every spacing of the radial grid.
    pub fn refined(&self) -> Self {
        GroundStateOptions {
            r_min: self.r_min / 2.0,
            ratio: self.ratio.sqrt(),
            h_max: self.h_max / 2.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub b: f64,
    pub alpha: f64,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    /// Q′ at the nodes.
    pub dq: Vec<f64>,
    /// ‖Q‖₂² on R^N.
    pub mass: f64,
    /// Last node integrated by the ODE; beyond it the asymptotic tail is used.
    pub matched_index: usize,
}

/// Surface measure of the unit sphere in R^N (2 points for N = 1).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {dim} outside 1..=3"),
    }
}

fn radial_grid(opts: &GroundStateOptions) -> Vec<f64> {
    let mut r = vec![opts.r_min];
    let mut x = opts.r_min;
    while x < opts.radius {
        let step = (x * (opts.ratio - 1.0)).min(opts.h_max);
        x = (x + step).min(opts.radius);
        r.push(x);
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Under,
    Over,
    Reached,
}

struct Trace {
    q: Vec<f64>,
    dq: Vec<f64>,
    m: Vec<f64>,
    shot: Shot,
}

struct Shooter {
    dim: usize,
    b: f64,
    alpha: f64,
    r: Vec<f64>,
}

impl Shooter {
    fn rhs(&self, r: f64, y: [f64; 3]) -> [f64; 3] {
        let [q, p, _] = y;
        let n1 = (self.dim - 1) as f64;
        let nl = r.powf(-self.b) * q.abs().powf(self.alpha) * q;
        [p, -n1 / r * p + q - nl, q * q * r.powi(self.dim as i32 - 1)]
    }

    /// Series start at r₀: Q ≈ Q0 + Q0 r²/(2N) − c r^{2−b}.
    fn start(&self, q0: f64) -> [f64; 3] {
        let (n, b) = (self.dim as f64, self.b);
        let r0 = self.r[0];
        let c = q0.powf(1.0 + self.alpha) / ((2.0 - b) * (n - b));
        let q = q0 + q0 * r0 * r0 / (2.0 * n) - c * r0.powf(2.0 - b);
        let p = q0 * r0 / n - c * (2.0 - b) * r0.powf(1.0 - b);
        let m = q0 * q0 * r0.powf(n) / n;
        [q, p, m]
    }

    fn shoot(&self, q0: f64, keep: bool) -> Trace {
        let mut y = self.start(q0);
        let mut trace = Trace {
            q: Vec::new(),
            dq: Vec::new(),
            m: Vec::new(),
            shot: Shot::Reached,
        };
        let push = |t: &mut Trace, y: [f64; 3]| {
            t.q.push(y[0]);
            t.dq.push(y[1]);
            t.m.push(y[2]);
        };
        if !(y[0] > 0.0) {
            trace.shot = Shot::Over;
            return trace;
        }
        if keep {
            push(&mut trace, y);
        }
        for w in self.r.windows(2) {
            let (r0, h) = (w[0], w[1] - w[0]);
            let k1 = self.rhs(r0, y);
            let k2 = self.rhs(r0 + 0.5 * h, add(y, k1, 0.5 * h));
            let k3 = self.rhs(r0 + 0.5 * h, add(y, k2, 0.5 * h));
            let k4 = self.rhs(r0 + h, add(y, k3, h));
            for j in 0..3 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            if !y[0].is_finite() || y[0] <= 0.0 {
                trace.shot = Shot::Over;
                return trace;
            }
            if keep {
                push(&mut trace, y);
            }
            if y[1] > 0.0 {
                trace.shot = Shot::Under;
                return trace;
            }
        }
        trace
    }
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// Solves for the ground state with α = (4 − 2b)/N.
pub fn solve_ground_state(dim: usize, b: f64, opts: &GroundStateOptions) -> Result<RadialProfile> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParams(format!("dimension {dim} outside 1..=3")));
    }
    if !(b >= 0.0 && b < (dim as f64).min(2.0)) {
        return Err(Error::InvalidParams(format!("b = {b} outside [0, min(2, N))")));
    }
    if !(opts.radius > 1.0 && opts.r_min > 0.0 && opts.ratio > 1.0 && opts.h_max > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidParams(format!("invalid ground-state options {opts:?}")));
    }
    let alpha = (4.0 - 2.0 * b) / dim as f64;
    let shooter = Shooter {
        dim,
        b,
        alpha,
        r: radial_grid(opts),
    };

    let (mut lo, mut hi) = (1e-3, 1e3);
    if shooter.shoot(lo, false).shot != Shot::Under || shooter.shoot(hi, false).shot != Shot::Over {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..400 {
        if hi - lo <= opts.tol * hi {
            break;
        }
        let mid = if hi / lo > 1.5 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        match shooter.shoot(mid, false).shot {
            Shot::Over => hi = mid,
            // A shot that reaches R without turning is resolved to the
            // undershooting side: it has not crossed zero.
            Shot::Under | Shot::Reached => lo = mid,
        }
    }

    let under = shooter.shoot(lo, true);
    let over = shooter.shoot(hi, true);
    let limit = under.q.len().min(over.q.len());
    // The two bracketing shots agree until the growing mode separates them.
    let mut matched = 0;
    for i in 0..limit {
        let (a, c) = (under.q[i], over.q[i]);
        let mean = 0.5 * (a + c);
        if (a - c).abs() > 1e-6 * mean || under.dq[i] >= 0.0 || over.dq[i] >= 0.0 {
            break;
        }
        matched = i;
    }
    // Step back from the separation point.
    let matched = matched.saturating_sub(8).max(1);

    let r = shooter.r.clone();
    let mut q = Vec::with_capacity(r.len());
    let mut dq = Vec::with_capacity(r.len());
    for i in 0..=matched {
        q.push(0.5 * (under.q[i] + over.q[i]));
        dq.push(0.5 * (under.dq[i] + over.dq[i]));
    }
    let (rm, qm) = (r[matched], q[matched]);
    let expo = (dim as f64 - 1.0) / 2.0;
    for &ri in &r[matched + 1..] {
        let qi = qm * (rm / ri).powf(expo) * (-(ri - rm)).exp();
        q.push(qi);
        dq.push(-qi * (1.0 + expo / ri));
    }
    let interior_mass = 0.5 * (under.m[matched] + over.m[matched]);
    let tail_mass = qm * qm * rm.powi(dim as i32 - 1) / 2.0;
    let mass = sphere_measure(dim) * (interior_mass + tail_mass);

    Ok(RadialProfile {
        dim,
        b,
        alpha,
        r,
        q,
        dq,
        mass,
        matched_index: matched,
    })
}

/// ‖Q‖₂.
pub fn q_mass(profile: &RadialProfile) -> f64 {
    profile.mass.max(0.0).sqrt()
}

/// Derivative weights at x[i] of the Lagrange polynomial through `x`.
fn lagrange_derivative_weights(x: &[f64], i: usize) -> Vec<f64> {
    let xi = x[i];
    (0..x.len())
        .map(|j| {
            if j == i {
                (0..x.len()).filter(|&k| k != i).map(|k| 1.0 / (xi - x[k])).sum()
            } else {
                let num: f64 = (0..x.len()).filter(|&k| k != i && k != j).map(|k| xi - x[k]).product();
                let den: f64 = (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
                num / den
            }
        })
        .collect()
}

impl RadialProfile {
    pub fn q0(&self) -> f64 {
        // Q(r_min) differs from Q(0) by O(r_min^{2−b}).
        let (n, b) = (self.dim as f64, self.b);
        let r0 = self.r[0];
        let q = self.q[0];
        // Invert the series start to first order.
        let c = q.powf(1.0 + self.alpha) / ((2.0 - b) * (n - b));
        q + c * r0.powf(2.0 - b) - q * r0 * r0 / (2.0 * n)
    }

    /// Largest scaled ODE residual over interior integrated nodes, with Q″
    /// from a five-point Lagrange derivative of the stored Q′.
    pub fn max_residual(&self) -> f64 {
        let n1 = (self.dim - 1) as f64;
        let q0 = self.q0();
        let last = self.matched_index.min(self.r.len() - 1);
        let mut worst: f64 = 0.0;
        for i in 2..last.saturating_sub(2) {
            let xs = &self.r[i - 2..=i + 2];
            let w = lagrange_derivative_weights(xs, 2);
            let d2: f64 = w.iter().zip(&self.dq[i - 2..=i + 2]).map(|(a, b)| a * b).sum();
            let (r, q, p) = (self.r[i], self.q[i], self.dq[i]);
            let terms = [d2, n1 / r * p, -q, r.powf(-self.b) * q.powf(1.0 + self.alpha)];
            let res: f64 = terms.iter().sum();
            let scale = terms.iter().fold(q0, |m, t| m.max(t.abs()));
            worst = worst.max(res.abs() / scale);
        }
        worst
    }

    /// True when Q is positive and strictly decreasing at every node.
    pub fn is_positive_decreasing(&self) -> bool {
        self.q.iter().all(|&v| v > 0.0) && self.q.windows(2).all(|w| w[1] < w[0])
    }

    /// Linear interpolation of Q; Q(r) = Q(r_min) below the first node and
    /// 0 beyond R.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r[0] {
            return self.q0() + (self.q[0] - self.q0()) * (r / self.r[0]);
        }
        let last = self.r.len() - 1;
        if r >= self.r[last] {
            return 0.0;
        }
        let j = self.r.partition_point(|&x| x <= r);
        let (r0, r1) = (self.r[j - 1], self.r[j]);
        let t = (r - r0) / (r1 - r0);
        self.q[j - 1] * (1.0 - t) + self.q[j] * t
    }

    /// Two-column CSV (r, Q).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,Q\n");
        for (r, q) in self.r.iter().zip(&self.q) {
            let _ = writeln!(out, "{r:.17e},{q:.17e}");
        }
        out
    }
}
