//! Pass/fail records for the JSON summary.

use serde::Serialize;

pub const KNOWN: &[&str] = &[
    "mass_law",
    "h_drift",
    "virial_residual",
    "gradient_bound",
    "domain",
    "barrier",
    "blowup_bound",
    "lifespan",
    "scatters",
    "decay_rate",
    "gs_residual",
    "gs_shape",
    "gs_refinement",
    "gs_oracle",
    "calibration",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Measured quantity.
    pub value: f64,
    /// Threshold it was compared against.
    pub limit: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            pass: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    pub fn flag(name: &str, pass: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
            detail: detail.into(),
        }
    }
}

/// Which checks to run: the explicit list when given, else the defaults.
pub struct Selection<'a> {
    explicit: &'a [String],
    defaults: &'static [&'static str],
}

impl<'a> Selection<'a> {
    pub fn new(explicit: &'a [String], defaults: &'static [&'static str]) -> Self {
        Selection { explicit, defaults }
    }

    pub fn wants(&self, name: &str) -> bool {
        if self.explicit.is_empty() {
            self.defaults.contains(&name)
        } else {
            self.explicit.iter().any(|n| n == name)
        }
    }
}
