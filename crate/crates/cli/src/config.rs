//! Experiment configuration. Files are flat `section.key = value` lines in
//! TOML syntax:
//!
//! ```text
//! experiment.kind = "simulate"
//! model.N = 1
//! model.b = 0.5
//! grid.points = 512
//! data.kind = "gaussian"
//! data.width = 1.0
//! ```
//!
//! `propagator.boundary_tol = inf` disables the boundary-mass monitor.

use std::fmt::Write as _;

use dinls::bounds::damping_from_gamma;
use dinls::dynamics::PropagatorConfig;
use dinls::groundstate::GroundStateOptions;
use dinls::initdata::DataRecipe;
use dinls::model::ModelParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error(transparent)]
    Model(#[from] dinls::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    BlowupVerify,
    LifespanVerify,
    ScatterVerify,
    Groundstate,
    Sweep,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::BlowupVerify => "blowup-verify",
            Kind::LifespanVerify => "lifespan-verify",
            Kind::ScatterVerify => "scatter-verify",
            Kind::Groundstate => "groundstate",
            Kind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Kind,
    /// Final time. blowup-verify defaults to 1.5 × the predicted bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(default = "one_u32")]
    pub s: u32,
    pub b: f64,
    /// Ignored by groundstate, which uses (4 − 2b)/N.
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub mu_im: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub a_im: f64,
    /// When set, Re a is derived from γ = 4α a/(Nα − 4 + 2b).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            points: 512,
            half_width: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Life-span constant C.
    #[serde(rename = "C")]
    pub c: f64,
    /// E0 is treated as zero when |E0| is below this.
    pub energy_snap: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection { c: 1.0, energy_snap: 1e-8 }
    }
}

/// Check selection and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    /// Names of checks to run; empty selects the defaults of the experiment.
    pub enabled: Vec<String>,
    pub mass_tol: f64,
    pub h_drift_tol: f64,
    pub virial_tol: f64,
    pub barrier_factor: f64,
    pub gradient_factor: f64,
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub residual_tol: f64,
    pub refine_tol: f64,
    pub oracle_tol: f64,
    pub oracle_mass_tol: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            enabled: Vec::new(),
            mass_tol: 1e-8,
            h_drift_tol: 1e-6,
            virial_tol: 1e-4,
            barrier_factor: 10.0,
            gradient_factor: 10.0,
            rate_lo: 0.75,
            rate_hi: 1.25,
            residual_tol: 1e-7,
            refine_tol: 1e-6,
            oracle_tol: 1e-5,
            oracle_mass_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    /// Number of equal intervals between stored samples on [0, T].
    pub samples: usize,
    /// Fit window as fractions of T.
    pub fit_start: f64,
    pub fit_end: f64,
}

impl Default for ScatterSection {
    fn default() -> Self {
        ScatterSection {
            samples: 40,
            fit_start: 0.25,
            fit_end: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    A,
    Gamma,
    Alpha,
    B,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Experiment run for every value.
    pub base: Kind,
    /// Fit C to the blow-up times of the calibration entries.
    #[serde(default)]
    pub calibrate: bool,
    /// Values used for calibration; empty means all values.
    #[serde(default)]
    pub calibration_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: String,
    pub json: String,
    pub profile: String,
    pub table: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: "diagnostics.csv".into(),
            json: "summary.json".into(),
            profile: "profile.csv".into(),
            table: "sweep.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRecipe>,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub scatter: ScatterSection,
    #[serde(default)]
    pub groundstate: GroundStateOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parses the flat dotted format. Errors carry the offending line and key.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.propagator.boundary_tol == Some(f64::INFINITY) {
            cfg.propagator.boundary_tol = None;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Emits every resolved key as one `section.key = value` line.
    pub fn to_flat_string(&self) -> String {
        let mut cfg = self.clone();
        cfg.propagator.boundary_tol.get_or_insert(f64::INFINITY);
        let value = toml::Value::try_from(&cfg).expect("config is always representable");
        let mut out = String::new();
        flatten("", &value, &mut out);
        out
    }

    /// Model parameters with γ resolved to a damping.
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let mut p = ModelParams::new(m.dim, m.s, m.b, m.alpha, m.mu, m.a)
            .with_mu(Complex64::new(m.mu, m.mu_im))
            .with_damping(Complex64::new(m.a, m.a_im));
        if let Some(gamma) = m.gamma {
            if m.a != 0.0 {
                return Err(ConfigError::Invalid {
                    key: "model.gamma".into(),
                    msg: "set either model.a or model.gamma, not both".into(),
                });
            }
            let a = damping_from_gamma(&p, gamma)?;
            p = p.with_damping(Complex64::new(a, m.a_im));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.propagator.validate()?;
        let bad = |key: &str, msg: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                msg,
            })
        };
        if let Some(t) = self.experiment.t_final {
            if !(t > 0.0) {
                return bad("experiment.t_final", format!("{t} must be positive"));
            }
        }
        if !(self.bounds.c > 0.0) {
            return bad("bounds.C", format!("{} must be positive", self.bounds.c));
        }
        let s = &self.scatter;
        if !(0.0 <= s.fit_start && s.fit_start < s.fit_end && s.fit_end <= 1.0) {
            return bad("scatter.fit_start", "need 0 <= fit_start < fit_end <= 1".into());
        }
        if s.samples < 6 {
            return bad("scatter.samples", format!("{} is fewer than 6", s.samples));
        }
        match (self.experiment.kind, &self.sweep) {
            (Kind::Sweep, None) => return bad("sweep.axis", "sweep experiments need a [sweep] section".into()),
            (Kind::Sweep, Some(sw)) if sw.base == Kind::Sweep || sw.base == Kind::Groundstate => {
                return bad("sweep.base", format!("{} cannot be swept", sw.base.name()))
            }
            _ => {}
        }
        let needs_data = !matches!(self.experiment.kind, Kind::Groundstate);
        if needs_data && self.data.is_none() {
            return bad("data.kind", "this experiment needs initial data".into());
        }
        for name in &self.checks.enabled {
            if !crate::checks::KNOWN.contains(&name.as_str()) {
                return bad("checks.enabled", format!("unknown check `{name}`"));
            }
        }
        Ok(())
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut String) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            let _ = writeln!(out, "{prefix} = {other}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment.kind = "simulate"
experiment.t_final = 2.0
model.N = 1
model.b = 0.5
model.alpha = 1.0
model.mu = -1.0
model.a = 0.2
grid.points = 256
grid.half_width = 20.0
propagator.dt0 = 0.001
propagator.boundary_tol = 1e-5
data.kind = "gaussian"
data.width = 1.0
"#;

    #[test]
    fn parses_flat_file() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.experiment.kind, Kind::Simulate);
        assert_eq!(c.model.dim, 1);
        assert_eq!(c.grid.points, 256);
        assert_eq!(c.propagator.boundary_tol, Some(1e-5));
        assert_eq!(
            c.data,
            Some(DataRecipe::Gaussian {
                width: 1.0,
                amplitude: 1.0,
                chirp: 0.0
            })
        );
        c.validate().unwrap();
        let p = c.params().unwrap();
        assert_eq!(p.damping(), 0.2);
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        let flat = c.to_flat_string();
        assert!(flat.contains("model.N = 1\n"));
        assert!(flat.lines().all(|l| !l.starts_with('[')));
        assert_eq!(ExperimentConfig::parse(&flat).unwrap(), c);

        let off = ExperimentConfig::parse(&SAMPLE.replace("1e-5", "inf")).unwrap();
        assert_eq!(off.propagator.boundary_tol, None);
        let flat = off.to_flat_string();
        assert!(flat.contains("propagator.boundary_tol = inf\n"), "{flat}");
        assert_eq!(ExperimentConfig::parse(&flat).unwrap(), off);
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = ExperimentConfig::parse("experiment.kind = \"simulate\"\nmodel.N = 1\nmodel.b = 0.5\nmodel.bogus = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn gamma_sets_damping() {
        let text = "experiment.kind = \"blowup-verify\"\nmodel.N = 2\nmodel.b = 0.5\nmodel.alpha = 2.0\nmodel.gamma = 1.0\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert!((c.params().unwrap().damping() - 0.125).abs() < 1e-15);
    }
}
