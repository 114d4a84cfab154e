use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Margin on `C - max eigenvalue of Hess b²`.
    pub inequality: f64,
    /// Closed-form identities such as the Hessian/H consistency.
    pub identity: f64,
    /// Relative residual of the `ΔG^α` identity.
    pub power_identity: f64,
    pub slack: f64,
    pub triangle: f64,
    /// Proof-term signs, relative to `max(1, n(n-2)/2 C² G^{2α-1})`.
    pub audit: f64,
    pub oracle_residual: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub parallel_ricci: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            inequality: 1e-8,
            identity: 1e-9,
            power_identity: 1e-6,
            slack: 1e-6,
            triangle: 1e-7,
            audit: 1e-10,
            oracle_residual: 1e-4,
            ratio_min: 3.5,
            ratio_max: 4.5,
            parallel_ricci: 1e-5,
        }
    }
}

/// Everything a run depends on. Every field has a default, a JSON file can
/// set any subset, and command-line flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub grid_size: usize,
    /// Allow `C < 10` and label the run exploratory.
    pub exploratory: bool,
    /// Known `D` with `Hess b² ≤ D g`, enabling the `Λ` lower-bound check.
    pub uniform_bound: Option<f64>,
    pub hypothesis_probes: usize,
    pub tolerances: Tolerances,
    pub lambdas: Vec<f64>,
    /// Random endpoint pairs for `corollary`.
    pub triples: usize,
    pub triple_r_min: f64,
    pub triple_r_max: f64,
    /// Radii for `audit`; empty means nine log-spaced radii across the grid.
    pub audit_radii: Vec<f64>,
    /// Charts for `oracle commutators`.
    pub charts: Vec<String>,
    /// Random probe points per chart, on top of the chart's default point.
    pub probes: usize,
    pub oracle_h: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Add wall-clock timings to the report (breaks byte-identical output).
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "euclidean".into(),
            n: 4,
            c: 10.0,
            r_min: 1e-2,
            r_max: 1e2,
            grid_size: 512,
            exploratory: false,
            uniform_bound: None,
            hypothesis_probes: 9,
            tolerances: Tolerances::default(),
            lambdas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            triples: 100,
            triple_r_min: 0.2,
            triple_r_max: 5.0,
            audit_radii: Vec::new(),
            charts: vec!["sphere:1".into(), "s2xr2".into()],
            probes: 8,
            oracle_h: 1e-3,
            seed: 0,
            output_dir: None,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n < 3 {
            return bad(format!("n = {} but models need n >= 3", self.n));
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return bad(format!("C = {} must be a finite nonnegative number", self.c));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return bad(format!(
                "radius range [{}, {}] is not a positive interval",
                self.r_min, self.r_max
            ));
        }
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return bad(format!("lambda {l} outside [0, 1]"));
        }
        if !(self.triple_r_min > 0.0 && self.triple_r_max >= self.triple_r_min) {
            return bad("triple radius range must be positive and ordered".into());
        }
        if self.triple_r_min < self.r_min || self.triple_r_max > self.r_max {
            return bad("triple radii must lie inside [r_min, r_max]".into());
        }
        if !(self.oracle_h.is_finite() && self.oracle_h > 0.0) {
            return bad("oracle_h must be positive".into());
        }
        if self.hypothesis_probes < 2 {
            return bad("hypothesis_probes must be at least 2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = RunConfig::from_json(r#"{"model": "cone:0.5", "C": 12, "tolerances": {"slack": 1e-5}}"#).unwrap();
        assert_eq!(cfg.model, "cone:0.5");
        assert_eq!(cfg.c, 12.0);
        assert_eq!(cfg.tolerances.slack, 1e-5);
        assert_eq!(cfg.tolerances.inequality, 1e-8);
        assert_eq!(cfg.grid_size, 512);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"modle": "euclidean"}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let cfg = RunConfig {
            n: 2,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            lambdas: vec![1.5],
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
