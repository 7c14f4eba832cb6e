//! Run configuration shared by the library pipeline and the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advsdp::SolverOptions;
use crate::error::{Error, Result};
use crate::graphrefl::{DEFAULT_KAPPA, KERNEL_THRESHOLD};
use crate::spectral::{default_c_grid, default_gamma_grid, default_theta_grid, COMPARE_SLACK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worst allowed dual constraint residual.
    pub tol_feas: f64,
    /// Relative duality gap for certification.
    pub tol_obj: f64,
    /// Relative eigenvalue cutoff for the kernel of `A_G`.
    pub tol_ker: f64,
    /// Absolute slack when comparing a measured mass to its bound.
    pub tol_gap: f64,
    pub kappa: f64,
    pub max_iter: usize,
    pub gamma_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub seed: u64,
    /// Monte-Carlo trials per input; `0` skips sampling.
    pub trials: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_obj: 1e-4,
            tol_ker: KERNEL_THRESHOLD,
            tol_gap: COMPARE_SLACK,
            kappa: DEFAULT_KAPPA,
            max_iter: 100,
            gamma_grid: default_gamma_grid(),
            c_grid: default_c_grid(),
            theta_grid: default_theta_grid(),
            seed: 0,
            trials: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_feas", self.tol_feas),
            ("tol_obj", self.tol_obj),
            ("tol_ker", self.tol_ker),
            ("tol_gap", self.tol_gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 1], got {}",
                self.kappa
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        for (name, grid) in [
            ("gamma_grid", &self.gamma_grid),
            ("c_grid", &self.c_grid),
            ("theta_grid", &self.theta_grid),
        ] {
            if grid.is_empty() || grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::Config(format!(
                    "{name} must be a nonempty list of finite nonnegative values"
                )));
            }
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol_feas: self.tol_feas,
            tol_obj: self.tol_obj,
            max_iter: self.max_iter,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = crate::io::to_json_string(&cfg);
        assert_eq!(RunConfig::from_json_str(&text).unwrap(), cfg);
        assert_eq!(cfg.gamma_grid.len(), 51);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = RunConfig::from_json_str(r#"{"kappa": 0.5, "seed": 9}"#).unwrap();
        assert_eq!(cfg.kappa, 0.5);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tol_feas, 1e-8);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"kappa": 0.0}"#,
            r#"{"kappa": 1.5}"#,
            r#"{"tol_feas": -1e-3}"#,
            r#"{"tol_gap": 0}"#,
            r#"{"c_grid": []}"#,
            r#"{"theta_grid": [-1.0]}"#,
            r#"{"unknown": 1}"#,
            "not json",
        ] {
            assert!(
                matches!(RunConfig::from_json_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
