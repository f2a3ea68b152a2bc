//! Run configuration: one JSON document per invocation, with a few
//! command-line overrides layered on top.

use impspps_core::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Spectral parameter in the config: either a real number or an [re, im]
/// pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl RhoSpec {
    pub fn to_c64(self) -> impspps_core::C64 {
        match self {
            RhoSpec::Real(r) => impspps_core::C64::new(r, 0.0),
            RhoSpec::Complex([re, im]) => impspps_core::C64::new(re, im),
        }
    }
}

/// One experiment: impedance, interval, grid, and the per-command knobs.
/// Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Impedance id: "unit", "affine", "exp:<c>", or "file:<path>".
    pub impedance: String,
    /// Interval endpoints [l, r], l < r.
    pub interval: [f64; 2],
    /// Anchor x0 for formal powers and series; defaults to 0.
    #[serde(default)]
    pub anchor: f64,
    /// Number of grid nodes.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Output directory; defaults to the working directory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,

    /// Formal-power table order K.
    #[serde(default)]
    pub order: Option<usize>,
    /// Solution kind for `solve`: "e", "c", or "s".
    #[serde(default)]
    pub kind: Option<String>,
    /// Spectral parameter for `solve`.
    #[serde(default)]
    pub rho: Option<RhoSpec>,
    /// Fixed series truncation for `solve` (term count N, series index 0..=N);
    /// automatic tail-based truncation when absent.
    #[serde(default)]
    pub terms: Option<usize>,

    /// Number of eigenvalues for `eigen`.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Scan ceiling for `eigen`; estimated from n_max when absent.
    #[serde(default)]
    pub lambda_max: Option<f64>,

    /// Projection orders for `approx`.
    #[serde(default)]
    pub orders: Option<Vec<usize>>,
    /// Lebesgue exponents for `approx` error tables.
    #[serde(default)]
    pub p_values: Option<Vec<f64>>,
    /// Target ids for `approx`: "exp", "sin", "cwave", "abs-smooth", "xsq".
    #[serde(default)]
    pub targets: Option<Vec<String>>,

    /// Fourier modes per kernel slice for `kernel`.
    #[serde(default)]
    pub j_modes: Option<usize>,
    /// Kernel domain for `kernel`: "rectangle" (default) or "triangle".
    #[serde(default)]
    pub domain: Option<String>,
    /// t-samples per slice in the kernel CSV dump.
    #[serde(default)]
    pub t_samples: Option<usize>,
}

fn default_grid_n() -> usize {
    801
}

/// Command-line overrides applied after the file is parsed.
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub impedance: Option<String>,
    pub grid_n: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        if let Some(out) = overrides.out {
            config.out_dir = Some(out);
        }
        if let Some(id) = overrides.impedance {
            config.impedance = id;
        }
        if let Some(n) = overrides.grid_n {
            config.grid_n = n;
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let [l, r] = self.interval;
        if !(l.is_finite() && r.is_finite() && l < r) {
            return Err(Error::Config(format!(
                "interval endpoints must be finite and ordered, got [{l}, {r}]"
            )));
        }
        if !(self.anchor >= l && self.anchor <= r) {
            return Err(Error::Config(format!(
                "anchor {} lies outside [{l}, {r}]",
                self.anchor
            )));
        }
        if self.grid_n < 9 {
            return Err(Error::Config(format!(
                "grid_n must be at least 9, got {}",
                self.grid_n
            )));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
