//! Experiment settings: command-line flags over a JSON config file over defaults.

use clap::Args;
use rieszlab_core::QuadratureConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Overrides for the quadrature controls. In a config file they live under `quad`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSettings {
    /// Relative tolerance of adaptive integration.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Absolute tolerance of adaptive integration.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Maximum subdivision depth.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Gauss points per axis on each cell.
    #[arg(long)]
    pub base_rule_order: Option<usize>,
    /// Grading near the singular point: cells refine until diam <= ratio * distance.
    #[arg(long)]
    pub singular_refine_ratio: Option<f64>,
    /// Sample count for the Monte-Carlo method.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Cell budget of one adaptive integration.
    #[arg(long)]
    pub max_cells: Option<usize>,
}

impl QuadSettings {
    pub fn merge(self, file: QuadSettings) -> QuadSettings {
        QuadSettings {
            rel_tol: self.rel_tol.or(file.rel_tol),
            abs_tol: self.abs_tol.or(file.abs_tol),
            max_depth: self.max_depth.or(file.max_depth),
            base_rule_order: self.base_rule_order.or(file.base_rule_order),
            singular_refine_ratio: self.singular_refine_ratio.or(file.singular_refine_ratio),
            mc_samples: self.mc_samples.or(file.mc_samples),
            max_cells: self.max_cells.or(file.max_cells),
        }
    }

    /// Applies the set fields to `base`.
    pub fn apply(&self, mut base: QuadratureConfig<f64>) -> QuadratureConfig<f64> {
        if let Some(v) = self.rel_tol {
            base.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            base.abs_tol = v;
        }
        if let Some(v) = self.max_depth {
            base.max_depth = v;
        }
        if let Some(v) = self.base_rule_order {
            base.base_rule_order = v;
        }
        if let Some(v) = self.singular_refine_ratio {
            base.singular_refine_ratio = v;
        }
        if let Some(v) = self.mc_samples {
            base.mc_samples = v;
        }
        if let Some(v) = self.max_cells {
            base.max_cells = v;
        }
        base
    }
}

/// Every setting a subcommand may read. Unset fields fall back to the config file, then
/// to the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Domain spec, e.g. `ball:0,0,0:1`.
    #[arg(long)]
    pub domain: Option<String>,
    /// Kernel spec, e.g. `riesz:alpha=2,dim=3`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Evaluation point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Sweep direction, comma separated (normalized internally).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// RNG seed; required by every randomized command.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Boundary samples of a profile.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sweep directions tested by `ball-test`.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Smallest separation of a kernel scan.
    #[arg(long, allow_hyphen_values = true)]
    pub smin: Option<f64>,
    /// Largest separation of a kernel scan.
    #[arg(long)]
    pub smax: Option<f64>,
    /// Grid points of a kernel scan or sweep table.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Plane positions per direction in `verify-lemmas`.
    #[arg(long)]
    pub n_lambda: Option<usize>,
    /// Cap points per plane position in `verify-lemmas`.
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Points of the approach sequence in `quotient-probe`.
    #[arg(long)]
    pub n_approach: Option<usize>,
    /// `adaptive` or `mc`.
    #[arg(long)]
    pub method: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub quad: QuadSettings,
}

impl Settings {
    /// Field-wise `self` over `file`.
    pub fn merge(self, file: Settings) -> Settings {
        Settings {
            domain: self.domain.or(file.domain),
            kernel: self.kernel.or(file.kernel),
            point: self.point.or(file.point),
            direction: self.direction.or(file.direction),
            seed: self.seed.or(file.seed),
            samples: self.samples.or(file.samples),
            directions: self.directions.or(file.directions),
            smin: self.smin.or(file.smin),
            smax: self.smax.or(file.smax),
            steps: self.steps.or(file.steps),
            n_lambda: self.n_lambda.or(file.n_lambda),
            n_points: self.n_points.or(file.n_points),
            n_approach: self.n_approach.or(file.n_approach),
            method: self.method.or(file.method),
            output: self.output.or(file.output),
            quad: self.quad.merge(file.quad),
        }
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Flags merged over the optional config file.
    pub fn resolve(flags: Settings, config: Option<&Path>) -> Result<Settings, CliError> {
        match config {
            Some(p) => Ok(flags.merge(Settings::from_file(p)?)),
            None => Ok(flags),
        }
    }

    pub fn domain(&self) -> Result<&str, CliError> {
        self.domain.as_deref().ok_or_else(|| CliError::Config("--domain is required".into()))
    }

    pub fn kernel(&self) -> Result<&str, CliError> {
        self.kernel.as_deref().ok_or_else(|| CliError::Config("--kernel is required".into()))
    }

    /// Randomized commands refuse to run without an explicit seed.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("--seed is required for this command".into()))
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(200)
    }

    pub fn directions(&self) -> usize {
        self.directions.unwrap_or(7)
    }

    pub fn smin(&self) -> f64 {
        self.smin.unwrap_or(0.01)
    }

    pub fn smax(&self) -> f64 {
        self.smax.unwrap_or(2.0)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(500)
    }

    pub fn n_lambda(&self) -> usize {
        self.n_lambda.unwrap_or(5)
    }

    pub fn n_points(&self) -> usize {
        self.n_points.unwrap_or(4)
    }

    pub fn n_approach(&self) -> usize {
        self.n_approach.unwrap_or(6)
    }

    pub fn monte_carlo(&self) -> Result<bool, CliError> {
        match self.method.as_deref().unwrap_or("adaptive") {
            "adaptive" => Ok(false),
            "mc" => Ok(true),
            m => Err(CliError::Config(format!("unknown method `{m}`, expected adaptive or mc"))),
        }
    }

    /// First coordinate axis when no direction is given.
    pub fn direction(&self, dim: usize) -> Vec<f64> {
        self.direction
            .clone()
            .unwrap_or_else(|| (0..dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect())
    }
}
