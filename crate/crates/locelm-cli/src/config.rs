//! Run configuration: JSON schema, validation, and conversion into solver
//! inputs. Everything is validated before any compute or file output.

use std::path::PathBuf;

use serde::Deserialize;

use locelm::assembly::ProblemSpec;
use locelm::mesh::Distribution;
use locelm::metrics::GridSpec;
use locelm::problems;
use locelm::solvers::{LmOptions, NlsqOptions, Xi2Mode};
use locelm::timemarch::{BlockConfig, SolverKind};

use crate::CliError;

/// One run = one JSON file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Problem identifier (see the `problems` command).
    pub problem: String,
    /// Final time; required for time-dependent problems, forbidden otherwise.
    #[serde(default)]
    pub t_final: Option<f64>,
    /// Number of uniform time blocks (time-dependent only; default 1).
    #[serde(default)]
    pub n_blocks: Option<usize>,
    /// Sub-domain counts per spatial dimension.
    pub spatial_counts: Vec<usize>,
    /// Sub-domain count along time (time-dependent only; default 1).
    #[serde(default)]
    pub time_subdomains: Option<usize>,
    /// Collocation distribution: uniform | gauss_lobatto | random.
    #[serde(default = "default_distribution")]
    pub distribution: String,
    /// Collocation points per direction (spatial dims, then time if any).
    pub q: Vec<usize>,
    /// Hidden-layer widths; the last width is the trainable parameter count
    /// per sub-domain.
    pub hidden_widths: Vec<usize>,
    /// Half-range of the uniform random hidden coefficients.
    pub r_m: f64,
    /// Seed of the hidden-coefficient stream.
    #[serde(default)]
    pub seed: u64,
    /// Training method.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Singular-value cutoff for least squares (default: machine-precision
    /// based).
    #[serde(default)]
    pub rcond: Option<f64>,
    /// Evaluation-grid density for error reports and the point cloud.
    #[serde(default)]
    pub grid: GridConfig,
    /// Where `solve` writes the JSON report.
    #[serde(default)]
    pub report_path: Option<PathBuf>,
    /// Where `solve` writes the point-cloud CSV and `sweep` writes its CSV.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
}

fn default_distribution() -> String {
    "uniform".to_owned()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    /// Single linear least-squares solve (linear problems only).
    Linear,
    /// Levenberg-Marquardt with randomized perturbation restarts.
    NlsqPerturb {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        xi2_mode: Xi2ModeConfig,
        #[serde(default = "default_cost_threshold")]
        cost_threshold: f64,
        #[serde(default = "default_max_subiterations")]
        max_subiterations: usize,
        /// Iteration cap of the inner Levenberg-Marquardt loop.
        #[serde(default = "default_lm_iterations")]
        max_iterations: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Newton iteration with least-squares linear updates.
    NewtonLlsq {
        #[serde(default = "default_newton_iterations")]
        max_iterations: usize,
        #[serde(default = "default_newton_tolerance")]
        tolerance: f64,
    },
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Linear
    }
}

fn default_delta() -> f64 {
    0.5
}
fn default_cost_threshold() -> f64 {
    1e-3
}
fn default_max_subiterations() -> usize {
    10
}
fn default_lm_iterations() -> usize {
    50
}
fn default_newton_iterations() -> usize {
    20
}
fn default_newton_tolerance() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Xi2ModeConfig {
    #[default]
    Random,
    FixedZero,
    FixedOne,
}

impl From<Xi2ModeConfig> for Xi2Mode {
    fn from(mode: Xi2ModeConfig) -> Self {
        match mode {
            Xi2ModeConfig::Random => Xi2Mode::Random,
            Xi2ModeConfig::FixedZero => Xi2Mode::FixedZero,
            Xi2ModeConfig::FixedOne => Xi2Mode::FixedOne,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_spatial_points")]
    pub spatial_points: usize,
    #[serde(default = "default_time_points_per_unit")]
    pub time_points_per_unit: usize,
    #[serde(default = "default_max_time_points")]
    pub max_time_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            spatial_points: default_spatial_points(),
            time_points_per_unit: default_time_points_per_unit(),
            max_time_points: default_max_time_points(),
        }
    }
}

fn default_spatial_points() -> usize {
    201
}
fn default_time_points_per_unit() -> usize {
    201
}
fn default_max_time_points() -> usize {
    2001
}

/// Everything needed to run, produced only when the whole config is valid.
pub struct Prepared {
    pub problem: ProblemSpec,
    pub has_time: bool,
    pub t_final: f64,
    pub n_blocks: usize,
    pub spatial_counts: Vec<usize>,
    pub time_subdomains: usize,
    pub distribution: Distribution,
    pub q: Vec<usize>,
    pub block: BlockConfig,
    pub grid: GridSpec,
    pub report_path: Option<PathBuf>,
    pub data_path: Option<PathBuf>,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

impl RunConfig {
    /// Full upfront validation; returns solver-ready inputs.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let problem = problems::by_name(&self.problem).map_err(|e| config_err(e.to_string()))?;
        let has_time = problem.dims.time_order > 0;

        if has_time {
            match self.t_final {
                Some(t) if t.is_finite() && t > 0.0 => {}
                Some(t) => return Err(config_err(format!("t_final must be positive, got {t}"))),
                None => {
                    return Err(config_err(format!(
                        "t_final is required for the time-dependent problem '{}'",
                        self.problem
                    )))
                }
            }
        } else {
            for (name, present) in [
                ("t_final", self.t_final.is_some()),
                ("n_blocks", self.n_blocks.is_some()),
                ("time_subdomains", self.time_subdomains.is_some()),
            ] {
                if present {
                    return Err(config_err(format!(
                        "{name} applies only to time-dependent problems; '{}' is steady",
                        self.problem
                    )));
                }
            }
        }
        let n_blocks = self.n_blocks.unwrap_or(1);
        if has_time && n_blocks == 0 {
            return Err(config_err("n_blocks must be at least 1"));
        }
        let time_subdomains = self.time_subdomains.unwrap_or(1);
        if has_time && time_subdomains == 0 {
            return Err(config_err("time_subdomains must be at least 1"));
        }

        let spatial = problem.dims.spatial;
        if self.spatial_counts.len() != spatial {
            return Err(config_err(format!(
                "spatial_counts has {} entries; '{}' needs {spatial}",
                self.spatial_counts.len(),
                self.problem
            )));
        }
        if let Some(zero) = self.spatial_counts.iter().position(|&c| c == 0) {
            return Err(config_err(format!(
                "spatial_counts[{zero}] is 0; every direction needs at least one sub-domain"
            )));
        }

        let expected_q = spatial + usize::from(has_time);
        if self.q.len() != expected_q {
            return Err(config_err(format!(
                "q has {} entries; '{}' needs {expected_q} (spatial directions{})",
                self.q.len(),
                self.problem,
                if has_time { " plus time" } else { "" }
            )));
        }
        if self.q.iter().any(|&q| q < 2) {
            return Err(config_err("q entries must be at least 2"));
        }

        if self.hidden_widths.is_empty() || self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(config_err("hidden_widths must be non-empty with positive widths"));
        }
        if !(self.r_m.is_finite() && self.r_m > 0.0) {
            return Err(config_err(format!("r_m must be positive, got {}", self.r_m)));
        }
        if let Some(rcond) = self.rcond {
            if !(rcond.is_finite() && rcond >= 0.0) {
                return Err(config_err(format!("rcond must be non-negative, got {rcond}")));
            }
        }

        let distribution: Distribution =
            self.distribution.parse().map_err(|e: locelm::Error| config_err(e.to_string()))?;

        if self.grid.spatial_points < 2 {
            return Err(config_err("grid.spatial_points must be at least 2"));
        }
        if self.grid.time_points_per_unit < 1 || self.grid.max_time_points < 2 {
            return Err(config_err(
                "grid.time_points_per_unit must be >= 1 and grid.max_time_points >= 2",
            ));
        }

        let solver = self.solver_kind()?;
        let block = BlockConfig {
            hidden_widths: self.hidden_widths.clone(),
            r_m: self.r_m,
            seed: self.seed,
            solver,
            rcond: self.rcond,
            ..BlockConfig::default()
        };

        Ok(Prepared {
            problem,
            has_time,
            t_final: self.t_final.unwrap_or(0.0),
            n_blocks,
            spatial_counts: self.spatial_counts.clone(),
            time_subdomains,
            distribution,
            q: self.q.clone(),
            block,
            grid: GridSpec {
                spatial_points: self.grid.spatial_points,
                time_points_per_unit: self.grid.time_points_per_unit,
                max_time_points: self.grid.max_time_points,
            },
            report_path: self.report_path.clone(),
            data_path: self.data_path.clone(),
        })
    }

    fn solver_kind(&self) -> Result<SolverKind, CliError> {
        Ok(match &self.solver {
            SolverConfig::Linear => SolverKind::Linear,
            SolverConfig::NlsqPerturb {
                delta,
                xi2_mode,
                cost_threshold,
                max_subiterations,
                max_iterations,
                seed,
            } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(config_err(format!("solver.delta must be positive, got {delta}")));
                }
                if *max_subiterations == 0 || *max_iterations == 0 {
                    return Err(config_err(
                        "solver.max_subiterations and solver.max_iterations must be at least 1",
                    ));
                }
                SolverKind::NlsqPerturb(NlsqOptions {
                    delta: *delta,
                    xi2_mode: (*xi2_mode).into(),
                    cost_threshold: *cost_threshold,
                    max_subiterations: *max_subiterations,
                    inner: LmOptions { max_iterations: *max_iterations, ..LmOptions::default() },
                    seed: *seed,
                })
            }
            SolverConfig::NewtonLlsq { max_iterations, tolerance } => {
                if *max_iterations == 0 {
                    return Err(config_err("solver.max_iterations must be at least 1"));
                }
                if !(tolerance.is_finite() && *tolerance > 0.0) {
                    return Err(config_err(format!(
                        "solver.tolerance must be positive, got {tolerance}"
                    )));
                }
                SolverKind::NewtonLlsq { max_iterations: *max_iterations, tolerance: *tolerance }
            }
        })
    }
}

/// Parses and validates a config file. I/O and JSON problems are config
/// errors by definition.
pub fn load(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))
}
