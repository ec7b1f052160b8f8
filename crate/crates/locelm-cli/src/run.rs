//! The `solve` and `sweep` commands: run a validated configuration, measure
//! errors against the exact solution, and write the report / data files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use locelm::metrics::{error_report, ErrorReport};
use locelm::mesh::{collocation, partition};
use locelm::timemarch::{march, solve_block, MarchConfig, MarchResult};

use crate::config::{Prepared, RunConfig};
use crate::CliError;

/// JSON report written by `solve`.
#[derive(Serialize)]
struct SolveReport {
    problem: String,
    blocks: usize,
    gamma: f64,
    has_time: bool,
    solve_seconds: f64,
    /// Final residual cost `0.5 ||r||^2` of each block solve.
    residual_costs: Vec<f64>,
    max_error: f64,
    rms_error: f64,
    grid_shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_block_errors: Option<Vec<BlockErrorsOut>>,
}

#[derive(Serialize)]
struct BlockErrorsOut {
    max_error: f64,
    rms_error: f64,
}

/// Outcome of one run: the trained solution plus the wall time of the solve
/// itself (network setup, assembly, training — not evaluation or I/O).
struct Solved {
    result: MarchResult,
    seconds: f64,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

fn solver_err(message: impl Into<String>) -> CliError {
    CliError::Solver(message.into())
}

/// The parent directory an output file would land in must already exist;
/// checked before any compute so a typo fails fast.
fn check_output_path(path: &Path, field: &str) -> Result<(), CliError> {
    match path.parent() {
        None => Err(config_err(format!("{field} {} has no parent directory", path.display()))),
        Some(parent) if parent.as_os_str().is_empty() => Ok(()),
        Some(parent) if parent.is_dir() => Ok(()),
        Some(parent) => Err(config_err(format!(
            "{field} directory {} does not exist",
            parent.display()
        ))),
    }
}

/// Train the configured problem. Timing covers exactly the solve call.
fn execute(prepared: &Prepared) -> Result<Solved, CliError> {
    if prepared.has_time {
        let march_config = MarchConfig {
            spatial_counts: prepared.spatial_counts.clone(),
            time_subdomains: prepared.time_subdomains,
            q: prepared.q.clone(),
            distribution: prepared.distribution,
            block: prepared.block.clone(),
        };
        let start = Instant::now();
        let result = march(&prepared.problem, prepared.t_final, prepared.n_blocks, &march_config)
            .map_err(|e| config_err(e.to_string()))?;
        let seconds = start.elapsed().as_secs_f64();
        if let Some(error) = &result.error {
            return Err(solver_err(format!(
                "march stopped after {} of {} blocks: {error}",
                result.blocks.len(),
                prepared.n_blocks
            )));
        }
        Ok(Solved { result, seconds })
    } else {
        let part = partition(&prepared.problem.spatial_bounds, &prepared.spatial_counts)
            .map_err(|e| config_err(e.to_string()))?;
        let colloc =
            collocation(&part, &prepared.q, prepared.distribution, prepared.block.seed)
                .map_err(|e| config_err(e.to_string()))?;
        let start = Instant::now();
        let block = solve_block(&prepared.problem, &part, &colloc, &prepared.block, 0, 0.0, None)
            .map_err(|e| solver_err(e.to_string()))?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(Solved { result: MarchResult::from_single_block(block, part, false), seconds })
    }
}

fn measure(prepared: &Prepared, solved: &Solved) -> Result<ErrorReport, CliError> {
    error_report(&solved.result, &prepared.problem, &prepared.grid)
        .map_err(|e| solver_err(format!("error report failed: {e}")))
}

/// Uniform samples of `[low, high]` including both endpoints (the same grid
/// the error report uses).
fn linspace(low: f64, high: f64, n: usize) -> Vec<f64> {
    let step = (high - low) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { high } else { low + step * i as f64 }).collect()
}

/// Point-cloud CSV on the evaluation grid: coordinates, computed and exact
/// values, absolute error. Rows vary the last spatial coordinate fastest and
/// time slowest.
fn write_point_cloud(path: &Path, prepared: &Prepared, solved: &Solved) -> Result<(), CliError> {
    let problem = &prepared.problem;
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| solver_err(format!("problem '{}' has no exact solution", problem.name)))?;
    let spatial = problem.dims.spatial;

    let file = File::create(path)
        .map_err(|e| config_err(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    let io = |e: std::io::Error| config_err(format!("cannot write {}: {e}", path.display()));

    let mut header: Vec<&str> = ["x", "y", "z"][..spatial].to_vec();
    if prepared.has_time {
        header.push("t");
    }
    header.extend(["computed", "exact", "abs_error"]);
    writeln!(out, "{}", header.join(",")).map_err(io)?;

    let axes: Vec<Vec<f64>> = problem
        .spatial_bounds
        .iter()
        .map(|&[low, high]| linspace(low, high, prepared.grid.spatial_points))
        .collect();
    let n_spatial: usize = axes.iter().map(Vec::len).product();
    let total_dims = spatial + usize::from(prepared.has_time);
    let mut points = Array2::zeros((n_spatial, total_dims));
    for (i, mut row) in points.rows_mut().into_iter().enumerate() {
        let mut rest = i;
        for d in (0..spatial).rev() {
            row[d] = axes[d][rest % axes[d].len()];
            rest /= axes[d].len();
        }
    }

    let times: Vec<f64> = if prepared.has_time {
        let t_final = solved.result.t_final();
        linspace(0.0, t_final, prepared.grid.time_samples(t_final))
    } else {
        vec![0.0]
    };

    // One evaluation batch per time sample, mirroring the error report.
    for &t in &times {
        if prepared.has_time {
            for mut row in points.rows_mut() {
                row[spatial] = t;
            }
        }
        let computed = locelm::timemarch::evaluate_solution(&solved.result, points.view())
            .map_err(|e| solver_err(e.to_string()))?;
        for (row, &value) in points.rows().into_iter().zip(computed.iter()) {
            let coords = row.as_slice().expect("contiguous row");
            let truth = exact.value(coords);
            for &c in coords {
                write!(out, "{c},").map_err(io)?;
            }
            writeln!(out, "{value},{truth},{}", (value - truth).abs()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// `solve` command: one run, a JSON report, and a point-cloud CSV.
pub fn solve(config: &RunConfig) -> Result<(), CliError> {
    let prepared = config.prepare()?;
    let report_path = prepared
        .report_path
        .as_deref()
        .ok_or_else(|| config_err("solve requires report_path in the config"))?;
    let data_path = prepared
        .data_path
        .as_deref()
        .ok_or_else(|| config_err("solve requires data_path in the config"))?;
    check_output_path(report_path, "report_path")?;
    check_output_path(data_path, "data_path")?;

    let solved = execute(&prepared)?;
    let errors = measure(&prepared, &solved)?;

    let report = SolveReport {
        problem: prepared.problem.name.to_owned(),
        blocks: solved.result.blocks.len(),
        gamma: solved.result.gamma,
        has_time: solved.result.has_time,
        solve_seconds: solved.seconds,
        residual_costs: solved.result.blocks.iter().map(|b| b.cost).collect(),
        max_error: errors.max_error,
        rms_error: errors.rms_error,
        grid_shape: errors.grid_shape.clone(),
        per_block_errors: errors.per_block.as_ref().map(|blocks| {
            blocks
                .iter()
                .map(|b| BlockErrorsOut { max_error: b.max_error, rms_error: b.rms_error })
                .collect()
        }),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| solver_err(format!("cannot serialize report: {e}")))?;
    std::fs::write(report_path, json + "\n")
        .map_err(|e| config_err(format!("cannot write {}: {e}", report_path.display())))?;

    write_point_cloud(data_path, &prepared, &solved)?;

    println!(
        "{}: {} block(s), max error {:.6e}, rms {:.6e}, solved in {:.3}s",
        prepared.problem.name,
        solved.result.blocks.len(),
        errors.max_error,
        errors.rms_error,
        solved.seconds
    );
    println!("report: {}", report_path.display());
    println!("data:   {}", data_path.display());
    Ok(())
}

/// A parameter the `sweep` command can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NSubdomains,
    QPerDirection,
    M,
    RM,
    NBlocks,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "n_subdomains" => SweepParam::NSubdomains,
            "q_per_direction" => SweepParam::QPerDirection,
            "m" => SweepParam::M,
            "r_m" => SweepParam::RM,
            "n_blocks" => SweepParam::NBlocks,
            other => {
                return Err(config_err(format!(
                    "unknown sweep parameter '{other}' (expected n_subdomains, q_per_direction, \
                     m, r_m, or n_blocks)"
                )))
            }
        })
    }
}

/// One sweep point: the parameter value and the run to perform.
struct SweepCase {
    value: f64,
    config: RunConfig,
}

fn parse_values(param: SweepParam, list: &str) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err(config_err("values must be a non-empty comma-separated list"));
        }
        let value = if param == SweepParam::RM {
            token
                .parse::<f64>()
                .map_err(|_| config_err(format!("value '{token}' is not a number")))?
        } else {
            token
                .parse::<usize>()
                .map_err(|_| config_err(format!("value '{token}' is not a positive integer")))?
                as f64
        };
        values.push(value);
    }
    if values.is_empty() {
        return Err(config_err("values must list at least one value"));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite sweep values"));
    values.dedup();
    Ok(values)
}

fn apply(param: SweepParam, value: f64, base: &RunConfig) -> Result<RunConfig, CliError> {
    let mut config = base.clone();
    let count = value as usize;
    match param {
        SweepParam::NSubdomains => {
            if config.spatial_counts.len() != 1 {
                return Err(config_err(
                    "the n_subdomains sweep applies only to one-dimensional problems",
                ));
            }
            config.spatial_counts = vec![count];
        }
        SweepParam::QPerDirection => {
            for q in &mut config.q {
                *q = count;
            }
        }
        SweepParam::M => {
            *config.hidden_widths.last_mut().expect("validated non-empty") = count;
        }
        SweepParam::RM => config.r_m = value,
        SweepParam::NBlocks => config.n_blocks = Some(count),
    }
    Ok(config)
}

/// `sweep` command: re-solve for each value of one parameter and write a CSV
/// of errors and solve times, ordered by ascending value.
pub fn sweep(config: &RunConfig, param_name: &str, values: &str) -> Result<(), CliError> {
    let param = SweepParam::parse(param_name)?;
    let values = parse_values(param, values)?;

    // Validate every case (and the output path) before solving anything.
    let base = config.prepare()?;
    let data_path = base
        .data_path
        .as_deref()
        .ok_or_else(|| config_err("sweep requires data_path in the config"))?
        .to_owned();
    check_output_path(&data_path, "data_path")?;
    let mut cases = Vec::with_capacity(values.len());
    for &value in &values {
        let case = apply(param, value, config)?;
        case.prepare()
            .map_err(|e| config_err(format!("{param_name} = {value}: {e}")))?;
        cases.push(SweepCase { value, config: case });
    }

    let mut rows = Vec::with_capacity(cases.len());
    for case in &cases {
        let prepared = case.config.prepare()?;
        let solved = execute(&prepared)
            .map_err(|e| e.amend(format!("{param_name} = {}", case.value)))?;
        let errors = measure(&prepared, &solved)?;
        println!(
            "{param_name} = {}: max error {:.6e}, rms {:.6e}, {:.3}s",
            case.value, errors.max_error, errors.rms_error, solved.seconds
        );
        rows.push((case.value, errors.max_error, errors.rms_error, solved.seconds));
    }

    let file = File::create(&data_path)
        .map_err(|e| config_err(format!("cannot create {}: {e}", data_path.display())))?;
    let mut out = BufWriter::new(file);
    let io = |e: std::io::Error| config_err(format!("cannot write {}: {e}", data_path.display()));
    writeln!(out, "value,max_error,rms_error,solve_time").map_err(io)?;
    for (value, max_error, rms_error, seconds) in rows {
        writeln!(out, "{value},{max_error},{rms_error},{seconds}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    println!("data: {}", data_path.display());
    Ok(())
}
