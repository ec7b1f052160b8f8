//! Block time marching.
//!
//! Time-dependent problems are solved on one time block `[0, gamma]` at a
//! time: every block reuses the same block-local partition and collocation
//! set, forcing and boundary data are evaluated at the shifted physical time
//! `xi + k*gamma`, and the initial data of block `k+1` is the end state of
//! block `k` evaluated directly from its trained networks (no intermediate
//! interpolation grid). Steady problems use [`solve_block`] with no time
//! dimension and a zero shift.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::assembly::{Assembly, AssemblyOptions, ProblemSpec};
use crate::mesh::{collocation, partition, CollocationSet, Distribution, DomainPartition};
use crate::network::LocalNetwork;
use crate::solvers::{lstsq_min_norm, newton_llsq, nlsq_perturb, NlsqOptions};
use crate::{Error, Result};

/// Solver used for one block (and for steady problems).
#[derive(Debug, Clone)]
pub enum SolverKind {
    /// Min-norm linear least squares; rejects nonlinear problems.
    Linear,
    /// Perturbed nonlinear least squares around Levenberg-Marquardt.
    NlsqPerturb(NlsqOptions),
    /// Newton iteration with a linear least-squares step per iteration.
    NewtonLlsq {
        /// Iteration cap.
        max_iterations: usize,
        /// Gradient / step tolerance.
        tolerance: f64,
    },
}

/// Per-block network and solver settings.
#[derive(Debug, Clone)]
pub struct BlockConfig {
    /// Hidden layer widths; the last entry is the feature count `M`.
    pub hidden_widths: Vec<usize>,
    /// Magnitude bound for the random hidden coefficients.
    pub r_m: f64,
    /// Base seed; block `k` derives its network seeds from `seed + k`.
    pub seed: u64,
    /// Solver choice.
    pub solver: SolverKind,
    /// Truncation threshold for the linear solves (`None` = machine default).
    pub rcond: Option<f64>,
    /// Warn when a nonlinear block finishes with a residual cost above this.
    pub cost_warning_threshold: f64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            hidden_widths: vec![100],
            r_m: 1.0,
            seed: 0,
            solver: SolverKind::Linear,
            rcond: None,
            cost_warning_threshold: 1e-3,
        }
    }
}

/// Block partitioning and collocation settings for [`march`].
#[derive(Debug, Clone)]
pub struct MarchConfig {
    /// Sub-domain counts per spatial dimension.
    pub spatial_counts: Vec<usize>,
    /// Sub-domain count along the time direction of each block.
    pub time_subdomains: usize,
    /// Collocation points per direction (time last).
    pub q: Vec<usize>,
    /// Collocation point distribution.
    pub distribution: Distribution,
    /// Network and solver settings applied to every block.
    pub block: BlockConfig,
}

/// One trained time block (or the single block of a steady solve).
#[derive(Debug)]
pub struct BlockSolution {
    /// Position in the march (0-based).
    pub block_index: usize,
    /// Block time extent (0 for steady problems).
    pub gamma: f64,
    /// Trained networks, one per sub-domain, output weights set.
    pub networks: Vec<LocalNetwork>,
    /// Final residual cost `0.5 ||r||^2` of the block solve.
    pub cost: f64,
}

/// Max / rms error of one block against the exact solution.
#[derive(Debug, Clone, Copy)]
pub struct BlockErrors {
    /// Largest absolute error sampled in the block.
    pub max_error: f64,
    /// Root-mean-square error over the sample grid.
    pub rms_error: f64,
}

/// Outcome of a march: the completed blocks in time order, plus the failure
/// that stopped it early, if any.
#[derive(Debug)]
pub struct MarchResult {
    /// Completed blocks, ordered by block index.
    pub blocks: Vec<BlockSolution>,
    /// Block-local partition shared by all blocks (time axis spans
    /// `[0, gamma]` when time-dependent).
    pub partition: DomainPartition,
    /// Block time extent.
    pub gamma: f64,
    /// Whether the problem (and the partition) carries a time axis.
    pub has_time: bool,
    /// Per-block errors, when the problem has an exact solution.
    pub block_errors: Option<Vec<BlockErrors>>,
    /// Failure that aborted the march; `blocks` holds the completed prefix.
    pub error: Option<Error>,
}

impl MarchResult {
    /// True when every requested block was solved.
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    /// Physical end time covered by the completed blocks.
    pub fn t_final(&self) -> f64 {
        self.gamma * self.blocks.len() as f64
    }

    /// Wrap a single solved block (used for steady problems).
    pub fn from_single_block(block: BlockSolution, partition: DomainPartition, has_time: bool) -> Self {
        MarchResult {
            gamma: block.gamma,
            blocks: vec![block],
            partition,
            has_time,
            block_errors: None,
            error: None,
        }
    }
}

/// Initial state fed into a block: value and, for second-order-in-time
/// problems, time derivative. Closures receive block-local coordinates with
/// the time entry equal to 0 and must be defined on the whole spatial domain.
pub struct InitialField<'f> {
    /// `u` at block start.
    pub value: &'f (dyn Fn(&[f64]) -> f64 + 'f),
    /// `du/dt` at block start (second-order-in-time problems).
    pub velocity: Option<&'f (dyn Fn(&[f64]) -> f64 + 'f)>,
}

/// Remark shown when a nonlinear block converges poorly: a shorter block is
/// usually easier to fit.
fn block_cost_warning(block_index: usize, cost: f64, threshold: f64) -> Option<String> {
    (cost > threshold).then(|| {
        format!(
            "time block {block_index}: nonlinear residual cost {cost:.3e} exceeds {threshold:.1e}; \
             consider reducing the time block size (more, shorter blocks)"
        )
    })
}

/// Solve one block: build fresh random networks, assemble with the
/// block-shifted data, run the configured solver, and store the trained
/// output weights. Errors are wrapped in [`Error::BlockSolve`] with the
/// block index. `initial` overrides the problem's initial data (`None` on
/// the first block and for steady problems).
pub fn solve_block(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
    config: &BlockConfig,
    block_index: usize,
    gamma: f64,
    initial: Option<InitialField<'_>>,
) -> Result<BlockSolution> {
    solve_block_inner(problem, part, colloc, config, block_index, gamma, initial)
        .map_err(|e| Error::BlockSolve { block: block_index, source: Box::new(e) })
}

fn solve_block_inner(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
    config: &BlockConfig,
    block_index: usize,
    gamma: f64,
    initial: Option<InitialField<'_>>,
) -> Result<BlockSolution> {
    if config.hidden_widths.is_empty() {
        return Err(Error::invalid("hidden_widths", "at least one hidden layer is required"));
    }
    let n_e = part.n_subdomains();
    // Per-block seed, expanded into one 64-bit seed per sub-domain network.
    let mut seed_rng = SplitMix64::seed_from_u64(config.seed.wrapping_add(block_index as u64));
    let mut networks: Vec<LocalNetwork> = (0..n_e)
        .map(|e| {
            LocalNetwork::new(
                part.dims(),
                &config.hidden_widths,
                config.r_m,
                seed_rng.gen(),
                &part.subdomain_box(e),
            )
        })
        .collect::<Result<_>>()?;

    let options = AssemblyOptions {
        time_shift: block_index as f64 * gamma,
        initial_value: initial.as_ref().map(|f| f.value),
        initial_velocity: initial.as_ref().and_then(|f| f.velocity),
    };
    let asm = Assembly::new(problem, part, colloc, &networks, &options)?;

    let (w, cost) = match &config.solver {
        SolverKind::Linear => {
            if problem.nonlinearity.is_some() {
                return Err(Error::invalid("solver", "the linear solver cannot handle a nonlinear problem"));
            }
            let w = lstsq_min_norm(asm.matrix(), asm.rhs(), config.rcond)?;
            let r = asm.matrix().dot(&w) - asm.rhs();
            let cost = 0.5 * r.dot(&r);
            (w, cost)
        }
        SolverKind::NlsqPerturb(opts) => {
            let mut opts = opts.clone();
            if config.rcond.is_some() {
                opts.inner.rcond = config.rcond;
            }
            let x0 = Array1::zeros(asm.n_params());
            let res = nlsq_perturb(|w| asm.residual(w), |w| asm.jacobian(w), x0, &opts)?;
            (res.x, res.cost)
        }
        SolverKind::NewtonLlsq { max_iterations, tolerance } => {
            let x0 = Array1::zeros(asm.n_params());
            let res =
                newton_llsq(|w| asm.residual(w), |w| asm.jacobian(w), x0, *max_iterations, *tolerance)?;
            (res.x, res.cost)
        }
    };

    if problem.nonlinearity.is_some() {
        if let Some(msg) = block_cost_warning(block_index, cost, config.cost_warning_threshold) {
            log::warn!("{msg}");
        }
    }

    let m = networks[0].m();
    for (e, net) in networks.iter_mut().enumerate() {
        net.set_output_weights(w.slice(s![e * m..(e + 1) * m]))?;
    }
    Ok(BlockSolution { block_index, gamma, networks, cost })
}

/// Evaluate a trained block at one block-local point: the solution value, or
/// its time derivative. Expects an in-domain point.
fn block_state(
    block: &BlockSolution,
    part: &DomainPartition,
    point: &[f64],
    time_axis: usize,
    derivative: bool,
) -> f64 {
    let e = part.locate(point).expect("block chaining point lies inside the block domain");
    let net = &block.networks[e];
    let arr = Array2::from_shape_vec((1, point.len()), point.to_vec()).expect("1 x d shape");
    if derivative {
        let jet = net.feature_jet(arr.view()).expect("in-domain jet");
        jet.grad[time_axis].row(0).dot(&net.output_weights())
    } else {
        net.evaluate(arr.view()).expect("in-domain evaluation")[0]
    }
}

/// March a time-dependent problem over `n_blocks` uniform blocks covering
/// `[0, t_f]`.
///
/// Returns `Err` only for configuration problems detected before the first
/// block. A failing block solve produces `Ok` with [`MarchResult::error`]
/// set and the completed prefix in [`MarchResult::blocks`].
pub fn march(problem: &ProblemSpec, t_f: f64, n_blocks: usize, config: &MarchConfig) -> Result<MarchResult> {
    problem.validate()?;
    let dims = problem.dims;
    if dims.time_order == 0 {
        return Err(Error::invalid("problem", "march requires a time-dependent problem"));
    }
    if !(t_f.is_finite() && t_f > 0.0) {
        return Err(Error::invalid("t_f", format!("must be positive and finite, got {t_f}")));
    }
    if n_blocks == 0 {
        return Err(Error::invalid("n_blocks", "at least one time block is required"));
    }
    if config.spatial_counts.len() != dims.spatial {
        return Err(Error::invalid(
            "spatial_counts",
            format!("expected {} entries, got {}", dims.spatial, config.spatial_counts.len()),
        ));
    }
    if config.q.len() != dims.total() {
        return Err(Error::invalid(
            "q",
            format!("expected {} entries, got {}", dims.total(), config.q.len()),
        ));
    }

    let gamma = t_f / n_blocks as f64;
    let mut bounds = problem.spatial_bounds.clone();
    bounds.push([0.0, gamma]);
    let mut counts = config.spatial_counts.clone();
    counts.push(config.time_subdomains);
    let part = partition(&bounds, &counts)?;
    let colloc = collocation(&part, &config.q, config.distribution, config.block.seed)?;
    let time_axis = dims.time_axis().expect("time-dependent problem");

    let mut blocks: Vec<BlockSolution> = Vec::with_capacity(n_blocks);
    let mut failure: Option<Error> = None;
    for k in 0..n_blocks {
        let solved = if k == 0 {
            solve_block(problem, &part, &colloc, &config.block, 0, gamma, None)
        } else {
            let prev = blocks.last().expect("previous block present");
            let value_fn = |p: &[f64]| {
                let mut q = p.to_vec();
                q[time_axis] = gamma;
                block_state(prev, &part, &q, time_axis, false)
            };
            let velocity_fn = |p: &[f64]| {
                let mut q = p.to_vec();
                q[time_axis] = gamma;
                block_state(prev, &part, &q, time_axis, true)
            };
            let initial = InitialField {
                value: &value_fn,
                velocity: (dims.time_order == 2).then_some(&velocity_fn as &dyn Fn(&[f64]) -> f64),
            };
            solve_block(problem, &part, &colloc, &config.block, k, gamma, Some(initial))
        };
        match solved {
            Ok(sol) => blocks.push(sol),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let mut result = MarchResult {
        blocks,
        partition: part,
        gamma,
        has_time: true,
        block_errors: None,
        error: failure,
    };
    if problem.exact.is_some() && !result.blocks.is_empty() {
        result.block_errors = Some(per_block_errors(problem, &result)?);
    }
    Ok(result)
}

/// Coarse per-block max/rms errors against the exact solution (diagnostic;
/// the metrics module does the configurable final report).
fn per_block_errors(problem: &ProblemSpec, result: &MarchResult) -> Result<Vec<BlockErrors>> {
    let exact = problem.exact.as_ref().expect("exact solution present");
    let sd = problem.dims.spatial;
    let nx = if sd == 1 { 101 } else { 41 };
    let nt = 16;
    let spatial_axes: Vec<Vec<f64>> = problem
        .spatial_bounds
        .iter()
        .map(|b| (0..nx).map(|i| b[0] + (b[1] - b[0]) * i as f64 / (nx - 1) as f64).collect())
        .collect();

    let mut reports = Vec::with_capacity(result.blocks.len());
    for (k, _) in result.blocks.iter().enumerate() {
        // Sample t in (k*gamma, (k+1)*gamma]; the left edge belongs to the
        // previous block under the routing tie-break.
        let ts: Vec<f64> = (1..=nt)
            .map(|j| (k as f64 + j as f64 / nt as f64) * result.gamma)
            .collect();
        let mut points = Vec::new();
        match sd {
            1 => {
                for &t in &ts {
                    for &x in &spatial_axes[0] {
                        points.extend_from_slice(&[x, t]);
                    }
                }
            }
            _ => {
                for &t in &ts {
                    for &y in &spatial_axes[1] {
                        for &x in &spatial_axes[0] {
                            points.extend_from_slice(&[x, y, t]);
                        }
                    }
                }
            }
        }
        let dims_total = problem.dims.total();
        let pts = Array2::from_shape_vec((points.len() / dims_total, dims_total), points)
            .expect("grid shape");
        let computed = evaluate_solution(result, pts.view())?;
        let mut max_error: f64 = 0.0;
        let mut sum_sq = 0.0;
        for (i, row) in pts.outer_iter().enumerate() {
            let err = (computed[i] - exact.value(row.as_slice().expect("contiguous"))).abs();
            max_error = max_error.max(err);
            sum_sq += err * err;
        }
        let rms_error = (sum_sq / pts.nrows() as f64).sqrt();
        reports.push(BlockErrors { max_error, rms_error });
    }
    Ok(reports)
}

/// Evaluate a marched (or steady) solution at physical points.
///
/// Time routing: `t` belongs to block `ceil(t / gamma) - 1`, clamped into
/// range, so block boundaries resolve to the earlier block; `t = 0` is block
/// 0. Within a block, sub-domain lookup follows the partition's lower-index
/// tie-break. Points outside the domain produce [`Error::PointOutsideBox`].
pub fn evaluate_solution(result: &MarchResult, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if result.blocks.is_empty() {
        return Err(Error::invalid("result", "no completed blocks to evaluate"));
    }
    let dims = result.partition.dims();
    if points.ncols() != dims {
        return Err(Error::invalid(
            "points",
            format!("expected {dims} coordinates per point, got {}", points.ncols()),
        ));
    }
    let n_blocks = result.blocks.len();
    let time_axis = dims - 1;
    let t_reach = result.gamma * n_blocks as f64;
    let t_tol = 1e-12 * t_reach.abs().max(1.0);

    let mut local = points.to_owned();
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, row) in points.outer_iter().enumerate() {
        let k = if result.has_time {
            let t = row[time_axis];
            if t < -t_tol || t > t_reach + t_tol {
                return Err(Error::PointOutsideBox {
                    index: i,
                    dim: time_axis,
                    coord: t,
                    low: 0.0,
                    high: t_reach,
                });
            }
            let k = ((t / result.gamma).ceil() as isize - 1).clamp(0, n_blocks as isize - 1) as usize;
            local[[i, time_axis]] = t - k as f64 * result.gamma;
            k
        } else {
            0
        };
        let coords = local.row(i);
        let e = result.partition.locate(coords.as_slice().expect("contiguous")).map_err(|err| {
            match err {
                Error::PointOutsideBox { dim, coord, low, high, .. } => {
                    Error::PointOutsideBox { index: i, dim, coord, low, high }
                }
                other => other,
            }
        })?;
        groups.entry((k, e)).or_default().push(i);
    }

    let mut out = Array1::zeros(points.nrows());
    for ((k, e), idxs) in groups {
        let mut pts = Array2::zeros((idxs.len(), dims));
        for (j, &i) in idxs.iter().enumerate() {
            pts.row_mut(j).assign(&local.row(i));
        }
        let values = result.blocks[k].networks[e].evaluate(pts.view())?;
        for (j, &i) in idxs.iter().enumerate() {
            out[i] = values[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::RowTag;
    use crate::problems;
    use rand::Rng;

    fn advection_march_config(m: usize) -> MarchConfig {
        MarchConfig {
            spatial_counts: vec![4],
            time_subdomains: 1,
            q: vec![15, 15],
            distribution: Distribution::Uniform,
            block: BlockConfig { hidden_widths: vec![m], r_m: 2.0, seed: 7, ..BlockConfig::default() },
        }
    }

    #[test]
    fn shift_moves_forcing_and_boundary_data_but_not_initial_data() {
        let problem = problems::diffusion_1d();
        let exact = problem.exact.as_ref().unwrap();
        let part = partition(&[[0.0, 5.0], [0.0, 0.5]], &[2, 1]).unwrap();
        let colloc = collocation(&part, &[5, 4], Distribution::Uniform, 0).unwrap();
        let networks: Vec<LocalNetwork> = (0..2)
            .map(|e| LocalNetwork::new(2, &[6], 1.0, 3 + e as u64, &part.subdomain_box(e)).unwrap())
            .collect();
        let shift = 0.7;
        let options = AssemblyOptions { time_shift: shift, ..AssemblyOptions::default() };
        let asm = Assembly::new(&problem, &part, &colloc, &networks, &options).unwrap();

        for (row, info) in asm.rows().iter().enumerate() {
            let coords = colloc.points(info.subdomain).row(info.point).to_vec();
            match info.tag {
                RowTag::Pde => {
                    let expect = (problem.forcing)(&[coords[0], coords[1] + shift]);
                    assert_eq!(asm.rhs()[row], expect, "pde row {row}");
                }
                RowTag::Boundary => {
                    let expect = exact.value(&[coords[0], coords[1] + shift]);
                    assert_eq!(asm.rhs()[row], expect, "boundary row {row}");
                }
                RowTag::Initial => {
                    // Initial data stays in block-local time.
                    let expect = exact.value(&[coords[0], 0.0]);
                    assert_eq!(asm.rhs()[row], expect, "initial row {row}");
                }
                _ => {}
            }
        }
    }

    #[test]
    fn single_block_march_matches_direct_solve_and_is_deterministic() {
        let problem = problems::advection_1d();
        let config = advection_march_config(60);
        let t_f = 0.5;
        let marched = march(&problem, t_f, 1, &config).unwrap();
        assert!(marched.is_complete());
        assert_eq!(marched.blocks.len(), 1);

        let part = partition(&[[0.0, 5.0], [0.0, t_f]], &[4, 1]).unwrap();
        let colloc = collocation(&part, &config.q, config.distribution, config.block.seed).unwrap();
        let direct = solve_block(&problem, &part, &colloc, &config.block, 0, t_f, None).unwrap();

        for (a, b) in marched.blocks[0].networks.iter().zip(&direct.networks) {
            assert_eq!(a.output_weights(), b.output_weights());
        }

        let again = march(&problem, t_f, 1, &config).unwrap();
        for (a, b) in marched.blocks[0].networks.iter().zip(&again.blocks[0].networks) {
            assert_eq!(a.output_weights(), b.output_weights());
        }
    }

    #[test]
    fn cross_block_states_chain_consistently() {
        let problem = problems::advection_1d();
        let config = MarchConfig {
            spatial_counts: vec![4],
            time_subdomains: 2,
            q: vec![18, 18],
            distribution: Distribution::Uniform,
            block: BlockConfig { hidden_widths: vec![200], r_m: 2.0, seed: 7, ..BlockConfig::default() },
        };
        let result = march(&problem, 2.0, 2, &config).unwrap();
        assert!(result.is_complete());
        let gamma = result.gamma;
        let part = &result.partition;

        // Rebuild block 1's least-squares system the way `march` does, so the
        // chained initial rows can be inspected directly.
        let colloc = collocation(part, &config.q, config.distribution, config.block.seed).unwrap();
        let value_fn = |p: &[f64]| {
            let mut prev = p.to_vec();
            prev[1] = gamma;
            block_state(&result.blocks[0], part, &prev, 1, false)
        };
        let options = AssemblyOptions {
            time_shift: gamma,
            initial_value: Some(&value_fn),
            initial_velocity: None,
        };
        let asm = Assembly::new(&problem, part, &colloc, &result.blocks[1].networks, &options).unwrap();
        let mut w = Array1::zeros(asm.n_params());
        let mut offset = 0;
        for net in &result.blocks[1].networks {
            let ow = net.output_weights();
            w.slice_mut(s![offset..offset + ow.len()]).assign(&ow);
            offset += ow.len();
        }
        let residual = asm.residual(&w).unwrap();

        // The initial data handed to block 1 must be block 0's own state at
        // t = gamma. Check 50 of those rows against the public evaluator,
        // which routes t = gamma to block 0, and record the worst fitted
        // initial-row residual along the way.
        let mut checked = 0;
        let mut init_residual: f64 = 0.0;
        for (i, info) in asm.rows().iter().enumerate() {
            if info.tag != RowTag::Initial {
                continue;
            }
            init_residual = init_residual.max(residual[i].abs());
            if checked < 50 {
                let x = colloc.points(info.subdomain)[[info.point, 0]];
                let probe = ndarray::arr2(&[[x, gamma]]);
                let from_block0 = evaluate_solution(&result, probe.view()).unwrap()[0];
                assert!(
                    (asm.rhs()[i] - from_block0).abs() <= 1e-6,
                    "initial data at x = {x} differs from block 0's end state"
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 50, "expected at least 50 initial rows");

        // Off the collocation grid, the two blocks agree to within a small
        // multiple of the fitted initial-row residual.
        let mut rng = SplitMix64::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = rng.gen_range(0.0..5.0);
            let from_prev = block_state(&result.blocks[0], part, &[x, gamma], 1, false);
            let from_next = block_state(&result.blocks[1], part, &[x, 0.0], 1, false);
            worst = worst.max((from_prev - from_next).abs());
        }
        assert!(
            worst <= 10.0 * init_residual + 1e-12,
            "off-grid mismatch {worst:.3e} vs initial-row residual {init_residual:.3e}"
        );
    }

    #[test]
    fn advection_error_stays_controlled_over_ten_blocks() {
        let problem = problems::advection_1d();
        let config = advection_march_config(120);
        let result = march(&problem, 10.0, 10, &config).unwrap();
        assert!(result.is_complete());
        let errors = result.block_errors.as_ref().expect("exact solution known");
        assert_eq!(errors.len(), 10);
        for e in errors {
            assert!(e.rms_error <= e.max_error + 1e-15);
        }
        let first = errors.first().unwrap().max_error;
        let last = errors.last().unwrap().max_error;
        assert!(
            last <= 10.0 * first,
            "block error grew from {first:.3e} to {last:.3e} (more than 10x)"
        );
    }

    #[test]
    fn evaluate_solution_routes_blocks_subdomains_and_rejects_outside_points() {
        let problem = problems::advection_1d();
        let config = advection_march_config(60);
        let result = march(&problem, 1.0, 2, &config).unwrap();
        let gamma = result.gamma;
        let part = &result.partition;

        // t = 0 routes to block 0; t = gamma (a block boundary) also routes
        // to block 0 by the tie-break; t just above gamma routes to block 1.
        let x = 1.234;
        let probe = ndarray::arr2(&[[x, 0.0], [x, gamma], [x, gamma + 1e-9]]);
        let values = evaluate_solution(&result, probe.view()).unwrap();
        assert_eq!(values[0], block_state(&result.blocks[0], part, &[x, 0.0], 1, false));
        assert_eq!(values[1], block_state(&result.blocks[0], part, &[x, gamma], 1, false));
        let b1 = block_state(&result.blocks[1], part, &[x, 1e-9], 1, false);
        assert!((values[2] - b1).abs() <= 1e-12);

        // A spatial interface point routes to the lower-indexed sub-domain.
        let x_if = part.boundary_coords()[0][1];
        let e_low = part.locate(&[x_if, 0.1]).unwrap();
        assert_eq!(part.multi_index(e_low)[0], 0);
        let at_interface = evaluate_solution(&result, ndarray::arr2(&[[x_if, 0.1]]).view()).unwrap();
        assert_eq!(at_interface[0], block_state(&result.blocks[0], part, &[x_if, 0.1], 1, false));

        // Outside in space and in time.
        let bad_x = evaluate_solution(&result, ndarray::arr2(&[[-0.5, 0.2]]).view());
        assert!(matches!(bad_x.unwrap_err(), Error::PointOutsideBox { dim: 0, .. }));
        let bad_t = evaluate_solution(&result, ndarray::arr2(&[[2.0, 1.5]]).view());
        assert!(matches!(bad_t.unwrap_err(), Error::PointOutsideBox { dim: 1, .. }));
    }

    #[test]
    fn failing_block_returns_partial_results() {
        // A nonlinearity plus forcing that turns non-finite inside the second
        // block: block 0 solves, block 1 aborts, the prefix survives.
        let problem = ProblemSpec {
            name: "poisoned",
            dims: crate::assembly::Dims { spatial: 1, time_order: 1 },
            linear_op: crate::assembly::LinearOp { c_ut: 1.0, c_ux: 0.3, ..Default::default() },
            nonlinearity: Some(crate::assembly::Nonlinearity {
                f: Box::new(|u, _, _| u * u),
                f_u: Box::new(|u, _, _| 2.0 * u),
                f_ux: Box::new(|_, _, _| 0.0),
                f_uy: Box::new(|_, _, _| 0.0),
            }),
            forcing: Box::new(|p: &[f64]| if p[1] > 0.6 { f64::NAN } else { 0.1 }),
            boundary: vec![crate::assembly::SpatialBoundary::Periodic { derivative: false }],
            initial: Some(crate::assembly::InitialCondition {
                value: Box::new(|p: &[f64]| (std::f64::consts::TAU * p[0]).sin() * 0.1),
                velocity: None,
            }),
            continuity_order: vec![0, 0],
            spatial_bounds: vec![[0.0, 1.0]],
            exact: None,
        };
        let config = MarchConfig {
            spatial_counts: vec![2],
            time_subdomains: 1,
            q: vec![6, 6],
            distribution: Distribution::Uniform,
            block: BlockConfig {
                hidden_widths: vec![10],
                r_m: 1.0,
                seed: 1,
                solver: SolverKind::NlsqPerturb(NlsqOptions::default()),
                ..BlockConfig::default()
            },
        };
        let result = march(&problem, 1.0, 2, &config).unwrap();
        assert!(!result.is_complete());
        assert_eq!(result.blocks.len(), 1);
        assert!(result.block_errors.is_none());
        match result.error.as_ref().unwrap() {
            Error::BlockSolve { block, .. } => assert_eq!(*block, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cost_warning_mentions_the_block_and_the_remedy() {
        let msg = block_cost_warning(3, 0.5, 1e-3).expect("warning expected");
        assert!(msg.contains("block 3"));
        assert!(msg.contains("reducing the time block size"));
        assert!(block_cost_warning(3, 1e-5, 1e-3).is_none());
    }

    #[test]
    fn wave_chaining_passes_value_and_velocity() {
        // Two blocks of the second-order wave problem: chained initial value
        // and velocity keep the solution close to exact into the second
        // block.
        let problem = problems::wave_second_order_1d();
        let config = MarchConfig {
            spatial_counts: vec![4],
            time_subdomains: 1,
            q: vec![16, 16],
            distribution: Distribution::Uniform,
            block: BlockConfig { hidden_widths: vec![150], r_m: 1.0, seed: 5, ..BlockConfig::default() },
        };
        let result = march(&problem, 0.5, 2, &config).unwrap();
        assert!(result.is_complete());
        let errors = result.block_errors.as_ref().unwrap();
        assert!(
            errors[1].max_error <= 20.0 * errors[0].max_error.max(1e-8),
            "second-block error {:.3e} vs first {:.3e}",
            errors[1].max_error,
            errors[0].max_error
        );
    }
}
