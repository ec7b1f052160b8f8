//! Dense least-squares and nonlinear least-squares solvers.
//!
//! - [`lstsq_min_norm`]: minimum-norm linear least squares via truncated SVD.
//!   ELM collocation systems are routinely rank-deficient, so the minimum-norm
//!   solution (not just any minimizer) is part of the method.
//! - [`levenberg_marquardt`]: damped Gauss-Newton for residual systems. Each
//!   iteration computes one SVD of the Jacobian and reuses it for every
//!   damping candidate; the damped step equals the minimum-norm least-squares
//!   solution of the augmented system `[J; sqrt(mu) I] d = [-r; 0]`, and the
//!   damping is adapted from the gain ratio (actual over predicted cost
//!   reduction).
//! - [`nlsq_perturb`]: nonlinear least squares with random perturbation
//!   restarts around the best iterate, escaping poor local minima.
//! - [`newton_llsq`]: Newton iteration whose increment solves the linearized
//!   system in the least-squares sense (non-square Jacobian).
//!
//! "Cost" throughout is `0.5 * sum(r_i^2)`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use rand::distributions::{Distribution as _, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::{Error, Result};

/// Default relative singular-value cutoff: machine epsilon times the larger
/// matrix dimension.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

fn infinity_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn two_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Thin SVD `A = U diag(s) Vt`, unwrapping the optional factors.
fn thin_svd(a: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (u, s, vt) = a
        .svddc(JobSvd::Some)
        .map_err(|e| Error::Linalg(format!("SVD failed to converge: {e}")))?;
    Ok((u.expect("left singular vectors requested"), s, vt.expect("right singular vectors requested")))
}

/// Minimum-norm least-squares solution of `A x = b` by truncated SVD.
///
/// Singular values below `rcond * sigma_max` are discarded; among all
/// minimizers of `||Ax - b||_2`, the returned `x` has minimal `||x||_2`.
/// `rcond = None` uses [`default_rcond`].
pub fn lstsq_min_norm(a: &Array2<f64>, b: &Array1<f64>, rcond: Option<f64>) -> Result<Array1<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("matrix", "least-squares matrix must be non-empty"));
    }
    if b.len() != a.nrows() {
        return Err(Error::invalid(
            "rhs",
            format!("expected length {}, got {}", a.nrows(), b.len()),
        ));
    }
    let rcond = rcond.unwrap_or_else(|| default_rcond(a.nrows(), a.ncols()));
    if rcond < 0.0 {
        return Err(Error::invalid("rcond", format!("must be non-negative, got {rcond}")));
    }
    let (u, s, vt) = thin_svd(a)?;
    let cutoff = rcond * s.first().copied().unwrap_or(0.0);
    let mut c = u.t().dot(b);
    for (ci, &si) in c.iter_mut().zip(&s) {
        if si > cutoff && si > 0.0 {
            *ci /= si;
        } else {
            *ci = 0.0;
        }
    }
    Ok(vt.t().dot(&c))
}

/// Levenberg-Marquardt stopping/damping parameters.
#[derive(Debug, Clone)]
pub struct LmOptions {
    /// Maximum accepted steps.
    pub max_iterations: usize,
    /// Terminate when the cost drops to this value or below.
    pub cost_tolerance: f64,
    /// Terminate when `||J^T r||_inf` drops to this value or below.
    pub gradient_tolerance: f64,
    /// Terminate when the accepted step satisfies
    /// `||d|| <= step_tolerance * (||x|| + step_tolerance)`.
    pub step_tolerance: f64,
    /// Damping guess (as a fraction of `sigma_max^2` of the Jacobian) seeding
    /// the search for the trust-region step when the Gauss-Newton step
    /// overruns the radius.
    pub initial_damping: f64,
    /// Singular-value cutoff for the undamped (Gauss-Newton) step;
    /// `None` = [`default_rcond`].
    pub rcond: Option<f64>,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 50,
            cost_tolerance: 1e-14,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            initial_damping: 1e-3,
            rcond: None,
        }
    }
}

/// Why an iterative solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Cost fell to the cost tolerance.
    CostTolerance,
    /// Gradient infinity-norm fell to the gradient tolerance.
    GradientTolerance,
    /// Accepted step became negligible relative to the iterate.
    StepTolerance,
    /// Iteration budget exhausted.
    MaxIterations,
    /// No damping value produced a cost decrease.
    Stalled,
}

/// Levenberg-Marquardt outcome.
#[derive(Debug, Clone)]
pub struct LmResult {
    /// Final iterate.
    pub x: Array1<f64>,
    /// Final cost `0.5 * ||r||^2`.
    pub cost: f64,
    /// Number of accepted steps.
    pub iterations: usize,
    /// Stopping reason.
    pub termination: Termination,
    /// Cost after the initial evaluation and after each accepted step
    /// (non-increasing by construction).
    pub cost_history: Vec<f64>,
}

fn cost_of(r: &Array1<f64>) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn check_finite(v: &Array1<f64>, context: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context: context.to_string() })
    }
}

/// Minimize `0.5 ||r(x)||^2` by Levenberg-Marquardt with a trust region on
/// the step norm.
///
/// Each iteration factors the Jacobian once (thin SVD) and reuses it for all
/// step candidates. When the truncated Gauss-Newton step fits inside the
/// trust radius it is tried directly; otherwise the damping `mu` with
/// `||d(mu)|| = radius` is located on the factorization (the damped step is
/// the minimum-norm least-squares solution of `[J; sqrt(mu) I] d = [-r; 0]`).
/// The radius then follows the gain ratio — actual over model-predicted cost
/// reduction — shrinking after overshoots and growing after near-perfect
/// steps. Bounding the step norm keeps the iterates from drifting along the
/// huge near-null-space directions of these very ill-conditioned collocation
/// Jacobians, which would otherwise destroy the attainable precision.
/// Accepted steps never increase the cost; if no candidate decreases it, the
/// solver stops with [`Termination::Stalled`].
pub fn levenberg_marquardt<R, J>(
    mut residual_fn: R,
    mut jacobian_fn: J,
    x0: Array1<f64>,
    opts: &LmOptions,
) -> Result<LmResult>
where
    R: FnMut(&Array1<f64>) -> Result<Array1<f64>>,
    J: FnMut(&Array1<f64>) -> Result<Array2<f64>>,
{
    let mut x = x0;
    let mut r = residual_fn(&x)?;
    check_finite(&r, "residual")?;
    let mut cost = cost_of(&r);
    let mut cost_history = vec![cost];
    // Trust radius on ||d||; the initial value is generous so that
    // well-behaved problems take the full Gauss-Newton step immediately.
    let norm_x0 = two_norm(&x);
    let mut radius = if norm_x0 > 0.0 { 100.0 * norm_x0 } else { 100.0 };

    for iteration in 0..opts.max_iterations {
        if cost <= opts.cost_tolerance {
            return Ok(LmResult { x, cost, iterations: iteration, termination: Termination::CostTolerance, cost_history });
        }
        let j = jacobian_fn(&x)?;
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "jacobian".to_string() });
        }
        let g = j.t().dot(&r);
        if infinity_norm(&g) <= opts.gradient_tolerance {
            return Ok(LmResult { x, cost, iterations: iteration, termination: Termination::GradientTolerance, cost_history });
        }

        let (u, s, vt) = thin_svd(&j)?;
        let utr = u.t().dot(&r);
        let sigma_max = s.first().copied().unwrap_or(0.0);
        let rcond = opts.rcond.unwrap_or_else(|| default_rcond(j.nrows(), j.ncols()));
        let cutoff = rcond * sigma_max;

        // Step coefficients for damping `m` (0 = truncated Gauss-Newton):
        // with filter factors k_i = s_i^2/(s_i^2+m), the step is
        // d = -V diag(k_i/s_i) U^T r, its norm falls monotonically in `m`,
        // and the model predicts a cost reduction of
        // 0.5 sum_i (U^T r)_i^2 k_i (2 - k_i).
        let step_norm_sq = |m: f64| -> f64 {
            utr.iter()
                .zip(&s)
                .map(|(&ai, &si)| {
                    let di = if m == 0.0 {
                        if si > cutoff && si > 0.0 { ai / si } else { 0.0 }
                    } else {
                        ai * si / (si * si + m)
                    };
                    di * di
                })
                .sum()
        };
        let step_and_prediction = |m: f64| -> (Array1<f64>, f64) {
            let mut c = utr.clone();
            let mut predicted = 0.0;
            for (ci, &si) in c.iter_mut().zip(&s) {
                let k = if m == 0.0 {
                    if si > cutoff && si > 0.0 { 1.0 } else { 0.0 }
                } else {
                    si * si / (si * si + m)
                };
                predicted += *ci * *ci * k * (2.0 - k);
                *ci = if k == 0.0 { 0.0 } else { -*ci * k / si };
            }
            (vt.t().dot(&c), 0.5 * predicted)
        };
        let gn_norm = step_norm_sq(0.0).sqrt();

        // Propose steps until one earns acceptance, shrinking the radius on
        // rejection; `best` tracks any strictly-decreasing trial (non-finite
        // trial costs fail the comparisons and drop out) as a fallback.
        let mut best: Option<(Array1<f64>, Array1<f64>, f64)> = None;
        let mut accepted = false;
        let stall_floor = 1e-14 * (two_norm(&x) + 1.0);
        while radius > stall_floor {
            let (d, predicted, constrained) = if gn_norm <= radius {
                let (d, predicted) = step_and_prediction(0.0);
                (d, predicted, false)
            } else {
                // Bisect log(mu) for ||d(mu)|| = radius; the norm is
                // monotone in mu, so 60 halvings pin it down amply. The
                // configured initial damping tightens one side of the
                // bracket before bisection.
                let mut lo = 1e-18 * sigma_max * sigma_max;
                let mut hi = 1e18 * sigma_max * sigma_max;
                let seed = (opts.initial_damping * sigma_max * sigma_max).clamp(lo, hi);
                if step_norm_sq(seed) > radius * radius {
                    lo = seed;
                } else {
                    hi = seed;
                }
                for _ in 0..60 {
                    let mid = (lo * hi).sqrt();
                    if step_norm_sq(mid) > radius * radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let (d, predicted) = step_and_prediction(hi);
                (d, predicted, true)
            };
            if predicted <= 0.0 {
                break;
            }
            let d_norm = two_norm(&d);
            let x_trial = &x + &d;
            let r_trial = residual_fn(&x_trial)?;
            let cost_trial = cost_of(&r_trial);
            if cost_trial < cost && best.as_ref().map_or(true, |(_, _, c)| cost_trial < *c) {
                best = Some((x_trial, r_trial, cost_trial));
            }
            let gain = (cost - cost_trial) / predicted;

            if gain > 1e-4 && cost_trial < cost {
                if gain >= 0.75 {
                    radius = if constrained { 2.0 * radius } else { radius.max(2.0 * d_norm) };
                } else if gain < 0.25 {
                    radius = 0.25 * d_norm;
                }
                accepted = true;
                break;
            }
            radius = 0.25 * d_norm.min(radius);
        }

        if !accepted && best.is_none() {
            return Ok(LmResult { x, cost, iterations: iteration, termination: Termination::Stalled, cost_history });
        }
        let (x_new, r_new, cost_new) = best.expect("a strictly decreasing trial exists");
        let step = &x_new - &x;
        x = x_new;
        r = r_new;
        cost = cost_new;
        cost_history.push(cost);

        if two_norm(&step) <= opts.step_tolerance * (two_norm(&x) + opts.step_tolerance) {
            return Ok(LmResult { x, cost, iterations: iteration + 1, termination: Termination::StepTolerance, cost_history });
        }
    }

    let iterations = opts.max_iterations;
    let termination =
        if cost <= opts.cost_tolerance { Termination::CostTolerance } else { Termination::MaxIterations };
    Ok(LmResult { x, cost, iterations, termination, cost_history })
}

/// How the restart blend factor `xi_2` is chosen per sub-iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Xi2Mode {
    /// Draw `xi_2` uniformly from `[0, 1]` each sub-iteration.
    Random,
    /// Always 0: restart from the bare perturbation.
    FixedZero,
    /// Always 1: restart from the best iterate plus the perturbation.
    FixedOne,
}

/// Options for [`nlsq_perturb`].
#[derive(Debug, Clone)]
pub struct NlsqOptions {
    /// Perturbation half-range `delta`.
    pub delta: f64,
    /// Blend-factor mode for the restart point.
    pub xi2_mode: Xi2Mode,
    /// Accept and stop once the cost is at or below this threshold.
    pub cost_threshold: f64,
    /// Perturbation restarts attempted before giving up.
    pub max_subiterations: usize,
    /// Inner Levenberg-Marquardt options.
    pub inner: LmOptions,
    /// Seed of the perturbation stream.
    pub seed: u64,
}

impl Default for NlsqOptions {
    fn default() -> Self {
        NlsqOptions {
            delta: 0.5,
            xi2_mode: Xi2Mode::Random,
            cost_threshold: 1e-3,
            max_subiterations: 10,
            inner: LmOptions::default(),
            seed: 0,
        }
    }
}

/// NLSQ-perturb outcome.
#[derive(Debug, Clone)]
pub struct NlsqResult {
    /// Best iterate found.
    pub x: Array1<f64>,
    /// Its cost.
    pub cost: f64,
    /// Perturbation restarts actually used (0 when the first solve already
    /// met the threshold).
    pub subiterations: usize,
    /// Whether the cost threshold was met. Exhausting the sub-iteration
    /// budget is not an error; the best solution is still returned.
    pub converged: bool,
}

/// Nonlinear least squares with random perturbation restarts.
///
/// Runs Levenberg-Marquardt from `x0`; while the cost exceeds
/// `opts.cost_threshold`, repeatedly draws `xi_1` uniform on `[0,1]`, a
/// perturbation uniform on `[-xi_1 delta, xi_1 delta]^n`, blends the restart
/// point `y0 = xi_2 * x_best + perturbation`, and re-solves, keeping the best
/// cost seen. Deterministic for a fixed `opts.seed`.
pub fn nlsq_perturb<R, J>(
    mut residual_fn: R,
    mut jacobian_fn: J,
    x0: Array1<f64>,
    opts: &NlsqOptions,
) -> Result<NlsqResult>
where
    R: FnMut(&Array1<f64>) -> Result<Array1<f64>>,
    J: FnMut(&Array1<f64>) -> Result<Array2<f64>>,
{
    if !(opts.delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {}", opts.delta)));
    }
    if !(opts.cost_threshold > 0.0) {
        return Err(Error::invalid(
            "cost_threshold",
            format!("must be positive, got {}", opts.cost_threshold),
        ));
    }

    let n = x0.len();
    let first = levenberg_marquardt(&mut residual_fn, &mut jacobian_fn, x0, &opts.inner)?;
    let mut best_x = first.x;
    let mut best_cost = first.cost;
    if best_cost <= opts.cost_threshold {
        return Ok(NlsqResult { x: best_x, cost: best_cost, subiterations: 0, converged: true });
    }

    let mut rng = SplitMix64::seed_from_u64(opts.seed);
    for sub in 1..=opts.max_subiterations {
        // Draw order is part of the contract: xi_1, the perturbation
        // entries, then xi_2 (random mode only).
        let xi1: f64 = rng.gen();
        let delta1 = xi1 * opts.delta;
        let pert_dist = Uniform::new_inclusive(-delta1, delta1);
        let perturbation = Array1::from_shape_fn(n, |_| pert_dist.sample(&mut rng));
        let xi2 = match opts.xi2_mode {
            Xi2Mode::Random => rng.gen::<f64>(),
            Xi2Mode::FixedZero => 0.0,
            Xi2Mode::FixedOne => 1.0,
        };
        let y0 = &best_x * xi2 + &perturbation;

        let trial = levenberg_marquardt(&mut residual_fn, &mut jacobian_fn, y0, &opts.inner)?;
        if trial.cost < best_cost {
            best_x = trial.x;
            best_cost = trial.cost;
        }
        if best_cost <= opts.cost_threshold {
            return Ok(NlsqResult { x: best_x, cost: best_cost, subiterations: sub, converged: true });
        }
    }
    Ok(NlsqResult {
        x: best_x,
        cost: best_cost,
        subiterations: opts.max_subiterations,
        converged: false,
    })
}

/// Newton-LLSQ outcome.
#[derive(Debug, Clone)]
pub struct NewtonResult {
    /// Final iterate.
    pub x: Array1<f64>,
    /// Final cost `0.5 * ||G||^2` (diagnostic; Newton drives `G`, not cost).
    pub cost: f64,
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Stopping reason (`GradientTolerance` here means `||G||_inf <= tol`).
    pub termination: Termination,
}

/// Newton iteration with least-squares increments: solve
/// `J(x_k) d = -G(x_k)` in the minimum-norm least-squares sense and update
/// `x_{k+1} = x_k + d` until `||d|| <= tol (1 + ||x||)`, `||G||_inf <= tol`,
/// or `max_iter` steps.
pub fn newton_llsq<R, J>(
    mut residual_fn: R,
    mut jacobian_fn: J,
    x0: Array1<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<NewtonResult>
where
    R: FnMut(&Array1<f64>) -> Result<Array1<f64>>,
    J: FnMut(&Array1<f64>) -> Result<Array2<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let mut x = x0;
    for iteration in 0..max_iter {
        let g = residual_fn(&x)?;
        check_finite(&g, "residual")?;
        if infinity_norm(&g) <= tol {
            return Ok(NewtonResult { x, cost: cost_of(&g), iterations: iteration, termination: Termination::GradientTolerance });
        }
        let j = jacobian_fn(&x)?;
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "jacobian".to_string() });
        }
        let d = lstsq_min_norm(&j, &(-&g), None)?;
        let negligible = two_norm(&d) <= tol * (1.0 + two_norm(&x));
        x = &x + &d;
        if negligible {
            // The vanishing correction is applied but not counted as a step.
            let g = residual_fn(&x)?;
            return Ok(NewtonResult { x, cost: cost_of(&g), iterations: iteration, termination: Termination::StepTolerance });
        }
    }
    let g = residual_fn(&x)?;
    Ok(NewtonResult { x, cost: cost_of(&g), iterations: max_iter, termination: Termination::MaxIterations })
}
