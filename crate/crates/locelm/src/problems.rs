//! Benchmark problem constructors.
//!
//! Each constructor returns a fully wired [`ProblemSpec`]: operator
//! coefficients, boundary/initial data taken from a closed-form solution,
//! and a forcing term manufactured so that the closed-form solution solves
//! the problem exactly. The homogeneous transport problems (`advection1d`,
//! `wave2nd1d`) carry zero forcing and periodic boundaries instead.
//!
//! | id              | equation                                  | domain    |
//! |-----------------|-------------------------------------------|-----------|
//! | `helmholtz1d`   | `u'' - 10 u = f`                          | `[0, 8]`  |
//! | `helmholtz2d`   | `u_xx + u_yy - 10 u = f`                  | `[0,3.6]^2` |
//! | `advection1d`   | `u_t + 2 u_x = 0`, periodic               | `[0, 5]`  |
//! | `wave2nd1d`     | `u_tt - 4 u_xx = 0`, periodic `u`, `u_x`  | `[0, 5]`  |
//! | `diffusion1d`   | `u_t - 0.01 u_xx = f`                     | `[0, 5]`  |
//! | `nlhelmholtz1d` | `u'' - 50 u + 10 sin(u) = f`              | `[0, 8]`  |
//! | `burgers1d`     | `u_t + u u_x - 0.01 u_xx = f`             | `[0, 5]`  |

use std::f64::consts::PI;

use crate::assembly::{
    axis_coefficients, DataFn, Dims, InitialCondition, LinearOp, Nonlinearity, ProblemSpec,
    SpatialBoundary,
};
use crate::dual::Dual2;
use crate::solvers::{NlsqOptions, Xi2Mode};
use crate::{Error, Result};

/// Closed-form reference solution, differentiable to second order along each
/// coordinate axis via dual-number evaluation.
#[derive(Clone, Copy)]
pub struct ExactSolution {
    f: fn(&[Dual2]) -> Dual2,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    /// Wrap a dual-number evaluation of the solution.
    pub fn from_dual(f: fn(&[Dual2]) -> Dual2) -> Self {
        ExactSolution { f }
    }

    /// Solution value at `point`.
    pub fn value(&self, point: &[f64]) -> f64 {
        let duals: Vec<Dual2> = point.iter().map(|&x| Dual2::con(x)).collect();
        (self.f)(&duals).v
    }

    /// `(u, du/dx_axis, d2u/dx_axis^2)` at `point`.
    pub fn jet(&self, point: &[f64], axis: usize) -> (f64, f64, f64) {
        let duals: Vec<Dual2> = point
            .iter()
            .enumerate()
            .map(|(i, &x)| if i == axis { Dual2::var(x) } else { Dual2::con(x) })
            .collect();
        let r = (self.f)(&duals);
        (r.v, r.d, r.dd)
    }
}

/// The stable problem identifiers accepted by [`by_name`].
pub const PROBLEM_IDS: [&str; 7] = [
    "helmholtz1d",
    "helmholtz2d",
    "advection1d",
    "wave2nd1d",
    "diffusion1d",
    "nlhelmholtz1d",
    "burgers1d",
];

/// Look a benchmark problem up by its identifier.
pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "helmholtz1d" => Ok(helmholtz_1d()),
        "helmholtz2d" => Ok(helmholtz_2d()),
        "advection1d" => Ok(advection_1d()),
        "wave2nd1d" => Ok(wave_second_order_1d()),
        "diffusion1d" => Ok(diffusion_1d()),
        "nlhelmholtz1d" => Ok(nonlinear_helmholtz_1d()),
        "burgers1d" => Ok(burgers_1d()),
        _ => Err(Error::invalid(
            "problem",
            format!("unknown problem '{name}' (available: {})", PROBLEM_IDS.join(", ")),
        )),
    }
}

/// Suggested perturbed least-squares settings for the nonlinear benchmarks
/// (`None` for the linear ones).
pub fn recommended_nlsq(name: &str) -> Option<NlsqOptions> {
    match name {
        "nlhelmholtz1d" => Some(NlsqOptions { delta: 0.2, xi2_mode: Xi2Mode::FixedOne, ..NlsqOptions::default() }),
        "burgers1d" => Some(NlsqOptions { delta: 0.5, xi2_mode: Xi2Mode::FixedZero, ..NlsqOptions::default() }),
        _ => None,
    }
}

/// Forcing that makes `exact` solve the operator + optional nonlinearity.
fn manufactured_forcing(
    exact: fn(&[Dual2]) -> Dual2,
    dims: Dims,
    op: LinearOp,
    nonlinear: Option<fn(f64, f64, f64) -> f64>,
) -> DataFn {
    Box::new(move |point: &[f64]| {
        let ex = ExactSolution::from_dual(exact);
        let u = ex.value(point);
        let mut acc = op.c_u * u;
        let mut first = [0.0_f64; 3];
        for axis in 0..dims.total() {
            let (_, d1, d2) = ex.jet(point, axis);
            first[axis] = d1;
            let (c1, c2) = axis_coefficients(&op, &dims, axis);
            acc += c1 * d1 + c2 * d2;
        }
        if let Some(f) = nonlinear {
            let uy = if dims.spatial > 1 { first[1] } else { 0.0 };
            acc += f(u, first[0], uy);
        }
        acc
    })
}

/// Dirichlet data on both faces of one dimension, restricted from `exact`.
fn dirichlet_from(exact: ExactSolution) -> SpatialBoundary {
    SpatialBoundary::Dirichlet {
        low: Box::new(move |p: &[f64]| exact.value(p)),
        high: Box::new(move |p: &[f64]| exact.value(p)),
    }
}

/// Initial value restricted from `exact` (time coordinate is 0 at the call).
fn initial_from(exact: ExactSolution) -> InitialCondition {
    InitialCondition { value: Box::new(move |p: &[f64]| exact.value(p)), velocity: None }
}

fn helm1d_dual(p: &[Dual2]) -> Dual2 {
    let x = p[0];
    (x * (3.0 * PI) + 3.0 * PI / 20.0).sin() * (x * (2.0 * PI) + PI / 10.0).cos() + 2.0
}

/// `u'' - 10 u = f` on `[0, 8]` with Dirichlet ends.
pub fn helmholtz_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 0 };
    let op = LinearOp { c_uxx: 1.0, c_u: -10.0, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(helm1d_dual);
    ProblemSpec {
        name: "helmholtz1d",
        dims,
        linear_op: op,
        nonlinearity: None,
        forcing: manufactured_forcing(helm1d_dual, dims, op, None),
        boundary: vec![dirichlet_from(exact)],
        initial: None,
        continuity_order: vec![1],
        spatial_bounds: vec![[0.0, 8.0]],
        exact: Some(exact),
    }
}

fn helm2d_factor(a: Dual2) -> Dual2 {
    (a * PI + 2.0 * PI / 5.0).cos() * 1.5 + (a * (2.0 * PI) - PI / 5.0).cos() * 2.0
}

fn helm2d_dual(p: &[Dual2]) -> Dual2 {
    -(helm2d_factor(p[0]) * helm2d_factor(p[1]))
}

/// `u_xx + u_yy - 10 u = f` on `[0, 3.6]^2` with Dirichlet faces.
pub fn helmholtz_2d() -> ProblemSpec {
    let dims = Dims { spatial: 2, time_order: 0 };
    let op = LinearOp { c_uxx: 1.0, c_uyy: 1.0, c_u: -10.0, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(helm2d_dual);
    ProblemSpec {
        name: "helmholtz2d",
        dims,
        linear_op: op,
        nonlinearity: None,
        forcing: manufactured_forcing(helm2d_dual, dims, op, None),
        boundary: vec![dirichlet_from(exact), dirichlet_from(exact)],
        initial: None,
        continuity_order: vec![1, 1],
        spatial_bounds: vec![[0.0, 3.6], [0.0, 3.6]],
        exact: Some(exact),
    }
}

/// Spatial period of the transport problems.
const TRANSPORT_LENGTH: f64 = 5.0;
/// Advection speed parameter (`u_t - c u_x = 0`).
const ADVECTION_C: f64 = -2.0;
/// Advection initial peak location.
const ADVECTION_X0: f64 = 2.5;
/// Wave speed (`u_tt - c^2 u_xx = 0`).
const WAVE_C: f64 = 2.0;
/// Wave initial peak location.
const WAVE_X0: f64 = 3.0;

fn advection_dual(p: &[Dual2]) -> Dual2 {
    let (x, t) = (p[0], p[1]);
    let l = TRANSPORT_LENGTH;
    let xi = (x + t * ADVECTION_C + (l / 2.0 - ADVECTION_X0)).rem_euclid(l);
    ((xi - l / 2.0) * 3.0).sech() * 2.0
}

/// `u_t + 2 u_x = 0` on `[0, 5]`, periodic in `x`: a wrapped traveling pulse.
pub fn advection_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 1 };
    let op = LinearOp { c_ut: 1.0, c_ux: -ADVECTION_C, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(advection_dual);
    ProblemSpec {
        name: "advection1d",
        dims,
        linear_op: op,
        nonlinearity: None,
        forcing: Box::new(|_: &[f64]| 0.0),
        boundary: vec![SpatialBoundary::Periodic { derivative: false }],
        initial: Some(initial_from(exact)),
        continuity_order: vec![0, 0],
        spatial_bounds: vec![[0.0, TRANSPORT_LENGTH]],
        exact: Some(exact),
    }
}

fn wave_dual(p: &[Dual2]) -> Dual2 {
    let (x, t) = (p[0], p[1]);
    let l = TRANSPORT_LENGTH;
    let shift = l / 2.0 - WAVE_X0;
    let xi = (x + t * WAVE_C + shift).rem_euclid(l);
    let eta = (x - t * WAVE_C + shift).rem_euclid(l);
    ((xi - l / 2.0) * 3.0).sech() + ((eta - l / 2.0) * 3.0).sech()
}

/// `u_tt - 4 u_xx = 0` on `[0, 5]`, periodic in `u` and `u_x`, zero initial
/// velocity: two counter-propagating pulses.
pub fn wave_second_order_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 2 };
    let op = LinearOp { c_utt: 1.0, c_uxx: -(WAVE_C * WAVE_C), ..LinearOp::default() };
    let exact = ExactSolution::from_dual(wave_dual);
    ProblemSpec {
        name: "wave2nd1d",
        dims,
        linear_op: op,
        nonlinearity: None,
        forcing: Box::new(|_: &[f64]| 0.0),
        boundary: vec![SpatialBoundary::Periodic { derivative: true }],
        initial: Some(InitialCondition {
            value: Box::new(move |p: &[f64]| exact.value(p)),
            velocity: Some(Box::new(move |p: &[f64]| exact.jet(p, 1).1)),
        }),
        continuity_order: vec![1, 1],
        spatial_bounds: vec![[0.0, TRANSPORT_LENGTH]],
        exact: Some(exact),
    }
}

fn diffusion_factor(a: Dual2) -> Dual2 {
    (a * PI + PI / 5.0).cos() * 2.0 + (a * (2.0 * PI) - 3.0 * PI / 5.0).cos() * 1.5
}

fn diffusion_dual(p: &[Dual2]) -> Dual2 {
    diffusion_factor(p[0]) * diffusion_factor(p[1])
}

/// `u_t - 0.01 u_xx = f` on `[0, 5]` with Dirichlet ends.
pub fn diffusion_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 1 };
    let op = LinearOp { c_ut: 1.0, c_uxx: -0.01, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(diffusion_dual);
    ProblemSpec {
        name: "diffusion1d",
        dims,
        linear_op: op,
        nonlinearity: None,
        forcing: manufactured_forcing(diffusion_dual, dims, op, None),
        boundary: vec![dirichlet_from(exact)],
        initial: Some(initial_from(exact)),
        continuity_order: vec![1, 0],
        spatial_bounds: vec![[0.0, 5.0]],
        exact: Some(exact),
    }
}

fn nlhelm_dual(p: &[Dual2]) -> Dual2 {
    let x = p[0];
    (x * (3.0 * PI) + 3.0 * PI / 20.0).sin() * (x * (4.0 * PI) - 2.0 * PI / 5.0).cos() + 1.5 + x * 0.1
}

fn nlhelm_term(u: f64, _ux: f64, _uy: f64) -> f64 {
    10.0 * u.sin()
}

/// `u'' - 50 u + 10 sin(u) = f` on `[0, 8]` with Dirichlet ends.
pub fn nonlinear_helmholtz_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 0 };
    let op = LinearOp { c_uxx: 1.0, c_u: -50.0, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(nlhelm_dual);
    ProblemSpec {
        name: "nlhelmholtz1d",
        dims,
        linear_op: op,
        nonlinearity: Some(Nonlinearity {
            f: Box::new(nlhelm_term),
            f_u: Box::new(|u, _, _| 10.0 * u.cos()),
            f_ux: Box::new(|_, _, _| 0.0),
            f_uy: Box::new(|_, _, _| 0.0),
        }),
        forcing: manufactured_forcing(nlhelm_dual, dims, op, Some(nlhelm_term)),
        boundary: vec![dirichlet_from(exact)],
        initial: None,
        continuity_order: vec![1],
        spatial_bounds: vec![[0.0, 8.0]],
        exact: Some(exact),
    }
}

fn burgers_factor(a: Dual2) -> Dual2 {
    (a * PI + 2.0 * PI / 5.0).cos() * 2.0 + (a * (2.0 * PI) - 3.0 * PI / 5.0).cos() * 1.5
}

fn burgers_dual(p: &[Dual2]) -> Dual2 {
    let (x, t) = (p[0], p[1]);
    (x * 0.1 + 1.0) * (t * 0.1 + 1.0) * burgers_factor(x) * burgers_factor(t)
}

fn burgers_term(u: f64, ux: f64, _uy: f64) -> f64 {
    u * ux
}

/// `u_t + u u_x - 0.01 u_xx = f` on `[0, 5]` with Dirichlet ends.
pub fn burgers_1d() -> ProblemSpec {
    let dims = Dims { spatial: 1, time_order: 1 };
    let op = LinearOp { c_ut: 1.0, c_uxx: -0.01, ..LinearOp::default() };
    let exact = ExactSolution::from_dual(burgers_dual);
    ProblemSpec {
        name: "burgers1d",
        dims,
        linear_op: op,
        nonlinearity: Some(Nonlinearity {
            f: Box::new(burgers_term),
            f_u: Box::new(|_, ux, _| ux),
            f_ux: Box::new(|u, _, _| u),
            f_uy: Box::new(|_, _, _| 0.0),
        }),
        forcing: manufactured_forcing(burgers_dual, dims, op, Some(burgers_term)),
        boundary: vec![dirichlet_from(exact)],
        initial: Some(initial_from(exact)),
        continuity_order: vec![1, 0],
        spatial_bounds: vec![[0.0, 5.0]],
        exact: Some(exact),
    }
}
