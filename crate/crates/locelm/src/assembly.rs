//! Problem description and algebraic-system assembly.
//!
//! [`ProblemSpec`] describes one PDE instance: the linear operator stencil
//! over `{u, u_x, u_y, u_xx, u_yy, u_t, u_tt}`, an optional nonlinearity
//! `F(u, u_x, u_y)` with its partials, forcing, boundary and initial data,
//! and per-dimension continuity orders for the sub-domain interfaces.
//!
//! [`Assembly`] turns a problem + partition + collocation set + networks into
//! the algebraic system over all output weights (`N_e * M` parameters,
//! sub-domain `s` owning columns `s*M .. (s+1)*M`):
//!
//! - PDE rows at every collocation point of every sub-domain,
//! - Dirichlet rows on domain faces (or periodic difference rows pairing the
//!   two domain faces of a periodic dimension),
//! - initial rows (and initial-velocity rows for second-order-in-time
//!   problems) on the `t = 0` face,
//! - value and, where the continuity order is 1, derivative difference rows
//!   on each interface point, owned by the lower-indexed sub-domain.
//!
//! Rows are ordered by tag, then sub-domain, then point index; the layout is
//! deterministic. For linear problems the system is `A w = b`. With a
//! nonlinearity the residual is `r(w) = A w - b + n(w)` where `n` acts only
//! on PDE rows, and the Jacobian is `A + N(w)` with
//! `N = F_u V + F_ux V_x + F_uy V_y` in the owning column block.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::mesh::{CollocationSet, DomainPartition};
use crate::network::{FeatureJet, LocalNetwork};
use crate::problems::ExactSolution;
use crate::{Error, Result};

/// Scalar field data evaluated at a full coordinate tuple `(x[, y][, t])`.
pub type DataFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Scalar function of `(u, u_x, u_y)` (unused slots are passed as 0).
pub type NonlinearFn = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Problem dimensionality: spatial dimensions plus the temporal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Spatial dimensions (1 or 2).
    pub spatial: usize,
    /// 0 = steady, 1 = first order in time, 2 = second order in time.
    pub time_order: usize,
}

impl Dims {
    /// Total coordinate count (time included when present).
    pub fn total(&self) -> usize {
        self.spatial + usize::from(self.time_order > 0)
    }

    /// Index of the time coordinate, when time-dependent.
    pub fn time_axis(&self) -> Option<usize> {
        (self.time_order > 0).then_some(self.spatial)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.spatial) {
            return Err(Error::invalid("dims", format!("spatial must be 1 or 2, got {}", self.spatial)));
        }
        if self.time_order > 2 {
            return Err(Error::invalid("dims", format!("time_order must be 0, 1, or 2, got {}", self.time_order)));
        }
        Ok(())
    }
}

/// Constant coefficients of the linear operator terms; absent terms are zero.
///
/// The assembled PDE row is
/// `sum(c_term * term(u)) + F(u, u_x, u_y) = f` over terms
/// `{u, u_x, u_y, u_xx, u_yy, u_t, u_tt}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearOp {
    pub c_u: f64,
    pub c_ux: f64,
    pub c_uy: f64,
    pub c_uxx: f64,
    pub c_uyy: f64,
    pub c_ut: f64,
    pub c_utt: f64,
}

/// Nonlinearity `F(u, u_x, u_y)` with all three first partials.
pub struct Nonlinearity {
    /// The nonlinear term added to the PDE row.
    pub f: NonlinearFn,
    /// Partial with respect to `u`.
    pub f_u: NonlinearFn,
    /// Partial with respect to `u_x`.
    pub f_ux: NonlinearFn,
    /// Partial with respect to `u_y`.
    pub f_uy: NonlinearFn,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Nonlinearity { .. }")
    }
}

/// Boundary treatment of one spatial dimension.
pub enum SpatialBoundary {
    /// Dirichlet data on the low and high domain faces.
    Dirichlet {
        /// Data on the low face.
        low: DataFn,
        /// Data on the high face.
        high: DataFn,
    },
    /// Periodicity between the two domain faces: value difference rows, plus
    /// normal-derivative difference rows when `derivative` is set (needed
    /// when the operator is second order in this dimension).
    Periodic {
        /// Also enforce first-derivative periodicity.
        derivative: bool,
    },
}

impl std::fmt::Debug for SpatialBoundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpatialBoundary::Dirichlet { .. } => f.write_str("Dirichlet { .. }"),
            SpatialBoundary::Periodic { derivative } => {
                write!(f, "Periodic {{ derivative: {derivative} }}")
            }
        }
    }
}

/// Initial data at `t = 0`. Closures receive the full block-local coordinate
/// tuple with the time coordinate equal to 0.
pub struct InitialCondition {
    /// `u(x[, y], 0)`.
    pub value: DataFn,
    /// `du/dt(x[, y], 0)`, required exactly when the problem is second order
    /// in time.
    pub velocity: Option<DataFn>,
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "InitialCondition {{ velocity: {} }}", self.velocity.is_some())
    }
}

/// One PDE instance.
pub struct ProblemSpec {
    /// Stable identifier (used by the CLI and reports).
    pub name: &'static str,
    /// Dimensionality.
    pub dims: Dims,
    /// Linear operator coefficients.
    pub linear_op: LinearOp,
    /// Optional nonlinearity with partials.
    pub nonlinearity: Option<Nonlinearity>,
    /// Forcing `f(x[, y][, t])`.
    pub forcing: DataFn,
    /// Per spatial dimension, the boundary treatment.
    pub boundary: Vec<SpatialBoundary>,
    /// Initial data; required when time-dependent.
    pub initial: Option<InitialCondition>,
    /// Per dimension (time last), 0 for value-only interface continuity,
    /// 1 for value + first derivative.
    pub continuity_order: Vec<usize>,
    /// Canonical spatial domain, one `[low, high]` per spatial dimension.
    /// Drivers build partitions from it; the time extent is chosen per run.
    pub spatial_bounds: Vec<[f64; 2]>,
    /// Closed-form solution for error reporting, when known.
    pub exact: Option<ExactSolution>,
}

/// First- and second-derivative coefficients of the operator along `axis`.
pub(crate) fn axis_coefficients(op: &LinearOp, dims: &Dims, axis: usize) -> (f64, f64) {
    if Some(axis) == dims.time_axis() {
        (op.c_ut, op.c_utt)
    } else if axis == 0 {
        (op.c_ux, op.c_uxx)
    } else {
        (op.c_uy, op.c_uyy)
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("linear_op", &self.linear_op)
            .field("nonlinearity", &self.nonlinearity)
            .field("boundary", &self.boundary)
            .field("initial", &self.initial)
            .field("continuity_order", &self.continuity_order)
            .field("spatial_bounds", &self.spatial_bounds)
            .field("exact", &self.exact)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Check internal consistency; every assembly entry point calls this.
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let op = &self.linear_op;
        if self.dims.spatial < 2 && (op.c_uy != 0.0 || op.c_uyy != 0.0) {
            return Err(Error::invalid("linear_op", "y-terms present in a 1D problem"));
        }
        match self.dims.time_order {
            0 => {
                if op.c_ut != 0.0 || op.c_utt != 0.0 {
                    return Err(Error::invalid("linear_op", "time terms present in a steady problem"));
                }
                if self.initial.is_some() {
                    return Err(Error::invalid("initial", "initial data given for a steady problem"));
                }
            }
            1 => {
                if op.c_utt != 0.0 {
                    return Err(Error::invalid("linear_op", "u_tt present in a first-order-in-time problem"));
                }
                let init = self.initial.as_ref().ok_or_else(|| Error::invalid("initial", "missing initial data"))?;
                if init.velocity.is_some() {
                    return Err(Error::invalid("initial", "velocity data given for a first-order-in-time problem"));
                }
            }
            2 => {
                let init = self.initial.as_ref().ok_or_else(|| Error::invalid("initial", "missing initial data"))?;
                if init.velocity.is_none() {
                    return Err(Error::invalid("initial", "second-order-in-time problem needs initial velocity"));
                }
            }
            _ => unreachable!(),
        }
        if self.boundary.len() != self.dims.spatial {
            let dim = self.boundary.len();
            return Err(Error::MissingBoundary { dim, side: "low" });
        }
        if self.continuity_order.len() != self.dims.total() {
            return Err(Error::invalid(
                "continuity_order",
                format!("expected {} entries, got {}", self.dims.total(), self.continuity_order.len()),
            ));
        }
        if self.spatial_bounds.len() != self.dims.spatial {
            return Err(Error::invalid(
                "spatial_bounds",
                format!("expected {} entries, got {}", self.dims.spatial, self.spatial_bounds.len()),
            ));
        }
        for (d, b) in self.spatial_bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::invalid("spatial_bounds", format!("dimension {d}: [{}, {}] is not a valid interval", b[0], b[1])));
            }
        }
        // Continuity order must match the operator order per dimension.
        let second_order = [op.c_uxx != 0.0, op.c_uyy != 0.0];
        for d in 0..self.dims.spatial {
            let expect = usize::from(second_order[d]);
            if self.continuity_order[d] != expect {
                return Err(Error::invalid(
                    "continuity_order",
                    format!("dimension {d}: operator order implies C^{expect}, got C^{}", self.continuity_order[d]),
                ));
            }
        }
        if let Some(t) = self.dims.time_axis() {
            let expect = self.dims.time_order - 1;
            if self.continuity_order[t] != expect {
                return Err(Error::invalid(
                    "continuity_order",
                    format!("time direction: order implies C^{expect}, got C^{}", self.continuity_order[t]),
                ));
            }
        }
        Ok(())
    }

    /// PDE residual of the exact solution at `point`:
    /// `sum(c_term * term(u)) + F(u, u_x, u_y) - f`. Evaluates the exact
    /// solution's derivative jets directly (networks are not involved);
    /// returns `None` without an exact solution. Near zero everywhere iff
    /// operator, forcing, and exact solution are wired consistently.
    pub fn exact_pde_residual(&self, point: &[f64]) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let op = &self.linear_op;
        let u = exact.value(point);
        let mut acc = op.c_u * u - (self.forcing)(point);
        let mut first = [0.0_f64; 3];
        for axis in 0..self.dims.total() {
            let (_, d1, d2) = exact.jet(point, axis);
            first[axis] = d1;
            let (c1, c2) = axis_coefficients(op, &self.dims, axis);
            acc += c1 * d1 + c2 * d2;
        }
        if let Some(nl) = &self.nonlinearity {
            let uy = if self.dims.spatial > 1 { first[1] } else { 0.0 };
            acc += (nl.f)(u, first[0], uy);
        }
        Some(acc)
    }
}

/// Row category, in the fixed emission order of the assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowTag {
    /// PDE enforced at a collocation point.
    Pde,
    /// Dirichlet or periodic-difference row on a domain face.
    Boundary,
    /// Initial value at `t = 0`.
    Initial,
    /// Initial time-derivative at `t = 0` (second order in time only).
    InitialVelocity,
    /// Interface value continuity.
    ContinuityValue,
    /// Interface first-derivative continuity.
    ContinuityDerivative,
}

/// Row provenance: tag plus the owning sub-domain and point index (for
/// interface rows, the lower-indexed sub-domain and its face point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowInfo {
    /// Row category.
    pub tag: RowTag,
    /// Owning sub-domain (linear index).
    pub subdomain: usize,
    /// Point index within the owning sub-domain's collocation list.
    pub point: usize,
}

/// The assembled linear least-squares system with row provenance.
#[derive(Debug, Clone)]
pub struct LeastSquaresSystem {
    /// Coefficient matrix `[n_rows x (N_e * M)]`.
    pub matrix: Array2<f64>,
    /// Right-hand side.
    pub rhs: Array1<f64>,
    /// Per-row provenance, aligned with `matrix` rows.
    pub rows: Vec<RowInfo>,
}

/// Construction-time data overrides used by the block time-marching driver.
///
/// `time_shift` is added to the time coordinate before evaluating forcing and
/// boundary closures (mapping block-local time onto physical time). Initial
/// closures are exempt: they describe the state at block start and are called
/// with block-local coordinates, and can be overridden wholesale to chain
/// blocks.
#[derive(Default)]
pub struct AssemblyOptions<'f> {
    /// Added to the time coordinate for forcing/boundary evaluation.
    pub time_shift: f64,
    /// Replaces the problem's initial value data when set.
    pub initial_value: Option<&'f (dyn Fn(&[f64]) -> f64 + 'f)>,
    /// Replaces the problem's initial velocity data when set.
    pub initial_velocity: Option<&'f (dyn Fn(&[f64]) -> f64 + 'f)>,
}

/// How one matrix row is built.
#[derive(Debug, Clone, Copy)]
enum RowKind {
    /// Operator row at point `p` of sub-domain `e` (rhs = forcing).
    Pde { e: usize, p: usize },
    /// Feature-value row (rhs from a data closure).
    Value { e: usize, p: usize },
    /// Time-derivative row (rhs from the velocity closure).
    TimeDeriv { e: usize, p: usize },
    /// `u` or derivative difference between two points of two sub-domains
    /// (rhs = 0). `axis = None` compares values, `Some(d)` the d-derivative.
    Difference { e_lo: usize, p_lo: usize, e_hi: usize, p_hi: usize, axis: Option<usize> },
}

/// Precomputed assembly engine: feature jets, the constant linear part
/// `(A, b)`, and the row plan. Reused across nonlinear iterations.
pub struct Assembly<'p> {
    problem: &'p ProblemSpec,
    jets: Vec<FeatureJet>,
    rows: Vec<RowInfo>,
    matrix: Array2<f64>,
    rhs: Array1<f64>,
    m: usize,
    q_total: usize,
}

impl<'p> Assembly<'p> {
    /// Build the system for `problem` on `part`/`colloc` with one network per
    /// sub-domain.
    pub fn new(
        problem: &'p ProblemSpec,
        part: &DomainPartition,
        colloc: &CollocationSet,
        networks: &[LocalNetwork],
        options: &AssemblyOptions<'_>,
    ) -> Result<Self> {
        problem.validate()?;
        let dims = problem.dims;
        if part.dims() != dims.total() {
            return Err(Error::invalid(
                "partition",
                format!("problem has {} dimensions, partition has {}", dims.total(), part.dims()),
            ));
        }
        let n_e = part.n_subdomains();
        if colloc.n_subdomains() != n_e {
            return Err(Error::invalid("collocation", "collocation set does not match the partition"));
        }
        if networks.len() != n_e {
            return Err(Error::invalid(
                "networks",
                format!("expected {n_e} networks, got {}", networks.len()),
            ));
        }
        let m = networks[0].m();
        for (e, net) in networks.iter().enumerate() {
            if net.m() != m {
                return Err(Error::invalid("networks", format!("network {e} has M={}, expected {m}", net.m())));
            }
            if net.input_dim() != dims.total() {
                return Err(Error::invalid(
                    "networks",
                    format!("network {e} has input_dim={}, expected {}", net.input_dim(), dims.total()),
                ));
            }
            let bbox = part.subdomain_box(e);
            for d in 0..dims.total() {
                let [nl, nh] = net.bounds()[d];
                let [pl, ph] = bbox[d];
                let tol = 1e-12 * (ph - pl).max(pl.abs()).max(ph.abs()).max(1.0);
                if (nl - pl).abs() > tol || (nh - ph).abs() > tol {
                    return Err(Error::invalid(
                        "networks",
                        format!("network {e} box does not match sub-domain box in dimension {d}"),
                    ));
                }
            }
        }

        // Feature jets once per sub-domain.
        let jets: Vec<FeatureJet> = networks
            .iter()
            .enumerate()
            .map(|(e, net)| net.feature_jet(colloc.points(e)))
            .collect::<Result<_>>()?;

        let plan = build_row_plan(problem, part, colloc)?;
        let q_total = colloc.n_points(0);
        let n_rows = plan.len();
        let n_params = n_e * m;

        let mut matrix = Array2::zeros((n_rows, n_params));
        let mut rhs = Array1::zeros(n_rows);
        let mut rows = Vec::with_capacity(n_rows);

        let time_axis = dims.time_axis();
        // Evaluate a data closure at a point, shifting the time coordinate.
        let shifted = |coords: ArrayView1<f64>| -> Vec<f64> {
            let mut v = coords.to_vec();
            if let Some(t) = time_axis {
                v[t] += options.time_shift;
            }
            v
        };

        // PDE operator matrices per sub-domain (c-weighted jet combination).
        let op = &problem.linear_op;
        let mut lmat: Vec<Array2<f64>> = Vec::with_capacity(n_e);
        for jet in &jets {
            let mut l = Array2::zeros(jet.values.dim());
            if op.c_u != 0.0 {
                l.scaled_add(op.c_u, &jet.values);
            }
            let add_axis = |c1: f64, c2: f64, axis: usize, l: &mut Array2<f64>| {
                if c1 != 0.0 {
                    l.scaled_add(c1, &jet.grad[axis]);
                }
                if c2 != 0.0 {
                    l.scaled_add(c2, &jet.second[axis]);
                }
            };
            add_axis(op.c_ux, op.c_uxx, 0, &mut l);
            if dims.spatial > 1 {
                add_axis(op.c_uy, op.c_uyy, 1, &mut l);
            }
            if let Some(t) = time_axis {
                add_axis(op.c_ut, op.c_utt, t, &mut l);
            }
            lmat.push(l);
        }

        for (row, kind) in plan.iter().enumerate() {
            match kind.1 {
                RowKind::Pde { e, p } => {
                    matrix.slice_mut(s![row, e * m..(e + 1) * m]).assign(&lmat[e].row(p));
                    rhs[row] = (problem.forcing)(&shifted(colloc.points(e).row(p)));
                }
                RowKind::Value { e, p } => {
                    matrix.slice_mut(s![row, e * m..(e + 1) * m]).assign(&jets[e].values.row(p));
                    // Initial rows take the (possibly overridden) initial
                    // closure at block-local coordinates; boundary rows take
                    // the boundary closure at shifted coordinates.
                    rhs[row] = match kind.0.tag {
                        RowTag::Initial => {
                            let coords = colloc.points(e).row(p).to_vec();
                            match options.initial_value {
                                Some(f) => f(&coords),
                                None => (problem.initial.as_ref().unwrap().value)(&coords),
                            }
                        }
                        _ => {
                            let coords = shifted(colloc.points(e).row(p));
                            boundary_data(problem, part, e, p, colloc, &coords)?
                        }
                    };
                }
                RowKind::TimeDeriv { e, p } => {
                    let t = time_axis.expect("time-derivative row in a steady problem");
                    matrix.slice_mut(s![row, e * m..(e + 1) * m]).assign(&jets[e].grad[t].row(p));
                    let coords = colloc.points(e).row(p).to_vec();
                    rhs[row] = match options.initial_velocity {
                        Some(f) => f(&coords),
                        None => (problem.initial.as_ref().unwrap().velocity.as_ref().unwrap())(&coords),
                    };
                }
                RowKind::Difference { e_lo, p_lo, e_hi, p_hi, axis } => {
                    let (lo_block, hi_block) = match axis {
                        None => (&jets[e_lo].values, &jets[e_hi].values),
                        Some(d) => (&jets[e_lo].grad[d], &jets[e_hi].grad[d]),
                    };
                    // += / -= so a dimension with a single periodic
                    // sub-domain (e_lo == e_hi) accumulates correctly.
                    let mut lo = matrix.slice_mut(s![row, e_lo * m..(e_lo + 1) * m]);
                    lo += &lo_block.row(p_lo);
                    let mut hi = matrix.slice_mut(s![row, e_hi * m..(e_hi + 1) * m]);
                    hi -= &hi_block.row(p_hi);
                    rhs[row] = 0.0;
                }
            }
            rows.push(kind.0);
        }

        Ok(Assembly { problem, jets, rows, matrix, rhs, m, q_total })
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of parameters (`N_e * M`).
    pub fn n_params(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row provenance, aligned with the matrix rows.
    pub fn rows(&self) -> &[RowInfo] {
        &self.rows
    }

    /// The constant linear part `A` (PDE rows exclude the nonlinearity).
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// The constant right-hand side `b`.
    pub fn rhs(&self) -> &Array1<f64> {
        &self.rhs
    }

    /// Consume into a [`LeastSquaresSystem`].
    pub fn into_system(self) -> LeastSquaresSystem {
        LeastSquaresSystem { matrix: self.matrix, rhs: self.rhs, rows: self.rows }
    }

    /// Per-sub-domain `(u, u_x, u_y)` at the collocation points for the
    /// parameter block of `w` owned by sub-domain `e`.
    fn fields(&self, e: usize, w: &Array1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let we = w.slice(s![e * self.m..(e + 1) * self.m]);
        let jet = &self.jets[e];
        let u = jet.values.dot(&we);
        let ux = jet.grad[0].dot(&we);
        let uy = if self.problem.dims.spatial > 1 {
            jet.grad[1].dot(&we)
        } else {
            Array1::zeros(u.len())
        };
        (u, ux, uy)
    }

    /// Residual `r(w) = A w - b + n(w)`; `n` is zero without a nonlinearity.
    pub fn residual(&self, w: &Array1<f64>) -> Result<Array1<f64>> {
        if w.len() != self.n_params() {
            return Err(Error::invalid("w", format!("expected length {}, got {}", self.n_params(), w.len())));
        }
        let mut r = self.matrix.dot(w) - &self.rhs;
        if let Some(nl) = &self.problem.nonlinearity {
            for e in 0..self.jets.len() {
                let (u, ux, uy) = self.fields(e, w);
                let base = e * self.q_total;
                for p in 0..self.q_total {
                    r[base + p] += (nl.f)(u[p], ux[p], uy[p]);
                }
            }
        }
        Ok(r)
    }

    /// Jacobian `J(w) = A + N(w)`; equals `A` for every `w` without a
    /// nonlinearity.
    pub fn jacobian(&self, w: &Array1<f64>) -> Result<Array2<f64>> {
        if w.len() != self.n_params() {
            return Err(Error::invalid("w", format!("expected length {}, got {}", self.n_params(), w.len())));
        }
        let mut j = self.matrix.clone();
        if let Some(nl) = &self.problem.nonlinearity {
            for e in 0..self.jets.len() {
                let (u, ux, uy) = self.fields(e, w);
                let jet = &self.jets[e];
                let base = e * self.q_total;
                for p in 0..self.q_total {
                    let fu = (nl.f_u)(u[p], ux[p], uy[p]);
                    let fux = (nl.f_ux)(u[p], ux[p], uy[p]);
                    let fuy = (nl.f_uy)(u[p], ux[p], uy[p]);
                    let mut row = j.slice_mut(s![base + p, e * self.m..(e + 1) * self.m]);
                    if fu != 0.0 {
                        row.scaled_add(fu, &jet.values.row(p));
                    }
                    if fux != 0.0 {
                        row.scaled_add(fux, &jet.grad[0].row(p));
                    }
                    if fuy != 0.0 && self.problem.dims.spatial > 1 {
                        row.scaled_add(fuy, &jet.grad[1].row(p));
                    }
                }
            }
        }
        Ok(j)
    }
}

/// Dirichlet data for the face(s) point `p` of sub-domain `e` lies on.
/// Reached only for `Value` rows emitted on a Dirichlet face, so the face
/// lookup always succeeds.
fn boundary_data(
    problem: &ProblemSpec,
    part: &DomainPartition,
    e: usize,
    p: usize,
    colloc: &CollocationSet,
    coords: &[f64],
) -> Result<f64> {
    let multi = part.multi_index(e);
    for d in 0..problem.dims.spatial {
        if let SpatialBoundary::Dirichlet { low, high } = &problem.boundary[d] {
            if multi[d] == 0 && colloc.face(e, d, 0).contains(&p) {
                return Ok(low(coords));
            }
            if multi[d] + 1 == part.counts()[d] && colloc.face(e, d, 1).contains(&p) {
                return Ok(high(coords));
            }
        }
    }
    Err(Error::MissingBoundary { dim: 0, side: "low" })
}

/// Emit the full row plan in tag order (PDE, boundary, initial, initial
/// velocity, continuity value, continuity derivative), each group ordered by
/// sub-domain then point index.
fn build_row_plan(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
) -> Result<Vec<(RowInfo, RowKind)>> {
    let dims = problem.dims;
    let n_e = part.n_subdomains();
    let time_axis = dims.time_axis();
    let mut plan: Vec<(RowInfo, RowKind)> = Vec::new();
    let mut push = |tag: RowTag, e: usize, p: usize, kind: RowKind| {
        plan.push((RowInfo { tag, subdomain: e, point: p }, kind));
    };

    // PDE rows at every collocation point.
    for e in 0..n_e {
        for p in 0..colloc.n_points(e) {
            push(RowTag::Pde, e, p, RowKind::Pde { e, p });
        }
    }

    // Boundary rows on spatial domain faces.
    for e in 0..n_e {
        let multi = part.multi_index(e);
        for d in 0..dims.spatial {
            match &problem.boundary[d] {
                SpatialBoundary::Dirichlet { .. } => {
                    for side in 0..2 {
                        let on_face =
                            if side == 0 { multi[d] == 0 } else { multi[d] + 1 == part.counts()[d] };
                        if on_face {
                            for &p in colloc.face(e, d, side) {
                                push(RowTag::Boundary, e, p, RowKind::Value { e, p });
                            }
                        }
                    }
                }
                SpatialBoundary::Periodic { derivative } => {
                    // One row (pair) per point, owned by the low-face cell.
                    if multi[d] == 0 {
                        let mut partner = multi.clone();
                        partner[d] = part.counts()[d] - 1;
                        let e_hi = part.linear_index(&partner);
                        let lo_face = colloc.face(e, d, 0).to_vec();
                        let hi_face = colloc.face(e_hi, d, 1).to_vec();
                        debug_assert_eq!(lo_face.len(), hi_face.len());
                        for (&p_lo, &p_hi) in lo_face.iter().zip(&hi_face) {
                            push(RowTag::Boundary, e, p_lo, RowKind::Difference { e_lo: e, p_lo, e_hi, p_hi, axis: None });
                        }
                        if *derivative {
                            for (&p_lo, &p_hi) in lo_face.iter().zip(&hi_face) {
                                push(RowTag::Boundary, e, p_lo, RowKind::Difference { e_lo: e, p_lo, e_hi, p_hi, axis: Some(d) });
                            }
                        }
                    }
                }
            }
        }
    }

    // Initial rows (and velocity rows) on the t = 0 face of the first time
    // slab.
    if let Some(t) = time_axis {
        for e in 0..n_e {
            if part.multi_index(e)[t] == 0 {
                for &p in colloc.face(e, t, 0) {
                    push(RowTag::Initial, e, p, RowKind::Value { e, p });
                }
            }
        }
        if dims.time_order == 2 {
            for e in 0..n_e {
                if part.multi_index(e)[t] == 0 {
                    for &p in colloc.face(e, t, 0) {
                        push(RowTag::InitialVelocity, e, p, RowKind::TimeDeriv { e, p });
                    }
                }
            }
        }
    }

    // Interface continuity: value rows, then derivative rows where C^1.
    // Each shared face is owned by the lower-indexed sub-domain.
    for derivative in [false, true] {
        for e in 0..n_e {
            let multi = part.multi_index(e);
            for d in 0..dims.total() {
                if derivative && problem.continuity_order[d] == 0 {
                    continue;
                }
                if multi[d] + 1 >= part.counts()[d] {
                    continue;
                }
                let mut nb = multi.clone();
                nb[d] += 1;
                let e_hi = part.linear_index(&nb);
                let lo_face = colloc.face(e, d, 1);
                let hi_face = colloc.face(e_hi, d, 0);
                debug_assert_eq!(lo_face.len(), hi_face.len());
                let (tag, axis) = if derivative {
                    (RowTag::ContinuityDerivative, Some(d))
                } else {
                    (RowTag::ContinuityValue, None)
                };
                for (&p_lo, &p_hi) in lo_face.iter().zip(hi_face) {
                    push(tag, e, p_lo, RowKind::Difference { e_lo: e, p_lo, e_hi, p_hi, axis });
                }
            }
        }
    }

    Ok(plan)
}

/// Assemble the linear least-squares system (linear problems only).
pub fn assemble_linear(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
    networks: &[LocalNetwork],
) -> Result<LeastSquaresSystem> {
    if problem.nonlinearity.is_some() {
        return Err(Error::invalid("nonlinearity", "assemble_linear requires a linear problem"));
    }
    Ok(Assembly::new(problem, part, colloc, networks, &AssemblyOptions::default())?.into_system())
}

/// Residual vector at parameters `w` (same row layout as
/// [`assemble_linear`]; PDE rows include the nonlinearity when present).
pub fn residual(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
    networks: &[LocalNetwork],
    w: &Array1<f64>,
) -> Result<Array1<f64>> {
    Assembly::new(problem, part, colloc, networks, &AssemblyOptions::default())?.residual(w)
}

/// Jacobian of [`residual`] with respect to `w`.
pub fn jacobian(
    problem: &ProblemSpec,
    part: &DomainPartition,
    colloc: &CollocationSet,
    networks: &[LocalNetwork],
    w: &Array1<f64>,
) -> Result<Array2<f64>> {
    Assembly::new(problem, part, colloc, networks, &AssemblyOptions::default())?.jacobian(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{collocation, partition, Distribution};
    use crate::network::LocalNetwork;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    /// A generic second-order Dirichlet problem in `spatial` dims, first
    /// order in time when `time` is set, with zero data.
    fn generic_problem(spatial: usize, time: bool) -> ProblemSpec {
        let mut op = LinearOp { c_u: -10.0, c_uxx: 1.0, ..LinearOp::default() };
        let mut continuity = vec![1];
        if spatial > 1 {
            op.c_uyy = 1.0;
            continuity.push(1);
        }
        if time {
            op.c_ut = 1.0;
            continuity.push(0);
        }
        let dirichlet = || SpatialBoundary::Dirichlet {
            low: Box::new(|_: &[f64]| 0.0),
            high: Box::new(|_: &[f64]| 0.0),
        };
        ProblemSpec {
            name: "generic",
            dims: Dims { spatial, time_order: usize::from(time) },
            linear_op: op,
            nonlinearity: None,
            forcing: Box::new(|_: &[f64]| 0.0),
            boundary: (0..spatial).map(|_| dirichlet()).collect(),
            initial: time.then(|| InitialCondition { value: Box::new(|_: &[f64]| 0.0), velocity: None }),
            continuity_order: continuity,
            spatial_bounds: vec![[0.0, 10.0]; spatial],
            exact: None,
        }
    }

    fn networks_for(
        part: &crate::mesh::DomainPartition,
        widths: &[usize],
        r_m: f64,
        seed: u64,
    ) -> Vec<LocalNetwork> {
        (0..part.n_subdomains())
            .map(|e| {
                LocalNetwork::new(part.dims(), widths, r_m, seed + e as u64, &part.subdomain_box(e))
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn hand_counted_1d_helmholtz_rows() {
        // N_e = 2, Q = 3, M = 2: 6 PDE + 2 Dirichlet + 1 value + 1 derivative
        // continuity = 10 rows, 4 parameters.
        let part = partition(&[[0.0, 8.0]], &[2]).unwrap();
        let colloc = collocation(&part, &[3], Distribution::Uniform, 0).unwrap();
        let nets = networks_for(&part, &[2], 1.0, 1);
        let problem = generic_problem(1, false);
        let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();
        assert_eq!(sys.matrix.nrows(), 10);
        assert_eq!(sys.matrix.ncols(), 4);
        let count = |tag: RowTag| sys.rows.iter().filter(|r| r.tag == tag).count();
        assert_eq!(count(RowTag::Pde), 6);
        assert_eq!(count(RowTag::Boundary), 2);
        assert_eq!(count(RowTag::ContinuityValue), 1);
        assert_eq!(count(RowTag::ContinuityDerivative), 1);
        // Tag-major ordering.
        let tags: Vec<RowTag> = sys.rows.iter().map(|r| r.tag).collect();
        let mut sorted = tags.clone();
        sorted.sort();
        assert_eq!(tags, sorted);
    }

    #[test]
    fn row_counts_match_formulas_for_random_configurations() {
        // Dirichlet problems with C^1 spatial interfaces and (optionally)
        // first-order time: row counts follow the closed-form formulas.
        let mut rng = SplitMix64::seed_from_u64(7);
        for case in 0..20 {
            let spatial = 1 + case % 2;
            let time = case % 3 == 0;
            let dims_total = spatial + usize::from(time);
            let counts: Vec<usize> = (0..dims_total).map(|_| rng.gen_range(1..4)).collect();
            let q: Vec<usize> = (0..dims_total).map(|_| rng.gen_range(3..6)).collect();
            let bounds: Vec<[f64; 2]> = (0..dims_total).map(|d| [0.0, 1.0 + d as f64]).collect();
            let part = partition(&bounds, &counts).unwrap();
            let colloc = collocation(&part, &q, Distribution::Uniform, 0).unwrap();
            let nets = networks_for(&part, &[3], 1.0, case as u64);
            let problem = generic_problem(spatial, time);
            let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();

            let n_e: usize = counts.iter().product();
            let expect = match (spatial, time) {
                (1, false) => n_e * (q[0] + 2),
                (2, false) => n_e * (q[0] * q[1] + 2 * q[0] + 2 * q[1]),
                (1, true) => n_e * (q[0] * q[1] + 2 * q[1] + q[0]),
                (2, true) => n_e * (q[0] * q[1] * q[2] + 2 * (q[0] + q[1]) * q[2] + q[0] * q[1]),
                _ => unreachable!(),
            };
            assert_eq!(sys.matrix.nrows(), expect, "case {case}: counts {counts:?} q {q:?}");
        }
    }

    #[test]
    fn block_sparsity_couples_only_face_neighbors() {
        let part = partition(&[[0.0, 2.0], [0.0, 2.0]], &[2, 2]).unwrap();
        let colloc = collocation(&part, &[4, 4], Distribution::Uniform, 0).unwrap();
        let nets = networks_for(&part, &[5], 1.5, 3);
        let problem = generic_problem(2, false);
        let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();
        let m = 5;
        for (row, info) in sys.rows.iter().enumerate() {
            let mut blocks = Vec::new();
            for e in 0..4 {
                let any = sys.matrix.slice(s![row, e * m..(e + 1) * m]).iter().any(|&v| v != 0.0);
                if any {
                    blocks.push(e);
                }
            }
            assert!(blocks.contains(&info.subdomain), "row {row} misses its own block");
            assert!(blocks.len() <= 2, "row {row} couples {blocks:?}");
            if blocks.len() == 2 {
                let a = part.multi_index(blocks[0]);
                let b = part.multi_index(blocks[1]);
                let diff: usize =
                    a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
                assert_eq!(diff, 1, "row {row} couples non-adjacent blocks {blocks:?}");
            }
        }
    }

    #[test]
    fn linear_residual_equals_matrix_form() {
        let part = partition(&[[0.0, 8.0]], &[3]).unwrap();
        let colloc = collocation(&part, &[6], Distribution::GaussLobatto, 0).unwrap();
        let nets = networks_for(&part, &[8], 2.0, 5);
        let mut problem = generic_problem(1, false);
        problem.forcing = Box::new(|p: &[f64]| (2.0 * p[0]).sin());
        let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();
        let mut rng = SplitMix64::seed_from_u64(2);
        let w = Array1::from_shape_fn(24, |_| rng.gen_range(-1.0..1.0));
        let r = residual(&problem, &part, &colloc, &nets, &w).unwrap();
        let direct = sys.matrix.dot(&w) - &sys.rhs;
        for (a, b) in r.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
        // And the Jacobian is exactly A at any w.
        let j = jacobian(&problem, &part, &colloc, &nets, &w).unwrap();
        assert_eq!(j, sys.matrix);
    }

    #[test]
    fn zero_data_yields_zero_rhs_and_zero_solution() {
        let part = partition(&[[0.0, 2.0], [0.0, 2.0]], &[2, 1]).unwrap();
        let colloc = collocation(&part, &[4, 4], Distribution::Uniform, 0).unwrap();
        let nets = networks_for(&part, &[6], 1.0, 9);
        let problem = generic_problem(2, false);
        let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        let x = crate::solvers::lstsq_min_norm(&sys.matrix, &sys.rhs, None).unwrap();
        assert!(x.iter().all(|&v| v.abs() <= 1e-12), "homogeneous solve must be zero");
    }

    #[test]
    fn jacobian_matches_finite_differences_on_nonlinear_problem() {
        // Small instance: N_e = 2, M = 3, Q = 4, F = beta sin(u) + u u_x.
        let part = partition(&[[0.0, 2.0]], &[2]).unwrap();
        let colloc = collocation(&part, &[4], Distribution::Uniform, 0).unwrap();
        let nets = networks_for(&part, &[3], 1.5, 11);
        let mut problem = generic_problem(1, false);
        problem.nonlinearity = Some(Nonlinearity {
            f: Box::new(|u, ux, _| 3.0 * u.sin() + u * ux),
            f_u: Box::new(|u, ux, _| 3.0 * u.cos() + ux),
            f_ux: Box::new(|u, _, _| u),
            f_uy: Box::new(|_, _, _| 0.0),
        });
        let mut rng = SplitMix64::seed_from_u64(4);
        let w = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
        let j = jacobian(&problem, &part, &colloc, &nets, &w).unwrap();

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let norm = j.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..w.len() {
            let mut wp = w.clone();
            wp[k] += h;
            let mut wm = w.clone();
            wm[k] -= h;
            let rp = residual(&problem, &part, &colloc, &nets, &wp).unwrap();
            let rm = residual(&problem, &part, &colloc, &nets, &wm).unwrap();
            let fd = (rp - rm) / (2.0 * h);
            for (row, fd_v) in fd.iter().enumerate() {
                worst = worst.max((j[[row, k]] - fd_v).abs() / norm.max(1.0));
            }
        }
        assert!(worst <= 1e-5, "jacobian FD mismatch {worst:.3e}");
    }

    #[test]
    fn periodic_rows_pair_the_domain_faces() {
        // 1D + time, one spatial sub-domain: the periodic pair is the cell
        // with itself; value rows must reference both faces.
        let part = partition(&[[0.0, 5.0], [0.0, 1.0]], &[1, 1]).unwrap();
        let colloc = collocation(&part, &[4, 3], Distribution::Uniform, 0).unwrap();
        let nets = networks_for(&part, &[4], 1.0, 2);
        let problem = ProblemSpec {
            name: "advect",
            dims: Dims { spatial: 1, time_order: 1 },
            linear_op: LinearOp { c_ut: 1.0, c_ux: 2.0, ..LinearOp::default() },
            nonlinearity: None,
            forcing: Box::new(|_: &[f64]| 0.0),
            boundary: vec![SpatialBoundary::Periodic { derivative: false }],
            initial: Some(InitialCondition { value: Box::new(|p: &[f64]| p[0].sin()), velocity: None }),
            continuity_order: vec![0, 0],
            spatial_bounds: vec![[0.0, 5.0]],
            exact: None,
        };
        let sys = assemble_linear(&problem, &part, &colloc, &nets).unwrap();
        // 12 PDE + 3 periodic pairs + 4 initial = 19 rows.
        assert_eq!(sys.matrix.nrows(), 19);
        let boundary_rows: Vec<usize> = sys
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.tag == RowTag::Boundary)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(boundary_rows.len(), 3);
        for &row in &boundary_rows {
            assert_eq!(sys.rhs[row], 0.0);
            // Row must involve points on both x-faces with opposite signs:
            // the row dotted with any weights equals u(low) - u(high).
            assert!(sys.matrix.row(row).iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn validation_rejects_inconsistent_specs() {
        let mut p = generic_problem(1, false);
        p.continuity_order = vec![0]; // operator is second order -> C^1
        assert!(p.validate().is_err());

        let mut p = generic_problem(1, true);
        p.initial = None;
        assert!(p.validate().is_err());

        let mut p = generic_problem(2, false);
        p.boundary.pop();
        assert!(matches!(p.validate().unwrap_err(), Error::MissingBoundary { .. }));
    }
}
