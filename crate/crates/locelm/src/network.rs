//! Per-sub-domain local extreme learning machines.
//!
//! A [`LocalNetwork`] is a small feed-forward network with tanh hidden layers
//! whose hidden weights and biases are drawn once, uniformly at random on
//! `[-r_m, r_m]`, and then frozen. Only the linear, bias-free output layer
//! (`output_weights`, length `M` = last hidden width) is trainable. The
//! network output is `u(x) = sum_j V_j(x) * w_j` where `V_j` are the last
//! hidden layer's activations ("features").
//!
//! Inputs are normalized per sub-domain by an affine map onto `[-1,1]^d`
//! before the first layer. Derivatives are computed by forward-mode jet
//! propagation: every layer carries, per input dimension `d`, the triple
//! (value, d/dx_d, d^2/dx_d^2). Cross second derivatives are never needed by
//! the supported operators and are not propagated.
//!
//! Randomness: the coefficient stream is a SplitMix64 generator seeded with
//! the construction seed. Draws happen layer by layer in declaration order:
//! first the layer's weight matrix in row-major order (output node index
//! outer, input index inner), then the layer's bias vector. Output weights
//! are zero-initialized and never drawn.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::{Error, Result};

/// Per-dimension affine normalization `x_hat = scale * x + shift` mapping a
/// sub-domain box onto `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    /// Multiplicative factor per input dimension.
    pub scale: Vec<f64>,
    /// Additive shift per input dimension.
    pub shift: Vec<f64>,
}

impl AffineMap {
    /// Build the map sending `[low, high]` to `[-1, 1]` in every dimension.
    fn for_box(bounds: &[[f64; 2]]) -> Self {
        let mut scale = Vec::with_capacity(bounds.len());
        let mut shift = Vec::with_capacity(bounds.len());
        for &[low, high] in bounds {
            let s = 2.0 / (high - low);
            scale.push(s);
            shift.push(-(high + low) / (high - low));
        }
        AffineMap { scale, shift }
    }

    /// Apply the map to one coordinate of dimension `d`.
    #[inline]
    pub fn apply(&self, d: usize, x: f64) -> f64 {
        self.scale[d] * x + self.shift[d]
    }
}

/// Last-hidden-layer features and their derivatives at a batch of points.
///
/// All matrices are `[n_points x M]`. `grad[d]` holds `dV_j/dx_d` and
/// `second[d]` holds `d^2V_j/dx_d^2` (pure second derivatives only), both in
/// physical (un-normalized) coordinates.
#[derive(Debug, Clone)]
pub struct FeatureJet {
    /// Feature values `V_j(x_i)`.
    pub values: Array2<f64>,
    /// First derivatives per input dimension.
    pub grad: Vec<Array2<f64>>,
    /// Pure second derivatives per input dimension.
    pub second: Vec<Array2<f64>>,
}

/// One sub-domain's local ELM: fixed random hidden layers, trainable linear
/// output layer.
#[derive(Debug, Clone)]
pub struct LocalNetwork {
    input_dim: usize,
    hidden_widths: Vec<usize>,
    /// Per layer, `[width x fan_in]`.
    hidden_weights: Vec<Array2<f64>>,
    /// Per layer, `[width]`.
    hidden_biases: Vec<Array1<f64>>,
    /// Trainable output weights, length `M`.
    output_weights: Array1<f64>,
    affine: AffineMap,
    r_m: f64,
    bounds: Vec<[f64; 2]>,
}

/// Relative tolerance below which points marginally outside the box are
/// clamped onto it (absorbs floating-point boundary coordinates).
const BOX_TOLERANCE: f64 = 1e-12;

impl LocalNetwork {
    /// Construct a network with random hidden coefficients on `[-r_m, r_m]`.
    ///
    /// `subdomain_box` lists `[low, high]` per input dimension; the affine
    /// normalization onto `[-1,1]^d` is derived from it. Construction is
    /// deterministic for a fixed `seed`. Output weights start at zero.
    pub fn new(
        input_dim: usize,
        hidden_widths: &[usize],
        r_m: f64,
        seed: u64,
        subdomain_box: &[[f64; 2]],
    ) -> Result<Self> {
        if !(1..=3).contains(&input_dim) {
            return Err(Error::invalid("input_dim", format!("must be 1, 2, or 3, got {input_dim}")));
        }
        if hidden_widths.is_empty() {
            return Err(Error::invalid("hidden_widths", "must be non-empty"));
        }
        if let Some(&w) = hidden_widths.iter().find(|&&w| w == 0) {
            return Err(Error::invalid("hidden_widths", format!("all widths must be >= 1, got {w}")));
        }
        if !(r_m > 0.0 && r_m.is_finite()) {
            return Err(Error::invalid("r_m", format!("must be positive and finite, got {r_m}")));
        }
        if subdomain_box.len() != input_dim {
            return Err(Error::invalid(
                "subdomain_box",
                format!("expected {input_dim} dimensions, got {}", subdomain_box.len()),
            ));
        }
        for (d, &[low, high]) in subdomain_box.iter().enumerate() {
            if !(high > low) || !low.is_finite() || !high.is_finite() {
                return Err(Error::invalid(
                    "subdomain_box",
                    format!("dimension {d} has non-positive extent [{low}, {high}]"),
                ));
            }
        }

        let mut rng = SplitMix64::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-r_m, r_m);
        let mut hidden_weights = Vec::with_capacity(hidden_widths.len());
        let mut hidden_biases = Vec::with_capacity(hidden_widths.len());
        let mut fan_in = input_dim;
        for &width in hidden_widths {
            // Weight matrix first (row-major), then biases: the documented
            // draw order of the coefficient stream.
            let mut w = Array2::zeros((width, fan_in));
            for i in 0..width {
                for j in 0..fan_in {
                    w[[i, j]] = dist.sample(&mut rng);
                }
            }
            let mut b = Array1::zeros(width);
            for i in 0..width {
                b[i] = dist.sample(&mut rng);
            }
            hidden_weights.push(w);
            hidden_biases.push(b);
            fan_in = width;
        }

        let m = *hidden_widths.last().unwrap();
        Ok(LocalNetwork {
            input_dim,
            hidden_widths: hidden_widths.to_vec(),
            hidden_weights,
            hidden_biases,
            output_weights: Array1::zeros(m),
            affine: AffineMap::for_box(subdomain_box),
            r_m,
            bounds: subdomain_box.to_vec(),
        })
    }

    /// Construct from explicit hidden coefficients (useful for testing and
    /// for reproducing externally generated networks). Every entry must lie
    /// in `[-r_m, r_m]`.
    pub fn with_hidden_coefficients(
        input_dim: usize,
        hidden_weights: Vec<Array2<f64>>,
        hidden_biases: Vec<Array1<f64>>,
        r_m: f64,
        subdomain_box: &[[f64; 2]],
    ) -> Result<Self> {
        if hidden_weights.len() != hidden_biases.len() || hidden_weights.is_empty() {
            return Err(Error::invalid("hidden_weights", "layer counts must match and be non-empty"));
        }
        let widths: Vec<usize> = hidden_weights.iter().map(|w| w.nrows()).collect();
        let mut fan_in = input_dim;
        for (l, (w, b)) in hidden_weights.iter().zip(&hidden_biases).enumerate() {
            if w.ncols() != fan_in {
                return Err(Error::invalid(
                    "hidden_weights",
                    format!("layer {l} expects fan-in {fan_in}, got {}", w.ncols()),
                ));
            }
            if b.len() != w.nrows() {
                return Err(Error::invalid(
                    "hidden_biases",
                    format!("layer {l} bias length {} != width {}", b.len(), w.nrows()),
                ));
            }
            if w.iter().chain(b.iter()).any(|&v| v.abs() > r_m) {
                return Err(Error::invalid("r_m", format!("layer {l} has a coefficient outside [-{r_m}, {r_m}]")));
            }
            fan_in = w.nrows();
        }
        let probe = LocalNetwork::new(input_dim, &widths, r_m, 0, subdomain_box)?;
        Ok(LocalNetwork { hidden_weights, hidden_biases, ..probe })
    }

    /// Number of trainable output weights (`M`, the last hidden width).
    pub fn m(&self) -> usize {
        *self.hidden_widths.last().unwrap()
    }

    /// Input dimension (1, 2, or 3).
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Hidden layer widths.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden_widths
    }

    /// Coefficient half-range.
    pub fn r_m(&self) -> f64 {
        self.r_m
    }

    /// The sub-domain box this network lives on.
    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    /// The affine input normalization.
    pub fn affine_map(&self) -> &AffineMap {
        &self.affine
    }

    /// Fixed hidden weight matrices (per layer, `[width x fan_in]`).
    pub fn hidden_weights(&self) -> &[Array2<f64>] {
        &self.hidden_weights
    }

    /// Fixed hidden bias vectors (per layer).
    pub fn hidden_biases(&self) -> &[Array1<f64>] {
        &self.hidden_biases
    }

    /// Current output weights.
    pub fn output_weights(&self) -> ArrayView1<'_, f64> {
        self.output_weights.view()
    }

    /// Replace the output weights. Only these may change after construction.
    pub fn set_output_weights(&mut self, w: ArrayView1<f64>) -> Result<()> {
        if w.len() != self.m() {
            return Err(Error::invalid(
                "output_weights",
                format!("expected length {}, got {}", self.m(), w.len()),
            ));
        }
        self.output_weights.assign(&w);
        Ok(())
    }

    /// Validate that `points` (shape `[n x input_dim]`) lie inside the box up
    /// to the relative clamping tolerance, returning a clamped copy.
    fn clamp_points(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.input_dim {
            return Err(Error::invalid(
                "points",
                format!("expected {} columns, got {}", self.input_dim, points.ncols()),
            ));
        }
        let mut clamped = points.to_owned();
        for (i, mut row) in clamped.rows_mut().into_iter().enumerate() {
            for d in 0..self.input_dim {
                let [low, high] = self.bounds[d];
                let tol = BOX_TOLERANCE * (high - low).max(low.abs()).max(high.abs()).max(1.0);
                let x = row[d];
                if x < low - tol || x > high + tol {
                    return Err(Error::PointOutsideBox { index: i, dim: d, coord: x, low, high });
                }
                row[d] = x.clamp(low, high);
            }
        }
        Ok(clamped)
    }

    /// Forward pass returning only the last-hidden-layer feature values
    /// (`[n_points x M]`). Cheaper than [`LocalNetwork::feature_jet`] when
    /// derivatives are not needed.
    pub fn features(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        let points = self.clamp_points(points)?;
        let n = points.nrows();
        let mut value = Array2::zeros((n, self.input_dim));
        for d in 0..self.input_dim {
            for i in 0..n {
                value[[i, d]] = self.affine.apply(d, points[[i, d]]);
            }
        }
        for (w, b) in self.hidden_weights.iter().zip(&self.hidden_biases) {
            let mut z = value.dot(&w.t());
            z += &b.view().insert_axis(Axis(0));
            z.mapv_inplace(f64::tanh);
            value = z;
        }
        Ok(value)
    }

    /// Compute feature values and their first and pure second derivatives
    /// (physical coordinates) at `points` (shape `[n x input_dim]`).
    pub fn feature_jet(&self, points: ArrayView2<f64>) -> Result<FeatureJet> {
        let points = self.clamp_points(points)?;
        let n = points.nrows();
        let dim = self.input_dim;

        // Seed the jets with the normalized inputs. The derivative of the
        // normalized coordinate with respect to the physical one is the
        // affine scale, which is how the chain-rule factors enter.
        let mut value = Array2::zeros((n, dim));
        let mut grad: Vec<Array2<f64>> = (0..dim).map(|_| Array2::zeros((n, dim))).collect();
        let second: Vec<Array2<f64>> = (0..dim).map(|_| Array2::zeros((n, dim))).collect();
        let mut second = second;
        for d in 0..dim {
            for i in 0..n {
                value[[i, d]] = self.affine.apply(d, points[[i, d]]);
                grad[d][[i, d]] = self.affine.scale[d];
            }
        }

        for (w, b) in self.hidden_weights.iter().zip(&self.hidden_biases) {
            let wt = w.t();
            // Pre-activation jets: z = W a + b is linear, so each derivative
            // block just multiplies by W.
            let mut z = value.dot(&wt);
            z += &b.view().insert_axis(Axis(0));
            let zg: Vec<Array2<f64>> = grad.iter().map(|g| g.dot(&wt)).collect();
            let zs: Vec<Array2<f64>> = second.iter().map(|s| s.dot(&wt)).collect();

            // tanh jets: t = tanh(z), t' = u z', t'' = u z'' - 2 t u (z')^2,
            // with u = 1 - tanh(z)^2.
            let t = z.mapv(f64::tanh);
            let u = t.mapv(|v| 1.0 - v * v);
            for d in 0..dim {
                let mut g_new = &u * &zg[d];
                let mut s_new = &u * &zs[d];
                s_new -= &(2.0 * &t * &u * &zg[d] * &zg[d]);
                std::mem::swap(&mut grad[d], &mut g_new);
                std::mem::swap(&mut second[d], &mut s_new);
            }
            value = t;
        }

        Ok(FeatureJet { values: value, grad, second })
    }

    /// Evaluate the network output `u(x) = V(x) . output_weights` at a batch
    /// of points. Exactly linear in the output weights.
    pub fn evaluate(&self, points: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.features(points)?.dot(&self.output_weights))
    }
}
