//! Rectangular domain partitioning and collocation point sets.
//!
//! A [`DomainPartition`] splits a box `[a1,b1] x ... x [ad,bd]` (spatial
//! dimensions first, time last when present) into a uniform grid of
//! sub-domains. Sub-domains are numbered with the last dimension fastest:
//! `e = (m * N_y + n) * N_t + l` for dimension order `(x, y, t)`.
//!
//! A [`CollocationSet`] holds, per sub-domain, a tensor-product (or random)
//! point cloud plus index groups identifying which points lie on each face.
//! Faces drive boundary, initial, and interface continuity rows downstream.
//!
//! Point coordinates on shared faces are bit-identical between the two
//! neighboring sub-domains: 1D nodes are mapped from the reference interval
//! by the endpoint-exact blend `x = (low*(1-r) + high*(1+r))/2`, and both
//! neighbors read the shared coordinate from the same partition boundary
//! value.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use std::collections::BTreeMap;

use crate::{Error, Result};

/// How collocation points are placed inside each sub-domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// Evenly spaced tensor grid including both endpoints per direction.
    Uniform,
    /// Gauss-Lobatto-Legendre tensor grid (endpoints included).
    GaussLobatto,
    /// Random interior points plus random tensor-count face points.
    Random,
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Distribution::Uniform),
            "gauss_lobatto" | "gauss-lobatto" | "gll" => Ok(Distribution::GaussLobatto),
            "random" => Ok(Distribution::Random),
            other => Err(Error::invalid(
                "distribution",
                format!("unknown distribution '{other}' (expected uniform, gauss_lobatto, or random)"),
            )),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::Uniform => write!(f, "uniform"),
            Distribution::GaussLobatto => write!(f, "gauss_lobatto"),
            Distribution::Random => write!(f, "random"),
        }
    }
}

/// A rectangular domain split into a uniform grid of sub-domains.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPartition {
    bounds: Vec<[f64; 2]>,
    counts: Vec<usize>,
    /// Per dimension, the `counts[d] + 1` strictly increasing sub-domain
    /// boundary coordinates, endpoints equal to `bounds[d]`.
    boundary_coords: Vec<Vec<f64>>,
}

/// Split `bounds` into `counts[d]` equal sub-intervals per dimension.
pub fn partition(bounds: &[[f64; 2]], counts: &[usize]) -> Result<DomainPartition> {
    if bounds.is_empty() || bounds.len() > 3 {
        return Err(Error::invalid("bounds", format!("expected 1-3 dimensions, got {}", bounds.len())));
    }
    if counts.len() != bounds.len() {
        return Err(Error::invalid(
            "counts",
            format!("expected {} entries, got {}", bounds.len(), counts.len()),
        ));
    }
    let mut boundary_coords = Vec::with_capacity(bounds.len());
    for (d, (&[low, high], &n)) in bounds.iter().zip(counts).enumerate() {
        if n == 0 {
            return Err(Error::invalid("counts", format!("dimension {d} has zero sub-domains")));
        }
        if !(high > low) || !low.is_finite() || !high.is_finite() {
            return Err(Error::invalid("bounds", format!("dimension {d} has empty extent [{low}, {high}]")));
        }
        // Uniform split with exact endpoints.
        let mut coords: Vec<f64> =
            (0..=n).map(|j| (low * (n - j) as f64 + high * j as f64) / n as f64).collect();
        coords[0] = low;
        coords[n] = high;
        boundary_coords.push(coords);
    }
    Ok(DomainPartition { bounds: bounds.to_vec(), counts: counts.to_vec(), boundary_coords })
}

impl DomainPartition {
    /// Number of dimensions (1-3; time counts as a dimension).
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    /// Overall domain box.
    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    /// Sub-domain counts per dimension.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Per-dimension sub-domain boundary coordinates.
    pub fn boundary_coords(&self) -> &[Vec<f64>] {
        &self.boundary_coords
    }

    /// Total number of sub-domains.
    pub fn n_subdomains(&self) -> usize {
        self.counts.iter().product()
    }

    /// Linear sub-domain index with the last dimension fastest.
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims());
        let mut e = 0;
        for (d, &m) in multi.iter().enumerate() {
            debug_assert!(m < self.counts[d]);
            e = e * self.counts[d] + m;
        }
        e
    }

    /// Inverse of [`DomainPartition::linear_index`].
    pub fn multi_index(&self, mut e: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            multi[d] = e % self.counts[d];
            e /= self.counts[d];
        }
        multi
    }

    /// The box of sub-domain `e`.
    pub fn subdomain_box(&self, e: usize) -> Vec<[f64; 2]> {
        let multi = self.multi_index(e);
        multi
            .iter()
            .enumerate()
            .map(|(d, &m)| [self.boundary_coords[d][m], self.boundary_coords[d][m + 1]])
            .collect()
    }

    /// Find the sub-domain owning `point`. Points on an internal boundary
    /// belong to the lower-indexed side; domain endpoints clamp inward.
    pub fn locate(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dims() {
            return Err(Error::invalid(
                "point",
                format!("expected {} coordinates, got {}", self.dims(), point.len()),
            ));
        }
        let mut multi = Vec::with_capacity(self.dims());
        for (d, &x) in point.iter().enumerate() {
            let [low, high] = self.bounds[d];
            let tol = 1e-12 * (high - low).max(low.abs()).max(high.abs()).max(1.0);
            if x < low - tol || x > high + tol {
                return Err(Error::PointOutsideBox { index: 0, dim: d, coord: x, low, high });
            }
            // Count boundary coordinates strictly below x; x exactly on a
            // boundary then lands in the lower cell.
            let below = self.boundary_coords[d].iter().filter(|&&c| c < x).count();
            multi.push(below.saturating_sub(1).min(self.counts[d] - 1));
        }
        Ok(self.linear_index(&multi))
    }
}

/// Per-sub-domain collocation points with face index groups.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    distribution: Distribution,
    q_per_direction: Vec<usize>,
    /// Per sub-domain, `[n_points x dims]` coordinates.
    per_subdomain: Vec<Array2<f64>>,
    /// Per sub-domain, per face `2*d + side`, indices of points on that face
    /// (side 0 = low, side 1 = high), in matching order across an interface.
    faces: Vec<Vec<Vec<usize>>>,
}

impl CollocationSet {
    /// The placement rule used.
    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    /// Points per direction (`Q_x`, `Q_y`, `Q_t`).
    pub fn q_per_direction(&self) -> &[usize] {
        &self.q_per_direction
    }

    /// Number of sub-domains covered.
    pub fn n_subdomains(&self) -> usize {
        self.per_subdomain.len()
    }

    /// Collocation points of sub-domain `e`, shape `[n_points x dims]`.
    pub fn points(&self, e: usize) -> ArrayView2<'_, f64> {
        self.per_subdomain[e].view()
    }

    /// Number of points in sub-domain `e`.
    pub fn n_points(&self, e: usize) -> usize {
        self.per_subdomain[e].nrows()
    }

    /// Indices of the points of sub-domain `e` lying on face `(dim, side)`;
    /// side 0 is the low face, side 1 the high face.
    pub fn face(&self, e: usize, dim: usize, side: usize) -> &[usize] {
        &self.faces[e][2 * dim + side]
    }
}

/// Maximum supported Gauss-Lobatto-Legendre points per direction; the node
/// computation is not validated beyond this.
const MAX_GLL: usize = 100;

/// Reference Gauss-Lobatto-Legendre nodes on `[-1, 1]`: the endpoints plus
/// the roots of `P'_{q-1}`, computed by Newton iteration from Chebyshev
/// initial guesses.
pub fn gauss_lobatto_nodes(q: usize) -> Result<Vec<f64>> {
    if q < 2 {
        return Err(Error::invalid("q_per_direction", format!("Gauss-Lobatto needs q >= 2, got {q}")));
    }
    if q > MAX_GLL {
        return Err(Error::invalid(
            "q_per_direction",
            format!("Gauss-Lobatto supports at most {MAX_GLL} points per direction, got {q}"),
        ));
    }
    let n = q - 1; // Legendre degree
    let mut nodes = vec![0.0; q];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for i in 1..n {
        // Chebyshev-Lobatto initial guess, then Newton on P'_n using the
        // Legendre ODE for P''_n.
        let mut x = -(std::f64::consts::PI * i as f64 / n as f64).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let ddp = (2.0 * x * dp - (n * (n + 1)) as f64 * p) / (1.0 - x * x);
            let step = dp / ddp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
    }
    // Enforce exact symmetry (the analytic node set is symmetric).
    for i in 0..q / 2 {
        let s = 0.5 * (nodes[i] - nodes[n - i]);
        nodes[i] = s;
        nodes[n - i] = -s;
    }
    if q % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(nodes)
}

/// Legendre `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let p_next = ((2 * k + 1) as f64 * x * p - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p;
        p = p_next;
    }
    (p, p_prev)
}

/// Map reference node `r` in `[-1,1]` onto `[low, high]`, endpoint-exact.
#[inline]
fn blend(low: f64, high: f64, r: f64) -> f64 {
    (low * (1.0 - r) + high * (1.0 + r)) / 2.0
}

/// Build collocation points for every sub-domain of `part`.
///
/// `q_per_direction` gives the tensor counts per dimension. For the random
/// distribution, each face receives its tensor-product face count of points
/// (shared faces receive the same coordinates on both sides) and the
/// remainder of the `prod(q_d)` budget is drawn in the interior; `seed`
/// controls those draws (ignored by the deterministic distributions).
pub fn collocation(
    part: &DomainPartition,
    q_per_direction: &[usize],
    distribution: Distribution,
    seed: u64,
) -> Result<CollocationSet> {
    let dims = part.dims();
    if q_per_direction.len() != dims {
        return Err(Error::invalid(
            "q_per_direction",
            format!("expected {} entries, got {}", dims, q_per_direction.len()),
        ));
    }
    if let Some(&q) = q_per_direction.iter().find(|&&q| q < 2) {
        return Err(Error::invalid("q_per_direction", format!("need at least 2 points per direction, got {q}")));
    }

    match distribution {
        Distribution::Uniform | Distribution::GaussLobatto => {
            tensor_collocation(part, q_per_direction, distribution)
        }
        Distribution::Random => random_collocation(part, q_per_direction, seed),
    }
}

fn tensor_collocation(
    part: &DomainPartition,
    q: &[usize],
    distribution: Distribution,
) -> Result<CollocationSet> {
    let dims = part.dims();
    // Reference nodes per dimension.
    let mut reference: Vec<Vec<f64>> = Vec::with_capacity(dims);
    for &qd in q {
        let nodes = match distribution {
            Distribution::Uniform => {
                (0..qd).map(|i| -1.0 + 2.0 * i as f64 / (qd - 1) as f64).collect()
            }
            Distribution::GaussLobatto => gauss_lobatto_nodes(qd)?,
            Distribution::Random => unreachable!(),
        };
        reference.push(nodes);
    }

    let total: usize = q.iter().product();
    let mut per_subdomain = Vec::with_capacity(part.n_subdomains());
    let mut faces = Vec::with_capacity(part.n_subdomains());
    for e in 0..part.n_subdomains() {
        let bbox = part.subdomain_box(e);
        // 1D node sets of this sub-domain (endpoint-exact).
        let nodes: Vec<Vec<f64>> = (0..dims)
            .map(|d| reference[d].iter().map(|&r| blend(bbox[d][0], bbox[d][1], r)).collect())
            .collect();

        let mut pts = Array2::zeros((total, dims));
        let mut face_groups = vec![Vec::new(); 2 * dims];
        let mut idx = vec![0usize; dims];
        for p in 0..total {
            for d in 0..dims {
                pts[[p, d]] = nodes[d][idx[d]];
                if idx[d] == 0 {
                    face_groups[2 * d].push(p);
                }
                if idx[d] == q[d] - 1 {
                    face_groups[2 * d + 1].push(p);
                }
            }
            // Advance the multi-index, last dimension fastest.
            for d in (0..dims).rev() {
                idx[d] += 1;
                if idx[d] < q[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        per_subdomain.push(pts);
        faces.push(face_groups);
    }
    Ok(CollocationSet {
        distribution,
        q_per_direction: q.to_vec(),
        per_subdomain,
        faces,
    })
}

/// Deterministically mix a list of identifiers into an RNG seed.
fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut key = seed ^ 0x6A09_E667_F3BC_C909;
    for &p in parts {
        key = key.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_add(1));
    }
    key
}

fn random_collocation(part: &DomainPartition, q: &[usize], seed: u64) -> Result<CollocationSet> {
    let dims = part.dims();
    let total: usize = q.iter().product();
    // Tensor-product face counts (points per face in dimension d).
    let face_count: Vec<usize> =
        (0..dims).map(|d| (0..dims).filter(|&dd| dd != d).map(|dd| q[dd]).product()).collect();
    let face_sum: usize = face_count.iter().map(|c| 2 * c).sum();
    if total < face_sum {
        return Err(Error::invalid(
            "q_per_direction",
            format!(
                "random distribution needs prod(q) >= {face_sum} to cover all faces, got {total}"
            ),
        ));
    }

    // Shared faces are generated once, keyed by their hyperplane identity, so
    // both neighbors receive bit-identical coordinates in identical order.
    let mut face_cache: BTreeMap<Vec<u64>, Vec<Vec<f64>>> = BTreeMap::new();
    let mut per_subdomain = Vec::with_capacity(part.n_subdomains());
    let mut faces = Vec::with_capacity(part.n_subdomains());

    for e in 0..part.n_subdomains() {
        let multi = part.multi_index(e);
        let bbox = part.subdomain_box(e);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut face_groups = vec![Vec::new(); 2 * dims];

        for d in 0..dims {
            for side in 0..2 {
                // Hyperplane identity: dimension, boundary-coordinate index,
                // and the cell indices in the other dimensions.
                let mut key: Vec<u64> = vec![d as u64, (multi[d] + side) as u64];
                for dd in 0..dims {
                    if dd != d {
                        key.push(multi[dd] as u64);
                    }
                }
                let tangential = face_cache.entry(key.clone()).or_insert_with(|| {
                    let mut rng = SplitMix64::seed_from_u64(mix_seed(seed, &key));
                    (0..face_count[d])
                        .map(|_| {
                            (0..dims)
                                .filter(|&dd| dd != d)
                                .map(|dd| rng.gen_range(bbox[dd][0]..bbox[dd][1]))
                                .collect()
                        })
                        .collect()
                });
                let coord = part.boundary_coords()[d][multi[d] + side];
                for tang in tangential.iter() {
                    let mut point = vec![0.0; dims];
                    point[d] = coord;
                    let mut it = tang.iter();
                    for dd in 0..dims {
                        if dd != d {
                            point[dd] = *it.next().unwrap();
                        }
                    }
                    face_groups[2 * d + side].push(rows.len());
                    rows.push(point);
                }
            }
        }

        // Interior points from this cell's own stream.
        let mut key: Vec<u64> = vec![u64::MAX];
        key.extend(multi.iter().map(|&m| m as u64));
        let mut rng = SplitMix64::seed_from_u64(mix_seed(seed, &key));
        for _ in 0..total - face_sum {
            rows.push((0..dims).map(|d| rng.gen_range(bbox[d][0]..bbox[d][1])).collect());
        }

        let mut pts = Array2::zeros((rows.len(), dims));
        for (i, row) in rows.iter().enumerate() {
            for d in 0..dims {
                pts[[i, d]] = row[d];
            }
        }
        per_subdomain.push(pts);
        faces.push(face_groups);
    }

    Ok(CollocationSet {
        distribution: Distribution::Random,
        q_per_direction: q.to_vec(),
        per_subdomain,
        faces,
    })
}
