//! Shared fixtures for the benchmark targets: a reference 1-D Helmholtz
//! setup at the accuracy-test resolution, plus the pieces the individual
//! benchmarks exercise in isolation.

use locelm::assembly::ProblemSpec;
use locelm::mesh::{collocation, partition, CollocationSet, Distribution, DomainPartition};
use locelm::network::LocalNetwork;
use locelm::problems;
use ndarray::Array2;

/// Sub-domain count, collocation points per direction, and hidden width of
/// the reference fixture.
pub const N_E: usize = 4;
pub const Q: usize = 100;
pub const M: usize = 200;

/// Reference 1-D Helmholtz fixture: partition, collocation set, and one
/// random-feature network per sub-domain (seeded like a solver run).
pub fn helmholtz_fixture() -> (ProblemSpec, DomainPartition, CollocationSet, Vec<LocalNetwork>) {
    let problem = problems::helmholtz_1d();
    let part = partition(&problem.spatial_bounds, &[N_E]).expect("fixture partition");
    let colloc = collocation(&part, &[Q], Distribution::Uniform, 0).expect("fixture collocation");
    let networks = (0..part.n_subdomains())
        .map(|e| {
            LocalNetwork::new(part.dims(), &[M], 3.0, e as u64, &part.subdomain_box(e))
                .expect("fixture network")
        })
        .collect();
    (problem, part, colloc, networks)
}

/// Batch of 1-D evaluation points inside the first sub-domain of the
/// reference fixture.
pub fn point_batch(n: usize) -> Array2<f64> {
    let [lo, hi] = problems::helmholtz_1d().spatial_bounds[0];
    let width = (hi - lo) / N_E as f64;
    Array2::from_shape_fn((n, 1), |(i, _)| lo + width * (i as f64 + 0.5) / n as f64)
}
