//! Shared fixtures for the criterion benchmarks.

use hilbertnet::tensor::DenseTensor;
use hilbertnet::{map_to_chain, Boundary, CurveKind, IsingModel2D, SiteMapping, TermList1D};

/// Open-boundary chain Hamiltonian of an `n x n` lattice.
pub fn chain_terms(n: usize, lambda: f64, kind: CurveKind) -> TermList1D {
    let model = IsingModel2D::new(n, lambda, Boundary::Open).expect("valid lattice");
    map_to_chain(&model, &SiteMapping::new(kind, n).expect("valid mapping")).expect("mapped")
}

/// Deterministic dense tensor with entries in [-1, 1].
pub fn filled_tensor(shape: &[usize]) -> DenseTensor {
    let len = shape.iter().product();
    let data = (0..len).map(|i| (i as f64 * 0.618_033_988_7).sin()).collect();
    DenseTensor::from_vec(shape, data).expect("shape matches data")
}

/// Deterministic vector with entries in [-1, 1].
pub fn filled_vector(len: usize) -> Vec<f64> {
    (0..len).map(|i| (i as f64 * 0.414_213_562_3).cos()).collect()
}
