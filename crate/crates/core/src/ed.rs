//! Exact ground states of small chains, used as the reference oracle.
//!
//! The Hamiltonian is applied matrix-free on the `2^N` product basis. Basis
//! index `b` stores site `mu` in bit `N - 1 - mu` (site 0 most significant),
//! bit value 0 meaning `σz = +1`; this is the same ordering a row-major
//! contraction of an MPS or TTN produces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TermList1D;
use crate::ops::Axis;
use crate::spacefill::ChainIndex;
use crate::tensor::{lanczos_smallest, LanczosOptions};

pub const MAX_ED_SITES: usize = 20;
const ED_SEED: u64 = 0xED0_5EED;

#[derive(Clone, Debug)]
pub struct EdGroundState {
    pub num_sites: usize,
    pub energy: f64,
    pub energy_density: f64,
    pub amplitudes: Vec<f64>,
    pub residual: f64,
}

/// CLI-facing summary of an exact run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdReport {
    pub n: usize,
    pub lambda: f64,
    pub boundary: crate::model::Boundary,
    pub mapping: crate::spacefill::CurveKind,
    pub energy: f64,
    pub energy_density: f64,
    pub residual: f64,
}

#[inline]
fn site_bit(num_sites: usize, site: usize) -> usize {
    1 << (num_sites - 1 - site)
}

/// Matrix-free `y = H x`.
pub struct SparseHamiltonian {
    num_sites: usize,
    lambda: f64,
    /// (flip mask, weight) per pair term.
    flips: Vec<(usize, f64)>,
}

impl SparseHamiltonian {
    pub fn new(terms: &TermList1D) -> Result<Self> {
        let n = terms.num_sites();
        if n > MAX_ED_SITES {
            return Err(Error::InvalidSize(format!(
                "exact diagonalization supports at most {MAX_ED_SITES} sites, got {n}"
            )));
        }
        let flips = terms
            .pairs()
            .iter()
            .map(|p| (site_bit(n, p.mu) | site_bit(n, p.nu), p.weight))
            .collect();
        Ok(Self {
            num_sites: n,
            lambda: terms.lambda(),
            flips,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.num_sites
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.num_sites as f64;
        for (b, yb) in y.iter_mut().enumerate() {
            let ups_minus_downs = n - 2.0 * b.count_ones() as f64;
            let mut acc = self.lambda * ups_minus_downs * x[b];
            for &(mask, w) in &self.flips {
                acc += w * x[b ^ mask];
            }
            *yb = acc;
        }
    }

    /// Dense row-major matrix; intended for small test systems.
    pub fn to_dense(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut m = vec![0.0; dim * dim];
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for c in 0..dim {
            e[c] = 1.0;
            self.apply(&e, &mut col);
            e[c] = 0.0;
            for r in 0..dim {
                m[r * dim + c] = col[r];
            }
        }
        m
    }
}

/// Ground state by Lanczos from a fixed-seed random start vector.
///
/// The global spin flip `Π σz` commutes with the Hamiltonian. Each parity
/// sector is solved on its own and the lower one is returned, so the result
/// is a symmetric eigenstate even when the two sectors are nearly degenerate.
pub fn ed_ground_state(terms: &TermList1D, tol: f64) -> Result<EdGroundState> {
    let h = SparseHamiltonian::new(terms)?;
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ED_SEED);
    let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let opts = LanczosOptions {
        max_iter: 5000,
        krylov_dim: if dim <= 1 << 16 { 80 } else { 30 },
        tol,
        seed: ED_SEED,
        ..Default::default()
    };
    let odd = |b: usize| b.count_ones() % 2 == 1;
    let mut best: Option<crate::tensor::Eigenpair> = None;
    for sector in [false, true] {
        let masked: Vec<f64> =
            start.iter().enumerate().map(|(b, &v)| if odd(b) == sector { v } else { 0.0 }).collect();
        // Projecting the output keeps restarts and rounding inside the sector.
        let apply = |x: &[f64], y: &mut [f64]| {
            h.apply(x, y);
            y.iter_mut().enumerate().filter(|(b, _)| odd(*b) != sector).for_each(|(_, v)| *v = 0.0);
        };
        let pair = lanczos_smallest(apply, &masked, &opts)?;
        if best.as_ref().map_or(true, |b| pair.value < b.value) {
            best = Some(pair);
        }
    }
    let pair = best.expect("two sectors solved");
    Ok(EdGroundState {
        num_sites: terms.num_sites(),
        energy: pair.value,
        energy_density: pair.value / terms.num_sites() as f64,
        amplitudes: pair.vector,
        residual: pair.residual,
    })
}

/// `<ψ|σ^axis_site|ψ>`.
pub fn ed_expectation(state: &EdGroundState, site: ChainIndex, axis: Axis) -> f64 {
    let bit = site_bit(state.num_sites, site.0);
    let a = &state.amplitudes;
    match axis {
        Axis::Z => a
            .iter()
            .enumerate()
            .map(|(b, v)| if b & bit == 0 { v * v } else { -v * v })
            .sum(),
        Axis::X => a.iter().enumerate().map(|(b, v)| v * a[b ^ bit]).sum(),
    }
}

impl EdGroundState {
    /// `<ψ|(Σ_i w_i σx_i)²|ψ>`.
    pub fn collective_x_second_moment(&self, weights: &[f64]) -> f64 {
        let n = self.num_sites;
        let a = &self.amplitudes;
        (0..a.len())
            .map(|b| {
                let v: f64 = (0..n).map(|i| weights[i] * a[b ^ site_bit(n, i)]).sum();
                v * v
            })
            .sum()
    }

    pub fn to_report(
        &self,
        n: usize,
        lambda: f64,
        boundary: crate::model::Boundary,
        mapping: crate::spacefill::CurveKind,
    ) -> EdReport {
        EdReport {
            n,
            lambda,
            boundary,
            mapping,
            energy: self.energy,
            energy_density: self.energy_density,
            residual: self.residual,
        }
    }
}
