//! Matrix product states in mixed-canonical form and a two-site DMRG solver.
//!
//! Site tensors have shape `(left bond, 2, right bond)`. Tensors left of the
//! orthogonality center are left-isometric, tensors right of it
//! right-isometric.

mod dmrg;
mod env;
mod mpo;

pub use dmrg::{dmrg_ground_state, dmrg_ground_state_from, DmrgConfig, DmrgOutcome, InitialState, MpsCheckpoint};
pub use mpo::{build_mpo, MpoOperator};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{Axis, Op2, IDENTITY};
use crate::spacefill::ChainIndex;
use crate::tensor::{gemm, qr, DenseTensor, MatRef};
use env::{extend_left, extend_right, Env};
use mpo::MpoEntry;

const MAX_STATEVECTOR_SITES: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpsState {
    tensors: Vec<DenseTensor>,
    center: usize,
}

pub(crate) fn transpose(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

fn single_op(op: Op2) -> [MpoEntry; 1] {
    [MpoEntry { left: 0, right: 0, op }]
}

impl MpsState {
    /// Validates bond compatibility; `center` is trusted, not checked.
    pub fn from_tensors(tensors: Vec<DenseTensor>, center: usize) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidSize("MPS needs at least one site".into()));
        }
        if center >= tensors.len() {
            return Err(Error::IndexOutOfRange { index: center, len: tensors.len() });
        }
        for (i, t) in tensors.iter().enumerate() {
            let s = t.shape();
            if s.len() != 3 || s[1] != 2 || s[0] == 0 || s[2] == 0 {
                return Err(Error::DimensionMismatch(format!("site {i} has shape {s:?}")));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[2] != 1 {
            return Err(Error::DimensionMismatch("outer bonds must have dimension 1".into()));
        }
        for i in 1..tensors.len() {
            if tensors[i - 1].shape()[2] != tensors[i].shape()[0] {
                return Err(Error::DimensionMismatch(format!("bond between sites {} and {i}", i - 1)));
            }
        }
        Ok(Self { tensors, center })
    }

    /// Product state from one (unnormalized) local vector per site.
    pub fn product(local: &[[f64; 2]]) -> Result<Self> {
        let tensors = local
            .iter()
            .map(|v| {
                let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
                if n == 0.0 || !n.is_finite() {
                    return Err(Error::InvalidParameter("local vector must be nonzero".into()));
                }
                DenseTensor::from_vec(&[1, 2, 1], vec![v[0] / n, v[1] / n])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_tensors(tensors, 0)
    }

    /// All spins along `-z`.
    pub fn down_product(num_sites: usize) -> Result<Self> {
        Self::product(&vec![[0.0, 1.0]; num_sites])
    }

    /// Random normalized state with bond dimensions capped at `bond`.
    pub fn random(num_sites: usize, bond: usize, seed: u64) -> Result<Self> {
        if num_sites == 0 || bond == 0 {
            return Err(Error::InvalidSize("need at least one site and bond >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cap = |cut: usize| -> usize {
            // exact bond dimension bound on a cut with `cut` sites to the left
            let side = cut.min(num_sites - cut).min(62) as u32;
            bond.min(1usize << side)
        };
        let tensors = (0..num_sites)
            .map(|i| DenseTensor::random(&[cap(i), 2, cap(i + 1)], &mut rng))
            .collect();
        let mut s = Self::from_tensors(tensors, 0)?;
        s.canonicalize()?;
        Ok(s)
    }

    pub fn num_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// Interior bond dimensions, `num_sites - 1` entries.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn dims(&self, site: usize) -> (usize, usize) {
        let s = self.tensors[site].shape();
        (s[0], s[2])
    }

    /// Brings the state into mixed-canonical form with center 0 and unit norm.
    pub fn canonicalize(&mut self) -> Result<()> {
        let n = self.num_sites();
        for i in 0..n - 1 {
            self.shift_right(i)?;
        }
        for i in (1..n).rev() {
            self.shift_left(i)?;
        }
        self.center = 0;
        let norm = self.tensors[0].norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("state has zero or non-finite norm".into()));
        }
        self.tensors[0].scale(1.0 / norm);
        Ok(())
    }

    /// QR at `site`, pushing the remainder into `site + 1`.
    fn shift_right(&mut self, site: usize) -> Result<()> {
        let (dl, dr) = self.dims(site);
        let (q, r, k) = qr(self.tensors[site].data(), 2 * dl, dr)?;
        let (_, dr2) = self.dims(site + 1);
        let mut next = vec![0.0; k * 2 * dr2];
        gemm(
            1.0,
            MatRef::new(&r, k, dr),
            MatRef::new(self.tensors[site + 1].data(), dr, 2 * dr2),
            0.0,
            &mut next,
        );
        self.tensors[site] = DenseTensor::from_vec(&[dl, 2, k], q)?;
        self.tensors[site + 1] = DenseTensor::from_vec(&[k, 2, dr2], next)?;
        Ok(())
    }

    /// LQ at `site`, pushing the remainder into `site - 1`.
    fn shift_left(&mut self, site: usize) -> Result<()> {
        let (dl, dr) = self.dims(site);
        let t = transpose(self.tensors[site].data(), dl, 2 * dr);
        let (q, r, k) = qr(&t, 2 * dr, dl)?;
        let (dl0, _) = self.dims(site - 1);
        let mut prev = vec![0.0; dl0 * 2 * k];
        gemm(
            1.0,
            MatRef::new(self.tensors[site - 1].data(), 2 * dl0, dl),
            MatRef::new(&r, k, dl).t(),
            0.0,
            &mut prev,
        );
        self.tensors[site] = DenseTensor::from_vec(&[k, 2, dr], transpose(&q, 2 * dr, k))?;
        self.tensors[site - 1] = DenseTensor::from_vec(&[dl0, 2, k], prev)?;
        Ok(())
    }

    /// Moves the orthogonality center to `site` by QR steps.
    pub fn move_center(&mut self, site: usize) -> Result<()> {
        if site >= self.num_sites() {
            return Err(Error::IndexOutOfRange { index: site, len: self.num_sites() });
        }
        while self.center < site {
            self.shift_right(self.center)?;
            self.center += 1;
        }
        while self.center > site {
            self.shift_left(self.center)?;
            self.center -= 1;
        }
        Ok(())
    }

    /// `<ψ|ψ>` by full contraction (does not rely on canonical form).
    pub fn norm_sq(&self) -> f64 {
        let mut env = Env::trivial();
        for (i, t) in self.tensors.iter().enumerate() {
            let (dl, dr) = self.dims(i);
            env = extend_left(&env, t.data(), dl, dr, &single_op(IDENTITY), 1);
        }
        env.data[0]
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_statevector(&self) -> Result<Vec<f64>> {
        let n = self.num_sites();
        if n > MAX_STATEVECTOR_SITES {
            return Err(Error::InvalidSize(format!("statevector limited to {MAX_STATEVECTOR_SITES} sites")));
        }
        let mut v = vec![1.0];
        let mut rows = 1usize;
        for (i, t) in self.tensors.iter().enumerate() {
            let (dl, dr) = self.dims(i);
            let mut next = vec![0.0; rows * 2 * dr];
            gemm(1.0, MatRef::new(&v, rows, dl), MatRef::new(t.data(), dl, 2 * dr), 0.0, &mut next);
            v = next;
            rows *= 2;
        }
        Ok(v)
    }

    /// `<ψ|op_site|ψ> / <ψ|ψ>` using the canonical form.
    pub fn local_expectation(&self, site: usize, op: Op2) -> f64 {
        let c = self.center;
        let norm_sq = self.tensors[c].norm().powi(2);
        let value = if site <= c {
            let mut env = Env::identity(self.dims(site).0);
            for j in site..=c {
                let (dl, dr) = self.dims(j);
                let o = if j == site { op } else { IDENTITY };
                env = extend_left(&env, self.tensors[j].data(), dl, dr, &single_op(o), 1);
            }
            env.trace()
        } else {
            let mut env = Env::identity(self.dims(site).1);
            for j in (c..=site).rev() {
                let (dl, dr) = self.dims(j);
                let o = if j == site { op } else { IDENTITY };
                env = extend_right(&env, self.tensors[j].data(), dl, dr, &single_op(o), 1);
            }
            env.trace()
        };
        value / norm_sq
    }

    /// `<ψ|O|ψ> / <ψ|ψ>` by full left-to-right contraction.
    pub fn expectation(&self, op: &MpoOperator) -> Result<f64> {
        if op.num_sites() != self.num_sites() {
            return Err(Error::SizeMismatch(format!(
                "operator on {} sites, state on {}",
                op.num_sites(),
                self.num_sites()
            )));
        }
        let mut env = Env::trivial();
        for (i, t) in self.tensors.iter().enumerate() {
            let (dl, dr) = self.dims(i);
            env = extend_left(&env, t.data(), dl, dr, op.entries(i), op.widths(i).1);
        }
        Ok(env.data[0] / self.norm_sq())
    }

    /// `<ψ|(Σ_i w_i σx_i)²|ψ> / <ψ|ψ>`.
    pub fn collective_x_second_moment(&self, weights: &[f64]) -> Result<f64> {
        self.expectation(&MpoOperator::collective_x_square(weights)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let raw: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_tensors(raw.tensors, raw.center)
    }
}

/// `<ψ|H|ψ>` by full contraction, independent of any sweep bookkeeping.
pub fn mps_energy(state: &MpsState, mpo: &MpoOperator) -> Result<f64> {
    state.expectation(mpo)
}

pub fn mps_local_expectation(state: &MpsState, site: ChainIndex, axis: Axis) -> Result<f64> {
    if site.0 >= state.num_sites() {
        return Err(Error::IndexOutOfRange { index: site.0, len: state.num_sites() });
    }
    Ok(state.local_expectation(site.0, axis.op()))
}
