//! Ground states of the 2D transverse-field Ising model on 1D tensor networks.
//!
//! The lattice is flattened onto a chain by a space-filling curve
//! ([`spacefill`]), turning nearest-neighbour bonds into long-range chain
//! couplings ([`model`]). The chain Hamiltonian is then solved with a
//! two-site DMRG on matrix product states ([`mps`]) or a variational binary
//! tree tensor network ([`ttn`]), and checked against exact diagonalization
//! ([`ed`]) wherever that is affordable.

pub mod ed;
pub mod error;
pub mod experiment;
pub mod model;
pub mod mps;
pub mod observables;
pub mod ops;
pub mod spacefill;
pub mod tensor;
pub mod trace;
pub mod ttn;

pub use ed::{ed_ground_state, EdGroundState};
pub use error::{Error, Result};
pub use model::{map_to_chain, Boundary, Geometry, IsingModel2D, PairTerm, TermList1D};
pub use mps::{dmrg_ground_state, DmrgConfig, MpsState};
pub use ops::Axis;
pub use spacefill::{chain_distance, tree_distance, ChainIndex, CurveKind, LatticeCoord, SiteMapping};
pub use trace::ConvergenceTrace;
pub use ttn::{ttn_ground_state, TtnConfig, TtnState};

/// Float formatting used by every text output: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
