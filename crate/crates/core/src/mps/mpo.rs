//! Matrix product operators built as finite-state automata.
//!
//! For the Ising chain the automaton has an *initial* state (only identities
//! placed so far), a *final* state (one complete term placed) and one carrier
//! state for every pair term open across the bond: `w σx` is injected at `mu`,
//! carried by identities, and closed by `σx` at `nu`. Field terms jump from
//! initial to final in a single site.

use crate::error::{Error, Result};
use crate::model::{open_terms_per_cut, TermList1D};
use crate::ops::{self, Op2, IDENTITY, SIGMA_X, SIGMA_Z};
use crate::tensor::DenseTensor;

/// Nonzero 2x2 block `W[left][right]` of a site operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct MpoEntry {
    pub left: usize,
    pub right: usize,
    pub op: Op2,
}

#[derive(Clone, Debug)]
pub struct MpoOperator {
    num_sites: usize,
    /// `(left aux, right aux, phys out, phys in)` per site.
    site_operators: Vec<DenseTensor>,
    /// Automaton width on each interior bond (`num_sites - 1` entries).
    aux_dims: Vec<usize>,
    entries: Vec<Vec<MpoEntry>>,
}

impl MpoOperator {
    /// Assembles an operator from its nonzero blocks. `aux_dims` lists the
    /// interior bond widths; the two outer bonds have width 1.
    pub(crate) fn from_entries(aux_dims: Vec<usize>, entries: Vec<Vec<MpoEntry>>) -> Result<Self> {
        let num_sites = entries.len();
        if num_sites == 0 || aux_dims.len() + 1 != num_sites {
            return Err(Error::SizeMismatch("aux dims do not match site count".into()));
        }
        let width = |bond: isize| -> usize {
            if bond < 0 || bond as usize >= num_sites - 1 {
                1
            } else {
                aux_dims[bond as usize]
            }
        };
        let mut site_operators = Vec::with_capacity(num_sites);
        let mut merged = Vec::with_capacity(num_sites);
        for (i, site_entries) in entries.into_iter().enumerate() {
            let (wl, wr) = (width(i as isize - 1), width(i as isize));
            let mut t = DenseTensor::zeros(&[wl, wr, 2, 2]);
            for e in &site_entries {
                if e.left >= wl || e.right >= wr {
                    return Err(Error::IndexOutOfRange { index: e.left.max(e.right), len: wl.max(wr) });
                }
                for so in 0..2 {
                    for si in 0..2 {
                        let idx = [e.left, e.right, so, si];
                        t.set(&idx, t.get(&idx) + e.op[so][si]);
                    }
                }
            }
            // Sparse view read back from the dense tensor so duplicates merge.
            let mut sparse = Vec::new();
            for a in 0..wl {
                for b in 0..wr {
                    let op = [
                        [t.get(&[a, b, 0, 0]), t.get(&[a, b, 0, 1])],
                        [t.get(&[a, b, 1, 0]), t.get(&[a, b, 1, 1])],
                    ];
                    if !ops::is_zero(&op) {
                        sparse.push(MpoEntry { left: a, right: b, op });
                    }
                }
            }
            site_operators.push(t);
            merged.push(sparse);
        }
        Ok(Self {
            num_sites,
            site_operators,
            aux_dims,
            entries: merged,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn site_operators(&self) -> &[DenseTensor] {
        &self.site_operators
    }

    pub fn aux_dims(&self) -> &[usize] {
        &self.aux_dims
    }

    pub(crate) fn entries(&self, site: usize) -> &[MpoEntry] {
        &self.entries[site]
    }

    /// Left and right automaton widths at `site`.
    pub(crate) fn widths(&self, site: usize) -> (usize, usize) {
        let s = self.site_operators[site].shape();
        (s[0], s[1])
    }

    /// `(Σ_i w_i σx_i)²` as a three-state automaton.
    pub fn collective_x_square(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidSize("no sites".into()));
        }
        if n == 1 {
            let w = weights[0];
            return Self::from_entries(
                vec![],
                vec![vec![MpoEntry { left: 0, right: 0, op: ops::scaled(IDENTITY, w * w) }]],
            );
        }
        // states: 0 = nothing placed, 1 = one σx placed, 2 = done
        let mut entries = Vec::with_capacity(n);
        for (i, &w) in weights.iter().enumerate() {
            let mut site = Vec::new();
            let first = i == 0;
            let last = i == n - 1;
            let l = |s: usize| if first { 0 } else { s };
            let r = |s: usize| if last { 0 } else { s };
            if !last {
                site.push(MpoEntry { left: l(0), right: r(0), op: IDENTITY });
                site.push(MpoEntry { left: l(0), right: r(1), op: ops::scaled(SIGMA_X, w) });
            }
            if !first && !last {
                site.push(MpoEntry { left: 1, right: 1, op: IDENTITY });
            }
            if !first {
                site.push(MpoEntry { left: l(1), right: r(2), op: ops::scaled(SIGMA_X, 2.0 * w) });
                site.push(MpoEntry { left: l(2), right: r(2), op: IDENTITY });
            }
            site.push(MpoEntry { left: l(0), right: r(2), op: ops::scaled(IDENTITY, w * w) });
            entries.push(site);
        }
        Self::from_entries(vec![3; n - 1], entries)
    }

    /// Dense `2^N x 2^N` matrix, site 0 most significant. Small systems only.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        if self.num_sites > 12 {
            return Err(Error::InvalidSize("dense MPO assembly limited to 12 sites".into()));
        }
        // partial[b] is the (2^i x 2^i) prefix operator ending in aux state b
        let mut partial: Vec<Vec<f64>> = vec![vec![1.0]];
        let mut dim = 1usize;
        for site in 0..self.num_sites {
            let (_, wr) = self.widths(site);
            let nd = dim * 2;
            let mut next = vec![vec![0.0; nd * nd]; wr];
            for e in self.entries(site) {
                let p = &partial[e.left];
                let out = &mut next[e.right];
                for ro in 0..dim {
                    for ri in 0..dim {
                        let v = p[ro * dim + ri];
                        if v == 0.0 {
                            continue;
                        }
                        for so in 0..2 {
                            for si in 0..2 {
                                out[(2 * ro + so) * nd + 2 * ri + si] += v * e.op[so][si];
                            }
                        }
                    }
                }
            }
            partial = next;
            dim = nd;
        }
        Ok(partial.swap_remove(0))
    }
}

/// Automaton MPO of the chain Hamiltonian. Interior bond `b` has width
/// `2 + open_terms_per_cut[b]`.
pub fn build_mpo(terms: &TermList1D) -> MpoOperator {
    let n = terms.num_sites();
    let lambda = terms.lambda();
    let field = ops::scaled(SIGMA_Z, lambda);
    if n == 1 {
        return MpoOperator::from_entries(vec![], vec![vec![MpoEntry { left: 0, right: 0, op: field }]])
            .expect("single-site operator");
    }
    let open = open_terms_per_cut(terms);
    let aux_dims: Vec<usize> = open.iter().map(|o| o + 2).collect();

    // Carrier slot of each term on each bond it crosses, in pair order.
    let pairs = terms.pairs();
    let mut slot: Vec<Vec<usize>> = vec![Vec::new(); pairs.len()];
    let mut next_slot = vec![2usize; n - 1];
    for (t, p) in pairs.iter().enumerate() {
        for b in p.mu..p.nu {
            slot[t].push(next_slot[b]);
            next_slot[b] += 1;
        }
    }
    let carrier = |t: usize, bond: usize| slot[t][bond - pairs[t].mu];

    const START: usize = 0;
    const DONE: usize = 1;
    let mut entries: Vec<Vec<MpoEntry>> = vec![Vec::new(); n];
    for (i, site) in entries.iter_mut().enumerate() {
        let first = i == 0;
        let last = i == n - 1;
        // On the outer bonds the single state is START (left) or DONE (right).
        let l = |s: usize| if first { 0 } else { s };
        let r = |s: usize| if last { 0 } else { s };
        if !last {
            site.push(MpoEntry { left: l(START), right: r(START), op: IDENTITY });
        }
        if !first {
            site.push(MpoEntry { left: l(DONE), right: r(DONE), op: IDENTITY });
        }
        if lambda != 0.0 {
            site.push(MpoEntry { left: l(START), right: r(DONE), op: field });
        }
    }
    for (t, p) in pairs.iter().enumerate() {
        entries[p.mu].push(MpoEntry {
            left: if p.mu == 0 { 0 } else { START },
            right: carrier(t, p.mu),
            op: ops::scaled(SIGMA_X, p.weight),
        });
        for i in p.mu + 1..p.nu {
            entries[i].push(MpoEntry { left: carrier(t, i - 1), right: carrier(t, i), op: IDENTITY });
        }
        entries[p.nu].push(MpoEntry {
            left: carrier(t, p.nu - 1),
            right: if p.nu == n - 1 { 0 } else { DONE },
            op: SIGMA_X,
        });
    }
    MpoOperator::from_entries(aux_dims, entries).expect("automaton indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::SparseHamiltonian;
    use crate::model::{map_to_chain, Boundary, IsingModel2D, PairTerm};
    use crate::spacefill::{build_snake, CurveKind, SiteMapping};

    #[test]
    fn single_pair_is_xx() {
        let t = TermList1D::new(2, 0.0, vec![PairTerm { mu: 0, nu: 1, weight: 1.0 }]).unwrap();
        let dense = build_mpo(&t).to_dense().unwrap();
        let mut want = vec![0.0; 16];
        for (r, c) in [(0, 3), (1, 2), (2, 1), (3, 0)] {
            want[r * 4 + c] = 1.0;
        }
        assert_eq!(dense, want);
    }

    #[test]
    fn plaquette_matches_matrix_free_hamiltonian() {
        let model = IsingModel2D::new(2, 1.0, Boundary::Open).unwrap();
        for kind in [CurveKind::Hilbert, CurveKind::Snake] {
            let t = map_to_chain(&model, &SiteMapping::new(kind, 2).unwrap()).unwrap();
            let dense = build_mpo(&t).to_dense().unwrap();
            let oracle = SparseHamiltonian::new(&t).unwrap().to_dense();
            for (a, b) in dense.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn widths_follow_open_terms() {
        let model = IsingModel2D::new(8, 1.0, Boundary::Open).unwrap();
        let t = map_to_chain(&model, &build_snake(8).unwrap()).unwrap();
        let mpo = build_mpo(&t);
        let open = open_terms_per_cut(&t);
        assert_eq!(mpo.aux_dims().len(), 63);
        for (w, o) in mpo.aux_dims().iter().zip(&open) {
            assert_eq!(*w, o + 2);
        }
        assert_eq!(mpo.aux_dims().iter().max(), Some(&11));
        assert_eq!(mpo.widths(0).0, 1);
        assert_eq!(mpo.widths(63).1, 1);
    }

    #[test]
    fn collective_square_matches_direct_sum() {
        let w = [1.0, -1.0, 0.5, 2.0];
        let dense = MpoOperator::collective_x_square(&w).unwrap().to_dense().unwrap();
        let n = w.len();
        let dim = 1 << n;
        // O = Σ w_i X_i, then O²
        let mut o = vec![0.0; dim * dim];
        for b in 0..dim {
            for (i, wi) in w.iter().enumerate() {
                o[(b ^ (1 << (n - 1 - i))) * dim + b] += wi;
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                let v: f64 = (0..dim).map(|k| o[r * dim + k] * o[k * dim + c]).sum();
                assert!((v - dense[r * dim + c]).abs() < 1e-12);
            }
        }
        let single = MpoOperator::collective_x_square(&[3.0]).unwrap().to_dense().unwrap();
        assert_eq!(single, vec![9.0, 0.0, 0.0, 9.0]);
    }

    #[test]
    fn single_site_field() {
        let t = TermList1D::new(1, 0.5, vec![]).unwrap();
        assert_eq!(build_mpo(&t).to_dense().unwrap(), vec![0.5, 0.0, 0.0, -0.5]);
    }
}
