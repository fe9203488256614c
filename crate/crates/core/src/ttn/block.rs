//! Renormalized operators of the leaf blocks seen through one tree link.

use crate::ops::{to_vec as op_vec, SIGMA_X, SIGMA_Z};
use crate::tensor::{gemm, MatRef};

/// `out = op ⋅_leg x + beta * out` for `x` of shape `dims`, `op` a
/// `dims[leg] x dims[leg]` matrix acting on axis `leg`.
pub(crate) fn apply_on_leg(op: &[f64], x: &[f64], dims: [usize; 3], leg: usize, beta: f64, out: &mut [f64]) {
    let [d0, d1, d2] = dims;
    match leg {
        0 => gemm(1.0, MatRef::new(op, d0, d0), MatRef::new(x, d0, d1 * d2), beta, out),
        1 => {
            let s = d1 * d2;
            for a in 0..d0 {
                gemm(
                    1.0,
                    MatRef::new(op, d1, d1),
                    MatRef::new(&x[a * s..(a + 1) * s], d1, d2),
                    beta,
                    &mut out[a * s..(a + 1) * s],
                );
            }
        }
        2 => gemm(1.0, MatRef::new(x, d0 * d1, d2), MatRef::new(op, d2, d2).t(), beta, out),
        _ => unreachable!("three-leg tensors only"),
    }
}

/// `Tᵀ Y` for `T`, `Y` of shape `(dp, dq, dj)`, contracting the first two legs.
pub(crate) fn close(t: &[f64], y: &[f64], dp: usize, dq: usize, dj: usize) -> Vec<f64> {
    let mut out = vec![0.0; dj * dj];
    gemm(1.0, MatRef::new(t, dp * dq, dj).t(), MatRef::new(y, dp * dq, dj), 0.0, &mut out);
    out
}

/// Sum of `A_t ⊗ B_t` over terms, where either factor may be the identity.
pub(crate) struct ProductSum<'a> {
    pub terms: Vec<(Option<&'a [f64]>, Option<&'a [f64]>)>,
}

impl<'a> ProductSum<'a> {
    /// `Σ_t (A_t ⊗ B_t) T` for `T` of shape `(dp, dq, dj)`.
    pub fn apply(&self, t: &[f64], dp: usize, dq: usize, dj: usize) -> Vec<f64> {
        let dims = [dp, dq, dj];
        let mut acc = vec![0.0; t.len()];
        let mut tmp = vec![0.0; t.len()];
        for &(a, b) in &self.terms {
            match (a, b) {
                (Some(a), Some(b)) => {
                    apply_on_leg(a, t, dims, 0, 0.0, &mut tmp);
                    apply_on_leg(b, &tmp, dims, 1, 1.0, &mut acc);
                }
                (Some(a), None) => apply_on_leg(a, t, dims, 0, 1.0, &mut acc),
                (None, Some(b)) => apply_on_leg(b, t, dims, 1, 1.0, &mut acc),
                (None, None) => acc.iter_mut().zip(t).for_each(|(s, v)| *s += v),
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub dim: usize,
    pub members: Vec<bool>,
    /// Every term with all sites inside the block.
    pub ham: Vec<f64>,
    /// `σx` of each member that couples to a site outside, sorted by site.
    pub open: Vec<(usize, Vec<f64>)>,
}

impl Block {
    pub fn leaf(site: usize, num_sites: usize, lambda: f64, adjacency: &[Vec<(usize, f64)>]) -> Self {
        let mut members = vec![false; num_sites];
        members[site] = true;
        let ham = op_vec(SIGMA_Z).into_iter().map(|v| v * lambda).collect();
        let open = if adjacency[site].is_empty() {
            Vec::new()
        } else {
            vec![(site, op_vec(SIGMA_X))]
        };
        Self { dim: 2, members, ham, open }
    }

    /// Cross interaction between two disjoint blocks as a list of
    /// `(op on a, op on b)` products, grouped over the side with fewer open sites.
    pub fn cross_terms(a: &Block, b: &Block, adjacency: &[Vec<(usize, f64)>]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let (small, large, swapped) = if a.open.len() <= b.open.len() { (a, b, false) } else { (b, a, true) };
        let index_in_large: std::collections::HashMap<usize, usize> =
            large.open.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
        let mut terms = Vec::new();
        for (site, x) in &small.open {
            let mut y: Option<Vec<f64>> = None;
            for &(partner, w) in &adjacency[*site] {
                if let Some(&k) = index_in_large.get(&partner) {
                    let xl = &large.open[k].1;
                    let acc = y.get_or_insert_with(|| vec![0.0; xl.len()]);
                    acc.iter_mut().zip(xl).for_each(|(s, v)| *s += w * v);
                }
            }
            if let Some(y) = y {
                terms.push(if swapped { (y, x.clone()) } else { (x.clone(), y) });
            }
        }
        terms
    }

    /// Block of `p ∪ q` seen through the third leg of `t`, shape `(dp, dq, dj)`.
    pub fn combine(p: &Block, q: &Block, t: &[f64], dj: usize, adjacency: &[Vec<(usize, f64)>]) -> Block {
        let (dp, dq) = (p.dim, q.dim);
        let members: Vec<bool> = p.members.iter().zip(&q.members).map(|(a, b)| *a || *b).collect();
        let cross = Self::cross_terms(p, q, adjacency);
        let mut sum = ProductSum {
            terms: vec![(Some(&p.ham[..]), None), (None, Some(&q.ham[..]))],
        };
        sum.terms.extend(cross.iter().map(|(a, b)| (Some(&a[..]), Some(&b[..]))));
        let ham = close(t, &sum.apply(t, dp, dq, dj), dp, dq, dj);

        let escapes = |site: usize| adjacency[site].iter().any(|&(o, _)| !members[o]);
        let mut open = Vec::new();
        for (site, x) in &p.open {
            if escapes(*site) {
                let s = ProductSum { terms: vec![(Some(&x[..]), None)] };
                open.push((*site, close(t, &s.apply(t, dp, dq, dj), dp, dq, dj)));
            }
        }
        for (site, x) in &q.open {
            if escapes(*site) {
                let s = ProductSum { terms: vec![(None, Some(&x[..]))] };
                open.push((*site, close(t, &s.apply(t, dp, dq, dj), dp, dq, dj)));
            }
        }
        open.sort_by_key(|(s, _)| *s);
        Block { dim: dj, members, ham, open }
    }
}

/// Effective Hamiltonian at a node whose three legs see `blocks`.
pub(crate) struct CenterOperator {
    dims: [usize; 3],
    singles: Vec<(usize, Vec<f64>)>,
    pairs: Vec<(usize, Vec<f64>, usize, Vec<f64>)>,
}

impl CenterOperator {
    pub fn new(blocks: [&Block; 3], adjacency: &[Vec<(usize, f64)>]) -> Self {
        let dims = [blocks[0].dim, blocks[1].dim, blocks[2].dim];
        let singles = (0..3).map(|j| (j, blocks[j].ham.clone())).collect();
        let mut pairs = Vec::new();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for (a, b) in Block::cross_terms(blocks[i], blocks[j], adjacency) {
                pairs.push((i, a, j, b));
            }
        }
        Self { dims, singles, pairs }
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        for (leg, op) in &self.singles {
            apply_on_leg(op, x, self.dims, *leg, 1.0, out);
        }
        let mut tmp = vec![0.0; n];
        for (la, a, lb, b) in &self.pairs {
            apply_on_leg(a, x, self.dims, *la, 0.0, &mut tmp);
            apply_on_leg(b, &tmp, self.dims, *lb, 1.0, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leg_application_matches_index_loops() {
        let dims = [2, 3, 4];
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        for leg in 0..3 {
            let d = dims[leg];
            let op: Vec<f64> = (0..d * d).map(|i| (i as f64 * 1.3).cos()).collect();
            let mut out = vec![0.0; 24];
            apply_on_leg(&op, &x, dims, leg, 0.0, &mut out);
            for a in 0..2 {
                for b in 0..3 {
                    for c in 0..4 {
                        let idx = [a, b, c];
                        let mut want = 0.0;
                        for k in 0..d {
                            let mut src = idx;
                            src[leg] = k;
                            want += op[idx[leg] * d + k] * x[(src[0] * 3 + src[1]) * 4 + src[2]];
                        }
                        assert!((out[(a * 3 + b) * 4 + c] - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cross_terms_group_weights() {
        let adj = vec![vec![(2, 1.0), (3, 2.0)], vec![], vec![(0, 1.0)], vec![(0, 2.0)]];
        let a = Block::leaf(0, 4, 0.0, &adj);
        let mut b = Block::leaf(2, 4, 0.0, &adj);
        // pretend b also holds site 3 with the same local operator
        b.open.push((3, b.open[0].1.clone()));
        let terms = Block::cross_terms(&a, &b, &adj);
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].1, vec![0.0, 3.0, 3.0, 0.0]);
    }
}
