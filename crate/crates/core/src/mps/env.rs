//! Environment contractions shared by DMRG, expectation values and norms.
//!
//! An environment with `width` automaton states over a bond of dimension `dim`
//! stores one `dim x dim` block per state, indexed `[state][bra][ket]`.

use super::mpo::MpoEntry;
use crate::ops::Op2;
use crate::tensor::{gemm, MatRef};

#[derive(Clone, Debug)]
pub(crate) struct Env {
    pub width: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Env {
    /// Width-1, dimension-1 boundary environment holding 1.
    pub fn trivial() -> Self {
        Self { width: 1, dim: 1, data: vec![1.0] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { width: 1, dim, data }
    }

    pub fn block(&self, state: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.data[state * s..(state + 1) * s]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }
}

/// `out[o, s', k] += Σ_s op[s'][s] x[o, s, k]`.
pub(crate) fn apply_mid(op: &Op2, x: &[f64], outer: usize, inner: usize, out: &mut [f64]) {
    for o in 0..outer {
        for sp in 0..2 {
            let dst = (o * 2 + sp) * inner;
            for s in 0..2 {
                let c = op[sp][s];
                if c == 0.0 {
                    continue;
                }
                let src = (o * 2 + s) * inner;
                for k in 0..inner {
                    out[dst + k] += c * x[src + k];
                }
            }
        }
    }
}

/// Extends a left environment across site tensor `a` of shape `(dl, 2, dr)`.
pub(crate) fn extend_left(env: &Env, a: &[f64], dl: usize, dr: usize, entries: &[MpoEntry], width_right: usize) -> Env {
    debug_assert_eq!(env.dim, dl);
    let mut t: Vec<Option<Vec<f64>>> = vec![None; env.width];
    let mut u: Vec<Option<Vec<f64>>> = vec![None; width_right];
    for e in entries {
        let te = t[e.left].get_or_insert_with(|| {
            let mut buf = vec![0.0; dl * 2 * dr];
            gemm(1.0, MatRef::new(env.block(e.left), dl, dl), MatRef::new(a, dl, 2 * dr), 0.0, &mut buf);
            buf
        });
        let ue = u[e.right].get_or_insert_with(|| vec![0.0; dl * 2 * dr]);
        apply_mid(&e.op, te, dl, dr, ue);
    }
    let mut data = vec![0.0; width_right * dr * dr];
    for (b, ub) in u.iter().enumerate() {
        if let Some(ub) = ub {
            gemm(
                1.0,
                MatRef::new(a, 2 * dl, dr).t(),
                MatRef::new(ub, 2 * dl, dr),
                0.0,
                &mut data[b * dr * dr..(b + 1) * dr * dr],
            );
        }
    }
    Env { width: width_right, dim: dr, data }
}

/// Extends a right environment across site tensor `b` of shape `(dl, 2, dr)`.
pub(crate) fn extend_right(env: &Env, b: &[f64], dl: usize, dr: usize, entries: &[MpoEntry], width_left: usize) -> Env {
    debug_assert_eq!(env.dim, dr);
    let mut t: Vec<Option<Vec<f64>>> = vec![None; env.width];
    let mut u: Vec<Option<Vec<f64>>> = vec![None; width_left];
    for e in entries {
        let te = t[e.right].get_or_insert_with(|| {
            let mut buf = vec![0.0; dl * 2 * dr];
            gemm(1.0, MatRef::new(b, 2 * dl, dr), MatRef::new(env.block(e.right), dr, dr).t(), 0.0, &mut buf);
            buf
        });
        let ue = u[e.left].get_or_insert_with(|| vec![0.0; dl * 2 * dr]);
        apply_mid(&e.op, te, dl, dr, ue);
    }
    let mut data = vec![0.0; width_left * dl * dl];
    for (a, ua) in u.iter().enumerate() {
        if let Some(ua) = ua {
            gemm(
                1.0,
                MatRef::new(b, dl, 2 * dr),
                MatRef::new(ua, dl, 2 * dr).t(),
                0.0,
                &mut data[a * dl * dl..(a + 1) * dl * dl],
            );
        }
    }
    Env { width: width_left, dim: dl, data }
}

/// Effective two-site Hamiltonian acting on `θ` of shape `(dl, 2, 2, dr)`.
pub(crate) struct TwoSiteOperator<'a> {
    left: &'a Env,
    right: &'a Env,
    w1: &'a [MpoEntry],
    w2: &'a [MpoEntry],
    mid_width: usize,
    dl: usize,
    dr: usize,
}

impl<'a> TwoSiteOperator<'a> {
    pub fn new(left: &'a Env, right: &'a Env, w1: &'a [MpoEntry], w2: &'a [MpoEntry], mid_width: usize) -> Self {
        Self {
            left,
            right,
            w1,
            w2,
            mid_width,
            dl: left.dim,
            dr: right.dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dl * 4 * self.dr
    }

    pub fn apply(&self, theta: &[f64], out: &mut [f64]) {
        let (dl, dr) = (self.dl, self.dr);
        let size = dl * 4 * dr;
        let mut y: Vec<Option<Vec<f64>>> = vec![None; self.left.width];
        let mut v: Vec<Option<Vec<f64>>> = vec![None; self.mid_width];
        for e in self.w1 {
            let ya = y[e.left].get_or_insert_with(|| {
                let mut buf = vec![0.0; size];
                gemm(
                    1.0,
                    MatRef::new(self.left.block(e.left), dl, dl),
                    MatRef::new(theta, dl, 4 * dr),
                    0.0,
                    &mut buf,
                );
                buf
            });
            let vb = v[e.right].get_or_insert_with(|| vec![0.0; size]);
            apply_mid(&e.op, ya, dl, 2 * dr, vb);
        }
        drop(y);
        let mut z: Vec<Option<Vec<f64>>> = vec![None; self.right.width];
        for e in self.w2 {
            if let Some(vb) = &v[e.left] {
                let zc = z[e.right].get_or_insert_with(|| vec![0.0; size]);
                apply_mid(&e.op, vb, 2 * dl, dr, zc);
            }
        }
        out[..size].iter_mut().for_each(|x| *x = 0.0);
        for (c, zc) in z.iter().enumerate() {
            if let Some(zc) = zc {
                gemm(
                    1.0,
                    MatRef::new(zc, 4 * dl, dr),
                    MatRef::new(self.right.block(c), dr, dr).t(),
                    1.0,
                    out,
                );
            }
        }
    }
}
