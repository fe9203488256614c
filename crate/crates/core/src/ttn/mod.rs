//! Binary tree tensor networks over `2^L` chain sites.
//!
//! Leaf `mu` sits at tree position `mu`. Nodes live on levels `1..L`; level 1
//! holds the two top nodes joined by the top link, and level `L - 1` nodes
//! carry two physical legs each. Every node tensor has shape
//! `(left child, right child, up)`, where "up" is the parent link or, for the
//! top nodes, the top link. All tensors except the one at the isometry
//! center are isometries toward the center.

mod block;
mod sweep;

pub use sweep::{ttn_ground_state, TtnCheckpoint, TtnConfig, TtnOutcome};

use std::borrow::Cow;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TermList1D;
use crate::ops::{Axis, Op2, IDENTITY, SIGMA_X};
use crate::spacefill::ChainIndex;
use crate::tensor::{contract, dot, gemm, qr, DenseTensor, MatRef};
use block::{apply_on_leg, close, Block, CenterOperator, ProductSum};

const MAX_STATEVECTOR_SITES: usize = 24;

/// What a node leg connects to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Link {
    Node { id: usize, leg: usize },
    Leaf(usize),
}

/// Index arithmetic of the perfect binary tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Tree {
    levels: usize,
}

impl Tree {
    pub fn new(num_leaves: usize) -> Result<Self> {
        if num_leaves < 4 || !num_leaves.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(num_leaves));
        }
        Ok(Self {
            levels: num_leaves.trailing_zeros() as usize,
        })
    }

    pub fn num_leaves(&self) -> usize {
        1 << self.levels
    }

    pub fn num_nodes(&self) -> usize {
        self.num_leaves() - 2
    }

    pub fn id(&self, level: usize, k: usize) -> usize {
        (1 << level) - 2 + k
    }

    /// `(level, index within level)`.
    pub fn position(&self, id: usize) -> (usize, usize) {
        let level = (usize::BITS - 1 - (id + 2).leading_zeros()) as usize;
        (level, id + 2 - (1 << level))
    }

    pub fn neighbor(&self, id: usize, leg: usize) -> Link {
        let (level, k) = self.position(id);
        match leg {
            2 if level == 1 => Link::Node { id: 1 - k, leg: 2 },
            2 => Link::Node {
                id: self.id(level - 1, k / 2),
                leg: k % 2,
            },
            0 | 1 => {
                let c = 2 * k + leg;
                if level == self.levels - 1 {
                    Link::Leaf(c)
                } else {
                    Link::Node {
                        id: self.id(level + 1, c),
                        leg: 2,
                    }
                }
            }
            _ => unreachable!("three legs per node"),
        }
    }

    /// Dimension of the link above `id` for bond cap `max_bond`.
    pub fn up_dim(&self, id: usize, max_bond: usize) -> usize {
        let (level, _) = self.position(id);
        let leaves_below = 1usize << (self.levels - level);
        if leaves_below >= 63 {
            max_bond
        } else {
            max_bond.min(1 << leaves_below)
        }
    }

    pub fn leg_dims(&self, id: usize, max_bond: usize) -> [usize; 3] {
        let child = |leg| match self.neighbor(id, leg) {
            Link::Leaf(_) => 2,
            Link::Node { id: c, .. } => self.up_dim(c, max_bond),
        };
        [child(0), child(1), self.up_dim(id, max_bond)]
    }

    /// Parent when the tree is rooted at node 0.
    fn rooted_parent(&self, id: usize) -> Option<usize> {
        match id {
            0 => None,
            1 => Some(0),
            _ => match self.neighbor(id, 2) {
                Link::Node { id: p, .. } => Some(p),
                Link::Leaf(_) => unreachable!(),
            },
        }
    }

    fn ancestors(&self, mut id: usize) -> Vec<usize> {
        let mut out = vec![id];
        while let Some(p) = self.rooted_parent(id) {
            out.push(p);
            id = p;
        }
        out
    }

    /// Nodes on the path from `a` to `b`, both included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let up_a = self.ancestors(a);
        let up_b = self.ancestors(b);
        let lca = *up_a.iter().find(|x| up_b.contains(x)).expect("tree is connected");
        let mut path: Vec<usize> = up_a.iter().copied().take_while(|&x| x != lca).collect();
        path.push(lca);
        let down: Vec<usize> = up_b.iter().copied().take_while(|&x| x != lca).collect();
        path.extend(down.into_iter().rev());
        path
    }

    /// Leg of `a` that connects to the adjacent node `b`.
    pub fn leg_toward(&self, a: usize, b: usize) -> usize {
        (0..3)
            .find(|&leg| matches!(self.neighbor(a, leg), Link::Node { id, .. } if id == b))
            .expect("nodes are adjacent")
    }

    /// Depth-first pre-order from node 0, entering the second top node last.
    pub fn sweep_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.num_nodes());
        let mut stack = vec![1, 0];
        while let Some(id) = stack.pop() {
            order.push(id);
            for leg in [1, 0] {
                if let Link::Node { id: c, .. } = self.neighbor(id, leg) {
                    stack.push(c);
                }
            }
        }
        order
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtnState {
    num_leaves: usize,
    tensors: Vec<DenseTensor>,
    center: usize,
}

/// Tensor of node `id` with legs reordered to `(p, q, toward)`.
fn oriented(t: &DenseTensor, toward: usize) -> (Cow<'_, [f64]>, [usize; 3]) {
    let s = t.shape();
    let (p, q) = match toward {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let dims = [s[p], s[q], s[toward]];
    if toward == 2 {
        (Cow::Borrowed(t.data()), dims)
    } else {
        (Cow::Owned(t.permute(&[p, q, toward]).into_data()), dims)
    }
}

fn other_legs(leg: usize) -> (usize, usize) {
    match leg {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl TtnState {
    fn tree(&self) -> Tree {
        Tree::new(self.num_leaves).expect("validated on construction")
    }

    /// Random isometries at full allowed rank, center at node 0.
    pub fn random(num_leaves: usize, max_bond: usize, seed: u64) -> Result<Self> {
        let tree = Tree::new(num_leaves)?;
        if max_bond == 0 {
            return Err(Error::InvalidParameter("max_bond must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::with_capacity(tree.num_nodes());
        for id in 0..tree.num_nodes() {
            let dims = tree.leg_dims(id, max_bond);
            let raw = DenseTensor::random(&dims, &mut rng);
            if id == 0 {
                let mut t = raw;
                let n = t.norm();
                t.scale(1.0 / n);
                tensors.push(t);
            } else {
                let (q, _, k) = qr(raw.data(), dims[0] * dims[1], dims[2])?;
                debug_assert_eq!(k, dims[2]);
                tensors.push(DenseTensor::from_vec(&dims, q)?);
            }
        }
        Ok(Self { num_leaves, tensors, center: 0 })
    }

    /// Product state with all bonds of dimension 1.
    pub fn product(local: &[[f64; 2]]) -> Result<Self> {
        let tree = Tree::new(local.len())?;
        let unit = |v: [f64; 2]| -> Result<[f64; 2]> {
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::InvalidParameter("local vector must be nonzero".into()));
            }
            Ok([v[0] / n, v[1] / n])
        };
        let mut tensors = Vec::with_capacity(tree.num_nodes());
        for id in 0..tree.num_nodes() {
            match (tree.neighbor(id, 0), tree.neighbor(id, 1)) {
                (Link::Leaf(a), Link::Leaf(b)) => {
                    let (va, vb) = (unit(local[a])?, unit(local[b])?);
                    let data = vec![va[0] * vb[0], va[0] * vb[1], va[1] * vb[0], va[1] * vb[1]];
                    tensors.push(DenseTensor::from_vec(&[2, 2, 1], data)?);
                }
                _ => tensors.push(DenseTensor::from_vec(&[1, 1, 1], vec![1.0])?),
            }
        }
        Ok(Self {
            num_leaves: local.len(),
            tensors,
            center: 0,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_leaves
    }

    pub fn num_nodes(&self) -> usize {
        self.tensors.len()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    /// `(level, index)` of a node; level 1 holds the two top nodes.
    pub fn node_position(&self, id: usize) -> (usize, usize) {
        self.tree().position(id)
    }

    /// Largest link dimension in the network.
    pub fn max_bond_dim(&self) -> usize {
        self.tensors
            .iter()
            .flat_map(|t| t.shape().iter().copied())
            .max()
            .unwrap_or(1)
    }

    /// Moves the isometry center to node `target` by QR steps along the path.
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        if target >= self.num_nodes() {
            return Err(Error::IndexOutOfRange { index: target, len: self.num_nodes() });
        }
        let path = self.tree().path(self.center, target);
        for w in path.windows(2) {
            self.shift(w[0], w[1])?;
        }
        Ok(())
    }

    /// One QR step of the center from `u` to the adjacent node `v`.
    pub(crate) fn shift(&mut self, u: usize, v: usize) -> Result<()> {
        debug_assert_eq!(u, self.center);
        let tree = self.tree();
        let lu = tree.leg_toward(u, v);
        let lv = tree.leg_toward(v, u);
        let (data, dims) = oriented(&self.tensors[u], lu);
        let (q, r, k) = qr(&data, dims[0] * dims[1], dims[2])?;
        let q = DenseTensor::from_vec(&[dims[0], dims[1], k], q)?;
        // undo the (p, q, toward) ordering
        let (p, qq) = other_legs(lu);
        let mut inverse = [0usize; 3];
        inverse[p] = 0;
        inverse[qq] = 1;
        inverse[lu] = 2;
        self.tensors[u] = q.permute(&inverse);

        let r = DenseTensor::from_vec(&[k, dims[2]], r)?;
        // contract leaves R's free axis first: (k, remaining legs of v)
        let moved = contract(&r, &self.tensors[v], &[(1, lv)])?;
        let mut back = [0usize; 3];
        let rest: Vec<usize> = (0..3).filter(|&x| x != lv).collect();
        back[lv] = 0;
        back[rest[0]] = 1;
        back[rest[1]] = 2;
        self.tensors[v] = moved.permute(&back);
        self.center = v;
        Ok(())
    }

    /// Computes the data of all three blocks around the center, folding
    /// leaves into blocks node by node.
    fn center_blocks<B>(
        &self,
        leaf: &dyn Fn(usize) -> B,
        combine: &dyn Fn(&[f64], [usize; 3], &B, &B) -> B,
    ) -> [B; 3] {
        let tree = self.tree();
        let c = self.center;
        [0, 1, 2].map(|leg| self.fold_link(&tree, tree.neighbor(c, leg), leaf, combine))
    }

    fn fold_link<B>(
        &self,
        tree: &Tree,
        link: Link,
        leaf: &dyn Fn(usize) -> B,
        combine: &dyn Fn(&[f64], [usize; 3], &B, &B) -> B,
    ) -> B {
        match link {
            Link::Leaf(s) => leaf(s),
            Link::Node { id, leg } => {
                let (p, q) = other_legs(leg);
                let bp = self.fold_link(tree, tree.neighbor(id, p), leaf, combine);
                let bq = self.fold_link(tree, tree.neighbor(id, q), leaf, combine);
                let (data, dims) = oriented(&self.tensors[id], leg);
                combine(&data, dims, &bp, &bq)
            }
        }
    }

    fn center_dims(&self) -> [usize; 3] {
        let s = self.tensors[self.center].shape();
        [s[0], s[1], s[2]]
    }

    fn center_norm_sq(&self) -> f64 {
        let t = self.tensors[self.center].data();
        dot(t, t)
    }

    /// `<ψ|op_site|ψ> / <ψ|ψ>`, renormalizing the operator up to the center.
    pub fn local_expectation(&self, site: usize, op: Op2) -> f64 {
        let op_m = vec![op[0][0], op[0][1], op[1][0], op[1][1]];
        let leaf = |s: usize| if s == site { Some(op_m.clone()) } else { None };
        let combine = |t: &[f64], d: [usize; 3], p: &Option<Vec<f64>>, q: &Option<Vec<f64>>| {
            let terms = match (p, q) {
                (None, None) => return None,
                (Some(a), _) => vec![(Some(&a[..]), None)],
                (None, Some(b)) => vec![(None, Some(&b[..]))],
            };
            Some(close(t, &ProductSum { terms }.apply(t, d[0], d[1], d[2]), d[0], d[1], d[2]))
        };
        let blocks = self.center_blocks(&leaf, &combine);
        let theta = self.tensors[self.center].data();
        let dims = self.center_dims();
        let mut y = vec![0.0; theta.len()];
        for (leg, b) in blocks.iter().enumerate() {
            if let Some(m) = b {
                apply_on_leg(m, theta, dims, leg, 0.0, &mut y);
                return dot(theta, &y) / self.center_norm_sq();
            }
        }
        unreachable!("site {site} lies in one of the center blocks")
    }

    /// `<ψ|H|ψ> / <ψ|ψ>` from block Hamiltonians folded up to the center.
    pub fn energy(&self, terms: &TermList1D) -> Result<f64> {
        if terms.num_sites() != self.num_leaves {
            return Err(Error::SizeMismatch(format!(
                "terms on {} sites, state on {}",
                terms.num_sites(),
                self.num_leaves
            )));
        }
        let adjacency = terms.adjacency();
        let n = self.num_leaves;
        let lambda = terms.lambda();
        let leaf = |s: usize| Block::leaf(s, n, lambda, &adjacency);
        let combine = |t: &[f64], d: [usize; 3], p: &Block, q: &Block| Block::combine(p, q, t, d[2], &adjacency);
        let blocks = self.center_blocks(&leaf, &combine);
        let op = CenterOperator::new([&blocks[0], &blocks[1], &blocks[2]], &adjacency);
        let theta = self.tensors[self.center].data();
        let mut y = vec![0.0; theta.len()];
        op.apply(theta, &mut y);
        Ok(dot(theta, &y) / self.center_norm_sq())
    }

    /// `<ψ|(Σ_i w_i σx_i)²|ψ> / <ψ|ψ>` from the block pair (O, O²).
    pub fn collective_x_second_moment(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.num_leaves {
            return Err(Error::SizeMismatch("one weight per site required".into()));
        }
        type Moments = (Vec<f64>, Vec<f64>);
        let leaf = |s: usize| -> Moments {
            let w = weights[s];
            (
                SIGMA_X.iter().flatten().map(|v| v * w).collect(),
                IDENTITY.iter().flatten().map(|v| v * w * w).collect(),
            )
        };
        let combine = |t: &[f64], d: [usize; 3], p: &Moments, q: &Moments| -> Moments {
            let o = ProductSum {
                terms: vec![(Some(&p.0[..]), None), (None, Some(&q.0[..]))],
            };
            let twice: Vec<f64> = p.0.iter().map(|v| 2.0 * v).collect();
            let s = ProductSum {
                terms: vec![(Some(&p.1[..]), None), (None, Some(&q.1[..])), (Some(&twice[..]), Some(&q.0[..]))],
            };
            (
                close(t, &o.apply(t, d[0], d[1], d[2]), d[0], d[1], d[2]),
                close(t, &s.apply(t, d[0], d[1], d[2]), d[0], d[1], d[2]),
            )
        };
        let blocks = self.center_blocks(&leaf, &combine);
        let theta = self.tensors[self.center].data();
        let dims = self.center_dims();
        let mut y = vec![0.0; theta.len()];
        for (leg, b) in blocks.iter().enumerate() {
            apply_on_leg(&b.1, theta, dims, leg, 1.0, &mut y);
        }
        let mut tmp = vec![0.0; theta.len()];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            apply_on_leg(&blocks[i].0, theta, dims, i, 0.0, &mut tmp);
            let twice: Vec<f64> = blocks[j].0.iter().map(|v| 2.0 * v).collect();
            apply_on_leg(&twice, &tmp, dims, j, 1.0, &mut y);
        }
        Ok(dot(theta, &y) / self.center_norm_sq())
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_statevector(&self) -> Result<Vec<f64>> {
        if self.num_leaves > MAX_STATEVECTOR_SITES {
            return Err(Error::InvalidSize(format!("statevector limited to {MAX_STATEVECTOR_SITES} sites")));
        }
        let tree = self.tree();
        let (s0, rows) = self.subtree_amplitudes(&tree, 0);
        let (s1, _) = self.subtree_amplitudes(&tree, 1);
        let top = self.tensors[0].shape()[2];
        let mut psi = vec![0.0; rows * rows];
        gemm(1.0, MatRef::new(&s0, rows, top), MatRef::new(&s1, rows, top).t(), 0.0, &mut psi);
        Ok(psi)
    }

    /// Amplitudes over the leaves below `id` times its up link, row-major,
    /// with the number of rows.
    fn subtree_amplitudes(&self, tree: &Tree, id: usize) -> (Vec<f64>, usize) {
        let t = &self.tensors[id];
        let [da, db, du] = [t.shape()[0], t.shape()[1], t.shape()[2]];
        let child = |leg| match tree.neighbor(id, leg) {
            Link::Leaf(_) => (vec![1.0, 0.0, 0.0, 1.0], 2usize),
            Link::Node { id: c, .. } => self.subtree_amplitudes(tree, c),
        };
        let (sl, rows_l) = child(0);
        let (sr, rows_r) = child(1);
        // m[a, r, u] = Σ_b sr[r, b] t[a, b, u]
        let mut m = vec![0.0; da * rows_r * du];
        for a in 0..da {
            gemm(
                1.0,
                MatRef::new(&sr, rows_r, db),
                MatRef::new(&t.data()[a * db * du..(a + 1) * db * du], db, du),
                0.0,
                &mut m[a * rows_r * du..(a + 1) * rows_r * du],
            );
        }
        let mut out = vec![0.0; rows_l * rows_r * du];
        gemm(1.0, MatRef::new(&sl, rows_l, da), MatRef::new(&m, da, rows_r * du), 0.0, &mut out);
        (out, rows_l * rows_r)
    }

    /// Checks that `id` is an isometry toward `leg` within `tol`.
    pub fn is_isometric_toward(&self, id: usize, leg: usize, tol: f64) -> bool {
        let (data, dims) = oriented(&self.tensors[id], leg);
        let g = close(&data, &data, dims[0], dims[1], dims[2]);
        let d = dims[2];
        (0..d).all(|i| (0..d).all(|j| (g[i * d + j] - if i == j { 1.0 } else { 0.0 }).abs() <= tol))
    }

    /// Every non-center tensor is an isometry toward the center.
    pub fn check_isometries(&self, tol: f64) -> bool {
        let tree = self.tree();
        (0..self.num_nodes()).filter(|&id| id != self.center).all(|id| {
            let path = tree.path(id, self.center);
            self.is_isometric_toward(id, tree.leg_toward(id, path[1]), tol)
        })
    }

    pub fn from_parts(num_leaves: usize, tensors: Vec<DenseTensor>, center: usize) -> Result<Self> {
        let tree = Tree::new(num_leaves)?;
        if tensors.len() != tree.num_nodes() || center >= tensors.len() {
            return Err(Error::SizeMismatch("node count does not match leaves".into()));
        }
        for (id, t) in tensors.iter().enumerate() {
            if t.rank() != 3 {
                return Err(Error::DimensionMismatch(format!("node {id} has rank {}", t.rank())));
            }
            for leg in 0..3 {
                let want = match tree.neighbor(id, leg) {
                    Link::Leaf(_) => 2,
                    Link::Node { id: o, leg: ol } => tensors[o].shape()[ol],
                };
                if t.shape()[leg] != want {
                    return Err(Error::DimensionMismatch(format!("node {id} leg {leg}")));
                }
            }
        }
        Ok(Self { num_leaves, tensors, center })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let raw: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_parts(raw.num_leaves, raw.tensors, raw.center)
    }
}

pub fn ttn_energy(state: &TtnState, terms: &TermList1D) -> Result<f64> {
    state.energy(terms)
}

pub fn ttn_local_expectation(state: &TtnState, leaf: ChainIndex, axis: Axis) -> Result<f64> {
    if leaf.0 >= state.num_sites() {
        return Err(Error::IndexOutOfRange { index: leaf.0, len: state.num_sites() });
    }
    Ok(state.local_expectation(leaf.0, axis.op()))
}
