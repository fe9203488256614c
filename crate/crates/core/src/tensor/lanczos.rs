//! Lanczos iteration for the smallest eigenpair of a symmetric linear map.
//!
//! The map is only ever applied, never stored. The Krylov basis is kept and
//! fully reorthogonalized, which is affordable at the problem sizes of the
//! local tensor-network updates and the exact-diagonalization oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Total budget of map applications.
    pub max_iter: usize,
    /// Krylov dimension before an explicit restart from the current Ritz vector.
    pub krylov_dim: usize,
    /// Convergence on `‖A v − θ v‖ <= tol * max(1, |θ|)`.
    pub tol: f64,
    /// Seed for replacement vectors after a breakdown.
    pub seed: u64,
    /// Stochastic symmetry probe before iterating.
    pub check_symmetry: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            krylov_dim: 60,
            tol: 1e-10,
            seed: 0x5eed,
            check_symmetry: cfg!(debug_assertions),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit norm.
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_BREAKDOWN_RESTARTS: usize = 3;

/// Smallest eigenpair of the symmetric map `apply` (`apply(x, y)` writes
/// `A x` into `y`). Fails with [`Error::NotConverged`] when the iteration
/// budget runs out.
pub fn lanczos_smallest<F>(apply: F, start: &[f64], opts: &LanczosOptions) -> Result<Eigenpair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let pair = lanczos_best_effort(apply, start, opts)?;
    if !pair.converged {
        return Err(Error::NotConverged {
            iterations: pair.iterations,
            residual: pair.residual,
        });
    }
    Ok(pair)
}

/// Like [`lanczos_smallest`] but returns the best Ritz pair found with
/// `converged = false` instead of failing when the budget runs out.
pub(crate) fn lanczos_best_effort<F>(mut apply: F, start: &[f64], opts: &LanczosOptions) -> Result<Eigenpair>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let dim = start.len();
    if dim == 0 {
        return Err(Error::InvalidSize("empty start vector".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if opts.check_symmetry {
        check_symmetric(&mut apply, dim, &mut rng)?;
    }

    let mut v0 = start.to_vec();
    if !normalize(&mut v0) {
        v0 = random_unit(dim, &mut rng);
    }

    let mut used = 0usize;
    let mut best: Option<Eigenpair> = None;
    let mut scratch = vec![0.0; dim];
    let tol = opts.tol;
    let krylov_cap = opts.krylov_dim.max(2).min(dim);

    while used < opts.max_iter {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut breakdowns = 0;
        let mut ritz: (f64, Vec<f64>);

        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut scratch);
            used += 1;
            if scratch.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("linear map produced non-finite values".into()));
            }
            let mut w = scratch.clone();
            let a = dot(&basis[j], &w);
            alpha.push(a);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            ritz = smallest_ritz(&alpha, &beta)?;
            let scale = ritz.0.abs().max(1.0);
            let estimate = b * ritz.1.last().copied().unwrap_or(0.0).abs();

            let exhausted = used >= opts.max_iter;
            let full = basis.len() >= krylov_cap;
            let invariant = b <= 1e-13 * scale;

            if invariant && basis.len() < dim && breakdowns < MAX_BREAKDOWN_RESTARTS {
                // The Krylov space closed up; extend it with a fresh direction so
                // an eigenvector orthogonal to the start vector can still be found.
                breakdowns += 1;
                let mut fresh = random_unit(dim, &mut rng);
                for _ in 0..2 {
                    for q in &basis {
                        let c = dot(q, &fresh);
                        axpy(-c, q, &mut fresh);
                    }
                }
                if normalize(&mut fresh) {
                    beta.push(0.0);
                    basis.push(fresh);
                    if !exhausted {
                        continue;
                    }
                }
            }
            if estimate <= tol * scale || invariant || full || exhausted {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|v| *v /= b);
            basis.push(w);
        }

        // Ritz vector in the full space.
        let mut x = vec![0.0; dim];
        for (q, &c) in basis.iter().zip(&ritz.1) {
            axpy(c, q, &mut x);
        }
        normalize(&mut x);
        apply(&x, &mut scratch);
        used += 1;
        let theta = dot(&x, &scratch);
        axpy(-theta, &x, &mut scratch);
        let residual = norm(&scratch);
        let converged = residual <= tol * theta.abs().max(1.0);
        let candidate = Eigenpair {
            value: theta,
            vector: x.clone(),
            residual,
            iterations: used,
            converged,
        };
        if converged {
            return Ok(candidate);
        }
        if best.as_ref().map_or(true, |b| candidate.value < b.value) {
            best = Some(candidate);
        }
        v0 = x;
    }
    let mut best = best.expect("at least one Lanczos cycle ran");
    best.iterations = used;
    Ok(best)
}

/// Lowest eigenpair of the symmetric tridiagonal matrix (alpha, beta).
fn smallest_ritz(alpha: &[f64], beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = alpha.len();
    if k == 1 {
        return Ok((alpha[0], vec![1.0]));
    }
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alpha[i];
        if i + 1 < k {
            t[i * k + i + 1] = beta[i];
            t[(i + 1) * k + i] = beta[i];
        }
    }
    let (values, vectors) = super::symmetric_eigen(&t, k)?;
    let y = (0..k).map(|r| vectors[r * k]).collect();
    Ok((values[0], y))
}

fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !n.is_finite() || n < 1e-300 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

fn check_symmetric<F>(apply: &mut F, dim: usize, rng: &mut ChaCha8Rng) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let x = random_unit(dim, rng);
    let y = random_unit(dim, rng);
    let mut ax = vec![0.0; dim];
    let mut ay = vec![0.0; dim];
    apply(&x, &mut ax);
    apply(&y, &mut ay);
    let asym = (dot(&x, &ay) - dot(&ax, &y)).abs();
    let scale = norm(&ax).max(norm(&ay)).max(1.0);
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::symmetric_eigen;

    fn dense_apply(m: &[f64], dim: usize) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            for r in 0..dim {
                y[r] = (0..dim).map(|c| m[r * dim + c] * x[c]).sum();
            }
        }
    }

    #[test]
    fn diagonal_map() {
        let m = [-5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0];
        let r = lanczos_smallest(dense_apply(&m, 3), &[1.0, 1.0, 1.0], &LanczosOptions::default()).unwrap();
        assert!((r.value + 5.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_x() {
        let m = [0.0, 1.0, 1.0, 0.0];
        let r = lanczos_smallest(dense_apply(&m, 2), &[1.0, 0.3], &LanczosOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!((norm(&r.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn breakdown_is_escaped() {
        // The start vector is an eigenvector of the larger eigenvalue.
        let m = [-5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0];
        let r = lanczos_smallest(dense_apply(&m, 3), &[0.0, 0.0, 1.0], &LanczosOptions::default()).unwrap();
        assert!((r.value + 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_start_vector_is_replaced() {
        let m = [0.0, 1.0, 1.0, 0.0];
        let r = lanczos_smallest(dense_apply(&m, 2), &[0.0, 0.0], &LanczosOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
    }

    /// Open Ising chain `Σ σx σx + h Σ σz` on four sites, assembled densely.
    fn ising_chain_dense(h: f64) -> Vec<f64> {
        let n = 4;
        let dim = 1 << n;
        let mut m = vec![0.0; dim * dim];
        for b in 0..dim {
            for i in 0..n {
                let z = if b >> i & 1 == 0 { 1.0 } else { -1.0 };
                m[b * dim + b] += h * z;
            }
            for i in 0..n - 1 {
                let c = b ^ (1 << i) ^ (1 << (i + 1));
                m[c * dim + b] += 1.0;
            }
        }
        m
    }

    #[test]
    fn four_spin_chain_matches_dense() {
        // A structured start vector can be orthogonal to the ground space.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for h in [0.0, 0.5, 1.3] {
            let m = ising_chain_dense(h);
            let (values, _) = symmetric_eigen(&m, 16).unwrap();
            let start: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = lanczos_smallest(dense_apply(&m, 16), &start, &LanczosOptions::default()).unwrap();
            assert!((r.value - values[0]).abs() < 1e-10, "h={h}");
        }
    }

    #[test]
    fn random_symmetric_matrices_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 2, 5, 17, 64] {
            let mut m = vec![0.0; dim * dim];
            for r in 0..dim {
                for c in 0..=r {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m[r * dim + c] = v;
                    m[c * dim + r] = v;
                }
            }
            let (values, _) = symmetric_eigen(&m, dim).unwrap();
            let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = lanczos_smallest(dense_apply(&m, dim), &start, &LanczosOptions::default()).unwrap();
            assert!(r.value >= values[0] - 1e-10);
            assert!((r.value - values[0]).abs() < 1e-9, "dim={dim}");
        }
    }

    #[test]
    fn asymmetric_map_is_rejected() {
        let m = [0.0, 1.0, 0.0, 0.0];
        let opts = LanczosOptions {
            check_symmetry: true,
            ..Default::default()
        };
        assert!(matches!(
            lanczos_smallest(dense_apply(&m, 2), &[1.0, 0.0], &opts),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let dim = 200;
        let m: Vec<f64> = (0..dim * dim)
            .map(|k| if k / dim == k % dim { (k / dim) as f64 } else { 0.0 })
            .collect();
        let opts = LanczosOptions {
            max_iter: 3,
            krylov_dim: 3,
            tol: 1e-14,
            ..Default::default()
        };
        let start = vec![1.0; dim];
        assert!(matches!(
            lanczos_smallest(dense_apply(&m, dim), &start, &opts),
            Err(Error::NotConverged { .. })
        ));
    }
}
