use faer::Mat;

use super::DenseTensor;
use crate::error::{Error, Result};

/// Relative squared-weight cutoff applied after the rank cap.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Row axes of the input followed by the kept bond axis.
    pub left: DenseTensor,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Kept bond axis followed by the column axes of the input.
    pub right: DenseTensor,
    /// Sum of squared discarded singular values.
    pub truncated_weight: f64,
}

/// Matrix SVD result, row-major factors: `a ≈ u * diag(s) * vt`.
#[derive(Clone, Debug)]
pub(crate) struct MatSvd {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub vt: Vec<f64>,
    pub truncated_weight: f64,
}

fn to_mat(data: &[f64], rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

fn from_mat(m: faer::MatRef<'_, f64>) -> Vec<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        out.extend((0..cols).map(|j| m[(i, j)]));
    }
    out
}

/// Truncated SVD of a row-major `rows x cols` matrix. Keeps at most
/// `max_rank` values, then drops values whose squared weight relative to the
/// total is at or below `cutoff`. At least one value is always kept.
pub(crate) fn svd_truncated_matrix(
    data: &[f64],
    rows: usize,
    cols: usize,
    max_rank: usize,
    cutoff: f64,
) -> Result<MatSvd> {
    if max_rank == 0 {
        return Err(Error::InvalidParameter("max_rank must be >= 1".into()));
    }
    if data[..rows * cols].iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry passed to SVD".into()));
    }
    let m = to_mat(data, rows, cols);
    let svd = m
        .thin_svd()
        .map_err(|_| Error::Numerical(format!("SVD of {rows}x{cols} matrix did not converge")))?;
    let u = svd.U();
    let v = svd.V();
    let k_all = rows.min(cols);
    let s_all: Vec<f64> = (0..k_all).map(|i| svd.S()[i]).collect();

    let mut order: Vec<usize> = (0..k_all).collect();
    // Stable sort keeps the decomposition's own order among equal values.
    order.sort_by(|&i, &j| s_all[j].partial_cmp(&s_all[i]).expect("finite singular values"));

    let total: f64 = s_all.iter().map(|s| s * s).sum();
    let mut keep = max_rank.min(k_all).max(1);
    if total > 0.0 {
        while keep > 1 && s_all[order[keep - 1]].powi(2) <= cutoff * total {
            keep -= 1;
        }
    }
    let kept = &order[..keep];
    let truncated_weight: f64 = order[keep..].iter().map(|&i| s_all[i] * s_all[i]).sum();

    let mut u_out = vec![0.0; rows * keep];
    for r in 0..rows {
        for (c, &i) in kept.iter().enumerate() {
            u_out[r * keep + c] = u[(r, i)];
        }
    }
    let mut vt_out = vec![0.0; keep * cols];
    for (r, &i) in kept.iter().enumerate() {
        for c in 0..cols {
            vt_out[r * cols + c] = v[(c, i)];
        }
    }
    let s: Vec<f64> = kept.iter().map(|&i| s_all[i]).collect();
    if s.iter().chain(&u_out).chain(&vt_out).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD produced non-finite values".into()));
    }
    Ok(MatSvd {
        u: u_out,
        s,
        vt: vt_out,
        truncated_weight,
    })
}

/// Full (untruncated, but thin) SVD of a row-major matrix.
pub fn svd_matrix(data: &[f64], rows: usize, cols: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let r = svd_truncated_matrix(data, rows, cols, rows.min(cols).max(1), 0.0)?;
    Ok((r.u, r.s, r.vt))
}

/// Splits `t` into `left * diag(s) * right` across the partition
/// `row_axes | remaining axes`.
pub fn truncated_svd(
    t: &DenseTensor,
    row_axes: &[usize],
    max_rank: usize,
    cutoff: f64,
) -> Result<SvdResult> {
    let rank = t.rank();
    let mut is_row = vec![false; rank];
    for &a in row_axes {
        if a >= rank || is_row[a] {
            return Err(Error::DimensionMismatch(format!("invalid row axes {row_axes:?}")));
        }
        is_row[a] = true;
    }
    let col_axes: Vec<usize> = (0..rank).filter(|&a| !is_row[a]).collect();
    let perm: Vec<usize> = row_axes.iter().chain(&col_axes).copied().collect();
    let row_dims: Vec<usize> = row_axes.iter().map(|&a| t.shape()[a]).collect();
    let col_dims: Vec<usize> = col_axes.iter().map(|&a| t.shape()[a]).collect();
    let rows: usize = row_dims.iter().product();
    let cols: usize = col_dims.iter().product();
    let p = t.permute(&perm);
    let r = svd_truncated_matrix(p.data(), rows, cols, max_rank, cutoff)?;
    let k = r.s.len();
    let left_shape: Vec<usize> = row_dims.iter().copied().chain([k]).collect();
    let right_shape: Vec<usize> = [k].into_iter().chain(col_dims.iter().copied()).collect();
    Ok(SvdResult {
        left: DenseTensor::from_vec(&left_shape, r.u)?,
        singular_values: r.s,
        right: DenseTensor::from_vec(&right_shape, r.vt)?,
        truncated_weight: r.truncated_weight,
    })
}

/// Thin QR of a row-major `rows x cols` matrix: `q` is `rows x k`, `r` is
/// `k x cols` with `k = min(rows, cols)`.
pub fn qr(data: &[f64], rows: usize, cols: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if data[..rows * cols].iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry passed to QR".into()));
    }
    let m = to_mat(data, rows, cols);
    let qr = m.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let k = rows.min(cols);
    Ok((from_mat(q.as_ref()), from_mat(r), k))
}

/// Eigen-decomposition of a dense symmetric row-major matrix, ascending
/// eigenvalues; eigenvectors are returned as columns of a row-major matrix.
pub fn symmetric_eigen(data: &[f64], dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if data[..dim * dim].iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry passed to eigensolver".into()));
    }
    let m = to_mat(data, dim, dim);
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.S()[i].partial_cmp(&eig.S()[j]).expect("finite"));
    let values = order.iter().map(|&i| eig.S()[i]).collect();
    let u = eig.U();
    let mut vectors = vec![0.0; dim * dim];
    for r in 0..dim {
        for (c, &i) in order.iter().enumerate() {
            vectors[r * dim + c] = u[(r, i)];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{contract, matmul, MatRef};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruction_error(data: &[f64], rows: usize, cols: usize) -> f64 {
        let r = svd_truncated_matrix(data, rows, cols, rows.min(cols), 0.0).unwrap();
        let k = r.s.len();
        let mut us = r.u.clone();
        for row in us.chunks_mut(k) {
            row.iter_mut().zip(&r.s).for_each(|(v, s)| *v *= s);
        }
        let back = matmul(MatRef::new(&us, rows, k), MatRef::new(&r.vt, k, cols));
        back.iter().zip(data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn reconstructs_wide_tall_and_graded_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &(rows, cols) in &[(2, 8), (8, 2), (1, 5), (4, 16), (16, 4), (7, 7), (3, 40)] {
            for trial in 0..50 {
                // graded columns mimic a wave function with decaying weights
                let data: Vec<f64> = (0..rows * cols)
                    .map(|i| rng.gen_range(-1.0..1.0) * 10f64.powi(-((i % cols) as i32) * (trial % 4)))
                    .collect();
                let err = reconstruction_error(&data, rows, cols);
                assert!(err < 1e-12, "{rows}x{cols} trial {trial}: {err:e}");
            }
        }
    }

    #[test]
    fn reconstructs_parity_block_wavefunction() {
        // Two nearly orthogonal rows from a symmetric-sector ground state.
        let data = [
            0.27108597698538306, 3.187219420309716e-15, 1.6233458630168423e-15, -0.027568088637128382,
            3.216315442779485e-14, 0.31207572033318665, -0.041477670260087696, -1.0878310162108366e-16,
            -9.362844715240939e-15, -0.3120757203331875, -0.04147767026008758, -8.453329645128802e-16,
            -0.8529081505800203, 1.619588948650401e-14, -5.815127829026523e-16, -0.008762165347738028,
        ];
        let err = reconstruction_error(&data, 2, 8);
        assert!(err < 1e-12, "{err:e}");
        let err = reconstruction_error(&data, 8, 2);
        assert!(err < 1e-12, "{err:e}");
    }

    #[test]
    fn rank_one_matrix() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [0.5, -1.0, 2.0];
        let data: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let t = DenseTensor::from_vec(&[4, 3], data).unwrap();
        let r = truncated_svd(&t, &[0], 8, DEFAULT_CUTOFF).unwrap();
        assert_eq!(r.singular_values.len(), 1);
        assert!(r.truncated_weight <= 1e-24);
    }

    #[test]
    fn identity_truncated_to_two() {
        let mut id = DenseTensor::zeros(&[4, 4]);
        for i in 0..4 {
            id.set(&[i, i], 1.0);
        }
        let r = truncated_svd(&id, &[0], 2, 0.0).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert!((r.truncated_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = DenseTensor::random(&[16, 16], &mut rng);
        let r = truncated_svd(&t, &[0], 16, 0.0).unwrap();
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let mut us = r.left.clone();
        let k = r.singular_values.len();
        for row in 0..16 {
            for c in 0..k {
                us.data_mut()[row * k + c] *= r.singular_values[c];
            }
        }
        let back = contract(&us, &r.right, &[(1, 0)]).unwrap();
        let err: f64 = back.data().iter().zip(t.data()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err.sqrt() <= 1e-10);
        // U^T U = I
        let u = r.left.data();
        let utu = matmul(MatRef::new(u, 16, k).t(), MatRef::new(u, 16, k));
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((utu[i * k + j] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn truncation_error_equals_discarded_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = DenseTensor::random(&[3, 4, 2, 5], &mut rng);
        let r = truncated_svd(&t, &[0, 2], 3, 0.0).unwrap();
        assert_eq!(r.left.shape(), &[3, 2, 3]);
        assert_eq!(r.right.shape(), &[3, 4, 5]);
        let mut us = r.left.clone();
        for chunk in us.data_mut().chunks_mut(3) {
            for (c, v) in chunk.iter_mut().enumerate() {
                *v *= r.singular_values[c];
            }
        }
        let back = contract(&us, &r.right, &[(2, 0)]).unwrap(); // (a0, a2, a1, a3)
        let orig = t.permute(&[0, 2, 1, 3]);
        let err: f64 = back.data().iter().zip(orig.data()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((err - r.truncated_weight).abs() <= 1e-10 * r.truncated_weight.max(1.0));
    }

    #[test]
    fn svd_rejects_nan() {
        let t = DenseTensor::from_vec(&[2, 2], vec![1.0, f64::NAN, 0.0, 1.0]).unwrap();
        assert!(matches!(truncated_svd(&t, &[0], 2, 0.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (rows, cols) in [(6, 3), (3, 6), (4, 4)] {
            let a = DenseTensor::random(&[rows, cols], &mut rng);
            let (q, r, k) = qr(a.data(), rows, cols).unwrap();
            assert_eq!(k, rows.min(cols));
            let back = matmul(MatRef::new(&q, rows, k), MatRef::new(&r, k, cols));
            for (x, y) in back.iter().zip(a.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
