//! Thin Householder QR, triangular solves, and Cholesky for the small dense
//! factors the pipelines pass around.

use super::{dot, DenseMatrix, SparseMatrix};
use crate::error::{Error, Result};

/// Relative diagonal threshold below which a QR factor is declared rank
/// deficient.
const RANK_TOL: f64 = 1e-12;

/// Thin QR of an n x d matrix (n >= d) by Householder reflections.
/// Returns (Q, R) with Q n x d orthonormal, R d x d upper triangular with
/// strictly positive diagonal. Fails with `RankDeficient` when some
/// |R_ii| < 1e-12 * max_j |R_jj|.
pub fn qr_thin(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, d) = (m.n_rows, m.n_cols);
    if n < d {
        return Err(Error::DimensionMismatch(format!(
            "qr_thin needs n >= d, got {n} x {d}"
        )));
    }
    let mut a = m.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut v: Vec<f64> = (k..n).map(|i| a.at(i, k)).collect();
        let norm_x = dot(&v, &v).sqrt();
        if norm_x == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            reflectors.push(Vec::new());
            *a.at_mut(k, k) = alpha;
            continue;
        }
        for j in k..d {
            let mut proj = 0.0;
            for i in k..n {
                proj += v[i - k] * a.at(i, j);
            }
            let scale = 2.0 * proj / vtv;
            for i in k..n {
                *a.at_mut(i, j) -= scale * v[i - k];
            }
        }
        // Column k below the diagonal is now zero up to roundoff; record the
        // exact value for R.
        *a.at_mut(k, k) = alpha;
        reflectors.push(v);
    }

    let mut r = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            *r.at_mut(i, j) = a.at(i, j);
        }
    }

    // Q = H_0 ... H_{d-1} applied to the first d identity columns.
    let mut q = DenseMatrix::zeros(n, d);
    for j in 0..d {
        *q.at_mut(j, j) = 1.0;
    }
    for k in (0..d).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let vtv = dot(v, v);
        for j in 0..d {
            let mut proj = 0.0;
            for i in k..n {
                proj += v[i - k] * q.at(i, j);
            }
            let scale = 2.0 * proj / vtv;
            for i in k..n {
                *q.at_mut(i, j) -= scale * v[i - k];
            }
        }
    }

    // Sign convention: positive diagonal of R.
    for k in 0..d {
        if r.at(k, k) < 0.0 {
            for j in 0..d {
                *r.at_mut(k, j) = -r.at(k, j);
            }
            for i in 0..n {
                *q.at_mut(i, k) = -q.at(i, k);
            }
        }
    }

    let max_diag = (0..d).fold(0.0f64, |m, i| m.max(r.at(i, i).abs()));
    if max_diag == 0.0 {
        return Err(Error::RankDeficient("all-zero matrix in qr_thin".into()));
    }
    for i in 0..d {
        if r.at(i, i).abs() < RANK_TOL * max_diag {
            return Err(Error::RankDeficient(format!(
                "diagonal {i} of R is {} against scale {max_diag}",
                r.at(i, i)
            )));
        }
    }
    Ok((q, r))
}

/// Solves R x = b for upper-triangular R by back-substitution.
pub fn solve_upper(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let d = r.n_rows;
    if r.n_cols != d || b.len() != d {
        return Err(Error::DimensionMismatch("solve_upper shapes".into()));
    }
    let mut x = b.to_vec();
    for i in (0..d).rev() {
        let mut acc = x[i];
        for j in i + 1..d {
            acc -= r.at(i, j) * x[j];
        }
        let diag = r.at(i, i);
        if diag == 0.0 {
            return Err(Error::SingularR(format!("zero diagonal at {i}")));
        }
        x[i] = acc / diag;
    }
    Ok(x)
}

/// Solves R^T x = b (forward substitution on the transposed upper factor).
pub fn solve_upper_transpose(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let d = r.n_rows;
    if r.n_cols != d || b.len() != d {
        return Err(Error::DimensionMismatch("solve_upper_transpose shapes".into()));
    }
    let mut x = b.to_vec();
    solve_upper_transpose_into(r, &mut x)?;
    Ok(x)
}

/// In-place variant of [`solve_upper_transpose`] for per-row hot loops.
pub(crate) fn solve_upper_transpose_into(r: &DenseMatrix, x: &mut [f64]) -> Result<()> {
    let d = r.n_rows;
    for i in 0..d {
        let mut acc = x[i];
        for j in 0..i {
            acc -= r.at(j, i) * x[j];
        }
        let diag = r.at(i, i);
        if diag == 0.0 {
            return Err(Error::SingularR(format!("zero diagonal at {i}")));
        }
        x[i] = acc / diag;
    }
    Ok(())
}

/// Forward substitution L z = b for lower-triangular L with nonzero
/// diagonal, as produced by [`cholesky`]. Writes into `out`.
pub(crate) fn solve_lower_into(l: &DenseMatrix, b: &[f64], out: &mut [f64]) {
    let d = l.n_rows;
    debug_assert!(l.n_cols == d && b.len() == d && out.len() == d);
    for i in 0..d {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l.at(i, j) * out[j];
        }
        out[i] = acc / l.at(i, i);
    }
}

/// Computes M * (R^-1 x) by back-substitution followed by a sparse
/// multiply; R^-1 is never formed.
pub fn apply_r_inverse(m: &SparseMatrix, r: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if m.n_cols != r.n_rows {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, R is {} x {}",
            m.n_cols, r.n_rows, r.n_cols
        )));
    }
    let z = solve_upper(r, x)?;
    Ok(m.matvec(&z))
}

/// Cholesky factor L (lower triangular) of a symmetric positive definite
/// matrix: A = L L^T.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let d = a.n_rows;
    if a.n_cols != d {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    let mut l = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut acc = a.at(i, j);
            for k in 0..j {
                acc -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(Error::RankDeficient(format!(
                        "non-positive pivot {acc} at {i} in cholesky"
                    )));
                }
                *l.at_mut(i, i) = acc.sqrt();
            } else {
                *l.at_mut(i, j) = acc / l.at(j, j);
            }
        }
    }
    Ok(l)
}

/// Least-squares solve min ||A x - b||_2 via Householder QR without forming
/// Q. Consumes its inputs as scratch space.
pub(crate) fn least_squares_inplace(a: &mut DenseMatrix, b: &mut [f64]) -> Result<Vec<f64>> {
    let (n, d) = (a.n_rows, a.n_cols);
    if n < d || b.len() != n {
        return Err(Error::DimensionMismatch("least_squares shapes".into()));
    }
    for k in 0..d {
        let mut v: Vec<f64> = (k..n).map(|i| a.at(i, k)).collect();
        let norm_x = dot(&v, &v).sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            *a.at_mut(k, k) = alpha;
            continue;
        }
        for j in k..d {
            let mut proj = 0.0;
            for i in k..n {
                proj += v[i - k] * a.at(i, j);
            }
            let scale = 2.0 * proj / vtv;
            for i in k..n {
                *a.at_mut(i, j) -= scale * v[i - k];
            }
        }
        *a.at_mut(k, k) = alpha;
        let mut proj = 0.0;
        for i in k..n {
            proj += v[i - k] * b[i];
        }
        let scale = 2.0 * proj / vtv;
        for i in k..n {
            b[i] -= scale * v[i - k];
        }
    }
    let max_diag = (0..d).fold(0.0f64, |m, i| m.max(a.at(i, i).abs()));
    if max_diag == 0.0 {
        return Err(Error::RankDeficient("all-zero design matrix".into()));
    }
    for i in 0..d {
        if a.at(i, i).abs() < RANK_TOL * max_diag {
            return Err(Error::RankDeficient(format!(
                "least-squares design is rank deficient at column {i}"
            )));
        }
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut acc = b[i];
        for j in i + 1..d {
            acc -= a.at(i, j) * x[j];
        }
        x[i] = acc / a.at(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randsource::Stream;

    fn random_dense(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut s = Stream::new(seed, "qr.test");
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| s.next_f64() * 2.0 - 1.0).collect())
            .collect();
        DenseMatrix::from_rows(&rows)
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        for (n, d, seed) in [(50, 8, 1u64), (200, 5, 2), (10, 10, 3)] {
            let m = random_dense(n, d, seed);
            let (q, r) = qr_thin(&m).unwrap();
            let qr = q.matmul(&r);
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in qr.data.iter().zip(&m.data) {
                err += (a - b) * (a - b);
                scale += b * b;
            }
            assert!(err.sqrt() <= 1e-12 * scale.sqrt(), "reconstruction");
            let qtq = q.transpose().matmul(&q);
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq.at(i, j) - want).abs() < 1e-10, "orthonormality");
                }
            }
            for i in 0..d {
                assert!(r.at(i, i) > 0.0, "positive diagonal");
            }
        }
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let mut m = random_dense(30, 4, 4);
        for i in 0..30 {
            let v = m.at(i, 0);
            *m.at_mut(i, 3) = 2.0 * v;
        }
        assert!(matches!(qr_thin(&m), Err(Error::RankDeficient(_))));
        let wide = DenseMatrix::zeros(2, 3);
        assert!(matches!(qr_thin(&wide), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn triangular_solves_match_explicit_inverse() {
        let r = DenseMatrix::from_rows(&[
            vec![2.0, 1.0, -1.0],
            vec![0.0, 3.0, 0.5],
            vec![0.0, 0.0, 1.5],
        ]);
        // Explicit inverse by solving for identity columns.
        let mut rinv = DenseMatrix::zeros(3, 3);
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let col = solve_upper(&r, &e).unwrap();
            for i in 0..3 {
                *rinv.at_mut(i, j) = col[i];
            }
        }
        let x = [1.0, -2.0, 0.5];
        let direct = solve_upper(&r, &x).unwrap();
        let via_inv = rinv.matvec(&x);
        for (a, b) in direct.iter().zip(&via_inv) {
            assert!((a - b).abs() < 1e-14);
        }
        let yt = solve_upper_transpose(&r, &x).unwrap();
        let via_inv_t = rinv.transpose().matvec(&x);
        for (a, b) in yt.iter().zip(&via_inv_t) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn apply_r_inverse_matches_oracle() {
        let dense = random_dense(40, 5, 9);
        let m = SparseMatrix::from_dense(&dense);
        let (_, r) = qr_thin(&dense).unwrap();
        // Oracle: form M R^-1 densely, then multiply.
        let mut rinv = DenseMatrix::zeros(5, 5);
        for j in 0..5 {
            let mut e = vec![0.0; 5];
            e[j] = 1.0;
            let col = solve_upper(&r, &e).unwrap();
            for i in 0..5 {
                *rinv.at_mut(i, j) = col[i];
            }
        }
        let mri = dense.matmul(&rinv);
        let x = [0.3, -1.0, 2.0, 0.0, 1.0];
        let got = apply_r_inverse(&m, &r, &x).unwrap();
        let want = mri.matvec(&x);
        let scale = crate::linalg::vec_pnorm(&want, 2.0).unwrap().max(1.0);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn cholesky_known_factor() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        assert!((l.at(0, 0) - 2.0).abs() < 1e-15);
        assert!((l.at(1, 0) - 1.0).abs() < 1e-15);
        assert!((l.at(1, 1) - 2.0f64.sqrt()).abs() < 1e-15);
        let not_pd = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(cholesky(&not_pd).is_err());
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = random_dense(30, 4, 12);
        let mut s = Stream::new(13, "ls.b");
        let b: Vec<f64> = (0..30).map(|_| s.next_f64() * 2.0 - 1.0).collect();
        let x = least_squares_inplace(&mut a.clone(), &mut b.clone()).unwrap();
        // Normal equations oracle: A^T A x = A^T b via Cholesky.
        let at = a.transpose();
        let ata = at.matmul(&a);
        let atb = at.matvec(&b);
        let l = cholesky(&ata).unwrap();
        let mut y = atb.clone();
        for i in 0..4 {
            let mut acc = y[i];
            for j in 0..i {
                acc -= l.at(i, j) * y[j];
            }
            y[i] = acc / l.at(i, i);
        }
        let lt = l.transpose();
        let want = solve_upper(&lt, &y).unwrap();
        for (g, w) in x.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }
}
