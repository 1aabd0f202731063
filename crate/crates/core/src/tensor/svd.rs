//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! Cluster matrices are small and tall/skinny, so the whole decomposition
//! runs in f64 regardless of the tensor element type. The wide case is
//! handled by transposing first, which keeps the rotation side at
//! `min(m, n)` columns.

use crate::error::{Error, Result};

/// Thin SVD of an `m x n` matrix: `a = u * diag(s) * v^T`.
///
/// `u` is `m x r`, `v` is `n x r` (both column-major by singular index),
/// `s` has `r = min(m, n)` entries sorted descending, all non-negative.
pub struct Svd {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub m: usize,
    pub n: usize,
}

impl Svd {
    pub fn rank_len(&self) -> usize {
        self.s.len()
    }

    #[inline]
    pub fn u_col(&self, i: usize) -> &[f64] {
        &self.u[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub fn v_col(&self, i: usize) -> &[f64] {
        &self.v[i * self.n..(i + 1) * self.n]
    }
}

/// Decompose a row-major `m x n` matrix.
///
/// Fails with a numerical error carrying the Frobenius norm if the sweep
/// cap (`100 * min(m, n)`) is exceeded, which for finite input does not
/// happen in practice.
pub fn svd(a: &[f64], m: usize, n: usize) -> Result<Svd> {
    if m == 0 || n == 0 || a.len() != m * n {
        return Err(Error::dim(format!(
            "svd expects m*n elements, got {} for {}x{}",
            a.len(),
            m,
            n
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("svd input contains non-finite entries".to_string()));
    }
    if m >= n {
        jacobi_tall(a, m, n)
    } else {
        // Work on the transpose, then swap the roles of u and v.
        let mut at = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                at[j * m + i] = a[i * n + j];
            }
        }
        let r = jacobi_tall(&at, n, m)?;
        Ok(Svd {
            s: r.s,
            u: r.v,
            v: r.u,
            m,
            n,
        })
    }
}

/// One-sided Jacobi on a tall matrix (`m >= n`), row-major input.
fn jacobi_tall(a: &[f64], m: usize, n: usize) -> Result<Svd> {
    // Column-major working copy so rotations touch contiguous memory.
    let mut b = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            b[j * m + i] = a[i * n + j];
        }
    }
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }

    let cap = 100 * n.max(1);
    let tol = 1e-14;
    let mut converged = false;
    for _sweep in 0..cap {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (head, tail) = b.split_at(q * m);
                    let cp = &head[p * m..p * m + m];
                    let cq = &tail[..m];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma.abs() <= tol * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_cols(&mut b, m, p, q, c, s);
                rotate_cols(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        return Err(Error::numeric(format!(
            "svd failed to converge within {cap} sweeps for {m}x{n} matrix (frobenius norm {frob:.6e})"
        )));
    }

    // Singular values are the column norms; normalized columns form u.
    let mut order: Vec<usize> = (0..n).collect();
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        sigma[j] = b[j * m..(j + 1) * m]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
    }
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));

    let mut s = Vec::with_capacity(n);
    let mut u = vec![0.0; m * n];
    let mut vv = vec![0.0; n * n];
    for (slot, &j) in order.iter().enumerate() {
        let sj = sigma[j];
        s.push(sj);
        let col = &b[j * m..(j + 1) * m];
        let dst = &mut u[slot * m..(slot + 1) * m];
        if sj > 0.0 {
            for (d, x) in dst.iter_mut().zip(col) {
                *d = x / sj;
            }
        }
        vv[slot * n..(slot + 1) * n].copy_from_slice(&v[j * n..(j + 1) * n]);
    }

    Ok(Svd {
        s,
        u,
        v: vv,
        m,
        n,
    })
}

#[inline]
fn rotate_cols(mat: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = mat.split_at_mut(q * rows);
    let cp = &mut head[p * rows..p * rows + rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = c * *x - s * *y;
        let yq = s * *x + c * *y;
        *x = xp;
        *y = yq;
    }
}

/// Singular values only, for callers that do not need the backward factors.
pub fn singular_values(a: &[f64], m: usize, n: usize) -> Result<Vec<f64>> {
    svd(a, m, n).map(|r| r.s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(r: &Svd) -> Vec<f64> {
        let mut out = vec![0.0; r.m * r.n];
        for k in 0..r.rank_len() {
            let (u, v, s) = (r.u_col(k), r.v_col(k), r.s[k]);
            for i in 0..r.m {
                for j in 0..r.n {
                    out[i * r.n + j] += s * u[i] * v[j];
                }
            }
        }
        out
    }

    #[test]
    fn diagonal_matrix() {
        // diag(3, 1) -> [3, 1]
        let r = svd(&[3.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        assert!((r.s[0] - 3.0).abs() < 1e-12);
        assert!((r.s[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_column_is_vector_norm() {
        let x = [3.0, 4.0];
        let r = svd(&x, 2, 1).unwrap();
        assert!((r.s[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_matches_transpose() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let wide = svd(&a, 2, 3).unwrap();
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3x2
        let tall = svd(&at, 3, 2).unwrap();
        for (x, y) in wide.s.iter().zip(&tall.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_and_ordering() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for &(m, n) in &[(5usize, 7usize), (7, 5), (12, 5), (4, 4), (9, 1)] {
            let a: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = svd(&a, m, n).unwrap();
            // descending, non-negative
            for w in r.s.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(r.s.iter().all(|&s| s >= 0.0));
            // sum sigma^2 = frobenius^2
            let f2: f64 = a.iter().map(|x| x * x).sum();
            let s2: f64 = r.s.iter().map(|s| s * s).sum();
            assert!((f2 - s2).abs() <= 1e-10 * f2.max(1.0));
            // u diag(s) v^T = a
            let rec = reconstruct(&r);
            for (x, y) in rec.iter().zip(&a) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        let r = svd(&[f64::NAN, 0.0], 2, 1);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
