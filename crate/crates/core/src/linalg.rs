//! Small dense linear-algebra helpers shared by the polar solver and metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Dimension at or below which symmetric eigenproblems are solved densely.
pub(crate) const DENSE_LIMIT: usize = 64;

const KRYLOV_DIM: usize = 40;
const MAX_RESTARTS: usize = 200;

/// Largest eigenvalue and unit eigenvector of a symmetric PSD matrix.
pub(crate) fn dense_top_eigenpair(m: DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(m);
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (val.max(0.0), eig.eigenvectors.column(idx).into_owned())
}

/// Largest eigenpair of a symmetric PSD operator by restarted Lanczos with full
/// reorthogonalization.
///
/// Stops once the Ritz residual `β_j |y_j|` drops below `tol · θ`.
pub(crate) fn lanczos_top_eigenpair<F>(
    dim: usize,
    apply: F,
    start: &DVector<f64>,
    tol: f64,
) -> (f64, DVector<f64>)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut v = start.clone();
    if v.norm() == 0.0 || !v.norm().is_finite() {
        v = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 * 0.618).fract());
    }
    v.normalize_mut();
    let m = dim.min(KRYLOV_DIM);
    let mut best = (0.0, v.clone());

    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<DVector<f64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut converged = false;

        for j in 0..m {
            let mut w = apply(&basis[j]);
            let alpha = basis[j].dot(&w);
            alphas.push(alpha);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let beta = w.norm();

            let size = alphas.len();
            let mut t = DMatrix::zeros(size, size);
            for i in 0..size {
                t[(i, i)] = alphas[i];
                if i + 1 < size {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let (theta, y) = dense_top_eigenpair(t);
            let residual = beta * y[size - 1].abs();
            let exhausted = j + 1 == dim || beta <= 1e-14 * theta.abs().max(1e-300);
            if residual <= tol * theta.abs() || exhausted || j + 1 == m {
                let mut ritz = DVector::zeros(dim);
                for (q, c) in basis.iter().zip(y.iter()) {
                    ritz.axpy(*c, q, 1.0);
                }
                ritz.normalize_mut();
                best = (theta, ritz);
                converged = residual <= tol * theta.abs() || exhausted;
                break;
            }
            betas.push(beta);
            basis.push(w / beta);
        }
        if converged || best.0 == 0.0 {
            break;
        }
        v = best.1.clone();
    }
    best
}

/// Largest singular value of `m`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (r, c) = m.shape();
    let gram = if r <= c {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let dim = gram.nrows();
    let theta = if dim <= DENSE_LIMIT {
        dense_top_eigenpair(gram).0
    } else {
        let start = DVector::from_fn(dim, |i, _| gram[(i, i)].sqrt());
        lanczos_top_eigenpair(dim, |v| &gram * v, &start, 1e-12).0
    };
    theta.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lanczos_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [5, 30, 90] {
            let b = DMatrix::from_fn(n, n + 3, |_, _| rng.random_range(-1.0..1.0));
            let a = &b * b.transpose();
            let (dense, _) = dense_top_eigenpair(a.clone());
            let start = DVector::from_element(n, 1.0);
            let (lz, vec) = lanczos_top_eigenpair(n, |v| &a * v, &start, 1e-12);
            assert!(
                (dense - lz).abs() <= 1e-10 * dense,
                "n={n}: {dense} vs {lz}"
            );
            assert!((&a * &vec - &vec * lz).norm() <= 1e-5 * dense);
        }
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (r, c) in [(3, 7), (80, 70), (1, 1)] {
            let m = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let want = m.clone().svd(false, false).singular_values.max();
            assert!((spectral_norm(&m) - want).abs() <= 1e-10 * want);
        }
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 3)), 0.0);
    }
}
