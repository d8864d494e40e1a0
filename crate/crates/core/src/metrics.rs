//! Evaluation metrics: partitioned energy and its mean binary entropy, aligned
//! mode-recovery error, envelope flatness, and the singular-value-thresholding
//! oracle used as the low-rank reference.

use nalgebra::{DMatrix, DVector};
use pathfinding::prelude::{kuhn_munkres_min, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous spatial regions `[cuts[i], cuts[i+1])` covering `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    bounds: Vec<usize>,
}

impl Partition {
    /// Build from interior cut indices, e.g. `from_cuts(100, &[40])` gives
    /// `[0, 40)` and `[40, 100)`.
    pub fn from_cuts(len: usize, cuts: &[usize]) -> Result<Self> {
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(cuts);
        bounds.push(len);
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "partition cuts {cuts:?} must be strictly increasing inside (0, {len})"
            )));
        }
        Ok(Self { bounds })
    }

    pub fn num_regions(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn len(&self) -> usize {
        *self.bounds.last().expect("at least two bounds")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn region(&self, r: usize) -> std::ops::Range<usize> {
        self.bounds[r]..self.bounds[r + 1]
    }
}

/// Indices of the `top_m` largest weights, largest first; ties keep column order.
pub fn top_columns(weights: &[f64], top_m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(top_m);
    order
}

/// Fraction of each selected column's energy in each region.
///
/// Columns are ranked by `weights` (typically `‖D_i X_iᵀ‖²_F`); the result has
/// one row per selected column, and rows sum to one.
pub fn partition_energy(
    d: &DMatrix<f64>,
    partition: &Partition,
    top_m: usize,
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    if d.ncols() == 0 || d.nrows() == 0 {
        return Err(Error::InvalidDimension("empty factor matrix".into()));
    }
    if weights.len() != d.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} columns",
            weights.len(),
            d.ncols()
        )));
    }
    if partition.len() != d.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} rows, D has {}",
            partition.len(),
            d.nrows()
        )));
    }
    if top_m > d.ncols() {
        return Err(Error::InvalidArgument(format!(
            "top_m = {top_m} exceeds {} columns",
            d.ncols()
        )));
    }
    let cols = top_columns(weights, top_m);
    let mut out = DMatrix::zeros(cols.len(), partition.num_regions());
    for (row, &c) in cols.iter().enumerate() {
        let col = d.column(c);
        let total = col.norm_squared();
        if total == 0.0 {
            return Err(Error::DegenerateColumn);
        }
        for r in 0..partition.num_regions() {
            let range = partition.region(r);
            out[(row, r)] = col.rows(range.start, range.len()).norm_squared() / total;
        }
    }
    Ok(out)
}

fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    h(p) + h(1.0 - p)
}

/// Mean over rows of the base-2 binary entropy of a two-region energy split.
pub fn mean_entropy(fractions: &DMatrix<f64>) -> Result<f64> {
    if fractions.ncols() != 2 {
        return Err(Error::InvalidArgument(format!(
            "entropy needs exactly two regions, got {}",
            fractions.ncols()
        )));
    }
    if fractions.nrows() == 0 {
        return Err(Error::InvalidDimension("no rows".into()));
    }
    let mut acc = 0.0;
    for (row, r) in fractions.row_iter().enumerate() {
        let sum = r.sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::RowSum { row, sum });
        }
        acc += binary_entropy(r[0].clamp(0.0, 1.0));
    }
    Ok(acc / fractions.nrows() as f64)
}

/// Result of aligning estimated modes to reference modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAlignment {
    /// `‖D̂_aligned − D‖²_F`.
    pub squared_frobenius: f64,
    /// `100 · ‖D̂_aligned − D‖_F / ‖D‖_F`.
    pub percent: f64,
    /// `assignment[j]` is the estimated column matched to reference column `j`
    /// (indices past the estimate's width denote zero padding).
    pub assignment: Vec<usize>,
    pub signs: Vec<f64>,
}

/// Align the columns of `d_hat` to `d_true` by sign and optimal permutation.
///
/// Nonzero columns of `d_hat` are normalized first; the narrower matrix is
/// padded with zero columns so unmatched modes count fully against the error.
pub fn align_modes(d_hat: &DMatrix<f64>, d_true: &DMatrix<f64>) -> Result<ModeAlignment> {
    if d_hat.nrows() != d_true.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} rows, reference has {}",
            d_hat.nrows(),
            d_true.nrows()
        )));
    }
    let true_norm = d_true.norm();
    if true_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "reference modes are all zero".into(),
        ));
    }
    let n = d_true.nrows();
    let p = d_hat.ncols().max(d_true.ncols());
    let column = |m: &DMatrix<f64>, j: usize, normalize: bool| -> DVector<f64> {
        if j >= m.ncols() {
            return DVector::zeros(n);
        }
        let c = m.column(j).into_owned();
        let norm = c.norm();
        if normalize && norm > 0.0 {
            c / norm
        } else {
            c
        }
    };
    let est: Vec<DVector<f64>> = (0..p).map(|j| column(d_hat, j, true)).collect();
    let refs: Vec<DVector<f64>> = (0..p).map(|j| column(d_true, j, false)).collect();

    // Squared distance after the better sign, for every (reference, estimate) pair.
    let mut cost = vec![vec![0.0; p]; p];
    for (i, r) in refs.iter().enumerate() {
        for (j, e) in est.iter().enumerate() {
            cost[i][j] = r.norm_squared() + e.norm_squared() - 2.0 * r.dot(e).abs();
        }
    }
    let max_cost = cost
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-300);
    let scale = 1e12 / max_cost;
    let weights = Matrix::from_rows(cost.iter().map(|row| {
        row.iter()
            .map(|&c| (c * scale).round() as i64)
            .collect::<Vec<_>>()
    }))
    .expect("square cost matrix");
    let (_, assignment) = kuhn_munkres_min(&weights);

    let mut sq = 0.0;
    let mut signs = Vec::with_capacity(p);
    for (i, &j) in assignment.iter().enumerate() {
        let sign = if refs[i].dot(&est[j]) < 0.0 {
            -1.0
        } else {
            1.0
        };
        sq += (&est[j] * sign - &refs[i]).norm_squared();
        signs.push(sign);
    }
    Ok(ModeAlignment {
        squared_frobenius: sq,
        percent: 100.0 * sq.sqrt() / true_norm,
        assignment,
        signs,
    })
}

/// Percentage mode error `100 · ‖D̂ − D‖_F / ‖D‖_F` after optimal alignment.
pub fn mode_error(d_hat: &DMatrix<f64>, d_true: &DMatrix<f64>) -> Result<f64> {
    Ok(align_modes(d_hat, d_true)?.percent)
}

/// RMS over the first quarter of `col` divided by RMS over the last quarter.
pub fn envelope_flatness(col: &DVector<f64>) -> f64 {
    let q = (col.len() / 4).max(1);
    let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    let data = col.as_slice();
    rms(&data[..q]) / rms(&data[data.len() - q..])
}

/// Closed-form minimizer of `½‖Y − Ŷ‖²_F + λ‖Ŷ‖_*`: soft-threshold the singular values.
pub fn svt_oracle(y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let (d, x) = svt_factors(y, lambda);
    &d * x.transpose()
}

/// Balanced factors `(U √s, V √s)` of the thresholded solution, nonzero
/// singular values only, largest first.
pub fn svt_factors(y: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let kept: Vec<(usize, f64)> = order
        .into_iter()
        .map(|i| (i, (svd.singular_values[i] - lambda).max(0.0)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    let mut d = DMatrix::zeros(y.nrows(), kept.len());
    let mut x = DMatrix::zeros(y.ncols(), kept.len());
    for (c, &(i, s)) in kept.iter().enumerate() {
        d.set_column(c, &(u.column(i) * s.sqrt()));
        x.set_column(c, &(v_t.row(i).transpose() * s.sqrt()));
    }
    (d, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn partition_energy_cases() {
        let p = Partition::from_cuts(4, &[2]).unwrap();
        let d = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let e = partition_energy(&d, &p, 2, &[5.0, 1.0]).unwrap();
        assert_eq!(e.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert!((e[(1, 0)] - 0.5).abs() < 1e-15);

        // sin(2πℓ) on a symmetric grid splits evenly.
        let n = 200;
        let col = DMatrix::from_fn(n, 1, |i, _| (2.0 * PI * (i as f64 + 0.5) / n as f64).sin());
        let p = Partition::from_cuts(n, &[n / 2]).unwrap();
        let e = partition_energy(&col, &p, 1, &[1.0]).unwrap();
        assert!((e[(0, 0)] - 0.5).abs() < 1e-12);

        assert!(partition_energy(&DMatrix::zeros(4, 0), &p, 0, &[]).is_err());
        assert!(Partition::from_cuts(4, &[0]).is_err());
        assert!(Partition::from_cuts(4, &[3, 2]).is_err());
    }

    #[test]
    fn partition_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let p = Partition::from_cuts(30, &[7, 19]).unwrap();
        let w: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let e = partition_energy(&d, &p, 4, &w).unwrap();
        for r in e.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_cases() {
        let pure = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(mean_entropy(&pure).unwrap(), 0.0);
        let mixed = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((mean_entropy(&mixed).unwrap() - 1.0).abs() < 1e-15);
        let single = DMatrix::from_row_slice(1, 2, &[0.9, 0.1]);
        assert!((mean_entropy(&single).unwrap() - 0.468_995_593_589_281).abs() < 1e-12);
        let swapped = DMatrix::from_row_slice(1, 2, &[0.1, 0.9]);
        assert!((mean_entropy(&single).unwrap() - mean_entropy(&swapped).unwrap()).abs() < 1e-15);
        let bad = DMatrix::from_row_slice(1, 2, &[0.6, 0.6]);
        assert!(matches!(
            mean_entropy(&bad),
            Err(Error::RowSum { row: 0, .. })
        ));
    }

    #[test]
    fn mode_error_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut truth = DMatrix::from_fn(20, 4, |_, _| rng.random_range(-1.0..1.0));
        for mut c in truth.column_iter_mut() {
            c.normalize_mut();
        }
        assert!(mode_error(&truth, &truth).unwrap() < 1e-12);

        let perm = [2usize, 0, 3, 1];
        let signs = [1.0, -1.0, -1.0, 1.0];
        let mut shuffled = DMatrix::zeros(20, 4);
        for (dst, (&src, &s)) in perm.iter().zip(&signs).enumerate() {
            shuffled.set_column(dst, &(truth.column(src) * s * 3.0));
        }
        assert!(mode_error(&shuffled, &truth).unwrap() < 1e-12);

        // A missing mode counts fully.
        let fewer = truth.columns(0, 3).into_owned();
        let a = align_modes(&fewer, &truth).unwrap();
        assert!((a.squared_frobenius - 1.0).abs() < 1e-12);
        assert!(mode_error(&truth, &DMatrix::zeros(20, 4)).is_err());
    }

    #[test]
    fn svt_cases() {
        let y = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 1.0]));
        let s = svt_oracle(&y, 2.0);
        assert!((s - DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.0]))).norm() < 1e-14);
        assert!(svt_oracle(&y, 3.5).norm() == 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = DMatrix::from_fn(12, 9, |_, _| rng.random_range(-1.0..1.0));
        assert!((svt_oracle(&y, 0.0) - &y).norm() < 1e-12);
        let lam = 0.4 * spectral_norm(&y);
        let resid = &y - svt_oracle(&y, lam);
        assert!(spectral_norm(&resid) <= lam + 1e-8);
    }

    #[test]
    fn flatness() {
        let n = 400;
        let pure = DVector::from_fn(n, |i, _| {
            (2.0 * PI * 3.0 * (i + 1) as f64 / (n + 1) as f64).sin()
        });
        assert!((envelope_flatness(&pure) - 1.0).abs() < 0.02);
        let ramp = DVector::from_fn(n, |i, _| {
            (1.0 + 2.0 * i as f64 / n as f64)
                * (2.0 * PI * 3.0 * (i + 1) as f64 / (n + 1) as f64).sin()
        });
        assert!(envelope_flatness(&ramp) < 0.6);
    }
}
