//! Discrete second-derivative operator on a uniform 1-D grid.
//!
//! The operator is tridiagonal with interior rows `(1, -2, 1) / dl^2`. The
//! first and last rows depend on the boundary condition:
//!
//! | kind               | first row       | last row        |
//! |--------------------|-----------------|-----------------|
//! | `Dirichlet`        | `(-2, 1) / dl^2` | `(1, -2) / dl^2` |
//! | `Neumann`          | `(-1, 1) / dl^2` | `(1, -1) / dl^2` |
//! | `DirichletNeumann` | `(-2, 1) / dl^2` | `(1, -1) / dl^2` |
//!
//! Dirichlet rows treat the ghost sample beyond the end as zero; Neumann rows
//! mirror the end sample across a half-cell boundary. Both keep the matrix
//! symmetric and negative semidefinite with spectrum inside `[-4/dl^2, 0]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
    Neumann,
    DirichletNeumann,
}

impl BoundaryCondition {
    /// Diagonal entries (before the `1/dl^2` scale) of the first and last rows.
    fn end_diagonals(self) -> (f64, f64) {
        match self {
            BoundaryCondition::Dirichlet => (-2.0, -2.0),
            BoundaryCondition::Neumann => (-1.0, -1.0),
            BoundaryCondition::DirichletNeumann => (-2.0, -1.0),
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "dirichlet-neumann" => Ok(Self::DirichletNeumann),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary condition '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
            Self::DirichletNeumann => "dirichlet-neumann",
        })
    }
}

/// Second-difference operator `L` with its eigendecomposition `L = Γ Λ Γᵀ`.
///
/// Immutable after construction. The eigendecomposition is computed once and
/// reused by every shifted-metric evaluation.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    dl: f64,
    bc: BoundaryCondition,
    diag: DVector<f64>,
    off: f64,
    matrix: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl SpatialOperator {
    pub fn build(size: usize, dl: f64, bc: BoundaryCondition) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidDimension(format!(
                "operator size must be at least 2, got {size}"
            )));
        }
        if !(dl.is_finite() && dl > 0.0) {
            return Err(Error::InvalidSpacing(dl));
        }
        let scale = 1.0 / (dl * dl);
        let (first, last) = bc.end_diagonals();
        let mut diag = DVector::from_element(size, -2.0 * scale);
        diag[0] = first * scale;
        diag[size - 1] = last * scale;

        let mut matrix = DMatrix::zeros(size, size);
        for i in 0..size {
            matrix[(i, i)] = diag[i];
            if i + 1 < size {
                matrix[(i, i + 1)] = scale;
                matrix[(i + 1, i)] = scale;
            }
        }

        let eig = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigvals = DVector::from_iterator(size, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigvecs = DMatrix::zeros(size, size);
        for (dst, &src) in order.iter().enumerate() {
            eigvecs.set_column(dst, &eig.eigenvectors.column(src));
        }

        Ok(Self {
            dl,
            bc,
            diag,
            off: scale,
            matrix,
            eigvecs,
            eigvals,
        })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn dl(&self) -> f64 {
        self.dl
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Dense copy of `L`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Orthogonal eigenvector matrix `Γ`, columns ordered as [`Self::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Eigenvalues `Λ` in ascending order.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Upper end of the shifted-wavenumber interval, `4 / dl^2`.
    pub fn kbar_max(&self) -> f64 {
        4.0 / (self.dl * self.dl)
    }

    /// Upper end of the wavenumber interval, `2 / dl`.
    pub fn k_max(&self) -> f64 {
        2.0 / self.dl
    }

    /// `L v` using the tridiagonal stencil.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_shifted(v, 0.0)
    }

    /// `(L + shift I) v` using the tridiagonal stencil.
    pub fn apply_shifted(&self, v: &DVector<f64>, shift: f64) -> DVector<f64> {
        let n = self.size();
        assert_eq!(v.len(), n, "vector length must match operator size");
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut acc = (self.diag[i] + shift) * v[i];
            if i > 0 {
                acc += self.off * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// `(L + shift I)^2 v` as two successive stencil applications.
    pub fn apply_shifted_squared(&self, v: &DVector<f64>, shift: f64) -> DVector<f64> {
        let once = self.apply_shifted(v, shift);
        self.apply_shifted(&once, shift)
    }

    /// Diagonal of `A(k̄)^{-1/2}` in the eigenbasis: `1/sqrt(1 + γ(k̄ + λ_i)^2)`.
    pub fn inv_sqrt_metric_diag(&self, kbar: f64, gamma: f64) -> DVector<f64> {
        self.eigvals.map(|lam| filter_response(kbar, gamma, lam))
    }

    /// `A(k̄) = Γ (I + γ(k̄ I + Λ)^2) Γᵀ`.
    pub fn shifted_metric(&self, kbar: f64, gamma: f64) -> DMatrix<f64> {
        let weights = self.eigvals.map(|lam| 1.0 + gamma * (kbar + lam).powi(2));
        let scaled = &self.eigvecs * DMatrix::from_diagonal(&weights);
        let mut a = scaled * self.eigvecs.transpose();
        a.fill_upper_triangle_with_lower_triangle();
        a
    }
}

/// Gain of the wave-informed filter at eigenvalue `eigval` for centre `kbar`.
///
/// Equals the diagonal coefficient of `A(k̄)^{-1/2}`; shaped like a first-order
/// Butterworth bandpass with its -3 dB points at `|kbar + eigval| = 1/sqrt(gamma)`.
pub fn filter_response(kbar: f64, gamma: f64, eigval: f64) -> f64 {
    1.0 / (1.0 + gamma * (kbar + eigval).powi(2)).sqrt()
}
