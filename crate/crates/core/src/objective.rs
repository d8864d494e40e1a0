//! Wave-informed objective, per-column regularizer and analytic gradients.
//!
//! ```text
//! F(D, X, k) = ½‖𝒜(Y − D Xᵀ)‖²_F + (λ/2) Σ_i (‖X_i‖² + ‖D_i‖² + γ‖L D_i + k_i² D_i‖²)
//! ```
//!
//! `𝒜` keeps the observed entries of `Y` and zero-fills the rest; without a
//! mask it is the identity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laplacian::SpatialOperator;

/// Observed space×time field with optional sampling mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    y: DMatrix<f64>,
    mask: Option<DMatrix<f64>>,
    dl: f64,
    dt: f64,
}

impl WaveField {
    pub fn new(y: DMatrix<f64>, dl: f64, dt: f64) -> Result<Self> {
        Self::build(y, None, dl, dt)
    }

    pub fn with_mask(y: DMatrix<f64>, mask: DMatrix<f64>, dl: f64, dt: f64) -> Result<Self> {
        Self::build(y, Some(mask), dl, dt)
    }

    fn build(y: DMatrix<f64>, mask: Option<DMatrix<f64>>, dl: f64, dt: f64) -> Result<Self> {
        if y.nrows() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidDimension(
                "wave field must be non-empty".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("wave field"));
        }
        if !(dl.is_finite() && dl > 0.0) {
            return Err(Error::InvalidSpacing(dl));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSpacing(dt));
        }
        if let Some(m) = &mask {
            if m.shape() != y.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "mask is {:?}, field is {:?}",
                    m.shape(),
                    y.shape()
                )));
            }
            if m.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument("mask entries must be 0 or 1".into()));
            }
            if m.iter().all(|&v| v == 0.0) {
                return Err(Error::EmptyMask);
            }
        }
        Ok(Self { y, mask, dl, dt })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn mask(&self) -> Option<&DMatrix<f64>> {
        self.mask.as_ref()
    }

    pub fn dl(&self) -> f64 {
        self.dl
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of spatial samples.
    pub fn space_len(&self) -> usize {
        self.y.nrows()
    }

    /// Number of time samples.
    pub fn time_len(&self) -> usize {
        self.y.ncols()
    }

    /// Replace (or drop) the mask, keeping `Y`.
    pub fn set_mask(self, mask: Option<DMatrix<f64>>) -> Result<Self> {
        Self::build(self.y, mask, self.dl, self.dt)
    }

    /// `𝒜*𝒜(m)`: zero the unobserved entries of `m` in place.
    pub fn project(&self, m: &mut DMatrix<f64>) {
        if let Some(mask) = &self.mask {
            m.component_mul_assign(mask);
        }
    }

    /// `𝒜*(Y)`.
    pub fn observed(&self) -> DMatrix<f64> {
        let mut y = self.y.clone();
        self.project(&mut y);
        y
    }
}

/// Factors `D` (space × N), `X` (time × N), per-column wavenumbers `k`, and the
/// hyperparameters `γ` and `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub d: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub k: DVector<f64>,
    pub gamma: f64,
    pub lambda: f64,
}

impl FactorModel {
    pub fn new(
        d: DMatrix<f64>,
        x: DMatrix<f64>,
        k: DVector<f64>,
        gamma: f64,
        lambda: f64,
    ) -> Result<Self> {
        if d.ncols() != x.ncols() || d.ncols() != k.len() {
            return Err(Error::ShapeMismatch(format!(
                "D has {} columns, X has {}, k has {}",
                d.ncols(),
                x.ncols(),
                k.len()
            )));
        }
        if d.iter()
            .chain(x.iter())
            .chain(k.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("factor model"));
        }
        if k.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "wavenumbers must be nonnegative".into(),
            ));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            d,
            x,
            k,
            gamma,
            lambda,
        })
    }

    /// Model with no columns.
    pub fn empty(space: usize, time: usize, gamma: f64, lambda: f64) -> Self {
        Self {
            d: DMatrix::zeros(space, 0),
            x: DMatrix::zeros(time, 0),
            k: DVector::zeros(0),
            gamma,
            lambda,
        }
    }

    pub fn rank(&self) -> usize {
        self.d.ncols()
    }

    /// `D Xᵀ`.
    pub fn product(&self) -> DMatrix<f64> {
        &self.d * self.x.transpose()
    }

    /// `‖D_i X_iᵀ‖²_F` per column.
    pub fn column_energies(&self) -> Vec<f64> {
        (0..self.rank())
            .map(|i| self.d.column(i).norm_squared() * self.x.column(i).norm_squared())
            .collect()
    }

    fn check_against(&self, field: &WaveField, op: &SpatialOperator) -> Result<()> {
        if self.d.nrows() != field.space_len() || self.x.nrows() != field.time_len() {
            return Err(Error::ShapeMismatch(format!(
                "factors imply {}x{}, field is {}x{}",
                self.d.nrows(),
                self.x.nrows(),
                field.space_len(),
                field.time_len()
            )));
        }
        if op.size() != field.space_len() {
            return Err(Error::ShapeMismatch(format!(
                "operator size {} vs {} spatial samples",
                op.size(),
                field.space_len()
            )));
        }
        Ok(())
    }
}

/// `½(‖x‖² + ‖d‖²) + γ‖L d + k² d‖²` for the supplied `k`.
pub fn regularizer_column(
    d: &DVector<f64>,
    x: &DVector<f64>,
    k: f64,
    op: &SpatialOperator,
    gamma: f64,
) -> Result<f64> {
    if d.len() != op.size() {
        return Err(Error::ShapeMismatch(format!(
            "column length {} vs operator size {}",
            d.len(),
            op.size()
        )));
    }
    let wave = op.apply_shifted(d, k * k).norm_squared();
    Ok(0.5 * (x.norm_squared() + d.norm_squared()) + gamma * wave)
}

/// Wavenumber minimizing `‖L d + k² d‖²` over `k ≥ 0`: `sqrt(-dᵀLd / ‖d‖²)`.
pub fn optimal_k(d: &DVector<f64>, op: &SpatialOperator) -> Result<f64> {
    if d.len() != op.size() {
        return Err(Error::ShapeMismatch(format!(
            "column length {} vs operator size {}",
            d.len(),
            op.size()
        )));
    }
    let nn = d.norm_squared();
    if nn == 0.0 || !nn.is_finite() {
        return Err(Error::DegenerateColumn);
    }
    let rayleigh = -d.dot(&op.apply(d)) / nn;
    Ok(rayleigh.clamp(0.0, op.kbar_max()).sqrt())
}

/// Per-column term of the objective, `½(‖x‖² + ‖d‖² + γ‖L d + k² d‖²)`.
///
/// Unlike [`regularizer_column`] the wave penalty is halved along with the
/// norms; this is the form the polar constraint and the append step use.
pub fn column_penalty(
    d: &DVector<f64>,
    x: &DVector<f64>,
    k: f64,
    op: &SpatialOperator,
    gamma: f64,
) -> Result<f64> {
    if d.len() != op.size() {
        return Err(Error::ShapeMismatch(format!(
            "column length {} vs operator size {}",
            d.len(),
            op.size()
        )));
    }
    let wave = op.apply_shifted(d, k * k).norm_squared();
    Ok(0.5 * (x.norm_squared() + d.norm_squared() + gamma * wave))
}

/// [`column_penalty`] with `k` minimized out: the rank-one regularizer `θ̄(d, x)`.
pub fn theta_bar(
    d: &DVector<f64>,
    x: &DVector<f64>,
    op: &SpatialOperator,
    gamma: f64,
) -> Result<f64> {
    let k = match optimal_k(d, op) {
        Ok(k) => k,
        Err(Error::DegenerateColumn) => 0.0,
        Err(e) => return Err(e),
    };
    column_penalty(d, x, k, op, gamma)
}

/// `𝒜*(Y − D Xᵀ)`.
pub fn residual(model: &FactorModel, field: &WaveField) -> DMatrix<f64> {
    let mut r = field.y() - model.product();
    field.project(&mut r);
    r
}

/// Sum of the per-column penalties with the stored `k`, without the `λ/2` factor.
pub(crate) fn penalty_sum(model: &FactorModel, op: &SpatialOperator) -> f64 {
    (0..model.rank())
        .map(|i| {
            let d = model.d.column(i).into_owned();
            let wave = op.apply_shifted(&d, model.k[i] * model.k[i]).norm_squared();
            model.x.column(i).norm_squared() + d.norm_squared() + model.gamma * wave
        })
        .sum()
}

pub fn objective_value(
    model: &FactorModel,
    field: &WaveField,
    op: &SpatialOperator,
) -> Result<f64> {
    model.check_against(field, op)?;
    let loss = 0.5 * residual(model, field).norm_squared();
    Ok(loss + 0.5 * model.lambda * penalty_sum(model, op))
}

/// Gradients of the objective with respect to `D` and `X`, holding `k` fixed.
///
/// Column `j` of the `D` gradient is
/// `𝒜*(D Xᵀ − Y) X_j + λ D_j + λγ (L + k_j² I)² D_j`; column `j` of the `X`
/// gradient is `𝒜*(D Xᵀ − Y)ᵀ D_j + λ X_j`.
pub fn gradients(
    model: &FactorModel,
    field: &WaveField,
    op: &SpatialOperator,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    model.check_against(field, op)?;
    let neg_r = -residual(model, field);
    let mut grad_d = &neg_r * &model.x;
    let grad_x = neg_r.transpose() * &model.d + &model.x * model.lambda;
    for j in 0..model.rank() {
        let d = model.d.column(j).into_owned();
        let wave = op.apply_shifted_squared(&d, model.k[j] * model.k[j]);
        let reg = d * model.lambda + wave * (model.lambda * model.gamma);
        let mut col = grad_d.column_mut(j);
        col += reg;
    }
    Ok((grad_d, grad_x))
}
