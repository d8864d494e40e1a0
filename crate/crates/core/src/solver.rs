//! Meta-algorithm: local descent at fixed rank, polar certification, and
//! rank-one growth until the polar value certifies global optimality.
//!
//! Local descent is Gauss-Seidel block coordinate descent over the columns of
//! the factorization. Each block (one `D_j`, then its `X_j`, then `k_j`) is
//! minimized exactly, so every block step is non-increasing without a step
//! size:
//!
//! * `D_j` solves `(‖X_j‖²₍𝒜₎ + λ + λγ(L + k_j²I)²) D_j = E_j X_j` where `E_j`
//!   is the masked residual with column `j` added back. Without a mask the
//!   system is diagonal in the eigenbasis of `L`; with a mask the spatial
//!   weights vary by row and a banded SPD system is solved by Cholesky.
//! * `X_j` is a ridge regression with a diagonal normal matrix.
//! * `k_j` is the closed-form Rayleigh-quotient wavenumber.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::SpatialOperator;
use crate::objective::{gradients, objective_value, optimal_k, residual, FactorModel, WaveField};
use crate::polar::{solve_polar_with, LineSearch, PolarCertificate, PolarOptions, MAX_GRID_POINTS};
use crate::spectral_norm;

/// Relative objective increase tolerated before a block step is declared divergent.
const DIVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Stop once the polar value is at most `1 + polar_tol`.
    pub polar_tol: f64,
    pub bcd_max_epochs: usize,
    /// Stationarity threshold on `‖∇_D‖_F + ‖∇_X‖_F`, relative to `1 + ‖Y‖_F`.
    pub bcd_grad_tol: f64,
    pub max_outer_iters: usize,
    /// Columns with `‖D_j‖·‖X_j‖ < (prune_tol · ‖Y‖_F)²` are dropped after each descent.
    pub prune_tol: f64,
    pub seed: u64,
    #[serde(default)]
    pub line_search: LineSearch,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            lambda: 1.0,
            polar_tol: 1e-3,
            bcd_max_epochs: 500,
            bcd_grad_tol: 1e-6,
            max_outer_iters: 100,
            prune_tol: 1e-12,
            seed: 0,
            line_search: LineSearch::Grid,
        }
    }
}

impl SolverConfig {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.polar_tol > 0.0) {
            return bad(format!("polar_tol must be > 0, got {}", self.polar_tol));
        }
        if !(self.bcd_grad_tol > 0.0) {
            return bad(format!(
                "bcd_grad_tol must be > 0, got {}",
                self.bcd_grad_tol
            ));
        }
        if !(self.prune_tol >= 0.0) {
            return bad(format!("prune_tol must be >= 0, got {}", self.prune_tol));
        }
        if self.bcd_max_epochs == 0 || self.max_outer_iters == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        Ok(())
    }

    fn polar_options(&self) -> PolarOptions {
        let search = match self.line_search {
            // Derive the LIPO stream from the run seed.
            LineSearch::Lipo { budget, seed } => LineSearch::Lipo {
                budget,
                seed: seed ^ self.seed,
            },
            LineSearch::Grid => LineSearch::Grid,
        };
        PolarOptions {
            tol: self.polar_tol,
            search,
            max_grid_points: MAX_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    CertifiedGlobal,
    MaxItersReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    /// Objective after initialization, after every descent epoch and after every append.
    pub objective_history: Vec<f64>,
    /// Polar value at each outer iteration.
    pub polar_history: Vec<f64>,
    /// Rank entering each polar evaluation.
    pub rank_history: Vec<usize>,
    pub status: SolveStatus,
    pub final_polar: f64,
    /// Descent epochs per outer iteration.
    pub epochs_history: Vec<usize>,
}

/// Residual-tracking state for one descent run.
struct Descent<'a> {
    /// `None` when every entry is observed.
    mask: Option<&'a DMatrix<f64>>,
    op: &'a SpatialOperator,
    gamma: f64,
    lambda: f64,
    residual: DMatrix<f64>,
}

impl<'a> Descent<'a> {
    fn new(model: &FactorModel, field: &'a WaveField, op: &'a SpatialOperator) -> Self {
        Self {
            mask: field.mask().filter(|m| m.iter().any(|&v| v != 1.0)),
            op,
            gamma: model.gamma,
            lambda: model.lambda,
            residual: residual(model, field),
        }
    }

    /// Subtract `𝒜(u vᵀ)` from the tracked residual.
    fn subtract_outer(&mut self, u: &DVector<f64>, v: &DVector<f64>) {
        match self.mask {
            None => self.residual.ger(-1.0, u, v, 1.0),
            Some(mask) => {
                for j in 0..v.len() {
                    let vj = v[j];
                    if vj == 0.0 {
                        continue;
                    }
                    let mut col = self.residual.column_mut(j);
                    for i in 0..u.len() {
                        col[i] -= mask[(i, j)] * u[i] * vj;
                    }
                }
            }
        }
    }

    fn update_column(&mut self, model: &mut FactorModel, j: usize) -> Result<()> {
        let d_old = model.d.column(j).into_owned();
        let x_old = model.x.column(j).into_owned();
        let shift = model.k[j] * model.k[j];

        let d_new = match self.mask {
            None => {
                // E_j X_j = R X_j + D_j ‖X_j‖²
                let xx = x_old.norm_squared();
                let rhs = &self.residual * &x_old + &d_old * xx;
                let gam = self.op.eigvecs();
                let coeffs = gam.tr_mul(&rhs);
                let scaled = DVector::from_fn(coeffs.len(), |i, _| {
                    let w = self.op.eigvals()[i] + shift;
                    coeffs[i] / (xx + self.lambda + self.lambda * self.gamma * w * w)
                });
                gam * scaled
            }
            Some(mask) => {
                let n = d_old.len();
                // Row weights Σ_t M_it X_tj²
                let x2 = x_old.component_mul(&x_old);
                let weights = mask * &x2;
                let rhs = &self.residual * &x_old + d_old.component_mul(&weights);
                let mut h = DMatrix::zeros(n, n);
                if self.gamma > 0.0 {
                    let mut e = DVector::zeros(n);
                    for c in 0..n {
                        e[c] = 1.0;
                        let col = self.op.apply_shifted_squared(&e, shift);
                        e[c] = 0.0;
                        h.set_column(c, &(col * (self.lambda * self.gamma)));
                    }
                }
                for i in 0..n {
                    h[(i, i)] += weights[i] + self.lambda;
                }
                h.cholesky()
                    .ok_or_else(|| {
                        Error::InvalidArgument("descent system not positive definite".into())
                    })?
                    .solve(&rhs)
            }
        };
        let delta_d = &d_new - &d_old;
        self.subtract_outer(&delta_d, &x_old);
        model.d.set_column(j, &d_new);

        let x_new = match self.mask {
            None => {
                let dd = d_new.norm_squared();
                (self.residual.tr_mul(&d_new) + &x_old * dd) / (dd + self.lambda)
            }
            Some(mask) => {
                let d2 = d_new.component_mul(&d_new);
                let weights = mask.tr_mul(&d2);
                let num = self.residual.tr_mul(&d_new) + x_old.component_mul(&weights);
                DVector::from_fn(num.len(), |t, _| num[t] / (weights[t] + self.lambda))
            }
        };
        let delta_x = &x_new - &x_old;
        self.subtract_outer(&d_new, &delta_x);
        model.x.set_column(j, &x_new);

        if let Ok(k) = optimal_k(&d_new, self.op) {
            model.k[j] = k;
        }
        Ok(())
    }
}

fn stationarity(model: &FactorModel, field: &WaveField, op: &SpatialOperator) -> Result<f64> {
    let (gd, gx) = gradients(model, field, op)?;
    Ok(gd.norm() + gx.norm())
}

/// Block coordinate descent at fixed rank until first-order stationarity.
pub fn bcd_to_stationary(
    model: FactorModel,
    field: &WaveField,
    op: &SpatialOperator,
    cfg: &SolverConfig,
) -> Result<FactorModel> {
    let mut history = Vec::new();
    Ok(bcd_run(model, field, op, cfg, &mut history)?.0)
}

/// Returns the model and the number of epochs run; appends the objective after
/// each epoch to `history`.
fn bcd_run(
    mut model: FactorModel,
    field: &WaveField,
    op: &SpatialOperator,
    cfg: &SolverConfig,
    history: &mut Vec<f64>,
) -> Result<(FactorModel, usize)> {
    if model.rank() == 0 {
        objective_value(&model, field, op)?;
        return Ok((model, 0));
    }
    let threshold = cfg.bcd_grad_tol * (1.0 + field.y().norm());
    let mut current = objective_value(&model, field, op)?;
    let mut epochs = 0;
    while epochs < cfg.bcd_max_epochs {
        if stationarity(&model, field, op)? <= threshold {
            break;
        }
        let mut descent = Descent::new(&model, field, op);
        for j in 0..model.rank() {
            descent.update_column(&mut model, j)?;
        }
        epochs += 1;
        let next = objective_value(&model, field, op)?;
        if next > current + DIVERGENCE_TOL * current.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::StepSizeFailure {
                before: current,
                after: next,
            });
        }
        history.push(next);
        current = next;
    }
    Ok((model, epochs))
}

/// Append `(τ d*, τ x*, k*)` with the optimal step `τ`.
///
/// `τ² = (⟨𝒜*(Y − D Xᵀ), 𝒜*(d* x*ᵀ)⟩ − λ) / ‖𝒜*(d* x*ᵀ)‖²_F`, which reduces to
/// the unmasked step when no mask is present.
pub fn append_step(
    mut model: FactorModel,
    field: &WaveField,
    op: &SpatialOperator,
    cert: &PolarCertificate,
    cfg: &SolverConfig,
) -> Result<FactorModel> {
    let d = cert.d_star();
    let x = cert.x_star();
    if d.len() != op.size() || x.len() != field.time_len() {
        return Err(Error::ShapeMismatch(
            "certificate does not match field".into(),
        ));
    }
    let r = residual(&model, field);
    let mut atom = &d * x.transpose();
    field.project(&mut atom);
    let numerator = r.dot(&atom) - cfg.lambda;
    let denom = atom.norm_squared();
    if !(numerator > 0.0) || denom == 0.0 {
        return Err(Error::CertificateInconsistency { numerator });
    }
    let tau = (numerator / denom).sqrt();
    let n = model.rank();
    model.d = model.d.insert_column(n, 0.0);
    model.x = model.x.insert_column(n, 0.0);
    model.k = model.k.push(cert.k_star);
    model.d.set_column(n, &(d * tau));
    model.x.set_column(n, &(x * tau));
    Ok(model)
}

fn initial_model(
    field: &WaveField,
    op: &SpatialOperator,
    cfg: &SolverConfig,
) -> Result<FactorModel> {
    let (n, t) = (field.space_len(), field.time_len());
    let observed = field.observed();
    if spectral_norm(&observed) == 0.0 {
        return Ok(FactorModel::empty(n, t, cfg.gamma, cfg.lambda));
    }
    let svd = observed.svd(true, true);
    let (idx, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty field");
    let u = svd.u.as_ref().expect("requested").column(idx) * sigma.sqrt();
    let v = svd.v_t.as_ref().expect("requested").row(idx).transpose() * sigma.sqrt();
    let k = optimal_k(&u.clone_owned(), op)?;
    FactorModel::new(
        DMatrix::from_columns(&[u]),
        DMatrix::from_columns(&[v]),
        DVector::from_element(1, k),
        cfg.gamma,
        cfg.lambda,
    )
}

fn prune(model: FactorModel, threshold: f64) -> FactorModel {
    let keep: Vec<usize> = (0..model.rank())
        .filter(|&j| {
            let scale = model.d.column(j).norm() * model.x.column(j).norm();
            scale >= threshold * threshold && scale > 0.0
        })
        .collect();
    if keep.len() == model.rank() {
        return model;
    }
    let d = model.d.select_columns(&keep);
    let x = model.x.select_columns(&keep);
    let k = DVector::from_iterator(keep.len(), keep.iter().map(|&j| model.k[j]));
    FactorModel { d, x, k, ..model }
}

/// Fit the wave-informed factorization of `field` to certified global optimality.
pub fn fit(
    field: &WaveField,
    op: &SpatialOperator,
    cfg: &SolverConfig,
) -> Result<(FactorModel, SolveTrace)> {
    cfg.validate()?;
    if op.size() != field.space_len() {
        return Err(Error::ShapeMismatch(format!(
            "operator size {} vs {} spatial samples",
            op.size(),
            field.space_len()
        )));
    }
    let polar_opts = cfg.polar_options();
    let prune_threshold = cfg.prune_tol * field.y().norm();

    let mut model = initial_model(field, op, cfg)?;
    let mut trace = SolveTrace {
        objective_history: vec![objective_value(&model, field, op)?],
        polar_history: Vec::new(),
        rank_history: Vec::new(),
        status: SolveStatus::MaxItersReached,
        final_polar: f64::NAN,
        epochs_history: Vec::new(),
    };

    for outer in 0..cfg.max_outer_iters {
        let (descended, epochs) = bcd_run(model, field, op, cfg, &mut trace.objective_history)?;
        trace.epochs_history.push(epochs);
        model = prune(descended, prune_threshold);

        let scaled = residual(&model, field) / cfg.lambda;
        let cert = solve_polar_with(&scaled, op, cfg.gamma, &polar_opts)?;
        trace.rank_history.push(model.rank());
        trace.polar_history.push(cert.value);
        trace.final_polar = cert.value;
        if cert.is_certified(cfg.polar_tol) {
            trace.status = SolveStatus::CertifiedGlobal;
            break;
        }
        if outer + 1 == cfg.max_outer_iters {
            break;
        }
        model = append_step(model, field, op, &cert, cfg)?;
        trace
            .objective_history
            .push(objective_value(&model, field, op)?);
    }
    Ok((model, trace))
}

/// Masked matrix completion; identical to [`fit`] but requires a mask.
pub fn complete(
    field: &WaveField,
    op: &SpatialOperator,
    cfg: &SolverConfig,
) -> Result<(FactorModel, SolveTrace)> {
    if field.mask().is_none() {
        return Err(Error::EmptyMask);
    }
    fit(field, op, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::BoundaryCondition;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn fake_cert(d: DVector<f64>, x: DVector<f64>, value: f64) -> PolarCertificate {
        PolarCertificate {
            value,
            d_star: d.as_slice().to_vec(),
            x_star: x.as_slice().to_vec(),
            k_star: 0.0,
            kbar_star: 0.0,
            evaluations: 0,
            lipschitz_bound: 0.0,
            grid_error_bound: 0.0,
        }
    }

    #[test]
    fn empty_model_is_stationary() {
        let op = SpatialOperator::build(4, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let field = WaveField::new(DMatrix::from_element(4, 3, 1.0), 1.0, 1.0).unwrap();
        let model = FactorModel::empty(4, 3, 1.0, 1.0);
        let out =
            bcd_to_stationary(model.clone(), &field, &op, &SolverConfig::new(1.0, 1.0)).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn exact_fit_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let op = SpatialOperator::build(5, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let d = random_matrix(&mut rng, 5, 2);
        let x = random_matrix(&mut rng, 6, 2);
        let field = WaveField::new(&d * x.transpose(), 1.0, 1.0).unwrap();
        let model = FactorModel::new(d, x, DVector::from_element(2, 0.5), 2.0, 0.0).unwrap();
        let cfg = SolverConfig {
            bcd_max_epochs: 1,
            ..SolverConfig::new(2.0, 1.0)
        };
        let out = bcd_to_stationary(model.clone(), &field, &op, &cfg).unwrap();
        assert_eq!(out, model);
    }

    #[test]
    fn step_size_example() {
        // ‖d‖ = ‖x‖ = 1 and ⟨R, d xᵀ⟩ = 2λ give τ = sqrt(λ).
        let op = SpatialOperator::build(3, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let lambda = 0.7;
        let d = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        let x = DVector::from_row_slice(&[0.0, 1.0]);
        let y = &d * x.transpose() * (2.0 * lambda);
        let field = WaveField::new(y.clone(), 1.0, 1.0).unwrap();
        let cfg = SolverConfig::new(0.0, lambda);
        let model = FactorModel::empty(3, 2, 0.0, lambda);
        let cert = fake_cert(d.clone(), x.clone(), 2.0);
        let out = append_step(model.clone(), &field, &op, &cert, &cfg).unwrap();
        assert!((out.d[(0, 0)] - lambda.sqrt()).abs() < 1e-14);
        assert!((out.x[(1, 0)] - lambda.sqrt()).abs() < 1e-14);

        let masked = WaveField::with_mask(y, DMatrix::from_element(3, 2, 1.0), 1.0, 1.0).unwrap();
        let out_m = append_step(model.clone(), &masked, &op, &cert, &cfg).unwrap();
        assert_eq!(out, out_m);

        let bad = fake_cert(d * 0.1, x, 0.5);
        assert!(matches!(
            append_step(model, &field, &op, &bad, &cfg),
            Err(Error::CertificateInconsistency { .. })
        ));
    }

    #[test]
    fn zero_field_certifies_immediately() {
        let op = SpatialOperator::build(6, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let field = WaveField::new(DMatrix::zeros(6, 4), 1.0, 1.0).unwrap();
        let (model, trace) = fit(&field, &op, &SolverConfig::new(3.0, 0.5)).unwrap();
        assert_eq!(model.rank(), 0);
        assert_eq!(trace.status, SolveStatus::CertifiedGlobal);
        assert_eq!(trace.polar_history, vec![0.0]);
    }

    #[test]
    fn complete_requires_mask() {
        let op = SpatialOperator::build(3, 1.0, BoundaryCondition::Dirichlet).unwrap();
        let field = WaveField::new(DMatrix::from_element(3, 3, 1.0), 1.0, 1.0).unwrap();
        assert_eq!(
            complete(&field, &op, &SolverConfig::new(1.0, 1.0)).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(1.0, 0.0).validate().is_err());
        assert!(SolverConfig::new(-1.0, 1.0).validate().is_err());
        let cfg = SolverConfig {
            max_outer_iters: 0,
            ..SolverConfig::new(1.0, 1.0)
        };
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::new(0.0, 1.0).validate().is_ok());
    }
}
