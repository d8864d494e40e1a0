//! Exact solution of the polar problem
//!
//! ```text
//! Ω°(Z) = max dᵀ Z x  s.t.  ‖d‖² + γ‖L d + k² d‖² ≤ 1,  ‖x‖ ≤ 1,  0 ≤ k ≤ 2/dl
//! ```
//!
//! The problem reduces to a one-dimensional search over `k̄ = k²`:
//! `f(k̄) = ‖A(k̄)^{-1/2} Z‖₂` with `A(k̄) = Γ(I + γ(k̄I + Λ)²)Γᵀ`. `f` is
//! Lipschitz with a constant known in closed form, so a uniform grid has a
//! certified error of `L·h/2`. The best grid bracket is then refined by
//! golden-section search, and the maximizing `(d, x)` come from the top
//! singular pair of `A(k̄*)^{-1/2} Z`.
//!
//! All evaluations share `W = Γᵀ Z`: since `Γ` is orthogonal,
//! `f(k̄) = σ_max(S W)` with `S = diag(1/sqrt(1 + γ(k̄ + λ_i)²))`.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::SpatialOperator;
use crate::linalg::{dense_top_eigenpair, lanczos_top_eigenpair, spectral_norm, DENSE_LIMIT};

/// Default tolerance on the polar value.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Cap on the number of uniform grid points.
pub const MAX_GRID_POINTS: usize = 10_000;

const EIG_TOL: f64 = 1e-10;
const GOLDEN_ITERS: usize = 80;

/// Strategy for the one-dimensional search over `k̄`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LineSearch {
    #[default]
    /// Uniform Lipschitz grid plus eigenvalue-aligned points, then golden-section refinement.
    Grid,
    /// Randomized LIPO with a fixed evaluation budget, then golden-section refinement.
    Lipo { budget: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarOptions {
    pub tol: f64,
    pub search: LineSearch,
    pub max_grid_points: usize,
}

impl Default for PolarOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            search: LineSearch::Grid,
            max_grid_points: MAX_GRID_POINTS,
        }
    }
}

impl PolarOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Polar value together with its maximizing rank-one atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarCertificate {
    /// `Ω°(Z)`.
    pub value: f64,
    /// Spatial factor, scaled so that `‖d‖² + γ‖L d + k² d‖² = 1`.
    pub d_star: Vec<f64>,
    /// Unit-norm temporal factor.
    pub x_star: Vec<f64>,
    pub k_star: f64,
    pub kbar_star: f64,
    /// Number of `f(k̄)` evaluations.
    pub evaluations: usize,
    pub lipschitz_bound: f64,
    /// `L·h_max/2` for the grid actually used; infinite for LIPO.
    pub grid_error_bound: f64,
}

impl PolarCertificate {
    pub fn d_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.d_star)
    }

    pub fn x_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x_star)
    }

    /// `value ≤ 1 + tol`.
    pub fn is_certified(&self, tol: f64) -> bool {
        self.value <= 1.0 + tol
    }
}

/// Lipschitz constant of `k̄ ↦ ‖A(k̄)^{-1/2} Z‖₂` at unit grid spacing.
pub fn lipschitz_bound(z: &DMatrix<f64>, gamma: f64) -> f64 {
    lipschitz_constant(spectral_norm(z), gamma)
}

fn lipschitz_constant(z_norm: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    if gamma >= 1.0 / 32.0 {
        2.0 / (3.0 * 3f64.sqrt()) * gamma.sqrt() * z_norm
    } else {
        4.0 * gamma * (1.0 + 16.0 * gamma).powf(-1.5) * z_norm
    }
}

/// Lipschitz constant for an operator with spacing `dl`.
///
/// Substituting `k̄ = k̄₁/dl²` maps the problem onto unit spacing with
/// `γ₁ = γ/dl⁴`, so the constant is `dl² · L(γ/dl⁴)`.
fn scaled_lipschitz(z_norm: f64, gamma: f64, dl: f64) -> f64 {
    let dl2 = dl * dl;
    dl2 * lipschitz_constant(z_norm, gamma / (dl2 * dl2))
}

/// `f(k̄)` evaluator sharing `W = Γᵀ Z` across calls.
struct Profile<'a> {
    op: &'a SpatialOperator,
    gamma: f64,
    w: DMatrix<f64>,
    /// `W Wᵀ` when the spatial side is the smaller one.
    gram: Option<DMatrix<f64>>,
    row_norms: DVector<f64>,
}

impl<'a> Profile<'a> {
    fn new(z: &DMatrix<f64>, op: &'a SpatialOperator, gamma: f64) -> Self {
        let w = op.eigvecs().transpose() * z;
        let gram = (w.nrows() <= w.ncols()).then(|| &w * w.transpose());
        let row_norms = DVector::from_fn(w.nrows(), |i, _| w.row(i).norm());
        Self {
            op,
            gamma,
            w,
            gram,
            row_norms,
        }
    }

    fn weights(&self, kbar: f64) -> DVector<f64> {
        self.op.inv_sqrt_metric_diag(kbar, self.gamma)
    }

    /// Top eigenpair of `(S W)(S W)ᵀ` (spatial side) or `(S W)ᵀ(S W)` (time side).
    fn top_eigen(&self, s: &DVector<f64>) -> (f64, DVector<f64>) {
        let w = &self.w;
        match &self.gram {
            Some(g) => {
                let n = g.nrows();
                if n <= DENSE_LIMIT {
                    let m = DMatrix::from_fn(n, n, |i, j| s[i] * g[(i, j)] * s[j]);
                    dense_top_eigenpair(m)
                } else {
                    let start = s.component_mul(&self.row_norms);
                    lanczos_top_eigenpair(
                        n,
                        |v| {
                            let sv = s.component_mul(v);
                            (g * sv).component_mul(s)
                        },
                        &start,
                        EIG_TOL,
                    )
                }
            }
            None => {
                let t = w.ncols();
                let s2 = s.component_mul(s);
                if t <= DENSE_LIMIT {
                    let sw = DMatrix::from_fn(w.nrows(), t, |i, j| s[i] * w[(i, j)]);
                    dense_top_eigenpair(sw.transpose() * sw)
                } else {
                    let start = w.transpose() * s2.component_mul(&self.row_norms);
                    lanczos_top_eigenpair(
                        t,
                        |v| w.tr_mul(&(w * v).component_mul(&s2)),
                        &start,
                        EIG_TOL,
                    )
                }
            }
        }
    }

    fn value(&self, kbar: f64) -> f64 {
        self.top_eigen(&self.weights(kbar)).0.max(0.0).sqrt()
    }

    /// `(σ, u, x)` with `u` the left singular vector of `S W` (eigenbasis
    /// coordinates) and `x` the right singular vector.
    fn top_pair(&self, kbar: f64) -> (f64, DVector<f64>, DVector<f64>) {
        let s = self.weights(kbar);
        let (theta, v) = self.top_eigen(&s);
        let sigma = theta.max(0.0).sqrt();
        if sigma == 0.0 {
            return (
                0.0,
                DVector::zeros(self.w.nrows()),
                DVector::zeros(self.w.ncols()),
            );
        }
        if self.gram.is_some() {
            let x = self.w.tr_mul(&s.component_mul(&v)) / sigma;
            (sigma, v, x)
        } else {
            let u = s.component_mul(&(&self.w * &v)) / sigma;
            (sigma, u, v)
        }
    }
}

/// `‖A(k̄)^{-1/2} Z‖₂`.
pub fn line_search_value(
    z: &DMatrix<f64>,
    kbar: f64,
    op: &SpatialOperator,
    gamma: f64,
) -> Result<f64> {
    check_input(z, op)?;
    Ok(Profile::new(z, op, gamma).value(kbar))
}

fn check_input(z: &DMatrix<f64>, op: &SpatialOperator) -> Result<()> {
    if z.nrows() != op.size() {
        return Err(Error::ShapeMismatch(format!(
            "Z has {} rows, operator size is {}",
            z.nrows(),
            op.size()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polar input"));
    }
    Ok(())
}

/// Solve the polar problem with the default grid search.
pub fn solve_polar(
    z: &DMatrix<f64>,
    op: &SpatialOperator,
    gamma: f64,
    tol: f64,
) -> Result<PolarCertificate> {
    solve_polar_with(z, op, gamma, &PolarOptions::with_tol(tol))
}

/// Polar value of an already scaled residual `𝒜*(Y − D Xᵀ)/λ`.
///
/// A value at most `1 + tol` certifies that the model producing the residual
/// is globally optimal.
pub fn certify(
    residual_scaled: &DMatrix<f64>,
    op: &SpatialOperator,
    gamma: f64,
    tol: f64,
) -> Result<PolarCertificate> {
    solve_polar(residual_scaled, op, gamma, tol)
}

pub fn solve_polar_with(
    z: &DMatrix<f64>,
    op: &SpatialOperator,
    gamma: f64,
    opts: &PolarOptions,
) -> Result<PolarCertificate> {
    check_input(z, op)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "polar tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    let (n, t) = z.shape();
    let z_norm = spectral_norm(z);
    let lip = scaled_lipschitz(z_norm, gamma, op.dl());
    if z_norm == 0.0 {
        return Ok(PolarCertificate {
            value: 0.0,
            d_star: vec![0.0; n],
            x_star: vec![0.0; t],
            k_star: 0.0,
            kbar_star: 0.0,
            evaluations: 0,
            lipschitz_bound: lip,
            grid_error_bound: 0.0,
        });
    }

    let profile = Profile::new(z, op, gamma);
    let (kbar, evaluations, error_bound) = if lip == 0.0 {
        // f is constant; ties go to the smallest k̄.
        (0.0, 1, 0.0)
    } else {
        match opts.search {
            LineSearch::Grid => grid_search(&profile, lip, opts),
            LineSearch::Lipo { budget, seed } => lipo_search(&profile, lip, budget, seed),
        }
    };

    Ok(assemble(&profile, kbar, evaluations, lip, error_bound))
}

fn grid_search(profile: &Profile<'_>, lip: f64, opts: &PolarOptions) -> (f64, usize, f64) {
    let range = profile.op.kbar_max();
    let wanted = (lip * range / (2.0 * opts.tol)).ceil() as usize + 1;
    let count = wanted.clamp(2, opts.max_grid_points.max(2));
    let mut points: Vec<f64> = (0..count)
        .map(|i| range * i as f64 / (count - 1) as f64)
        .collect();
    // Peaks sit near k̄ = -λ_i; include them exactly.
    points.extend(
        profile
            .op
            .eigvals()
            .iter()
            .map(|&lam| -lam)
            .filter(|&k| (0.0..=range).contains(&k)),
    );
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * range);

    let values: Vec<f64> = points.par_iter().map(|&k| profile.value(k)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let h_max = points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    let (kbar, _, extra) = golden_refine(profile, lo, hi, points[best], values[best]);
    (kbar, points.len() + extra, 0.5 * lip * h_max)
}

/// LIPO: sample uniformly, evaluate only where the Lipschitz upper envelope
/// can still beat the incumbent.
fn lipo_search(profile: &Profile<'_>, lip: f64, budget: usize, seed: u64) -> (f64, usize, f64) {
    let range = profile.op.kbar_max();
    let budget = budget.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluated: Vec<(f64, f64)> = Vec::with_capacity(budget);
    let first = rng.random_range(0.0..=range);
    evaluated.push((first, profile.value(first)));
    let mut draws = 0usize;
    while evaluated.len() < budget && draws < 100 * budget {
        draws += 1;
        let cand = rng.random_range(0.0..=range);
        let best = evaluated
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let envelope = evaluated
            .iter()
            .map(|&(k, v)| v + lip * (cand - k).abs())
            .fold(f64::INFINITY, f64::min);
        if envelope >= best {
            evaluated.push((cand, profile.value(cand)));
        }
    }
    let mut sorted = evaluated.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0;
    for (i, e) in sorted.iter().enumerate() {
        if e.1 > sorted[best].1 {
            best = i;
        }
    }
    let lo = if best == 0 { 0.0 } else { sorted[best - 1].0 };
    let hi = if best + 1 == sorted.len() {
        range
    } else {
        sorted[best + 1].0
    };
    let (kbar, _, extra) = golden_refine(profile, lo, hi, sorted[best].0, sorted[best].1);
    (kbar, evaluated.len() + extra, f64::INFINITY)
}

/// Golden-section maximization on `[lo, hi]`; keeps the incumbent unless beaten.
fn golden_refine(
    profile: &Profile<'_>,
    mut lo: f64,
    mut hi: f64,
    incumbent: f64,
    incumbent_value: f64,
) -> (f64, f64, usize) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (incumbent, incumbent_value);
    let mut evals = 0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = profile.value(a);
    let mut fb = profile.value(b);
    evals += 2;
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= 1e-13 * profile.op.kbar_max() {
            break;
        }
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = profile.value(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = profile.value(b);
        }
        evals += 1;
    }
    for (k, v) in [(a, fa), (b, fb)] {
        if v > best.1 {
            best = (k, v);
        }
    }
    (best.0, best.1, evals)
}

fn assemble(
    profile: &Profile<'_>,
    kbar: f64,
    evaluations: usize,
    lip: f64,
    grid_error_bound: f64,
) -> PolarCertificate {
    let op = profile.op;
    let (sigma, u, mut x) = profile.top_pair(kbar);
    let s = profile.weights(kbar);
    // d* = A(k̄)^{-1/2} Γ u = Γ S u
    let mut d = op.eigvecs() * s.component_mul(&u);
    let constraint = d.norm_squared() + profile.gamma * op.apply_shifted(&d, kbar).norm_squared();
    if constraint > 0.0 {
        d /= constraint.sqrt();
    }
    let xn = x.norm();
    if xn > 0.0 {
        x /= xn;
    }
    let scale = d.amax();
    if let Some(first) = d.iter().copied().find(|v| v.abs() > 1e-12 * scale) {
        if first < 0.0 {
            d.neg_mut();
            x.neg_mut();
        }
    }
    PolarCertificate {
        value: sigma,
        d_star: d.as_slice().to_vec(),
        x_star: x.as_slice().to_vec(),
        k_star: kbar.max(0.0).sqrt(),
        kbar_star: kbar,
        evaluations,
        lipschitz_bound: lip,
        grid_error_bound,
    }
}
