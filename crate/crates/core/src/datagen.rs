//! Synthetic wave data: vibrating strings (optionally damped in time or space)
//! and a piecewise-wavespeed 1-D FDTD line.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::objective::WaveField;

/// Sampling grid: `space` × `time` samples at spacings `dl` and `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub space: usize,
    pub time: usize,
    pub dl: f64,
    pub dt: f64,
}

impl Grid {
    fn validate(&self) -> Result<()> {
        if self.space == 0 || self.time == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must be non-empty, got {}x{}",
                self.space, self.time
            )));
        }
        for (name, v) in [("dl", self.dl), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Sum of standing modes `a_n e^{-α_n t} e^{-β_n ℓ} sin(n k ℓ) sin(n ω t)` plus noise.
///
/// Row `m` samples position `ℓ = (m + 1)·dl`: the string is fixed at `ℓ = 0`
/// and `ℓ = (space + 1)·dl`, which are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringSpec {
    pub num_modes: usize,
    pub k0: f64,
    pub omega0: f64,
    pub amplitudes: Vec<f64>,
    pub damp_time: Vec<f64>,
    pub damp_space: Vec<f64>,
    pub noise_var: f64,
    pub grid: Grid,
    pub seed: u64,
}

impl StringSpec {
    /// Unit-length string with `k = 2π`, `ω = 12π`, amplitudes 10, no damping
    /// or noise, sampled over one second.
    pub fn fixed(num_modes: usize, space: usize, time: usize) -> Self {
        Self {
            num_modes,
            k0: 2.0 * PI,
            omega0: 12.0 * PI,
            amplitudes: vec![10.0; num_modes],
            damp_time: vec![0.0; num_modes],
            damp_space: vec![0.0; num_modes],
            noise_var: 0.0,
            grid: Grid {
                space,
                time,
                dl: 1.0 / (space + 1) as f64,
                dt: 1.0 / time as f64,
            },
            seed: 0,
        }
    }

    /// `α_n = n`.
    pub fn with_time_damping(mut self) -> Self {
        self.damp_time = (1..=self.num_modes).map(|n| n as f64).collect();
        self.damp_space = vec![0.0; self.num_modes];
        self
    }

    /// `β_n = n/2`.
    pub fn with_space_damping(mut self) -> Self {
        self.damp_space = (1..=self.num_modes).map(|n| n as f64 / 2.0).collect();
        self.damp_time = vec![0.0; self.num_modes];
        self
    }

    pub fn with_noise(mut self, variance: f64, seed: u64) -> Self {
        self.noise_var = variance;
        self.seed = seed;
        self
    }

    pub fn position(&self, row: usize) -> f64 {
        (row + 1) as f64 * self.grid.dl
    }

    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let r = self.num_modes;
        if r == 0 {
            return Err(Error::InvalidArgument(
                "at least one mode is required".into(),
            ));
        }
        for (name, v) in [
            ("amplitudes", &self.amplitudes),
            ("damp_time", &self.damp_time),
            ("damp_space", &self.damp_space),
        ] {
            if v.len() != r {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {} entries, expected {r}",
                    v.len()
                )));
            }
        }
        if self
            .damp_time
            .iter()
            .chain(&self.damp_space)
            .any(|&v| v < 0.0)
        {
            return Err(Error::InvalidArgument(
                "damping rates must be nonnegative".into(),
            ));
        }
        if self.damp_time.iter().any(|&v| v != 0.0) && self.damp_space.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "damping may be applied in time or in space, not both".into(),
            ));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be >= 0, got {}",
                self.noise_var
            )));
        }
        if !(self.k0 > 0.0 && self.omega0 > 0.0) {
            return Err(Error::InvalidArgument(
                "k0 and omega0 must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// I.i.d. zero-mean Gaussian noise from a seeded ChaCha20 stream.
fn gaussian_noise(rows: usize, cols: usize, variance: f64, seed: u64) -> DMatrix<f64> {
    if variance == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    // Column-major fill so the stream order is fixed.
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| normal.sample(&mut rng)),
    )
}

/// Generate a string field and its unit-normalized ground-truth spatial modes.
pub fn gen_string(spec: &StringSpec) -> Result<(WaveField, DMatrix<f64>)> {
    spec.validate()?;
    let g = spec.grid;
    let mut y = gaussian_noise(g.space, g.time, spec.noise_var, spec.seed);
    let mut truth = DMatrix::zeros(g.space, spec.num_modes);
    for mode in 0..spec.num_modes {
        let n = (mode + 1) as f64;
        let spatial = DVector::from_fn(g.space, |m, _| {
            let l = spec.position(m);
            (-spec.damp_space[mode] * l).exp() * (n * spec.k0 * l).sin()
        });
        let temporal = DVector::from_fn(g.time, |j, _| {
            let t = j as f64 * g.dt;
            spec.amplitudes[mode] * (-spec.damp_time[mode] * t).exp() * (n * spec.omega0 * t).sin()
        });
        y.ger(1.0, &spatial, &temporal, 1.0);
        let norm = spatial.norm();
        if norm > 0.0 {
            truth.set_column(mode, &(spatial / norm));
        }
    }
    Ok((WaveField::new(y, g.dl, g.dt)?, truth))
}

/// One-dimensional line made of segments with different wave speeds.
///
/// Node `m` sits at `m·dl`. Segment `i` spans `[boundaries[i-1], boundaries[i])`
/// and has speed `base_speed / wavenumber_ratios[i]`. A modulated Gaussian
/// drives the left end; afterwards both ends follow a first-order absorbing
/// condition blended with a fixed end by `boundary_loss` (1 absorbs, 0 reflects).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub segment_boundaries: Vec<f64>,
    pub wavenumber_ratios: Vec<f64>,
    pub base_speed: f64,
    pub center_frequency: f64,
    /// Full 3 dB bandwidth of the excitation.
    pub bandwidth: f64,
    pub boundary_loss: f64,
    /// Simulation grid; `grid.time` recorded snapshots, one every `record_every` steps.
    pub grid: Grid,
    pub record_every: usize,
    pub noise_var: f64,
    pub seed: u64,
}

impl LineSpec {
    /// Two segments split at 0.4 of a unit-length line, right side with four
    /// times the wavenumber.
    pub fn two_segment(space: usize, time: usize) -> Self {
        Self {
            segment_boundaries: vec![0.4],
            wavenumber_ratios: vec![1.0, 4.0],
            base_speed: 1.0,
            center_frequency: 5.0,
            bandwidth: 5.0,
            boundary_loss: 0.5,
            grid: Grid {
                space,
                time,
                dl: 1.0 / space as f64,
                dt: 0.8 / space as f64,
            },
            record_every: 2,
            noise_var: 0.0,
            seed: 0,
        }
    }

    pub fn length(&self) -> f64 {
        self.grid.space as f64 * self.grid.dl
    }

    /// Wave speed at every node.
    pub fn speeds(&self) -> Vec<f64> {
        (0..self.grid.space)
            .map(|m| {
                let pos = m as f64 * self.grid.dl;
                let seg = self
                    .segment_boundaries
                    .iter()
                    .filter(|&&b| pos >= b)
                    .count();
                self.base_speed / self.wavenumber_ratios[seg]
            })
            .collect()
    }

    /// Standard deviation of the Gaussian envelope giving the requested bandwidth.
    fn envelope_width(&self) -> f64 {
        2f64.ln().sqrt() / (PI * self.bandwidth)
    }

    /// Time at which the excitation is switched off.
    pub fn excitation_end(&self) -> f64 {
        8.0 * self.envelope_width()
    }

    pub fn excitation(&self, t: f64) -> f64 {
        let tau = self.envelope_width();
        let t0 = 4.0 * tau;
        let s = (t - t0) / tau;
        (-0.5 * s * s).exp() * (2.0 * PI * self.center_frequency * (t - t0)).sin()
    }

    pub fn courant(&self) -> f64 {
        let c_max = self.speeds().into_iter().fold(0.0, f64::max);
        c_max * self.grid.dt / self.grid.dl
    }

    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.grid.space < 3 {
            return Err(Error::InvalidGrid("a line needs at least 3 nodes".into()));
        }
        if self.wavenumber_ratios.len() != self.segment_boundaries.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} boundaries need {} wavenumber ratios, got {}",
                self.segment_boundaries.len(),
                self.segment_boundaries.len() + 1,
                self.wavenumber_ratios.len()
            )));
        }
        let len = self.length();
        let sorted = self.segment_boundaries.windows(2).all(|w| w[0] < w[1]);
        if !sorted
            || self
                .segment_boundaries
                .iter()
                .any(|&b| !(b > 0.0 && b < len))
        {
            return Err(Error::InvalidArgument(
                "segment boundaries must be sorted and inside the line".into(),
            ));
        }
        if self
            .wavenumber_ratios
            .iter()
            .any(|&r| !(r > 0.0 && r.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "wavenumber ratios must be positive".into(),
            ));
        }
        if !(self.base_speed > 0.0 && self.center_frequency > 0.0 && self.bandwidth > 0.0) {
            return Err(Error::InvalidArgument(
                "speed, centre frequency and bandwidth must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.boundary_loss) {
            return Err(Error::InvalidArgument(format!(
                "boundary loss must lie in [0, 1], got {}",
                self.boundary_loss
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument(
                "record_every must be at least 1".into(),
            ));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be >= 0".into()));
        }
        let courant = self.courant();
        if courant > 1.0 {
            return Err(Error::Unstable { courant });
        }
        Ok(())
    }
}

/// Leapfrog FDTD of `y_tt = c(ℓ)² y_ℓℓ`. Returns snapshots as a space × time
/// field with time spacing `dt · record_every`.
pub fn gen_line(spec: &LineSpec) -> Result<WaveField> {
    spec.validate()?;
    let g = spec.grid;
    let n = g.space;
    let speeds = spec.speeds();
    let coef: Vec<f64> = speeds.iter().map(|c| (c * g.dt / g.dl).powi(2)).collect();
    let mur = |c: f64| (c * g.dt - g.dl) / (c * g.dt + g.dl);
    let (mur_left, mur_right) = (mur(speeds[0]), mur(speeds[n - 1]));
    let loss = spec.boundary_loss;

    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut y = DMatrix::zeros(n, g.time);
    let steps = g.time * spec.record_every;
    let source_end = spec.excitation_end();

    let mut step = 0;
    for col in 0..g.time {
        y.set_column(col, &DVector::from_column_slice(&cur));
        for _ in 0..spec.record_every {
            let t_next = (step + 1) as f64 * g.dt;
            for m in 1..n - 1 {
                next[m] =
                    2.0 * cur[m] - prev[m] + coef[m] * (cur[m + 1] - 2.0 * cur[m] + cur[m - 1]);
            }
            next[0] = if t_next <= source_end {
                spec.excitation(t_next)
            } else {
                loss * (cur[1] + mur_left * (next[1] - cur[0]))
            };
            next[n - 1] = loss * (cur[n - 2] + mur_right * (next[n - 2] - cur[n - 1]));
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            step += 1;
        }
    }
    debug_assert_eq!(step, steps);

    if spec.noise_var > 0.0 {
        y += gaussian_noise(n, g.time, spec.noise_var, spec.seed);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("simulated line"));
    }
    WaveField::new(y, g.dl, g.dt * spec.record_every as f64)
}

/// Discrete energy between consecutive leapfrog states, conserved by the
/// scheme when both ends are fixed and the source is off.
pub fn leapfrog_energy(prev: &[f64], cur: &[f64], speeds: &[f64], dl: f64, dt: f64) -> f64 {
    let kinetic: f64 = prev
        .iter()
        .zip(cur)
        .zip(speeds)
        .map(|((a, b), c)| ((b - a) / dt).powi(2) / (c * c))
        .sum();
    let potential: f64 = (0..cur.len() - 1)
        .map(|m| (cur[m + 1] - cur[m]) * (prev[m + 1] - prev[m]) / (dl * dl))
        .sum();
    0.5 * (kinetic + potential)
}

/// Observe only the listed rows (all time samples); `Y` is unchanged.
pub fn subsample_rows(field: &WaveField, rows: &[usize]) -> Result<WaveField> {
    if rows.is_empty() {
        return Err(Error::InvalidIndices("no rows listed".into()));
    }
    let (n, t) = (field.space_len(), field.time_len());
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::InvalidIndices(format!(
            "row {bad} out of range 0..{n}"
        )));
    }
    let mut mask = DMatrix::zeros(n, t);
    for &r in rows {
        mask.row_mut(r).fill(1.0);
    }
    field.clone().set_mask(Some(mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_time_sample_is_zero() {
        let spec = StringSpec::fixed(4, 30, 50).with_time_damping();
        let (field, truth) = gen_string(&spec).unwrap();
        assert!(field.y().column(0).iter().all(|&v| v == 0.0));
        for c in truth.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_evaluation() {
        // ℓ = 0.25, t = 1/24 with k = 2π, ω = 12π gives sin(π/2)·sin(π/2).
        let mut spec = StringSpec::fixed(1, 3, 25);
        spec.amplitudes = vec![1.0];
        spec.grid.dl = 0.125;
        spec.grid.dt = 1.0 / 24.0;
        let (field, _) = gen_string(&spec).unwrap();
        assert!((spec.position(1) - 0.25).abs() < 1e-15);
        assert!((field.y()[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_rank_at_most_modes() {
        let spec = StringSpec::fixed(5, 60, 80).with_space_damping();
        let (field, _) = gen_string(&spec).unwrap();
        let sv = field.y().clone().svd(false, false).singular_values;
        let top = sv.max();
        assert_eq!(sv.iter().filter(|&&s| s > 1e-10 * top).count(), 5);
    }

    #[test]
    fn noise_reproducible() {
        let spec = StringSpec::fixed(2, 20, 30).with_noise(0.5, 42);
        let a = gen_string(&spec).unwrap().0;
        let b = gen_string(&spec).unwrap().0;
        assert_eq!(a.y(), b.y());
        let c = gen_string(&StringSpec { seed: 43, ..spec }).unwrap().0;
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn rejects_double_damping() {
        let mut spec = StringSpec::fixed(2, 10, 10).with_time_damping();
        spec.damp_space = vec![0.5, 0.5];
        assert!(gen_string(&spec).is_err());
        assert!(gen_string(&StringSpec::fixed(0, 10, 10)).is_err());
    }

    #[test]
    fn cfl_violation_rejected() {
        let mut spec = LineSpec::two_segment(50, 20);
        spec.grid.dt = 2.0 * spec.grid.dl;
        assert!(matches!(gen_line(&spec), Err(Error::Unstable { .. })));
    }

    #[test]
    fn subsample_cases() {
        let field = WaveField::new(DMatrix::from_element(100, 4, 1.0), 0.01, 1.0).unwrap();
        let all: Vec<usize> = (0..100).collect();
        let f = subsample_rows(&field, &all).unwrap();
        assert!(f.mask().unwrap().iter().all(|&v| v == 1.0));

        let rows: Vec<usize> = (0..10).map(|i| 10 * i).collect();
        let f = subsample_rows(&field, &rows).unwrap();
        assert_eq!(f.mask().unwrap().sum(), 40.0);
        assert_eq!(f.y(), field.y());

        let f = subsample_rows(&field, &[99]).unwrap();
        assert_eq!(f.mask().unwrap().sum(), 4.0);
        assert!(subsample_rows(&field, &[]).is_err());
        assert!(subsample_rows(&field, &[100]).is_err());
    }
}
