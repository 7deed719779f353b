//! Gaussian-weighted window loss over point segments.

use rayon::prelude::*;
use rtw_autodiff::{Real, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};
use crate::manifolds::{record_dist, DistanceKind, ManifoldDescriptor};
use crate::signal::Signal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Window size `W`.
    pub window: usize,
    /// Step size `s` between segment indices.
    pub step: usize,
    pub epsilon: f64,
    pub distance: DistanceKind,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { window: 5, step: 5, epsilon: 1e-6, distance: DistanceKind::Geodesic }
    }
}

impl LossConfig {
    pub fn sigma(&self) -> f64 {
        (self.window * self.step) as f64 / 3.0 + self.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(RtwError::config("loss", "step must be at least 1"));
        }
        if !(self.sigma() > 0.0) {
            return Err(RtwError::config("loss", "sigma must be positive"));
        }
        Ok(())
    }
}

/// `(v, weight)` for `k = -W..=W`, with one-based `v = clamp(z + k s, 1, Z)` and the
/// Gaussian centred at `z`.
pub fn gaussian_segment_weights(z: usize, z_len: usize, cfg: &LossConfig) -> Vec<(usize, f64)> {
    let sigma = cfg.sigma();
    let g = |j: f64| (-(j * j) / (2.0 * sigma * sigma)).exp();
    let w = cfg.window as i64;
    let step = cfg.step as i64;
    let denom: f64 = (-w..=w).map(|i| g((i * step) as f64)).sum();
    (-w..=w)
        .map(|k| {
            let v = (z as i64 + k * step).clamp(1, z_len as i64);
            (v as usize, g((v - z as i64) as f64) / denom)
        })
        .collect()
}

/// Total weight each index receives across all segments, indexed from zero.
pub fn aggregate_weights(z_len: usize, cfg: &LossConfig) -> Vec<f64> {
    let mut c = vec![0.0; z_len];
    for z in 1..=z_len {
        for (v, w) in gaussian_segment_weights(z, z_len, cfg) {
            c[v - 1] += w;
        }
    }
    c
}

/// Pointwise distance between two points for the configured kind.
pub fn point_distance<T: Real>(desc: &ManifoldDescriptor, a: &[T], b: &[T], kind: DistanceKind) -> Result<T> {
    match kind {
        DistanceKind::Geodesic => desc.dist(a, b),
        DistanceKind::Cholesky => desc.cholesky_dist(a, b),
    }
}

/// Value of the loss without a tape.
pub fn alignment_loss<T: Real>(desc: &ManifoldDescriptor, warped: &[&Signal<T>], mean: &Signal<T>, cfg: &LossConfig) -> Result<T> {
    cfg.validate()?;
    let z = mean.len();
    if warped.iter().any(|s| s.len() != z) {
        return Err(RtwError::config("loss", "warped signals and mean must share length"));
    }
    let c = aggregate_weights(z, cfg);
    let per_signal: Vec<T> = warped
        .par_iter()
        .map(|s| {
            let mut acc = T::zero();
            for (v, &cv) in c.iter().enumerate() {
                acc = acc + T::lit(cv) * point_distance(desc, s.point(v), mean.point(v), cfg.distance)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total: T = per_signal.into_iter().sum();
    Ok(total / T::from_count(warped.len() * z))
}

/// Records the loss for warped points `[N * Z, A]` against a constant mean.
pub fn record_alignment_loss<'t, T: Real>(
    desc: &ManifoldDescriptor,
    tape: &'t Tape<T>,
    warped: Var<'t, T>,
    mean: &Signal<T>,
    cfg: &LossConfig,
) -> Result<Var<'t, T>> {
    cfg.validate()?;
    let z = mean.len();
    let rows = warped.shape()[0];
    if z == 0 || rows % z != 0 {
        return Err(RtwError::config("loss", "warped rows must be a multiple of the mean length"));
    }
    let n = rows / z;
    let targets: Vec<T> = (0..n).flat_map(|_| mean.data().iter().copied()).collect();
    let dists = record_dist(desc, tape, warped, &targets, cfg.distance)?;
    let c = aggregate_weights(z, cfg);
    let scale = 1.0 / (rows as f64);
    let weights: Vec<T> = (0..n).flat_map(|_| c.iter().map(|&w| T::lit(w * scale))).collect();
    Ok(dists.mul(&tape.constant(Tensor::from_vec(weights)))?.sum())
}
