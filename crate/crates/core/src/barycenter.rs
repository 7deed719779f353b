//! Per-index means of point sets: arithmetic in R^D, Gauss-Newton Fréchet means on manifolds.

use rayon::prelude::*;
use rtw_autodiff::Real;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};
use crate::manifolds::ManifoldDescriptor;
use crate::signal::Signal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanConfig {
    pub max_iters: usize,
    /// Threshold on the Riemannian norm of the mean tangent update.
    pub tol: f64,
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self { max_iters: 20, tol: 1e-9 }
    }
}

/// Outcome of one Fréchet mean computation.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanEstimate<T> {
    pub point: Vec<T>,
    pub iters: usize,
    /// Norm of the averaged logarithm at `point`.
    pub residual: f64,
    /// False when the iteration stalled above `tol` but within the accepted slack.
    pub converged: bool,
}

pub fn euclidean_mean<T: Real>(points: &[&[T]]) -> Vec<T> {
    let n = T::from_count(points.len());
    let mut out = vec![T::zero(); points.first().map_or(0, |p| p.len())];
    for p in points {
        for (o, &v) in out.iter_mut().zip(*p) {
            *o = *o + v;
        }
    }
    out.iter_mut().for_each(|o| *o = *o / n);
    out
}

/// Averaged logarithm of `points` at `mu` and its Riemannian norm.
fn mean_log<T: Real>(desc: &ManifoldDescriptor, mu: &[T], points: &[&[T]]) -> Result<(Vec<T>, T)> {
    let frame = desc.frame(mu)?;
    let n = T::from_count(points.len());
    let mut u = vec![T::zero(); mu.len()];
    for p in points {
        for (acc, v) in u.iter_mut().zip(frame.log(p)?) {
            *acc = *acc + v;
        }
    }
    u.iter_mut().for_each(|x| *x = *x / n);
    let norm = frame.norm(&u);
    Ok((u, norm))
}

/// Gauss-Newton iteration `mu <- exp_mu(mean_n log_mu(x_n))` from `init`.
pub fn frechet_mean<T: Real>(desc: &ManifoldDescriptor, points: &[&[T]], init: &[T], cfg: &MeanConfig) -> Result<MeanEstimate<T>> {
    if points.is_empty() {
        return Err(RtwError::config("barycenter", "mean of an empty point set"));
    }
    if cfg.max_iters == 0 {
        return Err(RtwError::config("barycenter", "max_iters must be at least 1"));
    }
    if desc.is_euclidean() {
        return Ok(MeanEstimate { point: euclidean_mean(points), iters: 1, residual: 0.0, converged: true });
    }
    let tol = T::lit(cfg.tol);
    let mut mu = init.to_vec();
    for it in 0..cfg.max_iters {
        let (u, norm) = mean_log(desc, &mu, points)?;
        if norm < tol {
            return Ok(MeanEstimate { point: mu, iters: it, residual: norm.to_f64().unwrap(), converged: true });
        }
        mu = desc.exp(&mu, &u)?;
    }
    let (_, norm) = mean_log(desc, &mu, points)?;
    let residual = norm.to_f64().unwrap();
    if norm < tol {
        return Ok(MeanEstimate { point: mu, iters: cfg.max_iters, residual, converged: true });
    }
    if residual > 100.0 * cfg.tol {
        return Err(RtwError::NoConvergence { iters: cfg.max_iters, residual });
    }
    log::warn!("Fréchet mean stalled at residual {residual:e}");
    Ok(MeanEstimate { point: mu, iters: cfg.max_iters, residual, converged: false })
}

/// Summary of a per-index mean computation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStats {
    pub max_iters: usize,
    pub mean_iters: f64,
    pub max_residual: f64,
    pub stalled: usize,
}

impl MeanStats {
    fn from_estimates<T>(est: &[MeanEstimate<T>]) -> Self {
        let n = est.len().max(1) as f64;
        Self {
            max_iters: est.iter().map(|e| e.iters).max().unwrap_or(0),
            mean_iters: est.iter().map(|e| e.iters as f64).sum::<f64>() / n,
            max_residual: est.iter().map(|e| e.residual).fold(0.0, f64::max),
            stalled: est.iter().filter(|e| !e.converged).count(),
        }
    }
}

/// Per-index mean of equally long signals.
///
/// With `warm_start` the estimate at index `z` starts from the mean at `z - 1` (sequential);
/// otherwise every index starts from the first signal's point and indices run in parallel.
pub fn mean_signal<T: Real>(desc: &ManifoldDescriptor, signals: &[&Signal<T>], cfg: &MeanConfig, warm_start: bool) -> Result<(Signal<T>, MeanStats)> {
    let first = signals.first().ok_or_else(|| RtwError::config("barycenter", "mean of no signals"))?;
    let (z, a) = (first.len(), desc.ambient_dim());
    if signals.iter().any(|s| s.len() != z || s.width() != a) {
        return Err(RtwError::config("barycenter", "signals must share length and width"));
    }
    let column = |i: usize| signals.iter().map(|s| s.point(i)).collect::<Vec<_>>();
    let estimates: Vec<MeanEstimate<T>> = if desc.is_euclidean() {
        (0..z).into_par_iter().map(|i| frechet_mean(desc, &column(i), first.point(i), cfg)).collect::<Result<_>>()?
    } else if warm_start {
        let mut out: Vec<MeanEstimate<T>> = Vec::with_capacity(z);
        for i in 0..z {
            let init = out.last().map_or_else(|| first.point(i).to_vec(), |e| e.point.clone());
            let est = match frechet_mean(desc, &column(i), &init, cfg) {
                Ok(e) => e,
                // A poor warm start near the cut locus can fail where the data itself is fine.
                Err(RtwError::AntipodalPoint) | Err(RtwError::NoConvergence { .. }) => frechet_mean(desc, &column(i), first.point(i), cfg)?,
                Err(e) => return Err(e),
            };
            out.push(est);
        }
        out
    } else {
        (0..z).into_par_iter().map(|i| frechet_mean(desc, &column(i), first.point(i), cfg)).collect::<Result<_>>()?
    };
    let stats = MeanStats::from_estimates(&estimates);
    let data = estimates.into_iter().flat_map(|e| e.point).collect();
    Ok((Signal::new(a, data)?, stats))
}
