//! Alignment metrics, nearest-centroid classification and the paired t-test.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rtw_autodiff::Real;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::baselines::dtw_cost;
use crate::datasets::SignalSet;
use crate::error::{Result, RtwError};
use crate::manifolds::ManifoldDescriptor;
use crate::signal::Signal;

/// A summed DTW metric with its per-signal terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    /// Sum over signals.
    pub raw: f64,
    /// `raw / N`.
    pub per_signal: f64,
    pub values: Vec<f64>,
}

impl Metric {
    fn from_values(values: Vec<f64>) -> Self {
        let raw = values.iter().sum::<f64>();
        let per_signal = if values.is_empty() { 0.0 } else { raw / values.len() as f64 };
        Self { raw, per_signal, values }
    }
}

fn dtw_sum<T: Real>(desc: &ManifoldDescriptor, signals: &[&Signal<T>], target: &Signal<T>) -> Result<Metric> {
    let values = signals
        .par_iter()
        .map(|s| dtw_cost(s, target, |a, b| desc.dist(a, b)).map(|c| c.to_f64().unwrap()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metric::from_values(values))
}

/// `sum_n D_dtw(x_hat_n, x_original)`.
pub fn restoration_accuracy<T: Real>(desc: &ManifoldDescriptor, warped: &[&Signal<T>], original: &Signal<T>) -> Result<Metric> {
    dtw_sum(desc, warped, original)
}

/// `sum_n D_dtw(x_n, mu)` over the unaligned inputs.
pub fn barycenter_loss<T: Real>(desc: &ManifoldDescriptor, originals: &[&Signal<T>], mean: &Signal<T>) -> Result<Metric> {
    dtw_sum(desc, originals, mean)
}

/// `sum_n D_dtw(x_hat_n, mu)` over the aligned signals.
pub fn alignment_quality<T: Real>(desc: &ManifoldDescriptor, warped: &[&Signal<T>], mean: &Signal<T>) -> Result<Metric> {
    dtw_sum(desc, warped, mean)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub restoration_accuracy: Option<Metric>,
    pub barycenter_loss: Metric,
    pub alignment_quality: Metric,
    pub runtime_seconds: f64,
}

impl MetricsReport {
    /// Evaluates an alignment; `original` enables restoration accuracy.
    pub fn compute<T: Real>(
        desc: &ManifoldDescriptor,
        inputs: &[Signal<T>],
        warped: &[Signal<T>],
        mean: &Signal<T>,
        original: Option<&Signal<T>>,
        runtime_seconds: f64,
    ) -> Result<Self> {
        let w: Vec<&Signal<T>> = warped.iter().collect();
        let x: Vec<&Signal<T>> = inputs.iter().collect();
        Ok(Self {
            restoration_accuracy: original.map(|o| restoration_accuracy(desc, &w, o)).transpose()?,
            barycenter_loss: barycenter_loss(desc, &x, mean)?,
            alignment_quality: alignment_quality(desc, &w, mean)?,
            runtime_seconds,
        })
    }

    /// Flat `name -> value` view with `_raw` and `_per_signal` suffixes.
    pub fn flatten(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        let mut put = |name: &str, m: &Metric| {
            out.insert(format!("{name}_raw"), m.raw);
            out.insert(format!("{name}_per_signal"), m.per_signal);
        };
        if let Some(r) = &self.restoration_accuracy {
            put("restoration_accuracy", r);
        }
        put("barycenter_loss", &self.barycenter_loss);
        put("alignment_quality", &self.alignment_quality);
        out.insert("runtime_seconds".into(), self.runtime_seconds);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub predicted: Vec<i64>,
    /// Fraction of correct predictions when the test set is labelled.
    pub accuracy: Option<f64>,
}

/// Assigns each test signal the label of the DTW-nearest centroid; ties go to the lowest label.
pub fn nearest_centroid_classify<T: Real>(test: &SignalSet<T>, centroids: &[(i64, Signal<T>)]) -> Result<Classification> {
    if centroids.is_empty() {
        return Err(RtwError::config("eval", "no centroids"));
    }
    let desc = &test.descriptor;
    let mut sorted: Vec<&(i64, Signal<T>)> = centroids.iter().collect();
    sorted.sort_by_key(|c| c.0);
    let predicted = test
        .signals
        .par_iter()
        .map(|s| {
            let mut best: Option<(T, i64)> = None;
            for (label, c) in &sorted {
                let d = dtw_cost(s, c, |a, b| desc.dist(a, b))?;
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, *label));
                }
            }
            Ok(best.expect("centroids are non-empty").1)
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracy = test.labels.as_ref().map(|l| {
        let hits = l.iter().zip(&predicted).filter(|(a, b)| a == b).count();
        hits as f64 / l.len().max(1) as f64
    });
    Ok(Classification { predicted, accuracy })
}

/// Sign of the mean difference `a - b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Greater,
    Less,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub significant: bool,
    pub direction: Direction,
    /// All differences were equal, so the statistic is infinite or undefined.
    pub degenerate: bool,
}

/// Two-sided paired Student t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(RtwError::config("eval", "paired t-test needs two equally long samples of size at least 2"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(RtwError::NonFinite("eval"));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let direction = if mean > 0.0 {
        Direction::Greater
    } else if mean < 0.0 {
        Direction::Less
    } else {
        Direction::Equal
    };
    let df = n - 1;
    if var == 0.0 || d.iter().all(|&v| v == d[0]) {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0, df, significant: false, direction, degenerate: true }
        } else {
            TTest { t: mean.signum() * f64::INFINITY, p: 0.0, df, significant: true, direction, degenerate: true }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let nu = df as f64;
    let p = beta_reg(nu / 2.0, 0.5, nu / (nu + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p, df, significant: p < alpha, direction, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples_are_not_significant() {
        let a = [1.0, 2.0, 3.0];
        let r = paired_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.p, 1.0);
        assert!(!r.significant && r.degenerate);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let r = paired_t_test(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0], 0.05).unwrap();
        assert!(r.degenerate && r.significant && r.p == 0.0);
        assert_eq!(r.direction, Direction::Greater);
    }
}
