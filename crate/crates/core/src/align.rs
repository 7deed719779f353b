//! Training driver: frozen-statistics epochs, best-model tracking and final repair.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use rtw_autodiff::{AdamState, Real, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::barycenter::{mean_signal, MeanConfig, MeanStats};
use crate::error::{Result, RtwError};
use crate::loss::{alignment_loss, record_alignment_loss, LossConfig};
use crate::manifolds::ManifoldDescriptor;
use crate::resample::{record_warp, warp_frozen, warp_signal_riemannian, SincConfig};
use crate::signal::Signal;
use crate::warpnet::{make_basis, record_penalty, BasisSet, WarpKind, WarpMatrix, WarpModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda: f64,
    /// `Z = z_factor * T_max`; `None` means `min(N, z_factor_cap)`.
    pub z_factor: Option<usize>,
    pub z_factor_cap: usize,
    pub seed: u64,
    pub warp: WarpKind,
    pub sinc: SincConfig,
    pub loss: LossConfig,
    pub mean: MeanConfig,
    /// Start each index's mean from its predecessor.
    pub warm_start: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            epochs: 256,
            lr: 0.01,
            lambda: 100.0,
            z_factor: None,
            z_factor_cap: 8,
            seed: 0,
            warp: WarpKind::default(),
            sinc: SincConfig::default(),
            loss: LossConfig::default(),
            mean: MeanConfig::default(),
            warm_start: true,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(RtwError::config("align", "epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(RtwError::config("align", "learning rate must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(RtwError::config("align", "lambda must be non-negative"));
        }
        if self.z_factor == Some(0) || self.z_factor_cap == 0 {
            return Err(RtwError::config("align", "z_factor must be at least 1"));
        }
        self.sinc.validate()?;
        self.loss.validate()
    }

    /// Warped length for `n` signals whose longest has `t_max` samples.
    pub fn warped_len(&self, n: usize, t_max: usize) -> usize {
        self.z_factor.unwrap_or_else(|| n.min(self.z_factor_cap)).max(1) * t_max
    }
}

/// Objective improvements below this (relative to `max(1, best)`) count as ties.
pub const BEST_TIE_TOL: f64 = 1e-12;

/// Objective terms of one evaluated model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Number of optimizer steps applied before this evaluation.
    pub epoch: usize,
    pub data_loss: f64,
    pub penalty: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct AlignmentResult<T: Real> {
    pub descriptor: ManifoldDescriptor,
    pub warped: Vec<Signal<T>>,
    pub mean: Signal<T>,
    pub gamma: WarpMatrix<T>,
    /// Warp of the best model before repair.
    pub raw_gamma: WarpMatrix<T>,
    pub loss_trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub model: WarpModel<T>,
    pub metrics: BTreeMap<String, f64>,
}

/// Output of one frozen-statistics evaluation.
struct Evaluation<T: Real> {
    record: EpochRecord,
    grad: Vec<T>,
    mean_stats: MeanStats,
    refine_violations: usize,
}

fn evaluate<T: Real>(
    desc: &ManifoldDescriptor,
    signals: &[Signal<T>],
    model: &WarpModel<T>,
    basis: &BasisSet<T>,
    cfg: &AlignConfig,
    epoch: usize,
    want_grad: bool,
) -> Result<Evaluation<T>> {
    let tape = Tape::new();
    let theta = tape.var(Tensor::from_vec(model.params().to_vec()));
    let gamma = model.record(&tape, theta, basis)?;
    let values = gamma.value().into_data();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RtwError::Diverged { epoch });
    }
    let z = model.z();
    let frozen = signals
        .par_iter()
        .zip(values.par_chunks(z))
        .map(|(x, row)| warp_frozen(desc, x, row, &cfg.sinc))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Signal<T>> = frozen.iter().map(|f| &f.warped).collect();
    let (mean, mean_stats) = mean_signal(desc, &refs, &cfg.mean, cfg.warm_start)?;
    let warped = record_warp(desc, &tape, gamma, &frozen)?;
    let data = record_alignment_loss(desc, &tape, warped, &mean, &cfg.loss)?;
    let penalty = record_penalty(gamma)?;
    let objective = data.add(&penalty.scale(T::lit(cfg.lambda)))?;
    let record = EpochRecord {
        epoch,
        data_loss: data.item()?.to_f64().unwrap(),
        penalty: penalty.item()?.to_f64().unwrap(),
        objective: objective.item()?.to_f64().unwrap(),
    };
    if !record.objective.is_finite() {
        return Err(RtwError::Diverged { epoch });
    }
    let grad = if want_grad && model.num_params() > 0 {
        let g = tape.grad(objective, &[theta])?.remove(0).into_data();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(RtwError::Diverged { epoch });
        }
        g
    } else {
        Vec::new()
    };
    let refine_violations = frozen.iter().map(|f| f.refine_violations).sum();
    Ok(Evaluation { record, grad, mean_stats, refine_violations })
}

/// Gradient of the frozen-statistics objective at the model's current parameters, with the
/// objective value. The frozen quantities are those computed from the current warp.
pub fn frozen_objective_grad<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], model: &WarpModel<T>, cfg: &AlignConfig) -> Result<(T, Vec<T>)> {
    let basis = make_basis(model.n())?;
    let e = evaluate(desc, signals, model, &basis, cfg, 0, true)?;
    Ok((T::lit(e.record.objective), e.grad))
}

/// Objective of `params` with the mean, tangent bases and windows held at the values computed
/// from `frozen_params`.
pub fn frozen_objective_at<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], model: &WarpModel<T>, frozen_params: &[T], cfg: &AlignConfig) -> Result<T> {
    let basis = make_basis(model.n())?;
    let mut at_frozen = model.clone();
    at_frozen.set_params(frozen_params.to_vec())?;
    let gamma0 = at_frozen.gamma(&basis)?;
    let z = model.z();
    let frozen = signals
        .iter()
        .zip(gamma0.chunks(z))
        .map(|(x, row)| warp_frozen(desc, x, row, &cfg.sinc))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Signal<T>> = frozen.iter().map(|f| &f.warped).collect();
    let (mean, _) = mean_signal(desc, &refs, &cfg.mean, cfg.warm_start)?;
    let tape = Tape::new();
    let theta = tape.constant(Tensor::from_vec(model.params().to_vec()));
    let gamma = model.record(&tape, theta, &basis)?;
    let warped = record_warp(desc, &tape, gamma, &frozen)?;
    let data = record_alignment_loss(desc, &tape, warped, &mean, &cfg.loss)?;
    let penalty = record_penalty(gamma)?;
    Ok(data.add(&penalty.scale(T::lit(cfg.lambda)))?.item()?)
}

/// Makes a warp row feasible: clamps to `[0, 1]`, takes the running maximum, caps every step
/// at `max_step` while spreading the removed rise over the remaining steps, and pins the ends.
pub fn repair_warp<T: Real>(row: &mut [T], max_step: T) {
    let z = row.len();
    if z == 0 {
        return;
    }
    let mut hi = T::zero();
    for v in row.iter_mut() {
        hi = hi.max(v.max(T::zero()).min(T::one()));
        *v = hi;
    }
    row[0] = T::zero();
    if z == 1 {
        return;
    }
    row[z - 1] = T::one();
    let mut steps: Vec<T> = row.windows(2).map(|w| w[1] - w[0]).collect();
    let mut excess = T::zero();
    for s in steps.iter_mut() {
        if *s > max_step {
            excess = excess + (*s - max_step);
            *s = max_step;
        }
    }
    if excess > T::zero() {
        let room: T = steps.iter().map(|&s| max_step - s).sum();
        let share = if room > excess { excess / room } else { T::one() };
        for s in steps.iter_mut() {
            *s = *s + (max_step - *s) * share;
        }
    }
    let mut acc = T::zero();
    for (v, s) in row[1..].iter_mut().zip(&steps) {
        acc = (acc + *s).min(T::one());
        *v = acc;
    }
    row[z - 1] = T::one();
}

/// Aligns `signals` with the configured warp parameterization.
pub fn align<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], cfg: &AlignConfig) -> Result<AlignmentResult<T>> {
    cfg.validate()?;
    let n = signals.len();
    if n < 2 {
        return Err(RtwError::config("align", "at least two signals are required"));
    }
    for s in signals {
        if s.width() != desc.ambient_dim() {
            return Err(RtwError::DimensionMismatch { expected: desc.ambient_dim(), found: s.width() });
        }
        desc.check_signal(s)?;
    }
    let t_max = signals.iter().map(Signal::len).max().unwrap_or(0);
    if signals.iter().any(|s| s.len() < 2 * cfg.sinc.window + 1) {
        log::warn!("signals shorter than the sinc window {}", 2 * cfg.sinc.window + 1);
    }
    let z = cfg.warped_len(n, t_max);
    let basis = make_basis::<T>(n)?;
    let mut model = WarpModel::init(cfg.warp.clone(), n, z, t_max, cfg.seed)?;
    let mut adam = AdamState::new(model.num_params(), T::lit(cfg.lr));
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    let mut best = (f64::INFINITY, 0usize, model.params().to_vec());
    let mut refine_violations = 0;
    for epoch in 0..=cfg.epochs {
        let last = epoch == cfg.epochs;
        let e = evaluate(desc, signals, &model, &basis, cfg, epoch, !last)?;
        log::debug!("epoch {epoch}: data {:.6e} penalty {:.3e}", e.record.data_loss, e.record.penalty);
        if e.mean_stats.stalled > 0 {
            log::debug!("epoch {epoch}: {} mean estimates stalled", e.mean_stats.stalled);
        }
        refine_violations += e.refine_violations;
        // Rounding-level improvements do not displace an earlier model.
        if epoch == 0 || e.record.objective < best.0 - BEST_TIE_TOL * best.0.abs().max(1.0) {
            best = (e.record.objective, epoch, model.params().to_vec());
        }
        trace.push(e.record);
        if !last && model.num_params() > 0 {
            adam.step(model.params_mut(), &e.grad)?;
        }
    }
    model.set_params(best.2)?;
    let raw = WarpMatrix::new(n, z, model.gamma(&basis)?)?;
    let mut gamma = raw.clone();
    let cap = T::from_count(t_max).recip();
    gamma.values.chunks_mut(z).for_each(|row| repair_warp(row, cap));
    let warped = signals
        .par_iter()
        .zip(gamma.values.par_chunks(z))
        .map(|(x, row)| warp_signal_riemannian(desc, x, row, &cfg.sinc))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Signal<T>> = warped.iter().collect();
    let (mean, stats) = mean_signal(desc, &refs, &cfg.mean, cfg.warm_start)?;
    let final_loss = alignment_loss(desc, &refs, &mean, &cfg.loss)?.to_f64().unwrap();
    let mut metrics = BTreeMap::new();
    metrics.insert("initial_objective".into(), trace[0].objective);
    metrics.insert("best_objective".into(), best.0);
    metrics.insert("final_data_loss".into(), final_loss);
    metrics.insert("raw_penalty".into(), raw.penalty().to_f64().unwrap());
    metrics.insert("raw_max_step".into(), raw.max_step().to_f64().unwrap());
    metrics.insert("max_step".into(), gamma.max_step().to_f64().unwrap());
    metrics.insert("warped_len".into(), z as f64);
    metrics.insert("num_params".into(), model.num_params() as f64);
    metrics.insert("refine_violations".into(), refine_violations as f64);
    metrics.insert("mean_max_residual".into(), stats.max_residual);
    Ok(AlignmentResult { descriptor: desc.clone(), warped, mean, gamma, raw_gamma: raw, loss_trace: trace, best_epoch: best.1, model, metrics })
}

/// Same driver with `K` sine components per signal.
pub fn align_ttw_mode<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], k: usize, cfg: &AlignConfig) -> Result<AlignmentResult<T>> {
    let cfg = AlignConfig { warp: WarpKind::Sine { k }, ..cfg.clone() };
    align(desc, signals, &cfg)
}

impl<T: Real> AlignmentResult<T> {
    /// The mean resampled to `len` evenly spaced points of its own time axis.
    pub fn mean_at_length(&self, len: usize, sinc: &SincConfig) -> Result<Signal<T>> {
        resample_to_length(&self.descriptor, &self.mean, len, sinc)
    }
}

/// `x` resampled to `len` evenly spaced points, endpoints kept.
pub fn resample_to_length<T: Real>(desc: &ManifoldDescriptor, x: &Signal<T>, len: usize, sinc: &SincConfig) -> Result<Signal<T>> {
    if len < 2 {
        return Err(RtwError::config("align", format!("cannot resample to {len} points")));
    }
    let z = T::from_count(x.len());
    let span = T::from_count(x.len() - 1) / T::from_count(len - 1);
    let row: Vec<T> = (0..len).map(|i| (T::from_count(i) * span + T::one()) / z).collect();
    warp_signal_riemannian(desc, x, &row, sinc)
}

impl<T: Real + Serialize> AlignmentResult<T> {
    /// Writes warped signals, mean, warps, loss trace, summary and model checkpoint to `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        use crate::datasets::{write_csv_rows, SignalSet};
        std::fs::create_dir_all(dir)?;
        SignalSet::new(self.descriptor.clone(), self.warped.clone(), None)?.save(&dir.join("warped"), "warped")?;
        SignalSet::new(self.descriptor.clone(), vec![self.mean.clone()], None)?.save(&dir.join("mean"), "mean")?;
        let (n, z) = (self.gamma.n, self.gamma.z);
        let gamma_rows = (0..z).map(|i| (0..n).map(|j| self.gamma.values[j * z + i].to_f64().unwrap()).collect::<Vec<_>>());
        write_csv_rows(&dir.join("gamma.csv"), Some(&format!("warp values, {z} rows x {n} signals")), gamma_rows)?;
        let trace_rows = self.loss_trace.iter().map(|r| vec![r.epoch as f64, r.data_loss, r.penalty, r.objective]);
        write_csv_rows(&dir.join("loss_trace.csv"), Some("epoch,data_loss,penalty,objective"), trace_rows)?;
        let summary = serde_json::json!({
            "manifold": self.descriptor,
            "best_epoch": self.best_epoch,
            "metrics": self.metrics,
        });
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        std::fs::write(dir.join("model.json"), serde_json::to_string(&self.model)?)?;
        Ok(())
    }
}
