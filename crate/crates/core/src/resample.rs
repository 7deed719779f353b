//! Windowed sinc interpolation at warped indices, in Euclidean space and in tangent spaces.
//!
//! Positions follow the one-based convention of the interpolation formula: sample `m`
//! (storage index `m - 1`) sits at position `m`, and a warp value `g` queries position
//! `g * T`. Window indices outside `[1, T]` are clamped for data access only; the sinc
//! weights always use the unclamped offsets.

use rayon::prelude::*;
use rtw_autodiff::{sinc, Real, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};
use crate::manifolds::{record_exp, ManifoldDescriptor};
use crate::signal::Signal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SincConfig {
    /// Window half width `L`.
    pub window: usize,
    pub refine_iters: usize,
    pub refine_tol: f64,
}

impl Default for SincConfig {
    fn default() -> Self {
        Self { window: 10, refine_iters: 2, refine_tol: 1e-9 }
    }
}

impl SincConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refine_iters > 10 {
            return Err(RtwError::config("resample", "refine_iters must lie in 0..=10"));
        }
        if !(self.refine_tol >= 0.0) {
            return Err(RtwError::config("resample", "refine_tol must be non-negative"));
        }
        Ok(())
    }
}

/// Weights and storage indices of one interpolation window.
#[derive(Clone, Debug, PartialEq)]
pub struct SincWindow<T> {
    /// `floor(g * T)` as a one-based position.
    pub floor: i64,
    pub weights: Vec<T>,
    /// Zero-based storage indices after clamping.
    pub indices: Vec<usize>,
}

/// Window of `2L + 1` taps around position `center * len`.
pub fn sinc_weights<T: Real>(center: T, len: usize, window: usize) -> SincWindow<T> {
    let pos = center * T::from_count(len);
    let floor = pos.floor().to_i64().unwrap_or(0);
    let l = window as i64;
    let mut weights = Vec::with_capacity(2 * window + 1);
    let mut indices = Vec::with_capacity(2 * window + 1);
    for m in (floor - l)..=(floor + l) {
        weights.push(sinc(T::from_i64(m).unwrap() - pos));
        indices.push((m.clamp(1, len as i64) - 1) as usize);
    }
    SincWindow { floor, weights, indices }
}

/// Plain sinc interpolation of a Euclidean signal; the warp is clamped to `[0, 1]`.
pub fn warp_signal_euclidean<T: Real>(x: &Signal<T>, gamma: &[T], cfg: &SincConfig) -> Signal<T> {
    let w = x.width();
    let mut data = vec![T::zero(); gamma.len() * w];
    data.par_chunks_mut(w).zip(gamma.par_iter()).for_each(|(out, &g)| {
        let win = sinc_weights(g.max(T::zero()).min(T::one()), x.len(), cfg.window);
        for (&wt, &i) in win.weights.iter().zip(&win.indices) {
            for (o, &v) in out.iter_mut().zip(x.point(i)) {
                *o = *o + wt * v;
            }
        }
    });
    Signal::new(w, data).expect("width is preserved")
}

/// Tangent-space sinc interpolation; the warp is clamped to `[0, 1]`.
pub fn warp_signal_riemannian<T: Real>(desc: &ManifoldDescriptor, x: &Signal<T>, gamma: &[T], cfg: &SincConfig) -> Result<Signal<T>> {
    let clamped: Vec<T> = gamma.iter().map(|g| g.max(T::zero()).min(T::one())).collect();
    Ok(warp_frozen(desc, x, &clamped, cfg)?.warped)
}

/// Everything the loss needs to be recorded as a function of the warp values alone.
#[derive(Clone, Debug)]
pub struct FrozenWarp<T> {
    pub len: usize,
    pub window: usize,
    /// Per output index, `floor(g * T)`.
    pub floors: Vec<i64>,
    /// Tangent bases, `Z x A`; zero for Euclidean components.
    pub bases: Vec<T>,
    /// Window points in the tangent space of their base, `Z x (2L + 1) x A`.
    pub tangents: Vec<T>,
    pub warped: Signal<T>,
    /// Output indices whose refinement displacement grew after the first step.
    pub refine_violations: usize,
}

struct PointResult<T> {
    floor: i64,
    base: Vec<T>,
    tangents: Vec<T>,
    out: Vec<T>,
    violation: bool,
}

/// Interpolates `x` at the raw warp values `gamma` (no clamping) and records the frozen
/// tangent bases and window data.
pub fn warp_frozen<T: Real>(desc: &ManifoldDescriptor, x: &Signal<T>, gamma: &[T], cfg: &SincConfig) -> Result<FrozenWarp<T>> {
    let a = desc.ambient_dim();
    if x.width() != a {
        return Err(RtwError::DimensionMismatch { expected: a, found: x.width() });
    }
    if x.is_empty() {
        return Err(RtwError::config("resample", "cannot interpolate an empty signal"));
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(RtwError::NonFinite("resample"));
    }
    let taps = 2 * cfg.window + 1;
    let comps = desc.components();
    let results: Vec<PointResult<T>> = gamma
        .par_iter()
        .map(|&g| {
            let win = sinc_weights(g, x.len(), cfg.window);
            let mut base = vec![T::zero(); a];
            let mut tangents = vec![T::zero(); taps * a];
            let mut out = vec![T::zero(); a];
            let mut violation = false;
            let centre = (win.floor.clamp(1, x.len() as i64) - 1) as usize;
            for &(m, off) in &comps {
                let n = m.ambient_dim();
                let seg = |i: usize| &x.point(i)[off..off + n];
                if let ManifoldDescriptor::Euclidean(_) = m {
                    for (j, (&wt, &i)) in win.weights.iter().zip(&win.indices).enumerate() {
                        tangents[j * a + off..j * a + off + n].copy_from_slice(seg(i));
                        for (o, &v) in out[off..off + n].iter_mut().zip(seg(i)) {
                            *o = *o + wt * v;
                        }
                    }
                    continue;
                }
                let mut b = seg(centre).to_vec();
                let mut last_move: Option<T> = None;
                let mut step = 0;
                loop {
                    let frame = m.frame(&b)?;
                    let mut yhat = vec![T::zero(); n];
                    for (j, (&wt, &i)) in win.weights.iter().zip(&win.indices).enumerate() {
                        let y = frame.log(seg(i))?;
                        for (acc, &v) in yhat.iter_mut().zip(&y) {
                            *acc = *acc + wt * v;
                        }
                        tangents[j * a + off..j * a + off + n].copy_from_slice(&y);
                    }
                    let p = frame.exp(&yhat)?;
                    if step == cfg.refine_iters {
                        base[off..off + n].copy_from_slice(&b);
                        out[off..off + n].copy_from_slice(&p);
                        break;
                    }
                    let moved = m.dist(&b, &p)?;
                    if let Some(prev) = last_move {
                        if moved > prev {
                            violation = true;
                        }
                    }
                    if moved.to_f64().unwrap_or(f64::INFINITY) < cfg.refine_tol {
                        base[off..off + n].copy_from_slice(&b);
                        out[off..off + n].copy_from_slice(&p);
                        break;
                    }
                    last_move = Some(moved);
                    b = p;
                    step += 1;
                }
            }
            Ok(PointResult { floor: win.floor, base, tangents, out, violation })
        })
        .collect::<Result<_>>()?;
    let z = gamma.len();
    let mut frozen = FrozenWarp {
        len: x.len(),
        window: cfg.window,
        floors: Vec::with_capacity(z),
        bases: Vec::with_capacity(z * a),
        tangents: Vec::with_capacity(z * taps * a),
        warped: Signal::new(a, Vec::with_capacity(z * a)).unwrap_or_else(|_| unreachable!()),
        refine_violations: 0,
    };
    let mut warped = Vec::with_capacity(z * a);
    for r in results {
        frozen.floors.push(r.floor);
        frozen.bases.extend(r.base);
        frozen.tangents.extend(r.tangents);
        warped.extend(r.out);
        frozen.refine_violations += r.violation as usize;
    }
    if warped.iter().any(|v| !v.is_finite()) {
        return Err(RtwError::NonFinite("resample"));
    }
    frozen.warped = Signal::new(a, warped)?;
    if frozen.refine_violations > 0 {
        log::debug!("tangent refinement displacement grew at {} indices", frozen.refine_violations);
    }
    Ok(frozen)
}

/// Records the interpolation of every signal as a function of `gamma` (`[N, Z]`), holding
/// windows and tangent bases fixed. Returns the warped points, `[N * Z, A]`.
pub fn record_warp<'t, T: Real>(desc: &ManifoldDescriptor, tape: &'t Tape<T>, gamma: Var<'t, T>, frozen: &[FrozenWarp<T>]) -> Result<Var<'t, T>> {
    let shape = gamma.shape();
    let (n, z) = (shape[0], shape[1]);
    if frozen.len() != n || frozen.iter().any(|f| f.floors.len() != z) {
        return Err(RtwError::config("resample", "frozen windows do not match the warp matrix"));
    }
    let a = desc.ambient_dim();
    let window = frozen[0].window;
    let taps = 2 * window + 1;
    let rows = n * z;
    let lens: Vec<T> = frozen.iter().flat_map(|f| std::iter::repeat(T::from_count(f.len)).take(z)).collect();
    let offsets: Vec<T> = frozen
        .iter()
        .flat_map(|f| f.floors.iter().flat_map(move |&fl| (fl - window as i64..=fl + window as i64).map(|m| T::from_i64(m).unwrap())))
        .collect();
    let pos = gamma.reshape(vec![rows, 1])?.mul(&tape.constant(Tensor::new(vec![rows, 1], lens)?))?;
    let weights = tape.constant(Tensor::new(vec![rows, taps], offsets)?).sub(&pos)?.sinc();
    let tangents: Vec<T> = frozen.iter().flat_map(|f| f.tangents.iter().copied()).collect();
    let y = tape.constant(Tensor::new(vec![rows, taps, a], tangents)?);
    let yhat = weights.reshape(vec![rows, taps, 1])?.mul(&y)?.sum_axis(1)?;
    let bases: Vec<T> = frozen.iter().flat_map(|f| f.bases.iter().copied()).collect();
    record_exp(desc, tape, &bases, yhat)
}
