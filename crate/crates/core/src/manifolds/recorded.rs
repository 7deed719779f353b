//! Differentiable versions of the exponential map and the distances, recorded on a tape.
//!
//! Base points and targets enter as constants; only the tangent or point argument carries
//! gradients.

use std::rc::Rc;

use rtw_autodiff::linalg::{self, SymEigen};
use rtw_autodiff::{Real, SymFn, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::ManifoldDescriptor;
use crate::error::{Result, RtwError};

/// Pointwise distance used by the alignment loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    Geodesic,
    /// Frobenius distance of Cholesky factors (SPD only).
    Cholesky,
}

/// Columns `[off, off + width)` of a `[rows, total]` variable.
fn columns<'t, T: Real>(v: Var<'t, T>, rows: usize, total: usize, off: usize, width: usize) -> Result<Var<'t, T>> {
    if off == 0 && width == total {
        return Ok(v);
    }
    let idx: Rc<[usize]> = (0..rows).flat_map(|r| (0..width).map(move |c| r * total + off + c)).collect();
    Ok(v.gather(idx, vec![rows, width])?)
}

fn column_block<T: Real>(data: &[T], rows: usize, total: usize, off: usize, width: usize) -> Vec<T> {
    (0..rows).flat_map(|r| data[r * total + off..r * total + off + width].iter().copied()).collect()
}

/// Per-row matrix function of constant symmetric blocks.
fn spectral_blocks<T: Real>(data: &[T], d: usize, f: impl Fn(T) -> T + Copy) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(data.len());
    for block in data.chunks(d * d) {
        let e = SymEigen::new(block, d)?;
        if !(e.min_value() > T::zero()) {
            return Err(RtwError::NotSpd);
        }
        out.extend(e.apply(f));
    }
    Ok(out)
}

/// `exp_{base_r}(yhat_r)` for every row `r`; `bases` is `rows x ambient` row major.
pub fn record_exp<'t, T: Real>(desc: &ManifoldDescriptor, tape: &'t Tape<T>, bases: &[T], yhat: Var<'t, T>) -> Result<Var<'t, T>> {
    let a = desc.ambient_dim();
    let rows = bases.len() / a;
    if yhat.shape() != [rows, a] {
        return Err(RtwError::DimensionMismatch { expected: rows * a, found: yhat.shape().iter().product() });
    }
    let mut parts = Vec::new();
    for (m, off) in desc.components() {
        let n = m.ambient_dim();
        let y = columns(yhat, rows, a, off, n)?;
        let b = column_block(bases, rows, a, off, n);
        let part = match m {
            ManifoldDescriptor::Euclidean(_) => y.add(&tape.constant(Tensor::new(vec![rows, n], b)?))?,
            ManifoldDescriptor::Sphere(_) => {
                let r = y.norm_last().reshape(vec![rows, 1])?;
                let base = tape.constant(Tensor::new(vec![rows, n], b)?);
                base.mul(&r.cos())?.add(&y.mul(&r.scale(T::FRAC_1_PI()).sinc())?)?
            }
            ManifoldDescriptor::Spd(d) => {
                let d = *d;
                let sqrt = tape.constant(Tensor::new(vec![rows, d, d], spectral_blocks(&b, d, |l| l.sqrt())?)?);
                let inv = tape.constant(Tensor::new(vec![rows, d, d], spectral_blocks(&b, d, |l| l.sqrt().recip())?)?);
                let y = y.reshape(vec![rows, d, d])?;
                let inner = inv.bmm(&y)?.bmm(&inv)?.sym_fn(SymFn::Exp)?;
                sqrt.bmm(&inner)?.bmm(&sqrt)?.reshape(vec![rows, n])?
            }
            ManifoldDescriptor::Product(_) => return Err(RtwError::config("manifolds", "nested products are not supported")),
        };
        parts.push(part);
    }
    if parts.len() == 1 {
        Ok(parts.pop().unwrap())
    } else {
        Ok(Var::concat_last(&parts)?)
    }
}

/// Distances between the rows of `points` and the constant rows of `targets`; shape `[rows]`.
pub fn record_dist<'t, T: Real>(
    desc: &ManifoldDescriptor,
    tape: &'t Tape<T>,
    points: Var<'t, T>,
    targets: &[T],
    kind: DistanceKind,
) -> Result<Var<'t, T>> {
    let a = desc.ambient_dim();
    let rows = targets.len() / a;
    if points.shape() != [rows, a] {
        return Err(RtwError::DimensionMismatch { expected: rows * a, found: points.shape().iter().product() });
    }
    if kind == DistanceKind::Cholesky && !matches!(desc, ManifoldDescriptor::Spd(_)) {
        return Err(RtwError::config("loss", "cholesky distance needs an spd manifold"));
    }
    let mut dists = Vec::new();
    for (m, off) in desc.components() {
        let n = m.ambient_dim();
        let x = columns(points, rows, a, off, n)?;
        let t = column_block(targets, rows, a, off, n);
        let dist = match (m, kind) {
            (ManifoldDescriptor::Euclidean(_), _) => x.sub(&tape.constant(Tensor::new(vec![rows, n], t)?))?.norm_last(),
            (ManifoldDescriptor::Sphere(_), _) => {
                let chord = x.sub(&tape.constant(Tensor::new(vec![rows, n], t)?))?.norm_last();
                chord.scale(T::lit(0.5)).asin().scale(T::lit(2.0))
            }
            (ManifoldDescriptor::Spd(d), DistanceKind::Geodesic) => {
                let d = *d;
                let inv = tape.constant(Tensor::new(vec![rows, d, d], spectral_blocks(&t, d, |l| l.sqrt().recip())?)?);
                let inner = inv.bmm(&x.reshape(vec![rows, d, d])?)?.bmm(&inv)?;
                inner.sym_fn(SymFn::Log)?.reshape(vec![rows, n])?.norm_last()
            }
            (ManifoldDescriptor::Spd(d), DistanceKind::Cholesky) => {
                let d = *d;
                let mut factors = Vec::with_capacity(t.len());
                for block in t.chunks(d * d) {
                    factors.extend(linalg::cholesky(block, d).map_err(|_| RtwError::NotSpd)?);
                }
                let target = tape.constant(Tensor::new(vec![rows, d, d], factors)?);
                x.reshape(vec![rows, d, d])?.cholesky()?.sub(&target)?.reshape(vec![rows, n])?.norm_last()
            }
            (ManifoldDescriptor::Product(_), _) => return Err(RtwError::config("manifolds", "nested products are not supported")),
        };
        dists.push(dist);
    }
    if dists.len() == 1 {
        return Ok(dists.pop().unwrap());
    }
    let cols = dists.iter().map(|d| d.reshape(vec![rows, 1])).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Var::concat_last(&cols)?.norm_last())
}
