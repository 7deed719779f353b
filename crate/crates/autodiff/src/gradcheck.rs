//! Finite-difference checking utilities.
//!
//! [`RandomExpr`] builds random composites of the tape primitives together with an
//! independent plain-`f64` evaluator, so reverse-mode gradients can be compared against
//! central differences of code that never touches the tape.

use rand::Rng;

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Central differences of `f` at `x` with step `h * max(1, |x_i|)`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest `|a - b| / max(|b|, floor)` over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Random expression over an input vector of length `dim`; every node is a vector of that length.
#[derive(Clone, Debug)]
pub enum RandomExpr {
    Input,
    Constant(Vec<f64>),
    Add(Box<RandomExpr>, Box<RandomExpr>),
    Sub(Box<RandomExpr>, Box<RandomExpr>),
    Mul(Box<RandomExpr>, Box<RandomExpr>),
    /// `a / (b^2 + 1)`
    SafeDiv(Box<RandomExpr>, Box<RandomExpr>),
    Neg(Box<RandomExpr>),
    Sin(Box<RandomExpr>),
    Cos(Box<RandomExpr>),
    /// `exp(sin(a))`
    ExpSin(Box<RandomExpr>),
    /// `ln(a^2 + 1)`
    LogSq(Box<RandomExpr>),
    /// `sqrt(a^2 + 1)`
    SqrtSq(Box<RandomExpr>),
    /// `acos(0.5 sin(a))`
    AcosHalfSin(Box<RandomExpr>),
    /// `asin(0.5 cos(a))`
    AsinHalfCos(Box<RandomExpr>),
    /// `(a^2 + 1)^p`
    PowSq(Box<RandomExpr>, f64),
    Sinc(Box<RandomExpr>),
    Relu(Box<RandomExpr>),
    Clamp(Box<RandomExpr>, f64, f64),
    /// `A a` for a constant square matrix.
    MatVec(Vec<f64>, Box<RandomExpr>),
    /// `a + sum(a)` (broadcast scalar)
    PlusSum(Box<RandomExpr>),
    /// `a * ||a||` (broadcast scalar)
    TimesNorm(Box<RandomExpr>),
}

impl RandomExpr {
    /// Draws an expression of depth at most `depth` over vectors of length `dim`.
    pub fn generate(rng: &mut impl Rng, depth: usize, dim: usize) -> Self {
        use RandomExpr::*;
        if depth == 0 || rng.gen_bool(0.15) {
            return if rng.gen_bool(0.75) {
                Input
            } else {
                Constant((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            };
        }
        let sub = |rng: &mut _| Box::new(Self::generate(rng, depth - 1, dim));
        match rng.gen_range(0..20) {
            0 => Add(sub(rng), sub(rng)),
            1 => Sub(sub(rng), sub(rng)),
            2 => Mul(sub(rng), sub(rng)),
            3 => SafeDiv(sub(rng), sub(rng)),
            4 => Neg(sub(rng)),
            5 => Sin(sub(rng)),
            6 => Cos(sub(rng)),
            7 => ExpSin(sub(rng)),
            8 => LogSq(sub(rng)),
            9 => SqrtSq(sub(rng)),
            10 => AcosHalfSin(sub(rng)),
            11 => PowSq(sub(rng), rng.gen_range(-1.5..1.5)),
            12 => Sinc(sub(rng)),
            13 => Relu(sub(rng)),
            14 => {
                let lo = rng.gen_range(-1.0..0.0);
                Clamp(sub(rng), lo, lo + rng.gen_range(0.5..2.0))
            }
            15 | 16 => MatVec((0..dim * dim).map(|_| rng.gen_range(-0.7..0.7)).collect(), sub(rng)),
            17 => PlusSum(sub(rng)),
            18 => AsinHalfCos(sub(rng)),
            _ => TimesNorm(sub(rng)),
        }
    }

    /// Plain evaluation; `kink` receives the smallest distance of any relu/clamp argument
    /// to its non-differentiable point.
    pub fn eval(&self, x: &[f64], kink: &mut f64) -> Vec<f64> {
        use RandomExpr::*;
        let map = |v: Vec<f64>, f: &dyn Fn(f64) -> f64| v.into_iter().map(f).collect::<Vec<_>>();
        let zip = |a: Vec<f64>, b: Vec<f64>, f: &dyn Fn(f64, f64) -> f64| a.into_iter().zip(b).map(|(a, b)| f(a, b)).collect::<Vec<_>>();
        match self {
            Input => x.to_vec(),
            Constant(c) => c.clone(),
            Add(a, b) => zip(a.eval(x, kink), b.eval(x, kink), &|a, b| a + b),
            Sub(a, b) => zip(a.eval(x, kink), b.eval(x, kink), &|a, b| a - b),
            Mul(a, b) => zip(a.eval(x, kink), b.eval(x, kink), &|a, b| a * b),
            SafeDiv(a, b) => zip(a.eval(x, kink), b.eval(x, kink), &|a, b| a / (b * b + 1.0)),
            Neg(a) => map(a.eval(x, kink), &|v| -v),
            Sin(a) => map(a.eval(x, kink), &f64::sin),
            Cos(a) => map(a.eval(x, kink), &f64::cos),
            ExpSin(a) => map(a.eval(x, kink), &|v| v.sin().exp()),
            LogSq(a) => map(a.eval(x, kink), &|v| (v * v + 1.0).ln()),
            SqrtSq(a) => map(a.eval(x, kink), &|v| (v * v + 1.0).sqrt()),
            AcosHalfSin(a) => map(a.eval(x, kink), &|v| (0.5 * v.sin()).acos()),
            AsinHalfCos(a) => map(a.eval(x, kink), &|v| (0.5 * v.cos()).asin()),
            PowSq(a, p) => map(a.eval(x, kink), &|v| (v * v + 1.0).powf(*p)),
            Sinc(a) => map(a.eval(x, kink), &|v| {
                let t = std::f64::consts::PI * v;
                if t == 0.0 {
                    1.0
                } else {
                    t.sin() / t
                }
            }),
            Relu(a) => {
                let v = a.eval(x, kink);
                for &e in &v {
                    *kink = kink.min(e.abs());
                }
                map(v, &|e| e.max(0.0))
            }
            Clamp(a, lo, hi) => {
                let v = a.eval(x, kink);
                for &e in &v {
                    *kink = kink.min((e - lo).abs()).min((e - hi).abs());
                }
                map(v, &|e| e.max(*lo).min(*hi))
            }
            MatVec(m, a) => {
                let v = a.eval(x, kink);
                let n = v.len();
                (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect()
            }
            PlusSum(a) => {
                let v = a.eval(x, kink);
                let s: f64 = v.iter().sum();
                map(v, &|e| e + s)
            }
            TimesNorm(a) => {
                let v = a.eval(x, kink);
                let n = v.iter().map(|e| e * e).sum::<f64>().sqrt();
                map(v, &|e| e * n)
            }
        }
    }

    /// Records the expression on `tape` with `x` as the input node.
    pub fn record<'t>(&self, tape: &'t Tape<f64>, x: Var<'t, f64>) -> Result<Var<'t, f64>> {
        use RandomExpr::*;
        let n = x.shape()[0];
        let one = tape.scalar(1.0);
        Ok(match self {
            Input => x,
            Constant(c) => tape.constant(Tensor::from_vec(c.clone())),
            Add(a, b) => a.record(tape, x)?.add(&b.record(tape, x)?)?,
            Sub(a, b) => a.record(tape, x)?.sub(&b.record(tape, x)?)?,
            Mul(a, b) => a.record(tape, x)?.mul(&b.record(tape, x)?)?,
            SafeDiv(a, b) => {
                let bv = b.record(tape, x)?;
                a.record(tape, x)?.div(&bv.mul(&bv)?.add(&one)?)?
            }
            Neg(a) => a.record(tape, x)?.neg(),
            Sin(a) => a.record(tape, x)?.sin(),
            Cos(a) => a.record(tape, x)?.cos(),
            ExpSin(a) => a.record(tape, x)?.sin().exp(),
            LogSq(a) => a.record(tape, x)?.powf(2.0).offset(1.0).ln(),
            SqrtSq(a) => {
                let v = a.record(tape, x)?;
                v.mul(&v)?.offset(1.0).sqrt()
            }
            AcosHalfSin(a) => a.record(tape, x)?.sin().scale(0.5).acos(),
            AsinHalfCos(a) => a.record(tape, x)?.cos().scale(0.5).asin(),
            PowSq(a, p) => {
                let v = a.record(tape, x)?;
                v.mul(&v)?.add(&one)?.powf(*p)
            }
            Sinc(a) => a.record(tape, x)?.sinc(),
            Relu(a) => a.record(tape, x)?.relu(),
            Clamp(a, lo, hi) => a.record(tape, x)?.clamp(*lo, *hi),
            MatVec(m, a) => {
                let mat = tape.constant(Tensor::new(vec![n, n], m.clone())?);
                let col = a.record(tape, x)?.reshape(vec![n, 1])?;
                mat.matmul(&col)?.reshape(vec![n])?
            }
            PlusSum(a) => {
                let v = a.record(tape, x)?;
                v.add(&v.sum())?
            }
            TimesNorm(a) => {
                let v = a.record(tape, x)?;
                let nrm = v.reshape(vec![1, n])?.norm_last();
                v.mul(&nrm)?
            }
        })
    }
}
