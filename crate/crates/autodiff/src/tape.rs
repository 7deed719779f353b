//! Append-only computation tape and reverse sweep.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{AutodiffError, Result};
use crate::linalg::{self, SymEigen};
use crate::scalar::{sinc, sinc_prime, Real};
use crate::tensor::{broadcast_shape, zip_broadcast, Tensor};

/// Spectral function applied by [`Var::sym_fn`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymFn {
    Exp,
    /// Natural log with eigenvalues clamped below at `1e-12`.
    Log,
    Sqrt,
}

impl SymFn {
    fn value<T: Real>(self, x: T) -> T {
        match self {
            SymFn::Exp => x.exp(),
            SymFn::Log => x.max(T::guard(1e-12)).ln(),
            SymFn::Sqrt => x.max(T::zero()).sqrt(),
        }
    }

    fn derivative<T: Real>(self, x: T) -> T {
        match self {
            SymFn::Exp => x.exp(),
            SymFn::Log => {
                if x < T::guard(1e-12) {
                    T::zero()
                } else {
                    x.recip()
                }
            }
            SymFn::Sqrt => {
                if x > T::zero() {
                    T::lit(0.5) / x.sqrt()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, T),
    Offset(usize),
    MatMul(usize, usize),
    BatchMatMul(usize, usize),
    Transpose(usize),
    Sum(usize),
    SumAxis(usize, usize),
    Relu(usize),
    Clamp(usize, T, T),
    Sin(usize),
    Cos(usize),
    Acos(usize, T),
    Asin(usize, T),
    Sqrt(usize),
    Exp(usize),
    Ln(usize),
    Powf(usize, T),
    Sinc(usize),
    NormLast(usize),
    Gather(usize, Rc<[usize]>),
    Reshape(usize),
    ConcatLast(Vec<usize>),
    SymFn(usize, SymFn, Rc<Vec<SymEigen<T>>>),
    Cholesky(usize),
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Records tensor operations so that gradients of a scalar can be pulled back to leaves.
///
/// The tape is single-writer: build one per forward pass and drop it afterwards.
pub struct Tape<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Real> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Real> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable leaf.
    pub fn var(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Op::Leaf, value, false)
    }

    pub fn scalar(&self, v: T) -> Var<'_, T> {
        self.constant(Tensor::scalar(v))
    }

    fn push(&self, op: Op<T>, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn check(&self, v: &Var<'_, T>) -> Result<()> {
        if std::ptr::eq(v.tape, self) {
            Ok(())
        } else {
            Err(AutodiffError::ForeignVariable)
        }
    }

    /// Gradients of the scalar `loss` with respect to each of `wrt`.
    pub fn grad(&self, loss: Var<'_, T>, wrt: &[Var<'_, T>]) -> Result<Vec<Tensor<T>>> {
        self.check(&loss)?;
        for w in wrt {
            self.check(w)?;
        }
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.id].value;
        if lv.numel() != 1 {
            return Err(AutodiffError::NotScalar(lv.shape().to_vec()));
        }
        if !lv.is_finite() {
            return Err(AutodiffError::NonFinite("loss"));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![T::one()]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !nodes[id].requires_grad {
                continue;
            }
            backward(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        let out = wrt
            .iter()
            .map(|w| {
                let shape = nodes[w.id].value.shape().to_vec();
                let data = match grads.get(w.id) {
                    Some(Some(g)) => g.clone(),
                    _ => vec![T::zero(); nodes[w.id].value.numel()],
                };
                Tensor::new(shape, data).expect("gradient shape")
            })
            .collect();
        Ok(out)
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], nodes: &[Node<T>], id: usize, contribution: Vec<T>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => {
            for (a, b) in g.iter_mut().zip(contribution) {
                *a = *a + b;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

/// Reduces a gradient of broadcast shape `out` back onto an input of shape `input`.
fn unbroadcast<T: Real>(out: &[usize], input: &[usize], g: &[T], f: impl Fn(usize, usize) -> T) -> Vec<T> {
    let n: usize = input.iter().product();
    let mut acc = vec![T::zero(); n];
    zip_broadcast(out, input, out, |o, ia, _| {
        acc[ia] = acc[ia] + g[o] * f(o, ia);
    });
    acc
}

fn elementwise<T: Real>(x: &[T], g: &[T], f: impl Fn(T) -> T) -> Vec<T> {
    x.iter().zip(g).map(|(&x, &g)| g * f(x)).collect()
}

fn backward<T: Real>(nodes: &[Node<T>], id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let out_shape = nodes[id].value.shape();
    let out = nodes[id].value.data();
    let val = |i: usize| nodes[i].value.data();
    let shp = |i: usize| nodes[i].value.shape();
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            let ga = unbroadcast(out_shape, shp(*a), g, |_, _| T::one());
            accumulate(grads, nodes, *a, ga);
            let gb = unbroadcast(out_shape, shp(*b), g, |_, _| T::one());
            accumulate(grads, nodes, *b, gb);
        }
        Op::Sub(a, b) => {
            let ga = unbroadcast(out_shape, shp(*a), g, |_, _| T::one());
            accumulate(grads, nodes, *a, ga);
            let gb = unbroadcast(out_shape, shp(*b), g, |_, _| -T::one());
            accumulate(grads, nodes, *b, gb);
        }
        Op::Mul(a, b) | Op::Div(a, b) => {
            let is_div = matches!(nodes[id].op, Op::Div(..));
            let (av, bv) = (val(*a), val(*b));
            let (sa, sb) = (shp(*a), shp(*b));
            if nodes[*a].requires_grad {
                let mut ga = vec![T::zero(); av.len()];
                zip_broadcast(out_shape, sa, sb, |o, ia, ib| {
                    let d = if is_div { bv[ib].recip() } else { bv[ib] };
                    ga[ia] = ga[ia] + g[o] * d;
                });
                accumulate(grads, nodes, *a, ga);
            }
            if nodes[*b].requires_grad {
                let mut gb = vec![T::zero(); bv.len()];
                zip_broadcast(out_shape, sa, sb, |o, ia, ib| {
                    let d = if is_div { -out[o] / bv[ib] } else { av[ia] };
                    gb[ib] = gb[ib] + g[o] * d;
                });
                accumulate(grads, nodes, *b, gb);
            }
        }
        Op::Neg(a) => accumulate(grads, nodes, *a, g.iter().map(|&x| -x).collect()),
        Op::Scale(a, c) => accumulate(grads, nodes, *a, g.iter().map(|&x| x * *c).collect()),
        Op::Offset(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::MatMul(a, b) => {
            let (m, k) = (shp(*a)[0], shp(*a)[1]);
            let n = shp(*b)[1];
            if nodes[*a].requires_grad {
                let bt = linalg::transpose(val(*b), k, n);
                accumulate(grads, nodes, *a, linalg::matmul(g, &bt, m, n, k));
            }
            if nodes[*b].requires_grad {
                let at = linalg::transpose(val(*a), m, k);
                accumulate(grads, nodes, *b, linalg::matmul(&at, g, k, m, n));
            }
        }
        Op::BatchMatMul(a, b) => {
            let (ba, m, k) = (shp(*a)[0], shp(*a)[1], shp(*a)[2]);
            let (bb, n) = (shp(*b)[0], shp(*b)[2]);
            let batch = ba.max(bb);
            let (av, bv) = (val(*a), val(*b));
            let mut ga = nodes[*a].requires_grad.then(|| vec![T::zero(); av.len()]);
            let mut gb = nodes[*b].requires_grad.then(|| vec![T::zero(); bv.len()]);
            for i in 0..batch {
                let ia = if ba == 1 { 0 } else { i };
                let ib = if bb == 1 { 0 } else { i };
                let gi = &g[i * m * n..(i + 1) * m * n];
                let ai = &av[ia * m * k..(ia + 1) * m * k];
                let bi = &bv[ib * k * n..(ib + 1) * k * n];
                if let Some(ga) = ga.as_mut() {
                    let c = linalg::matmul(gi, &linalg::transpose(bi, k, n), m, n, k);
                    for (d, v) in ga[ia * m * k..(ia + 1) * m * k].iter_mut().zip(c) {
                        *d = *d + v;
                    }
                }
                if let Some(gb) = gb.as_mut() {
                    let c = linalg::matmul(&linalg::transpose(ai, m, k), gi, k, m, n);
                    for (d, v) in gb[ib * k * n..(ib + 1) * k * n].iter_mut().zip(c) {
                        *d = *d + v;
                    }
                }
            }
            if let Some(ga) = ga {
                accumulate(grads, nodes, *a, ga);
            }
            if let Some(gb) = gb {
                accumulate(grads, nodes, *b, gb);
            }
        }
        Op::Transpose(a) => {
            let (m, n) = (shp(*a)[0], shp(*a)[1]);
            accumulate(grads, nodes, *a, linalg::transpose(g, n, m));
        }
        Op::Sum(a) => accumulate(grads, nodes, *a, vec![g[0]; val(*a).len()]),
        Op::SumAxis(a, axis) => {
            let s = shp(*a);
            let outer: usize = s[..*axis].iter().product();
            let len = s[*axis];
            let inner: usize = s[axis + 1..].iter().product();
            let mut ga = vec![T::zero(); val(*a).len()];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        ga[(o * len + l) * inner + i] = g[o * inner + i];
                    }
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Relu(a) => accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| if x > T::zero() { T::one() } else { T::zero() })),
        Op::Clamp(a, lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| if x >= lo && x <= hi { T::one() } else { T::zero() }))
        }
        Op::Sin(a) => accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| x.cos())),
        Op::Cos(a) => accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| -x.sin())),
        Op::Acos(a, guard) => {
            let bound = T::one() - *guard;
            accumulate(
                grads,
                nodes,
                *a,
                elementwise(val(*a), g, |x| {
                    if x.abs() > bound {
                        T::zero()
                    } else {
                        -(T::one() - x * x).sqrt().recip()
                    }
                }),
            )
        }
        Op::Asin(a, guard) => {
            let bound = T::one() - *guard;
            accumulate(
                grads,
                nodes,
                *a,
                elementwise(val(*a), g, |x| {
                    if x.abs() > bound {
                        T::zero()
                    } else {
                        (T::one() - x * x).sqrt().recip()
                    }
                }),
            )
        }
        Op::Sqrt(a) => {
            let ga = out.iter().zip(g).map(|(&y, &g)| if y > T::zero() { g * T::lit(0.5) / y } else { T::zero() }).collect();
            accumulate(grads, nodes, *a, ga)
        }
        Op::Exp(a) => accumulate(grads, nodes, *a, out.iter().zip(g).map(|(&y, &g)| g * y).collect()),
        Op::Ln(a) => accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| x.recip())),
        Op::Powf(a, p) => {
            let p = *p;
            accumulate(grads, nodes, *a, elementwise(val(*a), g, |x| p * x.powf(p - T::one())))
        }
        Op::Sinc(a) => accumulate(grads, nodes, *a, elementwise(val(*a), g, sinc_prime)),
        Op::NormLast(a) => {
            let x = val(*a);
            let k = *shp(*a).last().unwrap_or(&1);
            let mut ga = vec![T::zero(); x.len()];
            for (r, (&nrm, &gr)) in out.iter().zip(g).enumerate() {
                if nrm > T::zero() {
                    for j in 0..k {
                        ga[r * k + j] = gr * x[r * k + j] / nrm;
                    }
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Gather(a, idx) => {
            let mut ga = vec![T::zero(); val(*a).len()];
            for (&i, &gv) in idx.iter().zip(g) {
                ga[i] = ga[i] + gv;
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Reshape(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::ConcatLast(parts) => {
            let widths: Vec<usize> = parts.iter().map(|&p| *shp(p).last().unwrap_or(&1)).collect();
            let total: usize = widths.iter().sum();
            let rows = g.len() / total.max(1);
            let mut offset = 0;
            for (&p, &w) in parts.iter().zip(&widths) {
                if nodes[p].requires_grad {
                    let mut gp = vec![T::zero(); rows * w];
                    for r in 0..rows {
                        gp[r * w..(r + 1) * w].copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    accumulate(grads, nodes, p, gp);
                }
                offset += w;
            }
        }
        Op::SymFn(a, kind, eigs) => {
            let d = *shp(*a).last().unwrap_or(&1);
            let mut ga = vec![T::zero(); val(*a).len()];
            for (b, e) in eigs.iter().enumerate() {
                let gb = linalg::symmetrize(&g[b * d * d..(b + 1) * d * d], d);
                let q = &e.vectors;
                let qt = linalg::transpose(q, d, d);
                let mut inner = linalg::matmul(&linalg::matmul(&qt, &gb, d, d, d), q, d, d, d);
                for i in 0..d {
                    for j in 0..d {
                        inner[i * d + j] = inner[i * d + j] * divided_difference(*kind, e.values[i], e.values[j]);
                    }
                }
                let gi = linalg::matmul(&linalg::matmul(q, &inner, d, d, d), &qt, d, d, d);
                ga[b * d * d..(b + 1) * d * d].copy_from_slice(&gi);
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Cholesky(a) => {
            let d = *out_shape.last().unwrap_or(&1);
            let batch = out.len() / (d * d).max(1);
            let mut ga = vec![T::zero(); out.len()];
            for b in 0..batch {
                let l = &out[b * d * d..(b + 1) * d * d];
                let gl = &g[b * d * d..(b + 1) * d * d];
                // P = Phi(L^T Lbar): lower triangle, diagonal halved.
                let mut p = linalg::matmul(&linalg::transpose(l, d, d), gl, d, d, d);
                for i in 0..d {
                    for j in 0..d {
                        if j > i {
                            p[i * d + j] = T::zero();
                        } else if i == j {
                            p[i * d + j] = p[i * d + j] * T::lit(0.5);
                        }
                    }
                }
                let linv = linalg::lower_triangular_inverse(l, d);
                let linvt = linalg::transpose(&linv, d, d);
                let s = linalg::matmul(&linalg::matmul(&linvt, &p, d, d, d), &linv, d, d, d);
                ga[b * d * d..(b + 1) * d * d].copy_from_slice(&linalg::symmetrize(&s, d));
            }
            accumulate(grads, nodes, *a, ga);
        }
    }
}

/// First divided difference of the spectral function (Daleckii-Krein kernel).
fn divided_difference<T: Real>(kind: SymFn, a: T, b: T) -> T {
    let scale = a.abs().max(b.abs()).max(T::one());
    if (a - b).abs() <= T::lit(1e-9) * scale {
        kind.derivative((a + b) * T::lit(0.5))
    } else {
        (kind.value(a) - kind.value(b)) / (a - b)
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, lhs: a.to_vec(), rhs: b.to_vec() }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Tensor<T> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor<T>) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    /// Value of a one-element node.
    pub fn item(&self) -> Result<T> {
        self.with_value(|v| v.item())
    }

    fn unary(&self, op: Op<T>, f: impl Fn(T) -> T) -> Self {
        let value = self.with_value(|v| v.map(f));
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(op, value, rg)
    }

    fn binary(&self, other: &Self, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.tape.check(other)?;
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            let shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| shape_err(name, a.shape(), b.shape()))?;
            let numel = shape.iter().product();
            let mut data = vec![T::zero(); numel];
            let (ad, bd) = (a.data(), b.data());
            zip_broadcast(&shape, a.shape(), b.shape(), |o, ia, ib| data[o] = f(ad[ia], bd[ib]));
            Tensor::new(shape, data)?
        };
        let op = match name {
            "add" => Op::Add(self.id, other.id),
            "sub" => Op::Sub(self.id, other.id),
            "mul" => Op::Mul(self.id, other.id),
            _ => Op::Div(self.id, other.id),
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(op, value, rg))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.binary(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.binary(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.binary(other, "mul", |a, b| a * b)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.binary(other, "div", |a, b| a / b)
    }

    pub fn neg(&self) -> Self {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: T) -> Self {
        self.unary(Op::Scale(self.id, c), |x| x * c)
    }

    /// Addition of a constant.
    pub fn offset(&self, c: T) -> Self {
        self.unary(Op::Offset(self.id), |x| x + c)
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.tape.check(other)?;
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let value = {
            let nodes = self.tape.nodes.borrow();
            let data = linalg::matmul(nodes[self.id].value.data(), nodes[other.id].value.data(), sa[0], sa[1], sb[1]);
            Tensor::new(vec![sa[0], sb[1]], data)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(Op::MatMul(self.id, other.id), value, rg))
    }

    /// Batched matrix product `[B, m, k] x [B, k, n]`; a batch of one broadcasts.
    pub fn bmm(&self, other: &Self) -> Result<Self> {
        self.tape.check(other)?;
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[2] != sb[1] || (sa[0] != sb[0] && sa[0] != 1 && sb[0] != 1) {
            return Err(shape_err("bmm", &sa, &sb));
        }
        let (m, k, n) = (sa[1], sa[2], sb[2]);
        let batch = sa[0].max(sb[0]);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (av, bv) = (nodes[self.id].value.data(), nodes[other.id].value.data());
            let mut data = vec![T::zero(); batch * m * n];
            for i in 0..batch {
                let ia = if sa[0] == 1 { 0 } else { i };
                let ib = if sb[0] == 1 { 0 } else { i };
                linalg::matmul_into(
                    &av[ia * m * k..(ia + 1) * m * k],
                    &bv[ib * k * n..(ib + 1) * k * n],
                    m,
                    k,
                    n,
                    &mut data[i * m * n..(i + 1) * m * n],
                );
            }
            Tensor::new(vec![batch, m, n], data)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(Op::BatchMatMul(self.id, other.id), value, rg))
    }

    /// Transpose of a rank-2 tensor.
    pub fn t(&self) -> Result<Self> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(shape_err("transpose", &s, &[]));
        }
        let value = self.with_value(|v| Tensor::new(vec![s[1], s[0]], linalg::transpose(v.data(), s[0], s[1])))?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::Transpose(self.id), value, rg))
    }

    pub fn sum(&self) -> Self {
        let value = self.with_value(|v| Tensor::scalar(v.data().iter().copied().sum()));
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(Op::Sum(self.id), value, rg)
    }

    pub fn mean(&self) -> Self {
        let n = self.with_value(|v| v.numel());
        self.sum().scale(T::from_count(n).recip())
    }

    /// Sum over one axis, removing it.
    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        let s = self.shape();
        if axis >= s.len() {
            return Err(shape_err("sum_axis", &s, &[axis]));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let value = self.with_value(|v| {
            let d = v.data();
            let mut data = vec![T::zero(); outer * inner];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        data[o * inner + i] = data[o * inner + i] + d[(o * len + l) * inner + i];
                    }
                }
            }
            let mut shape = s.clone();
            shape.remove(axis);
            Tensor::new(shape, data)
        })?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::SumAxis(self.id, axis), value, rg))
    }

    /// `max(x, 0)`; the subgradient at zero is zero.
    pub fn relu(&self) -> Self {
        self.unary(Op::Relu(self.id), |x| x.max(T::zero()))
    }

    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.unary(Op::Clamp(self.id, lo, hi), |x| x.max(lo).min(hi))
    }

    pub fn sin(&self) -> Self {
        self.unary(Op::Sin(self.id), |x| x.sin())
    }

    pub fn cos(&self) -> Self {
        self.unary(Op::Cos(self.id), |x| x.cos())
    }

    /// Arc cosine with the argument clamped to `[-1 + 1e-12, 1 - 1e-12]`; the derivative
    /// vanishes wherever the clamp is active.
    pub fn acos(&self) -> Self {
        let guard = T::guard(1e-12);
        let bound = T::one() - guard;
        self.unary(Op::Acos(self.id, guard), move |x| x.max(-bound).min(bound).acos())
    }

    /// Arc sine with the same guarded clamp as [`Var::acos`].
    pub fn asin(&self) -> Self {
        let guard = T::guard(1e-12);
        let bound = T::one() - guard;
        self.unary(Op::Asin(self.id, guard), move |x| x.max(-bound).min(bound).asin())
    }

    pub fn sqrt(&self) -> Self {
        self.unary(Op::Sqrt(self.id), |x| x.sqrt())
    }

    pub fn exp(&self) -> Self {
        self.unary(Op::Exp(self.id), |x| x.exp())
    }

    pub fn ln(&self) -> Self {
        self.unary(Op::Ln(self.id), |x| x.ln())
    }

    pub fn powf(&self, p: T) -> Self {
        self.unary(Op::Powf(self.id, p), |x| x.powf(p))
    }

    /// Normalized sinc, `sin(pi x) / (pi x)`.
    pub fn sinc(&self) -> Self {
        self.unary(Op::Sinc(self.id), sinc)
    }

    /// Euclidean norm over the last axis (the gradient at the zero vector is zero).
    pub fn norm_last(&self) -> Self {
        let value = self.with_value(|v| {
            let s = v.shape();
            let k = *s.last().unwrap_or(&1);
            let data: Vec<T> = v.data().chunks(k.max(1)).map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt()).collect();
            let shape = if s.is_empty() { Vec::new() } else { s[..s.len() - 1].to_vec() };
            Tensor::new(shape, data).expect("norm shape")
        });
        let rg = self.tape.requires(&[self.id]);
        self.tape.push(Op::NormLast(self.id), value, rg)
    }

    /// Selects flat elements `indices` into a tensor of `shape`.
    pub fn gather(&self, indices: Rc<[usize]>, shape: Vec<usize>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != indices.len() {
            return Err(shape_err("gather", &shape, &[indices.len()]));
        }
        let value = self.with_value(|v| {
            let d = v.data();
            if let Some(&bad) = indices.iter().find(|&&i| i >= d.len()) {
                return Err(shape_err("gather", v.shape(), &[bad]));
            }
            Tensor::new(shape, indices.iter().map(|&i| d[i]).collect())
        })?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::Gather(self.id, indices), value, rg))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let value = self.value().reshaped(shape)?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::Reshape(self.id), value, rg))
    }

    /// Concatenates tensors sharing all but the last axis.
    pub fn concat_last(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| shape_err("concat", &[], &[]))?;
        let tape = first.tape;
        let lead = {
            let s = first.shape();
            s[..s.len().saturating_sub(1)].to_vec()
        };
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            tape.check(p)?;
            let s = p.shape();
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(shape_err("concat", &first.shape(), &s));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = vec![T::zero(); rows * total];
        {
            let nodes = tape.nodes.borrow();
            let mut offset = 0;
            for (p, &w) in parts.iter().zip(&widths) {
                let d = nodes[p.id].value.data();
                for r in 0..rows {
                    data[r * total + offset..r * total + offset + w].copy_from_slice(&d[r * w..(r + 1) * w]);
                }
                offset += w;
            }
        }
        let mut shape = lead;
        shape.push(total);
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = tape.requires(&ids);
        Ok(tape.push(Op::ConcatLast(ids), Tensor::new(shape, data)?, rg))
    }

    /// Spectral function of a batch of symmetric matrices, shape `[.., D, D]`.
    pub fn sym_fn(&self, kind: SymFn) -> Result<Self> {
        let s = self.shape();
        let d = square_dim(&s, "sym_fn")?;
        let (value, eigs) = self.with_value(|v| -> Result<_> {
            let mut data = Vec::with_capacity(v.numel());
            let mut eigs = Vec::with_capacity(v.numel() / (d * d).max(1));
            for block in v.data().chunks(d * d) {
                let e = SymEigen::new(block, d)?;
                data.extend(e.apply(|x| kind.value(x)));
                eigs.push(e);
            }
            Ok((Tensor::new(s.clone(), data)?, eigs))
        })?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::SymFn(self.id, kind, Rc::new(eigs)), value, rg))
    }

    /// Lower Cholesky factors of a batch of SPD matrices, shape `[.., D, D]`.
    pub fn cholesky(&self) -> Result<Self> {
        let s = self.shape();
        let d = square_dim(&s, "cholesky")?;
        let value = self.with_value(|v| -> Result<_> {
            let mut data = Vec::with_capacity(v.numel());
            for block in v.data().chunks(d * d) {
                data.extend(linalg::cholesky(block, d)?);
            }
            Tensor::new(s.clone(), data)
        })?;
        let rg = self.tape.requires(&[self.id]);
        Ok(self.tape.push(Op::Cholesky(self.id), value, rg))
    }
}

fn square_dim(s: &[usize], op: &'static str) -> Result<usize> {
    if s.len() < 2 || s[s.len() - 1] != s[s.len() - 2] {
        return Err(shape_err(op, s, &[]));
    }
    Ok(s[s.len() - 1])
}

macro_rules! binary_operator {
    ($trait:ident, $method:ident) => {
        impl<'t, T: Real> std::ops::$trait for Var<'t, T> {
            type Output = Var<'t, T>;

            /// Panics on incompatible shapes; use the named method for a `Result`.
            fn $method(self, rhs: Self) -> Self::Output {
                Var::$method(&self, &rhs).expect(concat!("shape mismatch in ", stringify!($method)))
            }
        }
    };
}

binary_operator!(Add, add);
binary_operator!(Sub, sub);
binary_operator!(Mul, mul);
binary_operator!(Div, div);

impl<'t, T: Real> std::ops::Neg for Var<'t, T> {
    type Output = Var<'t, T>;

    fn neg(self) -> Self::Output {
        Var::neg(&self)
    }
}
