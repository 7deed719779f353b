//! Joint parameterizations of the N warping functions and the monotonicity penalty.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw_autodiff::{Real, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};

/// How the hidden layers of the warp network are wired around each other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipMode {
    /// The output layer reads the concatenation of the input and every hidden activation.
    #[default]
    Concat,
    /// Identity skips between equally wide hidden layers, and a learned linear injection of
    /// the input into the first hidden layer.
    Residual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WarpKind {
    Mlp { hidden: Vec<usize>, skip: SkipMode },
    /// `K` sine components per signal.
    Sine { k: usize },
}

impl WarpKind {
    /// Small network used by default: hidden widths 32 and 32.
    pub fn mlp_small() -> Self {
        WarpKind::Mlp { hidden: vec![32, 32], skip: SkipMode::Concat }
    }

    /// Full-size network: hidden widths 512 and 512, output layer over 1025 concatenated features.
    pub fn mlp_full() -> Self {
        WarpKind::Mlp { hidden: vec![512, 512], skip: SkipMode::Concat }
    }
}

impl Default for WarpKind {
    fn default() -> Self {
        Self::mlp_small()
    }
}

/// Orthonormal vectors of R^N whose first member is the normalized all-ones vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet<T> {
    pub n: usize,
    /// `vectors[k]` is `b_{k+1}`.
    pub vectors: Vec<Vec<T>>,
}

/// Gram-Schmidt completion of `ones / sqrt(N)` against the standard basis; each vector's
/// first nonzero entry is made positive.
pub fn make_basis<T: Real>(n: usize) -> Result<BasisSet<T>> {
    if n < 2 {
        return Err(RtwError::config("warpnet", "at least two signals are required"));
    }
    let mut vectors: Vec<Vec<T>> = vec![vec![T::from_count(n).sqrt().recip(); n]];
    for e in 0..n {
        if vectors.len() == n {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[e] = T::one();
        for _ in 0..2 {
            for b in &vectors {
                let d: T = v.iter().zip(b).map(|(&x, &y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, &y)| *x = *x - d * y);
            }
        }
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm < T::lit(1e-8) {
            continue;
        }
        v.iter_mut().for_each(|x| *x = *x / norm);
        if let Some(first) = v.iter().find(|x| x.abs() > T::lit(1e-12)) {
            if *first < T::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        vectors.push(v);
    }
    Ok(BasisSet { n, vectors })
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: Option<usize>,
}

/// Parameters and wiring of all N warping functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint<T>", try_from = "Checkpoint<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct WarpModel<T> {
    kind: WarpKind,
    n: usize,
    z: usize,
    seed: u64,
    params: Vec<T>,
    layers: Vec<Layer>,
    /// Offset of the input injection matrix in residual mode.
    injection: Option<usize>,
}

/// On-disk form of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub kind: WarpKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Z")]
    pub z: usize,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub params: Vec<T>,
}

impl<T: Real> From<WarpModel<T>> for Checkpoint<T> {
    fn from(m: WarpModel<T>) -> Self {
        Checkpoint { layer_sizes: m.layer_sizes(), kind: m.kind, n: m.n, z: m.z, seed: m.seed, params: m.params }
    }
}

impl<T: Real> TryFrom<Checkpoint<T>> for WarpModel<T> {
    type Error = String;

    fn try_from(c: Checkpoint<T>) -> std::result::Result<Self, String> {
        let mut m = WarpModel::layout(c.kind, c.n, c.z, c.seed).map_err(|e| e.to_string())?;
        if m.params.len() != c.params.len() {
            return Err(format!("checkpoint holds {} parameters, layout needs {}", c.params.len(), m.params.len()));
        }
        if m.layer_sizes() != c.layer_sizes {
            return Err("checkpoint layer sizes do not match its kind".into());
        }
        m.params = c.params;
        Ok(m)
    }
}

impl<T: Real> WarpModel<T> {
    /// Zero-filled parameters with the right layout.
    fn layout(kind: WarpKind, n: usize, z: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(RtwError::config("warpnet", "at least two signals are required"));
        }
        if z < 2 {
            return Err(RtwError::config("warpnet", "the warped length must be at least 2"));
        }
        let mut layers = Vec::new();
        let mut injection = None;
        let mut count = 0;
        let push = |fan_in: usize, fan_out: usize, bias: bool, count: &mut usize| {
            let w_off = *count;
            *count += fan_in * fan_out;
            let b_off = bias.then(|| {
                let o = *count;
                *count += fan_out;
                o
            });
            Layer { fan_in, fan_out, w_off, b_off }
        };
        match &kind {
            WarpKind::Mlp { hidden, skip } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(RtwError::config("warpnet", "hidden layer widths must be positive"));
                }
                let mut prev = 1;
                for &h in hidden {
                    layers.push(push(prev, h, true, &mut count));
                    prev = h;
                }
                let out_in = match skip {
                    SkipMode::Concat => 1 + hidden.iter().sum::<usize>(),
                    SkipMode::Residual => {
                        injection = Some(count);
                        count += hidden[0];
                        prev
                    }
                };
                layers.push(push(out_in, n - 1, true, &mut count));
            }
            WarpKind::Sine { k } => count = n * k,
        }
        Ok(Self { kind, n, z, seed, params: vec![T::zero(); count], layers, injection })
    }

    /// Seeded initialization: Xavier-uniform weights and zero biases for networks, zero
    /// coefficients for sine bases.
    pub fn init(kind: WarpKind, n: usize, z: usize, t_max: usize, seed: u64) -> Result<Self> {
        if z < t_max {
            return Err(RtwError::config("warpnet", format!("warped length {z} is shorter than the longest signal {t_max}")));
        }
        let mut m = Self::layout(kind, n, z, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &m.layers {
            let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut m.params[layer.w_off..layer.w_off + layer.fan_in * layer.fan_out] {
                *w = T::lit(rng.gen_range(-bound..=bound));
            }
        }
        if let (Some(off), WarpKind::Mlp { hidden, .. }) = (m.injection, &m.kind) {
            let bound = (6.0 / (1 + hidden[0]) as f64).sqrt();
            for w in &mut m.params[off..off + hidden[0]] {
                *w = T::lit(rng.gen_range(-bound..=bound));
            }
        }
        Ok(m)
    }

    pub fn kind(&self) -> &WarpKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(RtwError::DimensionMismatch { expected: self.params.len(), found: params.len() });
        }
        self.params = params;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Widths from input to output; for concatenating skips the output layer's input width
    /// appears in place of its concatenated features.
    pub fn layer_sizes(&self) -> Vec<usize> {
        match &self.kind {
            WarpKind::Mlp { hidden, skip } => {
                let mut s = vec![1];
                s.extend(hidden);
                if *skip == SkipMode::Concat {
                    s.push(1 + hidden.iter().sum::<usize>());
                }
                s.push(self.n - 1);
                s
            }
            WarpKind::Sine { k } => vec![*k],
        }
    }

    /// Zeroes the weights and bias of the output layer.
    pub fn zero_output_layer(&mut self) {
        if let Some(layer) = self.layers.last().cloned() {
            let end = layer.b_off.map_or(layer.w_off + layer.fan_in * layer.fan_out, |b| b + layer.fan_out);
            self.params[layer.w_off..end].iter_mut().for_each(|p| *p = T::zero());
        }
    }

    /// Normalized warped time `(z - 1) / (Z - 1)` for `z = 1..=Z`.
    pub fn z_hat(&self) -> Vec<T> {
        let denom = T::from_count(self.z - 1);
        (0..self.z).map(|i| T::from_count(i) / denom).collect()
    }

    fn slice<'t>(&self, theta: Var<'t, T>, off: usize, shape: Vec<usize>) -> Result<Var<'t, T>> {
        let len: usize = shape.iter().product();
        let idx: Rc<[usize]> = (off..off + len).collect();
        Ok(theta.gather(idx, shape)?)
    }

    /// Records the warp matrix `[N, Z]` as a function of `theta` (the flat parameter vector).
    pub fn record<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, basis: &BasisSet<T>) -> Result<Var<'t, T>> {
        if theta.shape() != [self.params.len()] {
            return Err(RtwError::DimensionMismatch { expected: self.params.len(), found: theta.shape().iter().product() });
        }
        let (n, z) = (self.n, self.z);
        let zh = self.z_hat();
        let identity = tape.constant(Tensor::new(vec![1, z], zh.clone())?);
        match &self.kind {
            WarpKind::Sine { k } => {
                if *k == 0 {
                    return Ok(identity.add(&tape.constant(Tensor::zeros(&[n, z])))?);
                }
                let mut s = vec![T::zero(); k * z];
                for kk in 0..*k {
                    // Interior columns only, so the boundary values stay exact.
                    for i in 1..z - 1 {
                        s[kk * z + i] = (T::PI() * T::from_count(kk + 1) * zh[i]).sin();
                    }
                }
                let alpha = theta.reshape(vec![n, *k])?;
                Ok(identity.add(&alpha.matmul(&tape.constant(Tensor::new(vec![*k, z], s)?))?)?)
            }
            WarpKind::Mlp { skip, .. } => {
                let input = tape.constant(Tensor::new(vec![z, 1], zh.clone())?);
                let mut h = input;
                let mut features = vec![input];
                let hidden = &self.layers[..self.layers.len() - 1];
                for (i, layer) in hidden.iter().enumerate() {
                    let w = self.slice(theta, layer.w_off, vec![layer.fan_in, layer.fan_out])?;
                    let b = self.slice(theta, layer.b_off.unwrap(), vec![layer.fan_out])?;
                    let mut next = h.matmul(&w)?.add(&b)?.relu();
                    if *skip == SkipMode::Residual {
                        if i == 0 {
                            let p = self.slice(theta, self.injection.unwrap(), vec![1, layer.fan_out])?;
                            next = next.add(&input.matmul(&p)?)?;
                        } else if layer.fan_in == layer.fan_out {
                            next = next.add(&h)?;
                        }
                    }
                    features.push(next);
                    h = next;
                }
                let out_in = match skip {
                    SkipMode::Concat => Var::concat_last(&features)?,
                    SkipMode::Residual => h,
                };
                let last = self.layers.last().unwrap();
                let w = self.slice(theta, last.w_off, vec![last.fan_in, last.fan_out])?;
                let b = self.slice(theta, last.b_off.unwrap(), vec![last.fan_out])?;
                let f = out_in.matmul(&w)?.add(&b)?;
                let rest: Vec<T> = (0..n).flat_map(|row| basis.vectors[1..].iter().map(move |v| v[row])).collect();
                let rest = tape.constant(Tensor::new(vec![n, n - 1], rest)?);
                let bump: Vec<T> = zh.iter().map(|&t| t * (T::one() - t)).collect();
                let shaped = rest.matmul(&f.t()?)?.mul(&tape.constant(Tensor::new(vec![1, z], bump)?))?;
                Ok(identity.add(&shaped)?)
            }
        }
    }

    /// Current warp matrix, `N x Z` row major.
    pub fn gamma(&self, basis: &BasisSet<T>) -> Result<Vec<T>> {
        let tape = Tape::new();
        let theta = tape.constant(Tensor::from_vec(self.params.clone()));
        let g = self.record(&tape, theta, basis)?;
        let v = g.value().into_data();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("warpnet"));
        }
        Ok(v)
    }
}

/// Warp values `gamma_n[z]`, `N x Z` row major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpMatrix<T> {
    pub n: usize,
    pub z: usize,
    pub values: Vec<T>,
}

impl<T: Real> WarpMatrix<T> {
    pub fn new(n: usize, z: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * z {
            return Err(RtwError::DimensionMismatch { expected: n * z, found: values.len() });
        }
        Ok(Self { n, z, values })
    }

    pub fn identity(n: usize, z: usize) -> Self {
        let denom = T::from_count(z.max(2) - 1);
        let row: Vec<T> = (0..z).map(|i| T::from_count(i) / denom).collect();
        Self { n, z, values: (0..n).flat_map(|_| row.iter().copied()).collect() }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.z..(i + 1) * self.z]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.values.chunks_exact(self.z)
    }

    pub fn penalty(&self) -> T {
        monotonicity_penalty(&self.values, self.n, self.z)
    }

    /// Largest forward difference over all rows.
    pub fn max_step(&self) -> T {
        self.rows().flat_map(|r| r.windows(2).map(|w| w[1] - w[0])).fold(T::neg_infinity(), |a, b| a.max(b))
    }
}

/// `sum_n sum_z max(g[n, z] - g[n, z + 1], 0)` for an `n x z` matrix.
pub fn monotonicity_penalty<T: Real>(gamma: &[T], n: usize, z: usize) -> T {
    let mut total = T::zero();
    for row in gamma.chunks(z).take(n) {
        for w in row.windows(2) {
            total = total + (w[0] - w[1]).max(T::zero());
        }
    }
    total
}

/// Recorded penalty for a `[N, Z]` warp matrix.
pub fn record_penalty<'t, T: Real>(gamma: Var<'t, T>) -> Result<Var<'t, T>> {
    let shape = gamma.shape();
    let (n, z) = (shape[0], shape[1]);
    if z < 2 {
        return Ok(gamma.sum().scale(T::zero()));
    }
    let head: Rc<[usize]> = (0..n).flat_map(|r| (0..z - 1).map(move |c| r * z + c)).collect();
    let tail: Rc<[usize]> = (0..n).flat_map(|r| (1..z).map(move |c| r * z + c)).collect();
    let a = gamma.gather(head, vec![n, z - 1])?;
    let b = gamma.gather(tail, vec![n, z - 1])?;
    Ok(a.sub(&b)?.relu().sum())
}
