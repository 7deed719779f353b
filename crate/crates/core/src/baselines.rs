//! Dynamic-programming alignment baselines: DTW, N-dimensional MMDDTW and pairwise p-DTW.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rtw_autodiff::linalg;
use rtw_autodiff::Real;
use serde::{Deserialize, Serialize};

use crate::barycenter::{euclidean_mean, frechet_mean, mean_signal, MeanConfig};
use crate::error::{Result, RtwError};
use crate::manifolds::ManifoldDescriptor;
use crate::signal::Signal;

/// Accumulated cost and zero-based alignment path.
#[derive(Clone, Debug, PartialEq)]
pub struct DtwResult<T> {
    pub cost: T,
    /// One index tuple per step, one entry per signal.
    pub path: Vec<Vec<usize>>,
}

fn pairwise_costs<T, F>(a: &Signal<T>, b: &Signal<T>, dist: &F) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(&[T], &[T]) -> Result<T> + Sync,
{
    let tb = b.len();
    (0..a.len() * tb).into_par_iter().map(|k| dist(a.point(k / tb), b.point(k % tb))).collect()
}

/// Classic DTW with steps `(1,0)`, `(0,1)`, `(1,1)`; ties prefer the diagonal.
pub fn dtw<T, F>(a: &Signal<T>, b: &Signal<T>, dist: F) -> Result<DtwResult<T>>
where
    T: Real,
    F: Fn(&[T], &[T]) -> Result<T> + Sync,
{
    let (ta, tb) = (a.len(), b.len());
    if ta == 0 || tb == 0 {
        return Err(RtwError::config("baselines", "dtw needs non-empty signals"));
    }
    let cost = pairwise_costs(a, b, &dist)?;
    let mut acc = vec![T::infinity(); ta * tb];
    for i in 0..ta {
        for j in 0..tb {
            let c = cost[i * tb + j];
            acc[i * tb + j] = if i == 0 && j == 0 {
                c
            } else {
                let mut best = T::infinity();
                if i > 0 && j > 0 {
                    best = acc[(i - 1) * tb + j - 1];
                }
                if i > 0 {
                    best = best.min(acc[(i - 1) * tb + j]);
                }
                if j > 0 {
                    best = best.min(acc[i * tb + j - 1]);
                }
                c + best
            };
        }
    }
    let (mut i, mut j) = (ta - 1, tb - 1);
    let mut path = vec![vec![i, j]];
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { acc[(i - 1) * tb + j - 1] } else { T::infinity() };
        let up = if i > 0 { acc[(i - 1) * tb + j] } else { T::infinity() };
        let left = if j > 0 { acc[i * tb + j - 1] } else { T::infinity() };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push(vec![i, j]);
    }
    path.reverse();
    Ok(DtwResult { cost: acc[ta * tb - 1], path })
}

/// DTW cost only, in `O(T_b)` memory.
pub fn dtw_cost<T, F>(a: &Signal<T>, b: &Signal<T>, dist: F) -> Result<T>
where
    T: Real,
    F: Fn(&[T], &[T]) -> Result<T> + Sync,
{
    let (ta, tb) = (a.len(), b.len());
    if ta == 0 || tb == 0 {
        return Err(RtwError::config("baselines", "dtw needs non-empty signals"));
    }
    let mut prev = vec![T::infinity(); tb];
    let mut row = vec![T::infinity(); tb];
    for i in 0..ta {
        for j in 0..tb {
            let c = dist(a.point(i), b.point(j))?;
            row[j] = if i == 0 && j == 0 {
                c
            } else {
                let mut best = prev[j];
                if j > 0 {
                    best = best.min(prev[j - 1]).min(row[j - 1]);
                }
                c + best
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    Ok(prev[tb - 1])
}

/// DTW with the geodesic distance of `desc` as point cost.
pub fn dtw_geodesic<T: Real>(desc: &ManifoldDescriptor, a: &Signal<T>, b: &Signal<T>) -> Result<DtwResult<T>> {
    dtw(a, b, |x, y| desc.dist(x, y))
}

/// Node cost of the N-dimensional lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MmdVariant {
    /// Geodesic distances to the Fréchet mean of the indexed points.
    #[default]
    Geodesic,
    /// Distances between Cholesky factors and their arithmetic mean (SPD only).
    Cholesky,
}

pub const MMDDTW_MAX_SIGNALS: usize = 4;
pub const MMDDTW_MAX_NODES: f64 = 1e7;

/// Signals re-indexed onto a common time axis, with their per-index mean.
#[derive(Clone, Debug)]
pub struct MultiAlignment<T> {
    pub warped: Vec<Signal<T>>,
    pub mean: Signal<T>,
    pub cost: T,
    /// Source indices per step, one entry per signal (in input order).
    pub path: Vec<Vec<usize>>,
}

fn cholesky_factor<T: Real>(desc: &ManifoldDescriptor, p: &[T]) -> Result<Vec<T>> {
    match desc {
        ManifoldDescriptor::Spd(d) => Ok(linalg::cholesky(p, *d)?),
        _ => Err(RtwError::config("baselines", "the Cholesky variant needs an spd manifold")),
    }
}

fn node_cost<T: Real>(desc: &ManifoldDescriptor, pts: &[&[T]], variant: MmdVariant, mean_cfg: &MeanConfig) -> Result<T> {
    match (variant, pts.len()) {
        (MmdVariant::Geodesic, 2) => desc.dist(pts[0], pts[1]),
        (MmdVariant::Cholesky, 2) => desc.cholesky_dist(pts[0], pts[1]),
        (MmdVariant::Geodesic, _) => {
            let mu = frechet_mean(desc, pts, pts[0], mean_cfg)?.point;
            pts.iter().map(|p| desc.dist(p, &mu)).sum()
        }
        (MmdVariant::Cholesky, _) => {
            let factors = pts.iter().map(|p| cholesky_factor(desc, p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[T]> = factors.iter().map(Vec::as_slice).collect();
            let mu = euclidean_mean(&refs);
            Ok(factors.iter().map(|f| linalg::frobenius_norm(&f.iter().zip(&mu).map(|(&a, &b)| a - b).collect::<Vec<_>>())).sum())
        }
    }
}

/// Optimal monotone path through the N-dimensional lattice of all signal indices.
pub fn mmddtw<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], variant: MmdVariant, mean_cfg: &MeanConfig) -> Result<MultiAlignment<T>> {
    let n = signals.len();
    if n < 2 {
        return Err(RtwError::config("baselines", "mmddtw needs at least two signals"));
    }
    let nodes: f64 = signals.iter().map(|s| s.len() as f64).product();
    if n > MMDDTW_MAX_SIGNALS || nodes > MMDDTW_MAX_NODES {
        return Err(RtwError::TooLarge { signals: n, nodes });
    }
    if signals.iter().any(Signal::is_empty) {
        return Err(RtwError::config("baselines", "mmddtw needs non-empty signals"));
    }
    if variant == MmdVariant::Cholesky {
        cholesky_factor(desc, signals[0].point(0))?;
    }
    let dims: Vec<usize> = signals.iter().map(Signal::len).collect();
    let mut strides = vec![1usize; n];
    for k in (0..n - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let total = nodes as usize;
    let unflatten = |mut f: usize| -> Vec<usize> {
        let mut idx = vec![0; n];
        for k in 0..n {
            idx[k] = f / strides[k];
            f %= strides[k];
        }
        idx
    };
    let cost: Vec<T> = (0..total)
        .into_par_iter()
        .map(|f| {
            let idx = unflatten(f);
            let pts: Vec<&[T]> = idx.iter().zip(signals).map(|(&i, s)| s.point(i)).collect();
            node_cost(desc, &pts, variant, mean_cfg)
        })
        .collect::<Result<_>>()?;
    // Moves are the non-empty subsets of signals that advance, as bit masks.
    let moves: Vec<usize> = (1..1usize << n).collect();
    let mut acc = vec![T::infinity(); total];
    let mut back = vec![0u8; total];
    let mut idx = vec![0usize; n];
    for f in 0..total {
        if f == 0 {
            acc[0] = cost[0];
        } else {
            let mut best = T::infinity();
            let mut best_move = 0;
            // Larger masks first so that ties prefer moving more signals at once.
            for &m in moves.iter().rev() {
                if (0..n).any(|k| m >> k & 1 == 1 && idx[k] == 0) {
                    continue;
                }
                let pred = f - (0..n).filter(|k| m >> k & 1 == 1).map(|k| strides[k]).sum::<usize>();
                if acc[pred] < best {
                    best = acc[pred];
                    best_move = m;
                }
            }
            acc[f] = cost[f] + best;
            back[f] = best_move as u8;
        }
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    let mut f = total - 1;
    let mut path = vec![unflatten(f)];
    while f > 0 {
        let m = back[f] as usize;
        f -= (0..n).filter(|k| m >> k & 1 == 1).map(|k| strides[k]).sum::<usize>();
        path.push(unflatten(f));
    }
    path.reverse();
    let warped: Vec<Signal<T>> = (0..n).map(|k| signals[k].select(&path.iter().map(|p| p[k]).collect::<Vec<_>>())).collect();
    let refs: Vec<&Signal<T>> = warped.iter().collect();
    let (mean, _) = mean_signal(desc, &refs, mean_cfg, true)?;
    Ok(MultiAlignment { warped, mean, cost: acc[total - 1], path })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PdtwConfig {
    /// Fold in a seeded random order instead of input order.
    pub shuffle_seed: Option<u64>,
    pub mean: MeanConfig,
}

/// Iterative pairwise DTW: each signal in turn is aligned to a running reference, which is then
/// moved towards it by the running geodesic average.
pub fn pairwise_pdtw<T: Real>(desc: &ManifoldDescriptor, signals: &[Signal<T>], cfg: &PdtwConfig) -> Result<MultiAlignment<T>> {
    let n = signals.len();
    if n < 2 {
        return Err(RtwError::config("baselines", "p-DTW needs at least two signals"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = cfg.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let first = order[0];
    let mut reference = signals[first].clone();
    let mut maps: Vec<Option<Vec<usize>>> = vec![None; n];
    maps[first] = Some((0..reference.len()).collect());
    let mut total = T::zero();
    for (k, &next) in order.iter().enumerate().skip(1) {
        let s = &signals[next];
        let r = dtw_geodesic(desc, &reference, s)?;
        total = total + r.cost;
        let weight = T::from_count(k + 1).recip();
        let mut data = Vec::with_capacity(r.path.len() * reference.width());
        for step in &r.path {
            let (base, x) = (reference.point(step[0]), s.point(step[1]));
            let u: Vec<T> = desc.log(base, x)?.into_iter().map(|v| v * weight).collect();
            data.extend(desc.exp(base, &u)?);
        }
        for m in maps.iter_mut().flatten() {
            *m = r.path.iter().map(|p| m[p[0]]).collect();
        }
        maps[next] = Some(r.path.iter().map(|p| p[1]).collect());
        reference = Signal::new(reference.width(), data)?;
    }
    let maps: Vec<Vec<usize>> = maps.into_iter().map(|m| m.expect("every signal folded")).collect();
    let warped: Vec<Signal<T>> = signals.iter().zip(&maps).map(|(s, m)| s.select(m)).collect();
    let refs: Vec<&Signal<T>> = warped.iter().collect();
    let (mean, _) = mean_signal(desc, &refs, &cfg.mean, true)?;
    let len = mean.len();
    let path = (0..len).map(|t| maps.iter().map(|m| m[t]).collect()).collect();
    Ok(MultiAlignment { warped, mean, cost: total, path })
}
