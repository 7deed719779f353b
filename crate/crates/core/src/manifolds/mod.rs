//! Points, tangent vectors, exponential and logarithmic maps, and geodesic distances.

use std::fmt;
use std::str::FromStr;

use rtw_autodiff::linalg::{self, SymEigen};
use rtw_autodiff::Real;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};

mod recorded;

pub use recorded::{record_dist, record_exp, DistanceKind};

/// Geometry of the signal space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DescriptorRepr", into = "DescriptorRepr")]
pub enum ManifoldDescriptor {
    Euclidean(usize),
    /// Unit sphere S^D, stored as vectors of length D + 1.
    Sphere(usize),
    /// D x D symmetric positive definite matrices, stored row major.
    Spd(usize),
    Product(Vec<ManifoldDescriptor>),
}

#[derive(Serialize, Deserialize)]
struct DescriptorRepr {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<DescriptorRepr>>,
}

impl TryFrom<DescriptorRepr> for ManifoldDescriptor {
    type Error = String;

    fn try_from(r: DescriptorRepr) -> std::result::Result<Self, String> {
        let dim = || r.dim.filter(|&d| d > 0).ok_or_else(|| format!("manifold '{}' needs a positive dim", r.kind));
        Ok(match r.kind.as_str() {
            "euclidean" => Self::Euclidean(dim()?),
            "sphere" => Self::Sphere(dim()?),
            "spd" => Self::Spd(dim()?),
            "product" => {
                let comps = r.components.ok_or("product manifold needs components")?;
                if comps.is_empty() {
                    return Err("product manifold needs components".into());
                }
                Self::Product(comps.into_iter().map(Self::try_from).collect::<std::result::Result<_, _>>()?)
            }
            other => return Err(format!("unknown manifold type '{other}'")),
        })
    }
}

impl From<ManifoldDescriptor> for DescriptorRepr {
    fn from(d: ManifoldDescriptor) -> Self {
        let simple = |kind: &str, dim| DescriptorRepr { kind: kind.into(), dim: Some(dim), components: None };
        match d {
            ManifoldDescriptor::Euclidean(n) => simple("euclidean", n),
            ManifoldDescriptor::Sphere(n) => simple("sphere", n),
            ManifoldDescriptor::Spd(n) => simple("spd", n),
            ManifoldDescriptor::Product(c) => DescriptorRepr {
                kind: "product".into(),
                dim: None,
                components: Some(c.into_iter().map(Into::into).collect()),
            },
        }
    }
}

impl FromStr for ManifoldDescriptor {
    type Err = RtwError;

    /// Parses `euclidean:D`, `sphere:D`, `spd:D` or `pose3d`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "pose3d" {
            return Ok(Self::pose3d());
        }
        let bad = || RtwError::config("manifolds", format!("cannot parse manifold '{s}'"));
        let (kind, dim) = s.split_once(':').ok_or_else(bad)?;
        let dim: usize = dim.parse().map_err(|_| bad())?;
        if dim == 0 {
            return Err(bad());
        }
        match kind {
            "euclidean" => Ok(Self::Euclidean(dim)),
            "sphere" => Ok(Self::Sphere(dim)),
            "spd" => Ok(Self::Spd(dim)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ManifoldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean(d) => write!(f, "euclidean:{d}"),
            Self::Sphere(d) => write!(f, "sphere:{d}"),
            Self::Spd(d) => write!(f, "spd:{d}"),
            Self::Product(c) => {
                write!(f, "product(")?;
                for (i, m) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

impl ManifoldDescriptor {
    /// Position in R^3 together with an orientation quaternion.
    pub fn pose3d() -> Self {
        Self::Product(vec![Self::Euclidean(3), Self::Sphere(3)])
    }

    /// Storage width of one point.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Euclidean(d) => *d,
            Self::Sphere(d) => d + 1,
            Self::Spd(d) => d * d,
            Self::Product(c) => c.iter().map(Self::ambient_dim).sum(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Self::Euclidean(d) | Self::Sphere(d) => *d,
            Self::Spd(d) => d * (d + 1) / 2,
            Self::Product(c) => c.iter().map(Self::intrinsic_dim).sum(),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        match self {
            Self::Euclidean(_) => true,
            Self::Product(c) => c.iter().all(Self::is_euclidean),
            _ => false,
        }
    }

    /// Radius of the ball around any point on which the logarithm is a diffeomorphism.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Self::Sphere(_) => std::f64::consts::PI,
            Self::Euclidean(_) | Self::Spd(_) => f64::INFINITY,
            Self::Product(c) => c.iter().map(Self::injectivity_radius).fold(f64::INFINITY, f64::min),
        }
    }

    /// Components with their coordinate offsets; a non-product manifold is its own single component.
    pub fn components(&self) -> Vec<(&ManifoldDescriptor, usize)> {
        match self {
            Self::Product(c) => {
                let mut off = 0;
                c.iter()
                    .map(|m| {
                        let o = off;
                        off += m.ambient_dim();
                        (m, o)
                    })
                    .collect()
            }
            _ => vec![(self, 0)],
        }
    }

    fn expect_len<T>(&self, v: &[T]) -> Result<()> {
        if v.len() != self.ambient_dim() {
            return Err(RtwError::DimensionMismatch { expected: self.ambient_dim(), found: v.len() });
        }
        Ok(())
    }

    /// Precomputes whatever the maps at `base` need.
    pub fn frame<T: Real>(&self, base: &[T]) -> Result<Frame<'_, T>> {
        self.expect_len(base)?;
        if base.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let parts = self
            .components()
            .into_iter()
            .map(|(m, off)| {
                let b = &base[off..off + m.ambient_dim()];
                Ok(match m {
                    Self::Spd(d) => {
                        let e = SymEigen::new(b, *d)?;
                        if !(e.min_value() > T::zero()) {
                            return Err(RtwError::NotSpd);
                        }
                        Part::Spd { d: *d, sqrt: e.apply(|l| l.sqrt()), inv_sqrt: e.apply(|l| l.sqrt().recip()) }
                    }
                    Self::Sphere(_) => Part::Sphere,
                    Self::Euclidean(_) => Part::Euclidean,
                    Self::Product(_) => return Err(RtwError::config("manifolds", "nested products are not supported")),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame { desc: self, base: base.to_vec(), parts })
    }

    pub fn exp<T: Real>(&self, base: &[T], u: &[T]) -> Result<Vec<T>> {
        self.frame(base)?.exp(u)
    }

    pub fn log<T: Real>(&self, base: &[T], x: &[T]) -> Result<Vec<T>> {
        self.frame(base)?.log(x)
    }

    /// Geodesic distance; product components combine as the root of summed squares.
    pub fn dist<T: Real>(&self, a: &[T], b: &[T]) -> Result<T> {
        self.expect_len(a)?;
        self.expect_len(b)?;
        if a.iter().chain(b).any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let mut sq = T::zero();
        for (m, off) in self.components() {
            let n = m.ambient_dim();
            let (pa, pb) = (&a[off..off + n], &b[off..off + n]);
            if pa == pb {
                continue;
            }
            let d = match m {
                Self::Euclidean(_) => euclid_norm(pa.iter().zip(pb).map(|(&x, &y)| x - y)),
                Self::Sphere(_) => sphere_angle(pa, pb),
                Self::Spd(d) => spd_dist(pa, pb, *d)?,
                Self::Product(_) => return Err(RtwError::config("manifolds", "nested products are not supported")),
            };
            sq = sq + d * d;
        }
        Ok(sq.sqrt())
    }

    /// Frobenius distance between lower Cholesky factors; only defined for SPD manifolds.
    pub fn cholesky_dist<T: Real>(&self, a: &[T], b: &[T]) -> Result<T> {
        match self {
            Self::Spd(d) => cholesky_dist(a, b, *d),
            _ => Err(RtwError::config("manifolds", "cholesky distance needs an spd manifold")),
        }
    }

    /// Pulls raw coordinates onto the manifold.
    pub fn project<T: Real>(&self, raw: &[T]) -> Result<Vec<T>> {
        self.expect_len(raw)?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let mut out = raw.to_vec();
        for (m, off) in self.components() {
            let n = m.ambient_dim();
            let seg = &mut out[off..off + n];
            match m {
                Self::Euclidean(_) => {}
                Self::Sphere(_) => {
                    let norm = euclid_norm(seg.iter().copied());
                    if norm < T::lit(1e-12) {
                        return Err(RtwError::ZeroVector);
                    }
                    seg.iter_mut().for_each(|x| *x = *x / norm);
                }
                Self::Spd(d) => {
                    let sym = linalg::symmetrize(seg, *d);
                    let floor = T::lit(1e-9);
                    let e = SymEigen::new(&sym, *d)?;
                    if e.min_value() >= floor {
                        seg.copy_from_slice(&sym);
                    } else {
                        seg.copy_from_slice(&linalg::symmetrize(&e.apply(|l| l.max(floor)), *d));
                    }
                }
                Self::Product(_) => return Err(RtwError::config("manifolds", "nested products are not supported")),
            }
        }
        Ok(out)
    }

    /// Checks the point invariants (unit norm, symmetric positive definite).
    pub fn check_point<T: Real>(&self, p: &[T]) -> Result<()> {
        self.expect_len(p)?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let tol = tolerance::<T>();
        for (m, off) in self.components() {
            let seg = &p[off..off + m.ambient_dim()];
            match m {
                Self::Sphere(_) => {
                    if (euclid_norm(seg.iter().copied()) - T::one()).abs() > tol {
                        return Err(RtwError::config("manifolds", "sphere point is not unit norm"));
                    }
                }
                Self::Spd(d) => {
                    if asymmetry(seg, *d) > tol * T::one().max(linalg::frobenius_norm(seg)) {
                        return Err(RtwError::NotSpd);
                    }
                    if !(SymEigen::new(seg, *d)?.min_value() > T::zero()) {
                        return Err(RtwError::NotSpd);
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks every point of a signal.
    pub fn check_signal<T: Real>(&self, s: &crate::signal::Signal<T>) -> Result<()> {
        if s.width() != self.ambient_dim() {
            return Err(RtwError::DimensionMismatch { expected: self.ambient_dim(), found: s.width() });
        }
        s.points().try_for_each(|p| self.check_point(p))
    }

    /// Checks tangent invariants: orthogonality to the base on spheres, symmetry on SPD.
    pub fn check_tangent<T: Real>(&self, base: &[T], u: &[T]) -> Result<()> {
        self.expect_len(base)?;
        self.expect_len(u)?;
        let tol = tolerance::<T>();
        for (m, off) in self.components() {
            let n = m.ambient_dim();
            let (b, v) = (&base[off..off + n], &u[off..off + n]);
            match m {
                Self::Sphere(_) => {
                    if dot(b, v).abs() > tol * T::one().max(euclid_norm(v.iter().copied())) {
                        return Err(RtwError::config("manifolds", "sphere tangent is not orthogonal to its base"));
                    }
                }
                Self::Spd(d) => {
                    if asymmetry(v, *d) > tol * T::one().max(linalg::frobenius_norm(v)) {
                        return Err(RtwError::config("manifolds", "spd tangent is not symmetric"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Cached data for maps at a fixed base point.
#[derive(Clone, Debug)]
pub struct Frame<'a, T> {
    desc: &'a ManifoldDescriptor,
    base: Vec<T>,
    parts: Vec<Part<T>>,
}

#[derive(Clone, Debug)]
enum Part<T> {
    Euclidean,
    Sphere,
    Spd { d: usize, sqrt: Vec<T>, inv_sqrt: Vec<T> },
}

impl<'a, T: Real> Frame<'a, T> {
    pub fn base(&self) -> &[T] {
        &self.base
    }

    fn segments(&self) -> impl Iterator<Item = (usize, usize, &Part<T>)> + '_ {
        self.desc.components().into_iter().zip(&self.parts).map(|((m, off), p)| (off, m.ambient_dim(), p))
    }

    pub fn exp(&self, u: &[T]) -> Result<Vec<T>> {
        self.desc.expect_len(u)?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let mut out = vec![T::zero(); u.len()];
        for (off, n, part) in self.segments() {
            let (b, v, o) = (&self.base[off..off + n], &u[off..off + n], &mut out[off..off + n]);
            match part {
                Part::Euclidean => o.iter_mut().zip(b.iter().zip(v)).for_each(|(o, (&b, &v))| *o = b + v),
                Part::Sphere => {
                    let r = euclid_norm(v.iter().copied());
                    let (c, s) = (r.cos(), rtw_autodiff::sinc(r / T::PI()));
                    o.iter_mut().zip(b.iter().zip(v)).for_each(|(o, (&b, &v))| *o = b * c + v * s);
                    let norm = euclid_norm(o.iter().copied());
                    o.iter_mut().for_each(|x| *x = *x / norm);
                }
                Part::Spd { d, sqrt, inv_sqrt } => {
                    let d = *d;
                    let inner = congruence(inv_sqrt, v, d);
                    let e = SymEigen::new(&inner, d)?.apply(|l| l.exp());
                    o.copy_from_slice(&linalg::symmetrize(&congruence(sqrt, &e, d), d));
                }
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        Ok(out)
    }

    pub fn log(&self, x: &[T]) -> Result<Vec<T>> {
        self.desc.expect_len(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RtwError::NonFinite("manifolds"));
        }
        let mut out = vec![T::zero(); x.len()];
        for (off, n, part) in self.segments() {
            let (b, p, o) = (&self.base[off..off + n], &x[off..off + n], &mut out[off..off + n]);
            match part {
                Part::Euclidean => o.iter_mut().zip(b.iter().zip(p)).for_each(|(o, (&b, &p))| *o = p - b),
                Part::Sphere => sphere_log(b, p, o)?,
                Part::Spd { d, sqrt, inv_sqrt } => {
                    let d = *d;
                    let inner = congruence(inv_sqrt, p, d);
                    let e = SymEigen::new(&inner, d)?;
                    if !(e.min_value() > T::zero()) {
                        return Err(RtwError::NotSpd);
                    }
                    let l = e.apply(|v| v.max(T::lit(1e-12)).ln());
                    o.copy_from_slice(&linalg::symmetrize(&congruence(sqrt, &l, d), d));
                }
            }
        }
        Ok(out)
    }

    /// Riemannian norm of a tangent vector at the frame's base.
    pub fn norm(&self, u: &[T]) -> T {
        let mut sq = T::zero();
        for (off, n, part) in self.segments() {
            let v = &u[off..off + n];
            let part_sq = match part {
                Part::Euclidean | Part::Sphere => v.iter().map(|&x| x * x).sum::<T>(),
                Part::Spd { d, inv_sqrt, .. } => congruence(inv_sqrt, v, *d).iter().map(|&x| x * x).sum::<T>(),
            };
            sq = sq + part_sq;
        }
        sq.sqrt()
    }
}

/// `a m a` for symmetric `a`.
fn congruence<T: Real>(a: &[T], m: &[T], d: usize) -> Vec<T> {
    linalg::matmul(&linalg::matmul(a, m, d, d, d), a, d, d, d)
}

fn asymmetry<T: Real>(m: &[T], d: usize) -> T {
    let mut worst = T::zero();
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((m[i * d + j] - m[j * d + i]).abs());
        }
    }
    worst
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn euclid_norm<T: Real>(it: impl Iterator<Item = T>) -> T {
    it.map(|x| x * x).sum::<T>().sqrt()
}

/// Angle between unit vectors, `2 atan2(|a - b|, |a + b|)`.
fn sphere_angle<T: Real>(a: &[T], b: &[T]) -> T {
    let diff = euclid_norm(a.iter().zip(b).map(|(&x, &y)| x - y));
    let sum = euclid_norm(a.iter().zip(b).map(|(&x, &y)| x + y));
    T::lit(2.0) * diff.atan2(sum)
}

fn sphere_log<T: Real>(b: &[T], p: &[T], out: &mut [T]) -> Result<()> {
    if b == p {
        out.iter_mut().for_each(|o| *o = T::zero());
        return Ok(());
    }
    let c = dot(b, p);
    if c <= -T::one() + tolerance::<T>() {
        return Err(RtwError::AntipodalPoint);
    }
    for ((o, &bi), &pi) in out.iter_mut().zip(b).zip(p) {
        *o = pi - c * bi;
    }
    // Remove the residual radial part left by rounding.
    let r = dot(b, out);
    out.iter_mut().zip(b).for_each(|(o, &bi)| *o = *o - r * bi);
    let s = euclid_norm(out.iter().copied());
    if s == T::zero() {
        return Ok(());
    }
    let theta = sphere_angle(b, p);
    out.iter_mut().for_each(|o| *o = *o * theta / s);
    Ok(())
}

fn spd_dist<T: Real>(a: &[T], b: &[T], d: usize) -> Result<T> {
    let eb = SymEigen::new(b, d)?;
    if !(eb.min_value() > T::zero()) {
        return Err(RtwError::NotSpd);
    }
    let inv_sqrt = eb.apply(|l| l.sqrt().recip());
    let e = SymEigen::new(&congruence(&inv_sqrt, a, d), d)?;
    if !(e.min_value() > T::zero()) {
        return Err(RtwError::NotSpd);
    }
    Ok(e.values.iter().map(|&l| l.max(T::lit(1e-12)).ln().powi(2)).sum::<T>().sqrt())
}

fn cholesky_dist<T: Real>(a: &[T], b: &[T], d: usize) -> Result<T> {
    if a.len() != d * d || b.len() != d * d {
        return Err(RtwError::DimensionMismatch { expected: d * d, found: a.len().min(b.len()) });
    }
    let la = linalg::cholesky(a, d).map_err(|_| RtwError::NotSpd)?;
    let lb = linalg::cholesky(b, d).map_err(|_| RtwError::NotSpd)?;
    Ok(euclid_norm(la.iter().zip(&lb).map(|(&x, &y)| x - y)))
}

/// Exponential map at `base`.
pub fn exp_map<T: Real>(desc: &ManifoldDescriptor, base: &[T], u: &[T]) -> Result<Vec<T>> {
    desc.exp(base, u)
}

pub fn log_map<T: Real>(desc: &ManifoldDescriptor, base: &[T], x: &[T]) -> Result<Vec<T>> {
    desc.log(base, x)
}

pub fn geodesic_dist<T: Real>(desc: &ManifoldDescriptor, a: &[T], b: &[T]) -> Result<T> {
    desc.dist(a, b)
}

pub fn project_to_manifold<T: Real>(desc: &ManifoldDescriptor, raw: &[T]) -> Result<Vec<T>> {
    desc.project(raw)
}
