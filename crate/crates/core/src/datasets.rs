//! Signal files, synthetic generators and UCR ingestion.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw_autodiff::linalg::{self, SymEigen};
use rtw_autodiff::Real;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};
use crate::manifolds::ManifoldDescriptor;
use crate::resample::{warp_signal_riemannian, SincConfig};
use crate::signal::Signal;

/// Signals sharing one geometry, optionally labelled.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSet<T> {
    pub descriptor: ManifoldDescriptor,
    pub signals: Vec<Signal<T>>,
    pub labels: Option<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    manifold: ManifoldDescriptor,
    signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
}

impl<T: Real> SignalSet<T> {
    pub fn new(descriptor: ManifoldDescriptor, signals: Vec<Signal<T>>, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != signals.len() {
                return Err(RtwError::config("datasets", format!("{} labels for {} signals", l.len(), signals.len())));
            }
        }
        if let Some(s) = signals.iter().find(|s| s.width() != descriptor.ambient_dim()) {
            return Err(RtwError::ManifestMismatch(format!("signal width {} does not match {descriptor}", s.width())));
        }
        Ok(Self { descriptor, signals, labels })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Checks every point of every signal.
    pub fn validate(&self) -> Result<()> {
        self.signals.iter().try_for_each(|s| self.descriptor.check_signal(s))
    }

    /// Writes `stem_000.csv, ...` and `manifest.json` into `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.signals.len());
        for (i, s) in self.signals.iter().enumerate() {
            let name = format!("{stem}_{i:03}.csv");
            save_signal_csv(&dir.join(&name), s, &self.descriptor)?;
            names.push(name);
        }
        let manifest = Manifest { manifold: self.descriptor.clone(), signals: names, labels: self.labels.clone() };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }

    /// Reads a manifest and its signal files. Sphere points off the unit sphere are projected
    /// back; the number of projected points is returned alongside the set.
    pub fn load(manifest_path: &Path) -> Result<(Self, usize)> {
        let text = std::fs::read_to_string(manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| RtwError::ManifestMismatch(e.to_string()))?;
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let mut projected = 0;
        let mut signals = Vec::with_capacity(manifest.signals.len());
        for name in &manifest.signals {
            let (s, p) = load_signal_csv(&dir.join(name), &manifest.manifold)?;
            projected += p;
            signals.push(s);
        }
        if projected > 0 {
            log::warn!("projected {projected} points onto the manifold while loading {}", manifest_path.display());
        }
        Ok((Self::new(manifest.manifold, signals, manifest.labels)?, projected))
    }
}

/// Number formatting that survives a text roundtrip.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes comma-separated numeric rows, with an optional leading `#` comment.
pub fn write_csv_rows<I, R>(path: &Path, comment: Option<&str>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| format_number(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads comma-separated numeric rows, skipping blank lines and `#` comments.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| RtwError::Parse { line: i + 1, msg: format!("'{}': {e}", c.trim()) }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn save_signal_csv<T: Real>(path: &Path, s: &Signal<T>, desc: &ManifoldDescriptor) -> Result<()> {
    let rows = s.points().map(|p| p.iter().map(|v| v.to_f64().unwrap()).collect::<Vec<_>>());
    write_csv_rows(path, Some(&format!("{desc}, {} samples", s.len())), rows)
}

/// Reads one signal; returns it with the count of points that had to be projected.
pub fn load_signal_csv<T: Real>(path: &Path, desc: &ManifoldDescriptor) -> Result<(Signal<T>, usize)> {
    let rows = read_csv_rows(path)?;
    let a = desc.ambient_dim();
    let mut data = Vec::with_capacity(rows.len() * a);
    let mut projected = 0;
    for row in rows {
        if row.len() != a {
            return Err(RtwError::ManifestMismatch(format!("{}: row of width {} for {desc}", path.display(), row.len())));
        }
        let p: Vec<T> = row.into_iter().map(T::lit).collect();
        if desc.check_point(&p).is_ok() {
            data.extend(p);
        } else {
            projected += 1;
            data.extend(desc.project(&p)?);
        }
    }
    Ok((Signal::new(a, data)?, projected))
}

/// Reads a UCR-style file: one signal per line, label first, values separated by tabs (or
/// commas or spaces). Each row ends at its first missing or non-numeric value.
pub fn load_ucr_tsv<T: Real>(path: &Path) -> Result<SignalSet<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut signals = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let sep: &[char] = if line.contains('\t') { &['\t'] } else if line.contains(',') { &[','] } else { &[' '] };
        let mut tokens = line.split(sep).map(str::trim);
        let label_tok = tokens.next().unwrap_or("");
        let label = label_tok
            .parse::<f64>()
            .ok()
            .filter(|l| l.is_finite() && l.fract() == 0.0)
            .ok_or_else(|| RtwError::Parse { line: i + 1, msg: format!("bad label '{label_tok}'") })?;
        let values: Vec<T> = tokens.map_while(|t| t.parse::<f64>().ok().filter(|v| v.is_finite())).map(T::lit).collect();
        if values.is_empty() {
            return Err(RtwError::Parse { line: i + 1, msg: "no values".into() });
        }
        signals.push(Signal::new(1, values)?);
        labels.push(label as i64);
    }
    SignalSet::new(ManifoldDescriptor::Euclidean(1), signals, Some(labels))
}

/// Families of random warping functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpFamily {
    /// `z + z (1 - z) c` with `c` uniform in `[-2, 2]`.
    NtwForm,
    /// `z + sum_k a_k sin(pi k z)`, `K` uniform in `1..=5`, `a_k` uniform in `[-0.1, 0.1]`.
    TtwForm,
    /// Clamped B-spline with 4 to 8 sorted control values and degree 2 or 3.
    Spline,
}

impl WarpFamily {
    pub const ALL: [WarpFamily; 3] = [WarpFamily::NtwForm, WarpFamily::TtwForm, WarpFamily::Spline];
}

impl FromStr for WarpFamily {
    type Err = RtwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ntw_form" | "ntw" => Ok(Self::NtwForm),
            "ttw_form" | "ttw" => Ok(Self::TtwForm),
            "spline" => Ok(Self::Spline),
            _ => Err(RtwError::config("datasets", format!("unknown warp family '{s}'"))),
        }
    }
}

pub const MAX_WARP_ATTEMPTS: usize = 10_000;

/// Value at `x` of a clamped uniform B-spline with the given control values.
fn clamped_bspline(ctrl: &[f64], degree: usize, x: f64) -> f64 {
    let m = ctrl.len();
    let inner = m - degree;
    let knot = |i: usize| -> f64 {
        if i <= degree {
            0.0
        } else if i >= m {
            1.0
        } else {
            (i - degree) as f64 / inner as f64
        }
    };
    let x = x.clamp(0.0, 1.0);
    let mut span = degree;
    while span < m - 1 && x >= knot(span + 1) {
        span += 1;
    }
    let mut d: Vec<f64> = (0..=degree).map(|j| ctrl[span - degree + j]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let i = span - degree + j;
            let denom = knot(i + degree + 1 - r) - knot(i);
            let alpha = if denom > 0.0 { (x - knot(i)) / denom } else { 0.0 };
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    d[degree]
}

fn sample_warp(rng: &mut ChaCha8Rng, z: usize, family: WarpFamily) -> Vec<f64> {
    let zh: Vec<f64> = (0..z).map(|i| i as f64 / (z - 1) as f64).collect();
    match family {
        WarpFamily::NtwForm => {
            let c = rng.gen_range(-2.0..=2.0);
            zh.iter().map(|&t| t + t * (1.0 - t) * c).collect()
        }
        WarpFamily::TtwForm => {
            let k = rng.gen_range(1..=5usize);
            let alpha: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.1..=0.1)).collect();
            zh.iter()
                .map(|&t| t + alpha.iter().enumerate().map(|(j, a)| a * (std::f64::consts::PI * (j + 1) as f64 * t).sin()).sum::<f64>())
                .collect()
        }
        WarpFamily::Spline => {
            let m = rng.gen_range(4..=8usize);
            let degree = rng.gen_range(2..=3usize);
            let mut ctrl: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            ctrl.sort_by(f64::total_cmp);
            ctrl[0] = 0.0;
            ctrl[m - 1] = 1.0;
            zh.iter().map(|&t| clamped_bspline(&ctrl, degree, t)).collect()
        }
    }
}

fn warp_is_feasible(w: &[f64], max_step: f64) -> bool {
    w.windows(2).all(|p| {
        let d = p[1] - p[0];
        d >= 0.0 && d <= max_step
    })
}

/// Random warp of length `z` satisfying the boundary, monotonicity and continuity constraints.
pub fn generate_random_warp<T: Real>(z: usize, t_max: usize, seed: u64, family: WarpFamily) -> Result<Vec<T>> {
    if z < 2 || t_max == 0 || z < t_max {
        return Err(RtwError::config("datasets", format!("cannot draw a warp of length {z} for signals of length {t_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_step = 1.0 / t_max as f64;
    for _ in 0..MAX_WARP_ATTEMPTS {
        let mut w = sample_warp(&mut rng, z, family);
        w[0] = 0.0;
        w[z - 1] = 1.0;
        if warp_is_feasible(&w, max_step) {
            return Ok(w.into_iter().map(T::lit).collect());
        }
    }
    Err(RtwError::RejectionExhausted(MAX_WARP_ATTEMPTS))
}

/// Warp that leaves a signal of length `t` unchanged under the resampling convention: the
/// first entry is 0 and entry `m >= 2` queries sample `m` exactly.
pub fn grid_identity_warp<T: Real>(t: usize) -> Vec<T> {
    (0..t).map(|i| if i == 0 { T::zero() } else { T::from_count(i + 1) / T::from_count(t) }).collect()
}

/// Randomly warped copies of a base signal with their ground-truth warps.
#[derive(Clone, Debug)]
pub struct InvertedDataset<T> {
    pub set: SignalSet<T>,
    pub base: Signal<T>,
    /// Warp that produced each signal, one value per output sample.
    pub warps: Vec<Vec<T>>,
    pub families: Vec<WarpFamily>,
}

/// `n` copies of `base`, each resampled through its own random warp drawn on a grid of four
/// times the base length and subsampled uniformly back to the base length.
pub fn inverted_warp_dataset<T: Real>(desc: &ManifoldDescriptor, base: &Signal<T>, n: usize, seed: u64, sinc: &SincConfig) -> Result<InvertedDataset<T>> {
    desc.check_signal(base)?;
    let t = base.len();
    if t < 2 {
        return Err(RtwError::config("datasets", "base signal needs at least two samples"));
    }
    if t < 2 * sinc.window + 1 {
        log::warn!("base signal shorter than the sinc window");
    }
    let z = 4 * t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signals = Vec::with_capacity(n);
    let mut warps = Vec::with_capacity(n);
    let mut families = Vec::with_capacity(n);
    for _ in 0..n {
        let family = WarpFamily::ALL[rng.gen_range(0..3)];
        let fine: Vec<T> = generate_random_warp(z, t, rng.gen(), family)?;
        let warp: Vec<T> = (0..t).map(|i| fine[((i * (z - 1)) as f64 / (t - 1) as f64).round() as usize]).collect();
        signals.push(warp_signal_riemannian(desc, base, &warp, sinc)?);
        warps.push(warp);
        families.push(family);
    }
    Ok(InvertedDataset { set: SignalSet::new(desc.clone(), signals, None)?, base: base.clone(), warps, families })
}

/// Circle signal with angle `0.8 sin(2 pi t / T) + 0.4 sin(4 pi t / T)`, `t = 0..T-1`.
pub fn base_s1_signal<T: Real>(len: usize) -> Signal<T> {
    let tau = std::f64::consts::TAU;
    let pts = (0..len).map(|t| {
        let x = t as f64 / len as f64;
        let phi = 0.8 * (tau * x).sin() + 0.4 * (2.0 * tau * x).sin();
        [T::lit(phi.cos()), T::lit(phi.sin())]
    });
    Signal::from_points(2, pts).expect("fixed width")
}

/// Serial chain of revolute joints in the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarRobot {
    pub link_lengths: Vec<f64>,
    pub link_masses: Vec<f64>,
}

impl PlanarRobot {
    pub fn new(link_lengths: Vec<f64>, link_masses: Vec<f64>) -> Result<Self> {
        if link_lengths.is_empty() || link_lengths.len() != link_masses.len() {
            return Err(RtwError::config("datasets", "robot needs matching, non-empty link lengths and masses"));
        }
        if link_lengths.iter().chain(&link_masses).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(RtwError::config("datasets", "link lengths and masses must be positive"));
        }
        Ok(Self { link_lengths, link_masses })
    }

    /// `n` links of unit length and mass.
    pub fn uniform(n: usize) -> Self {
        Self { link_lengths: vec![1.0; n], link_masses: vec![1.0; n] }
    }

    pub fn links(&self) -> usize {
        self.link_lengths.len()
    }

    /// Position of the end of link `k` (zero-based) and its `2 x n` Jacobian, row major.
    pub fn link_end(&self, q: &[f64], k: usize) -> ([f64; 2], Vec<f64>) {
        let n = self.links();
        let mut phi = 0.0;
        let mut p = [0.0; 2];
        let mut ends = Vec::with_capacity(k + 1);
        for i in 0..=k {
            phi += q[i];
            let (s, c) = phi.sin_cos();
            ends.push((self.link_lengths[i] * c, self.link_lengths[i] * s));
            p[0] += self.link_lengths[i] * c;
            p[1] += self.link_lengths[i] * s;
        }
        let mut jac = vec![0.0; 2 * n];
        for i in 0..=k {
            let (dx, dy) = ends[i..].iter().fold((0.0, 0.0), |a, e| (a.0 + e.0, a.1 + e.1));
            jac[i] = -dy;
            jac[n + i] = dx;
        }
        (p, jac)
    }

    /// End-effector position and `2 x n` Jacobian.
    pub fn fk_jacobian(&self, q: &[f64]) -> Result<([f64; 2], Vec<f64>)> {
        if q.len() != self.links() {
            return Err(RtwError::DimensionMismatch { expected: self.links(), found: q.len() });
        }
        Ok(self.link_end(q, self.links() - 1))
    }

    /// `sum_k m_k J_k^T J_k` for point masses at the link ends, `n x n` row major.
    pub fn mass_matrix(&self, q: &[f64]) -> Result<Vec<f64>> {
        let n = self.links();
        if q.len() != n {
            return Err(RtwError::DimensionMismatch { expected: n, found: q.len() });
        }
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            let (_, j) = self.link_end(q, k);
            let jtj = linalg::matmul(&linalg::transpose(&j, 2, n), &j, n, 2, n);
            m.iter_mut().zip(jtj).for_each(|(a, b)| *a += self.link_masses[k] * b);
        }
        Ok(clamp_spd(&linalg::symmetrize(&m, n), n))
    }
}

const SPD_FLOOR: f64 = 1e-9;

fn clamp_spd(m: &[f64], n: usize) -> Vec<f64> {
    match SymEigen::new(m, n) {
        Ok(e) if e.min_value() >= SPD_FLOOR => m.to_vec(),
        Ok(e) => linalg::symmetrize(&e.apply(|v| v.max(SPD_FLOOR)), n),
        Err(_) => linalg::identity::<f64>(n).into_iter().map(|v| v * SPD_FLOOR).collect(),
    }
}

/// `J J^T` of a `2 x n` Jacobian, with eigenvalues floored to stay positive definite.
pub fn manipulability(jac: &[f64]) -> Vec<f64> {
    let n = jac.len() / 2;
    let m = linalg::matmul(jac, &linalg::transpose(jac, 2, n), 2, n, 2);
    clamp_spd(&linalg::symmetrize(&m, 2), 2)
}

/// Closed curve resembling the letter G, sampled at `s` in `[0, 1]`, centred at `(1.0, 0.6)`.
pub fn g_curve(s: f64) -> [f64; 2] {
    let (cx, cy, r) = (1.0, 0.6, 0.4);
    let split = 0.8;
    let start = std::f64::consts::FRAC_PI_6;
    let sweep = 5.0 * std::f64::consts::PI / 3.0;
    if s <= split {
        let a = start + sweep * s / split;
        [cx + r * a.cos(), cy + r * a.sin()]
    } else {
        let end = start + sweep;
        let (ex, ey) = (cx + r * end.cos(), cy + r * end.sin());
        let u = (s - split) / (1.0 - split);
        // Up towards the centre line, then inward.
        let bar_y = cy;
        if u <= 0.5 {
            let v = u / 0.5;
            [ex, ey + (bar_y - ey) * v]
        } else {
            let v = (u - 0.5) / 0.5;
            [ex + (cx - ex) * v, bar_y]
        }
    }
}

/// Elbow-down inverse kinematics for a two-link arm.
pub fn two_link_ik(robot: &PlanarRobot, p: [f64; 2]) -> Result<[f64; 2]> {
    if robot.links() != 2 {
        return Err(RtwError::config("datasets", "inverse kinematics needs a two-link robot"));
    }
    let (l1, l2) = (robot.link_lengths[0], robot.link_lengths[1]);
    let r2 = p[0] * p[0] + p[1] * p[1];
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return Err(RtwError::config("datasets", "target outside the workspace"));
    }
    let q2 = c2.acos();
    let q1 = p[1].atan2(p[0]) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
    Ok([q1, q2])
}

/// Manipulability ellipsoids of a unit two-link arm tracing the G-like curve, `len` samples.
pub fn manipulability_base_signal<T: Real>(len: usize) -> Result<Signal<T>> {
    let robot = PlanarRobot::uniform(2);
    let mut data = Vec::with_capacity(len * 4);
    for i in 0..len {
        let s = i as f64 / (len.max(2) - 1) as f64;
        let q = two_link_ik(&robot, g_curve(s))?;
        let (_, j) = robot.fk_jacobian(&q)?;
        data.extend(manipulability(&j).into_iter().map(T::lit));
    }
    Signal::new(4, data)
}

/// Randomly warped copies of [`manipulability_base_signal`] on `Spd(2)`.
pub fn manipulability_dataset<T: Real>(n: usize, len: usize, seed: u64, sinc: &SincConfig) -> Result<InvertedDataset<T>> {
    let base = manipulability_base_signal(len)?;
    inverted_warp_dataset(&ManifoldDescriptor::Spd(2), &base, n, seed, sinc)
}

/// Target sphere of a planar lift.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiftTarget {
    S2,
    S3,
}

/// Lifts a planar trajectory onto a sphere.
///
/// `S2`: azimuthal equidistant map of `scale * p` about the north pole `(0, 0, 1)`.
/// `S3`: `(1, scale * x, scale * y, 0)` normalized, with signs chosen so consecutive points
/// lie in the same hemisphere.
pub fn lift_planar_to_sphere<T: Real>(xy: &Signal<T>, scale: f64, target: LiftTarget) -> Result<Signal<T>> {
    if xy.width() != 2 {
        return Err(RtwError::DimensionMismatch { expected: 2, found: xy.width() });
    }
    if xy.data().iter().any(|v| !v.is_finite()) || !scale.is_finite() {
        return Err(RtwError::NonFinite("datasets"));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(xy.len());
    for p in xy.points() {
        let (x, y) = (p[0].to_f64().unwrap() * scale, p[1].to_f64().unwrap() * scale);
        let point = match target {
            LiftTarget::S2 => {
                let rho = x.hypot(y);
                if rho == 0.0 {
                    vec![0.0, 0.0, 1.0]
                } else {
                    let s = rho.sin() / rho;
                    vec![x * s, y * s, rho.cos()]
                }
            }
            LiftTarget::S3 => {
                let norm = (1.0 + x * x + y * y).sqrt();
                let mut q = vec![1.0 / norm, x / norm, y / norm, 0.0];
                if let Some(prev) = out.last() {
                    if prev.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                        q.iter_mut().for_each(|v| *v = -*v);
                    }
                }
                q
            }
        };
        out.push(point);
    }
    let width = if target == LiftTarget::S2 { 3 } else { 4 };
    Signal::from_points(width, out.iter().map(|p| p.iter().map(|&v| T::lit(v)).collect::<Vec<_>>()))
}

/// Two separable classes on `R^1`: class 0 are randomly warped ramps, class 1 randomly warped
/// double lobes. Returns `n_per_class` signals per class, interleaved by class.
pub fn two_class_dataset<T: Real>(n_per_class: usize, len: usize, seed: u64, sinc: &SincConfig) -> Result<SignalSet<T>> {
    let desc = ManifoldDescriptor::Euclidean(1);
    let ramp = Signal::new(1, (0..len).map(|t| T::lit(t as f64 / (len - 1) as f64)).collect())?;
    let lobes = Signal::new(1, (0..len).map(|t| T::lit((2.0 * std::f64::consts::TAU * t as f64 / len as f64).sin().abs())).collect())?;
    let a = inverted_warp_dataset(&desc, &ramp, n_per_class, seed, sinc)?;
    let b = inverted_warp_dataset(&desc, &lobes, n_per_class, seed.wrapping_add(1), sinc)?;
    let mut signals = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (x, y) in a.set.signals.into_iter().zip(b.set.signals) {
        signals.push(x);
        labels.push(0);
        signals.push(y);
        labels.push(1);
    }
    SignalSet::new(desc, signals, Some(labels))
}
