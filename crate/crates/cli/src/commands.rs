use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rtw::align::{align, AlignConfig, AlignmentResult};
use rtw::barycenter::{mean_signal, MeanConfig};
use rtw::baselines::{dtw_geodesic, mmddtw, pairwise_pdtw, MmdVariant, MultiAlignment, PdtwConfig};
use rtw::datasets::*;
use rtw::eval::{nearest_centroid_classify, MetricsReport};
use rtw::resample::SincConfig;
use rtw::{ManifoldDescriptor, Signal};
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::plot;

/// Resolved configuration written to `run.json` in every output directory.
#[derive(Serialize)]
pub struct RunConfig<'a> {
    pub version: &'static str,
    pub command: &'a Command,
    pub seed: Option<u64>,
    pub manifold: Option<String>,
    pub align: Option<&'a AlignConfig>,
    pub emit_plots: bool,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn prepare_out(out: &Path) -> CliResult<()> {
    if out.is_file() {
        return Err(CliError::config(format!("cli: output path {} is a file", out.display())));
    }
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::config(format!("cli: {what} {} does not exist", path.display())));
    }
    Ok(())
}

pub fn write_run_config(out: &Path, command: &Command, seed: Option<u64>, manifold: Option<&ManifoldDescriptor>, align: Option<&AlignConfig>, emit_plots: bool) -> CliResult<()> {
    let run = RunConfig { version: env!("CARGO_PKG_VERSION"), command, seed, manifold: manifold.map(|m| m.to_string()), align, emit_plots };
    write_json(&out.join("run.json"), &run)
}

fn load_set(path: &Path, expected: Option<&str>) -> CliResult<SignalSet<f64>> {
    require_file(path, "manifest")?;
    let (set, _) = SignalSet::<f64>::load(path)?;
    if let Some(m) = expected {
        let want = parse_manifold(m)?;
        if want != set.descriptor {
            return Err(CliError::Core(rtw::RtwError::ManifestMismatch(format!("manifest holds {}, --manifold says {want}", set.descriptor))));
        }
    }
    set.validate()?;
    Ok(set)
}

fn refs(signals: &[Signal<f64>]) -> Vec<&Signal<f64>> {
    signals.iter().collect()
}

/// Ground-truth signal: the explicit manifest, or `base/manifest.json` beside the inputs.
fn load_reference(explicit: Option<&Path>, input: &Path) -> CliResult<Option<Signal<f64>>> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => input.parent().map(|d| d.join("base").join("manifest.json")).filter(|p| p.is_file()),
    };
    match path {
        None => Ok(None),
        Some(p) => {
            let set = load_set(&p, None)?;
            let first = set.signals.into_iter().next().ok_or_else(|| CliError::config("cli: reference manifest holds no signal"))?;
            Ok(Some(first))
        }
    }
}

/// Deterministic metric map: the flattened report without its runtime.
fn metric_map(report: &MetricsReport) -> BTreeMap<String, f64> {
    let mut m = report.flatten();
    m.remove("runtime_seconds");
    m
}

// ---------------------------------------------------------------- generate

fn planar_g(len: usize) -> CliResult<Signal<f64>> {
    Ok(Signal::from_points(2, (0..len).map(|i| g_curve(i as f64 / (len.max(2) - 1) as f64)))?)
}

/// Smooth base signal for the inverted-warping generator on `desc`.
pub fn base_signal(desc: &ManifoldDescriptor, len: usize) -> CliResult<Signal<f64>> {
    let t = |i: usize| i as f64 / len as f64;
    Ok(match desc {
        ManifoldDescriptor::Sphere(1) => base_s1_signal(len),
        ManifoldDescriptor::Sphere(2) => lift_planar_to_sphere(&planar_g(len)?, 1.0, LiftTarget::S2)?,
        ManifoldDescriptor::Sphere(3) => lift_planar_to_sphere(&planar_g(len)?, 1.0, LiftTarget::S3)?,
        ManifoldDescriptor::Spd(2) => manipulability_base_signal(len)?,
        ManifoldDescriptor::Euclidean(d) => {
            let d = *d;
            Signal::new(d, (0..len).flat_map(|i| (0..d).map(move |k| (std::f64::consts::TAU * (k + 1) as f64 * t(i) + k as f64).sin())).collect())?
        }
        m if *m == ManifoldDescriptor::pose3d() => {
            let xy = planar_g(len)?;
            let q = lift_planar_to_sphere(&xy, 1.0, LiftTarget::S3)?;
            let data = (0..len)
                .flat_map(|i| {
                    let p = xy.point(i);
                    let mut row = vec![p[0], p[1], 0.2 * (std::f64::consts::TAU * t(i)).sin()];
                    row.extend_from_slice(q.point(i));
                    row
                })
                .collect();
            Signal::new(7, data)?
        }
        other => return Err(CliError::config(format!("cli: no base signal for {other}; use sphere:1..3, spd:2, euclidean:D or pose3d"))),
    })
}

pub fn generate(args: &GenerateArgs, command: &Command) -> CliResult<()> {
    if args.len < 2 || args.n == 0 {
        return Err(CliError::config("cli: --n must be positive and --len at least 2"));
    }
    let sinc = SincConfig { window: args.sinc_window, ..Default::default() };
    sinc.validate()?;
    let desc = match (args.kind, &args.manifold) {
        (GenerateKind::TwoClass, Some(m)) if parse_manifold(m)? != ManifoldDescriptor::Euclidean(1) => {
            return Err(CliError::config("cli: two-class sets live on euclidean:1"));
        }
        (GenerateKind::TwoClass, _) => ManifoldDescriptor::Euclidean(1),
        (GenerateKind::Inverted, m) => parse_manifold(m.as_deref().unwrap_or("sphere:1"))?,
    };
    prepare_out(&args.out)?;
    let set = match args.kind {
        GenerateKind::Inverted => {
            let base = base_signal(&desc, args.len)?;
            let data = inverted_warp_dataset(&desc, &base, args.n, args.seed, &sinc)?;
            SignalSet::new(desc.clone(), vec![base], None)?.save(&args.out.join("base"), "base")?;
            let rows = (0..args.len).map(|i| data.warps.iter().map(|w| w[i]).collect::<Vec<_>>());
            write_csv_rows(&args.out.join("warps.csv"), Some(&format!("ground-truth warp values, {} rows x {} signals", args.len, args.n)), rows)?;
            write_json(&args.out.join("ground_truth.json"), &json!({ "families": data.families, "base": "base/manifest.json", "warps": "warps.csv" }))?;
            if args.emit_plots {
                plot::write(&args.out.join("signals.svg"), plot::signals_svg(&desc, &refs(&data.set.signals), Some(&data.base), "generated signals and base"))?;
            }
            data.set
        }
        GenerateKind::TwoClass => {
            let set = two_class_dataset(args.n, args.len, args.seed, &sinc)?;
            if args.emit_plots {
                plot::write(&args.out.join("signals.svg"), plot::signals_svg(&desc, &refs(&set.signals), None, "two-class signals"))?;
            }
            set
        }
    };
    let manifest = set.save(&args.out, "signal")?;
    write_run_config(&args.out, command, Some(args.seed), Some(&desc), None, args.emit_plots)?;
    log::info!("wrote {} signals to {}", set.len(), manifest.display());
    Ok(())
}

// ---------------------------------------------------------------- align

fn alignment_plots(out: &Path, inputs: &[Signal<f64>], r: &AlignmentResult<f64>) -> CliResult<()> {
    let desc = &r.descriptor;
    plot::write(&out.join("before.svg"), plot::signals_svg(desc, &refs(inputs), None, "inputs"))?;
    plot::write(&out.join("after.svg"), plot::signals_svg(desc, &refs(&r.warped), Some(&r.mean), "aligned signals and mean"))?;
    plot::write(&out.join("warps.svg"), plot::warps_svg(&r.gamma, "warping functions"))?;
    plot::write(&out.join("loss.svg"), plot::loss_svg(&r.loss_trace, "training trace"))?;
    Ok(())
}

pub fn run_align(args: &AlignArgs, command: &Command) -> CliResult<()> {
    let set = load_set(&args.input, args.manifold.as_deref())?;
    let cfg = args.opts.config()?;
    prepare_out(&args.out)?;
    let start = Instant::now();
    let r = align(&set.descriptor, &set.signals, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    r.save(&args.out)?;
    write_json(&args.out.join("timing.json"), &json!({ "align_seconds": elapsed }))?;
    if args.emit_plots {
        alignment_plots(&args.out, &set.signals, &r)?;
    }
    write_run_config(&args.out, command, Some(cfg.seed), Some(&set.descriptor), Some(&cfg), args.emit_plots)?;
    log::info!("best epoch {} objective {:.6e}", r.best_epoch, r.metrics["best_objective"]);
    Ok(())
}

// ---------------------------------------------------------------- eval

pub fn eval(args: &EvalArgs, command: &Command) -> CliResult<()> {
    let inputs = load_set(&args.input, None)?;
    let warped = load_set(&args.aligned.join("warped").join("manifest.json"), None)?;
    let mean = load_set(&args.aligned.join("mean").join("manifest.json"), None)?;
    if warped.descriptor != inputs.descriptor || mean.descriptor != inputs.descriptor {
        return Err(CliError::Core(rtw::RtwError::ManifestMismatch("aligned signals and inputs live on different manifolds".into())));
    }
    let mean = mean.signals.into_iter().next().ok_or_else(|| CliError::config("cli: empty mean manifest"))?;
    let reference = load_reference(args.reference.as_deref(), &args.input)?;
    prepare_out(&args.out)?;
    let report = MetricsReport::compute(&inputs.descriptor, &inputs.signals, &warped.signals, &mean, reference.as_ref(), 0.0)?;
    write_json(&args.out.join("metrics.json"), &json!({ "metrics": metric_map(&report), "report": report }))?;
    write_run_config(&args.out, command, None, Some(&inputs.descriptor), None, false)?;
    Ok(())
}

// ---------------------------------------------------------------- baseline

fn save_multi(out: &Path, desc: &ManifoldDescriptor, inputs: &[Signal<f64>], m: &MultiAlignment<f64>, reference: Option<&Signal<f64>>) -> CliResult<()> {
    SignalSet::new(desc.clone(), m.warped.clone(), None)?.save(&out.join("warped"), "warped")?;
    SignalSet::new(desc.clone(), vec![m.mean.clone()], None)?.save(&out.join("mean"), "mean")?;
    let rows = m.path.iter().map(|step| step.iter().map(|&i| i as f64).collect::<Vec<_>>());
    write_csv_rows(&out.join("path.csv"), Some("source index per signal, one row per aligned step"), rows)?;
    let report = MetricsReport::compute(desc, inputs, &m.warped, &m.mean, reference, 0.0)?;
    write_json(&out.join("metrics.json"), &json!({ "cost": m.cost, "metrics": metric_map(&report), "report": report }))
}

pub fn baseline(args: &BaselineArgs, command: &Command) -> CliResult<()> {
    let set = load_set(&args.input, args.manifold.as_deref())?;
    let desc = &set.descriptor;
    let reference = load_reference(args.reference.as_deref(), &args.input)?;
    let variant = match args.variant {
        VariantArg::Geodesic => MmdVariant::Geodesic,
        VariantArg::Cholesky => MmdVariant::Cholesky,
    };
    // Guards run before any output is written.
    let result = match args.kind {
        BaselineKind::Dtw => None,
        BaselineKind::Mmddtw => Some(mmddtw(desc, &set.signals, variant, &MeanConfig::default())?),
        BaselineKind::Pdtw => Some(pairwise_pdtw(desc, &set.signals, &PdtwConfig { shuffle_seed: args.seed, ..Default::default() })?),
    };
    prepare_out(&args.out)?;
    match result {
        None => {
            let n = set.len();
            let mut costs = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let c = dtw_geodesic(desc, &set.signals[i], &set.signals[j])?.cost;
                    costs[i][j] = c;
                    costs[j][i] = c;
                }
            }
            write_json(&args.out.join("dtw.json"), &json!({ "costs": costs }))?;
        }
        Some(m) => {
            save_multi(&args.out, desc, &set.signals, &m, reference.as_ref())?;
            if args.emit_plots {
                plot::write(&args.out.join("after.svg"), plot::signals_svg(desc, &refs(&m.warped), Some(&m.mean), "aligned signals and mean"))?;
            }
        }
    }
    write_run_config(&args.out, command, args.seed, Some(desc), None, args.emit_plots)?;
    Ok(())
}

// ---------------------------------------------------------------- classify

fn class_members(set: &SignalSet<f64>) -> CliResult<BTreeMap<i64, Vec<Signal<f64>>>> {
    let labels = set.labels.as_ref().ok_or_else(|| CliError::config("cli: the training manifest has no labels"))?;
    let mut by_class: BTreeMap<i64, Vec<Signal<f64>>> = BTreeMap::new();
    for (s, l) in set.signals.iter().zip(labels) {
        by_class.entry(*l).or_default().push(s.clone());
    }
    Ok(by_class)
}

/// Per-class centroids; classes with one member use that member. RTW means are brought back to
/// the longest member's length.
pub fn centroids(desc: &ManifoldDescriptor, by_class: &BTreeMap<i64, Vec<Signal<f64>>>, rtw_cfg: Option<&AlignConfig>) -> CliResult<Vec<(i64, Signal<f64>)>> {
    by_class
        .iter()
        .map(|(&label, members)| {
            let c = match (rtw_cfg, members.len()) {
                (_, 1) => members[0].clone(),
                (Some(cfg), _) => {
                    let t_max = members.iter().map(|s| s.len()).max().unwrap_or(2);
                    align(desc, members, cfg)?.mean_at_length(t_max, &cfg.sinc)?
                }
                (None, _) => mean_signal(desc, &refs(members), &MeanConfig::default(), true)?.0,
            };
            Ok((label, c))
        })
        .collect()
}

pub fn classify(args: &ClassifyArgs, command: &Command) -> CliResult<()> {
    let train = load_set(&args.train, None)?;
    let test = load_set(&args.test, Some(&train.descriptor.to_string()))?;
    let cfg = args.opts.config()?;
    let by_class = class_members(&train)?;
    prepare_out(&args.out)?;
    let methods: &[CentroidMethod] = match args.method {
        CentroidMethod::Both => &[CentroidMethod::Naive, CentroidMethod::Rtw],
        CentroidMethod::Naive => &[CentroidMethod::Naive],
        CentroidMethod::Rtw => &[CentroidMethod::Rtw],
    };
    let mut results = BTreeMap::new();
    for &method in methods {
        let name = if method == CentroidMethod::Rtw { "rtw" } else { "naive" };
        let cs = centroids(&train.descriptor, &by_class, (method == CentroidMethod::Rtw).then_some(&cfg))?;
        let labels: Vec<i64> = cs.iter().map(|c| c.0).collect();
        let signals: Vec<Signal<f64>> = cs.iter().map(|c| c.1.clone()).collect();
        if args.emit_plots {
            plot::write(&args.out.join(format!("centroids_{name}.svg")), plot::signals_svg(&train.descriptor, &refs(&signals), None, &format!("{name} centroids")))?;
        }
        SignalSet::new(train.descriptor.clone(), signals, Some(labels))?.save(&args.out.join(format!("centroids_{name}")), "centroid")?;
        let r = nearest_centroid_classify(&test, &cs)?;
        log::info!("{name} centroids: accuracy {:?}", r.accuracy);
        results.insert(name, r);
    }
    write_json(&args.out.join("classification.json"), &results)?;
    write_run_config(&args.out, command, Some(cfg.seed), Some(&train.descriptor), Some(&cfg), args.emit_plots)?;
    Ok(())
}
