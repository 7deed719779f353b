//! Seed loops over fixed protocols with aggregated metrics.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rtw::align::{align, align_ttw_mode, AlignConfig};
use rtw::baselines::{mmddtw, pairwise_pdtw, MmdVariant, PdtwConfig};
use rtw::barycenter::MeanConfig;
use rtw::datasets::{base_s1_signal, inverted_warp_dataset, manipulability_dataset, write_csv_rows};
use rtw::eval::{paired_t_test, MetricsReport, TTest};
use rtw::{ManifoldDescriptor, Signal};
use serde::Serialize;
use serde_json::json;

use crate::cli::{BenchArgs, Command, Protocol};
use crate::commands::write_json;
use crate::error::{CliError, CliResult};
use crate::plot;

struct Setup {
    desc: ManifoldDescriptor,
    n: usize,
    len: usize,
    baselines: Vec<&'static str>,
}

fn setup(args: &BenchArgs) -> Setup {
    let (desc, n, len, baselines) = match args.protocol {
        Protocol::S1N4 => (ManifoldDescriptor::Sphere(1), 4, 100, vec!["ttw"]),
        Protocol::S1N30 => (ManifoldDescriptor::Sphere(1), 30, 100, vec!["pdtw"]),
        Protocol::SpdRobot => (ManifoldDescriptor::Spd(2), 3, 50, vec!["mmddtw-geodesic", "mmddtw-cholesky"]),
    };
    Setup { desc, n: args.n.unwrap_or(n), len: args.len.unwrap_or(len), baselines }
}

/// Metrics of every method on one seed.
#[derive(Serialize)]
struct RunRecord {
    seed: u64,
    metrics: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(skip)]
    seconds: BTreeMap<String, f64>,
    /// Largest warp step of the RTW result, in units of `1 / T_max`.
    rtw_max_step: f64,
}

struct Plots {
    inputs: Vec<Signal<f64>>,
    warped: Vec<Signal<f64>>,
    mean: Signal<f64>,
    gamma: rtw::warpnet::WarpMatrix<f64>,
}

fn one_run(args: &BenchArgs, s: &Setup, cfg: &AlignConfig, seed: u64, keep: bool) -> CliResult<(RunRecord, Option<Plots>)> {
    let data = match args.protocol {
        Protocol::SpdRobot => manipulability_dataset(s.n, s.len, seed, &cfg.sinc)?,
        _ => inverted_warp_dataset(&s.desc, &base_s1_signal(s.len), s.n, seed, &cfg.sinc)?,
    };
    let x = &data.set.signals;
    let reference = Some(&data.base);
    let mut metrics = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    let cfg = AlignConfig { seed, ..cfg.clone() };
    let mut record = |name: &str, start: Instant, warped: &[Signal<f64>], mean: &Signal<f64>| -> CliResult<()> {
        let elapsed = start.elapsed().as_secs_f64();
        let mut m = MetricsReport::compute(&s.desc, x, warped, mean, reference, elapsed)?.flatten();
        m.remove("runtime_seconds");
        metrics.insert(name.to_string(), m);
        seconds.insert(name.to_string(), elapsed);
        Ok(())
    };
    let start = Instant::now();
    let rtw = align(&s.desc, x, &cfg)?;
    record("rtw", start, &rtw.warped, &rtw.mean)?;
    for &b in &s.baselines {
        let start = Instant::now();
        match b {
            "ttw" => {
                // The sine-basis aligner is trained on the plain per-index variance.
                let mut tcfg = AlignConfig { lambda: 0.0, ..cfg.clone() };
                tcfg.loss.window = 0;
                let r = align_ttw_mode(&s.desc, x, args.ttw_k, &tcfg)?;
                record(b, start, &r.warped, &r.mean)?;
            }
            "pdtw" => {
                let m = pairwise_pdtw(&s.desc, x, &PdtwConfig::default())?;
                record(b, start, &m.warped, &m.mean)?;
            }
            _ => {
                let variant = if b.ends_with("cholesky") { MmdVariant::Cholesky } else { MmdVariant::Geodesic };
                let m = mmddtw(&s.desc, x, variant, &MeanConfig::default())?;
                record(b, start, &m.warped, &m.mean)?;
            }
        }
    }
    let rtw_max_step = rtw.metrics["max_step"] * s.len as f64;
    let plots = keep.then(|| Plots { inputs: x.clone(), warped: rtw.warped.clone(), mean: rtw.mean.clone(), gamma: rtw.gamma.clone() });
    Ok((RunRecord { seed, metrics, seconds, rtw_max_step }, plots))
}

#[derive(Serialize)]
struct Stat {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

fn stat(v: &[f64]) -> Stat {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Stat { mean, std: var.sqrt(), min: v.iter().copied().fold(f64::INFINITY, f64::min), max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max) }
}

#[derive(Serialize)]
struct Comparison {
    baseline: String,
    metric: String,
    /// Seeds on which RTW scored strictly lower.
    rtw_lower: usize,
    test: Option<TTest>,
}

pub fn bench(args: &BenchArgs, command: &Command) -> CliResult<()> {
    if args.runs == 0 {
        return Err(CliError::config("cli: --runs must be at least 1"));
    }
    let s = setup(args);
    if s.n < 2 || s.len < 2 {
        return Err(CliError::config("cli: benchmarks need at least two signals of length two"));
    }
    let cfg = args.opts.config()?;
    if args.protocol == Protocol::SpdRobot && s.n > rtw::baselines::MMDDTW_MAX_SIGNALS {
        return Err(rtw::RtwError::TooLarge { signals: s.n, nodes: (s.len as f64).powi(s.n as i32) }.into());
    }
    std::fs::create_dir_all(&args.out)?;
    let seeds: Vec<u64> = (0..args.runs as u64).map(|i| args.opts.seed + i).collect();
    let results = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| one_run(args, &s, &cfg, seed, i == 0 && args.emit_plots))
        .collect::<CliResult<Vec<_>>>()?;
    let (runs, plots): (Vec<RunRecord>, Vec<Option<Plots>>) = results.into_iter().unzip();

    let methods: Vec<String> = std::iter::once("rtw".to_string()).chain(s.baselines.iter().map(|b| b.to_string())).collect();
    let metric_names: Vec<String> = runs[0].metrics["rtw"].keys().cloned().collect();
    let mut summary: BTreeMap<String, BTreeMap<String, Stat>> = BTreeMap::new();
    let mut table = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (ki, key) in metric_names.iter().enumerate() {
            let v: Vec<f64> = runs.iter().map(|r| r.metrics[method][key]).collect();
            let st = stat(&v);
            table.push(vec![mi as f64, ki as f64, st.mean, st.std, st.min, st.max]);
            summary.entry(method.clone()).or_default().insert(key.clone(), st);
        }
    }
    let mut comparisons = Vec::new();
    for b in &s.baselines {
        for key in metric_names.iter().filter(|k| k.ends_with("_per_signal")) {
            let a: Vec<f64> = runs.iter().map(|r| r.metrics["rtw"][key]).collect();
            let c: Vec<f64> = runs.iter().map(|r| r.metrics[*b][key]).collect();
            comparisons.push(Comparison {
                baseline: b.to_string(),
                metric: key.clone(),
                rtw_lower: a.iter().zip(&c).filter(|(x, y)| x < y).count(),
                test: paired_t_test(&a, &c, 0.05).ok(),
            });
        }
    }

    let header = format!("method index: {}\nmetric index: {}\nmethod,metric,mean,std,min,max", methods.join(" "), metric_names.join(" "));
    write_csv_rows(&args.out.join("summary.csv"), Some(&header), table)?;
    write_json(
        &args.out.join("summary.json"),
        &json!({
            "protocol": args.protocol,
            "runs": args.runs,
            "seeds": seeds,
            "signals": s.n,
            "length": s.len,
            "manifold": s.desc.to_string(),
            "methods": summary,
            "comparisons": comparisons,
            "rtw_max_step": runs.iter().map(|r| r.rtw_max_step).fold(0.0, f64::max),
        }),
    )?;
    write_json(&args.out.join("runs.json"), &runs)?;
    let timing: Vec<_> = runs.iter().map(|r| json!({ "seed": r.seed, "seconds": r.seconds })).collect();
    write_json(&args.out.join("timing.json"), &timing)?;
    if let Some(Some(p)) = plots.into_iter().next() {
        write_plots(&args.out.join("plots"), &s.desc, &p)?;
    }
    crate::commands::write_run_config(&args.out, command, Some(args.opts.seed), Some(&s.desc), Some(&cfg), args.emit_plots)?;
    for method in &methods {
        let m = &summary[method];
        let ra = m.get("restoration_accuracy_per_signal").map_or(f64::NAN, |s| s.mean);
        println!(
            "{method:>16}: RA {ra:.4}  BL {:.4}  AQ {:.4}",
            m["barycenter_loss_per_signal"].mean, m["alignment_quality_per_signal"].mean
        );
    }
    Ok(())
}

fn write_plots(dir: &Path, desc: &ManifoldDescriptor, p: &Plots) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let inputs: Vec<&Signal<f64>> = p.inputs.iter().collect();
    let warped: Vec<&Signal<f64>> = p.warped.iter().collect();
    plot::write(&dir.join("before.svg"), plot::signals_svg(desc, &inputs, None, "inputs, first seed"))?;
    plot::write(&dir.join("after.svg"), plot::signals_svg(desc, &warped, Some(&p.mean), "RTW aligned, first seed"))?;
    plot::write(&dir.join("warps.svg"), plot::warps_svg(&p.gamma, "RTW warps, first seed"))?;
    Ok(())
}
