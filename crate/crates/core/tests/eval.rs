use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw::baselines::dtw_geodesic;
use rtw::datasets::{two_class_dataset, SignalSet};
use rtw::eval::*;
use rtw::manifolds::ManifoldDescriptor;
use rtw::resample::SincConfig;
use rtw::Signal;

fn circle(rng: &mut ChaCha8Rng, t: usize) -> Signal<f64> {
    Signal::from_points(2, (0..t).map(|_| {
        let a: f64 = rng.gen_range(-2.0..2.0);
        [a.cos(), a.sin()]
    }))
    .unwrap()
}

#[test]
fn metrics_vanish_on_degenerate_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let desc = ManifoldDescriptor::Sphere(1);
    let x = circle(&mut rng, 15);
    let same = [&x, &x, &x];
    assert!(restoration_accuracy(&desc, &same, &x).unwrap().raw.abs() < 1e-10);
    assert!(barycenter_loss(&desc, &[&x], &x).unwrap().raw.abs() < 1e-10);
    assert!(alignment_quality(&desc, &same, &x).unwrap().raw.abs() < 1e-10);
    let y = circle(&mut rng, 11);
    let single = restoration_accuracy(&desc, &[&y], &x).unwrap();
    assert_eq!(single.raw, dtw_geodesic(&desc, &y, &x).unwrap().cost);
    assert_eq!(single.per_signal, single.raw);
}

#[test]
fn metrics_match_direct_dtw() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let desc = ManifoldDescriptor::Sphere(1);
    let mut signals: Vec<Signal<f64>> = (0..6).map(|i| circle(&mut rng, 8 + i)).collect();
    let target = circle(&mut rng, 10);
    let refs: Vec<&Signal<f64>> = signals.iter().collect();
    let m = alignment_quality(&desc, &refs, &target).unwrap();
    let direct: Vec<f64> = signals.iter().map(|s| dtw_geodesic(&desc, s, &target).unwrap().cost).collect();
    assert_eq!(m.values, direct);
    assert!((m.raw - direct.iter().sum::<f64>()).abs() < 1e-12);
    assert!((m.per_signal - m.raw / 6.0).abs() < 1e-12);
    signals.shuffle(&mut rng);
    let refs: Vec<&Signal<f64>> = signals.iter().collect();
    assert!((barycenter_loss(&desc, &refs, &target).unwrap().raw - m.raw).abs() < 1e-12);

    let report = MetricsReport::compute(&desc, &signals, &signals, &target, Some(&target), 1.5).unwrap();
    let flat = report.flatten();
    for key in [
        "restoration_accuracy_raw",
        "restoration_accuracy_per_signal",
        "barycenter_loss_raw",
        "barycenter_loss_per_signal",
        "alignment_quality_raw",
        "alignment_quality_per_signal",
        "runtime_seconds",
    ] {
        assert!(flat[key].is_finite() && flat[key] >= 0.0, "{key}");
    }
    let without = MetricsReport::compute(&desc, &signals, &signals, &target, None, 0.0).unwrap();
    assert!(!without.flatten().contains_key("restoration_accuracy_raw"));
}

#[test]
fn nearest_centroid() {
    let desc = ManifoldDescriptor::Euclidean(1);
    let a = Signal::new(1, vec![0.0, 1.0, 2.0]).unwrap();
    let b = Signal::new(1, vec![5.0, 5.0, 5.0]).unwrap();
    let test = SignalSet::new(desc.clone(), vec![a.clone(), b.clone()], Some(vec![4, 9])).unwrap();
    let r = nearest_centroid_classify(&test, &[(9, b.clone()), (4, a.clone())]).unwrap();
    assert_eq!(r.predicted, vec![4, 9]);
    assert_eq!(r.accuracy, Some(1.0));
    // Equidistant: the lower label wins.
    let mid = SignalSet::new(desc.clone(), vec![Signal::new(1, vec![1.0]).unwrap()], None).unwrap();
    let r = nearest_centroid_classify(&mid, &[(7, Signal::new(1, vec![2.0]).unwrap()), (3, Signal::new(1, vec![0.0]).unwrap())]).unwrap();
    assert_eq!(r.predicted, vec![3]);
    assert_eq!(r.accuracy, None);
    let one = nearest_centroid_classify(&test, &[(4, a)]).unwrap();
    assert_eq!(one.accuracy, Some(0.5));
    assert!(nearest_centroid_classify(&test, &[]).is_err());
}

#[test]
fn two_class_naive_centroids() {
    let desc = ManifoldDescriptor::Euclidean(1);
    let train = two_class_dataset::<f64>(10, 60, 11, &SincConfig::default()).unwrap();
    let test = two_class_dataset::<f64>(10, 60, 12, &SincConfig::default()).unwrap();
    let labels = train.labels.clone().unwrap();
    let centroids: Vec<(i64, Signal<f64>)> = [0i64, 1]
        .iter()
        .map(|&c| {
            let members: Vec<&Signal<f64>> = train.signals.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(s, _)| s).collect();
            let (mu, _) = rtw::barycenter::mean_signal(&desc, &members, &Default::default(), true).unwrap();
            (c, mu)
        })
        .collect();
    let r = nearest_centroid_classify(&test, &centroids).unwrap();
    assert!(r.accuracy.unwrap() >= 0.9);
}

#[test]
fn t_test_reference_values() {
    let a = [0.81, 1.23, 0.95, 1.40, 1.02, 0.77, 1.18, 1.31, 0.89, 1.05];
    let b = [0.92, 1.10, 1.01, 1.22, 1.07, 0.70, 1.02, 1.25, 0.93, 0.97];
    let r = paired_t_test(&a, &b, 0.05).unwrap();
    assert!((r.t - 1.313926475804126477468564).abs() < 1e-9);
    assert!((r.p - 0.2213733828289303293013193).abs() < 1e-9);
    assert_eq!(r.df, 9);
    assert!(!r.significant);
    assert_eq!(r.direction, Direction::Greater);

    let a = [3.1, 2.9, 3.4, 3.8, 3.0, 3.3, 2.7, 3.6, 3.2, 3.5];
    let b = [2.0, 2.2, 2.1, 2.6, 1.9, 2.4, 2.0, 2.3, 2.5, 2.2];
    let r = paired_t_test(&a, &b, 0.05).unwrap();
    assert!((r.t - 12.60437290412166463168622).abs() < 1e-9);
    assert!((r.p - 5.061059451916289920227518e-7).abs() < 1e-9);
    assert!(r.significant);

    let s = paired_t_test(&b, &a, 0.05).unwrap();
    assert!((s.t + r.t).abs() < 1e-12);
    assert!((s.p - r.p).abs() < 1e-12);
    assert_eq!(s.direction, Direction::Less);
}

#[test]
fn t_test_degenerate_and_errors() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let same = paired_t_test(&a, &a, 0.05).unwrap();
    assert_eq!((same.p, same.significant, same.degenerate), (1.0, false, true));
    let b = [0.0, 1.0, 2.0, 3.0];
    let shifted = paired_t_test(&a, &b, 0.05).unwrap();
    assert!(shifted.degenerate && shifted.significant && shifted.p == 0.0 && shifted.t == f64::INFINITY);
    assert!(paired_t_test(&a, &b[..3], 0.05).is_err());
    assert!(paired_t_test(&[1.0], &[2.0], 0.05).is_err());
    assert!(paired_t_test(&[1.0, f64::NAN], &[2.0, 1.0], 0.05).is_err());
}
