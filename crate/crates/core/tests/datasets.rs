use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw::baselines::dtw_geodesic;
use rtw::datasets::*;
use rtw::manifolds::ManifoldDescriptor;
use rtw::resample::{warp_signal_riemannian, SincConfig};
use rtw::{RtwError, Signal};

fn eigen_min_2x2(m: &[f64]) -> f64 {
    let (a, b, d) = (m[0], m[1], m[3]);
    let tr = a + d;
    let det = a * d - b * b;
    tr / 2.0 - ((tr * tr / 4.0) - det).max(0.0).sqrt()
}

/// Symmetric matrices are positive definite iff elimination without pivoting keeps every pivot positive.
fn is_positive_definite(m: &[f64], n: usize) -> bool {
    let mut a = m.to_vec();
    for k in 0..n {
        let pivot = a[k * n + k];
        if !(pivot > 0.0) {
            return false;
        }
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    true
}

#[test]
fn planar_kinematics_examples() {
    let robot = PlanarRobot::uniform(2);
    let (p, j) = robot.fk_jacobian(&[0.0, std::f64::consts::FRAC_PI_2]).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    let expect = [-1.0, -1.0, 1.0, 0.0];
    for (a, b) in j.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    let m = manipulability(&j);
    for (a, b) in m.iter().zip([2.0, -1.0, -1.0, 1.0]) {
        assert!((a - b).abs() < 1e-14);
    }
    assert_eq!(manipulability(&[1.0, 0.0, 0.0, 1.0]), vec![1.0, 0.0, 0.0, 1.0]);

    let arm = PlanarRobot::new(vec![0.5, 1.5, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
    let (p, _) = arm.fk_jacobian(&[0.0; 3]).unwrap();
    assert_eq!(p, [4.0, 0.0]);
    assert!(arm.fk_jacobian(&[0.0; 2]).is_err());
    assert!(PlanarRobot::new(vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 5, 8] {
        let lengths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
        let robot = PlanarRobot::new(lengths, vec![1.0; n]).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (_, j) = robot.fk_jacobian(&q).unwrap();
            let h = 1e-6;
            for i in 0..n {
                let mut up = q.clone();
                up[i] += h;
                let mut dn = q.clone();
                dn[i] -= h;
                let (pu, _) = robot.fk_jacobian(&up).unwrap();
                let (pd, _) = robot.fk_jacobian(&dn).unwrap();
                for r in 0..2 {
                    assert!(((pu[r] - pd[r]) / (2.0 * h) - j[r * n + i]).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn mass_matrices_are_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [8, 32] {
        let robot = PlanarRobot::uniform(n);
        for _ in 0..100 {
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.2..3.2)).collect();
            let m = robot.mass_matrix(&q).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(m[i * n + j], m[j * n + i]);
                }
            }
            assert!(is_positive_definite(&m, n));
            ManifoldDescriptor::Spd(n).check_point(&m).unwrap();
        }
    }
}

#[test]
fn manipulability_signals_are_spd() {
    let base = manipulability_base_signal::<f64>(50).unwrap();
    let spd = ManifoldDescriptor::Spd(2);
    spd.check_signal(&base).unwrap();
    assert!(base.points().all(|p| eigen_min_2x2(p) > 1e-6));
    let data = manipulability_dataset::<f64>(3, 50, 4, &SincConfig::default()).unwrap();
    data.set.validate().unwrap();
    assert_eq!(data.set.descriptor, spd);
}

#[test]
fn sphere_lifts() {
    let origin = Signal::new(2, vec![0.0, 0.0]).unwrap();
    let s2 = lift_planar_to_sphere(&origin, 1.0, LiftTarget::S2).unwrap();
    assert_eq!(s2.point(0), &[0.0, 0.0, 1.0]);
    let s3 = lift_planar_to_sphere(&origin, 1.0, LiftTarget::S3).unwrap();
    assert_eq!(s3.point(0), &[1.0, 0.0, 0.0, 0.0]);

    let g = Signal::from_points(2, (0..200).map(|i| g_curve(i as f64 / 199.0))).unwrap();
    for target in [LiftTarget::S2, LiftTarget::S3] {
        let lifted = lift_planar_to_sphere(&g, 0.8, target).unwrap();
        let desc = ManifoldDescriptor::Sphere(lifted.width() - 1);
        for p in lifted.points() {
            assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        }
        for i in 1..lifted.len() {
            assert!(desc.dist(lifted.point(i - 1), lifted.point(i)).unwrap() < std::f64::consts::FRAC_PI_2);
        }
    }

    let s2d = ManifoldDescriptor::Sphere(2);
    for (cx, r) in [(0.0, 0.05), (0.3, 0.05), (0.0, 0.3)] {
        let k = 2000;
        let circle = Signal::from_points(2, (0..=k).map(|i| {
            let a = std::f64::consts::TAU * i as f64 / k as f64;
            [cx + r * a.cos(), r * a.sin()]
        }))
        .unwrap();
        let lifted = lift_planar_to_sphere(&circle, 1.0, LiftTarget::S2).unwrap();
        let arc: f64 = (1..=k).map(|i| s2d.dist(lifted.point(i - 1), lifted.point(i)).unwrap()).sum();
        // About the pole the image is a circle of geodesic radius r, circumference 2 pi sin r.
        let expected = if cx == 0.0 { std::f64::consts::TAU * r.sin() } else { std::f64::consts::TAU * r };
        assert!((arc / expected - 1.0).abs() < 0.02, "{arc} vs {expected}");
    }
    let bad = Signal::new(2, vec![f64::NAN, 0.0]).unwrap();
    assert!(matches!(lift_planar_to_sphere(&bad, 1.0, LiftTarget::S2), Err(RtwError::NonFinite(_))));
}

#[test]
fn s3_lift_sign_continuity() {
    let path = Signal::from_points(2, (0..100).map(|i| [i as f64 * 0.5 - 25.0, 3.0])).unwrap();
    let lifted = lift_planar_to_sphere(&path, 1.0, LiftTarget::S3).unwrap();
    for i in 1..lifted.len() {
        let dot: f64 = lifted.point(i - 1).iter().zip(lifted.point(i)).map(|(a, b)| a * b).sum();
        assert!(dot >= 0.0);
    }
}

#[test]
fn inverted_dataset_properties() {
    let desc = ManifoldDescriptor::Sphere(1);
    let base = base_s1_signal::<f64>(100);
    let sinc = SincConfig::default();
    let data = inverted_warp_dataset(&desc, &base, 30, 7, &sinc).unwrap();
    assert_eq!(data.set.len(), 30);
    data.set.validate().unwrap();
    for ((s, w), _) in data.set.signals.iter().zip(&data.warps).zip(&data.families) {
        assert_eq!(w.len(), 100);
        let again = warp_signal_riemannian(&desc, &base, w, &sinc).unwrap();
        for (a, b) in again.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(dtw_geodesic(&desc, s, &base).unwrap().cost > 0.0);
    }
    let again = inverted_warp_dataset(&desc, &base, 30, 7, &sinc).unwrap();
    assert_eq!(again.set, data.set);
    assert_eq!(again.warps, data.warps);
    let other = inverted_warp_dataset(&desc, &base, 30, 8, &sinc).unwrap();
    assert_ne!(other.warps, data.warps);

    let identity = warp_signal_riemannian(&desc, &base, &grid_identity_warp::<f64>(100), &sinc).unwrap();
    for (a, b) in identity.data().iter().zip(base.data()) {
        assert!((a - b).abs() < 1e-8);
    }
    let phi0 = base.point(25);
    assert!((phi0[1].atan2(phi0[0]) - 0.8).abs() < 1e-12);
}

#[test]
fn two_class_set() {
    let set = two_class_dataset::<f64>(5, 60, 3, &SincConfig::default()).unwrap();
    assert_eq!(set.len(), 10);
    assert_eq!(set.labels.as_deref(), Some(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1][..]));
    assert!(set.signals.iter().all(|s| s.len() == 60));
}

#[test]
fn signal_sets_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let desc = ManifoldDescriptor::Product(vec![ManifoldDescriptor::Euclidean(2), ManifoldDescriptor::Sphere(1)]);
    let signals: Vec<Signal<f64>> = (0..3)
        .map(|_| {
            Signal::from_points(4, (0..17).map(|_| {
                let a: f64 = rng.gen_range(-3.0..3.0);
                [rng.gen_range(-1e6..1e6), rng.gen::<f64>() * 1e-300, a.cos(), a.sin()]
            }))
            .unwrap()
        })
        .collect();
    let set = SignalSet::new(desc, signals, Some(vec![3, -1, 7])).unwrap();
    let manifest = set.save(dir.path(), "sig").unwrap();
    let (back, projected) = SignalSet::<f64>::load(&manifest).unwrap();
    assert_eq!(projected, 0);
    assert_eq!(back, set);
    for (a, b) in back.signals.iter().zip(&set.signals) {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(json["manifold"]["type"], "product");
    assert_eq!(json["signals"][0], "sig_000.csv");
}

#[test]
fn loader_sanitizes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "# comment\n1.0,0.0\n0.0,2.0\n0.6,0.8\n").unwrap();
    std::fs::write(dir.path().join("manifest.json"), r#"{"manifold": {"type": "sphere", "dim": 1}, "signals": ["a.csv"]}"#).unwrap();
    let (set, projected) = SignalSet::<f64>::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(projected, 1);
    assert_eq!(set.signals[0].point(1), &[0.0, 1.0]);
    assert!(set.labels.is_none());

    std::fs::write(dir.path().join("b.csv"), "1.0,0.0\n0.5,0.5,0.1\n").unwrap();
    std::fs::write(dir.path().join("m2.json"), r#"{"manifold": {"type": "sphere", "dim": 1}, "signals": ["b.csv"]}"#).unwrap();
    assert!(matches!(SignalSet::<f64>::load(&dir.path().join("m2.json")), Err(RtwError::ManifestMismatch(_))));

    std::fs::write(dir.path().join("c.csv"), "# x\n1.0,0.0\n0.5,abc\n").unwrap();
    std::fs::write(dir.path().join("m3.json"), r#"{"manifold": {"type": "sphere", "dim": 1}, "signals": ["c.csv"]}"#).unwrap();
    assert!(matches!(SignalSet::<f64>::load(&dir.path().join("m3.json")), Err(RtwError::Parse { line: 3, .. })));
}

#[test]
fn ucr_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.tsv");
    std::fs::write(&path, "2\t0.1\t0.2\t0.3\n1\t1.0\t2.0\tNaN\t\n-1\t5\n").unwrap();
    let set = load_ucr_tsv::<f64>(&path).unwrap();
    assert_eq!(set.labels.as_deref(), Some(&[2, 1, -1][..]));
    assert_eq!(set.signals[0].data(), &[0.1, 0.2, 0.3]);
    assert_eq!(set.signals[1].data(), &[1.0, 2.0]);
    assert_eq!(set.signals[2].data(), &[5.0]);
    std::fs::write(&path, "1\t0.5\nx\t1.0\n").unwrap();
    assert!(matches!(load_ucr_tsv::<f64>(&path), Err(RtwError::Parse { line: 2, .. })));
}

#[test]
fn warp_generation_errors() {
    assert!(generate_random_warp::<f64>(50, 100, 0, WarpFamily::Spline).unwrap_err().is_config_error());
    assert!("bogus".parse::<WarpFamily>().is_err());
    assert_eq!("spline".parse::<WarpFamily>().unwrap(), WarpFamily::Spline);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_warps_are_feasible(seed in any::<u64>(), t in 5usize..120, factor in 2usize..6, fam in 0usize..3) {
        let z = factor * t;
        let family = WarpFamily::ALL[fam];
        let w: Vec<f64> = generate_random_warp(z, t, seed, family).unwrap();
        prop_assert_eq!(w.len(), z);
        prop_assert_eq!(w[0], 0.0);
        prop_assert_eq!(w[z - 1], 1.0);
        for p in w.windows(2) {
            prop_assert!(p[1] >= p[0]);
            prop_assert!(p[1] - p[0] <= 1.0 / t as f64);
        }
        let again: Vec<f64> = generate_random_warp(z, t, seed, family).unwrap();
        prop_assert_eq!(w, again);
    }
}
