use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw::datasets::grid_identity_warp;
use rtw::manifolds::ManifoldDescriptor;
use rtw::resample::*;
use rtw::Signal;
use rtw_autodiff::{Tape, Tensor};

fn oracle_sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

fn random_sphere_signal(rng: &mut ChaCha8Rng, d: usize, len: usize) -> Signal<f64> {
    // Smooth curve: a slowly rotating direction plus a small wobble.
    let desc = ManifoldDescriptor::Sphere(d);
    let a: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pts: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            let s = t as f64 / len as f64;
            let raw: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y + 0.05 * (7.0 * s + x).sin()).collect();
            desc.project(&raw).unwrap()
        })
        .collect();
    Signal::from_points(d + 1, pts).unwrap()
}

#[test]
fn weights_examples() {
    let w = sinc_weights(0.25f64, 20, 10);
    assert_eq!(w.floor, 5);
    for (j, &v) in w.weights.iter().enumerate() {
        assert_eq!(v, if j == 10 { 1.0 } else { v });
        if j != 10 {
            assert!(v.abs() < 1e-15);
        }
    }
    let w = sinc_weights(10.5f64 / 20.0, 20, 10);
    assert_eq!(w.weights.len(), 21);
    assert!((w.weights[10] - w.weights[11]).abs() < 1e-15);
    let direct: f64 = (-10..=10).map(|j| oracle_sinc(j as f64 - 0.5)).sum();
    assert!((w.weights.iter().sum::<f64>() - direct).abs() < 1e-14);
    assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 0.05);
}

#[test]
fn grid_identity_reproduces_samples() {
    let t = 60;
    let x = Signal::from_points(2, (0..t).map(|i| [(i as f64 * 0.3).sin(), i as f64 * 0.01])).unwrap();
    let y = warp_signal_euclidean(&x, &grid_identity_warp::<f64>(t), &SincConfig::default());
    for i in 0..t {
        for k in 0..2 {
            assert!((y.point(i)[k] - x.point(i)[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_signal_deficit() {
    let t = 80;
    let c = 2.5;
    let x = Signal::new(1, vec![c; t]).unwrap();
    let g: Vec<f64> = (15..65).map(|k| (k as f64 + 0.5) / t as f64).collect();
    let y = warp_signal_euclidean(&x, &g, &SincConfig::default());
    let deficit: f64 = (-10..=10).map(|j| oracle_sinc(j as f64 - 0.5)).sum();
    for v in y.data() {
        assert!((v - c).abs() < 0.05 * c);
        assert!((v - c * deficit).abs() < 1e-12);
    }
}

#[test]
fn half_index_sine() {
    // The reconstruction error of a truncated window at half offsets is the tail of the
    // sinc series, which is measured here against an explicit infinite-support oracle.
    let t = 100usize;
    let f = |p: f64| (2.0 * std::f64::consts::PI * (p - 1.0) / t as f64).sin();
    let x = Signal::new(1, (1..=t).map(|m| f(m as f64)).collect()).unwrap();
    let g: Vec<f64> = (20..80).map(|k| (k as f64 + 0.5) / t as f64).collect();
    let y = warp_signal_euclidean(&x, &g, &SincConfig::default());
    let mut worst: f64 = 0.0;
    for (i, k) in (20..80).enumerate() {
        let pos = k as f64 + 0.5;
        let window: f64 = (k - 10..=k + 10).map(|m| f(m as f64) * oracle_sinc(m as f64 - pos)).sum();
        assert!((y.data()[i] - window).abs() < 1e-12);
        worst = worst.max((y.data()[i] - f(pos)).abs());
    }
    // Truncating to 21 taps at half offsets costs close to two percent, far above 1e-3.
    assert!(worst < 0.02, "max error {worst}");
}

#[test]
fn riemannian_examples() {
    let cfg = SincConfig::default();
    let p = [0.0, 0.6, 0.8];
    let s2 = ManifoldDescriptor::Sphere(2);
    let x = Signal::from_points(3, (0..30).map(|_| p)).unwrap();
    let g: Vec<f64> = (0..45).map(|i| i as f64 / 44.0).collect();
    let y = warp_signal_riemannian(&s2, &x, &g, &cfg).unwrap();
    for q in y.points() {
        assert!(q.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    let s1 = ManifoldDescriptor::Sphere(1);
    let t = 100;
    let x = Signal::from_points(2, (0..t).map(|i| {
        let a = 0.2 + 0.01 * i as f64;
        [a.cos(), a.sin()]
    }))
    .unwrap();
    let y = warp_signal_riemannian(&s1, &x, &grid_identity_warp::<f64>(t), &cfg).unwrap();
    for i in 1..t - 1 {
        assert!(s1.dist(y.point(i), x.point(i)).unwrap() < 1e-8);
    }
}

#[test]
fn euclidean_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SincConfig::default();
    for _ in 0..100 {
        let d = rng.gen_range(1..4);
        let t = rng.gen_range(3..40);
        let x = Signal::new(d, (0..t * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let g: Vec<f64> = (0..rng.gen_range(2..50)).map(|_| rng.gen_range(-0.1..1.1)).collect();
        let a = warp_signal_euclidean(&x, &g, &cfg);
        let b = warp_signal_riemannian(&ManifoldDescriptor::Euclidean(d), &x, &g, &cfg).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn locality() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = SincConfig { window: 3, ..Default::default() };
    let desc = ManifoldDescriptor::Sphere(2);
    let x = random_sphere_signal(&mut rng, 2, 40);
    let g = vec![0.3f64];
    let before = warp_signal_riemannian(&desc, &x, &g, &cfg).unwrap();
    let mut far = x.clone();
    far.point_mut(35).copy_from_slice(&[1.0, 0.0, 0.0]);
    let after = warp_signal_riemannian(&desc, &far, &g, &cfg).unwrap();
    assert_eq!(before, after);
}

#[test]
fn recorded_warp_matches_frozen() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = SincConfig::default();
    for desc in [
        ManifoldDescriptor::Euclidean(2),
        ManifoldDescriptor::Sphere(1),
        ManifoldDescriptor::Sphere(2),
        ManifoldDescriptor::Product(vec![ManifoldDescriptor::Euclidean(1), ManifoldDescriptor::Sphere(2)]),
    ] {
        let a = desc.ambient_dim();
        let x = match &desc {
            ManifoldDescriptor::Sphere(d) => random_sphere_signal(&mut rng, *d, 30),
            ManifoldDescriptor::Euclidean(d) => Signal::new(*d, (0..30 * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
            _ => {
                let s = random_sphere_signal(&mut rng, 2, 30);
                Signal::from_points(4, s.points().enumerate().map(|(i, p)| [i as f64 * 0.1, p[0], p[1], p[2]])).unwrap()
            }
        };
        let z = 45;
        let mut g: Vec<f64> = (0..z).map(|_| rng.gen_range(0.0..1.0)).collect();
        g.sort_by(f64::total_cmp);
        let frozen = warp_frozen(&desc, &x, &g, &cfg).unwrap();
        let tape = Tape::new();
        let gv = tape.var(Tensor::new(vec![1, z], g.clone()).unwrap());
        let rec = record_warp(&desc, &tape, gv, std::slice::from_ref(&frozen)).unwrap();
        assert_eq!(rec.shape(), vec![z, a]);
        for (u, v) in rec.value().data().iter().zip(frozen.warped.data()) {
            assert!((u - v).abs() < 1e-10, "{desc:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn outputs_stay_on_manifold(seed in any::<u64>(), d in 1usize..4, t in 4usize..40, z in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let desc = ManifoldDescriptor::Sphere(d);
        let x = random_sphere_signal(&mut rng, d, t);
        let g: Vec<f64> = (0..z).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y = warp_signal_riemannian(&desc, &x, &g, &SincConfig::default()).unwrap();
        for p in y.points() {
            let n: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn spd_outputs_stay_spd(seed in any::<u64>(), t in 4usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let desc = ManifoldDescriptor::Spd(2);
        let pts: Vec<[f64; 4]> = (0..t).map(|i| {
            let s = i as f64 / t as f64;
            let a = 1.0 + 0.5 * (3.0 * s).sin() + rng.gen_range(0.0..0.05);
            let c = 2.0 + s;
            let b = 0.3 * (2.0 * s).cos();
            [a, b, b, c]
        }).collect();
        let x = Signal::from_points(4, pts).unwrap();
        let g: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y = warp_signal_riemannian(&desc, &x, &g, &SincConfig::default()).unwrap();
        for p in y.points() {
            prop_assert!(desc.check_point(p).is_ok());
            prop_assert!((p[1] - p[2]).abs() < 1e-8);
        }
    }
}
