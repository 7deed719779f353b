use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rtw::manifolds::{exp_map, geodesic_dist, log_map, project_to_manifold};
use rtw::{ManifoldDescriptor, RtwError};
use std::f64::consts::{E, FRAC_PI_2, PI};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn sym_apply(m: &[f64], d: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let e = SymmetricEigen::new(DMatrix::from_row_slice(d, d, m));
    let lam = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    let out = &e.eigenvectors * lam * e.eigenvectors.transpose();
    (0..d * d).map(|k| out[(k / d, k % d)]).collect()
}

/// Affine-invariant distance from an independent eigen solver.
fn spd_dist_oracle(a: &[f64], b: &[f64], d: usize) -> f64 {
    let bi = DMatrix::from_row_slice(d, d, &sym_apply(b, d, |v| 1.0 / v.sqrt()));
    let m = &bi * DMatrix::from_row_slice(d, d, a) * &bi;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().map(|v| v.ln().powi(2)).sum::<f64>().sqrt()
}

/// Cholesky factor built from successive rank-one downdates of the trailing block.
fn cholesky_rank1(a: &[f64], d: usize) -> Vec<f64> {
    let mut work = a.to_vec();
    let mut l = vec![0.0; d * d];
    for k in 0..d {
        let pivot = work[k * d + k].sqrt();
        for i in k..d {
            l[i * d + k] = work[i * d + k] / pivot;
        }
        for i in k..d {
            for j in k..d {
                work[i * d + j] -= l[i * d + k] * l[j * d + k];
            }
        }
    }
    l
}

fn sphere_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d + 1)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.05)
        .prop_map(unit)
}

fn spd_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d).prop_map(move |b| {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum::<f64>() + if i == j { 0.2 } else { 0.0 };
            }
        }
        m
    })
}

fn sym_tangent(d: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, d * d).prop_map(move |v| {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = 0.5 * (v[i * d + j] + v[j * d + i]);
            }
        }
        m
    })
}

#[test]
fn descriptor_dimensions() {
    assert_eq!(ManifoldDescriptor::Sphere(2).ambient_dim(), 3);
    assert_eq!(ManifoldDescriptor::Spd(3).ambient_dim(), 9);
    assert_eq!(ManifoldDescriptor::pose3d().ambient_dim(), 7);
    assert_eq!(ManifoldDescriptor::Spd(3).intrinsic_dim(), 6);
    assert_eq!("sphere:3".parse::<ManifoldDescriptor>().unwrap(), ManifoldDescriptor::Sphere(3));
    assert_eq!("pose3d".parse::<ManifoldDescriptor>().unwrap(), ManifoldDescriptor::Product(vec![ManifoldDescriptor::Euclidean(3), ManifoldDescriptor::Sphere(3)]));
    assert!("torus:2".parse::<ManifoldDescriptor>().is_err());
    let json = serde_json::to_string(&ManifoldDescriptor::pose3d()).unwrap();
    assert_eq!(serde_json::from_str::<ManifoldDescriptor>(&json).unwrap(), ManifoldDescriptor::pose3d());
}

#[test]
fn exp_examples() {
    let s1 = ManifoldDescriptor::Sphere(1);
    assert!(close(&exp_map(&s1, &[1.0, 0.0], &[0.0, FRAC_PI_2]).unwrap(), &[0.0, 1.0], 1e-15));
    for (m, p) in [(ManifoldDescriptor::Sphere(2), vec![0.0, 0.6, 0.8]), (ManifoldDescriptor::Spd(2), vec![2.0, 0.3, 0.3, 1.0]), (ManifoldDescriptor::Euclidean(2), vec![1.0, -2.0])] {
        assert!(close(&exp_map(&m, &p, &vec![0.0; p.len()]).unwrap(), &p, 1e-14));
    }
    let spd = ManifoldDescriptor::Spd(2);
    assert!(close(&exp_map(&spd, &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).unwrap(), &[E, 0.0, 0.0, E], 1e-14));
    let a = [0.3, -0.2, -0.2, 0.1];
    assert!(close(&exp_map(&spd, &[1.0, 0.0, 0.0, 1.0], &a).unwrap(), &sym_apply(&a, 2, f64::exp), 1e-13));
}

#[test]
fn log_examples() {
    let s2 = ManifoldDescriptor::Sphere(2);
    assert!(close(&log_map(&s2, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), &[0.0, FRAC_PI_2, 0.0], 1e-15));
    assert_eq!(log_map(&s2, &[0.0, 0.6, 0.8], &[0.0, 0.6, 0.8]).unwrap(), vec![0.0; 3]);
    let spd = ManifoldDescriptor::Spd(2);
    assert!(close(&log_map(&spd, &[1.0, 0.0, 0.0, 1.0], &[E, 0.0, 0.0, E]).unwrap(), &[1.0, 0.0, 0.0, 1.0], 1e-14));
    assert!(matches!(log_map(&s2, &[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]), Err(RtwError::AntipodalPoint)));
}

#[test]
fn distance_examples() {
    let s2 = ManifoldDescriptor::Sphere(2);
    assert_eq!(geodesic_dist(&s2, &[0.0, 0.6, 0.8], &[0.0, 0.6, 0.8]).unwrap(), 0.0);
    assert!((geodesic_dist(&s2, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
    let spd = ManifoldDescriptor::Spd(2);
    assert!((geodesic_dist(&spd, &[1.0, 0.0, 0.0, 1.0], &[E, 0.0, 0.0, E]).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(spd.cholesky_dist(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).unwrap(), 0.0);
    assert!((spd.cholesky_dist(&[1.0, 0.0, 0.0, 1.0], &[4.0, 0.0, 0.0, 4.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let prod = ManifoldDescriptor::Product(vec![ManifoldDescriptor::Euclidean(1), ManifoldDescriptor::Sphere(1)]);
    let d = geodesic_dist(&prod, &[0.0, 1.0, 0.0], &[3.0, 0.0, 1.0]).unwrap();
    assert!((d - (9.0 + FRAC_PI_2 * FRAC_PI_2).sqrt()).abs() < 1e-14);
}

#[test]
fn projection_examples() {
    assert_eq!(project_to_manifold(&ManifoldDescriptor::Euclidean(2), &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    assert!(close(&project_to_manifold(&ManifoldDescriptor::Sphere(1), &[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-15));
    assert!(close(&project_to_manifold(&ManifoldDescriptor::Spd(2), &[1.0, 0.1, 0.2, 1.0]).unwrap(), &[1.0, 0.15, 0.15, 1.0], 1e-15));
    assert!(matches!(project_to_manifold(&ManifoldDescriptor::Sphere(2), &[0.0, 0.0, 0.0]), Err(RtwError::ZeroVector)));
    let p = project_to_manifold(&ManifoldDescriptor::Spd(2), &[1.0, 2.0, 2.0, 1.0]).unwrap();
    let e = SymmetricEigen::new(DMatrix::from_row_slice(2, 2, &p));
    assert!(e.eigenvalues.min() >= 1e-9 * 0.999);
}

#[test]
fn non_finite_inputs_are_rejected() {
    let s = ManifoldDescriptor::Sphere(1);
    assert!(matches!(exp_map(&s, &[1.0, 0.0], &[0.0, f64::NAN]), Err(RtwError::NonFinite(_))));
    assert!(geodesic_dist(&s, &[f64::INFINITY, 0.0], &[1.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sphere_roundtrip_and_norm((d, p, x) in (1usize..5).prop_flat_map(|d| (Just(d), sphere_point(d), sphere_point(d)))) {
        let dot: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
        let oracle = dot.clamp(-1.0, 1.0).acos();
        prop_assume!(oracle < 0.9 * PI);
        let m = ManifoldDescriptor::Sphere(d);
        let u = log_map(&m, &p, &x).unwrap();
        m.check_tangent(&p, &u).unwrap();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = geodesic_dist(&m, &p, &x).unwrap();
        prop_assert!((norm - dist).abs() < 1e-9);
        prop_assert!((dist - oracle).abs() < 1e-7);
        let back = exp_map(&m, &p, &u).unwrap();
        prop_assert!(geodesic_dist(&m, &back, &x).unwrap() < 1e-8);
        prop_assert!((geodesic_dist(&m, &x, &p).unwrap() - dist).abs() < 1e-12);
    }

    #[test]
    fn spd_roundtrip_and_norm(a in spd_point(3), b in spd_point(3)) {
        let m = ManifoldDescriptor::Spd(3);
        let u = log_map(&m, &a, &b).unwrap();
        m.check_tangent(&a, &u).unwrap();
        let back = exp_map(&m, &a, &u).unwrap();
        prop_assert!(geodesic_dist(&m, &back, &b).unwrap() < 1e-8);
        let dist = geodesic_dist(&m, &a, &b).unwrap();
        let oracle = spd_dist_oracle(&a, &b, 3);
        prop_assert!((dist - oracle).abs() < 1e-8 * oracle.max(1.0));
        prop_assert!((geodesic_dist(&m, &b, &a).unwrap() - dist).abs() < 1e-8 * dist.max(1.0));
        // The canonical-form norm of the logarithm is the distance.
        let ai = sym_apply(&a, 3, |v| 1.0 / v.sqrt());
        let am = DMatrix::from_row_slice(3, 3, &ai);
        let w = &am * DMatrix::from_row_slice(3, 3, &u) * &am;
        prop_assert!((w.norm() - dist).abs() < 1e-8 * dist.max(1.0));
    }

    #[test]
    fn spd_roundtrip_dimension_eight(a in spd_point(8), b in spd_point(8)) {
        let m = ManifoldDescriptor::Spd(8);
        let u = log_map(&m, &a, &b).unwrap();
        let back = exp_map(&m, &a, &u).unwrap();
        prop_assert!(geodesic_dist(&m, &back, &b).unwrap() < 1e-7);
        let dist = geodesic_dist(&m, &a, &b).unwrap();
        prop_assert!((dist - spd_dist_oracle(&a, &b, 8)).abs() < 1e-7 * dist.max(1.0));
    }

    #[test]
    fn spd_affine_invariance(a in spd_point(2), b in spd_point(2), w in prop::collection::vec(-2.0..2.0f64, 4)) {
        let wm = DMatrix::from_row_slice(2, 2, &w);
        prop_assume!(wm.determinant().abs() > 0.1);
        let t = |x: &[f64]| {
            let r = wm.transpose() * DMatrix::from_row_slice(2, 2, x) * &wm;
            let r = (&r + r.transpose()) * 0.5;
            (0..4).map(|k| r[(k / 2, k % 2)]).collect::<Vec<_>>()
        };
        let m = ManifoldDescriptor::Spd(2);
        let d0 = geodesic_dist(&m, &a, &b).unwrap();
        let d1 = geodesic_dist(&m, &t(&a), &t(&b)).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-6);
    }

    #[test]
    fn spd_exp_log_inverse(a in spd_point(4), v in sym_tangent(4, 0.5)) {
        let m = ManifoldDescriptor::Spd(4);
        let x = exp_map(&m, &a, &v).unwrap();
        m.check_point(&x).unwrap();
        let u = log_map(&m, &a, &x).unwrap();
        prop_assert!(close(&u, &v, 1e-8 * (1.0 + v.iter().map(|t| t.abs()).fold(0.0, f64::max))));
    }

    #[test]
    fn cholesky_distance_matches_rank1_oracle(a in spd_point(3), b in spd_point(3)) {
        let la = cholesky_rank1(&a, 3);
        let lb = cholesky_rank1(&b, 3);
        let oracle = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let d = ManifoldDescriptor::Spd(3).cholesky_dist(&a, &b).unwrap();
        prop_assert!((d - oracle).abs() < 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn product_roundtrip(e in prop::collection::vec(-3.0..3.0f64, 3), f in prop::collection::vec(-3.0..3.0f64, 3), p in sphere_point(3), q in sphere_point(3)) {
        let dot: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        prop_assume!(dot.clamp(-1.0, 1.0).acos() < 0.9 * PI);
        let m = ManifoldDescriptor::pose3d();
        let a: Vec<f64> = e.iter().chain(&p).copied().collect();
        let b: Vec<f64> = f.iter().chain(&q).copied().collect();
        let u = log_map(&m, &a, &b).unwrap();
        m.check_tangent(&a, &u).unwrap();
        let back = exp_map(&m, &a, &u).unwrap();
        prop_assert!(geodesic_dist(&m, &back, &b).unwrap() < 1e-8);
        let de = e.iter().zip(&f).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let ds = dot.clamp(-1.0, 1.0).acos();
        prop_assert!((geodesic_dist(&m, &a, &b).unwrap() - (de + ds * ds).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn indiscernibles(p in sphere_point(2), a in spd_point(2)) {
        prop_assert_eq!(geodesic_dist(&ManifoldDescriptor::Sphere(2), &p, &p).unwrap(), 0.0);
        prop_assert_eq!(geodesic_dist(&ManifoldDescriptor::Spd(2), &a, &a).unwrap(), 0.0);
    }
}
