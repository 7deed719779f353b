use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtw_autodiff::gradcheck::{central_difference, max_relative_error, RandomExpr};
use rtw_autodiff::{AutodiffError, SymFn, Tape, Tensor};

type V<'t> = rtw_autodiff::Var<'t, f64>;

fn expr<F>(f: F) -> F
where
    F: for<'t> Fn(&'t Tape<f64>, V<'t>) -> V<'t>,
{
    f
}

fn grad_of(f: &impl for<'t> Fn(&'t Tape<f64>, rtw_autodiff::Var<'t, f64>) -> rtw_autodiff::Var<'t, f64>, x: &[f64], shape: Vec<usize>) -> Vec<f64> {
    let tape = Tape::new();
    let v = tape.var(Tensor::new(shape, x.to_vec()).unwrap());
    let loss = f(&tape, v);
    tape.grad(loss, &[v]).unwrap().remove(0).into_data()
}

fn value_of(f: &impl for<'t> Fn(&'t Tape<f64>, rtw_autodiff::Var<'t, f64>) -> rtw_autodiff::Var<'t, f64>, x: &[f64], shape: Vec<usize>) -> f64 {
    let tape = Tape::new();
    let v = tape.constant(Tensor::new(shape, x.to_vec()).unwrap());
    f(&tape, v).item().unwrap()
}

#[test]
fn sum_backward_is_all_ones() {
    let g = grad_of(&expr(|_, x| x.sum()), &[0.3, -1.0, 2.0, 5.0], vec![4]);
    assert_eq!(g, vec![1.0; 4]);
}

#[test]
fn sinc_derivative_at_zero() {
    let g = grad_of(&expr(|_, x| x.sinc().sum()), &[0.0], vec![1]);
    assert_eq!(g, vec![0.0]);
}

#[test]
fn norm_gradient_is_unit_direction() {
    let g = grad_of(&expr(|_, x| x.norm_last().sum()), &[3.0, 4.0], vec![2]);
    assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    let g0 = grad_of(&expr(|_, x| x.norm_last().sum()), &[0.0, 0.0], vec![2]);
    assert_eq!(g0, vec![0.0, 0.0]);
}

#[test]
fn scalar_examples() {
    let g = grad_of(&expr(|_, x| x.mul(&x).unwrap().sum()), &[3.0], vec![]);
    assert_eq!(g, vec![6.0]);
    let g = grad_of(&expr(|_, x| x.sin().sum()), &[0.0], vec![]);
    assert_eq!(g, vec![1.0]);
}

#[test]
fn relu_subgradient_at_zero_is_zero() {
    let g = grad_of(&expr(|_, x| x.relu().sum()), &[0.0, 1.0, -1.0], vec![3]);
    assert_eq!(g, vec![0.0, 1.0, 0.0]);
}

#[test]
fn acos_clamp_blocks_gradient() {
    let g = grad_of(&expr(|_, x| x.acos().sum()), &[1.0, -1.0, 0.0], vec![3]);
    assert_eq!(g[0], 0.0);
    assert_eq!(g[1], 0.0);
    assert!((g[2] + 1.0).abs() < 1e-15);
}

#[test]
fn errors_surface() {
    let tape = Tape::<f64>::new();
    let a = tape.var(Tensor::from_vec(vec![1.0, 2.0]));
    let b = tape.var(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
    assert!(matches!(a.add(&b), Err(AutodiffError::ShapeMismatch { .. })));
    assert!(matches!(tape.grad(a, &[a]), Err(AutodiffError::NotScalar(_))));
    let bad = a.ln().neg().offset(-f64::INFINITY).sum();
    assert!(matches!(tape.grad(bad, &[a]), Err(AutodiffError::NonFinite(_))));
}

#[test]
fn random_expressions_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 50 {
        let dim = rng.gen_range(1..=8);
        let expr = RandomExpr::generate(&mut rng, 6, dim);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let mut kink = f64::INFINITY;
        expr.eval(&x, &mut kink);
        if kink < 1e-3 {
            continue;
        }
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tape = Tape::new();
        let xv = tape.var(Tensor::from_vec(x.clone()));
        let w = tape.constant(Tensor::from_vec(weights.clone()));
        let loss = expr.record(&tape, xv).unwrap().mul(&w).unwrap().sum();
        let analytic = tape.grad(loss, &[xv]).unwrap().remove(0).into_data();
        let mut f = |p: &[f64]| {
            let mut k = f64::INFINITY;
            expr.eval(p, &mut k).iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let numeric = central_difference(&mut f, &x, 1e-5);
        let err = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err < 1e-3, "expression {expr:?} err {err}");
        checked += 1;
    }
}

#[test]
fn linearity_of_gradients() {
    let x = [0.4, -0.3, 1.1];
    let f = expr(|t, v| {
        let _ = t;
        v.sin().mul(&v).unwrap().sum()
    });
    let g = expr(|_, v| v.exp().sum());
    let (a, b) = (2.5, -0.75);
    let combined = grad_of(&expr(|t, v| f(t, v).scale(a).add(&g(t, v).scale(b)).unwrap()), &x, vec![3]);
    let gf = grad_of(&f, &x, vec![3]);
    let gg = grad_of(&g, &x, vec![3]);
    for i in 0..3 {
        assert!((combined[i] - (a * gf[i] + b * gg[i])).abs() < 1e-12);
    }
}

#[test]
fn identical_tapes_give_identical_gradients() {
    let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
    let run = || grad_of(&expr(|_, v| v.sinc().mul(&v.cos()).unwrap().norm_last().sum()), &x, vec![8]);
    let a = run();
    let b = run();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn broadcasting_and_reductions() {
    // loss = sum_ij w_ij * (a_i * b_j) / c, a: [3,1], b: [4]
    let x: Vec<f64> = vec![0.3, -0.7, 1.2, 0.5, 0.9, -0.1, 2.0];
    let f = expr(|t, v| {
        let a = v.gather(vec![0, 1, 2].into(), vec![3, 1]).unwrap();
        let b = v.gather(vec![3, 4, 5, 6].into(), vec![4]).unwrap();
        let w = t.constant(Tensor::new(vec![3, 4], (0..12).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap());
        let prod = a.mul(&b).unwrap().mul(&w).unwrap();
        let rows = prod.sum_axis(1).unwrap();
        let c = v.gather(vec![6].into(), vec![]).unwrap().powf(2.0).offset(1.0);
        rows.div(&c).unwrap().sum()
    });
    let analytic = grad_of(&f, &x, vec![7]);
    let numeric = central_difference(&mut |p| value_of(&f, p, vec![7]), &x, 1e-6);
    assert!(max_relative_error(&analytic, &numeric, 1e-8) < 1e-6);
}

#[test]
fn matmul_transpose_concat() {
    let x: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
    let f = expr(|t, v| {
        let m = v.reshape(vec![2, 3]).unwrap();
        let k = t.constant(Tensor::new(vec![3, 2], vec![1.0, -2.0, 0.5, 0.3, 0.0, 1.5]).unwrap());
        let p = m.matmul(&k).unwrap().t().unwrap();
        let c = rtw_autodiff::Var::concat_last(&[p, p.sin()]).unwrap();
        c.powf(2.0).sum()
    });
    let analytic = grad_of(&f, &x, vec![6]);
    let numeric = central_difference(&mut |p| value_of(&f, p, vec![6]), &x, 1e-6);
    assert!(max_relative_error(&analytic, &numeric, 1e-8) < 1e-6);
}

/// SPD input built from free parameters: `A = X X^T + I`.
fn spd_from<'t>(t: &'t Tape<f64>, v: rtw_autodiff::Var<'t, f64>, batch: usize, d: usize) -> rtw_autodiff::Var<'t, f64> {
    let x = v.reshape(vec![batch, d, d]).unwrap();
    let idx: Vec<usize> = (0..batch).flat_map(|b| (0..d).flat_map(move |i| (0..d).map(move |j| b * d * d + j * d + i))).collect();
    let xt = x.gather(idx.into(), vec![batch, d, d]).unwrap();
    let mut eye = vec![0.0; batch * d * d];
    for b in 0..batch {
        for i in 0..d {
            eye[b * d * d + i * d + i] = 1.0;
        }
    }
    x.bmm(&xt).unwrap().add(&t.constant(Tensor::new(vec![batch, d, d], eye).unwrap())).unwrap()
}

#[test]
fn spectral_functions_match_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [SymFn::Exp, SymFn::Log, SymFn::Sqrt] {
        for d in [1usize, 2, 3, 4] {
            let batch = 2;
            let x: Vec<f64> = (0..batch * d * d).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let w: Vec<f64> = (0..batch * d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = expr(|t, v| {
                let a = spd_from(t, v, batch, d);
                let wt = t.constant(Tensor::new(vec![batch, d, d], w.clone()).unwrap());
                a.sym_fn(kind).unwrap().mul(&wt).unwrap().sum()
            });
            let analytic = grad_of(&f, &x, vec![batch * d * d]);
            let numeric = central_difference(&mut |p| value_of(&f, p, vec![batch * d * d]), &x, 1e-6);
            let err = max_relative_error(&analytic, &numeric, 1e-8);
            assert!(err < 1e-5, "{kind:?} d={d} err={err}");
        }
    }
}

#[test]
fn cholesky_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [1usize, 2, 3, 5] {
        let x: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let w: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = expr(|t, v| {
            let a = spd_from(t, v, 1, d);
            let wt = t.constant(Tensor::new(vec![1, d, d], w.clone()).unwrap());
            a.cholesky().unwrap().mul(&wt).unwrap().sum()
        });
        let analytic = grad_of(&f, &x, vec![d * d]);
        let numeric = central_difference(&mut |p| value_of(&f, p, vec![d * d]), &x, 1e-6);
        let err = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err < 1e-5, "d={d} err={err}");
    }
}

#[test]
fn works_in_single_precision() {
    let tape = Tape::<f32>::new();
    let x = tape.var(Tensor::from_vec(vec![3.0_f32, 4.0]));
    let loss = x.norm_last().sum();
    let g = tape.grad(loss, &[x]).unwrap().remove(0);
    assert!((g.data()[0] - 0.6).abs() < 1e-6);
}

proptest::proptest! {
    #[test]
    fn gradients_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, x in proptest::collection::vec(-1.5f64..1.5, 1..6)) {
        let n = x.len();
        let f = expr(|_, v| v.sin().mul(&v).unwrap().sum());
        let g = expr(|_, v| v.exp().sum());
        let combined = grad_of(&expr(|t, v| f(t, v).scale(a).add(&g(t, v).scale(b)).unwrap()), &x, vec![n]);
        let gf = grad_of(&f, &x, vec![n]);
        let gg = grad_of(&g, &x, vec![n]);
        for i in 0..n {
            proptest::prop_assert!((combined[i] - (a * gf[i] + b * gg[i])).abs() < 1e-12);
        }
    }
}
