use cryptoflow::stability::{char_poly, jacobian_numeric, reduced_cubic, DEFAULT_FD_STEP};
use cryptoflow::{
    classify, eigenvalues, jacobian_analytic, linear_verdict, Complex64, ModelParams, ModelVariant, SquareMatrix,
    Spectrum, Verdict,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn params_in(lo: f64, hi: f64) -> impl Strategy<Value = ModelParams> {
    proptest::array::uniform8(log_uniform(lo, hi)).prop_map(|[q, q1, q2, tau0, c, c1, c2, c3]| ModelParams {
        q,
        q1,
        q2,
        tau0,
        c,
        c1,
        c2,
        c3,
    })
}

/// `(q, q1, q2, tau0, c3)` free, `c = c1 = c2 = 1`.
fn unit_params(lo: f64, hi: f64) -> impl Strategy<Value = ModelParams> {
    proptest::array::uniform5(log_uniform(lo, hi)).prop_map(|[q, q1, q2, tau0, c3]| ModelParams {
        q,
        q1,
        q2,
        tau0,
        c: 1.0,
        c1: 1.0,
        c2: 1.0,
        c3,
    })
}

fn matrix(n: usize, range: f64) -> impl Strategy<Value = SquareMatrix> {
    proptest::collection::vec(-range..range, n * n).prop_map(move |e| SquareMatrix::new(n, e).unwrap())
}

fn any_matrix(range: f64) -> impl Strategy<Value = SquareMatrix> {
    (1usize..=5).prop_flat_map(move |n| matrix(n, range))
}

fn to_nalgebra(m: &SquareMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.entries())
}

/// Characteristic polynomial by the trace recursion, leading coefficient first.
fn faddeev_leverrier(m: &SquareMatrix) -> Vec<f64> {
    let n = m.dim();
    let a = to_nalgebra(m);
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        mk = &a * &mk + DMatrix::identity(n, n) * coeffs[n - k + 1];
        coeffs[n - k] = -(&a * &mk).trace() / k as f64;
    }
    coeffs.reverse();
    coeffs
}

/// Greedy nearest matching of two multisets; the largest pairing distance.
fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut unused: Vec<Complex64> = b.to_vec();
    let mut worst = 0.0_f64;
    for x in a {
        let (k, d) = unused
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        unused.swap_remove(k);
    }
    worst
}

fn nalgebra_eigenvalues(m: &SquareMatrix) -> Vec<Complex64> {
    to_nalgebra(m).complex_eigenvalues().iter().copied().collect()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn small_spectra() {
    let s = eigenvalues(&SquareMatrix::diagonal(&[-1.0, -2.0])).unwrap();
    assert_eq!(s.eigenvalues, vec![c(-1.0, 0.0), c(-2.0, 0.0)]);

    let rotation = SquareMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
    let s = eigenvalues(&rotation).unwrap();
    assert!(multiset_distance(&s.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]) < 1e-14);
}

#[test]
fn sentiment_point_with_negative_q() {
    let p = ModelParams {
        q: 2.0,
        q1: 1.0,
        tau0: 1.0,
        c: 1.0,
        c1: 1.0,
        ..Default::default()
    };
    let s = eigenvalues(&jacobian_analytic(ModelVariant::sentiment(), &p).unwrap()).unwrap();
    assert!(s.eigenvalues.iter().any(|z| (z - c(-1.0, 0.0)).norm() < 1e-10));
    assert!(s.max_real > 0.0);
}

#[test]
fn classification_examples() {
    let v = classify(&Spectrum::new(vec![c(-1.0, 0.0), c(-2.0, 0.0)]), 1e-8);
    assert_eq!((v.tag, v.oscillatory), (Verdict::Stable, false));

    let v = classify(&Spectrum::new(vec![c(0.1, 2.0), c(0.1, -2.0), c(-1.0, 0.0)]), 1e-8);
    assert_eq!((v.tag, v.oscillatory), (Verdict::Unstable, true));

    let v = classify(&Spectrum::new(vec![c(-1e-12, 0.0), c(-1.0, 0.0)]), 1e-8);
    assert_eq!(v.tag, Verdict::Marginal);
}

#[test]
fn cubic_at_the_origin() {
    let p = ModelParams {
        q: 0.0,
        q1: 0.0,
        q2: 0.0,
        tau0: 1.0,
        c: 1.0,
        c1: 1.0,
        c2: 1.0,
        c3: 1.0,
    };
    let cubic = reduced_cubic(&p).unwrap();
    let expected = [1.0, 3.0, 3.0, 1.0];
    for (a, b) in cubic.coeffs().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{cubic:?}");
    }
}

#[test]
fn full_system_rejects_unequal_time_scales() {
    let p = ModelParams { c1: 2.0, ..Default::default() };
    assert!(jacobian_analytic(ModelVariant::full(), &p).is_err());
    assert!(reduced_cubic(&ModelParams { c: 2.0, c1: 2.0, c2: 2.0, ..Default::default() }).is_err());
}

proptest! {
    #[test]
    fn analytic_jacobian_matches_central_differences(params in params_in(0.01, 10.0)) {
        let full = ModelParams { c1: params.c, c2: params.c, ..params };
        for (v, p) in [
            (ModelVariant::full(), full),
            (ModelVariant::sentiment(), params),
            (ModelVariant::liquidity(), params),
        ] {
            let a = jacobian_analytic(v, &p).unwrap();
            let n = jacobian_numeric(v, &p, DEFAULT_FD_STEP).unwrap();
            prop_assert!(a.max_abs_diff(&n) <= 1e-6, "{v:?} {p:?}: {}", a.max_abs_diff(&n));
        }
    }

    #[test]
    fn char_poly_matches_trace_recursion(m in any_matrix(3.0)) {
        let ours = char_poly(&m);
        let oracle = faddeev_leverrier(&m);
        prop_assert_eq!(ours.degree(), m.dim());
        for (a, b) in ours.coeffs().iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{:?} vs {:?}", ours.coeffs(), oracle);
        }
    }

    #[test]
    fn eigenvalues_pass_the_determinant_residual(m in any_matrix(1e3)) {
        let n = m.dim();
        let s = eigenvalues(&m).unwrap();
        prop_assert_eq!(s.len(), n);
        let norm = m.norm_inf();
        let a = to_nalgebra(&m).map(|x| Complex64::new(x, 0.0));
        for &lambda in &s.eigenvalues {
            let shifted = &a - DMatrix::<Complex64>::identity(n, n) * lambda;
            let residual = shifted.determinant().norm() / (1.0 + norm.powi(n as i32));
            prop_assert!(residual <= 1e-8, "lambda {lambda}: residual {residual}");
        }
        for z in s.eigenvalues.iter().filter(|z| z.im != 0.0) {
            let partner = s.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(partner <= 1e-10);
        }
        let max = s.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s.max_real, max);
    }

    #[test]
    fn eigenvalues_match_nalgebra(m in any_matrix(10.0)) {
        let ours = eigenvalues(&m).unwrap().eigenvalues;
        let oracle = nalgebra_eigenvalues(&m);
        // Loose enough for a defective pair, where either solver can drift by
        // about the square root of round-off.
        prop_assert!(multiset_distance(&ours, &oracle) <= 1e-6 * (1.0 + m.norm_inf()));
    }

    #[test]
    fn triangular_spectra_are_the_diagonal(m in any_matrix(50.0), lower in any::<bool>()) {
        let n = m.dim();
        let mut t = m.clone();
        for i in 0..n {
            for j in 0..n {
                if (lower && j > i) || (!lower && j < i) {
                    t[(i, j)] = 0.0;
                }
            }
        }
        let s = eigenvalues(&t).unwrap();
        let diagonal: Vec<Complex64> = (0..n).map(|i| c(t[(i, i)], 0.0)).collect();
        prop_assert!(multiset_distance(&s.eigenvalues, &diagonal) <= 1e-12, "{:?}", s.eigenvalues);
    }

    #[test]
    fn similarity_leaves_the_spectrum_alone(m in matrix(5, 5.0), r in matrix(5, 1.0)) {
        let s = SquareMatrix::identity(5);
        let s = SquareMatrix::new(5, s.entries().iter().zip(r.entries()).map(|(a, b)| a + 0.3 * b).collect()).unwrap();
        let sv = to_nalgebra(&s).singular_values();
        let cond = sv.max() / sv.min();
        prop_assume!(cond <= 10.0);
        let inverse = to_nalgebra(&s).try_inverse().unwrap();
        let conjugated = &inverse * to_nalgebra(&m) * to_nalgebra(&s);
        let conjugated = SquareMatrix::new(5, conjugated.transpose().iter().copied().collect()).unwrap();
        let a = eigenvalues(&m).unwrap().eigenvalues;
        let b = eigenvalues(&conjugated).unwrap().eigenvalues;
        prop_assert!(multiset_distance(&a, &b) <= 1e-7, "{a:?} vs {b:?}");
    }

    #[test]
    fn classification_ignores_order(
        values in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..6),
        seed in any::<u64>(),
        eps in log_uniform(1e-10, 1e-2),
    ) {
        let zs: Vec<Complex64> = values.iter().map(|&(re, im)| c(re, im)).collect();
        let mut shuffled = zs.clone();
        let k = shuffled.len();
        shuffled.rotate_left((seed % k as u64) as usize);
        shuffled.reverse();
        let a = classify(&Spectrum::new(zs), eps);
        let b = classify(&Spectrum { eigenvalues: shuffled.clone(), max_real: a.max_real }, eps);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, classify(&Spectrum::new(shuffled), eps));
    }

    #[test]
    fn double_root_at_minus_one(params in unit_params(1e-2, 1e2)) {
        let full = char_poly(&jacobian_analytic(ModelVariant::full(), &params).unwrap());
        let cubic = reduced_cubic(&params).unwrap();
        prop_assert_eq!(cubic.degree(), 3);
        let rebuilt = cubic.mul(&cryptoflow::Polynomial::linear_power(-1.0, 2));
        for (a, b) in rebuilt.coeffs().iter().zip(full.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", rebuilt.coeffs(), full.coeffs());
        }
    }

    #[test]
    fn cubic_roots_complete_the_spectrum(params in unit_params(0.1, 10.0)) {
        let mut roots = reduced_cubic(&params).unwrap().roots();
        roots.extend([c(-1.0, 0.0), c(-1.0, 0.0)]);
        let spectrum = eigenvalues(&jacobian_analytic(ModelVariant::full(), &params).unwrap()).unwrap();
        prop_assert!(multiset_distance(&roots, &spectrum.eigenvalues) <= 1e-7,
            "{roots:?} vs {:?}", spectrum.eigenvalues);
    }

    #[test]
    fn verdict_follows_max_real(params in params_in(0.01, 10.0), eps in log_uniform(1e-10, 1e-3)) {
        let v = linear_verdict(ModelVariant::sentiment(), &params, eps).unwrap();
        let expected = if v.max_real < -eps {
            Verdict::Stable
        } else if v.max_real > eps {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        };
        prop_assert_eq!(v.tag, expected);
    }
}
