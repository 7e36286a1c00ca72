use cryptoflow::simulate::{deviation, integrate_partial, EmpiricalVerdict};
use cryptoflow::{
    equilibrium, integrate, linear_verdict, perturb_and_classify, Error, ModelParams, ModelVariant, SimConfig,
    StateVector, Verdict,
};
use proptest::prelude::*;

fn cfg(step: f64, horizon: f64) -> SimConfig {
    SimConfig {
        step,
        horizon,
        perturbation: 1e-4,
        record_every: 1,
    }
}

fn sentiment(q: f64, q1: f64, tau0: f64, c: f64) -> ModelParams {
    ModelParams {
        q,
        q1,
        tau0,
        c,
        c1: c,
        ..Default::default()
    }
}

/// Dominant pair `0.25 +- 2.22i`.
fn spiral() -> ModelParams {
    sentiment(0.3, 0.5, 1.0, 0.2)
}

#[test]
fn liquidity_decay_is_exact() {
    let p = ModelParams {
        q: 0.0,
        tau0: 1.0,
        c: 1.0,
        ..Default::default()
    };
    let start = StateVector { p: 2.0, ..StateVector::EQUILIBRIUM };
    let t = integrate(ModelVariant::liquidity(), &p, &start, &cfg(0.01, 1.0)).unwrap();
    assert!((t.last().p - (1.0 + (-1.0f64).exp())).abs() < 1e-6);
    assert_eq!(t.last().l, 1.0);
}

#[test]
fn equilibrium_stays_put() {
    for v in [ModelVariant::full(), ModelVariant::sentiment(), ModelVariant::liquidity()] {
        let t = integrate(v, &ModelParams::default(), &equilibrium(v), &cfg(0.005, 100.0)).unwrap();
        for s in &t.states {
            assert!(deviation(v, s) <= 1e-12);
        }
    }
}

#[test]
fn fourth_order_convergence() {
    let v = ModelVariant::sentiment();
    let p = sentiment(0.5, 0.5, 1.0, 1.0);
    let start = StateVector { p: 1.1, ..StateVector::EQUILIBRIUM };
    let end = |h| *integrate(v, &p, &start, &cfg(h, 10.0)).unwrap().last();
    let reference = end(1e-4);
    let error = |h| deviation(v, &StateVector {
        p: end(h).p - reference.p + 1.0,
        l: end(h).l - reference.l + 1.0,
        zeta1: end(h).zeta1 - reference.zeta1,
        ..StateVector::EQUILIBRIUM
    });
    let ratio = error(0.02) / error(0.01);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn recording_layout() {
    let v = ModelVariant::full();
    let p = ModelParams::default();
    let start = StateVector { p: 1.01, ..StateVector::EQUILIBRIUM };
    let c = SimConfig { record_every: 4, ..cfg(0.01, 1.0) };
    let t = integrate(v, &p, &start, &c).unwrap();
    assert_eq!(t.times[0], 0.0);
    assert_eq!(t.times.len(), 26);
    for w in t.times.windows(2) {
        assert!((w[1] - w[0] - 0.04).abs() < 1e-12);
    }
    let csv = t.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,P,Pa,L,zeta1,zeta2"));
    assert_eq!(lines.next(), Some(
        "0.0000000000000000e0,1.0100000000000000e0,1.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"
    ));
    // 17 significant digits round-trip exactly.
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[1], t.last().p);

    let reduced = integrate(ModelVariant::liquidity(), &p, &start, &c).unwrap().to_csv();
    assert!(reduced.starts_with("t,P,L\n"));
}

#[test]
fn uneven_horizon_shrinks_the_step() {
    let (n, h) = cfg(0.3, 1.0).discretization();
    assert_eq!(n, 4);
    assert_eq!(h, 0.25);
    let d = SimConfig::for_params(ModelVariant::liquidity(), &ModelParams { c3: 1e-3, ..Default::default() });
    assert_eq!(d.step, 0.1 / 20.0);
}

#[test]
fn blow_up_keeps_the_prefix() {
    let v = ModelVariant::liquidity();
    let p = ModelParams { q: 30.0, tau0: 1.0, c: 1.0, ..Default::default() };
    let start = StateVector { p: 1.0 + 1e-3, ..StateVector::EQUILIBRIUM };
    let c = cfg(0.01, 200.0);
    let err = integrate(v, &p, &start, &c).unwrap_err();
    assert!(matches!(err, Error::BlowUp { .. } | Error::StateOutOfDomain { .. }), "{err:?}");
    let (t, failure) = integrate_partial(v, &p, &start, &c).unwrap();
    assert!(failure.is_some());
    assert!(t.times.len() > 1 && *t.times.last().unwrap() < 200.0);

    let outcome = perturb_and_classify(v, &p, &c).unwrap();
    assert_eq!(outcome.verdict, EmpiricalVerdict::Unstable);
    assert!(outcome.blow_up_time.is_some());
}

#[test]
fn bad_configs() {
    let v = ModelVariant::sentiment();
    let p = ModelParams::default();
    assert!(perturb_and_classify(v, &p, &SimConfig { perturbation: 0.0, ..cfg(0.01, 1.0) }).is_err());
    assert!(perturb_and_classify(v, &p, &SimConfig { perturbation: 0.1, ..cfg(0.01, 1.0) }).is_err());
    assert!(integrate(v, &p, &equilibrium(v), &cfg(0.0, 1.0)).is_err());
    assert!(integrate(v, &p, &equilibrium(v), &cfg(2.0, 1.0)).is_err());
    let outside = StateVector { p: 0.0, ..StateVector::EQUILIBRIUM };
    assert!(matches!(integrate(v, &p, &outside, &cfg(0.01, 1.0)), Err(Error::StateOutOfDomain { .. })));
}

#[test]
fn empirical_verdict_examples() {
    let v = ModelVariant::sentiment();
    let stable = sentiment(0.2, 0.2, 1.0, 1.0);
    let outcome = perturb_and_classify(v, &stable, &SimConfig::for_params(v, &stable)).unwrap();
    assert_eq!(outcome.verdict, EmpiricalVerdict::Stable);

    let unstable = sentiment(2.0, 1.0, 1.0, 1.0);
    let outcome = perturb_and_classify(v, &unstable, &SimConfig::for_params(v, &unstable)).unwrap();
    assert_eq!(outcome.verdict, EmpiricalVerdict::Unstable);
}

#[test]
fn unstable_spiral_grows_while_oscillating() {
    let v = ModelVariant::sentiment();
    let p = spiral();
    let linear = linear_verdict(v, &p, 1e-8).unwrap();
    assert!(linear.oscillatory && linear.tag == Verdict::Unstable);

    let c = SimConfig { horizon: 20.0, ..SimConfig::for_params(v, &p) };
    let start = StateVector { p: 1.0 + c.perturbation, ..StateVector::EQUILIBRIUM };
    let t = integrate(v, &p, &start, &c).unwrap();
    let d: Vec<f64> = t.states.iter().map(|s| deviation(v, s)).collect();
    assert!(d.windows(2).any(|w| w[1] < w[0]), "d is monotone");

    let outcome = perturb_and_classify(v, &p, &c).unwrap();
    assert!(outcome.log_slope.unwrap() > 0.0);
    let rate = outcome.growth_rate.unwrap();
    assert!((rate - linear.max_real).abs() <= 0.25 * linear.max_real.abs(), "{rate} vs {}", linear.max_real);
}

#[test]
fn only_excited_modes_show() {
    // Liquidity system with q = 0, tau0 = 1, c = 2: eigenvalues -1 and -1/2,
    // but a price kick never reaches L, so the run decays at rate 1.
    let v = ModelVariant::liquidity();
    let p = ModelParams { q: 0.0, tau0: 1.0, c: 2.0, ..Default::default() };
    let outcome = perturb_and_classify(v, &p, &SimConfig::for_params(v, &p)).unwrap();
    assert_eq!(outcome.verdict, EmpiricalVerdict::Stable);
    let rate = outcome.growth_rate.unwrap();
    assert!((rate + 1.0).abs() < 1e-3, "{rate}");
    assert_eq!(linear_verdict(v, &p, 1e-8).unwrap().max_real, -0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn time_translation(q in 0.0..1.0f64, q1 in 0.0..0.5f64, tau0 in 0.2..2.0f64, c in 0.2..2.0f64, kick in -0.05..0.05f64) {
        let v = ModelVariant::sentiment();
        let p = sentiment(q, q1, tau0, c);
        let start = StateVector { p: 1.0 + kick, ..StateVector::EQUILIBRIUM };
        let h = 0.01;
        let once = integrate(v, &p, &start, &cfg(h, 5.0)).unwrap();
        let twice = integrate(v, &p, once.last(), &cfg(h, 5.0)).unwrap();
        let whole = integrate(v, &p, &start, &cfg(h, 10.0)).unwrap();
        for (a, b) in twice.last().components(v).iter().zip(whole.last().components(v)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn runs_are_repeatable(q in 0.0..3.0f64, q1 in 0.0..1.0f64) {
        let v = ModelVariant::full();
        let p = ModelParams { q, q1, ..Default::default() };
        let c = SimConfig::for_params(v, &p);
        prop_assert_eq!(perturb_and_classify(v, &p, &c).unwrap(), perturb_and_classify(v, &p, &c).unwrap());
    }
}
