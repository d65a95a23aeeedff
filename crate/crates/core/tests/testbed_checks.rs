mod common;

use bico::gp::GpHyperparams;
use bico::optim::BoxBounds;
use bico::posterior::SourceSpec;
use bico::testbeds::{opportunity_cost, source_simulate, GpTestFunction, NewsvendorConfig, TruthOracle};
use common::mean_and_se;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> BoxBounds {
    BoxBounds::cube(1, 0.0, 100.0).unwrap()
}

fn gp_hyper() -> GpHyperparams {
    GpHyperparams::shared(1.0, 10.0, 0.01, 2)
}

#[test]
fn newsvendor_expectation_matches_simulation() {
    let nv = NewsvendorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (x, n) in [(35.0, 1_000_000), (40.0, 100_000)] {
        let ys: Vec<f64> = (0..n).map(|_| nv.simulate(x, 40.0, &mut rng)).collect();
        let (m, se) = mean_and_se(&ys);
        assert!((m - nv.theta(x, 40.0)).abs() <= 3.0 * se, "x = {x}: {m} ± {se} vs {}", nv.theta(x, 40.0));
    }
}

#[test]
fn newsvendor_optimum_agrees_with_grid() {
    let nv = NewsvendorConfig::default();
    let (x, v) = nv.xstar();
    let (gx, gv) = (0..=10_000)
        .map(|i| i as f64 * 0.01)
        .map(|x| (x, nv.theta(x, 40.0)))
        .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    assert!((gx - x).abs() <= 0.02);
    assert!(v >= gv - 1e-12);
}

#[test]
fn newsvendor_is_concave() {
    let nv = NewsvendorConfig::default();
    let vals: Vec<f64> = (0..=1000).map(|i| nv.theta(i as f64 * 0.1, 40.0)).collect();
    for w in vals.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-9);
    }
}

#[test]
fn newsvendor_oc_at_zero_order() {
    let nv = NewsvendorConfig::default();
    let t = nv.truth();
    assert!((opportunity_cost(&[0.0], &t) - nv.theta(nv.xstar().0, 40.0)).abs() < 1e-12);
}

#[test]
fn opportunity_cost_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let nv = NewsvendorConfig::default().truth();
    let (_, gp) = GpTestFunction::build(5, &unit(), &unit(), &gp_hyper(), None).unwrap();
    for _ in 0..1000 {
        let x = [rng.random_range(0.0..100.0)];
        assert!(opportunity_cost(&x, &nv) >= -1e-3);
        assert!(opportunity_cost(&x, &gp) >= -1e-3);
    }
}

#[test]
fn opportunity_cost_ignores_offsets() {
    let (f, t) = GpTestFunction::build(6, &unit(), &unit(), &gp_hyper(), None).unwrap();
    let shifted = TruthOracle::search(t.a_star.clone(), &unit(), move |x, a| f.theta(x, a) + 17.5);
    for x in [3.0, 44.0, 97.0] {
        assert!((opportunity_cost(&[x], &t) - opportunity_cost(&[x], &shifted)).abs() < 1e-9);
    }
}

#[test]
fn gp_function_has_prior_variance() {
    let mut vals = Vec::new();
    for seed in 0..50 {
        let (f, _) = GpTestFunction::build(seed, &unit(), &unit(), &gp_hyper(), None).unwrap();
        vals.extend(f.anchors().ys());
    }
    let (m, _) = mean_and_se(&vals);
    let v = vals.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    assert!((v - 1.0).abs() < 0.3, "{v}");
}

#[test]
fn gp_function_noise_and_mean() {
    let (f, _) = GpTestFunction::build(7, &unit(), &unit(), &gp_hyper(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let ys: Vec<f64> = (0..10_000).map(|_| f.simulate(&[42.0], &[17.0], &mut rng)).collect();
    let (m, se) = mean_and_se(&ys);
    let sd = se * 100.0;
    assert!((sd - 0.1).abs() < 0.01);
    assert!((m - f.theta(&[42.0], &[17.0])).abs() <= 3.0 * se);
}

#[test]
fn gp_function_is_continuous() {
    let (f, _) = GpTestFunction::build(8, &unit(), &unit(), &gp_hyper(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..200 {
        let (x, a) = (rng.random_range(0.0..99.0), rng.random_range(0.0..100.0));
        let step = (f.theta(&[x + 1e-4], &[a]) - f.theta(&[x], &[a])).abs();
        assert!(step <= 3.0 * 1.0 / 10.0 * 1e-4, "{step}");
    }
}

#[test]
fn gp_truth_is_the_grid_maximum() {
    let (f, t) = GpTestFunction::build(9, &unit(), &unit(), &gp_hyper(), None).unwrap();
    for i in 0..=10_000 {
        let x = i as f64 * 0.01;
        assert!(t.theta_star >= f.theta(&[x], &t.a_star) - 1e-9);
    }
    assert_eq!(t.theta_star, t.theta(&t.x_star, &t.a_star));
}

#[test]
fn sources_are_unbiased() {
    let s = SourceSpec {
        id: 1,
        target_dim: 0,
        obs_noise_sq: 10.0,
        cost: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let rs: Vec<f64> = (0..10_000).map(|_| source_simulate(&s, &[63.0], &mut rng)).collect();
    assert!(rs.iter().all(|r| r.is_finite()));
    let (m, se) = mean_and_se(&rs);
    assert!((m - 63.0).abs() <= 3.0 * se);
}
