#![allow(dead_code)]

use bico::gp::{GpHyperparams, GpPosterior, JointPoint, SimulationDataset};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn pt(x: f64, a: f64) -> JointPoint {
    JointPoint::new(vec![x], vec![a])
}

/// Random 1×1-D data set on `[0, 100]²` with a smooth response plus noise.
pub fn random_data(n: usize, rng: &mut ChaCha8Rng) -> SimulationDataset {
    let mut d = SimulationDataset::new(1, 1).unwrap();
    for _ in 0..n {
        let x: f64 = rng.random_range(0.0..100.0);
        let a: f64 = rng.random_range(0.0..100.0);
        let y = (x / 15.0).sin() + 0.5 * (a / 20.0).cos() + 0.1 * rng.random::<f64>();
        d.push(pt(x, a), y).unwrap();
    }
    d
}

pub fn random_hyper(rng: &mut ChaCha8Rng) -> GpHyperparams {
    GpHyperparams {
        sigma0_sq: rng.random_range(0.3..3.0),
        lengthscales: vec![rng.random_range(8.0..40.0), rng.random_range(8.0..40.0)],
        noise_sq: rng.random_range(1e-3..0.2),
    }
}

pub fn random_gp(n: usize, rng: &mut ChaCha8Rng) -> GpPosterior {
    let d = random_data(n, rng);
    let h = random_hyper(rng);
    GpPosterior::fit(&d, &h).unwrap()
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

use bico::acquisition::DiscretizationSet;
use bico::posterior::{predictive_sample, ParameterPosterior, SourceSpec};

/// Monte Carlo `E[max_i (a_i + b_i Z)] − max_i a_i`.
pub fn kg_mc(means: &[f64], slopes: &[f64], draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            means.iter().zip(slopes).map(|(a, b)| a + b * z).fold(f64::NEG_INFINITY, f64::max) - top
        })
        .collect();
    mean_and_se(&xs)
}

fn g_on(g: &GpPosterior, xs: &[Vec<f64>], a_samples: &[Vec<f64>]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            a_samples
                .iter()
                .map(|a| g.posterior_mean(&JointPoint::new(x.clone(), a.clone())).unwrap())
                .sum::<f64>()
                / a_samples.len() as f64
        })
        .collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// One-step look-ahead gain of simulating at `next` by drawing the
/// observation, refitting the GP with the same hyperparameters and taking
/// the new maximum over the grid plus `next.x`.
pub fn refit_mc_voi_sim(
    g: &GpPosterior,
    disc: &DiscretizationSet,
    next: &JointPoint,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut xs = disc.x_grid.clone();
    xs.push(next.x.clone());
    let old = max_of(&g_on(g, &xs, &disc.a_samples));
    let (mu, var) = g.predictive_y_params(next).unwrap();
    let gains: Vec<f64> = (0..draws)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let mut d = g.dataset().clone();
            d.push(next.clone(), mu + var.sqrt() * z).unwrap();
            let g1 = GpPosterior::fit(&d, g.hyper()).unwrap();
            max_of(&g_on(&g1, &xs, &disc.a_samples)) - old
        })
        .collect();
    mean_and_se(&gains)
}

/// Value of a source query without importance sampling. Every predictive
/// draw builds the exact updated posterior, and `G` is integrated over a
/// one-dimensional parameter by Simpson's rule on `nodes` points, so the
/// only noise left is the Monte Carlo over `r`.
pub fn non_is_voi_source(
    g: &GpPosterior,
    post: &ParameterPosterior,
    spec: &SourceSpec,
    x_grid: &[Vec<f64>],
    nodes: usize,
    n_r: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    assert_eq!(post.dim(), 1);
    let nodes = nodes | 1;
    let (lo, hi) = (post.bounds().lo(0), post.bounds().hi(0));
    let h = (hi - lo) / (nodes - 1) as f64;
    let a: Vec<f64> = (0..nodes).map(|k| lo + k as f64 * h).collect();
    let simpson: Vec<f64> = (0..nodes)
        .map(|k| if k == 0 || k == nodes - 1 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 })
        .collect();
    let mu: Vec<Vec<f64>> = x_grid
        .iter()
        .map(|x| a.iter().map(|&v| g.posterior_mean(&JointPoint::new(x.clone(), vec![v])).unwrap()).collect())
        .collect();
    let g_max = |p: &ParameterPosterior| {
        let w: Vec<f64> = a.iter().zip(&simpson).map(|(&v, s)| s * p.log_pdf(&[v]).exp()).collect();
        let total: f64 = w.iter().sum();
        max_of(&mu.iter().map(|row| row.iter().zip(&w).map(|(m, w)| m * w).sum::<f64>() / total).collect::<Vec<_>>())
    };
    let old = g_max(post);
    let gains: Vec<f64> = (0..n_r)
        .map(|_| g_max(&post.observe(spec, predictive_sample(spec, post, rng)).unwrap()) - old)
        .collect();
    let (m, se) = mean_and_se(&gains);
    (m / spec.cost, se / spec.cost)
}
