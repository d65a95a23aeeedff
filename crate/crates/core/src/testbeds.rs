//! Test problems with known truth: the newsvendor, functions drawn from a
//! GP prior, Gaussian data sources, and the opportunity cost.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bico::{Simulator, SourceOracle, Truth};
use crate::error::{BicoError, Result};
use crate::gp::{factor, gram, GpHyperparams, GpPosterior, JointPoint, SimulationDataset};
use crate::optim::{lhs_sample, multistart_max, BoxBounds};
use crate::posterior::SourceSpec;
use crate::stats::{norm_cdf, norm_pdf, norm_quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewsvendorConfig {
    pub price: f64,
    pub cost: f64,
    /// variance of the demand
    pub demand_var: f64,
    /// true mean demand
    pub true_mean: f64,
    pub x_bounds: (f64, f64),
    pub a_bounds: (f64, f64),
}

impl Default for NewsvendorConfig {
    fn default() -> Self {
        NewsvendorConfig {
            price: 5.0,
            cost: 3.0,
            demand_var: 10.0,
            true_mean: 40.0,
            x_bounds: (0.0, 100.0),
            a_bounds: (0.0, 100.0),
        }
    }
}

impl NewsvendorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(BicoError::config(f, m));
        if !(self.cost > 0.0 && self.price > self.cost && self.price.is_finite()) {
            return bad("price", "need price > cost > 0");
        }
        if !(self.demand_var > 0.0 && self.demand_var.is_finite()) {
            return bad("demand_var", "must be positive");
        }
        if !self.true_mean.is_finite() {
            return bad("true_mean", "must be finite");
        }
        if BoxBounds::new(vec![self.x_bounds]).is_err() {
            return bad("x_bounds", "need finite lo < hi");
        }
        if BoxBounds::new(vec![self.a_bounds]).is_err() {
            return bad("a_bounds", "need finite lo < hi");
        }
        Ok(())
    }

    pub fn x_box(&self) -> BoxBounds {
        BoxBounds::new(vec![self.x_bounds]).expect("validated bounds")
    }

    pub fn a_box(&self) -> BoxBounds {
        BoxBounds::new(vec![self.a_bounds]).expect("validated bounds")
    }

    /// Profit `p·min(x, C) − l·x` with demand `C ~ N(a, σ²)`.
    pub fn simulate<R: Rng + ?Sized>(&self, x: f64, a: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let demand = a + self.demand_var.sqrt() * z;
        self.price * x.min(demand) - self.cost * x
    }

    /// Expected profit, using `E[min(x, C)] = a − σφ(d) − (a − x)Φ(d)` with
    /// `d = (a − x)/σ`.
    pub fn theta(&self, x: f64, a: f64) -> f64 {
        let sd = self.demand_var.sqrt();
        let d = (a - x) / sd;
        let e_min = a - sd * norm_pdf(d) - (a - x) * norm_cdf(d);
        self.price * e_min - self.cost * x
    }

    /// Critical-ratio optimum `μ* + σ Φ⁻¹((p − l)/p)` and its profit.
    pub fn xstar(&self) -> (f64, f64) {
        let x = self.true_mean + self.demand_var.sqrt() * norm_quantile((self.price - self.cost) / self.price);
        (x, self.theta(x, self.true_mean))
    }

    pub fn truth(&self) -> TruthOracle {
        let cfg = self.clone();
        let (x, v) = self.xstar();
        TruthOracle::with_optimum(vec![self.true_mean], vec![x], v, move |x, a| cfg.theta(x[0], a[0]))
    }
}

impl Simulator for NewsvendorConfig {
    fn simulate(&self, x: &[f64], a: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        Ok(NewsvendorConfig::simulate(self, x[0], a[0], rng))
    }
}

type ThetaFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// True parameter, true performance and its maximiser.
#[derive(Clone)]
pub struct TruthOracle {
    pub a_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub theta_star: f64,
    theta: Arc<ThetaFn>,
}

impl std::fmt::Debug for TruthOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TruthOracle")
            .field("a_star", &self.a_star)
            .field("x_star", &self.x_star)
            .field("theta_star", &self.theta_star)
            .finish_non_exhaustive()
    }
}

impl TruthOracle {
    /// Oracle with a known optimum.
    pub fn with_optimum(
        a_star: Vec<f64>,
        x_star: Vec<f64>,
        theta_star: f64,
        theta: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TruthOracle {
            a_star,
            x_star,
            theta_star,
            theta: Arc::new(theta),
        }
    }

    /// Finds `x*` on a grid of about 10⁴ points over `x_bounds`, polished by
    /// a simplex search from the best grid point.
    pub fn search(
        a_star: Vec<f64>,
        x_bounds: &BoxBounds,
        theta: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let dim = x_bounds.dim();
        let per_dim = (1e4f64.powf(1.0 / dim as f64).ceil() as usize).max(2);
        let mut best = (x_bounds.midpoint(), f64::NEG_INFINITY);
        let mut idx = vec![0usize; dim];
        loop {
            let x: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(d, &i)| x_bounds.lo(d) + x_bounds.width(d) * i as f64 / (per_dim - 1) as f64)
                .collect();
            let v = theta(&x, &a_star);
            if v > best.1 {
                best = (x, v);
            }
            let mut d = 0;
            while d < dim {
                idx[d] += 1;
                if idx[d] < per_dim {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        let mut f = |x: &[f64]| theta(x, &a_star);
        // a single polish from the grid optimum; no random starts
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, v) = multistart_max(&mut f, x_bounds, 0, 400, &mut rng, std::slice::from_ref(&best.0));
        let (x_star, theta_star) = if v >= best.1 { (x, v) } else { best };
        TruthOracle::with_optimum(a_star, x_star, theta_star, theta)
    }

    pub fn theta(&self, x: &[f64], a: &[f64]) -> f64 {
        (self.theta)(x, a)
    }

    /// `θ(x*, a*) − θ(x_r, a*)`.
    pub fn opportunity_cost(&self, x_r: &[f64]) -> f64 {
        self.theta_star - self.theta(x_r, &self.a_star)
    }
}

impl Truth for TruthOracle {
    fn opportunity_cost(&self, x: &[f64]) -> f64 {
        TruthOracle::opportunity_cost(self, x)
    }
}

/// `θ(x*, a*) − θ(x_r, a*)`.
pub fn opportunity_cost(x_r: &[f64], oracle: &TruthOracle) -> f64 {
    oracle.opportunity_cost(x_r)
}

/// A function drawn from a GP prior: anchor values are a joint draw, and the
/// function is the noiseless interpolant through them. Simulations add
/// Gaussian noise of variance `noise_sq`.
#[derive(Debug, Clone)]
pub struct GpTestFunction {
    pub seed: u64,
    pub hyper: GpHyperparams,
    pub noise_sq: f64,
    pub x_bounds: BoxBounds,
    pub a_bounds: BoxBounds,
    interpolant: GpPosterior,
}

impl GpTestFunction {
    /// Default anchor count: `⌈1.5·width/l⌉` per joint dimension.
    pub fn default_anchors(joint: &BoxBounds, lengthscales: &[f64]) -> usize {
        (0..joint.dim())
            .map(|d| (1.5 * joint.width(d) / lengthscales[d]).ceil().max(2.0) as usize)
            .product()
    }

    /// Draws the function and the true parameter from `seed`. `hyper`
    /// holds the prior signal variance and lengthscales; its `noise_sq` is
    /// the simulation noise.
    pub fn build(
        seed: u64,
        x_bounds: &BoxBounds,
        a_bounds: &BoxBounds,
        hyper: &GpHyperparams,
        n_anchor: Option<usize>,
    ) -> Result<(GpTestFunction, TruthOracle)> {
        let joint = x_bounds.concat(a_bounds);
        hyper.validate(joint.dim())?;
        let n = n_anchor.unwrap_or_else(|| Self::default_anchors(&joint, &hyper.lengthscales));
        if n == 0 {
            return Err(BicoError::invalid("need at least one anchor"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchors = lhs_sample(n, &joint, &mut rng);
        let noiseless = GpHyperparams {
            noise_sq: 0.0,
            ..hyper.clone()
        };
        let flat: Vec<f64> = anchors.iter().flatten().copied().collect();
        let (chol, _) = factor(gram(&flat, n, joint.dim(), &noiseless), noiseless.sigma0_sq)?;
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let values = chol.l() * z;

        let mut data = SimulationDataset::new(x_bounds.dim(), a_bounds.dim())?;
        for (p, &y) in anchors.iter().zip(values.iter()) {
            data.push(JointPoint::from_concat(p, x_bounds.dim()), y)?;
        }
        let interpolant = GpPosterior::fit(&data, &noiseless)?;
        let a_star = a_bounds.sample_uniform(&mut rng);

        let f = GpTestFunction {
            seed,
            hyper: noiseless,
            noise_sq: hyper.noise_sq,
            x_bounds: x_bounds.clone(),
            a_bounds: a_bounds.clone(),
            interpolant,
        };
        let shared = f.clone();
        let oracle = TruthOracle::search(a_star, x_bounds, move |x, a| shared.theta(x, a));
        Ok((f, oracle))
    }

    pub fn anchors(&self) -> &SimulationDataset {
        self.interpolant.dataset()
    }

    pub fn theta(&self, x: &[f64], a: &[f64]) -> f64 {
        let v: Vec<f64> = x.iter().chain(a).copied().collect();
        self.interpolant.mean_raw(&v)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, x: &[f64], a: &[f64], rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.theta(x, a) + self.noise_sq.sqrt() * z
    }
}

impl Simulator for GpTestFunction {
    fn simulate(&self, x: &[f64], a: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        Ok(GpTestFunction::simulate(self, x, a, rng))
    }
}

/// `r ~ N(a*_d, σ_s²)` for the coordinate `d` the source observes.
pub fn source_simulate<R: Rng + ?Sized>(spec: &SourceSpec, a_star: &[f64], rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    a_star[spec.target_dim] + spec.obs_noise_sq.sqrt() * z
}

/// Sources observing the true parameter with Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSources {
    pub a_star: Vec<f64>,
}

impl SourceOracle for GaussianSources {
    fn query(&self, spec: &SourceSpec, rng: &mut dyn RngCore) -> Result<f64> {
        if spec.target_dim >= self.a_star.len() {
            return Err(BicoError::invalid(format!("source {} targets an unknown dimension", spec.id)));
        }
        Ok(source_simulate(spec, &self.a_star, rng))
    }
}

/// Runs `inner` at a fixed parameter whatever `a` the caller asks for, so
/// the output does not depend on `a`.
#[derive(Debug, Clone)]
pub struct IgnoreParameter<S> {
    pub inner: S,
    pub a_fixed: Vec<f64>,
}

impl<S: Simulator> Simulator for IgnoreParameter<S> {
    fn simulate(&self, x: &[f64], _a: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        self.inner.simulate(x, &self.a_fixed, rng)
    }
}
