//! Belief over the true simulator parameters.
//!
//! Each coordinate of `a*` has a uniform prior on its box interval and is
//! informed by Gaussian observations with known noise from one or more data
//! sources. The posterior of a coordinate is therefore either the uniform
//! prior (no data yet) or a Gaussian truncated to the box, whose parameters
//! are the precision-weighted mean and inverse total precision of the
//! observations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BicoError, Result};
use crate::optim::BoxBounds;
use crate::stats::{log_norm_cdf, log_norm_interval, norm_cdf, norm_quantile, LN_SQRT_2PI};

/// An external data source observing one parameter coordinate with
/// Gaussian noise of known variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub id: usize,
    pub target_dim: usize,
    pub obs_noise_sq: f64,
    pub cost: f64,
}

impl SourceSpec {
    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.target_dim >= n_params {
            return Err(BicoError::invalid(format!(
                "source {} targets dimension {} of a {n_params}-dimensional parameter",
                self.id, self.target_dim
            )));
        }
        if !(self.obs_noise_sq.is_finite() && self.obs_noise_sq > 0.0) {
            return Err(BicoError::invalid(format!("source {}: noise variance must be > 0", self.id)));
        }
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(BicoError::invalid(format!("source {}: cost must be > 0", self.id)));
        }
        Ok(())
    }
}

pub(crate) fn find_spec(specs: &[SourceSpec], id: usize) -> Result<&SourceSpec> {
    specs
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| BicoError::invalid(format!("undeclared source {id}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSample {
    pub source: usize,
    pub r: f64,
}

/// Source observations `(s, r)` in collection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDataset {
    samples: Vec<SourceSample>,
}

impl SourceDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, source: usize, r: f64) {
        self.samples.push(SourceSample { source, r });
    }

    /// Copy of `self` with one more sample.
    pub fn with_sample(&self, source: usize, r: f64) -> Self {
        let mut d = self.clone();
        d.push(source, r);
        d
    }

    pub fn samples(&self) -> &[SourceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count_for(&self, source: usize) -> usize {
        self.samples.iter().filter(|s| s.source == source).count()
    }
}

/// Posterior of one parameter coordinate on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DimBelief {
    Uniform,
    /// `N(mean, var)` restricted to the box interval; `mean`/`var` are the
    /// parameters before truncation.
    TruncatedGaussian { mean: f64, var: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl DimBelief {
    fn observe(self, r: f64, noise_sq: f64) -> DimBelief {
        match self {
            DimBelief::Uniform => DimBelief::TruncatedGaussian { mean: r, var: noise_sq },
            DimBelief::TruncatedGaussian { mean, var } => {
                let precision = 1.0 / var + 1.0 / noise_sq;
                DimBelief::TruncatedGaussian {
                    mean: (mean / var + r / noise_sq) / precision,
                    var: 1.0 / precision,
                }
            }
        }
    }

    /// `ln(σ (Φ(β) − Φ(α)))`, the log normaliser of the truncated density.
    fn log_norm(mean: f64, var: f64, iv: Interval) -> f64 {
        let sd = var.sqrt();
        0.5 * var.ln() + log_norm_interval((iv.lo - mean) / sd, (iv.hi - mean) / sd)
    }

    fn log_pdf(&self, v: f64, iv: Interval) -> f64 {
        if !(v >= iv.lo && v <= iv.hi) {
            return f64::NEG_INFINITY;
        }
        match *self {
            DimBelief::Uniform => -(iv.hi - iv.lo).ln(),
            DimBelief::TruncatedGaussian { mean, var } => {
                let z2 = (v - mean) * (v - mean) / var;
                -0.5 * z2 - LN_SQRT_2PI - Self::log_norm(mean, var, iv)
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, iv: Interval, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            DimBelief::Uniform => iv.lo + u * (iv.hi - iv.lo),
            DimBelief::TruncatedGaussian { mean, var } => {
                let sd = var.sqrt();
                let (alpha, beta) = ((iv.lo - mean) / sd, (iv.hi - mean) / sd);
                let z = truncated_std_normal_quantile(alpha, beta, u);
                (mean + sd * z).clamp(iv.lo, iv.hi)
            }
        }
    }

    fn mean(&self, iv: Interval) -> f64 {
        match *self {
            DimBelief::Uniform => 0.5 * (iv.lo + iv.hi),
            DimBelief::TruncatedGaussian { mean, var } => {
                let sd = var.sqrt();
                let (alpha, beta) = ((iv.lo - mean) / sd, (iv.hi - mean) / sd);
                let log_z = log_norm_interval(alpha, beta);
                let shift = (log_norm_pdf(alpha) - log_z).exp() - (log_norm_pdf(beta) - log_z).exp();
                (mean + sd * shift).clamp(iv.lo, iv.hi)
            }
        }
    }

    fn mass(&self, iv: Interval, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(iv.lo), hi.min(iv.hi));
        if lo >= hi {
            return 0.0;
        }
        match *self {
            DimBelief::Uniform => (hi - lo) / (iv.hi - iv.lo),
            DimBelief::TruncatedGaussian { mean, var } => {
                let sd = var.sqrt();
                let num = log_norm_interval((lo - mean) / sd, (hi - mean) / sd);
                let den = log_norm_interval((iv.lo - mean) / sd, (iv.hi - mean) / sd);
                (num - den).exp().min(1.0)
            }
        }
    }
}

fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Quantile `u ∈ [0, 1)` of a standard normal truncated to `[alpha, beta]`.
fn truncated_std_normal_quantile(alpha: f64, beta: f64, u: f64) -> f64 {
    if alpha > 0.0 {
        // mirror into the lower tail where Φ keeps its precision
        return -truncated_std_normal_quantile(-beta, -alpha, 1.0 - u);
    }
    let (pa, pb) = (norm_cdf(alpha), norm_cdf(beta));
    if pb - pa > 1e-280 {
        return norm_quantile(pa + u * (pb - pa)).clamp(alpha, beta);
    }
    // Both ends deep in the lower tail: the density is ∝ exp(−z²/2) ≈
    // exp(β (z − β)) near β, so invert in log space.
    let (la, lb) = (log_norm_cdf(alpha), log_norm_cdf(beta));
    let target = lb + (u + (1.0 - u) * (la - lb).exp()).ln();
    // Newton on ln Φ(z) = target, starting at beta
    let mut z = beta;
    for _ in 0..50 {
        let lz = log_norm_cdf(z);
        // d/dz ln Φ(z) = φ(z)/Φ(z) ≈ −z for very negative z
        let slope = (log_norm_pdf(z) - lz).exp();
        let step = (lz - target) / slope;
        z -= step;
        if step.abs() < 1e-12 * z.abs().max(1.0) {
            break;
        }
    }
    z.clamp(alpha, beta)
}

/// Product of independent per-coordinate beliefs over the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPosterior {
    bounds: BoxBounds,
    dims: Vec<DimBelief>,
}

impl ParameterPosterior {
    /// The uniform prior over `bounds`.
    pub fn prior(bounds: &BoxBounds) -> Self {
        ParameterPosterior {
            bounds: bounds.clone(),
            dims: vec![DimBelief::Uniform; bounds.dim()],
        }
    }

    /// Builds a posterior directly from per-coordinate beliefs.
    pub fn from_beliefs(bounds: &BoxBounds, dims: Vec<DimBelief>) -> Result<Self> {
        if dims.len() != bounds.dim() {
            return Err(BicoError::invalid("one belief per parameter coordinate required"));
        }
        for d in &dims {
            if let DimBelief::TruncatedGaussian { mean, var } = *d {
                if !(mean.is_finite() && var.is_finite() && var > 0.0) {
                    return Err(BicoError::invalid("truncated Gaussian needs finite mean and var > 0"));
                }
            }
        }
        Ok(ParameterPosterior {
            bounds: bounds.clone(),
            dims,
        })
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn belief(&self, d: usize) -> DimBelief {
        self.dims[d]
    }

    fn interval(&self, d: usize) -> Interval {
        Interval {
            lo: self.bounds.lo(d),
            hi: self.bounds.hi(d),
        }
    }

    /// Posterior after one more observation `r` from `spec`.
    pub fn observe(&self, spec: &SourceSpec, r: f64) -> Result<Self> {
        spec.validate(self.dim())?;
        if !r.is_finite() {
            return Err(BicoError::invalid("non-finite source observation"));
        }
        let mut next = self.clone();
        next.dims[spec.target_dim] = self.dims[spec.target_dim].observe(r, spec.obs_noise_sq);
        Ok(next)
    }

    /// `Σ_d ln p_d(a_d)`; `−∞` outside the box.
    pub fn log_pdf(&self, a: &[f64]) -> f64 {
        if a.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        a.iter()
            .enumerate()
            .map(|(d, &v)| self.dims[d].log_pdf(v, self.interval(d)))
            .sum()
    }

    /// Log density of coordinate `d` alone.
    pub fn log_pdf_dim(&self, d: usize, v: f64) -> f64 {
        self.dims[d].log_pdf(v, self.interval(d))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| self.dims[d].sample(self.interval(d), rng))
            .collect()
    }

    pub fn sample_dim<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> f64 {
        self.dims[d].sample(self.interval(d), rng)
    }

    /// Mean of the (truncated) posterior, per coordinate.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.dims[d].mean(self.interval(d))).collect()
    }

    /// Posterior probability that coordinate `d` lies in `[lo, hi]`.
    pub fn mass(&self, d: usize, lo: f64, hi: f64) -> f64 {
        self.dims[d].mass(self.interval(d), lo, hi)
    }
}

/// Posterior given all source observations in `data`.
pub fn update_posterior(
    specs: &[SourceSpec],
    data: &SourceDataset,
    bounds: &BoxBounds,
) -> Result<ParameterPosterior> {
    for s in specs {
        s.validate(bounds.dim())?;
    }
    // Accumulate precision and precision-weighted sums so the result does
    // not depend on sample order.
    let mut precision = vec![0.0; bounds.dim()];
    let mut weighted = vec![0.0; bounds.dim()];
    for sample in data.samples() {
        let spec = find_spec(specs, sample.source)?;
        if !sample.r.is_finite() {
            return Err(BicoError::invalid("non-finite source observation"));
        }
        precision[spec.target_dim] += 1.0 / spec.obs_noise_sq;
        weighted[spec.target_dim] += sample.r / spec.obs_noise_sq;
    }
    let dims = precision
        .iter()
        .zip(&weighted)
        .map(|(&p, &w)| {
            if p > 0.0 {
                DimBelief::TruncatedGaussian { mean: w / p, var: 1.0 / p }
            } else {
                DimBelief::Uniform
            }
        })
        .collect();
    ParameterPosterior::from_beliefs(bounds, dims)
}

/// `log_pdf` of an explicit parameter vector under the posterior of `data`.
pub fn log_pdf(p: &ParameterPosterior, a: &[f64]) -> f64 {
    p.log_pdf(a)
}

/// `n` i.i.d. draws from the posterior (inverse-CDF on each truncated
/// coordinate).
pub fn sample_posterior<R: Rng + ?Sized>(p: &ParameterPosterior, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| p.sample(rng)).collect()
}

/// One draw from the posterior predictive of the next observation of
/// `spec`: `a_d ~ posterior`, then `r ~ N(a_d, σ_s²)`.
pub fn predictive_sample<R: Rng + ?Sized>(spec: &SourceSpec, p: &ParameterPosterior, rng: &mut R) -> f64 {
    let a = p.sample_dim(spec.target_dim, rng);
    let z: f64 = rng.sample(StandardNormal);
    a + spec.obs_noise_sq.sqrt() * z
}

/// `p(a | d_new) / p(a | d_old)` with exact truncation normalisers.
pub fn importance_weight(
    a: &[f64],
    d_old: &SourceDataset,
    d_new: &SourceDataset,
    specs: &[SourceSpec],
    bounds: &BoxBounds,
) -> Result<f64> {
    let old = update_posterior(specs, d_old, bounds)?;
    let new = update_posterior(specs, d_new, bounds)?;
    let lo = old.log_pdf(a);
    if lo == f64::NEG_INFINITY {
        return Err(BicoError::invalid(
            "importance weight undefined: sample has zero density under the current posterior",
        ));
    }
    Ok((new.log_pdf(a) - lo).exp())
}
