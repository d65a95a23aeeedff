//! Gaussian-process surrogate over the joint solution × parameter space.
//!
//! The model is exact GP regression with a squared-exponential kernel
//! (one lengthscale per joint coordinate, or one shared value). A fitted
//! [`GpPosterior`] holds the Cholesky factor of `K + σ_ε² I` together with
//! the solved weight vector, so the posterior mean is a single dot product
//! and the posterior covariance two triangular solves.
//!
//! Besides the usual mean/covariance queries the posterior exposes
//! [`GpPosterior::sigma_tilde`], the coefficient of the standard-normal
//! innovation in the one-step update of the posterior mean. The acquisition
//! module is built on it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BicoError, Result};
use crate::optim::{lhs_sample, multistart_max, nelder_mead_max, BoxBounds};
use crate::stats::LN_SQRT_2PI;

/// A point `(x, a)` of the joint space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
}

impl JointPoint {
    pub fn new(x: Vec<f64>, a: Vec<f64>) -> Self {
        JointPoint { x, a }
    }

    /// Splits a concatenated coordinate vector after `x_dim` entries.
    pub fn from_concat(coords: &[f64], x_dim: usize) -> Self {
        JointPoint {
            x: coords[..x_dim].to_vec(),
            a: coords[x_dim..].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.a.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().chain(&self.a).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub point: JointPoint,
    pub y: f64,
}

/// Simulation observations `(x, a, y)` in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDataset {
    x_dim: usize,
    a_dim: usize,
    records: Vec<SimRecord>,
}

impl SimulationDataset {
    pub fn new(x_dim: usize, a_dim: usize) -> Result<Self> {
        if x_dim == 0 || a_dim == 0 {
            return Err(BicoError::invalid(
                "solution and parameter spaces need at least one dimension each",
            ));
        }
        Ok(SimulationDataset {
            x_dim,
            a_dim,
            records: Vec::new(),
        })
    }

    pub fn push(&mut self, point: JointPoint, y: f64) -> Result<()> {
        if point.x.len() != self.x_dim || point.a.len() != self.a_dim {
            return Err(BicoError::invalid(format!(
                "record has dimensions ({}, {}), dataset expects ({}, {})",
                point.x.len(),
                point.a.len(),
                self.x_dim,
                self.a_dim
            )));
        }
        if !y.is_finite() {
            return Err(BicoError::invalid("non-finite observation"));
        }
        self.records.push(SimRecord { point, y });
        Ok(())
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn a_dim(&self) -> usize {
        self.a_dim
    }

    pub fn dim(&self) -> usize {
        self.x_dim + self.a_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SimRecord] {
        &self.records
    }

    pub fn ys(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// signal variance σ₀²
    pub sigma0_sq: f64,
    /// one lengthscale per joint coordinate, x coordinates first
    pub lengthscales: Vec<f64>,
    /// observation noise variance σ_ε²
    pub noise_sq: f64,
}

impl GpHyperparams {
    pub fn shared(sigma0_sq: f64, lengthscale: f64, noise_sq: f64, dim: usize) -> Self {
        GpHyperparams {
            sigma0_sq,
            lengthscales: vec![lengthscale; dim],
            noise_sq,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(BicoError::invalid(format!(
                "{} lengthscales for a {dim}-dimensional input",
                self.lengthscales.len()
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.sigma0_sq) || !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(BicoError::invalid(
                "signal variance and lengthscales must be finite and positive",
            ));
        }
        if !(self.noise_sq.is_finite() && self.noise_sq >= 0.0) {
            return Err(BicoError::invalid("noise variance must be finite and >= 0"));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sq_exp(p: &[f64], q: &[f64], lengthscales: &[f64], sigma0_sq: f64) -> f64 {
    let mut s = 0.0;
    for ((pi, qi), l) in p.iter().zip(q).zip(lengthscales) {
        let d = (pi - qi) / l;
        s += d * d;
    }
    sigma0_sq * (-0.5 * s).exp()
}

/// `σ₀² exp(−½ Σ_d (p_d − q_d)² / l_d²)`.
pub fn kernel_eval(p: &JointPoint, q: &JointPoint, h: &GpHyperparams) -> Result<f64> {
    if p.x.len() != q.x.len() || p.a.len() != q.a.len() {
        return Err(BicoError::invalid("kernel arguments differ in dimension"));
    }
    h.validate(p.dim())?;
    Ok(sq_exp(&p.to_vec(), &q.to_vec(), &h.lengthscales, h.sigma0_sq))
}

const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

pub(crate) fn gram(inputs: &[f64], n: usize, dim: usize, h: &GpHyperparams) -> DMatrix<f64> {
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let pi = &inputs[i * dim..(i + 1) * dim];
        k[(i, i)] = h.sigma0_sq + h.noise_sq;
        for j in 0..i {
            let v = sq_exp(pi, &inputs[j * dim..(j + 1) * dim], &h.lengthscales, h.sigma0_sq);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `K + σ_ε² I`, retrying with jitter `{1e-10 … 1e-6}·σ₀²` on
/// the diagonal. Returns the factor and the jitter that was needed.
pub(crate) fn factor(k: DMatrix<f64>, sigma0_sq: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok((c, 0.0));
    }
    for j in JITTER_LADDER {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += j * sigma0_sq;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, j * sigma0_sq));
        }
    }
    Err(BicoError::Numeric(
        "Gram matrix is not positive definite even with maximal jitter".into(),
    ))
}

/// Fitted GP posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    dataset: SimulationDataset,
    hyper: GpHyperparams,
    /// training inputs, row-major `n × dim`
    inputs: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    offset: f64,
    jitter: f64,
}

impl GpPosterior {
    /// Exact posterior under the zero prior mean.
    pub fn fit(dataset: &SimulationDataset, hyper: &GpHyperparams) -> Result<Self> {
        Self::fit_with_offset(dataset, hyper, 0.0)
    }

    /// Posterior with the prior mean set to the sample mean of the outputs,
    /// i.e. a zero-mean GP on centred data with the level added back.
    pub fn fit_centered(dataset: &SimulationDataset, hyper: &GpHyperparams) -> Result<Self> {
        let offset = if dataset.is_empty() {
            0.0
        } else {
            dataset.ys().iter().sum::<f64>() / dataset.len() as f64
        };
        Self::fit_with_offset(dataset, hyper, offset)
    }

    fn fit_with_offset(dataset: &SimulationDataset, hyper: &GpHyperparams, offset: f64) -> Result<Self> {
        let dim = dataset.dim();
        hyper.validate(dim)?;
        let n = dataset.len();
        let inputs: Vec<f64> = dataset.records().iter().flat_map(|r| r.point.to_vec()).collect();
        let (chol, jitter) = factor(gram(&inputs, n, dim, hyper), hyper.sigma0_sq)?;
        let centred = DVector::from_iterator(n, dataset.records().iter().map(|r| r.y - offset));
        let weights = chol.solve(&centred);
        Ok(GpPosterior {
            dataset: dataset.clone(),
            hyper: hyper.clone(),
            inputs,
            chol,
            weights,
            offset,
            jitter,
        })
    }

    pub fn dataset(&self) -> &SimulationDataset {
        &self.dataset
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn n(&self) -> usize {
        self.dataset.len()
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    pub fn x_dim(&self) -> usize {
        self.dataset.x_dim()
    }

    /// Prior mean level (0 for [`GpPosterior::fit`]).
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Diagonal jitter that was added to make the Gram matrix factorable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular `L` with `L Lᵀ = K + σ_ε² I` (+ jitter).
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(K + σ_ε² I)⁻¹ (Y − μ⁰)`.
    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub(crate) fn input(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.inputs[j * d..(j + 1) * d]
    }

    /// Prior covariance on raw concatenated coordinates.
    #[inline]
    pub(crate) fn prior_k(&self, p: &[f64], q: &[f64]) -> f64 {
        sq_exp(p, q, &self.hyper.lengthscales, self.hyper.sigma0_sq)
    }

    /// `k⁰(X̃ⁿ, p)`.
    pub(crate) fn cross_kernel(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), (0..self.n()).map(|j| self.prior_k(self.input(j), p)))
    }

    /// `(K + σ_ε² I)⁻¹ v`.
    pub(crate) fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    fn check_dim(&self, p: &JointPoint) -> Result<()> {
        if p.x.len() != self.dataset.x_dim() || p.a.len() != self.dataset.a_dim() {
            return Err(BicoError::invalid(format!(
                "point has dimensions ({}, {}), model expects ({}, {})",
                p.x.len(),
                p.a.len(),
                self.dataset.x_dim(),
                self.dataset.a_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn mean_raw(&self, p: &[f64]) -> f64 {
        let mut s = self.offset;
        for j in 0..self.n() {
            s += self.prior_k(self.input(j), p) * self.weights[j];
        }
        s
    }

    pub(crate) fn cov_raw(&self, p: &[f64], q: &[f64]) -> f64 {
        let prior = self.prior_k(p, q);
        if self.n() == 0 {
            return prior;
        }
        let kp = self.cross_kernel(p);
        let kq = if p == q { kp.clone() } else { self.cross_kernel(q) };
        prior - kp.dot(&self.chol.solve(&kq))
    }

    /// Posterior mean `μⁿ(p)`.
    pub fn posterior_mean(&self, p: &JointPoint) -> Result<f64> {
        self.check_dim(p)?;
        Ok(self.mean_raw(&p.to_vec()))
    }

    /// Posterior covariance `kⁿ(p, q)`; the variance `kⁿ(p, p)` is clamped
    /// at zero.
    pub fn posterior_cov(&self, p: &JointPoint, q: &JointPoint) -> Result<f64> {
        self.check_dim(p)?;
        self.check_dim(q)?;
        let v = self.cov_raw(&p.to_vec(), &q.to_vec());
        Ok(if p == q { v.max(0.0) } else { v })
    }

    /// Mean and variance of a new noisy observation at `p`:
    /// `(μⁿ(p), kⁿ(p, p) + σ_ε²)`.
    pub fn predictive_y_params(&self, p: &JointPoint) -> Result<(f64, f64)> {
        let mean = self.posterior_mean(p)?;
        let var = self.posterior_cov(p, p)? + self.hyper.noise_sq;
        Ok((mean, var))
    }

    /// `σ̃ⁿ(p; next) = kⁿ(p, next) / √(kⁿ(next, next) + σ_ε²)`.
    ///
    /// After observing `y` at `next`, `μⁿ⁺¹(p) = μⁿ(p) + σ̃ⁿ(p; next)·Z` with
    /// `Z = (y − μⁿ(next)) / √(kⁿ(next, next) + σ_ε²)`. Returns 0 when the
    /// predictive variance at `next` vanishes (noiseless duplicate of a
    /// training input).
    pub fn sigma_tilde(&self, p: &JointPoint, next: &JointPoint) -> Result<f64> {
        self.check_dim(p)?;
        self.check_dim(next)?;
        let (pv, nv) = (p.to_vec(), next.to_vec());
        if self.n() == 0 {
            let denom = (self.hyper.sigma0_sq + self.hyper.noise_sq).sqrt();
            return Ok(self.prior_k(&pv, &nv) / denom);
        }
        let k_next = self.cross_kernel(&nv);
        let alpha = self.chol.solve(&k_next);
        let var_next = (self.prior_k(&nv, &nv) - k_next.dot(&alpha)).max(0.0) + self.hyper.noise_sq;
        if var_next <= self.degenerate_variance() {
            return Ok(0.0);
        }
        let cov = self.prior_k(&pv, &nv) - self.cross_kernel(&pv).dot(&alpha);
        Ok(cov / var_next.sqrt())
    }

    /// Predictive variances at or below this level are treated as zero.
    pub(crate) fn degenerate_variance(&self) -> f64 {
        1e-12 * self.hyper.sigma0_sq
    }
}

/// Log evidence of `ys` under a zero-mean GP:
/// `−½ yᵀK_σ⁻¹y − ½ log det K_σ − (n/2) log 2π`.
fn lml_inputs(inputs: &[f64], ys: &[f64], dim: usize, h: &GpHyperparams) -> Result<f64> {
    let n = ys.len();
    let (chol, _) = factor(gram(inputs, n, dim, h), h.sigma0_sq)?;
    let y = DVector::from_column_slice(ys);
    let alpha = chol.solve(&y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - n as f64 * LN_SQRT_2PI)
}

/// Log marginal likelihood of the raw outputs of `d` under a zero-mean GP
/// with hyperparameters `h`.
pub fn log_marginal_likelihood(d: &SimulationDataset, h: &GpHyperparams) -> Result<f64> {
    h.validate(d.dim())?;
    let inputs: Vec<f64> = d.records().iter().flat_map(|r| r.point.to_vec()).collect();
    lml_inputs(&inputs, &d.ys(), d.dim(), h)
}

/// Same as [`log_marginal_likelihood`] after subtracting the output mean,
/// matching [`GpPosterior::fit_centered`].
pub fn log_marginal_likelihood_centered(d: &SimulationDataset, h: &GpHyperparams) -> Result<f64> {
    h.validate(d.dim())?;
    let inputs: Vec<f64> = d.records().iter().flat_map(|r| r.point.to_vec()).collect();
    let ys = d.ys();
    let m = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    let centred: Vec<f64> = ys.iter().map(|y| y - m).collect();
    lml_inputs(&inputs, &centred, d.dim(), h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LengthscaleMode {
    /// one lengthscale for every joint coordinate
    #[default]
    Shared,
    /// one lengthscale per coordinate (automatic relevance determination)
    PerDimension,
}

/// Search box for hyperparameter fitting (natural scale; searched in logs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub sigma0_sq: (f64, f64),
    pub lengthscale: Vec<(f64, f64)>,
    pub noise_sq: (f64, f64),
}

impl HyperBounds {
    /// Bounds scaled to the data: signal variance in `[1e-3, 1e3]·var(y)`,
    /// lengthscale `d` in `[1e-3, 1e6]·width_d`, noise variance in
    /// `[1e-6, 1]·var(y)`.
    pub fn from_data(d: &SimulationDataset, joint_bounds: &BoxBounds) -> Self {
        let ys = d.ys();
        let var = crate::stats::sample_sd(&ys).map(|s| s * s).unwrap_or(0.0);
        let scale = if var > 0.0 && var.is_finite() { var } else { 1.0 };
        HyperBounds {
            sigma0_sq: (1e-3 * scale, 1e3 * scale),
            lengthscale: (0..joint_bounds.dim())
                .map(|k| (1e-3 * joint_bounds.width(k), 1e6 * joint_bounds.width(k)))
                .collect(),
            noise_sq: (1e-6 * scale, scale),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi;
        if self.lengthscale.len() != dim {
            return Err(BicoError::invalid("lengthscale bounds do not match input dimension"));
        }
        if !ok(self.sigma0_sq) || !ok(self.noise_sq) || !self.lengthscale.iter().all(|&b| ok(b)) {
            return Err(BicoError::invalid("hyperparameter bounds must be finite, positive and ordered"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSearch {
    pub bounds: HyperBounds,
    pub mode: LengthscaleMode,
    pub restarts: usize,
    /// simplex evaluations per restart
    pub max_evals: usize,
    /// maximise the evidence of mean-centred outputs
    pub center: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperFit {
    pub hyper: GpHyperparams,
    pub lml: f64,
    /// every start point of the search, with its log likelihood
    pub starts: Vec<(GpHyperparams, f64)>,
    /// no start produced a factorable Gram matrix; `hyper` is the
    /// log-midpoint of the bounds
    pub fell_back: bool,
}

struct LogSpace<'a> {
    bounds: &'a HyperBounds,
    mode: LengthscaleMode,
}

impl LogSpace<'_> {
    fn n_lengthscales(&self) -> usize {
        match self.mode {
            LengthscaleMode::Shared => 1,
            LengthscaleMode::PerDimension => self.bounds.lengthscale.len(),
        }
    }

    fn box_bounds(&self) -> Result<BoxBounds> {
        let b = self.bounds;
        let mut r = vec![(b.sigma0_sq.0.ln(), b.sigma0_sq.1.ln())];
        match self.mode {
            LengthscaleMode::Shared => {
                // tightest common range
                let lo = b.lengthscale.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
                let hi = b.lengthscale.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
                let (lo, hi) = if lo < hi { (lo, hi) } else { b.lengthscale[0] };
                r.push((lo.ln(), hi.ln()));
            }
            LengthscaleMode::PerDimension => {
                r.extend(b.lengthscale.iter().map(|&(lo, hi)| (lo.ln(), hi.ln())));
            }
        }
        r.push((b.noise_sq.0.ln(), b.noise_sq.1.ln()));
        BoxBounds::new(r)
    }

    fn decode(&self, v: &[f64]) -> GpHyperparams {
        let dim = self.bounds.lengthscale.len();
        let k = self.n_lengthscales();
        let lengthscales = match self.mode {
            LengthscaleMode::Shared => vec![v[1].exp(); dim],
            LengthscaleMode::PerDimension => v[1..1 + k].iter().map(|l| l.exp()).collect(),
        };
        GpHyperparams {
            sigma0_sq: v[0].exp(),
            lengthscales,
            noise_sq: v[1 + k].exp(),
        }
    }

    fn encode(&self, h: &GpHyperparams) -> Vec<f64> {
        let mut v = vec![h.sigma0_sq.ln()];
        match self.mode {
            LengthscaleMode::Shared => {
                let g = h.lengthscales.iter().map(|l| l.ln()).sum::<f64>() / h.lengthscales.len() as f64;
                v.push(g);
            }
            LengthscaleMode::PerDimension => v.extend(h.lengthscales.iter().map(|l| l.ln())),
        }
        v.push(h.noise_sq.max(f64::MIN_POSITIVE).ln());
        v
    }
}

/// Maximum-evidence hyperparameters by multistart Nelder-Mead in log space.
///
/// Starts are `warm` (clipped into the bounds) followed by a Latin
/// hypercube of `search.restarts` points over the log box. The returned
/// value never lies outside the bounds and its evidence is at least that of
/// every start.
pub fn fit_hyperparameters<R: Rng + ?Sized>(
    d: &SimulationDataset,
    search: &HyperSearch,
    warm: &[GpHyperparams],
    rng: &mut R,
) -> Result<HyperFit> {
    if d.is_empty() {
        return Err(BicoError::invalid("cannot fit hyperparameters without data"));
    }
    search.bounds.validate(d.dim())?;
    let space = LogSpace {
        bounds: &search.bounds,
        mode: search.mode,
    };
    let log_box = space.box_bounds()?;

    let dim = d.dim();
    let inputs: Vec<f64> = d.records().iter().flat_map(|r| r.point.to_vec()).collect();
    let mut ys = d.ys();
    if search.center {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter_mut().for_each(|y| *y -= m);
    }
    let mut objective = |v: &[f64]| -> f64 {
        let h = space.decode(v);
        lml_inputs(&inputs, &ys, dim, &h).unwrap_or(f64::NEG_INFINITY)
    };

    let mut starts: Vec<Vec<f64>> = warm
        .iter()
        .filter(|h| h.lengthscales.len() == dim)
        .map(|h| {
            let mut v = space.encode(h);
            log_box.clip(&mut v);
            v
        })
        .collect();
    starts.extend(lhs_sample(search.restarts, &log_box, rng));

    let start_values: Vec<(GpHyperparams, f64)> = starts
        .iter()
        .map(|s| (space.decode(s), objective(s)))
        .collect();

    let (mut best, mut lml) = multistart_max(&mut objective, &log_box, 0, search.max_evals, rng, &starts);
    // The evidence is nearly flat in a lengthscale once that input stops
    // mattering, and the simplex tends to stall on the slope. Try each
    // lengthscale at its upper bound and keep whatever scores higher.
    for k in 1..=space.n_lengthscales() {
        if !lml.is_finite() {
            break;
        }
        let mut snapped = best.clone();
        snapped[k] = log_box.hi(k);
        let at_bound = objective(&snapped);
        let (polished, p_lml) = nelder_mead_max(&mut objective, &log_box, &snapped, search.max_evals);
        for (cand, v) in [(snapped, at_bound), (polished, p_lml)] {
            if v >= lml {
                (best, lml) = (cand, v);
            }
        }
    }
    if !lml.is_finite() {
        return Ok(HyperFit {
            hyper: space.decode(&log_box.midpoint()),
            lml: f64::NEG_INFINITY,
            starts: start_values,
            fell_back: true,
        });
    }
    Ok(HyperFit {
        hyper: space.decode(&best),
        lml,
        starts: start_values,
        fell_back: false,
    })
}
