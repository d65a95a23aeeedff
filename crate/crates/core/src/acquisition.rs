//! Value computations: predicted performance `G`, the recommended solution,
//! and the value of information of a simulation run and of a source query.
//!
//! Everything here works on a [`DiscretizationSet`]: a Latin hypercube grid
//! over the solution space and a frozen set of parameter draws from the
//! current posterior. `G(x)` is the average of the GP mean over the draws.
//!
//! [`VoiContext`] precomputes, once per model state, the quantities shared
//! by every candidate. Because the squared-exponential kernel factorises
//! into a solution part and a parameter part, the averages over parameter
//! draws collapse into one per-training-point factor
//! `ā_j = (1/N_A) Σ_i k_a(a_i, a_j)`. A candidate's value then costs one
//! triangular solve plus a `grid × n` product, independent of `N_A`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BicoError, Result};
use crate::gp::{sq_exp, GpPosterior, JointPoint};
use crate::kg::kg_discrete;
use crate::optim::{argmax_discrete, lhs_sample, multistart_max, nelder_mead_max, BoxBounds};
use crate::posterior::{sample_posterior, ParameterPosterior, SourceSpec};
use crate::stats::{mean, sample_sd};

/// Grid over the solution space plus parameter draws from the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSet {
    pub x_grid: Vec<Vec<f64>>,
    pub a_samples: Vec<Vec<f64>>,
}

impl DiscretizationSet {
    pub fn new(x_grid: Vec<Vec<f64>>, a_samples: Vec<Vec<f64>>) -> Result<Self> {
        if x_grid.is_empty() || a_samples.is_empty() {
            return Err(BicoError::invalid("discretisation needs grid points and parameter samples"));
        }
        Ok(DiscretizationSet { x_grid, a_samples })
    }

    /// LHS grid of `n_grid` points over `x_bounds` and `n_a` posterior draws.
    pub fn sample<R: Rng + ?Sized>(
        x_bounds: &BoxBounds,
        post: &ParameterPosterior,
        n_grid: usize,
        n_a: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let grid = lhs_sample(n_grid, x_bounds, rng);
        let a = sample_posterior(post, n_a, rng);
        DiscretizationSet::new(grid, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VoiPayload {
    Point(JointPoint),
    Source(usize),
}

/// A value of information per unit cost with its Monte Carlo standard
/// error (0 when computed analytically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiEstimate {
    pub value: f64,
    pub std_err: f64,
    pub payload: VoiPayload,
}

/// `G(x) = (1/N_A) Σ_i μⁿ(x, a_i)`, evaluated point by point.
pub fn predicted_performance(x: &[f64], g: &GpPosterior, disc: &DiscretizationSet) -> f64 {
    let mut coords = x.to_vec();
    let mut total = 0.0;
    for a in &disc.a_samples {
        coords.truncate(x.len());
        coords.extend_from_slice(a);
        total += g.mean_raw(&coords);
    }
    total / disc.a_samples.len() as f64
}

/// Knobs for the continuous searches over `X` and `X × A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSearch {
    pub restarts: usize,
    /// simplex evaluations per restart
    pub max_evals: usize,
}

impl Default for InnerSearch {
    fn default() -> Self {
        InnerSearch {
            restarts: 10,
            max_evals: 100,
        }
    }
}

/// Per-state cache for value-of-information queries.
pub struct VoiContext<'a> {
    gp: &'a GpPosterior,
    disc: &'a DiscretizationSet,
    x_dim: usize,
    /// `ā_j`, one per training point
    a_factor: Vec<f64>,
    /// row-major `grid × n`: `σ₀² k_x(x_g, x_j) ā_j`
    grid_rows: Vec<f64>,
    grid_g: Vec<f64>,
    /// row-major `grid × N_A`: `μⁿ(x_g, a_i)`, built on first source query
    mu_table: std::sync::OnceLock<Vec<f64>>,
}

impl<'a> VoiContext<'a> {
    pub fn new(gp: &'a GpPosterior, disc: &'a DiscretizationSet) -> Result<Self> {
        let x_dim = gp.x_dim();
        let a_dim = gp.dim() - x_dim;
        if disc.x_grid.iter().any(|x| x.len() != x_dim) || disc.a_samples.iter().any(|a| a.len() != a_dim) {
            return Err(BicoError::invalid("discretisation does not match the model dimensions"));
        }
        let n = gp.n();
        let a_factor: Vec<f64> = (0..n)
            .map(|j| {
                let aj = &gp.input(j)[x_dim..];
                mean_over(&disc.a_samples, |a| a_kernel(gp, a, aj))
            })
            .collect();
        let mut ctx = VoiContext {
            gp,
            disc,
            x_dim,
            a_factor,
            grid_rows: Vec::with_capacity(disc.x_grid.len() * n),
            grid_g: Vec::with_capacity(disc.x_grid.len()),
            mu_table: std::sync::OnceLock::new(),
        };
        for x in &disc.x_grid {
            let row = ctx.averaged_row(x);
            ctx.grid_g.push(ctx.g_from_row(&row));
            ctx.grid_rows.extend(row);
        }
        Ok(ctx)
    }

    pub fn gp(&self) -> &GpPosterior {
        self.gp
    }

    pub fn disc(&self) -> &DiscretizationSet {
        self.disc
    }

    /// `(1/N_A) Σ_i k⁰((x, a_i), x̃_j)` for every training point `j`.
    fn averaged_row(&self, x: &[f64]) -> Vec<f64> {
        let h = self.gp.hyper();
        (0..self.gp.n())
            .map(|j| {
                let xj = &self.gp.input(j)[..self.x_dim];
                h.sigma0_sq * x_kernel(self.gp, x, xj) * self.a_factor[j]
            })
            .collect()
    }

    fn g_from_row(&self, row: &[f64]) -> f64 {
        self.gp.offset() + dot(row, self.gp.weights())
    }

    /// Predicted performance `G(x)`.
    pub fn predicted_performance(&self, x: &[f64]) -> f64 {
        self.g_from_row(&self.averaged_row(x))
    }

    /// `G` on the grid points, in grid order.
    pub fn grid_performance(&self) -> &[f64] {
        &self.grid_g
    }

    /// Intercepts `G(x)` and slopes `Σ̃ⁿ(x; next)` for every grid point,
    /// followed by the fantasised solution `next.x`.
    pub fn lines(&self, next: &JointPoint) -> (Vec<f64>, Vec<f64>) {
        let gp = self.gp;
        let h = gp.hyper();
        let n = gp.n();
        let grid = self.disc.x_grid.len();
        let next_row = self.averaged_row(&next.x);
        let mut means = self.grid_g.clone();
        means.push(self.g_from_row(&next_row));

        let nv = next.to_vec();
        let k_next = DVector::from_iterator(n, (0..n).map(|j| gp.prior_k(gp.input(j), &nv)));
        let alpha = if n > 0 { gp.solve(&k_next) } else { DVector::zeros(0) };
        let var_next = (h.sigma0_sq - k_next.dot(&alpha)).max(0.0) + h.noise_sq;
        if var_next <= gp.degenerate_variance() {
            return (means, vec![0.0; grid + 1]);
        }
        let inv_sd = 1.0 / var_next.sqrt();
        let a_next = mean_over(&self.disc.a_samples, |a| a_kernel(gp, a, &next.a));
        let alpha = alpha.as_slice();

        let slope = |x: &[f64], row: &[f64]| -> f64 {
            let prior = h.sigma0_sq * x_kernel(gp, x, &next.x) * a_next;
            (prior - dot(row, alpha)) * inv_sd
        };
        let mut slopes = Vec::with_capacity(grid + 1);
        for (g, x) in self.disc.x_grid.iter().enumerate() {
            slopes.push(slope(x, &self.grid_rows[g * n..(g + 1) * n]));
        }
        slopes.push(slope(&next.x, &next_row));
        (means, slopes)
    }

    /// One-step value of simulating at `next`, per unit cost `c_f`.
    pub fn voi_simulation(&self, next: &JointPoint, c_f: f64) -> Result<VoiEstimate> {
        if !(c_f > 0.0) {
            return Err(BicoError::invalid("simulation cost must be positive"));
        }
        let (means, slopes) = self.lines(next);
        let kg = kg_discrete(&means, &slopes)?;
        Ok(VoiEstimate {
            value: kg / c_f,
            std_err: 0.0,
            payload: VoiPayload::Point(next.clone()),
        })
    }

    /// Maximises [`VoiContext::voi_simulation`] over `joint_bounds`.
    ///
    /// A Latin hypercube screen of `max(20, 4·restarts)` candidates picks the
    /// `restarts` best starts for the simplex searches.
    pub fn max_voi_simulation<R: Rng + ?Sized>(
        &self,
        joint_bounds: &BoxBounds,
        c_f: f64,
        search: InnerSearch,
        rng: &mut R,
    ) -> Result<VoiEstimate> {
        if !(c_f > 0.0) {
            return Err(BicoError::invalid("simulation cost must be positive"));
        }
        if joint_bounds.dim() != self.gp.dim() {
            return Err(BicoError::invalid("joint bounds do not match the model dimension"));
        }
        let x_dim = self.x_dim;
        let mut objective = |v: &[f64]| -> f64 {
            let p = JointPoint::from_concat(v, x_dim);
            let (means, slopes) = self.lines(&p);
            kg_discrete(&means, &slopes).unwrap_or(f64::NEG_INFINITY)
        };

        let screen_n = (4 * search.restarts).max(20);
        let mut screen: Vec<(Vec<f64>, f64)> = lhs_sample(screen_n, joint_bounds, rng)
            .into_iter()
            .map(|v| {
                let f = objective(&v);
                (v, f)
            })
            .collect();
        screen.sort_by(|a, b| b.1.total_cmp(&a.1));

        let mut best = screen[0].clone();
        for (start, _) in screen.iter().take(search.restarts.max(1)) {
            let cand = nelder_mead_max(&mut objective, joint_bounds, start, search.max_evals);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        let point = JointPoint::from_concat(&best.0, x_dim);
        Ok(VoiEstimate {
            value: best.1.max(0.0) / c_f,
            std_err: 0.0,
            payload: VoiPayload::Point(point),
        })
    }

    /// Recommended solution `argmax_x G(x)` and its predicted performance:
    /// the best grid point, polished by simplex searches over `x_bounds`.
    pub fn recommend<R: Rng + ?Sized>(
        &self,
        x_bounds: &BoxBounds,
        search: InnerSearch,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let (g_idx, g_best) = self
            .grid_g
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let seed = self.disc.x_grid[g_idx].clone();
        let mut objective = |x: &[f64]| self.predicted_performance(x);
        let (x, v) = multistart_max(
            &mut objective,
            x_bounds,
            search.restarts.saturating_sub(1),
            search.max_evals,
            rng,
            std::slice::from_ref(&seed),
        );
        if v >= g_best { (x, v) } else { (seed, g_best) }
    }

    fn mu_table(&self) -> &[f64] {
        self.mu_table.get_or_init(|| {
            let gp = self.gp;
            let n = gp.n();
            let h = gp.hyper();
            let w = gp.weights();
            // k_a(a_i, a_j) w_j, one row per draw
            let a_rows: Vec<f64> = self
                .disc
                .a_samples
                .iter()
                .flat_map(|a| (0..n).map(move |j| a_kernel(gp, a, &gp.input(j)[self.x_dim..]) * w[j]))
                .collect();
            let mut table = Vec::with_capacity(self.disc.x_grid.len() * self.disc.a_samples.len());
            for x in &self.disc.x_grid {
                let kx: Vec<f64> = (0..n)
                    .map(|j| h.sigma0_sq * x_kernel(gp, x, &gp.input(j)[..self.x_dim]))
                    .collect();
                for i in 0..self.disc.a_samples.len() {
                    table.push(gp.offset() + dot(&kx, &a_rows[i * n..(i + 1) * n]));
                }
            }
            table
        })
    }

    /// `Σ_i w_i μⁿ(x_g, a_i)` for every grid point `g`.
    fn weighted_g(&self, weights: &[f64]) -> Vec<f64> {
        self.mu_table().chunks_exact(weights.len()).map(|row| dot(row, weights)).collect()
    }

    /// One-step value of querying source `spec`, per unit cost.
    ///
    /// The frozen parameter draws stand in for the posterior. Each of `n_r`
    /// fantasies picks a draw `a_j` uniformly, samples `r ~ N(a_j[d], σ_s²)`
    /// and reweights the draws by the likelihood of `r`, which is their
    /// exact posterior given `r`. The GP is not refitted. Because the
    /// reweighted predicted performance `G'` averages to `G` at every grid
    /// point, each fantasy contributes `max_x G'(x) − G'(x̂)` with `x̂` the
    /// current grid maximiser: nonnegative, and zero when `G` does not
    /// depend on the parameter.
    pub fn voi_source<R: Rng + ?Sized>(
        &self,
        spec: &SourceSpec,
        post: &ParameterPosterior,
        n_r: usize,
        rng: &mut R,
    ) -> Result<VoiEstimate> {
        if n_r == 0 {
            return Err(BicoError::invalid("need at least one predictive draw"));
        }
        spec.validate(post.dim())?;
        let d = spec.target_dim;
        let draws = &self.disc.a_samples;
        let na = draws.len();
        let sd = spec.obs_noise_sq.sqrt();
        let uniform = vec![1.0 / na as f64; na];
        let (best, _) = argmax_discrete(&self.weighted_g(&uniform), |&g| g)
            .ok_or_else(|| BicoError::invalid("empty solution grid"))?;

        let mut gains = Vec::with_capacity(n_r);
        let mut weights = vec![0.0; na];
        for _ in 0..n_r {
            let r = draws[rng.random_range(0..na)][d] + sd * rng.sample::<f64, _>(StandardNormal);
            let mut top = f64::NEG_INFINITY;
            for (w, a) in weights.iter_mut().zip(draws) {
                *w = -0.5 * ((r - a[d]) / sd).powi(2);
                top = top.max(*w);
            }
            weights.iter_mut().for_each(|w| *w = (*w - top).exp());
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let g_new = self.weighted_g(&weights);
            let max_new = g_new.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            gains.push((max_new - g_new[best]).max(0.0));
        }
        let se = sample_sd(&gains).map_or(0.0, |s| s / (gains.len() as f64).sqrt());
        Ok(VoiEstimate {
            value: mean(&gains) / spec.cost,
            std_err: se / spec.cost,
            payload: VoiPayload::Source(spec.id),
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mean_over(samples: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> f64 {
    samples.iter().map(|s| f(s)).sum::<f64>() / samples.len() as f64
}

/// Unit-variance kernel factor over the solution coordinates.
#[inline]
fn x_kernel(gp: &GpPosterior, x: &[f64], xj: &[f64]) -> f64 {
    sq_exp(x, xj, &gp.hyper().lengthscales[..gp.x_dim()], 1.0)
}

/// Unit-variance kernel factor over the parameter coordinates.
#[inline]
fn a_kernel(gp: &GpPosterior, a: &[f64], aj: &[f64]) -> f64 {
    sq_exp(a, aj, &gp.hyper().lengthscales[gp.x_dim()..], 1.0)
}

/// Value of simulating at `next` per unit cost `c_f`.
pub fn voi_simulation(next: &JointPoint, g: &GpPosterior, disc: &DiscretizationSet, c_f: f64) -> Result<VoiEstimate> {
    VoiContext::new(g, disc)?.voi_simulation(next, c_f)
}

/// Value of one more observation from `spec` per unit cost.
pub fn voi_source<R: Rng + ?Sized>(
    spec: &SourceSpec,
    g: &GpPosterior,
    post: &ParameterPosterior,
    disc: &DiscretizationSet,
    n_r: usize,
    rng: &mut R,
) -> Result<VoiEstimate> {
    VoiContext::new(g, disc)?.voi_source(spec, post, n_r, rng)
}
