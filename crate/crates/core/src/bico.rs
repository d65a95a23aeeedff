//! The budgeted decision loop and its baselines.
//!
//! Each iteration draws a fresh discretisation, compares the best value of
//! a simulation run against the best value of a source query, and performs
//! the larger. Simulation data refits the GP (hyperparameters included);
//! source data only updates the parameter posterior.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{DiscretizationSet, InnerSearch, VoiContext, VoiPayload};
use crate::error::{BicoError, Result};
use crate::gp::{
    fit_hyperparameters, GpHyperparams, GpPosterior, HyperBounds, HyperSearch, JointPoint, LengthscaleMode,
    SimulationDataset,
};
use crate::optim::{lhs_sample, BoxBounds};
use crate::posterior::{find_spec, update_posterior, ParameterPosterior, SourceDataset, SourceSpec};

/// Stochastic simulator `y = f(x, a, noise)`.
pub trait Simulator {
    fn simulate(&self, x: &[f64], a: &[f64], rng: &mut dyn RngCore) -> Result<f64>;
}

impl<F> Simulator for F
where
    F: Fn(&[f64], &[f64], &mut dyn RngCore) -> Result<f64>,
{
    fn simulate(&self, x: &[f64], a: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        self(x, a, rng)
    }
}

/// External data sources, queried by declared spec.
pub trait SourceOracle {
    fn query(&self, spec: &SourceSpec, rng: &mut dyn RngCore) -> Result<f64>;
}

impl<F> SourceOracle for F
where
    F: Fn(&SourceSpec, &mut dyn RngCore) -> Result<f64>,
{
    fn query(&self, spec: &SourceSpec, rng: &mut dyn RngCore) -> Result<f64> {
        self(spec, rng)
    }
}

/// Ground truth used only for logging the opportunity cost.
pub trait Truth {
    fn opportunity_cost(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Simulate(JointPoint),
    QuerySource(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total: f64,
    pub spent: f64,
    pub sim_cost: f64,
    pub source_costs: Vec<(usize, f64)>,
}

impl BudgetLedger {
    pub fn new(total: f64, sim_cost: f64, sources: &[SourceSpec]) -> Result<Self> {
        if !(total.is_finite() && total > 0.0) {
            return Err(BicoError::config("budget", "must be a positive number"));
        }
        if !(sim_cost.is_finite() && sim_cost > 0.0) {
            return Err(BicoError::config("sim_cost", "must be a positive number"));
        }
        Ok(BudgetLedger {
            total,
            spent: 0.0,
            sim_cost,
            source_costs: sources.iter().map(|s| (s.id, s.cost)).collect(),
        })
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn exhausted(&self) -> bool {
        self.spent >= self.total
    }

    pub fn cost_of(&self, action: &Action) -> f64 {
        match action {
            Action::Simulate(_) => self.sim_cost,
            Action::QuerySource(s) => self
                .source_costs
                .iter()
                .find(|(id, _)| id == s)
                .map_or(f64::NAN, |&(_, c)| c),
        }
    }

    fn charge(&mut self, cost: f64) {
        self.spent += cost;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub t: usize,
    pub action: Action,
    /// `y` for a simulation, `r` for a source query
    pub observed: f64,
    pub cost: f64,
    /// best simulation value per unit cost, when computed
    pub voi_sim: Option<f64>,
    /// best source value per unit cost, when computed
    pub voi_src: Option<f64>,
    /// budget consumed after this action
    pub b: f64,
    /// recommendation after this action
    pub x_r: Vec<f64>,
    pub oc: Option<f64>,
}

/// Settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub x_bounds: BoxBounds,
    pub a_bounds: BoxBounds,
    pub budget: f64,
    pub sim_cost: f64,
    pub sources: Vec<SourceSpec>,
    pub n_init: usize,
    /// parameter draws per discretisation
    pub n_a: usize,
    pub n_grid: usize,
    /// predictive draws per source value estimate
    pub n_r: usize,
    pub inner: InnerSearch,
    pub hyper_restarts: usize,
    pub hyper_max_evals: usize,
    pub lengthscale_mode: LengthscaleMode,
    /// skip hyperparameter fitting and use these
    pub fixed_hyper: Option<GpHyperparams>,
    pub preloaded: SourceDataset,
}

impl LoopConfig {
    /// Defaults for everything except the problem definition.
    pub fn new(x_bounds: BoxBounds, a_bounds: BoxBounds, budget: f64, sources: Vec<SourceSpec>) -> Self {
        let n_grid = 100 * x_bounds.dim();
        LoopConfig {
            x_bounds,
            a_bounds,
            budget,
            sim_cost: 1.0,
            sources,
            n_init: 10,
            n_a: 100,
            n_grid,
            n_r: 30,
            inner: InnerSearch::default(),
            hyper_restarts: 10,
            hyper_max_evals: 100,
            lengthscale_mode: LengthscaleMode::Shared,
            fixed_hyper: None,
            preloaded: SourceDataset::new(),
        }
    }

    pub fn joint_bounds(&self) -> BoxBounds {
        self.x_bounds.concat(&self.a_bounds)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |f: &str, m: &str| Err(BicoError::config(f, m));
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return cfg("budget", "must be a positive number");
        }
        if !(self.sim_cost.is_finite() && self.sim_cost > 0.0) {
            return cfg("sim_cost", "must be a positive number");
        }
        if self.n_init == 0 {
            return cfg("n_init", "need at least one initial simulation");
        }
        if self.n_init as f64 * self.sim_cost > self.budget {
            return cfg("n_init", "initial simulations exceed the budget");
        }
        if self.n_a == 0 || self.n_grid == 0 || self.n_r == 0 {
            return cfg("acquisition", "sample sizes must be positive");
        }
        if self.inner.restarts == 0 || self.inner.max_evals == 0 {
            return cfg("acquisition", "inner search needs restarts and evaluations");
        }
        for (i, s) in self.sources.iter().enumerate() {
            if let Err(e) = s.validate(self.a_bounds.dim()) {
                return cfg(&format!("sources[{i}]"), &e.to_string());
            }
            if self.sources[..i].iter().any(|o| o.id == s.id) {
                return cfg(&format!("sources[{i}]"), "duplicate source id");
            }
        }
        if let Some(h) = &self.fixed_hyper
            && let Err(e) = h.validate(self.x_bounds.dim() + self.a_bounds.dim())
        {
            return cfg("fixed_hyper", &e.to_string());
        }
        Ok(())
    }
}

/// Independent random streams of one run: the algorithm's own choices,
/// simulator noise, and source noise. Keeping them apart gives different
/// algorithms run from the same seed common random numbers.
pub struct RunStreams {
    pub algo: ChaCha8Rng,
    pub sim: ChaCha8Rng,
    pub src: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |k| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        RunStreams {
            algo: stream(0),
            sim: stream(1),
            src: stream(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub x_r: Vec<f64>,
    /// predicted performance of `x_r`
    pub g_r: f64,
    pub oc: Option<f64>,
    /// number of source queries made by the loop (preloaded data excluded)
    pub m_final: usize,
    /// recommendation after initialisation, before any loop action
    pub x_r_init: Vec<f64>,
    pub log: Vec<IterationLog>,
    pub hyper: GpHyperparams,
    pub ledger: BudgetLedger,
    pub sim_data: SimulationDataset,
    pub source_data: SourceDataset,
}

/// Model state shared by the loop variants.
struct State<'a> {
    cfg: &'a LoopConfig,
    joint: BoxBounds,
    sim_data: SimulationDataset,
    source_data: SourceDataset,
    post: ParameterPosterior,
    hyper: GpHyperparams,
    gp: GpPosterior,
    ledger: BudgetLedger,
}

impl<'a> State<'a> {
    fn init(cfg: &'a LoopConfig, sim: &dyn Simulator, streams: &mut RunStreams) -> Result<Self> {
        cfg.validate()?;
        let joint = cfg.joint_bounds();
        let mut ledger = BudgetLedger::new(cfg.budget, cfg.sim_cost, &cfg.sources)?;
        let mut sim_data = SimulationDataset::new(cfg.x_bounds.dim(), cfg.a_bounds.dim())?;
        for v in lhs_sample(cfg.n_init, &joint, &mut streams.algo) {
            let p = JointPoint::from_concat(&v, cfg.x_bounds.dim());
            let y = simulate_with_retry(sim, &p, &mut streams.sim)?;
            sim_data.push(p, y)?;
            ledger.charge(cfg.sim_cost);
        }
        let post = update_posterior(&cfg.sources, &cfg.preloaded, &cfg.a_bounds)?;
        let hyper = fit_hyper(cfg, &joint, &sim_data, None, &mut streams.algo)?;
        let gp = GpPosterior::fit_centered(&sim_data, &hyper)?;
        Ok(State {
            cfg,
            joint,
            sim_data,
            source_data: cfg.preloaded.clone(),
            post,
            hyper,
            gp,
            ledger,
        })
    }

    fn discretize(&self, rng: &mut ChaCha8Rng) -> Result<DiscretizationSet> {
        DiscretizationSet::sample(&self.cfg.x_bounds, &self.post, self.cfg.n_grid, self.cfg.n_a, rng)
    }

    fn simulate(&mut self, p: JointPoint, sim: &dyn Simulator, streams: &mut RunStreams) -> Result<f64> {
        let y = simulate_with_retry(sim, &p, &mut streams.sim)?;
        self.sim_data.push(p, y)?;
        self.hyper = fit_hyper(self.cfg, &self.joint, &self.sim_data, Some(&self.hyper), &mut streams.algo)?;
        self.gp = GpPosterior::fit_centered(&self.sim_data, &self.hyper)?;
        self.ledger.charge(self.cfg.sim_cost);
        Ok(y)
    }

    fn query(&mut self, id: usize, src: &dyn SourceOracle, streams: &mut RunStreams) -> Result<f64> {
        let spec = find_spec(&self.cfg.sources, id)?;
        let r = src.query(spec, &mut streams.src)?;
        if !r.is_finite() {
            return Err(BicoError::Runtime(format!("source {id} returned a non-finite value")));
        }
        self.post = self.post.observe(spec, r)?;
        self.source_data.push(id, r);
        self.ledger.charge(spec.cost);
        Ok(r)
    }

    fn recommend(&self, disc: &DiscretizationSet, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let ctx = VoiContext::new(&self.gp, disc)?;
        Ok(ctx.recommend(&self.cfg.x_bounds, self.cfg.inner, rng))
    }
}

fn simulate_with_retry(sim: &dyn Simulator, p: &JointPoint, rng: &mut ChaCha8Rng) -> Result<f64> {
    let attempt = |rng: &mut ChaCha8Rng| match sim.simulate(&p.x, &p.a, rng) {
        Ok(y) if y.is_finite() => Ok(y),
        Ok(_) => Err(BicoError::Simulator("non-finite output".into())),
        Err(e) => Err(e),
    };
    attempt(rng).or_else(|_| attempt(rng)).map_err(|e| match e {
        BicoError::Simulator(m) => BicoError::Simulator(format!("failed twice at {:?}: {m}", p.to_vec())),
        other => BicoError::Simulator(format!("failed twice at {:?}: {other}", p.to_vec())),
    })
}

fn fit_hyper(
    cfg: &LoopConfig,
    joint: &BoxBounds,
    data: &SimulationDataset,
    warm: Option<&GpHyperparams>,
    rng: &mut ChaCha8Rng,
) -> Result<GpHyperparams> {
    if let Some(h) = &cfg.fixed_hyper {
        return Ok(h.clone());
    }
    let search = HyperSearch {
        bounds: HyperBounds::from_data(data, joint),
        mode: cfg.lengthscale_mode,
        restarts: cfg.hyper_restarts,
        max_evals: cfg.hyper_max_evals,
        center: true,
    };
    let fit = fit_hyperparameters(data, &search, warm.map(std::slice::from_ref).unwrap_or(&[]), rng)?;
    Ok(fit.hyper)
}

enum Policy {
    Bico,
    /// source queries still to make, in order, then simulations only
    Fixed(std::collections::VecDeque<usize>),
    Random,
}

fn run(
    policy: Policy,
    cfg: &LoopConfig,
    sim: &dyn Simulator,
    src: &dyn SourceOracle,
    truth: Option<&dyn Truth>,
    streams: &mut RunStreams,
) -> Result<RunOutput> {
    let mut st = State::init(cfg, sim, streams)?;
    let mut policy = policy;
    let mut log: Vec<IterationLog> = Vec::new();
    let mut m_final = 0;
    let mut x_r_init = None;

    loop {
        let disc = st.discretize(&mut streams.algo)?;
        let (x_r, g_r) = st.recommend(&disc, &mut streams.algo)?;
        let oc = truth.map(|t| t.opportunity_cost(&x_r));
        match log.last_mut() {
            Some(last) => {
                last.x_r = x_r.clone();
                last.oc = oc;
            }
            None => x_r_init = Some(x_r.clone()),
        }
        if st.ledger.exhausted() {
            return Ok(RunOutput {
                x_r,
                g_r,
                oc,
                m_final,
                x_r_init: x_r_init.unwrap_or_default(),
                log,
                hyper: st.hyper,
                ledger: st.ledger,
                sim_data: st.sim_data,
                source_data: st.source_data,
            });
        }

        let (action, voi_sim, voi_src) = match &mut policy {
            Policy::Bico => {
                let ctx = VoiContext::new(&st.gp, &disc)?;
                let best_sim = ctx.max_voi_simulation(&st.joint, cfg.sim_cost, cfg.inner, &mut streams.algo)?;
                let mut best_src: Option<(usize, f64)> = None;
                for spec in &cfg.sources {
                    let v = ctx.voi_source(spec, &st.post, cfg.n_r, &mut streams.algo)?;
                    if best_src.is_none_or(|b| v.value > b.1) {
                        best_src = Some((spec.id, v.value));
                    }
                }
                let VoiPayload::Point(p) = best_sim.payload else {
                    unreachable!("simulation value always carries a point")
                };
                match best_src {
                    Some((id, v)) if v > best_sim.value => (Action::QuerySource(id), Some(best_sim.value), Some(v)),
                    _ => (Action::Simulate(p), Some(best_sim.value), best_src.map(|b| b.1)),
                }
            }
            Policy::Fixed(queue) => match queue.pop_front() {
                Some(id) => (Action::QuerySource(id), None, None),
                None => {
                    let ctx = VoiContext::new(&st.gp, &disc)?;
                    let best = ctx.max_voi_simulation(&st.joint, cfg.sim_cost, cfg.inner, &mut streams.algo)?;
                    let VoiPayload::Point(p) = best.payload else {
                        unreachable!("simulation value always carries a point")
                    };
                    (Action::Simulate(p), Some(best.value), None)
                }
            },
            Policy::Random => {
                let v = st.joint.sample_uniform(&mut streams.algo);
                (Action::Simulate(JointPoint::from_concat(&v, cfg.x_bounds.dim())), None, None)
            }
        };

        let cost = st.ledger.cost_of(&action);
        let observed = match &action {
            Action::Simulate(p) => st.simulate(p.clone(), sim, streams)?,
            Action::QuerySource(id) => {
                m_final += 1;
                st.query(*id, src, streams)?
            }
        };
        log.push(IterationLog {
            t: log.len(),
            action,
            observed,
            cost,
            voi_sim,
            voi_src,
            b: st.ledger.spent,
            x_r: Vec::new(),
            oc: None,
        });
    }
}

/// Runs the value-of-information loop until the budget is spent.
pub fn run_bico(
    cfg: &LoopConfig,
    sim: &dyn Simulator,
    src: &dyn SourceOracle,
    truth: Option<&dyn Truth>,
    streams: &mut RunStreams,
) -> Result<RunOutput> {
    run(Policy::Bico, cfg, sim, src, truth, streams)
}

/// Source queries totalling at most `⌊B·p⌋` budget units (and no more than
/// what initialisation left), in round-robin over the sources, then
/// simulations chosen by value of information with the posterior frozen.
pub fn run_fixed_fraction(
    p: f64,
    cfg: &LoopConfig,
    sim: &dyn Simulator,
    src: &dyn SourceOracle,
    truth: Option<&dyn Truth>,
    streams: &mut RunStreams,
) -> Result<RunOutput> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BicoError::config("p", "must lie in [0, 1]"));
    }
    cfg.validate()?;
    let init = cfg.n_init as f64 * cfg.sim_cost;
    let allowance = (cfg.budget * p + 1e-9).floor().min(cfg.budget - init);
    let mut queue = std::collections::VecDeque::new();
    let mut spent = 0.0;
    // round robin; stopping at the first source that no longer fits keeps
    // the per-source counts within one of each other
    for s in cfg.sources.iter().cycle() {
        if spent + s.cost > allowance + 1e-9 {
            break;
        }
        spent += s.cost;
        queue.push_back(s.id);
    }
    run(Policy::Fixed(queue), cfg, sim, src, truth, streams)
}

/// Uniform random simulation points, no source queries.
pub fn run_random(
    cfg: &LoopConfig,
    sim: &dyn Simulator,
    src: &dyn SourceOracle,
    truth: Option<&dyn Truth>,
    streams: &mut RunStreams,
) -> Result<RunOutput> {
    run(Policy::Random, cfg, sim, src, truth, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbeds::{GaussianSources, NewsvendorConfig};

    #[test]
    fn a_query_leaves_the_gp_untouched() {
        let nv = NewsvendorConfig::default();
        let mut cfg = LoopConfig::new(nv.x_box(), nv.a_box(), 20.0, vec![SourceSpec {
            id: 1,
            target_dim: 0,
            obs_noise_sq: 10.0,
            cost: 1.0,
        }]);
        cfg.hyper_restarts = 3;
        let mut streams = RunStreams::new(3);
        let mut st = State::init(&cfg, &nv, &mut streams).unwrap();
        let probes = lhs_sample(50, &st.joint, &mut ChaCha8Rng::seed_from_u64(1));
        let before: Vec<u64> = probes.iter().map(|p| st.gp.mean_raw(p).to_bits()).collect();
        let post_before = st.post.clone();
        st.query(1, &GaussianSources { a_star: vec![40.0] }, &mut streams).unwrap();
        let after: Vec<u64> = probes.iter().map(|p| st.gp.mean_raw(p).to_bits()).collect();
        assert_eq!(before, after);
        assert_ne!(st.post, post_before);
        assert_eq!(st.ledger.spent, 11.0);
    }
}
