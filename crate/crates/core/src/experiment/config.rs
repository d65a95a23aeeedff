use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::InnerSearch;
use crate::bico::LoopConfig;
use crate::error::{BicoError, Result};
use crate::gp::{GpHyperparams, LengthscaleMode};
use crate::optim::BoxBounds;
use crate::posterior::SourceSpec;
use crate::testbeds::NewsvendorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Testbed {
    Newsvendor,
    /// GP-drawn function, one solution and one parameter coordinate
    #[serde(rename = "gp_1d")]
    Gp1d,
    /// GP-drawn function, one solution and two parameter coordinates
    #[serde(rename = "gp_2d")]
    Gp2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Algorithm {
    Bico,
    FixedFraction { p: f64 },
    Random,
}

impl Algorithm {
    /// Short label used for grouping and directory names.
    pub fn label(&self) -> String {
        match self {
            Algorithm::Bico => "bico".into(),
            Algorithm::FixedFraction { p } => format!("fixed_p{p}"),
            Algorithm::Random => "random".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub n_a: usize,
    pub n_r: usize,
    /// grid points per solution dimension
    pub grid_per_dim: usize,
    pub restarts: usize,
    pub max_evals: usize,
    pub hyper_restarts: usize,
    pub hyper_max_evals: usize,
    pub lengthscale_mode: LengthscaleMode,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            n_a: 100,
            n_r: 30,
            grid_per_dim: 100,
            restarts: 10,
            max_evals: 100,
            hyper_restarts: 10,
            hyper_max_evals: 100,
            lengthscale_mode: LengthscaleMode::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpTestbedConfig {
    pub sigma0_sq: f64,
    pub lengthscale: f64,
    /// simulation noise variance
    pub noise_sq: f64,
    /// observation noise variance of every data source
    pub source_noise_sq: f64,
    pub x_bounds: (f64, f64),
    pub a_bounds: (f64, f64),
    /// anchors of the drawn function; `None` picks a lengthscale-based count
    pub n_anchor: Option<usize>,
}

impl Default for GpTestbedConfig {
    fn default() -> Self {
        GpTestbedConfig {
            sigma0_sq: 1.0,
            lengthscale: 10.0,
            noise_sq: 0.01,
            source_noise_sq: 10.0,
            x_bounds: (0.0, 100.0),
            a_bounds: (0.0, 100.0),
            n_anchor: None,
        }
    }
}

/// A full experiment. `budget` and `sources` default per testbed and are
/// always present after [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub testbed: Testbed,
    pub seed: u64,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default = "one")]
    pub sim_cost: f64,
    #[serde(default = "ten")]
    pub n_init: usize,
    #[serde(default = "bico_default")]
    pub algorithm: Algorithm,
    #[serde(default = "hundred")]
    pub replications: usize,
    #[serde(default)]
    pub sources: Option<Vec<SourceSpec>>,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub newsvendor: NewsvendorConfig,
    #[serde(default)]
    pub gp: GpTestbedConfig,
}

fn one() -> f64 {
    1.0
}
fn ten() -> usize {
    10
}
fn hundred() -> usize {
    100
}
fn bico_default() -> Algorithm {
    Algorithm::Bico
}

impl ExperimentConfig {
    /// Minimal config: everything else at its default.
    pub fn new(testbed: Testbed, seed: u64) -> Self {
        ExperimentConfig {
            testbed,
            seed,
            budget: None,
            sim_cost: one(),
            n_init: ten(),
            algorithm: Algorithm::Bico,
            replications: hundred(),
            sources: None,
            acquisition: AcquisitionConfig::default(),
            newsvendor: NewsvendorConfig::default(),
            gp: GpTestbedConfig::default(),
        }
    }

    pub fn a_dim(&self) -> usize {
        match self.testbed {
            Testbed::Newsvendor | Testbed::Gp1d => 1,
            Testbed::Gp2d => 2,
        }
    }

    pub fn x_bounds(&self) -> BoxBounds {
        let r = match self.testbed {
            Testbed::Newsvendor => self.newsvendor.x_bounds,
            _ => self.gp.x_bounds,
        };
        BoxBounds::new(vec![r]).expect("validated bounds")
    }

    pub fn a_bounds(&self) -> BoxBounds {
        let r = match self.testbed {
            Testbed::Newsvendor => self.newsvendor.a_bounds,
            _ => self.gp.a_bounds,
        };
        BoxBounds::new(vec![r; self.a_dim()]).expect("validated bounds")
    }

    /// The GP test-function prior; its `noise_sq` is the simulation noise.
    pub fn gp_hyper(&self) -> GpHyperparams {
        GpHyperparams::shared(self.gp.sigma0_sq, self.gp.lengthscale, self.gp.noise_sq, 1 + self.a_dim())
    }

    /// Fills testbed-dependent defaults and validates.
    pub fn resolve(mut self) -> Result<Self> {
        if self.budget.is_none() {
            self.budget = Some(match self.testbed {
                Testbed::Newsvendor => 50.0,
                Testbed::Gp1d | Testbed::Gp2d => 100.0,
            });
        }
        if self.sources.is_none() {
            let noise = match self.testbed {
                Testbed::Newsvendor => self.newsvendor.demand_var,
                _ => self.gp.source_noise_sq,
            };
            self.sources = Some(
                (0..self.a_dim())
                    .map(|d| SourceSpec {
                        id: d + 1,
                        target_dim: d,
                        obs_noise_sq: noise,
                        cost: 1.0,
                    })
                    .collect(),
            );
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(BicoError::config(f, m));
        if self.replications == 0 {
            return bad("replications", "must be at least 1");
        }
        if let Algorithm::FixedFraction { p } = self.algorithm
            && !(0.0..=1.0).contains(&p)
        {
            return bad("algorithm.p", &format!("{p} is outside [0, 1]"));
        }
        let a = &self.acquisition;
        if a.n_a == 0 || a.n_r == 0 || a.grid_per_dim == 0 {
            return bad("acquisition", "sample sizes must be positive");
        }
        if a.restarts == 0 || a.max_evals == 0 || a.hyper_max_evals == 0 {
            return bad("acquisition", "search settings must be positive");
        }
        match self.testbed {
            Testbed::Newsvendor => self.newsvendor.validate()?,
            Testbed::Gp1d | Testbed::Gp2d => {
                let g = &self.gp;
                let pos = |v: f64| v.is_finite() && v > 0.0;
                if !pos(g.sigma0_sq) {
                    return bad("gp.sigma0_sq", "must be positive");
                }
                if !pos(g.lengthscale) {
                    return bad("gp.lengthscale", "must be positive");
                }
                if !(g.noise_sq.is_finite() && g.noise_sq >= 0.0) {
                    return bad("gp.noise_sq", "must be nonnegative");
                }
                if !pos(g.source_noise_sq) {
                    return bad("gp.source_noise_sq", "must be positive");
                }
                if BoxBounds::new(vec![g.x_bounds]).is_err() {
                    return bad("gp.x_bounds", "need finite lo < hi");
                }
                if BoxBounds::new(vec![g.a_bounds]).is_err() {
                    return bad("gp.a_bounds", "need finite lo < hi");
                }
                if g.n_anchor == Some(0) {
                    return bad("gp.n_anchor", "must be positive");
                }
            }
        }
        self.loop_config()?.validate()
    }

    /// Loop settings for one replication. Needs a resolved config.
    pub fn loop_config(&self) -> Result<LoopConfig> {
        let budget = self.budget.ok_or_else(|| BicoError::config("budget", "unresolved"))?;
        let sources = self.sources.clone().ok_or_else(|| BicoError::config("sources", "unresolved"))?;
        let a = &self.acquisition;
        let mut cfg = LoopConfig::new(self.x_bounds(), self.a_bounds(), budget, sources);
        cfg.sim_cost = self.sim_cost;
        cfg.n_init = self.n_init;
        cfg.n_a = a.n_a;
        cfg.n_r = a.n_r;
        cfg.n_grid = a.grid_per_dim * cfg.x_bounds.dim();
        cfg.inner = InnerSearch {
            restarts: a.restarts,
            max_evals: a.max_evals,
        };
        cfg.hyper_restarts = a.hyper_restarts;
        cfg.hyper_max_evals = a.hyper_max_evals;
        cfg.lengthscale_mode = a.lengthscale_mode;
        Ok(cfg)
    }

    /// Replaces the master seed with `BICO_SEED` when set.
    pub fn apply_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var("BICO_SEED") {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| BicoError::config("BICO_SEED", format!("`{v}` is not an unsigned integer")))?;
        }
        Ok(self)
    }
}

/// Parses, fills defaults and validates. Every failure is a configuration
/// error naming the offending field where serde reports one.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BicoError::config("path", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| BicoError::config("config", e.to_string()))?;
    cfg.resolve()
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}
