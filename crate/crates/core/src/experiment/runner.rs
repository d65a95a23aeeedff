use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, Testbed};
use crate::bico::{run_bico, run_fixed_fraction, run_random, Action, IterationLog, RunOutput, RunStreams};
use crate::error::{BicoError, Result};
use crate::stats::derive_seed;
use crate::testbeds::{GaussianSources, GpTestFunction};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of one replication, as written to `rep_NNNN.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub oc: Option<f64>,
    pub m_final: usize,
    pub x_r: Vec<f64>,
    pub a_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub log: Vec<IterationLog>,
    pub error: Option<String>,
    pub version: String,
    pub config: ExperimentConfig,
}

impl ReplicationResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Seed of replication `rep`; earlier replications keep their seeds when
/// more are added.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

/// Runs one replication. The test function and the true parameter depend
/// only on the replication seed, so every algorithm sees the same problem.
pub fn run_replication(cfg: &ExperimentConfig, rep: usize) -> ReplicationResult {
    let seed = replication_seed(cfg.seed, rep);
    let mut result = ReplicationResult {
        rep,
        seed,
        algorithm: cfg.algorithm,
        oc: None,
        m_final: 0,
        x_r: Vec::new(),
        a_star: Vec::new(),
        x_star: Vec::new(),
        log: Vec::new(),
        error: None,
        version: VERSION.to_string(),
        config: cfg.clone(),
    };
    match execute(cfg, seed) {
        Ok((out, a_star, x_star)) => {
            result.oc = out.oc;
            result.m_final = out.m_final;
            result.x_r = out.x_r;
            result.log = out.log;
            result.a_star = a_star;
            result.x_star = x_star;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<(RunOutput, Vec<f64>, Vec<f64>)> {
    let lc = cfg.loop_config()?;
    let mut streams = RunStreams::new(seed);
    let (truth, sim): (_, Box<dyn crate::bico::Simulator>) = match cfg.testbed {
        Testbed::Newsvendor => (cfg.newsvendor.truth(), Box::new(cfg.newsvendor.clone())),
        Testbed::Gp1d | Testbed::Gp2d => {
            let n_anchor = cfg.gp.n_anchor;
            let (f, t) = GpTestFunction::build(
                derive_seed(seed, 1 << 32),
                &lc.x_bounds,
                &lc.a_bounds,
                &cfg.gp_hyper(),
                n_anchor,
            )?;
            (t, Box::new(f))
        }
    };
    let sources = GaussianSources {
        a_star: truth.a_star.clone(),
    };
    let out = match cfg.algorithm {
        Algorithm::Bico => run_bico(&lc, sim.as_ref(), &sources, Some(&truth), &mut streams)?,
        Algorithm::FixedFraction { p } => run_fixed_fraction(p, &lc, sim.as_ref(), &sources, Some(&truth), &mut streams)?,
        Algorithm::Random => run_random(&lc, sim.as_ref(), &sources, Some(&truth), &mut streams)?,
    };
    Ok((out, truth.a_star.clone(), truth.x_star.clone()))
}

pub fn result_path(dir: &Path, rep: usize) -> PathBuf {
    dir.join(format!("rep_{rep:04}.json"))
}

fn log_path(dir: &Path, rep: usize) -> PathBuf {
    dir.join(format!("rep_{rep:04}.csv"))
}

/// Reads a stored result if it was produced by the same config.
fn stored(dir: &Path, rep: usize, cfg: &ExperimentConfig) -> Option<ReplicationResult> {
    let text = fs::read_to_string(result_path(dir, rep)).ok()?;
    let r: ReplicationResult = serde_json::from_str(&text).ok()?;
    (r.config == *cfg && r.version == VERSION && r.succeeded() && log_path(dir, rep).exists()).then_some(r)
}

/// Runs every replication on `workers` threads and writes one JSON result
/// and one CSV iteration log per replication into `out`. Replications whose
/// result is already there (same config and version) are not rerun.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BicoError::Runtime(e.to_string()))?;
    let results: Vec<Result<ReplicationResult>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                if let Some(r) = stored(out, rep, cfg) {
                    return Ok(r);
                }
                let r = run_replication(cfg, rep);
                write_log_csv(&log_path(out, rep), cfg, &r)?;
                fs::write(result_path(out, rep), serde_json::to_string_pretty(&r)?)?;
                Ok(r)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Flat iteration log. Columns: `t, action_type, x…, a…, s, r, y,
/// voi_sim, voi_src, x_r…, oc, b`; cells that do not apply are empty.
pub fn write_log_csv(path: &Path, cfg: &ExperimentConfig, r: &ReplicationResult) -> Result<()> {
    let x_dim = 1;
    let a_dim = cfg.a_dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "action_type".to_string()];
    header.extend((0..x_dim).map(|i| format!("x{i}")));
    header.extend((0..a_dim).map(|i| format!("a{i}")));
    header.extend(["s", "r", "y", "voi_sim", "voi_src"].map(String::from));
    header.extend((0..x_dim).map(|i| format!("x_r{i}")));
    header.extend(["oc", "b"].map(String::from));
    w.write_record(&header)?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for e in &r.log {
        let mut row = vec![e.t.to_string()];
        match &e.action {
            Action::Simulate(p) => {
                row.push("simulate".into());
                row.extend(p.x.iter().chain(&p.a).map(f64::to_string));
                row.extend([String::new(), String::new(), e.observed.to_string()]);
            }
            Action::QuerySource(s) => {
                row.push("query".into());
                row.extend(std::iter::repeat_n(String::new(), x_dim + a_dim));
                row.extend([s.to_string(), e.observed.to_string(), String::new()]);
            }
        }
        row.push(opt(e.voi_sim));
        row.push(opt(e.voi_src));
        row.extend(e.x_r.iter().map(f64::to_string));
        row.push(opt(e.oc));
        row.push(e.b.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
