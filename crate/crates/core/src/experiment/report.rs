use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use super::runner::ReplicationResult;
use crate::error::{BicoError, Result};
use crate::stats::{mean, sample_sd};

pub const CI_METHOD: &str = "normal approximation: mean ± 1.96·sd/√n over replications";

/// Mean and 95% half-width; the half-width is `None` for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: Option<f64>,
}

impl MeanCi {
    pub fn of(xs: &[f64]) -> Self {
        MeanCi {
            mean: mean(xs),
            half_width: sample_sd(xs).map(|s| 1.96 * s / (xs.len() as f64).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub algorithm: Algorithm,
    pub completed: usize,
    pub failed: usize,
    pub oc: MeanCi,
    pub m: MeanCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub ci_method: String,
    pub groups: Vec<GroupSummary>,
}

impl AggregateReport {
    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Fixed-fraction groups ordered by mean number of source queries.
    pub fn oc_vs_m(&self) -> Vec<&GroupSummary> {
        let mut v: Vec<_> = self
            .groups
            .iter()
            .filter(|g| matches!(g.algorithm, Algorithm::FixedFraction { .. }))
            .collect();
        v.sort_by(|a, b| a.m.mean.total_cmp(&b.m.mean));
        v
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "completed", "failed", "mean_oc", "ci_oc", "mean_m", "ci_m"])?;
        for g in &self.groups {
            w.write_record(summary_row(g))?;
        }
        finish(w)
    }
}

fn half(v: Option<f64>) -> String {
    v.map_or("NA".into(), |h| h.to_string())
}

fn summary_row(g: &GroupSummary) -> Vec<String> {
    vec![
        g.label.clone(),
        g.completed.to_string(),
        g.failed.to_string(),
        g.oc.mean.to_string(),
        half(g.oc.half_width),
        g.m.mean.to_string(),
        half(g.m.half_width),
    ]
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| BicoError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BicoError::Runtime(e.to_string()))
}

/// Aggregates replication results grouped by algorithm label. The order of
/// `results` does not matter.
pub fn aggregate(results: &[ReplicationResult]) -> Result<AggregateReport> {
    if results.is_empty() {
        return Err(BicoError::Runtime("no replication results to report".into()));
    }
    let mut by_label: BTreeMap<String, Vec<&ReplicationResult>> = BTreeMap::new();
    for r in results {
        by_label.entry(r.algorithm.label()).or_default().push(r);
    }
    let mut groups = Vec::new();
    for (label, mut rs) in by_label {
        rs.sort_by_key(|r| r.rep);
        let ok: Vec<_> = rs.iter().filter(|r| r.succeeded() && r.oc.is_some()).collect();
        if ok.is_empty() {
            return Err(BicoError::Runtime(format!("every replication of `{label}` failed")));
        }
        let ocs: Vec<f64> = ok.iter().map(|r| r.oc.unwrap()).collect();
        let ms: Vec<f64> = ok.iter().map(|r| r.m_final as f64).collect();
        groups.push(GroupSummary {
            label,
            algorithm: rs[0].algorithm,
            completed: ok.len(),
            failed: rs.len() - ok.len(),
            oc: MeanCi::of(&ocs),
            m: MeanCi::of(&ms),
        });
    }
    Ok(AggregateReport {
        ci_method: CI_METHOD.into(),
        groups,
    })
}

/// Every `rep_*.json` below `dir`, in path order.
pub fn collect_results(dir: &Path) -> Result<Vec<ReplicationResult>> {
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))
        .collect()
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("rep_") && n.ends_with(".json"))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Aggregates everything under `dir` and writes the plot data next to it:
/// `summary.csv`, `oc_vs_m.csv` (fixed-fraction curve) and `bico_band.csv`
/// (BICO's mean OC and mean m with both intervals). OC is written raw; take
/// logs when plotting on a semilog scale.
pub fn report(dir: &Path) -> Result<AggregateReport> {
    let results = collect_results(dir)?;
    let rep = aggregate(&results)?;
    fs::write(dir.join("summary.csv"), rep.to_csv()?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "mean_m", "ci_m", "mean_oc", "ci_oc"])?;
    for g in rep.oc_vs_m() {
        let Algorithm::FixedFraction { p } = g.algorithm else { unreachable!() };
        w.write_record([
            p.to_string(),
            g.m.mean.to_string(),
            half(g.m.half_width),
            g.oc.mean.to_string(),
            half(g.oc.half_width),
        ])?;
    }
    fs::write(dir.join("oc_vs_m.csv"), finish(w)?)?;

    if let Some(g) = rep.group("bico") {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mean_m", "ci_m", "mean_oc", "ci_oc"])?;
        w.write_record([
            g.m.mean.to_string(),
            half(g.m.half_width),
            g.oc.mean.to_string(),
            half(g.oc.half_width),
        ])?;
        fs::write(dir.join("bico_band.csv"), finish(w)?)?;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{ExperimentConfig, Testbed};

    fn fixture(rep: usize, oc: f64, m: usize, algorithm: Algorithm) -> ReplicationResult {
        ReplicationResult {
            rep,
            seed: rep as u64,
            algorithm,
            oc: Some(oc),
            m_final: m,
            x_r: vec![0.0],
            a_star: vec![40.0],
            x_star: vec![39.2],
            log: Vec::new(),
            error: None,
            version: "test".into(),
            config: ExperimentConfig::new(Testbed::Newsvendor, 0),
        }
    }

    #[test]
    fn three_replications() {
        let rs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &oc)| fixture(i, oc, i, Algorithm::Bico))
            .collect();
        let r = aggregate(&rs).unwrap();
        let g = r.group("bico").unwrap();
        assert_eq!(g.oc.mean, 2.0);
        let hw = g.oc.half_width.unwrap();
        assert!((hw - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((hw - 1.1316).abs() < 1e-4);
    }

    #[test]
    fn single_replication_has_no_interval() {
        let r = aggregate(&[fixture(0, 1.5, 3, Algorithm::Bico)]).unwrap();
        assert_eq!(r.groups[0].oc.half_width, None);
        assert!(r.to_csv().unwrap().contains(",NA,"));
    }

    #[test]
    fn permutation_invariant() {
        let mut rs: Vec<_> = (0..7)
            .map(|i| fixture(i, (i * i) as f64 * 0.37, i % 3, Algorithm::FixedFraction { p: 0.2 }))
            .collect();
        let a = aggregate(&rs).unwrap();
        rs.reverse();
        rs.swap(1, 4);
        assert_eq!(aggregate(&rs).unwrap(), a);
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let mut bad = fixture(2, 100.0, 0, Algorithm::Bico);
        bad.error = Some("boom".into());
        bad.oc = None;
        let r = aggregate(&[fixture(0, 1.0, 0, Algorithm::Bico), fixture(1, 3.0, 0, Algorithm::Bico), bad]).unwrap();
        assert_eq!(r.groups[0].failed, 1);
        assert_eq!(r.groups[0].oc.mean, 2.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(aggregate(&[]).is_err());
    }
}
