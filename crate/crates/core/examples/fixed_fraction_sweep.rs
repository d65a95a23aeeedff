//! BICO against fixed source-query fractions on the newsvendor, with common
//! random numbers across algorithms. Prints mean OC and mean m per policy.

use bico::experiment::{aggregate, run_replication, Algorithm, ExperimentConfig, Testbed};

fn main() -> bico::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let mut base = ExperimentConfig::new(Testbed::Newsvendor, 2024).resolve()?;
    base.replications = reps;

    let mut algos = vec![Algorithm::Bico];
    algos.extend([0.0, 0.2, 0.4, 0.6].map(|p| Algorithm::FixedFraction { p }));
    let mut results = Vec::new();
    for algorithm in algos {
        let cfg = ExperimentConfig { algorithm, ..base.clone() };
        results.extend((0..reps).map(|rep| run_replication(&cfg, rep)));
    }
    let report = aggregate(&results)?;
    println!("{:<12} {:>10} {:>8} {:>7}", "policy", "mean OC", "±95%", "mean m");
    for g in &report.groups {
        println!(
            "{:<12} {:>10.4} {:>8.4} {:>7.2}",
            g.label,
            g.oc.mean,
            g.oc.half_width.unwrap_or(f64::NAN),
            g.m.mean
        );
    }
    Ok(())
}
