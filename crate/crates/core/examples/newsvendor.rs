//! One BICO run on the newsvendor with the default settings.

use bico::bico::{run_bico, Action, LoopConfig, RunStreams};
use bico::posterior::SourceSpec;
use bico::testbeds::{GaussianSources, NewsvendorConfig};

fn main() -> bico::Result<()> {
    let nv = NewsvendorConfig::default();
    let truth = nv.truth();
    // past demand observations: same variance as the simulated demand
    let source = SourceSpec {
        id: 1,
        target_dim: 0,
        obs_noise_sq: nv.demand_var,
        cost: 1.0,
    };
    let cfg = LoopConfig::new(nv.x_box(), nv.a_box(), 50.0, vec![source]);
    let sources = GaussianSources {
        a_star: truth.a_star.clone(),
    };
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);

    let start = std::time::Instant::now();
    let out = run_bico(&cfg, &nv, &sources, Some(&truth), &mut RunStreams::new(seed))?;
    for e in &out.log {
        let what = match &e.action {
            Action::Simulate(p) => format!("simulate x={:7.2} a={:7.2}", p.x[0], p.a[0]),
            Action::QuerySource(s) => format!("query source {s}"),
        };
        println!(
            "t={:2} {what:<32} voi_sim={:.3e} voi_src={:.3e} x_r={:6.2} oc={:.4}",
            e.t,
            e.voi_sim.unwrap_or(f64::NAN),
            e.voi_src.unwrap_or(f64::NAN),
            e.x_r[0],
            e.oc.unwrap_or(f64::NAN)
        );
    }
    println!(
        "x* = {:.3}, x_r = {:.3}, OC = {:.4}, source queries m = {}, {:.1?}",
        truth.x_star[0],
        out.x_r[0],
        out.oc.unwrap_or(f64::NAN),
        out.m_final,
        start.elapsed()
    );
    Ok(())
}
