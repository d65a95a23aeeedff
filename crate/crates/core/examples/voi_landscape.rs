//! Value of one more simulation across the joint space, against the value
//! of one more source sample, for a GP fitted to a handful of runs.

use bico::acquisition::{DiscretizationSet, InnerSearch, VoiContext};
use bico::gp::{GpHyperparams, GpPosterior, JointPoint, SimulationDataset};
use bico::optim::{lhs_sample, BoxBounds};
use bico::posterior::{DimBelief, ParameterPosterior, SourceSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bico::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = BoxBounds::cube(1, 0.0, 100.0)?;
    let joint = b.concat(&b);
    let f = |x: f64, a: f64| -((x - a) / 25.0).powi(2) + 0.3 * (x / 15.0).sin();

    let mut data = SimulationDataset::new(1, 1)?;
    for p in lhs_sample(8, &joint, &mut rng) {
        data.push(JointPoint::from_concat(&p, 1), f(p[0], p[1]))?;
    }
    let gp = GpPosterior::fit_centered(&data, &GpHyperparams::shared(1.0, 20.0, 0.01, 2))?;
    let post = ParameterPosterior::from_beliefs(&b, vec![DimBelief::TruncatedGaussian { mean: 50.0, var: 400.0 }])?;
    let disc = DiscretizationSet::sample(&b, &post, 100, 100, &mut rng)?;
    let ctx = VoiContext::new(&gp, &disc)?;

    println!("voi_sim on a 6x6 grid (rows a, columns x):");
    for ai in (0..6).rev() {
        let a = ai as f64 * 20.0;
        let row: Vec<String> = (0..6)
            .map(|xi| {
                let p = JointPoint::new(vec![xi as f64 * 20.0], vec![a]);
                format!("{:9.2e}", ctx.voi_simulation(&p, 1.0).map_or(f64::NAN, |v| v.value))
            })
            .collect();
        println!("a={a:5.1} {}", row.join(" "));
    }
    let best = ctx.max_voi_simulation(&joint, 1.0, InnerSearch::default(), &mut rng)?;
    println!("max voi_sim {:.3e} at {:?}", best.value, best.payload);

    for noise in [1.0, 100.0, 1e4] {
        let spec = SourceSpec { id: 1, target_dim: 0, obs_noise_sq: noise, cost: 1.0 };
        let v = ctx.voi_source(&spec, &post, 30, &mut rng)?;
        println!("voi_src with source noise {noise:>7}: {:.3e} ± {:.1e}", v.value, v.std_err);
    }
    let (x_r, g) = ctx.recommend(&b, InnerSearch::default(), &mut rng);
    println!("recommended x = {:.2}, predicted performance {g:.4}", x_r[0]);
    Ok(())
}
