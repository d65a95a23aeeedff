//! Sequential belief about an unknown mean demand from noisy source data.

use bico::optim::BoxBounds;
use bico::posterior::{ParameterPosterior, SourceSpec};
use bico::testbeds::source_simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bico::Result<()> {
    let bounds = BoxBounds::cube(1, 0.0, 100.0)?;
    let spec = SourceSpec {
        id: 1,
        target_dim: 0,
        obs_noise_sq: 10.0,
        cost: 1.0,
    };
    let a_star = [40.0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut post = ParameterPosterior::prior(&bounds);
    println!("{:>4} {:>9} {:>12}", "m", "mean", "P(39..41)");
    for m in 1..=200 {
        post = post.observe(&spec, source_simulate(&spec, &a_star, &mut rng))?;
        if [1, 2, 5, 10, 20, 50, 100, 200].contains(&m) {
            println!("{m:>4} {:>9.3} {:>12.4}", post.mean()[0], post.mass(0, 39.0, 41.0));
        }
    }
    println!("belief after 200 samples: {:?}", post.belief(0));
    Ok(())
}
