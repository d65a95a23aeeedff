//! Expected maximum of a family of noisy lines, exact vs Monte Carlo.
//!
//! Each alternative i is worth `a_i + b_i·Z` after one standard normal draw
//! `Z`. `kg_discrete` returns `E[max_i(a_i + b_i Z)] − max_i a_i`.

use bico::kg::kg_discrete;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> bico::Result<()> {
    let a = [0.0, 0.3, 0.1, -0.2, 0.25];
    let b = [1.0, 0.1, -0.8, 0.5, 0.0];
    let kg = kg_discrete(&a, &b)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000;
    let best = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        sum += a.iter().zip(&b).map(|(a, b)| a + b * z).fold(f64::NEG_INFINITY, f64::max) - best;
    }
    println!("exact {kg:.6}  monte carlo {:.6}", sum / n as f64);

    // flat lines carry no information
    println!("all slopes zero: {}", kg_discrete(&a, &[0.0; 5])?);
    Ok(())
}
