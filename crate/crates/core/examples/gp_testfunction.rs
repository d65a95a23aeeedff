//! Draws a random test function from a GP prior and prints a coarse map
//! of it together with the true parameter and the best decision.

use bico::gp::GpHyperparams;
use bico::optim::BoxBounds;
use bico::testbeds::GpTestFunction;

fn main() -> bico::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let bounds = BoxBounds::cube(1, 0.0, 100.0)?;
    let hyper = GpHyperparams::shared(1.0, 10.0, 0.01, 2);
    let (f, truth) = GpTestFunction::build(seed, &bounds, &bounds, &hyper, None)?;
    println!("{} anchors, a* = {:.2}, x* = {:.2}", f.anchors().len(), truth.a_star[0], truth.x_star[0]);

    // rows are a, columns are x
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for ai in (0..=20).rev() {
        let a = ai as f64 * 5.0;
        let row: String = (0..=60)
            .map(|xi| {
                let v = f.theta(&[xi as f64 * 100.0 / 60.0], &[a]);
                shades[(((v + 2.5) / 5.0 * 10.0) as usize).min(9)]
            })
            .collect();
        println!("a={a:5.1} |{row}|");
    }
    println!("theta(x*, a*) = {:.4}", truth.theta(&truth.x_star, &truth.a_star));
    Ok(())
}
