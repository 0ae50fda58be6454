//! Uniform convergence of the stabilized pair cost to the squared distance.
//!
//! Sweeps a grid of point pairs on the circle and reports the sup-error
//! `max |F_t(x, y) - d(x, y)^2|` along a decreasing schedule of diffusion
//! times, plus the worst pair (always the antipode, where the cost is
//! smoothed the most).

use varadhan::heat::{self, KernelConfig};
use varadhan::manifold::{FlatTorus, TWO_PI};

fn main() -> varadhan::Result<()> {
    let mfd = FlatTorus::new(1)?;
    let cfg = KernelConfig::default();
    let grid = 256usize;

    println!("{:>8}  {:>12}  {:>12}", "t", "sup error", "worst pair");
    for &t in &[0.5, 0.2, 0.1, 0.05, 0.02, 0.01] {
        let mut sup = 0.0f64;
        let mut worst = (0.0, 0.0);
        for i in 0..grid {
            let x = [TWO_PI * i as f64 / grid as f64];
            for j in 0..grid {
                let y = [TWO_PI * j as f64 / grid as f64];
                let gap = (heat::cost(&mfd, t, &x, &y, &cfg)? - mfd.distance_squared(&x, &y)?).abs();
                if gap > sup {
                    sup = gap;
                    worst = (x[0], y[0]);
                }
            }
        }
        println!("{t:>8}  {sup:>12.6}  ({:.4}, {:.4})", worst.0, worst.1);
    }

    // The limit is pointwise too: at the antipode the cost approaches
    // pi^2 from below as the bandwidth shrinks.
    println!("\nantipodal cost F_t(0, pi) -> pi^2 = {:.6}", std::f64::consts::PI.powi(2));
    for &t in &[0.5, 0.1, 0.02, 0.005] {
        let c = heat::cost(&mfd, t, &[0.0], &[std::f64::consts::PI], &cfg)?;
        println!("  t = {t:<6} cost = {c:.6}");
    }
    Ok(())
}
