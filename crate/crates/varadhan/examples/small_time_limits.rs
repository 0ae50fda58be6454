//! Small-bandwidth limits of the smoothed objective's derivatives.
//!
//! At a point away from the mean the gradient of the smoothed objective
//! converges to the Fréchet gradient `-2 E[Log_x Xi]`; at the minimizer
//! the Hessian converges to `2 I + J` where `J` is the cut-locus
//! correction term.  Both limits are shown with their convergence rates.

use varadhan::asymptotics::{gradient_limit, hessian_limit, JTermSchedule};
use varadhan::density::Density;
use varadhan::heat::KernelConfig;
use varadhan::varadhan::{VaradhanFunction, DEFAULT_START_RES};

fn main() -> varadhan::Result<()> {
    let d = Density::von_mises(&[0.5], &[2.0])?;
    let cfg = KernelConfig::default();
    let res = 512;

    // Gradient limit at x = 0 (offset from the density's mean at 0.5).
    let grad = gradient_limit(&d, &[0.0], &[0.1, 0.01, 1e-3, 1e-4], res, &cfg)?;
    println!("target -2 E[Log_0 Xi] = {:.9}", grad.target[0]);
    println!("{:>8}  {:>14}  {:>10}", "t", "grad F_t(0)", "gap");
    for row in &grad.rows {
        println!("{:>8}  {:>14.9}  {:>10.2e}", row.t, row.grad[0], row.gap);
    }

    // Hessian limit at the minimizer, two independent routes.
    let f0 = VaradhanFunction::population(d.clone(), 0.0, res, cfg)?;
    let base = f0.minimize(DEFAULT_START_RES)?.minimizer;
    let rep = hessian_limit(&d, &base, &JTermSchedule::standard(res), &cfg)?;
    let (t_last, direct) = rep.direct.last().expect("schedule has at least one t");
    println!("\nminimizer x* = {:.9}", base[0]);
    println!("correction term J           = {:>12.9}", rep.j.extrapolated[(0, 0)]);
    println!("limit route 2 + J           = {:>12.9}", rep.limit[(0, 0)]);
    println!("direct route at t = {t_last:.5}  = {:>12.9}", direct[(0, 0)]);
    println!("relative gap                = {:>12.2e}", rep.rel_gap);
    println!("consistent                  = {}", rep.consistent);
    Ok(())
}
