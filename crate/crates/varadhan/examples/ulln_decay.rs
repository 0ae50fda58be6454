//! Uniform law of large numbers: sup-error decay across sample sizes.
//!
//! Replicates empirical objectives at several sample sizes, measures the
//! sup-distance to the population objective over a `(t, x)` grid, and
//! fits the log-log decay rate of the medians.  The expected Monte Carlo
//! rate is n^(-1/2).

use varadhan::density::Density;
use varadhan::heat::KernelConfig;
use varadhan::montecarlo::{run_ulln, RunRecord};
use varadhan::ExperimentConfig;

fn main() -> varadhan::Result<()> {
    let cfg = ExperimentConfig {
        density: Density::von_mises(&[0.0], &[2.0])?,
        t_list: vec![0.2, 0.1, 0.05],
        n_list: vec![25, 100, 400],
        replications: 50,
        seed: 5,
        res: 128,
        audit_res: 32,
        workers: 0,
        kernel: KernelConfig::default(),
        jterm: None,
    };
    let report = run_ulln(&cfg)?;

    println!(
        "{:>6}  {:>12}  {:>12}  {:>12}",
        "n", "sup |F_n-F|", "value error", "mean dist"
    );
    for rec in &report.records {
        let RunRecord::Ulln(r) = rec else {
            unreachable!("ULLN experiment produces ULLN records");
        };
        println!(
            "{:>6}  {:>12.6}  {:>12.6}  {:>12.6}",
            r.n,
            r.sup_function_median,
            r.sup_value_median,
            r.sup_mean_dist_median.unwrap_or(f64::NAN)
        );
    }
    println!("\nlog-log decay slopes (expect about -0.5):");
    for (name, slope) in &report.slopes {
        println!("  {name:<15} {slope:+.3}");
    }
    Ok(())
}
