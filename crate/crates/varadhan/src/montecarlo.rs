//! Replicated simulation experiments: uniform-law-of-large-numbers decay
//! of empirical sup-errors, and central limit theorems for the smoothed
//! objective's values at probe points, its minimum, and its minimizer.
//!
//! Every experiment is a seeded, embarrassingly parallel loop over
//! replications.  Replication `r` draws its samples from an RNG stream
//! keyed by `(seed, r)`, the per-replication results are reduced in
//! replication order, and wall-clock data stays out of the serialized
//! report, so a report is a pure function of `(config, seed)`: reruns are
//! bitwise identical regardless of the worker count.
//!
//! The headline experiment is [`run_clt_mean`] at `t = 0`: the rescaled
//! Fréchet-mean fluctuations `√n · Log_{x⋆}(x_n)` are compared against two
//! covariance targets, one built with the cut-locus-corrected Hessian
//! `2·I + J_μ` and one with the naive `2·I`.  The report carries both
//! distances so the correction's effect is a measured quantity, not an
//! assumption.

use crate::asymptotics::{sigma_t, sigma_var, sigma_zero, JTermSchedule};
pub use crate::asymptotics::{covariance_compare, CompareReport};
use crate::density::{Density, SampleSet};
use crate::error::{Error, Result};
use crate::heat::{AxisCost, KernelConfig};
use crate::manifold::{wrap_delta, FlatTorus};
use crate::numerics::{least_squares_slope, Accumulator};
use crate::quadrature::factor_moment;
use crate::varadhan::{empirical_frechet_mean, VaradhanFunction, DEFAULT_START_RES, MIN_START_RES};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::time::Instant;

// ---------------------------------------------------------------------------
// Tunables
// ---------------------------------------------------------------------------

/// Every `AUDIT_STRIDE`-th replication re-solves the minimization with a
/// full multistart instead of trusting the warm start (a 1% audit).
pub const AUDIT_STRIDE: usize = 100;

/// A full-multistart audit counts as a mismatch when it improves on the
/// warm-started value by more than this.
pub const AUDIT_VTOL: f64 = 1e-9;

/// Number of equiprobable bins in the chi-square goodness-of-fit test of
/// the Mahalanobis radii.
pub const GOF_BINS: usize = 16;

/// Replication floor for CLT experiments (empirical covariances below this
/// are too noisy to compare against a 10%-level target).
pub const MIN_CLT_REPLICATIONS: usize = 100;

// ---------------------------------------------------------------------------
// Configuration and report types
// ---------------------------------------------------------------------------

/// Inputs shared by every experiment: the population, the `(t, n)` grid,
/// replication count, seeding, quadrature resolutions, and the worker pool
/// size.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Population density on the flat torus.
    pub density: Density,
    /// Diffusion times, strictly decreasing, each `>= 0`.
    pub t_list: Vec<f64>,
    /// Sample sizes, strictly increasing.
    pub n_list: Vec<usize>,
    /// Number of replications R.
    pub replications: usize,
    /// Global seed; replication `r` uses stream `r` of this seed.
    pub seed: u64,
    /// Quadrature resolution for population targets.
    pub res: usize,
    /// Audit-grid resolution: the per-axis grid used both for the ULLN
    /// sup over x and for full-multistart audits of warm starts.
    pub audit_res: usize,
    /// Worker pool size; 0 means one worker per available core.
    pub workers: usize,
    /// Heat-kernel truncation settings.
    pub kernel: KernelConfig,
    /// Schedule for the `t = 0` covariance target's cut-locus correction;
    /// `None` selects [`JTermSchedule::standard`] at `res`.
    pub jterm: Option<JTermSchedule>,
}

impl ExperimentConfig {
    fn validate(&self, clt: bool) -> Result<()> {
        if self.t_list.is_empty() {
            return Err(Error::InvalidInput("empty t-list".into()));
        }
        for &t in &self.t_list {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "diffusion times must be finite and >= 0, got {t}"
                )));
            }
        }
        for pair in self.t_list.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::InvalidInput(
                    "t-list must be strictly decreasing".into(),
                ));
            }
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidInput("empty n-list".into()));
        }
        for &n in &self.n_list {
            if n < 2 {
                return Err(Error::InvalidInput(format!(
                    "sample sizes must be >= 2, got {n}"
                )));
            }
        }
        for pair in self.n_list.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidInput(
                    "n-list must be strictly increasing".into(),
                ));
            }
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("need at least one replication".into()));
        }
        if clt && self.replications < MIN_CLT_REPLICATIONS {
            return Err(Error::InvalidInput(format!(
                "CLT experiments need R >= {MIN_CLT_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.audit_res < MIN_START_RES {
            return Err(Error::InvalidInput(format!(
                "audit-grid resolution must be >= {MIN_START_RES}, got {}",
                self.audit_res
            )));
        }
        self.kernel.validate()?;
        Ok(())
    }

    fn schedule(&self) -> Result<JTermSchedule> {
        match &self.jterm {
            Some(s) => JTermSchedule::new(s.deltas.clone(), s.times.clone(), s.res),
            None => Ok(JTermSchedule::standard(self.res)),
        }
    }
}

/// Per-coordinate or scalar normality diagnostics plus the chi-square
/// goodness-of-fit p-value of the Mahalanobis radii against the target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalityDiagnostics {
    /// Sample skewness per coordinate.
    pub skewness: Vec<f64>,
    /// Sample excess kurtosis per coordinate.
    pub excess_kurtosis: Vec<f64>,
    /// p-value of a 16-bin chi-square test of the squared Mahalanobis
    /// radii (computed against the theoretical target) against their
    /// chi-square law.
    pub chi_square_p: f64,
}

/// One sample size of a ULLN experiment: medians and 90th percentiles over
/// replications of the sup-errors over the `(t, x)` grid, plus per-`t`
/// slices of the same statistics with the sup taken over `x` only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UllnRecord {
    /// Sample size.
    pub n: usize,
    /// Median over replications of `sup_{t,x} |F_n - F_mu|`.
    pub sup_function_median: f64,
    /// 90th percentile of the same.
    pub sup_function_p90: f64,
    /// Median of `max_t |V_n - V_star|`.
    pub sup_value_median: f64,
    /// 90th percentile of the same.
    pub sup_value_p90: f64,
    /// Median of `max_t d(x_n, x_star)`; absent when the population
    /// objective is flat at some `t` (no unique mean to track).
    pub sup_mean_dist_median: Option<f64>,
    /// 90th percentile of the same.
    pub sup_mean_dist_p90: Option<f64>,
    /// Per-`t` breakdown of the sup-errors (sup over `x` only), in
    /// schedule order; the basis of the per-`(t, n)` plot series.
    pub per_time: Vec<UllnTimeSlice>,
    /// Operation that produced the population targets.
    pub target_source: String,
}

/// Sup-error summaries at one diffusion time of a ULLN experiment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UllnTimeSlice {
    /// Diffusion time.
    pub t: f64,
    /// Median over replications of `sup_x |F_n - F_mu|` at this `t`.
    pub sup_function_median: f64,
    /// 90th percentile of the same.
    pub sup_function_p90: f64,
    /// Median of `|V_n - V_star|`.
    pub value_error_median: f64,
    /// 90th percentile of the same.
    pub value_error_p90: f64,
    /// Median of `d(x_n, x_star)`; absent when the population objective
    /// is flat at this `t`.
    pub mean_dist_median: Option<f64>,
    /// 90th percentile of the same.
    pub mean_dist_p90: Option<f64>,
}

/// One `(t, n)` cell of a function-CLT experiment at fixed probe points.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionCltRecord {
    /// Diffusion time.
    pub t: f64,
    /// Sample size.
    pub n: usize,
    /// Probe points (canonical coordinates).
    pub probes: Vec<Vec<f64>>,
    /// Population values at the probes.
    pub f_mu: Vec<f64>,
    /// Theoretical covariance of the rescaled value vector, row-major.
    pub target: Vec<Vec<f64>>,
    /// Empirical covariance over replications, row-major.
    pub empirical: Vec<Vec<f64>>,
    /// `‖E − T‖_F / ‖T‖_F`.
    pub rel_frobenius: f64,
    /// PSD flag of the empirical matrix.
    pub empirical_psd: bool,
    /// PSD flag of the target matrix.
    pub target_psd: bool,
    /// Normality diagnostics of the rescaled vectors.
    pub normality: NormalityDiagnostics,
    /// Operation that produced the target.
    pub target_source: String,
}

/// One `(t, n)` cell of a variance-CLT experiment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VarianceCltRecord {
    /// Diffusion time.
    pub t: f64,
    /// Sample size.
    pub n: usize,
    /// Population minimizer.
    pub base: Vec<f64>,
    /// Population minimum value `V_star`.
    pub value_target: f64,
    /// Theoretical variance of `√n (V_n − V_star)`.
    pub sigma_var_target: f64,
    /// Empirical variance over replications.
    pub empirical_variance: f64,
    /// `|empirical / target − 1|`.
    pub rel_error: f64,
    /// Normality diagnostics of the rescaled scalar.
    pub normality: NormalityDiagnostics,
    /// Full-multistart audits that beat the warm start.
    pub audit_mismatches: usize,
    /// Warm starts that failed to converge and fell back to multistart.
    pub optimizer_fallbacks: usize,
    /// Operation that produced the target.
    pub target_source: String,
}

/// One `(t, n)` cell of a mean-CLT experiment.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanCltRecord {
    /// Diffusion time.
    pub t: f64,
    /// Sample size.
    pub n: usize,
    /// Population minimizer the fluctuations are logged at.
    pub base: Vec<f64>,
    /// Covariance target (`Σ_t`, or the J-corrected `Σ⁰` at `t = 0`),
    /// row-major.
    pub target: Vec<Vec<f64>>,
    /// At `t = 0` only: the naive target built with Hessian `2·I` and no
    /// cut-locus correction.
    pub naive_target: Option<Vec<Vec<f64>>>,
    /// Empirical covariance of `√n Log_{x⋆}(x_n)`, row-major.
    pub empirical: Vec<Vec<f64>>,
    /// `‖E − T‖_F / ‖T‖_F` against the corrected target.
    pub rel_frobenius: f64,
    /// `‖E − T‖_F` against the corrected target.
    pub frobenius_gap: f64,
    /// Same ratio against the naive target (`t = 0` only).
    pub rel_frobenius_naive: Option<f64>,
    /// Same gap against the naive target (`t = 0` only).
    pub frobenius_gap_naive: Option<f64>,
    /// PSD flag of the empirical matrix.
    pub empirical_psd: bool,
    /// PSD flag of the target matrix.
    pub target_psd: bool,
    /// Normality diagnostics of the rescaled log vectors.
    pub normality: NormalityDiagnostics,
    /// Replications whose minimizer fell on the cut locus of the base and
    /// were excluded (must be 0 in every shipped configuration).
    pub rejected: usize,
    /// Full-multistart audits that beat the warm start.
    pub audit_mismatches: usize,
    /// Warm starts that failed to converge and fell back to multistart.
    pub optimizer_fallbacks: usize,
    /// Operation that produced the target.
    pub target_source: String,
}

/// One record of an [`ExperimentReport`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RunRecord {
    /// ULLN sup-error summary at one sample size.
    Ulln(UllnRecord),
    /// Function CLT at one `(t, n)`.
    FunctionClt(FunctionCltRecord),
    /// Variance CLT at one `(t, n)`.
    VarianceClt(VarianceCltRecord),
    /// Mean CLT at one `(t, n)`.
    MeanClt(MeanCltRecord),
}

/// Outcome of one experiment run: per-cell records plus cross-`n` slope
/// fits.  Serialization is lossless and deterministic; the wall-clock
/// runtime is kept in memory for logs but excluded from serialization so
/// that reports are bitwise-reproducible functions of `(config, seed)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    /// Experiment kind: `ulln`, `clt_function`, `clt_variance`, `clt_mean`.
    pub kind: String,
    /// Seed the replication streams were keyed by.
    pub seed: u64,
    /// Number of replications.
    pub replications: usize,
    /// Per-(t, n) or per-n records, in schedule order.
    pub records: Vec<RunRecord>,
    /// Cross-`n` log-log slope fits (medians for ULLN, unscaled estimator
    /// variance for the mean CLT), keyed by statistic name.
    pub slopes: BTreeMap<String, f64>,
    /// Wall-clock runtime in seconds (not serialized).
    #[serde(skip)]
    pub runtime_seconds: f64,
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

/// Uniform-law-of-large-numbers experiment: per replication and sample
/// size, the sup over the `(t, x)` grid of `|F_n − F_mu|`, together with
/// `max_t |V_n − V_star|` and `max_t d(x_n, x_star)`; reported as per-`n`
/// medians and 90th percentiles with cross-`n` log-log slopes.
///
/// A flat population objective at any `t` (non-unique mean) disables
/// mean-distance tracking; function and value sup-errors are still run.
pub fn run_ulln(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(false)?;
    let start = Instant::now();
    let mfd = FlatTorus::new(cfg.density.dim())?;
    let xgrid = mfd.grid(cfg.audit_res)?;

    struct PopT {
        t: f64,
        fvals: Vec<f64>,
        v_star: f64,
        x_star: Option<Vec<f64>>,
    }
    let mut pops = Vec::with_capacity(cfg.t_list.len());
    for &t in &cfg.t_list {
        let f = VaradhanFunction::population(cfg.density.clone(), t, cfg.res, cfg.kernel)?;
        let fvals = xgrid
            .iter()
            .map(|x| f.eval(x))
            .collect::<Result<Vec<f64>>>()?;
        let mr = f.minimize(DEFAULT_START_RES)?;
        pops.push(PopT {
            t,
            fvals,
            v_star: mr.value,
            x_star: (!mr.flat).then_some(mr.minimizer),
        });
    }
    let track_means = pops.iter().all(|p| p.x_star.is_some());
    let n_max = *cfg.n_list.last().expect("n-list is non-empty");

    let pool = worker_pool(cfg.workers)?;
    // Per replication, per n, per t: (sup_x |F_n - F_mu|, |V_n - V_star|,
    // d(x_n, x_star)); the (t, x)-sup statistics are the maxima over t.
    type RepSups = Vec<Vec<(f64, f64, f64)>>;
    let per_rep: Vec<RepSups> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(cfg.seed, rep);
                let points = cfg.density.sample_with_rng(n_max, &mut rng);
                let mut out = Vec::with_capacity(cfg.n_list.len());
                for &n in &cfg.n_list {
                    let ss = SampleSet {
                        points: points[..n].to_vec(),
                        seed: cfg.seed,
                        provenance: format!("replication {rep}, first {n} draws"),
                    };
                    let mut slices = Vec::with_capacity(pops.len());
                    for pop in &pops {
                        let fe = VaradhanFunction::empirical(ss.clone(), pop.t, cfg.kernel)?;
                        let mut sup_f = 0.0f64;
                        for (x, &pv) in xgrid.iter().zip(&pop.fvals) {
                            sup_f = sup_f.max((fe.eval(x)? - pv).abs());
                        }
                        let (xn, vn) = if pop.t == 0.0 {
                            empirical_frechet_mean(&ss)?
                        } else {
                            let mr = fe.minimize(MIN_START_RES)?;
                            (mr.minimizer, mr.value)
                        };
                        let dist = match &pop.x_star {
                            Some(xs) => mfd.distance(&xn, xs)?,
                            None => 0.0,
                        };
                        slices.push((sup_f, (vn - pop.v_star).abs(), dist));
                    }
                    out.push(slices);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let target_source = format!(
        "population quadrature and multistart minimization (res = {}, start grid = {})",
        cfg.res, DEFAULT_START_RES
    );
    let mut records = Vec::with_capacity(cfg.n_list.len());
    let mut medians: Vec<(f64, f64, f64)> = Vec::with_capacity(cfg.n_list.len());
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let max_over_t = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
            sorted(per_rep.iter().map(|r| {
                r[i].iter().map(pick).fold(0.0f64, f64::max)
            }))
        };
        let fs = max_over_t(&|s| s.0);
        let vs = max_over_t(&|s| s.1);
        let ds = max_over_t(&|s| s.2);
        let per_time = pops
            .iter()
            .enumerate()
            .map(|(ti, pop)| {
                let fs_t = sorted(per_rep.iter().map(|r| r[i][ti].0));
                let vs_t = sorted(per_rep.iter().map(|r| r[i][ti].1));
                let ds_t = sorted(per_rep.iter().map(|r| r[i][ti].2));
                UllnTimeSlice {
                    t: pop.t,
                    sup_function_median: median(&fs_t),
                    sup_function_p90: percentile(&fs_t, 0.9),
                    value_error_median: median(&vs_t),
                    value_error_p90: percentile(&vs_t, 0.9),
                    mean_dist_median: pop.x_star.as_ref().map(|_| median(&ds_t)),
                    mean_dist_p90: pop.x_star.as_ref().map(|_| percentile(&ds_t, 0.9)),
                }
            })
            .collect();
        medians.push((median(&fs), median(&vs), median(&ds)));
        records.push(RunRecord::Ulln(UllnRecord {
            n,
            sup_function_median: median(&fs),
            sup_function_p90: percentile(&fs, 0.9),
            sup_value_median: median(&vs),
            sup_value_p90: percentile(&vs, 0.9),
            sup_mean_dist_median: track_means.then(|| median(&ds)),
            sup_mean_dist_p90: track_means.then(|| percentile(&ds, 0.9)),
            per_time,
            target_source: target_source.clone(),
        }));
    }

    let mut slopes = BTreeMap::new();
    if cfg.n_list.len() >= 2 {
        let ln_n: Vec<f64> = cfg.n_list.iter().map(|&n| (n as f64).ln()).collect();
        let mut fit = |name: &str, pick: &dyn Fn(&(f64, f64, f64)) -> f64| {
            if medians.iter().all(|m| pick(m) > 0.0) {
                let ys: Vec<f64> = medians.iter().map(|m| pick(m).ln()).collect();
                slopes.insert(name.to_string(), least_squares_slope(&ln_n, &ys));
            }
        };
        fit("sup_function", &|m| m.0);
        fit("sup_value", &|m| m.1);
        if track_means {
            fit("sup_mean_dist", &|m| m.2);
        }
    }

    Ok(ExperimentReport {
        kind: "ulln".into(),
        seed: cfg.seed,
        replications: cfg.replications,
        records,
        slopes,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Function CLT at fixed probe points: per `(t, n)`, the empirical
/// covariance over replications of `(√n (F_n(x_j) − F_mu(x_j)))_j` is
/// compared against the quadrature covariance
/// `E[𝐅_x(Ξ) 𝐅_y(Ξ)] − F_mu(x) F_mu(y)`.
pub fn run_clt_function(
    cfg: &ExperimentConfig,
    probe_points: &[Vec<f64>],
) -> Result<ExperimentReport> {
    cfg.validate(true)?;
    if probe_points.is_empty() {
        return Err(Error::InvalidInput("need at least one probe point".into()));
    }
    let start = Instant::now();
    let mfd = FlatTorus::new(cfg.density.dim())?;
    let probes = probe_points
        .iter()
        .map(|x| mfd.canonicalize(x))
        .collect::<Result<Vec<_>>>()?;
    let p = probes.len();

    struct PopT {
        t: f64,
        f_mu: Vec<f64>,
        target: DMatrix<f64>,
    }
    let mut pops = Vec::with_capacity(cfg.t_list.len());
    for &t in &cfg.t_list {
        let f = VaradhanFunction::population(cfg.density.clone(), t, cfg.res, cfg.kernel)?;
        let f_mu = probes
            .iter()
            .map(|x| f.eval(x))
            .collect::<Result<Vec<f64>>>()?;
        let target = function_cov_target(&cfg.density, &probes, &f_mu, t, cfg.res, &cfg.kernel)?;
        pops.push(PopT { t, f_mu, target });
    }
    let n_max = *cfg.n_list.last().expect("n-list is non-empty");

    let pool = worker_pool(cfg.workers)?;
    let per_rep: Vec<Vec<Vec<f64>>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(cfg.seed, rep);
                let points = cfg.density.sample_with_rng(n_max, &mut rng);
                let mut out = Vec::with_capacity(pops.len() * cfg.n_list.len());
                for pop in &pops {
                    for &n in &cfg.n_list {
                        let ss = SampleSet {
                            points: points[..n].to_vec(),
                            seed: cfg.seed,
                            provenance: format!("replication {rep}, first {n} draws"),
                        };
                        let fe = VaradhanFunction::empirical(ss, pop.t, cfg.kernel)?;
                        let mut z = Vec::with_capacity(p);
                        for (x, &fm) in probes.iter().zip(&pop.f_mu) {
                            z.push((n as f64).sqrt() * (fe.eval(x)? - fm));
                        }
                        out.push(z);
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    for (ti, pop) in pops.iter().enumerate() {
        for (ni, &n) in cfg.n_list.iter().enumerate() {
            let cell = ti * cfg.n_list.len() + ni;
            let rows: Vec<&[f64]> = per_rep.iter().map(|r| r[cell].as_slice()).collect();
            let empirical = sample_covariance(&rows)?;
            let cmp = covariance_compare(&empirical, &pop.target)?;
            let normality = diagnostics(&rows, &pop.target)?;
            records.push(RunRecord::FunctionClt(FunctionCltRecord {
                t: pop.t,
                n,
                probes: probes.clone(),
                f_mu: pop.f_mu.clone(),
                target: matrix_rows(&pop.target),
                empirical: matrix_rows(&empirical),
                rel_frobenius: cmp.rel_frobenius,
                empirical_psd: cmp.empirical_psd,
                target_psd: cmp.target_psd,
                normality,
                target_source: format!(
                    "per-sample cost covariance by quadrature (t = {}, res = {})",
                    pop.t, cfg.res
                ),
            }));
        }
    }

    Ok(ExperimentReport {
        kind: "clt_function".into(),
        seed: cfg.seed,
        replications: cfg.replications,
        records,
        slopes: BTreeMap::new(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Variance CLT: per `(t, n)`, the empirical variance over replications of
/// `√n (V_n − V_star)` is compared against the quadrature variance of the
/// per-sample cost at the population minimizer.
///
/// A flat population objective is a hypothesis violation: there is no
/// unique minimizer to anchor the theorem at.
pub fn run_clt_variance(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(true)?;
    let start = Instant::now();

    struct PopT {
        t: f64,
        x_star: Vec<f64>,
        v_star: f64,
        target: f64,
    }
    let mut pops = Vec::with_capacity(cfg.t_list.len());
    for &t in &cfg.t_list {
        let f = VaradhanFunction::population(cfg.density.clone(), t, cfg.res, cfg.kernel)?;
        let mr = f.minimize(DEFAULT_START_RES)?;
        if mr.flat {
            return Err(Error::HypothesisViolation(format!(
                "objective is flat at t = {t} (grid spread {:.3e}): variance CLT needs a unique mean",
                mr.grid_spread
            )));
        }
        let target = sigma_var(&cfg.density, t, cfg.res, &cfg.kernel)?;
        pops.push(PopT {
            t,
            x_star: mr.minimizer,
            v_star: mr.value,
            target,
        });
    }
    let n_max = *cfg.n_list.last().expect("n-list is non-empty");

    let pool = worker_pool(cfg.workers)?;
    let per_rep: Vec<Vec<(f64, bool, bool)>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(cfg.seed, rep);
                let points = cfg.density.sample_with_rng(n_max, &mut rng);
                let mut out = Vec::with_capacity(pops.len() * cfg.n_list.len());
                for pop in &pops {
                    for &n in &cfg.n_list {
                        let ss = SampleSet {
                            points: points[..n].to_vec(),
                            seed: cfg.seed,
                            provenance: format!("replication {rep}, first {n} draws"),
                        };
                        let ((_, vn), mismatch, fallback) =
                            empirical_minimum(&ss, pop.t, &pop.x_star, rep, cfg)?;
                        out.push(((n as f64).sqrt() * (vn - pop.v_star), mismatch, fallback));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    for (ti, pop) in pops.iter().enumerate() {
        for (ni, &n) in cfg.n_list.iter().enumerate() {
            let cell = ti * cfg.n_list.len() + ni;
            let zs: Vec<f64> = per_rep.iter().map(|r| r[cell].0).collect();
            let rows: Vec<&[f64]> = per_rep.iter().map(|r| std::slice::from_ref(&r[cell].0)).collect();
            let empirical = sample_covariance(&rows)?[(0, 0)];
            let target1 = DMatrix::from_element(1, 1, pop.target);
            records.push(RunRecord::VarianceClt(VarianceCltRecord {
                t: pop.t,
                n,
                base: pop.x_star.clone(),
                value_target: pop.v_star,
                sigma_var_target: pop.target,
                empirical_variance: empirical,
                rel_error: (empirical / pop.target - 1.0).abs(),
                normality: diagnostics(
                    &zs.iter().map(std::slice::from_ref).collect::<Vec<_>>(),
                    &target1,
                )?,
                audit_mismatches: per_rep.iter().filter(|r| r[cell].1).count(),
                optimizer_fallbacks: per_rep.iter().filter(|r| r[cell].2).count(),
                target_source: format!("value-estimator variance by quadrature (t = {}, res = {})", pop.t, cfg.res),
            }));
        }
    }

    Ok(ExperimentReport {
        kind: "clt_variance".into(),
        seed: cfg.seed,
        replications: cfg.replications,
        records,
        slopes: BTreeMap::new(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean CLT: per `(t, n)`, each replication minimizes the empirical
/// objective (exactly at `t = 0`, warm-started with a periodic full
/// multistart audit at `t > 0`) and records `√n · Log_{x⋆}(x_n)`; the
/// empirical covariance is compared against `Σ_t` (or the J-corrected `Σ⁰`
/// at `t = 0`, alongside the naive uncorrected target).
///
/// Replications whose minimizer falls on the cut locus of the base are
/// excluded and counted in `rejected`; the count must be 0 for every
/// shipped configuration.
pub fn run_clt_mean(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate(true)?;
    let start = Instant::now();
    let mfd = FlatTorus::new(cfg.density.dim())?;

    struct PopT {
        t: f64,
        x_star: Vec<f64>,
        target: DMatrix<f64>,
        naive: Option<DMatrix<f64>>,
        source: String,
    }
    let mut pops = Vec::with_capacity(cfg.t_list.len());
    for &t in &cfg.t_list {
        let (report, naive, source) = if t > 0.0 {
            let r = sigma_t(&cfg.density, t, cfg.res, &cfg.kernel)?;
            let src = format!("sandwich covariance by quadrature (t = {t}, res = {})", cfg.res);
            (r, None, src)
        } else {
            let sched = cfg.schedule()?;
            let r = sigma_zero(&cfg.density, &sched, &cfg.kernel)?;
            let naive = &r.score_cov * 0.25;
            let src = "limit covariance with cut-locus-corrected Hessian".to_string();
            (r, Some(naive), src)
        };
        pops.push(PopT {
            t,
            x_star: report.base.clone(),
            target: report.sigma_t.clone(),
            naive,
            source,
        });
    }
    let n_max = *cfg.n_list.last().expect("n-list is non-empty");

    let pool = worker_pool(cfg.workers)?;
    #[allow(clippy::type_complexity)]
    let per_rep: Vec<Vec<(Option<Vec<f64>>, bool, bool)>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(cfg.seed, rep);
                let points = cfg.density.sample_with_rng(n_max, &mut rng);
                let mut out = Vec::with_capacity(pops.len() * cfg.n_list.len());
                for pop in &pops {
                    for &n in &cfg.n_list {
                        let ss = SampleSet {
                            points: points[..n].to_vec(),
                            seed: cfg.seed,
                            provenance: format!("replication {rep}, first {n} draws"),
                        };
                        let ((xn, _), mismatch, fallback) =
                            empirical_minimum(&ss, pop.t, &pop.x_star, rep, cfg)?;
                        let z = match mfd.log(&pop.x_star, &xn) {
                            Ok(log) => {
                                Some(log.iter().map(|&l| (n as f64).sqrt() * l).collect())
                            }
                            Err(Error::CutLocus { .. }) => None,
                            Err(e) => return Err(e),
                        };
                        out.push((z, mismatch, fallback));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    let mut slopes = BTreeMap::new();
    for (ti, pop) in pops.iter().enumerate() {
        let mut unscaled_vars = Vec::with_capacity(cfg.n_list.len());
        for (ni, &n) in cfg.n_list.iter().enumerate() {
            let cell = ti * cfg.n_list.len() + ni;
            let accepted: Vec<&[f64]> = per_rep
                .iter()
                .filter_map(|r| r[cell].0.as_deref())
                .collect();
            let rejected = cfg.replications - accepted.len();
            let empirical = sample_covariance(&accepted)?;
            let cmp = covariance_compare(&empirical, &pop.target)?;
            let gap = frobenius_gap(&empirical, &pop.target);
            let (rel_naive, gap_naive) = match &pop.naive {
                Some(nv) => (
                    Some(covariance_compare(&empirical, nv)?.rel_frobenius),
                    Some(frobenius_gap(&empirical, nv)),
                ),
                None => (None, None),
            };
            let normality = diagnostics(&accepted, &pop.target)?;
            unscaled_vars.push(empirical.trace() / n as f64);
            records.push(RunRecord::MeanClt(MeanCltRecord {
                t: pop.t,
                n,
                base: pop.x_star.clone(),
                target: matrix_rows(&pop.target),
                naive_target: pop.naive.as_ref().map(matrix_rows),
                empirical: matrix_rows(&empirical),
                rel_frobenius: cmp.rel_frobenius,
                frobenius_gap: gap,
                rel_frobenius_naive: rel_naive,
                frobenius_gap_naive: gap_naive,
                empirical_psd: cmp.empirical_psd,
                target_psd: cmp.target_psd,
                normality,
                rejected,
                audit_mismatches: per_rep.iter().filter(|r| r[cell].1).count(),
                optimizer_fallbacks: per_rep.iter().filter(|r| r[cell].2).count(),
                target_source: pop.source.clone(),
            }));
        }
        if cfg.n_list.len() >= 2 && unscaled_vars.iter().all(|&v| v > 0.0) {
            let ln_n: Vec<f64> = cfg.n_list.iter().map(|&n| (n as f64).ln()).collect();
            let ys: Vec<f64> = unscaled_vars.iter().map(|&v| v.ln()).collect();
            slopes.insert(
                format!("mean_variance_decay_t_{}", pop.t),
                least_squares_slope(&ln_n, &ys),
            );
        }
    }

    Ok(ExperimentReport {
        kind: "clt_mean".into(),
        seed: cfg.seed,
        replications: cfg.replications,
        records,
        slopes,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------------------
// Shared machinery
// ---------------------------------------------------------------------------

/// RNG for one replication: stream `rep` of the global seed, independent
/// of worker scheduling.
fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool construction failed: {e}")))
}

/// One replication's minimization: exact per-axis enumeration at `t = 0`;
/// at `t > 0` a warm start at the population minimizer, with a full
/// multistart fallback when the warm start fails to converge and a full
/// multistart audit every [`AUDIT_STRIDE`]-th replication.  Returns
/// `((point, value), audit_mismatch, fallback)`.
fn empirical_minimum(
    ss: &SampleSet,
    t: f64,
    warm: &[f64],
    rep: usize,
    cfg: &ExperimentConfig,
) -> Result<((Vec<f64>, f64), bool, bool)> {
    if t == 0.0 {
        return Ok((empirical_frechet_mean(ss)?, false, false));
    }
    let fe = VaradhanFunction::empirical(ss.clone(), t, cfg.kernel)?;
    let rec = fe.local_minimize(warm)?;
    let (mut x, mut v) = (rec.point, rec.value);
    let mut fallback = false;
    if !rec.converged {
        let mr = fe.minimize(cfg.audit_res)?;
        x = mr.minimizer;
        v = mr.value;
        fallback = true;
    }
    let mut mismatch = false;
    if rep.is_multiple_of(AUDIT_STRIDE) {
        let mr = fe.minimize(cfg.audit_res)?;
        if mr.value < v - AUDIT_VTOL {
            mismatch = true;
            x = mr.minimizer;
            v = mr.value;
        }
    }
    Ok(((x, v), mismatch, fallback))
}

/// Quadrature covariance of the per-sample cost vector at the probes:
/// `T_{jk} = E[𝐅_{x_j}(Ξ) 𝐅_{x_k}(Ξ)] − F_mu(x_j) F_mu(x_k)`.
///
/// Costs separate across axes, so per mixture component the second moment
/// is a sum of same-axis bivariate moments plus products of single-axis
/// means; the result is exactly symmetric by construction.
fn function_cov_target(
    d: &Density,
    probes: &[Vec<f64>],
    f_mu: &[f64],
    t: f64,
    res: usize,
    cfg: &KernelConfig,
) -> Result<DMatrix<f64>> {
    let m = d.dim();
    let p = probes.len();
    let ax = if t > 0.0 {
        Some(AxisCost::new(t, cfg)?)
    } else {
        None
    };
    let cost = |u: f64| match &ax {
        Some(ax) => ax.cost(u),
        None => u * u,
    };
    let mut e_ff = DMatrix::zeros(p, p);
    for (wc, prod) in d.components() {
        let mut m1 = vec![vec![0.0; m]; p];
        for (j, probe) in probes.iter().enumerate() {
            for (a, factor) in prod.factors().iter().enumerate() {
                m1[j][a] = factor_moment(factor, probe[a], t, res, None, |s| cost(-s))?;
            }
        }
        for j in 0..p {
            for k in j..p {
                let mut sum = 0.0;
                for (a, factor) in prod.factors().iter().enumerate() {
                    let d_jk = wrap_delta(probes[k][a] - probes[j][a]);
                    sum += factor_moment(factor, probes[j][a], t, res, None, |s| {
                        cost(-s) * cost(wrap_delta(d_jk - s))
                    })?;
                    for b in 0..m {
                        if b != a {
                            sum += m1[j][a] * m1[k][b];
                        }
                    }
                }
                e_ff[(j, k)] += wc * sum;
                if k > j {
                    e_ff[(k, j)] += wc * sum;
                }
            }
        }
    }
    for j in 0..p {
        for k in 0..p {
            e_ff[(j, k)] -= f_mu[j] * f_mu[k];
        }
    }
    Ok(e_ff)
}

/// Sample covariance (mean-subtracted, divided by `L − 1`) of row vectors,
/// accumulated in replication order with compensated summation; exactly
/// symmetric by construction.
fn sample_covariance(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let l = rows.len();
    if l < 2 {
        return Err(Error::Numerical(format!(
            "need at least 2 accepted replications for a covariance, got {l}"
        )));
    }
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    for (j, mj) in mean.iter_mut().enumerate() {
        let mut acc = Accumulator::new();
        for row in rows {
            acc.add(row[j]);
        }
        *mj = acc.total() / l as f64;
    }
    let mut cov = DMatrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let mut acc = Accumulator::new();
            for row in rows {
                acc.add((row[j] - mean[j]) * (row[k] - mean[k]));
            }
            let v = acc.total() / (l - 1) as f64;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }
    Ok(cov)
}

fn frobenius_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect())
        .collect()
}

/// Normality diagnostics: per-coordinate sample skewness and excess
/// kurtosis, plus the chi-square p-value of the squared Mahalanobis radii
/// `zᵀ T⁻¹ z` against their chi-square law with `dim` degrees of freedom.
fn diagnostics(rows: &[&[f64]], target: &DMatrix<f64>) -> Result<NormalityDiagnostics> {
    let p = target.nrows();
    let mut skewness = Vec::with_capacity(p);
    let mut excess_kurtosis = Vec::with_capacity(p);
    for j in 0..p {
        let xs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (g1, g2) = skew_kurt(&xs);
        skewness.push(g1);
        excess_kurtosis.push(g2);
    }
    let inv = target.clone().try_inverse().ok_or_else(|| {
        Error::Numerical("covariance target is singular; Mahalanobis radii undefined".into())
    })?;
    let radii: Vec<f64> = rows
        .iter()
        .map(|z| {
            let mut q = 0.0;
            for j in 0..p {
                for k in 0..p {
                    q += z[j] * inv[(j, k)] * z[k];
                }
            }
            q
        })
        .collect();
    Ok(NormalityDiagnostics {
        skewness,
        excess_kurtosis,
        chi_square_p: chi_square_gof(&radii, p)?,
    })
}

/// Sample skewness and excess kurtosis; `(0, 0)` for degenerate samples.
fn skew_kurt(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut acc = Accumulator::new();
    for &x in xs {
        acc.add(x);
    }
    let mean = acc.total() / n;
    let mut m2 = Accumulator::new();
    let mut m3 = Accumulator::new();
    let mut m4 = Accumulator::new();
    for &x in xs {
        let d = x - mean;
        m2.add(d * d);
        m3.add(d * d * d);
        m4.add(d * d * d * d);
    }
    let m2 = m2.total() / n;
    if m2 <= 0.0 {
        return (0.0, 0.0);
    }
    let m3 = m3.total() / n;
    let m4 = m4.total() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Pearson chi-square goodness of fit of `radii` against the chi-square
/// distribution with `df` degrees of freedom, using [`GOF_BINS`]
/// equiprobable bins; returns the p-value.
fn chi_square_gof(radii: &[f64], df: usize) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::Numerical("no radii for the goodness-of-fit test".into()));
    }
    let law = ChiSquared::new(df as f64)
        .map_err(|e| Error::Numerical(format!("chi-square law: {e}")))?;
    let mut counts = [0usize; GOF_BINS];
    for &r in radii {
        let u = law.cdf(r);
        let bin = ((u * GOF_BINS as f64).floor() as usize).min(GOF_BINS - 1);
        counts[bin] += 1;
    }
    let expected = radii.len() as f64 / GOF_BINS as f64;
    let q: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let reference = ChiSquared::new((GOF_BINS - 1) as f64)
        .map_err(|e| Error::Numerical(format!("chi-square reference law: {e}")))?;
    Ok(1.0 - reference.cdf(q))
}

fn sorted<I: Iterator<Item = f64>>(xs: I) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Median of a sorted slice (mean of the middle pair for even lengths).
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank percentile of a sorted slice, `q` in (0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
