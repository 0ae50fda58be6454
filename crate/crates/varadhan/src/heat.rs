//! Heat kernel on flat tori and the smoothed squared-distance cost.
//!
//! The heat kernel on the circle of circumference 2π is the periodic
//! Gaussian `K(t,θ) = (2πt)^{-1/2} Σ_n exp(-(θ + 2πn)²/(2t))`, and on `T^m`
//! it is the product of the per-axis kernels.  The central object built on
//! top of it is the cost
//!
//! ```text
//! F_t(x, y) = -2t · log K(t, x, y),      F_0(x, y) = d(x, y)²
//! ```
//!
//! which converges to the squared geodesic distance as `t ↓ 0` and is smooth
//! in `x` for every `t > 0`.  This module evaluates `F_t` together with its
//! analytic spatial gradient and Hessian from the exact truncated image
//! series.  All exponentials are anchored at the minimal image so no large
//! positive argument is ever exponentiated; per axis
//!
//! ```text
//! F_t = t·log(2πt) + Δ̂² - 2t · log Σ_n exp(-((Δ̂+2πn)² - Δ̂²)/(2t))
//! ```
//!
//! with `Δ̂ = wrap(x_k - y_k) ∈ (-π, π]` the minimal representative, so the
//! anchored sum is at least 1.  Writing `w_n` for the softmax weights
//! `w_n ∝ exp(-u_n²/(2t))` over images `u_n = Δ̂ + 2πn`,
//!
//! ```text
//! ∂F/∂x_k   = 2 Σ_n w_n u_n           (the image-weighted mean)
//! ∂²F/∂x_k² = 2 - (2/t) · Var_w(u)    (the image-weighted variance)
//! ```
//!
//! and all mixed second derivatives vanish by separability.  The familiar
//! closed forms `-2θ + 2π·tanh(πθ/t)` and `2 - (2π²/t)·sech²(πθ/t)` near the
//! cut are the two-image specializations of these formulas; tests use them
//! as oracles where their own error is provably below tolerance, while the
//! implementation always evaluates the exact truncated series.
//!
//! At `t = 0` only the value branch exists: the squared distance.  Its
//! one-sided derivative limits are the business of the asymptotics layer.

use crate::error::{Error, Result};
use crate::manifold::{FlatTorus, TWO_PI};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Truncation policy for the periodic image series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Relative truncation tolerance for the image tail (dimensionless).
    pub trunc_eps: f64,
    /// Hard cap on the images kept per axis and per side.
    pub max_images: usize,
}

impl Default for KernelConfig {
    /// `trunc_eps = 1e-14`, `max_images = 64`.  For `t <= 10` on period 2π
    /// at most six images per side are ever needed; the cap only guards
    /// pathological configurations.
    fn default() -> Self {
        KernelConfig {
            trunc_eps: 1e-14,
            max_images: 64,
        }
    }
}

impl KernelConfig {
    /// Check the documented invariants: `0 < trunc_eps <= 1e-6` and
    /// `max_images >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.trunc_eps > 0.0 && self.trunc_eps <= 1e-6) {
            return Err(Error::InvalidInput(format!(
                "trunc_eps must lie in (0, 1e-6], got {}",
                self.trunc_eps
            )));
        }
        if self.max_images == 0 {
            return Err(Error::InvalidInput(
                "max_images must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Value, gradient, and Hessian of `x ↦ F_t(x, y)` at one point.
#[derive(Debug, Clone)]
pub struct CostEval {
    /// `F_t(x, y)` in squared radians.
    pub value: f64,
    /// Gradient in `x`, one component per axis.
    pub grad: Vec<f64>,
    /// Hessian in `x`: exactly diagonal in product coordinates.
    pub hess: DMatrix<f64>,
}

/// Number of images per side needed so the discarded tail is negligible.
///
/// Returns the smallest `N >= 1` with `exp(-(2πN - π)²/(2t)) < eps`, capped
/// at `max_images`.  The quantity `(2πN - π)` is the smallest possible
/// magnitude of the outermost *kept* image over all separations, so once its
/// Gaussian weight is below `eps` the first discarded image is smaller still
/// relative to the anchored `n = 0` term (which is always 1): the condition
/// guarantees a relative tail error below `m·eps` for the product kernel on
/// `T^m`, worst case at antipodal separation.
pub fn truncation_order(t: f64, eps: f64, max_images: usize) -> Result<usize> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "truncation_order requires t > 0, got {t}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!(
            "truncation tolerance must lie in (0, 1), got {eps}"
        )));
    }
    if max_images == 0 {
        return Err(Error::InvalidInput(
            "max_images must be at least 1".into(),
        ));
    }
    let mut n = 1usize;
    while n < max_images {
        let edge = TWO_PI * n as f64 - std::f64::consts::PI;
        if (-(edge * edge) / (2.0 * t)).exp() < eps {
            break;
        }
        n += 1;
    }
    Ok(n)
}

/// Per-axis cost/gradient/Hessian contributions for one coordinate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisEval {
    pub cost: f64,
    pub grad: f64,
    pub hess: f64,
}

/// Reusable per-axis evaluator for a fixed diffusion time.
///
/// Precomputes the truncation order and normalization so hot loops
/// (quadrature nodes, Monte Carlo replications) do not redo that work per
/// evaluation.  All accumulations pair the `+n` and `-n` images so results
/// are bitwise symmetric under `Δ̂ → -Δ̂`, which makes the kernel exactly
/// symmetric in its two points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisCost {
    t: f64,
    inv_2t: f64,
    /// `t · log(2πt)`, the per-axis normalization of the cost.
    norm: f64,
    /// Images kept per side.
    n_images: usize,
}

impl AxisCost {
    pub fn new(t: f64, cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        let n_images = truncation_order(t, cfg.trunc_eps, cfg.max_images)?;
        Ok(AxisCost {
            t,
            inv_2t: 1.0 / (2.0 * t),
            norm: t * (TWO_PI * t).ln(),
            n_images,
        })
    }

    /// Cost contribution of one axis with wrapped separation `dxy = x - y`.
    pub fn cost(&self, dxy: f64) -> f64 {
        let u0sq = dxy * dxy;
        let mut s = 1.0;
        for k in 1..=self.n_images {
            let off = TWO_PI * k as f64;
            let up = dxy + off;
            let um = dxy - off;
            s += (-(up * up - u0sq) * self.inv_2t).exp()
                + (-(um * um - u0sq) * self.inv_2t).exp();
        }
        self.norm + u0sq - 2.0 * self.t * s.ln()
    }

    /// Cost, gradient, and second derivative of one axis in a single pass.
    pub fn eval(&self, dxy: f64) -> AxisEval {
        let u0sq = dxy * dxy;
        let mut s = 1.0;
        let mut m1 = dxy;
        let mut m2 = u0sq;
        for k in 1..=self.n_images {
            let off = TWO_PI * k as f64;
            let up = dxy + off;
            let um = dxy - off;
            let ep = (-(up * up - u0sq) * self.inv_2t).exp();
            let em = (-(um * um - u0sq) * self.inv_2t).exp();
            s += ep + em;
            m1 += ep * up + em * um;
            m2 += ep * up * up + em * um * um;
        }
        let mean = m1 / s;
        // Non-central moments cancel benignly here: the clamped variance is
        // accurate to ~eps·π², far inside every tolerance this crate uses.
        let var = (m2 / s - mean * mean).max(0.0);
        AxisEval {
            cost: self.norm + u0sq - 2.0 * self.t * s.ln(),
            grad: 2.0 * mean,
            hess: 2.0 - 2.0 * var / self.t,
        }
    }
}

fn check_positive_time(t: f64, op: &str) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("{op} requires t > 0, got {t}")));
    }
    Ok(())
}

/// Heat kernel `K(t, x, y)` on `T^m` (per unit volume).
///
/// Strictly positive and exactly symmetric in `x` and `y`; factorizes over
/// axes.  Requires `t > 0`.
pub fn kernel(mfd: &FlatTorus, t: f64, x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    check_positive_time(t, "kernel")?;
    let c = cost(mfd, t, x, y, cfg)?;
    Ok((-c / (2.0 * t)).exp())
}

/// Smoothed squared distance `F_t(x, y) = -2t log K(t, x, y)`, with the hard
/// branch `F_0 = d(x, y)²` at `t = 0`.  Requires `t >= 0`.
pub fn cost(mfd: &FlatTorus, t: f64, x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("cost requires t >= 0, got {t}")));
    }
    if t == 0.0 {
        return mfd.distance_squared(x, y);
    }
    let ax = AxisCost::new(t, cfg)?;
    let d = mfd.delta(y, x)?; // wrapped x - y per axis
    Ok(d.iter().map(|&dxy| ax.cost(dxy)).sum())
}

/// Gradient of `x ↦ F_t(x, y)` at `x`.  Requires `t > 0`.
pub fn grad_x(
    mfd: &FlatTorus,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &KernelConfig,
) -> Result<Vec<f64>> {
    check_positive_time(t, "grad_x")?;
    let ax = AxisCost::new(t, cfg)?;
    let d = mfd.delta(y, x)?;
    Ok(d.iter().map(|&dxy| ax.eval(dxy).grad).collect())
}

/// Hessian of `x ↦ F_t(x, y)` at `x`: diagonal by separability.  Requires
/// `t > 0`.
pub fn hess_x(
    mfd: &FlatTorus,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &KernelConfig,
) -> Result<DMatrix<f64>> {
    check_positive_time(t, "hess_x")?;
    let ax = AxisCost::new(t, cfg)?;
    let d = mfd.delta(y, x)?;
    let m = mfd.dim();
    let mut h = DMatrix::zeros(m, m);
    for (k, &dxy) in d.iter().enumerate() {
        h[(k, k)] = ax.eval(dxy).hess;
    }
    Ok(h)
}

/// Value, gradient, and Hessian of `x ↦ F_t(x, y)` in one pass.
/// Requires `t > 0` (at `t = 0` only the value exists; use [`cost`]).
pub fn cost_eval(
    mfd: &FlatTorus,
    t: f64,
    x: &[f64],
    y: &[f64],
    cfg: &KernelConfig,
) -> Result<CostEval> {
    check_positive_time(t, "cost_eval")?;
    let ax = AxisCost::new(t, cfg)?;
    let d = mfd.delta(y, x)?;
    let m = mfd.dim();
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(m);
    let mut hess = DMatrix::zeros(m, m);
    for (k, &dxy) in d.iter().enumerate() {
        let e = ax.eval(dxy);
        value += e.cost;
        grad.push(e.grad);
        hess[(k, k)] = e.hess;
    }
    Ok(CostEval { value, grad, hess })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::PI;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> KernelConfig {
        KernelConfig::default()
    }

    #[test]
    fn truncation_order_reference_points() {
        assert_eq!(truncation_order(0.5, 1e-12, 64).unwrap(), 2);
        assert_eq!(truncation_order(0.01, 1e-12, 64).unwrap(), 1);
        let n10 = truncation_order(10.0, 1e-12, 64).unwrap();
        assert_eq!(n10, 5);
        // Incremental-sum oracle: adding 20 further images beyond the chosen
        // order changes the worst-case (antipodal) anchored sum by < eps.
        let sum_to = |n: usize| -> f64 {
            let mut s = 0.0;
            for k in -(n as i64)..=(n as i64) {
                let u = PI + TWO_PI * k as f64;
                s += (-(u * u - PI * PI) / 20.0).exp();
            }
            s
        };
        let rel = (sum_to(n10 + 20) - sum_to(n10)) / sum_to(n10);
        assert!(rel < 1e-12, "tail {rel} not below tolerance");
    }

    #[test]
    fn truncation_order_validates_inputs() {
        assert!(truncation_order(0.0, 1e-12, 64).is_err());
        assert!(truncation_order(-1.0, 1e-12, 64).is_err());
        assert!(truncation_order(1.0, 0.0, 64).is_err());
        assert!(truncation_order(1.0, 1.0, 64).is_err());
        assert!(truncation_order(1.0, 1e-12, 0).is_err());
        // Cap engages for huge t.
        assert_eq!(truncation_order(1e9, 1e-12, 8).unwrap(), 8);
    }

    #[test]
    fn kernel_at_coincident_points() {
        let t = FlatTorus::new(1).unwrap();
        let k = kernel(&t, 0.5, &[1.3], &[1.3], &cfg()).unwrap();
        // 1/sqrt(pi); image corrections are below 1e-17 at t = 0.5.
        assert_abs_diff_eq!(k, 0.564_189_583_547_756_3, epsilon = 1e-6);
    }

    #[test]
    fn kernel_conserves_probability() {
        let t1 = FlatTorus::new(1).unwrap();
        let res = 2048;
        for &t in &[0.1, 1.0] {
            let mut total = 0.0;
            for j in 0..res {
                let y = TWO_PI * j as f64 / res as f64;
                total += kernel(&t1, t, &[0.0], &[y], &cfg()).unwrap();
            }
            total *= TWO_PI / res as f64;
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn kernel_factorizes_over_axes() {
        let t2 = FlatTorus::new(2).unwrap();
        let t1 = FlatTorus::new(1).unwrap();
        let x = [0.7, 4.0];
        let y = [2.0, 5.9];
        let k2 = kernel(&t2, 0.3, &x, &y, &cfg()).unwrap();
        let ka = kernel(&t1, 0.3, &[x[0]], &[y[0]], &cfg()).unwrap();
        let kb = kernel(&t1, 0.3, &[x[1]], &[y[1]], &cfg()).unwrap();
        assert_relative_eq!(k2, ka * kb, max_relative = 1e-14);
    }

    #[test]
    fn kernel_exactly_symmetric() {
        let t2 = FlatTorus::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t = rng.gen_range(0.01..2.0);
            let x = [rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)];
            let y = [rng.gen_range(0.0..TWO_PI), rng.gen_range(0.0..TWO_PI)];
            let a = kernel(&t2, t, &x, &y, &cfg()).unwrap();
            let b = kernel(&t2, t, &y, &x, &cfg()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "kernel not bitwise symmetric");
        }
    }

    #[test]
    fn cost_at_time_zero_is_squared_distance() {
        let t1 = FlatTorus::new(1).unwrap();
        let c = cost(&t1, 0.0, &[0.0], &[PI], &cfg()).unwrap();
        assert_abs_diff_eq!(c, PI * PI, epsilon = 1e-14);
    }

    #[test]
    fn cost_antipodal_small_time() {
        let t1 = FlatTorus::new(1).unwrap();
        let c = cost(&t1, 0.01, &[0.0], &[PI], &cfg()).unwrap();
        // Frozen from an independent high-precision evaluation of the series.
        assert_abs_diff_eq!(c, 9.828_068_526_282_372, epsilon = 1e-10);
        // Two-image closed form t·log(πt/2) + π².
        let closed = 0.01 * (PI * 0.01 / 2.0).ln() + PI * PI;
        assert_abs_diff_eq!(c, closed, epsilon = 1e-4);
    }

    #[test]
    fn cost_converges_to_squared_distance() {
        // Away from the cut the gap is t·|log 2πt| + o(t), which peaks at
        // t = 1/(2πe) ≈ 0.059: it is small and vanishing but not strictly
        // monotone through that interior maximum, so the assertion compares
        // the small-t end against both larger times.
        let t1 = FlatTorus::new(1).unwrap();
        let gap = |t: f64| (cost(&t1, t, &[0.0], &[1.0], &cfg()).unwrap() - 1.0).abs();
        let (g1, g2, g3) = (gap(0.1), gap(0.05), gap(0.01));
        assert!(g1 < 0.3 && g2 < 0.3 && g3 < 0.3);
        assert!(g3 < g2 && g3 < g1, "gap must shrink towards t = 0");
    }

    #[test]
    fn varadhan_uniform_convergence_on_grid() {
        let t1 = FlatTorus::new(1).unwrap();
        let grid: Vec<f64> = (0..64).map(|j| TWO_PI * j as f64 / 64.0).collect();
        let mut last = f64::INFINITY;
        for &t in &[0.2, 0.1, 0.05, 0.01] {
            let mut worst = 0.0f64;
            for &x in &grid {
                for &y in &grid {
                    let c = cost(&t1, t, &[x], &[y], &cfg()).unwrap();
                    let d2 = t1.distance_squared(&[x], &[y]).unwrap();
                    worst = worst.max((c - d2).abs());
                }
            }
            assert!(worst < last, "sup gap must decrease along the schedule");
            last = worst;
        }
        assert!(last < 0.35, "sup gap {last} at t = 0.01 too large");
    }

    #[test]
    fn grad_vanishes_at_exact_antipode() {
        let t1 = FlatTorus::new(1).unwrap();
        for &t in &[0.01, 0.1, 1.0] {
            let g = grad_x(&t1, t, &[0.0], &[PI], &cfg()).unwrap();
            assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn grad_matches_two_image_closed_form_past_cut() {
        let t1 = FlatTorus::new(1).unwrap();
        let g = grad_x(&t1, 0.1, &[0.0], &[PI + 1.0], &cfg()).unwrap();
        let closed = -2.0 + TWO_PI * (10.0 * PI).tanh();
        assert_abs_diff_eq!(g[0], closed, epsilon = 1e-10);
        assert_abs_diff_eq!(g[0], 4.283_185_307_179_586, epsilon = 1e-10);
    }

    #[test]
    fn grad_separates_over_axes() {
        let t2 = FlatTorus::new(2).unwrap();
        let t1 = FlatTorus::new(1).unwrap();
        let (th, om) = (0.4, -0.9);
        let g2 = grad_x(&t2, 0.2, &[0.0, 0.0], &[PI + th, PI + om], &cfg()).unwrap();
        let ga = grad_x(&t1, 0.2, &[0.0], &[PI + th], &cfg()).unwrap();
        let gb = grad_x(&t1, 0.2, &[0.0], &[PI + om], &cfg()).unwrap();
        assert_eq!(g2[0].to_bits(), ga[0].to_bits());
        assert_eq!(g2[1].to_bits(), gb[0].to_bits());
    }

    #[test]
    fn hess_matches_closed_forms() {
        let t1 = FlatTorus::new(1).unwrap();
        // At the antipode the image variance is π², giving 2 - 2π²/t.
        let h = hess_x(&t1, 0.1, &[0.0], &[PI], &cfg()).unwrap();
        assert_relative_eq!(h[(0, 0)], 2.0 - 2.0 * PI * PI / 0.1, max_relative = 1e-10);
        assert_abs_diff_eq!(h[(0, 0)], -195.392_088_021_787_15, epsilon = 1e-9);
        // Far from the cut at small t a single image dominates: Hessian -> 2.
        let h2 = hess_x(&t1, 0.01, &[0.0], &[PI + 1.0], &cfg()).unwrap();
        assert_abs_diff_eq!(h2[(0, 0)], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn hess_is_diagonal() {
        let t2 = FlatTorus::new(2).unwrap();
        let h = hess_x(&t2, 0.3, &[0.1, 0.2], &[1.0, 5.0], &cfg()).unwrap();
        assert_eq!(h[(0, 1)], 0.0);
        assert_eq!(h[(1, 0)], 0.0);
        assert_eq!(h.transpose(), h);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for trial in 0..1000 {
            let m = 1 + trial % 2;
            let mfd = FlatTorus::new(m).unwrap();
            let t = 0.01 * (100.0f64).powf(rng.gen::<f64>());
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TWO_PI)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TWO_PI)).collect();
            let g = grad_x(&mfd, t, &x, &y, &cfg()).unwrap();
            let mut err2 = 0.0;
            for k in 0..m {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (cost(&mfd, t, &xp, &y, &cfg()).unwrap()
                    - cost(&mfd, t, &xm, &y, &cfg()).unwrap())
                    / (2.0 * h);
                err2 += (g[k] - fd) * (g[k] - fd);
            }
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = err2.sqrt() / (1.0 + gn);
            assert!(
                ratio < 1e-6,
                "gradient FD mismatch {ratio} at t={t}, x={x:?}, y={y:?}"
            );
        }
    }

    #[test]
    fn hess_matches_finite_differences_of_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_202);
        let h = 1e-5;
        for trial in 0..1000 {
            let m = 1 + trial % 2;
            let mfd = FlatTorus::new(m).unwrap();
            let t = 0.01 * (100.0f64).powf(rng.gen::<f64>());
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TWO_PI)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TWO_PI)).collect();
            let hd = hess_x(&mfd, t, &x, &y, &cfg()).unwrap();
            let mut err2 = 0.0;
            let mut hn2 = 0.0;
            for k in 0..m {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (grad_x(&mfd, t, &xp, &y, &cfg()).unwrap()[k]
                    - grad_x(&mfd, t, &xm, &y, &cfg()).unwrap()[k])
                    / (2.0 * h);
                err2 += (hd[(k, k)] - fd) * (hd[(k, k)] - fd);
                hn2 += hd[(k, k)] * hd[(k, k)];
            }
            let ratio = err2.sqrt() / (1.0 + hn2.sqrt());
            assert!(
                ratio < 1e-5,
                "hessian FD mismatch {ratio} at t={t}, x={x:?}, y={y:?}"
            );
        }
    }

    #[test]
    fn hessian_blowup_rate_at_antipode() {
        let t1 = FlatTorus::new(1).unwrap();
        let t = 1e-3;
        let h = hess_x(&t1, t, &[0.0], &[PI], &cfg()).unwrap()[(0, 0)];
        let ratio = (h.abs() * t) / (2.0 * PI * PI);
        assert!((ratio - 1.0).abs() < 0.01, "t·|Hess| / 2π² = {ratio}");
    }

    #[test]
    fn gradient_bound_constant_is_stable() {
        let t1 = FlatTorus::new(1).unwrap();
        let mut cs = Vec::new();
        for &t in &[1e-3, 1e-2, 1e-1, 1.0] {
            let mut c: f64 = 0.0;
            for j in 1..2000 {
                let y = PI * j as f64 / 2000.0;
                let g = grad_x(&t1, t, &[0.0], &[y], &cfg()).unwrap()[0].abs();
                let d = t1.distance(&[0.0], &[y]).unwrap();
                c = c.max(g / (t.sqrt() + d));
            }
            cs.push(c);
        }
        let cmax = cs.iter().cloned().fold(0.0, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax < 2.5, "gradient bound constant too large: {cs:?}");
        assert!(cmax / cmin < 1.6, "gradient bound constant unstable: {cs:?}");
    }

    #[test]
    fn cost_eval_bundles_consistently() {
        let t2 = FlatTorus::new(2).unwrap();
        let x = [0.3, 2.0];
        let y = [4.0, 1.1];
        let e = cost_eval(&t2, 0.25, &x, &y, &cfg()).unwrap();
        assert_eq!(e.value.to_bits(), cost(&t2, 0.25, &x, &y, &cfg()).unwrap().to_bits());
        let g = grad_x(&t2, 0.25, &x, &y, &cfg()).unwrap();
        assert_eq!(e.grad, g);
        let hd = hess_x(&t2, 0.25, &x, &y, &cfg()).unwrap();
        assert_eq!(e.hess, hd);
    }

    #[test]
    fn negative_or_zero_time_rejected() {
        let t1 = FlatTorus::new(1).unwrap();
        assert!(cost(&t1, -0.1, &[0.0], &[1.0], &cfg()).is_err());
        assert!(kernel(&t1, 0.0, &[0.0], &[1.0], &cfg()).is_err());
        assert!(grad_x(&t1, 0.0, &[0.0], &[1.0], &cfg()).is_err());
        assert!(hess_x(&t1, -1.0, &[0.0], &[1.0], &cfg()).is_err());
        assert!(cost_eval(&t1, 0.0, &[0.0], &[1.0], &cfg()).is_err());
    }

    #[test]
    fn config_invariants_enforced() {
        assert!(KernelConfig { trunc_eps: 1e-5, max_images: 4 }.validate().is_err());
        assert!(KernelConfig { trunc_eps: 0.0, max_images: 4 }.validate().is_err());
        assert!(KernelConfig { trunc_eps: 1e-12, max_images: 0 }.validate().is_err());
        assert!(KernelConfig::default().validate().is_ok());
    }
}
