//! Composite, cut-aware quadrature for population expectations of cost-like
//! integrands.
//!
//! Expectations against the shipped densities (mixtures of per-axis factor
//! products) all reduce to one-dimensional integrals per axis and mixture
//! component.  The integrands built from the heat cost are smooth but
//! develop steep structure of width `O(t)` around the cut locus of each base
//! point (`tanh(πθ/t)` fronts in the gradient, `sech²(πθ/t)` spikes in the
//! Hessian), which a plain tensor grid aliases badly at small `t`.  The rule
//! built here places composite Gauss-Legendre panels so that
//!
//! - every *steep angle* (a base point's antipode) gets a window of
//!   half-width `min(24t, π/2)` subdivided into panels of width ~`t/2`,
//!   matching the analyticity strip of the `sech²` profile so the 16-point
//!   rule converges spectrally;
//! - at `t = 0` each steep angle becomes a panel *edge*, so integrands with
//!   a kink or jump at the cut are integrated piecewise-smoothly;
//! - tabulated factors contribute their cell boundaries as mandatory edges
//!   (the density is only piecewise linear);
//! - the remaining smooth stretches are subdivided to the factor's own
//!   resolution requirement and to the caller's requested `res`.
//!
//! Nodes are stored as unwrapped angles; integrand closures receive the
//! absolute angle and wrap internally, which is exact.  All accumulation is
//! compensated.

use crate::density::{Density, Factor};
use crate::error::{Error, Result};
use crate::heat::{AxisCost, KernelConfig};
use crate::manifold::{wrap_delta, TWO_PI};
use crate::numerics::{gauss_legendre, Accumulator};
use std::sync::OnceLock;

/// Half-width of the steep window around a cut angle, as a multiple of t.
const WINDOW_TIME_FACTOR: f64 = 24.0;

/// Panel width inside a steep window, as a multiple of t.
const WINDOW_PANEL_FACTOR: f64 = 0.5;

/// Smallest meaningful panel (guards duplicate breakpoints).
const MIN_PANEL: f64 = 1e-13;

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static GL16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL16.get_or_init(|| gauss_legendre(16))
}

/// One-dimensional composite quadrature rule over an angular region.
#[derive(Debug, Clone)]
pub(crate) struct AxisRule {
    /// Node angles (unwrapped; may lie outside `[0, 2π)`).
    pub nodes: Vec<f64>,
    /// Quadrature weights; they sum to the region length.
    pub weights: Vec<f64>,
}

impl AxisRule {
    /// `∫ region ψ(θ) g(θ) dθ` for this rule's region and the given factor.
    pub fn expect<G: FnMut(f64) -> f64>(&self, factor: &Factor, mut g: G) -> f64 {
        let mut acc = Accumulator::new();
        for (&th, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * factor.density_at(th) * g(th));
        }
        acc.total()
    }
}

/// Build a composite rule for one axis.
///
/// * `t`: diffusion time controlling steep-window geometry (`t = 0` turns
///   windows into plain panel edges at the steep angles).
/// * `res`: caller's base resolution; the smooth region is subdivided into
///   at least `max(res/16, factor requirement, 16)` panels per period.
/// * `steep_at`: absolute angles around which cost-like integrands are steep
///   (cut angles of base points).
/// * `restrict`: optional `(center, half_width)` restricting integration to
///   `[center - half_width, center + half_width]`; `half_width <= π`.
pub(crate) fn build_axis_rule(
    factor: &Factor,
    t: f64,
    res: usize,
    steep_at: &[f64],
    restrict: Option<(f64, f64)>,
) -> Result<AxisRule> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "quadrature rule requires t >= 0, got {t}"
        )));
    }
    let (lo, hi) = match restrict {
        Some((c, half)) => {
            if !(half > 0.0 && half <= std::f64::consts::PI) || !c.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "restriction half-width must lie in (0, π], got {half}"
                )));
            }
            (c - half, c + half)
        }
        None => (0.0, TWO_PI),
    };

    let mut bp: Vec<f64> = vec![lo, hi];

    // Steep windows around every image of every steep angle that meets the
    // region.
    let w = if t > 0.0 {
        (WINDOW_TIME_FACTOR * t).min(std::f64::consts::FRAC_PI_2)
    } else {
        0.0
    };
    let pw = if t > 0.0 {
        (WINDOW_PANEL_FACTOR * t).max(w / 64.0)
    } else {
        0.0
    };
    for &s0 in steep_at {
        if !s0.is_finite() {
            return Err(Error::InvalidInput(
                "steep angle must be finite".into(),
            ));
        }
        let k0 = ((lo - s0) / TWO_PI).floor() as i64 - 1;
        let k1 = ((hi - s0) / TWO_PI).ceil() as i64 + 1;
        for k in k0..=k1 {
            let c = s0 + TWO_PI * k as f64;
            if c + w < lo || c - w > hi {
                continue;
            }
            if t == 0.0 {
                bp.push(c);
            } else {
                let n = (w / pw).ceil() as i64;
                for j in -n..=n {
                    bp.push(c + j as f64 * pw);
                }
            }
        }
    }

    // Tabulated factors: cell edges are mandatory breakpoints.
    if let Some(rt) = factor.table_res() {
        let h = TWO_PI / rt as f64;
        let i0 = (lo / h).floor() as i64;
        let i1 = (hi / h).ceil() as i64;
        for i in i0..=i1 {
            bp.push(i as f64 * h);
        }
    }

    // Clamp into the region, sort, dedupe.
    for v in bp.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bp.dedup_by(|a, b| (*a - *b).abs() < MIN_PANEL);

    // Subdivide smooth stretches to the base resolution.
    let n_mid = (res / 16).max(factor.smoothness_panels()).max(16);
    let lmax = TWO_PI / n_mid as f64;
    let (gx, gw) = gl16();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in bp.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = b - a;
        if len < MIN_PANEL {
            continue;
        }
        let parts = (len / lmax).ceil().max(1.0) as usize;
        let step = len / parts as f64;
        for p in 0..parts {
            let pa = a + p as f64 * step;
            let half = 0.5 * step;
            let mid = pa + half;
            for (&x, &ww) in gx.iter().zip(gw) {
                nodes.push(mid + half * x);
                weights.push(ww * half);
            }
        }
    }
    Ok(AxisRule { nodes, weights })
}

/// Value, gradient, and Hessian diagonal of the population objective
/// `F_t(x) = E_μ[F_t(x, Ξ)]` by per-axis quadrature.  Supports `t = 0`,
/// where the value/gradient are the squared-distance expectations and the
/// Hessian diagonal is the almost-everywhere constant 2.
pub(crate) fn pop_cost_grad_hess(
    d: &Density,
    x: &[f64],
    t: f64,
    res: usize,
    cfg: &KernelConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let m = d.dim();
    if x.len() != m {
        return Err(Error::InvalidInput(format!(
            "point has length {} but the density has dimension {m}",
            x.len()
        )));
    }
    let mut value = Accumulator::new();
    let mut grad = vec![Accumulator::new(); m];
    let mut hess = vec![Accumulator::new(); m];
    if t == 0.0 {
        for (wc, prod) in d.components() {
            for (k, factor) in prod.factors().iter().enumerate() {
                let cut = x[k] + std::f64::consts::PI;
                let rule = build_axis_rule(factor, 0.0, res, &[cut], None)?;
                let ev = rule.expect(factor, |th| {
                    let s = wrap_delta(th - x[k]);
                    s * s
                });
                let eg = rule.expect(factor, |th| -2.0 * wrap_delta(th - x[k]));
                value.add(wc * ev);
                grad[k].add(wc * eg);
                hess[k].add(wc * 2.0);
            }
        }
    } else {
        let ax = AxisCost::new(t, cfg)?;
        for (wc, prod) in d.components() {
            for (k, factor) in prod.factors().iter().enumerate() {
                let cut = x[k] + std::f64::consts::PI;
                let rule = build_axis_rule(factor, t, res, &[cut], None)?;
                let (mut sv, mut sg, mut sh) =
                    (Accumulator::new(), Accumulator::new(), Accumulator::new());
                for (&th, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let psi = factor.density_at(th);
                    let e = ax.eval(wrap_delta(x[k] - th));
                    sv.add(w * psi * e.cost);
                    sg.add(w * psi * e.grad);
                    sh.add(w * psi * e.hess);
                }
                value.add(wc * sv.total());
                grad[k].add(wc * sg.total());
                hess[k].add(wc * sh.total());
            }
        }
    }
    let v = value.total();
    if !v.is_finite() {
        return Err(Error::Numerical(format!(
            "population objective non-finite at x = {x:?}, t = {t}"
        )));
    }
    Ok((
        v,
        grad.iter().map(|a| a.total()).collect(),
        hess.iter().map(|a| a.total()).collect(),
    ))
}

/// Mixture-weighted marginal expectation `E_μ[g(wrap(Ξ_axis - x_axis))]`,
/// optionally restricted to the band of half-width `band_half` around the
/// cut angle `x_axis + π`.  The grid resolves steepness at scale `t_grid`.
pub(crate) fn pop_axis_moment<G: Fn(f64) -> f64>(
    d: &Density,
    axis: usize,
    x: &[f64],
    t_grid: f64,
    res: usize,
    band_half: Option<f64>,
    g: G,
) -> Result<f64> {
    let m = d.dim();
    if axis >= m || x.len() != m {
        return Err(Error::InvalidInput(format!(
            "axis {axis} out of range for dimension {m}"
        )));
    }
    let cut = x[axis] + std::f64::consts::PI;
    let restrict = band_half.map(|h| (cut, h));
    let mut acc = Accumulator::new();
    for (wc, prod) in d.components() {
        let factor = &prod.factors()[axis];
        let rule = build_axis_rule(factor, t_grid, res, &[cut], restrict)?;
        let v = rule.expect(factor, |th| g(wrap_delta(th - x[axis])));
        acc.add(wc * v);
    }
    Ok(acc.total())
}

/// Per-component factor moment `∫ ψ_factor(θ) g(wrap(θ - x_axis)) dθ` with
/// the same grid policy; used where mixture components must be combined as
/// products rather than sums.
pub(crate) fn factor_moment<G: Fn(f64) -> f64>(
    factor: &Factor,
    x_axis: f64,
    t_grid: f64,
    res: usize,
    band_half: Option<f64>,
    g: G,
) -> Result<f64> {
    let cut = x_axis + std::f64::consts::PI;
    let restrict = band_half.map(|h| (cut, h));
    let rule = build_axis_rule(factor, t_grid, res, &[cut], restrict)?;
    Ok(rule.expect(factor, |th| g(wrap_delta(th - x_axis))))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
