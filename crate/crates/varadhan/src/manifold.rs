//! Geometry of the flat torus `T^m = (R / 2πZ)^m`.
//!
//! Points live in the fundamental domain `[0, 2π)^m`; every operation
//! canonicalizes its inputs, so callers may pass arbitrary finite angles.
//! The Riemannian structure is the product of unit circles: geodesics wrap
//! each coordinate independently, the exponential map is addition modulo 2π,
//! and the logarithm picks the shortest angular representative per axis.
//!
//! The cut locus of a base point is the set where at least one coordinate
//! difference equals π.  The log map is undefined there; [`FlatTorus::log`]
//! reports this with [`Error::CutLocus`] when the target is within `CUT_TOL`
//! of the cut locus.  Parallel transport is the identity on components
//! because the torus is flat and the coordinate frame is globally parallel.

use crate::error::{Error, Result};

/// Full angle: circumference of each circle factor.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Half angle: injectivity radius of each circle factor.
pub const PI: f64 = std::f64::consts::PI;

/// Distance-to-cut-locus threshold below which the log map is refused.
pub const CUT_TOL: f64 = 1e-9;

/// Wrap a coordinate difference into the symmetric interval `(-π, π]`.
///
/// This is the signed shortest angular displacement.  Antipodal ties
/// (`d ≡ π mod 2π`) resolve to `+π` so the function is total and
/// deterministic, even though the log map proper is undefined there.
///
/// The reduction is performed on `|d|` so that `wrap_delta(-d)` is the exact
/// negation of `wrap_delta(d)` away from ties: `|d| % 2π` is exact and the
/// conditional `- 2π` is exact by Sterbenz, so downstream kernel evaluations
/// are bitwise symmetric in their two points.
pub fn wrap_delta(d: f64) -> f64 {
    let m = d.abs() % TWO_PI;
    let w = if m > PI { m - TWO_PI } else { m };
    if d < 0.0 && w != PI {
        -w
    } else {
        w
    }
}

/// Wrap a coordinate into the fundamental interval `[0, 2π)`.
pub fn wrap_coord(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    // rem_euclid can return exactly 2π for tiny negative inputs.
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// The flat torus `T^m` with its product round metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatTorus {
    dim: usize,
}

impl FlatTorus {
    /// Create the `m`-torus.  Requires `dim >= 1`.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "torus dimension must be at least 1".into(),
            ));
        }
        Ok(FlatTorus { dim })
    }

    /// Dimension `m` of the torus.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Validate that `x` has the right length and finite entries.
    pub fn check_point(&self, x: &[f64], name: &str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{name} has length {} but the torus has dimension {}",
                x.len(),
                self.dim
            )));
        }
        if let Some(c) = x.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{name} contains a non-finite coordinate {c}"
            )));
        }
        Ok(())
    }

    /// Map a point into the fundamental domain `[0, 2π)^m`.
    pub fn canonicalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, "point")?;
        Ok(x.iter().copied().map(wrap_coord).collect())
    }

    /// Per-axis signed shortest displacement from `x` to `y`, each component
    /// in `(-π, π]`.
    pub fn delta(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, "x")?;
        self.check_point(y, "y")?;
        Ok(x.iter()
            .zip(y)
            .map(|(&a, &b)| wrap_delta(b - a))
            .collect())
    }

    /// Squared geodesic distance: sum of squared wrapped components.
    pub fn distance_squared(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self
            .delta(x, y)?
            .iter()
            .map(|d| d * d)
            .sum())
    }

    /// Geodesic distance.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.distance_squared(x, y)?.sqrt())
    }

    /// Exponential map: follow the straight line from `x` with velocity `v`
    /// and wrap back into the fundamental domain.  Defined for all `v`.
    pub fn exp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, "x")?;
        self.check_point(v, "v")?;
        Ok(x.iter()
            .zip(v)
            .map(|(&a, &b)| wrap_coord(a + b))
            .collect())
    }

    /// Logarithm map: the unique shortest tangent vector at `x` pointing to
    /// `y`.  Errors with [`Error::CutLocus`] when `y` lies within [`CUT_TOL`]
    /// of the cut locus of `x` (some coordinate difference within `CUT_TOL`
    /// of π), where the minimizer is not unique.
    pub fn log(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let d = self.delta(x, y)?;
        let dist_cut = d
            .iter()
            .map(|c| PI - c.abs())
            .fold(f64::INFINITY, f64::min);
        if dist_cut < CUT_TOL {
            return Err(Error::CutLocus { dist: dist_cut });
        }
        Ok(d)
    }

    /// Distance from `y` to the cut locus of `x`: the smallest per-axis gap
    /// `π - |Δ_k|`.  Zero exactly on the cut locus.
    pub fn dist_to_cut(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.delta(x, y)?;
        Ok(d.iter()
            .map(|c| PI - c.abs())
            .fold(f64::INFINITY, f64::min))
    }

    /// Parallel transport of the tangent vector `v` from `x` to `y`.  The
    /// torus is flat with a global parallel frame, so components are copied
    /// unchanged; the points only participate through validation.
    pub fn transport(&self, x: &[f64], y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, "x")?;
        self.check_point(y, "y")?;
        self.check_point(v, "v")?;
        Ok(v.to_vec())
    }

    /// Diameter of the torus: `π√m`, attained at per-axis antipodes.
    pub fn diameter(&self) -> f64 {
        PI * (self.dim as f64).sqrt()
    }

    /// Injectivity radius: π, independent of dimension.
    pub fn injectivity_radius(&self) -> f64 {
        PI
    }

    /// Uniform tensor grid with `res` nodes per axis: all points
    /// `(2π j_1/res, ..., 2π j_m/res)` in lexicographic order with axis 0
    /// varying slowest.  Requires `res >= 2`.
    pub fn grid(&self, res: usize) -> Result<Vec<Vec<f64>>> {
        if res < 2 {
            return Err(Error::InvalidInput(format!(
                "grid resolution must be at least 2, got {res}"
            )));
        }
        let axis: Vec<f64> = (0..res).map(|j| TWO_PI * j as f64 / res as f64).collect();
        let total = res.pow(self.dim as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut point = vec![0.0; self.dim];
            let mut rem = idx;
            // Axis 0 varies slowest: peel indices from the last axis up.
            for k in (0..self.dim).rev() {
                point[k] = axis[rem % res];
                rem /= res;
            }
            out.push(point);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_delta_maps_into_symmetric_interval() {
        assert_abs_diff_eq!(wrap_delta(0.0), 0.0);
        assert_abs_diff_eq!(wrap_delta(1.0), 1.0);
        assert_abs_diff_eq!(wrap_delta(-1.0), -1.0);
        assert_abs_diff_eq!(wrap_delta(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_delta(-3.0 * PI / 2.0), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_delta(7.0 * TWO_PI + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn wrap_delta_resolves_antipodal_ties_to_plus_pi() {
        assert_eq!(wrap_delta(PI), PI);
        assert_eq!(wrap_delta(-PI), PI);
        assert_eq!(wrap_delta(3.0 * PI), PI);
    }

    #[test]
    fn distance_on_circle_uses_shorter_arc() {
        let t = FlatTorus::new(1).unwrap();
        let d = t.distance(&[0.0], &[3.0 * PI / 2.0]).unwrap();
        assert_abs_diff_eq!(d, PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn distance_on_torus_is_euclidean_in_wrapped_deltas() {
        let t = FlatTorus::new(2).unwrap();
        let d = t
            .distance(&[0.0, 0.0], &[3.0 * PI / 2.0, PI])
            .unwrap();
        let expect = ((PI / 2.0_f64).powi(2) + PI * PI).sqrt();
        assert_abs_diff_eq!(d, expect, epsilon = 1e-14);
    }

    #[test]
    fn exp_wraps_into_fundamental_domain() {
        let t = FlatTorus::new(1).unwrap();
        let y = t.exp(&[1.0], &[TWO_PI + 0.5]).unwrap();
        assert_abs_diff_eq!(y[0], 1.5, epsilon = 1e-12);
        let z = t.exp(&[0.25], &[-1.0]).unwrap();
        assert_abs_diff_eq!(z[0], TWO_PI - 0.75, epsilon = 1e-12);
    }

    #[test]
    fn log_inverts_exp_inside_injectivity_radius() {
        let t = FlatTorus::new(3).unwrap();
        let x = [0.3, 5.9, 2.2];
        let v = [1.2, -2.0, 3.0];
        let y = t.exp(&x, &v).unwrap();
        let w = t.log(&x, &y).unwrap();
        for (a, b) in v.iter().zip(&w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_refuses_cut_locus() {
        let t = FlatTorus::new(1).unwrap();
        let err = t.log(&[0.0], &[PI]).unwrap_err();
        assert!(matches!(err, Error::CutLocus { .. }));
        // Multi-axis: a single antipodal coordinate suffices.
        let t2 = FlatTorus::new(2).unwrap();
        let err = t2.log(&[0.0, 1.0], &[0.5, 1.0 + PI]).unwrap_err();
        assert!(matches!(err, Error::CutLocus { .. }));
    }

    #[test]
    fn dist_to_cut_matches_definition() {
        let t = FlatTorus::new(2).unwrap();
        let d = t.dist_to_cut(&[0.0, 0.0], &[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(d, PI - 3.0, epsilon = 1e-14);
        let zero = t.dist_to_cut(&[0.0, 0.0], &[PI, 0.3]).unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn transport_is_component_identity() {
        let t = FlatTorus::new(2).unwrap();
        let v = [0.7, -0.3];
        let w = t.transport(&[0.0, 0.0], &[1.0, 2.0], &v).unwrap();
        assert_eq!(w, v.to_vec());
    }

    #[test]
    fn diameter_and_injectivity_radius() {
        let t1 = FlatTorus::new(1).unwrap();
        let t4 = FlatTorus::new(4).unwrap();
        assert_abs_diff_eq!(t1.diameter(), PI);
        assert_abs_diff_eq!(t4.diameter(), 2.0 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(t1.injectivity_radius(), PI);
        assert_abs_diff_eq!(t4.injectivity_radius(), PI);
    }

    #[test]
    fn grid_is_lexicographic_axis0_slowest() {
        let t = FlatTorus::new(2).unwrap();
        let g = t.grid(4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_abs_diff_eq!(g[1][1], PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1][0], 0.0);
        // After the inner axis completes a cycle, axis 0 advances.
        assert_abs_diff_eq!(g[4][0], PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[4][1], 0.0);
    }

    #[test]
    fn grid_rejects_tiny_resolution() {
        let t = FlatTorus::new(1).unwrap();
        assert!(t.grid(1).is_err());
    }

    #[test]
    fn dimension_zero_rejected() {
        assert!(FlatTorus::new(0).is_err());
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let t = FlatTorus::new(2).unwrap();
        assert!(t.distance(&[0.0], &[1.0, 2.0]).is_err());
        assert!(t.log(&[0.0, 0.0], &[1.0]).is_err());
        assert!(t.exp(&[0.0, 0.0], &[f64::NAN, 0.0]).is_err());
    }
}
