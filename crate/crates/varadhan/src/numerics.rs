//! Crate-internal numeric helpers: compensated summation and Gauss-Legendre
//! rules.  These back both the density layer (sampler tables, tensor
//! quadrature) and the cut-aware expectation engine.

/// Neumaier compensated accumulator: error-free up to one rounding of the
/// final total, regardless of summand ordering or magnitude disparity.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Accumulator::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.  Deterministic
/// and accurate to a few ulps for the orders used here (n <= 64).
/// Ordinary least-squares slope of `ys` against `xs`.  Used for the
/// log-log rate fits in the asymptotics and simulation modules.
pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-flavored initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre_with_derivative(n, x);
                dp = d2;
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn accumulator_recovers_cancelled_mass() {
        let mut a = Accumulator::new();
        a.add(1.0);
        a.add(1e100);
        a.add(1.0);
        a.add(-1e100);
        assert_eq!(a.total(), 2.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // An n-point rule is exact through degree 2n - 1.
        for &n in &[2usize, 4, 8, 16] {
            let (x, w) = gauss_legendre(n);
            assert_eq!(x.len(), n);
            let deg = 2 * n - 1;
            for d in 0..=deg {
                let num: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 1 {
                    0.0
                } else {
                    2.0 / (d as f64 + 1.0)
                };
                assert_abs_diff_eq!(num, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gauss_legendre_16_matches_reference_endpoints() {
        let (x, w) = gauss_legendre(16);
        // Outermost abscissa/weight of the 16-point rule (standard tables).
        assert_abs_diff_eq!(x[0], -0.989_400_934_991_649_9, epsilon = 1e-14);
        assert_abs_diff_eq!(w[0], 0.027_152_459_411_754_1, epsilon = 1e-14);
        // Nodes are symmetric and increasing.
        for k in 0..8 {
            assert_abs_diff_eq!(x[k], -x[15 - k], epsilon = 1e-14);
            assert_abs_diff_eq!(w[k], w[15 - k], epsilon = 1e-14);
        }
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
