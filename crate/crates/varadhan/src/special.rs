//! Small special-function toolbox: modified Bessel functions of the first
//! kind, orders 0 and 1.
//!
//! These normalize von Mises densities and appear in closed-form reference
//! values for their moments.  The ascending power series is used throughout:
//! it converges for every argument, and for the argument range accepted by
//! the density layer (`κ <= 500`) all partial sums stay far below `f64`
//! overflow while the truncation error is driven to machine precision.

use crate::error::{Error, Result};

/// Largest argument for which the series evaluation is guaranteed accurate
/// and overflow-free.  Callers (the von Mises constructor) validate against
/// this bound.
pub const BESSEL_MAX_ARG: f64 = 600.0;

const MAX_TERMS: usize = 2000;

/// Modified Bessel function `I_0(x) = Σ_k (x²/4)^k / (k!)²`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < f64::EPSILON * sum {
            return Ok(sum);
        }
    }
    Err(Error::Numerical(format!(
        "bessel_i0 series failed to converge at x = {x}"
    )))
}

/// Modified Bessel function `I_1(x) = (x/2) Σ_k (x²/4)^k / (k! (k+1)!)`.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_arg(x)?;
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        term *= q / ((k * (k + 1)) as f64);
        sum += term;
        if term < f64::EPSILON * sum {
            return Ok(0.5 * x * sum);
        }
    }
    Err(Error::Numerical(format!(
        "bessel_i1 series failed to converge at x = {x}"
    )))
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() || !(0.0..=BESSEL_MAX_ARG).contains(&x) {
        return Err(Error::InvalidInput(format!(
            "bessel argument must lie in [0, {BESSEL_MAX_ARG}], got {x}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
