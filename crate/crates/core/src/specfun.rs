//! Classical orthogonal polynomials used by the separated wavefunctions.
//!
//! All evaluations run the three-term recurrence in the degree, with the
//! derivative carried along by differentiating the same recurrence. No
//! factorial ratios appear, so half-integer parameters stay well conditioned.
//!
//! Degree `-1` is accepted everywhere and yields the zero function. Ladder
//! operators that step below the bottom of a tower land there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A polynomial value together with its first derivative in the argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyEval {
    pub value: f64,
    pub derivative: f64,
}

impl PolyEval {
    pub const ZERO: PolyEval = PolyEval {
        value: 0.0,
        derivative: 0.0,
    };
    pub const ONE: PolyEval = PolyEval {
        value: 1.0,
        derivative: 0.0,
    };
}

fn check_degree(n: i32, what: &str) -> Result<()> {
    if n < -1 {
        return Err(Error::Domain(format!("{what} degree {n} < -1")));
    }
    Ok(())
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("{what} = {x} is not finite")));
    }
    Ok(())
}

/// Generalized Laguerre polynomial `L_n^alpha(x)` and its derivative.
///
/// Requires `alpha > -1` and `x >= 0` (the orthogonality domain).
pub fn laguerre(n: i32, alpha: f64, x: f64) -> Result<PolyEval> {
    check_finite(alpha, "alpha")?;
    check_finite(x, "x")?;
    if alpha <= -1.0 {
        return Err(Error::Domain(format!("laguerre alpha = {alpha} <= -1")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("laguerre argument x = {x} < 0")));
    }
    laguerre_continued(n, alpha, x)
}

/// `L_n^alpha(x)` for any real `alpha` and `x`.
///
/// The recurrence defines a polynomial for every `alpha`; this entry point
/// skips the orthogonality-domain checks of [`laguerre`]. Radial lowering
/// operators step the parameter down by two and can leave that domain.
pub fn laguerre_continued(n: i32, alpha: f64, x: f64) -> Result<PolyEval> {
    check_degree(n, "laguerre")?;
    check_finite(alpha, "alpha")?;
    check_finite(x, "x")?;
    if n == -1 {
        return Ok(PolyEval::ZERO);
    }
    let mut prev = PolyEval::ZERO;
    let mut cur = PolyEval::ONE;
    for k in 0..n {
        let k = f64::from(k);
        let a = 2.0 * k + 1.0 + alpha - x;
        let c = k + alpha;
        let next = PolyEval {
            value: (a * cur.value - c * prev.value) / (k + 1.0),
            derivative: (a * cur.derivative - cur.value - c * prev.derivative) / (k + 1.0),
        };
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Jacobi polynomial `P_lambda^(alpha, beta)(x)` and its derivative on `[-1, 1]`.
pub fn jacobi(lambda: i32, alpha: f64, beta: f64, x: f64) -> Result<PolyEval> {
    check_degree(lambda, "jacobi")?;
    check_finite(x, "x")?;
    check_finite(alpha, "alpha")?;
    check_finite(beta, "beta")?;
    if alpha <= -1.0 || beta <= -1.0 {
        return Err(Error::Domain(format!(
            "jacobi parameters ({alpha}, {beta}) must both exceed -1"
        )));
    }
    if x.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "jacobi argument |x| = {} > 1",
            x.abs()
        )));
    }
    match lambda {
        -1 => return Ok(PolyEval::ZERO),
        0 => return Ok(PolyEval::ONE),
        _ => {}
    }
    let ab = alpha + beta;
    let mut prev = PolyEval::ONE;
    let mut cur = PolyEval {
        value: 0.5 * ((alpha - beta) + (ab + 2.0) * x),
        derivative: 0.5 * (ab + 2.0),
    };
    // 2k + alpha + beta > 0 for k >= 1 because alpha, beta > -1.
    for k in 1..lambda {
        let k = f64::from(k);
        let s = 2.0 * k + ab;
        let denom = 2.0 * (k + 1.0) * (k + ab + 1.0) * s;
        let slope = (s + 1.0) * (s + 2.0) * s;
        let offset = (s + 1.0) * (alpha * alpha - beta * beta);
        let back = 2.0 * (k + alpha) * (k + beta) * (s + 2.0);
        let next = PolyEval {
            value: ((slope * x + offset) * cur.value - back * prev.value) / denom,
            derivative: ((slope * x + offset) * cur.derivative + slope * cur.value
                - back * prev.derivative)
                / denom,
        };
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Terminating confluent hypergeometric series `1F1(-n; b; x)`.
///
/// Summing the series directly loses digits to cancellation for large `x`,
/// so the value comes from `L_n^(b-1)(x) n! / (b)_n` through the Laguerre
/// recurrence, which is valid for every real `b` off the poles.
pub fn confluent_1f1(n: u32, b: f64, x: f64) -> Result<f64> {
    check_finite(b, "b")?;
    check_finite(x, "x")?;
    let mut norm = 1.0;
    for k in 0..n {
        let kf = f64::from(k);
        let pole = b + kf;
        if pole == 0.0 {
            return Err(Error::Domain(format!(
                "1F1(-{n}; {b}; x) hits the pole (b)_{} = 0",
                k + 1
            )));
        }
        norm *= pole / (kf + 1.0);
    }
    let n = i32::try_from(n).map_err(|_| Error::Domain(format!("1F1 degree {n} too large")))?;
    Ok(laguerre_continued(n, b - 1.0, x)?.value / norm)
}

/// Generalized binomial coefficient `C(top, k)` for real `top`.
pub fn binomial(top: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (top - f64::from(j)) / f64::from(j + 1))
}
