//! Exact rational reference values for the special functions.
//!
//! Every input is converted exactly from its binary value, so the only
//! rounding left is the final conversion back to `f64`.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(x: f64) -> Q {
    BigRational::from_float(x).expect("finite input")
}

pub fn qi(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("representable")
}

/// `C(top, k)` for rational `top`.
pub fn binom(top: &Q, k: u32) -> Q {
    let mut acc = Q::one();
    for j in 0..k {
        acc = acc * (top - qi(j.into())) / qi((j + 1).into());
    }
    acc
}

fn factorial(k: u32) -> Q {
    (1..=k).fold(Q::one(), |acc, j| acc * qi(j.into()))
}

/// `L_n^a(x) = sum_k (-1)^k C(n + a, n - k) x^k / k!`.
pub fn laguerre(n: i32, a: &Q, x: &Q) -> Q {
    if n < 0 {
        return Q::zero();
    }
    let n = n as u32;
    let top = qi(n.into()) + a;
    let mut sum = Q::zero();
    let mut xk = Q::one();
    for k in 0..=n {
        let term = binom(&top, n - k) * &xk / factorial(k);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        xk *= x;
    }
    sum
}

/// `d/dx L_n^a(x) = -L_{n-1}^{a+1}(x)`.
pub fn laguerre_derivative(n: i32, a: &Q, x: &Q) -> Q {
    -laguerre(n - 1, &(a + Q::one()), x)
}

/// `P_n^(a,b)(x) = sum_s C(n+a, n-s) C(n+b, s) ((x-1)/2)^s ((x+1)/2)^(n-s)`.
pub fn jacobi(n: i32, a: &Q, b: &Q, x: &Q) -> Q {
    if n < 0 {
        return Q::zero();
    }
    let n = n as u32;
    let two = qi(2);
    let lo = (x - Q::one()) / &two;
    let hi = (x + Q::one()) / &two;
    let (ta, tb) = (qi(n.into()) + a, qi(n.into()) + b);
    let mut sum = Q::zero();
    for s in 0..=n {
        sum += binom(&ta, n - s) * binom(&tb, s) * pow(&lo, s) * pow(&hi, n - s);
    }
    sum
}

/// `d/dx P_n^(a,b) = (n + a + b + 1)/2 P_{n-1}^(a+1,b+1)`.
pub fn jacobi_derivative(n: i32, a: &Q, b: &Q, x: &Q) -> Q {
    if n <= 0 {
        return Q::zero();
    }
    let c = (qi(n.into()) + a + b + Q::one()) / qi(2);
    c * jacobi(n - 1, &(a + Q::one()), &(b + Q::one()), x)
}

/// `1F1(-n; b; x) = sum_k (-n)_k / (b)_k x^k / k!`.
pub fn confluent(n: u32, b: &Q, x: &Q) -> Q {
    let mut sum = Q::one();
    let mut term = Q::one();
    for k in 0..n {
        let kq = qi(k.into());
        term = term * (&kq - qi(n.into())) / (b + &kq) * x / (&kq + Q::one());
        sum += &term;
    }
    sum
}

fn pow(x: &Q, k: u32) -> Q {
    (0..k).fold(Q::one(), |acc, _| acc * x)
}

/// Error of `approx` against `exact`, relative to `max(|exact|, floor)`.
pub fn rel_err(approx: f64, exact: &Q, floor: f64) -> f64 {
    let e = to_f64(exact);
    let diff = (q(approx) - exact).abs();
    to_f64(&diff) / e.abs().max(floor).max(f64::MIN_POSITIVE)
}

// Off-lattice points are short dyadic fractions so the exact sums stay cheap.

/// Half-integer parameters from -1/2 to 5/2 plus one generic value.
pub const PARAMS: [f64; 8] = [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 0.3125];
pub const LAGUERRE_X: [f64; 7] = [0.0, 0.125, 0.6875, 1.5, 3.25, 6.0, 11.5];
pub const JACOBI_X: [f64; 7] = [-1.0, -0.75, -0.3125, 0.0, 0.4375, 0.875, 1.0];
pub const MAX_DEGREE: i32 = 10;
