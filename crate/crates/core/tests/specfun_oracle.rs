mod common;

use common::*;
use monopole_algebra::specfun;

const TOL: f64 = 1e-12;

#[test]
fn laguerre_matches_exact_series() {
    let mut worst = (0.0f64, String::new());
    for &a in &PARAMS {
        for &x in &LAGUERRE_X {
            for n in -1..=MAX_DEGREE {
                let got = specfun::laguerre(n, a, x).unwrap();
                let (qa, qx) = (q(a), q(x));
                let ev = rel_err(got.value, &laguerre(n, &qa, &qx), 0.0);
                let ed = rel_err(got.derivative, &laguerre_derivative(n, &qa, &qx), 0.0);
                let e = ev.max(ed);
                if e > worst.0 {
                    worst = (e, format!("n={n} a={a} x={x} value {ev:e} deriv {ed:e}"));
                }
            }
        }
    }
    println!("laguerre worst {worst:?}");
    assert!(worst.0 < TOL, "{worst:?}");
}

#[test]
fn jacobi_matches_exact_sum() {
    let mut worst = (0.0f64, String::new());
    for &a in &PARAMS {
        for &b in &PARAMS {
            for &x in &JACOBI_X {
                for n in -1..=MAX_DEGREE {
                    let got = specfun::jacobi(n, a, b, x).unwrap();
                    let (qa, qb, qx) = (q(a), q(b), q(x));
                    let ev = rel_err(got.value, &jacobi(n, &qa, &qb, &qx), 0.0);
                    let ed = rel_err(got.derivative, &jacobi_derivative(n, &qa, &qb, &qx), 0.0);
                    let e = ev.max(ed);
                    if e > worst.0 {
                        worst = (
                            e,
                            format!("n={n} a={a} b={b} x={x} value {ev:e} deriv {ed:e}"),
                        );
                    }
                }
            }
        }
    }
    println!("jacobi worst {worst:?}");
    assert!(worst.0 < TOL, "{worst:?}");
}

#[test]
fn confluent_matches_exact_series() {
    let mut worst = 0.0f64;
    for &b in &[0.5, 1.0, 1.5, 2.5, 3.0, 0.3125, -2.5] {
        for &x in &LAGUERRE_X {
            for n in 0..=MAX_DEGREE as u32 {
                let got = specfun::confluent_1f1(n, b, x).unwrap();
                worst = worst.max(rel_err(got, &confluent(n, &q(b), &q(x)), 0.0));
            }
        }
    }
    assert!(worst < TOL, "{worst:e}");
}

#[test]
fn laguerre_is_a_confluent_series() {
    // L_n^a(x) = C(n + a, n) 1F1(-n; a + 1; x)
    for &a in &PARAMS {
        for &x in &LAGUERRE_X {
            for n in 0..=6u32 {
                let lhs = laguerre(n as i32, &q(a), &q(x));
                let rhs = binom(&(qi(n.into()) + q(a)), n) * confluent(n, &(q(a) + qi(1)), &q(x));
                assert_eq!(lhs, rhs, "n={n} a={a} x={x}");
            }
        }
    }
}
