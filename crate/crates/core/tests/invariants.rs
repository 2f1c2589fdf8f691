use monopole_algebra::defosc::{solve_unirreps, AffineFactor, StructureFunction};
use monopole_algebra::flat_model::{self, FlatParams, FlatState};
use monopole_algebra::specfun;
use monopole_algebra::taubnut_model::{self, TaubNutParams};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn half_int(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_map(|t| f64::from(t) / 2.0)
}

proptest! {
    #[test]
    fn jacobi_reflection(n in 0i32..12, a in half_int(-1, 6), b in half_int(-1, 6), x in -1.0f64..1.0) {
        // P_n^(a,b)(-x) = (-1)^n P_n^(b,a)(x)
        let lhs = specfun::jacobi(n, a, b, -x).unwrap();
        let rhs = specfun::jacobi(n, b, a, x).unwrap();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let scale = lhs.value.abs().max(1.0);
        prop_assert!((lhs.value - sign * rhs.value).abs() <= 1e-11 * scale);
        prop_assert!((lhs.derivative + sign * rhs.derivative).abs() <= 1e-11 * lhs.derivative.abs().max(1.0));
    }

    #[test]
    fn jacobi_derivative_identity(n in 1i32..12, a in half_int(-1, 6), b in half_int(-1, 6), x in -1.0f64..1.0) {
        let d = specfun::jacobi(n, a, b, x).unwrap().derivative;
        let lower = specfun::jacobi(n - 1, a + 1.0, b + 1.0, x).unwrap().value;
        let expect = 0.5 * (f64::from(n) + a + b + 1.0) * lower;
        prop_assert!((d - expect).abs() <= 1e-11 * expect.abs().max(1.0));
    }

    #[test]
    fn laguerre_derivative_identity(n in 1i32..14, a in half_int(-1, 8), x in 0.0f64..20.0) {
        let d = specfun::laguerre(n, a, x).unwrap().derivative;
        let expect = -specfun::laguerre(n - 1, a + 1.0, x).unwrap().value;
        prop_assert!((d - expect).abs() <= 1e-10 * expect.abs().max(1.0));
    }

    #[test]
    fn laguerre_matches_confluent(n in 0u32..12, a in half_int(-1, 8), x in 0.0f64..10.0) {
        let l = specfun::laguerre(n as i32, a, x).unwrap().value;
        let f = specfun::binomial(f64::from(n) + a, n) * specfun::confluent_1f1(n, a + 1.0, x).unwrap();
        prop_assert!((l - f).abs() <= 1e-9 * f.abs().max(1.0));
    }

    #[test]
    fn solver_ignores_factor_order(seed in 0usize..720, p in 0u32..6) {
        let params = FlatParams::new(1.0, 1.0).unwrap();
        let sf = flat_model::build_structure_function(&params, 2.0);
        let mut factors: Vec<AffineFactor> = sf.factors.clone();
        // a deterministic permutation from the seed
        let mut k = seed;
        for i in (1..factors.len()).rev() {
            factors.swap(i, k % (i + 1));
            k /= i + 1;
        }
        let shuffled = StructureFunction::new(sf.prefactor, factors, BTreeMap::new()).unwrap();
        let a: Vec<(f64, f64)> = solve_unirreps(&sf, p).iter().map(|b| (b.u, b.energy)).collect();
        let b: Vec<(f64, f64)> = solve_unirreps(&shuffled, p).iter().map(|b| (b.u, b.energy)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn flat_energy_is_conserved_by_integrals(omega in 0.25f64..3.0, q in half_int(0, 4), n in 0u32..4, extra in 0u32..4) {
        let params = FlatParams::new(omega, q).unwrap();
        for s in FlatState::enumerate(&params, n, extra) {
            let e = flat_model::energy(&s, &params);
            for op in [flat_model::FlatOp::D1, flat_model::FlatOp::D2] {
                for (t, _) in flat_model::apply(op, &s, &params).unwrap() {
                    prop_assert!((flat_model::energy(&t, &params) - e).abs() <= 1e-12 * e);
                }
            }
        }
    }

    #[test]
    fn energy_round_trip(a in 0.0f64..1.0, b in 0.25f64..2.0, c1 in 0.0f64..0.5, d in 0.0f64..0.5,
                         c4 in 0.0f64..1.0, nu2 in half_int(0, 2), big_n in 1.0f64..25.0) {
        let params = TaubNutParams { a, b, c1, d, c0: 2.0, c4 };
        let sol = taubnut_model::solve_original_energy(&params, big_n, nu2).unwrap();
        for e in sol.roots {
            prop_assert!(taubnut_model::energy_equation_residual(&params, e, big_n, nu2).abs() <= 1e-10 * big_n);
            let (ep, eps2) = taubnut_model::metamorphosis_map(&params, e, nu2).unwrap();
            prop_assert!((ep + eps2.sqrt() * big_n).abs() <= 1e-10 * ep.abs().max(1.0));
        }
    }
}
