//! MIC-harmonic oscillator with a monopole in flat space.
//!
//! Every operator is represented by its action on the labelled basis
//! `|n, l, m>`: a short list of target states with complex coefficients.
//! Products of operators are obtained by composing those lists, so the
//! polynomial algebra can be checked state by state without any
//! discretization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::defosc::{AffineFactor, StructureFunction};
use crate::error::{Error, Result};
use crate::halfint::HalfInt;
use crate::relative_residual;

/// Oscillator frequency `omega` (with `c0 / 2 = omega^2`) and monopole charge `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    pub omega: f64,
    pub charge: HalfInt,
}

impl FlatParams {
    pub fn new(omega: f64, charge: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!("omega = {omega} must be positive")));
        }
        Ok(Self {
            omega,
            charge: HalfInt::from_f64(charge)?,
        })
    }

    pub fn q(&self) -> f64 {
        self.charge.value()
    }

    /// Lowest admissible orbital label `|Q|`.
    pub fn l_min(&self) -> HalfInt {
        self.charge.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlatState {
    pub n: u32,
    pub l: HalfInt,
    pub m: HalfInt,
}

impl FlatState {
    pub fn new(n: u32, l: f64, m: f64, params: &FlatParams) -> Result<Self> {
        let s = FlatState {
            n,
            l: HalfInt::from_f64(l)?,
            m: HalfInt::from_f64(m)?,
        };
        if !s.is_valid(params) {
            return Err(Error::InvalidSector(format!(
                "|{n}, {l}, {m}> is outside the tower for Q = {}",
                params.charge
            )));
        }
        Ok(s)
    }

    /// `l >= |Q|`, `l - |Q|` integral, `-l <= m <= l`, `l - m` integral.
    pub fn is_valid(&self, params: &FlatParams) -> bool {
        let lmin = params.l_min();
        self.l >= lmin
            && self.l.same_parity(lmin)
            && self.m.abs() <= self.l
            && self.m.same_parity(self.l)
    }

    fn shifted(&self, dn: i32, dl: i32) -> Option<FlatState> {
        let n = i64::from(self.n) + i64::from(dn);
        if n < 0 {
            return None;
        }
        Some(FlatState {
            n: n as u32,
            l: self.l + HalfInt::from_int(dl),
            m: self.m,
        })
    }

    /// Every valid state with `n <= n_max` and `l <= |Q| + l_extra`.
    pub fn enumerate(params: &FlatParams, n_max: u32, l_extra: u32) -> Vec<FlatState> {
        let lmin = params.l_min();
        let mut out = Vec::new();
        for n in 0..=n_max {
            for dl in 0..=l_extra as i32 {
                let l = lmin + HalfInt::from_int(dl);
                let mut m = -l;
                while m <= l {
                    out.push(FlatState { n, l, m });
                    m = m + HalfInt::ONE;
                }
            }
        }
        out
    }
}

impl fmt::Display for FlatState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}, {}, {}>", self.n, self.l, self.m)
    }
}

/// A quantum-number shift with its coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderAction {
    pub delta_n: i32,
    pub delta_l: i32,
    pub delta_m: i32,
    pub coefficient: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlatOp {
    H,
    L2,
    L3,
    B,
    Hplus,
    Hminus,
    A3,
    A3Dag,
    AXplus,
    XminusA,
    D1,
    D2,
}

impl FlatOp {
    pub const ALL: [FlatOp; 12] = [
        FlatOp::H,
        FlatOp::L2,
        FlatOp::L3,
        FlatOp::B,
        FlatOp::Hplus,
        FlatOp::Hminus,
        FlatOp::A3,
        FlatOp::A3Dag,
        FlatOp::AXplus,
        FlatOp::XminusA,
        FlatOp::D1,
        FlatOp::D2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FlatOp::H => "H",
            FlatOp::L2 => "L2",
            FlatOp::L3 => "L3",
            FlatOp::B => "B",
            FlatOp::Hplus => "Hplus",
            FlatOp::Hminus => "Hminus",
            FlatOp::A3 => "a3",
            FlatOp::A3Dag => "a3dag",
            FlatOp::AXplus => "AXplus",
            FlatOp::XminusA => "XminusA",
            FlatOp::D1 => "D1",
            FlatOp::D2 => "D2",
        }
    }
}

impl FromStr for FlatOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FlatOp::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown flat-model operator `{s}`")))
    }
}

/// `E = omega (2n + l + 3/2)`.
pub fn energy(state: &FlatState, params: &FlatParams) -> f64 {
    params.omega * (2.0 * f64::from(state.n) + state.l.value() + 1.5)
}

/// Evaluate `sqrt(prod(numer) / denom)`.
///
/// A vanishing numerator factor is a selection rule: the coefficient is zero
/// whatever the rest of the expression does. Otherwise a negative or
/// singular radicand means the arguments describe no state of the tower.
fn selection_sqrt(numer: &[f64], denom: f64, what: &str) -> Result<f64> {
    if numer.iter().any(|&f| f == 0.0) {
        return Ok(0.0);
    }
    let radicand = numer.iter().product::<f64>() / denom;
    if denom == 0.0 || !(radicand >= 0.0) || !radicand.is_finite() {
        return Err(Error::InvalidSector(format!(
            "{what}: radicand {radicand} with no vanishing selection factor"
        )));
    }
    Ok(radicand.sqrt())
}

/// `c0(n, l, m) = -i sqrt((2n+2l+3)(l-m+1)(l+m+1)(l-Q+1)(l+Q+1) / (w (2l+1)(2l+3)))`
pub fn coeff_c0(n: f64, l: f64, m: f64, params: &FlatParams) -> Result<Complex64> {
    let q = params.q();
    let mag = selection_sqrt(
        &[
            2.0 * n + 2.0 * l + 3.0,
            l - m + 1.0,
            l + m + 1.0,
            l - q + 1.0,
            l + q + 1.0,
        ],
        params.omega * (2.0 * l + 1.0) * (2.0 * l + 3.0),
        "c0",
    )?;
    Ok(Complex64::new(0.0, -mag))
}

/// `c1(n, l, m) = i sqrt(2(n+1)(l-m)(l+m)(l-Q)(l+Q) / (w (2l-1)(2l+1)))`
pub fn coeff_c1(n: f64, l: f64, m: f64, params: &FlatParams) -> Result<Complex64> {
    let q = params.q();
    let mag = selection_sqrt(
        &[2.0 * (n + 1.0), l - m, l + m, l - q, l + q],
        params.omega * (2.0 * l - 1.0) * (2.0 * l + 1.0),
        "c1",
    )?;
    Ok(Complex64::new(0.0, mag))
}

fn real_sqrt(v: f64, what: &str) -> Result<f64> {
    if v == 0.0 {
        return Ok(0.0);
    }
    if !(v > 0.0) {
        return Err(Error::InvalidSector(format!("{what}: sqrt of {v}")));
    }
    Ok(v.sqrt())
}

/// Shifts and coefficients of `op` on `state`; zero coefficients are kept.
pub fn ladder_actions(
    op: FlatOp,
    state: &FlatState,
    params: &FlatParams,
) -> Result<Vec<LadderAction>> {
    let n = f64::from(state.n);
    let l = state.l.value();
    let m = state.m.value();
    let act = |dn, dl, c: Complex64| LadderAction {
        delta_n: dn,
        delta_l: dl,
        delta_m: 0,
        coefficient: c,
    };
    let re = |v: f64| Complex64::new(v, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    let out = match op {
        FlatOp::H => vec![act(0, 0, re(energy(state, params)))],
        FlatOp::L2 => vec![act(0, 0, re(l * (l + 1.0)))],
        FlatOp::L3 => vec![act(0, 0, re(m))],
        FlatOp::B => vec![act(0, 0, re(l + 0.5))],
        FlatOp::Hplus => vec![act(1, 0, re(real_sqrt((n + 1.0) * (n + l + 1.5), "H+")?))],
        FlatOp::Hminus => {
            let c = if state.n == 0 {
                0.0
            } else {
                real_sqrt(n * (n + l + 0.5), "H-")?
            };
            vec![act(-1, 0, re(c))]
        }
        FlatOp::A3 => {
            let down = coeff_c0(n, l - 1.0, m, params)?;
            let across = coeff_c1(n - 1.0, l + 1.0, m, params)?;
            vec![act(0, -1, down), act(-1, 1, across)]
        }
        FlatOp::A3Dag => {
            let up = coeff_c0(n, l, m, params)?.conj();
            let across = coeff_c1(n, l, m, params)?.conj();
            vec![act(0, 1, up), act(1, -1, across)]
        }
        FlatOp::AXplus => vec![act(0, 1, coeff_c0(n, l, m, params)?.conj() * (l + 1.5))],
        FlatOp::XminusA => vec![act(0, -1, coeff_c0(n, l - 1.0, m, params)? * (l + 0.5))],
        FlatOp::D1 => {
            // H+ (X-A)^2 (B - 2)
            let first = coeff_c0(n, l - 1.0, m, params)?;
            let c = if first == zero {
                zero
            } else {
                let second = coeff_c0(n, l - 2.0, m, params)?;
                if second == zero {
                    zero
                } else {
                    first
                        * second
                        * ((l - 1.5) * (l - 0.5) * (l + 0.5))
                        * real_sqrt((n + 1.0) * (n + l - 0.5), "D1")?
                }
            };
            vec![act(1, -2, c)]
        }
        FlatOp::D2 => {
            // (B - 2) (AX+)^2 H-
            let c = if state.n == 0 {
                zero
            } else {
                coeff_c0(n - 1.0, l, m, params)?.conj()
                    * coeff_c0(n - 1.0, l + 1.0, m, params)?.conj()
                    * ((l + 0.5) * (l + 1.5) * (l + 2.5))
                    * real_sqrt(n * (n + l + 0.5), "D2")?
            };
            vec![act(-1, 2, c)]
        }
    };
    Ok(out)
}

/// Apply `op` to a basis state, returning its non-zero terms.
///
/// Targets outside the tower are only accepted with a vanishing coefficient.
pub fn apply(
    op: FlatOp,
    state: &FlatState,
    params: &FlatParams,
) -> Result<Vec<(FlatState, Complex64)>> {
    let mut out = Vec::new();
    for a in ladder_actions(op, state, params)? {
        let target = state
            .shifted(a.delta_n, a.delta_l)
            .filter(|t| t.is_valid(params));
        match target {
            Some(t) if a.coefficient.norm() != 0.0 => out.push((t, a.coefficient)),
            Some(_) => {}
            None if a.coefficient.norm() == 0.0 => {}
            None => {
                return Err(Error::InvalidSector(format!(
                    "{} on {state} leaves the tower with coefficient {}",
                    op.name(),
                    a.coefficient
                )))
            }
        }
    }
    Ok(out)
}

/// Apply an operator product written left to right (rightmost acts first).
pub fn apply_product(
    product: &[FlatOp],
    state: &FlatState,
    params: &FlatParams,
) -> Result<BTreeMap<FlatState, Complex64>> {
    let mut current = BTreeMap::from([(*state, Complex64::new(1.0, 0.0))]);
    for op in product.iter().rev() {
        let mut next: BTreeMap<FlatState, Complex64> = BTreeMap::new();
        for (s, c) in &current {
            for (t, ct) in apply(*op, s, params)? {
                *next.entry(t).or_default() += c * ct;
            }
        }
        next.retain(|_, c| c.norm() != 0.0);
        current = next;
    }
    Ok(current)
}

/// Scalar `s` with `product |state> = s |state>`; zero if the product annihilates it.
pub fn diagonal_product(
    product: &[FlatOp],
    state: &FlatState,
    params: &FlatParams,
) -> Result<Complex64> {
    let terms = apply_product(product, state, params)?;
    if let Some((t, _)) = terms.iter().find(|(t, _)| *t != state) {
        return Err(Error::InvalidSector(format!(
            "product is not diagonal on {state}: produced {t}"
        )));
    }
    Ok(terms.get(state).copied().unwrap_or_default())
}

/// Closed-form `D1 D2` as printed, in terms of the eigenvalues of `B`, `L3`, `H`.
pub fn d1d2_closed_form(params: &FlatParams, b: f64, l3: f64, h: f64) -> f64 {
    let (w, q) = (params.omega, params.q());
    b * (b + 2.0) / (16384.0 * w.powi(6))
        * (2.0 * b - 2.0 * l3 - 1.0)
        * (2.0 * b - 2.0 * l3 + 1.0)
        * (2.0 * b + 2.0 * l3 - 1.0)
        * (2.0 * b + 2.0 * l3 + 1.0)
        * (2.0 * b - 2.0 * q - 1.0)
        * (2.0 * b - 2.0 * q + 1.0)
        * (2.0 * b + 2.0 * q - 1.0)
        * (2.0 * b + 2.0 * q + 1.0)
        * (h + w * b - w).powi(2)
        * (h - w * b - w)
        * (h + w * b + w)
}

/// Closed-form `D2 D1`.
pub fn d2d1_closed_form(params: &FlatParams, b: f64, l3: f64, h: f64) -> f64 {
    let (w, q) = (params.omega, params.q());
    (b - 2.0) * b / (16384.0 * w.powi(6))
        * (2.0 * b - 2.0 * l3 - 3.0)
        * (2.0 * b - 2.0 * l3 - 1.0)
        * (2.0 * b + 2.0 * l3 - 3.0)
        * (2.0 * b + 2.0 * l3 - 1.0)
        * (2.0 * b - 2.0 * q - 3.0)
        * (2.0 * b - 2.0 * q - 1.0)
        * (2.0 * b + 2.0 * q - 3.0)
        * (2.0 * b + 2.0 * q - 1.0)
        * (h + w * b - 3.0 * w).powi(2)
        * (h - w * b + w)
        * (h + w * b - w)
}

/// `D1 D2` obtained from [`d2d1_closed_form`] by the shift `B -> B + 2`.
///
/// `D2` raises `B` by two, so `D1 D2 |B> = D2 D1 |B + 2>` with the same
/// central elements. This form agrees with the composed actions.
pub fn d1d2_shifted_form(params: &FlatParams, b: f64, l3: f64, h: f64) -> f64 {
    d2d1_closed_form(params, b + 2.0, l3, h)
}

/// The flat-model structure function with `omega`, `m`, `Q` frozen.
pub fn build_structure_function(params: &FlatParams, m: f64) -> StructureFunction {
    let w = params.omega;
    let q = params.q();
    // 2x + u and 2(u + 2x) in (x, u) coefficients
    let b = |c: f64| AffineFactor::new(2.0, 1.0, 0.0, c);
    let two_b = |c: f64| AffineFactor::new(4.0, 2.0, 0.0, c);
    let factors = vec![
        b(0.0),
        b(-2.0),
        AffineFactor::new(2.0 * w, w, 1.0, -3.0 * w).squared(),
        AffineFactor::new(-2.0 * w, -w, 1.0, w),
        AffineFactor::new(2.0 * w, w, 1.0, -w),
        two_b(-2.0 * m - 3.0),
        two_b(-2.0 * m - 1.0),
        two_b(2.0 * m - 3.0),
        two_b(2.0 * m - 1.0),
        two_b(-2.0 * q - 3.0),
        two_b(-2.0 * q - 1.0),
        two_b(2.0 * q - 3.0),
        two_b(2.0 * q - 1.0),
    ];
    let frozen = BTreeMap::from([
        ("omega".to_string(), w),
        ("m".to_string(), m),
        ("Q".to_string(), q),
    ]);
    StructureFunction::new(1.0 / (16384.0 * w.powi(6)), factors, frozen)
        .expect("flat structure function factors are non-trivial")
}

/// Largest residuals found by [`verify_algebra`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatAlgebraReport {
    pub omega: f64,
    pub charge: f64,
    pub n_max: u32,
    pub l_extra: u32,
    pub states_checked: usize,
    /// `|E(target) - E(source)|` over the D1 and D2 terms.
    pub energy_residual: f64,
    /// Termwise `[B, D1] + 2 D1` and `[B, D2] - 2 D2`, relative to the term.
    pub commutator_residual: f64,
    pub d2d1_residual: f64,
    pub d2d1_worst: Option<FlatState>,
    /// Composition against the printed `D1 D2` display.
    pub d1d2_residual: f64,
    pub d1d2_worst: Option<FlatState>,
    /// Composition against `D2 D1` shifted by `B -> B + 2`.
    pub d1d2_shifted_residual: f64,
    /// `D2 D1 = Phi(aleph)` with `aleph = B / 2`, `u = (1 + 2m)/2`.
    pub phi_realization_residual: f64,
}

/// Check the polynomial algebra on every state with `n <= n_max`, `l <= |Q| + l_extra`.
pub fn verify_algebra(params: &FlatParams, n_max: u32, l_extra: u32) -> Result<FlatAlgebraReport> {
    let states = FlatState::enumerate(params, n_max, l_extra);
    let mut rep = FlatAlgebraReport {
        omega: params.omega,
        charge: params.q(),
        n_max,
        l_extra,
        states_checked: states.len(),
        energy_residual: 0.0,
        commutator_residual: 0.0,
        d2d1_residual: 0.0,
        d2d1_worst: None,
        d1d2_residual: 0.0,
        d1d2_worst: None,
        d1d2_shifted_residual: 0.0,
        phi_realization_residual: 0.0,
    };
    let mut sf_cache: BTreeMap<HalfInt, StructureFunction> = BTreeMap::new();
    for s in &states {
        let e = energy(s, params);
        let b = s.l.value() + 0.5;
        let l3 = s.m.value();
        for (op, shift) in [(FlatOp::D1, -2.0), (FlatOp::D2, 2.0)] {
            for (t, c) in apply(op, s, params)? {
                rep.energy_residual = rep.energy_residual.max((energy(&t, params) - e).abs());
                // ([B, D] - shift D)|s> = (B_t - B_s - shift) c |t>
                let bt = t.l.value() + 0.5;
                let comm = (c * (bt - b - shift)).norm() / c.norm();
                rep.commutator_residual = rep.commutator_residual.max(comm);
            }
        }
        let d2d1 = diagonal_product(&[FlatOp::D2, FlatOp::D1], s, params)?;
        let d1d2 = diagonal_product(&[FlatOp::D1, FlatOp::D2], s, params)?;
        let r21 = relative_residual(
            d2d1,
            Complex64::new(d2d1_closed_form(params, b, l3, e), 0.0),
        );
        if r21 > rep.d2d1_residual {
            rep.d2d1_residual = r21;
            rep.d2d1_worst = Some(*s);
        }
        let r12 = relative_residual(
            d1d2,
            Complex64::new(d1d2_closed_form(params, b, l3, e), 0.0),
        );
        if r12 > rep.d1d2_residual {
            rep.d1d2_residual = r12;
            rep.d1d2_worst = Some(*s);
        }
        let r12s = relative_residual(
            d1d2,
            Complex64::new(d1d2_shifted_form(params, b, l3, e), 0.0),
        );
        rep.d1d2_shifted_residual = rep.d1d2_shifted_residual.max(r12s);

        let sf = sf_cache
            .entry(s.m)
            .or_insert_with(|| build_structure_function(params, l3));
        let u = 0.5 * (1.0 + 2.0 * l3);
        let x = (b - u) / 2.0;
        let phi = sf.evaluate(x, u, e);
        let rphi = relative_residual(d2d1, Complex64::new(phi, 0.0));
        rep.phi_realization_residual = rep.phi_realization_residual.max(rphi);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(w: f64, q: f64) -> FlatParams {
        FlatParams::new(w, q).unwrap()
    }

    #[test]
    fn energy_examples() {
        let pr = p(1.0, 1.0);
        assert_eq!(energy(&FlatState::new(0, 1.0, 1.0, &pr).unwrap(), &pr), 2.5);
        let p0 = p(1.0, 0.0);
        assert_eq!(energy(&FlatState::new(0, 0.0, 0.0, &p0).unwrap(), &p0), 1.5);
        let ph = p(0.5, 1.0);
        assert_eq!(
            energy(&FlatState::new(2, 3.0, 0.0, &ph).unwrap(), &ph),
            4.25
        );
    }

    #[test]
    fn energy_matches_d_plus_form() {
        let pr = p(0.7, 0.5);
        for s in FlatState::enumerate(&pr, 3, 3) {
            let l = s.l.value();
            let d_plus = 0.5 * (1.0 + (l + 0.5));
            assert_relative_eq!(
                energy(&s, &pr),
                2.0 * pr.omega * (d_plus + f64::from(s.n)),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn state_validation() {
        let pr = p(1.0, 1.0);
        assert!(FlatState::new(0, 0.0, 0.0, &pr).is_err());
        assert!(FlatState::new(0, 1.5, 0.5, &pr).is_err());
        assert!(FlatState::new(0, 2.0, 3.0, &pr).is_err());
        assert!(FlatState::new(0, 2.0, 0.5, &pr).is_err());
        let ph = p(1.0, 0.5);
        assert!(FlatState::new(0, 1.5, -0.5, &ph).is_ok());
        assert!(FlatParams::new(0.0, 1.0).is_err());
        assert!(FlatParams::new(1.0, 0.3).is_err());
    }

    #[test]
    fn c0_example_and_selection_zeros() {
        let pr = p(1.0, 1.0);
        let c = coeff_c0(0.0, 1.0, 0.0, &pr).unwrap();
        assert_relative_eq!(c.re, 0.0);
        assert_relative_eq!(c.im, -2.0, max_relative = 1e-15);
        assert_eq!(coeff_c1(2.0, 3.0, 3.0, &pr).unwrap().norm(), 0.0);
        assert_eq!(coeff_c1(2.0, 1.0, 0.0, &pr).unwrap().norm(), 0.0);
    }

    #[test]
    fn negative_radicand_is_an_error() {
        let pr = p(1.0, 2.0);
        // l = 0.5 is below |Q| and no selection factor vanishes
        assert!(matches!(
            coeff_c0(0.0, 0.5, 0.5, &pr),
            Err(Error::InvalidSector(_))
        ));
    }

    #[test]
    fn ladder_examples() {
        let pr = p(1.0, 1.0);
        let s = FlatState::new(0, 1.0, 0.0, &pr).unwrap();
        assert!(apply(FlatOp::Hminus, &s, &pr).unwrap().is_empty());
        assert!(apply(FlatOp::D2, &s, &pr).unwrap().is_empty());
        let up = apply(FlatOp::Hplus, &s, &pr).unwrap();
        assert_eq!(up.len(), 1);
        assert_eq!(up[0].0, FlatState::new(1, 1.0, 0.0, &pr).unwrap());
        assert_relative_eq!(up[0].1.re, 2.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn op_names_parse() {
        for op in FlatOp::ALL {
            assert_eq!(op.name().parse::<FlatOp>().unwrap(), op);
        }
        assert!(matches!("D3".parse::<FlatOp>(), Err(Error::Usage(_))));
    }

    #[test]
    fn ladder_adjointness() {
        let pr = p(1.3, 1.5);
        for s in FlatState::enumerate(&pr, 4, 4) {
            let up = apply(FlatOp::Hplus, &s, &pr).unwrap();
            let (t, c_up) = up[0];
            let down = apply(FlatOp::Hminus, &t, &pr).unwrap();
            assert_eq!(down[0].0, s);
            assert_relative_eq!(down[0].1.re, c_up.re, max_relative = 1e-14);
        }
    }

    #[test]
    fn tower_closure() {
        for (w, q) in [(1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (2.0, -1.5)] {
            let pr = p(w, q);
            for s in FlatState::enumerate(&pr, 3, 4) {
                for op in FlatOp::ALL {
                    for (t, _) in apply(op, &s, &pr).unwrap() {
                        assert!(t.is_valid(&pr), "{} on {s} -> {t}", op.name());
                        assert!(t.l >= pr.l_min());
                    }
                }
            }
        }
    }

    #[test]
    fn integrals_preserve_energy() {
        let pr = p(0.5, 1.0);
        for s in FlatState::enumerate(&pr, 4, 4) {
            for op in [FlatOp::D1, FlatOp::D2] {
                for (t, _) in apply(op, &s, &pr).unwrap() {
                    assert_eq!(energy(&t, &pr), energy(&s, &pr));
                }
            }
        }
    }

    #[test]
    fn d1_matches_its_defining_chain() {
        // D1 = H+ (X-A)^2 (B - 2) and D2 = (B - 2)(AX+)^2 H-
        let pr = p(1.0, 0.5);
        for s in FlatState::enumerate(&pr, 3, 4) {
            let b = s.l.value() + 0.5;
            let chain =
                apply_product(&[FlatOp::Hplus, FlatOp::XminusA, FlatOp::XminusA], &s, &pr).unwrap();
            let d1 = apply(FlatOp::D1, &s, &pr).unwrap();
            assert_eq!(chain.len(), d1.len());
            for (t, c) in d1 {
                let cc = chain[&t] * (b - 2.0);
                assert!(relative_residual(c, cc) < 1e-13);
            }
            let chain2 =
                apply_product(&[FlatOp::AXplus, FlatOp::AXplus, FlatOp::Hminus], &s, &pr).unwrap();
            for (t, c) in apply(FlatOp::D2, &s, &pr).unwrap() {
                let bt = t.l.value() + 0.5;
                assert!(relative_residual(c, chain2[&t] * (bt - 2.0)) < 1e-13);
            }
        }
    }

    #[test]
    fn a3_lowers_energy_by_omega() {
        let pr = p(2.0, 1.0);
        for s in FlatState::enumerate(&pr, 3, 3) {
            for (t, _) in apply(FlatOp::A3, &s, &pr).unwrap() {
                assert_relative_eq!(energy(&t, &pr), energy(&s, &pr) - pr.omega);
            }
            for (t, _) in apply(FlatOp::A3Dag, &s, &pr).unwrap() {
                assert_relative_eq!(energy(&t, &pr), energy(&s, &pr) + pr.omega);
            }
        }
    }

    #[test]
    fn structure_function_examples() {
        let pr = p(1.0, 1.0);
        let sf = build_structure_function(&pr, 1.0);
        assert_eq!(sf.factors.len(), 13);
        assert_eq!(sf.degree(), 14);
        assert_eq!(sf.prefactor, 1.0 / 16384.0);
        assert_eq!(sf.evaluate(0.0, 1.5, 2.5), 0.0);
        // E = 5/2 is the p = 0 level for m = 1, so x = 1 is its upper zero
        assert_eq!(sf.evaluate(1.0, 1.5, 2.5), 0.0);
        assert!(sf.evaluate(1.0, 1.5, 6.5) > 0.0);
        for pp in 0..5u32 {
            let m = 1.0;
            let u = (1.0 + 2.0 * m) / 2.0;
            let e = 2.0 * f64::from(pp) + m + 1.5;
            assert_eq!(sf.evaluate(0.0, u, e), 0.0);
            assert_eq!(sf.evaluate(f64::from(pp) + 1.0, u, e), 0.0);
        }
    }

    #[test]
    fn structure_function_value_by_hand() {
        // w = Q = m = 1, interior point x = 2 of the p = 2 branch: B = 2x + u
        let pr = p(1.0, 1.0);
        let sf = build_structure_function(&pr, 1.0);
        let (x, u, e): (f64, f64, f64) = (2.0, 1.5, 6.5);
        let bb = 2.0 * x + u;
        let angular = (2.0 * bb - 5.0) * (2.0 * bb - 3.0) * (2.0 * bb - 1.0) * (2.0 * bb + 1.0);
        let hand = bb * (bb - 2.0) / 16384.0
            * (e + bb - 3.0).powi(2)
            * (e - bb + 1.0)
            * (e + bb - 1.0)
            * angular
            * angular;
        assert!(hand > 0.0);
        assert_relative_eq!(sf.evaluate(x, u, e), hand, max_relative = 1e-14);
    }
}
