//! Deformed-oscillator structure functions and their finite unirreps.
//!
//! A structure function is kept as a prefactor times a product of factors
//! that are affine in `(x, u, E)`. The unirrep conditions `Phi(0) = 0` and
//! `Phi(p + 1) = 0` then reduce to enumerating factor pairs and solving a
//! 2x2 linear system for `(u, E)` per pair; no root finding is involved.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for merging coincident `(u, E)` solutions.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-9;

/// Default tolerance for matching a solved branch against a closed form.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-9;

/// `coeff_x * x + coeff_u * u + coeff_e * E + constant`, raised to `multiplicity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFactor {
    pub coeff_x: f64,
    pub coeff_u: f64,
    pub coeff_e: f64,
    pub constant: f64,
    pub multiplicity: u32,
}

impl AffineFactor {
    pub fn new(coeff_x: f64, coeff_u: f64, coeff_e: f64, constant: f64) -> Self {
        Self {
            coeff_x,
            coeff_u,
            coeff_e,
            constant,
            multiplicity: 1,
        }
    }

    pub fn squared(mut self) -> Self {
        self.multiplicity = 2;
        self
    }

    /// Value of the bare affine form, before the multiplicity is applied.
    pub fn linear_value(&self, x: f64, u: f64, e: f64) -> f64 {
        self.coeff_x * x + self.coeff_u * u + self.coeff_e * e + self.constant
    }

    pub fn value(&self, x: f64, u: f64, e: f64) -> f64 {
        self.linear_value(x, u, e).powi(self.multiplicity as i32)
    }

    fn is_trivial(&self) -> bool {
        self.coeff_x == 0.0 && self.coeff_u == 0.0 && self.coeff_e == 0.0 && self.constant == 0.0
    }
}

/// `Phi(x; u, E) = prefactor * prod_i factor_i(x, u, E)^mult_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFunction {
    pub prefactor: f64,
    pub factors: Vec<AffineFactor>,
    /// Model scalars already substituted into the factor coefficients.
    pub frozen_params: BTreeMap<String, f64>,
}

impl StructureFunction {
    pub fn new(
        prefactor: f64,
        factors: Vec<AffineFactor>,
        frozen_params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        if let Some(i) = factors.iter().position(AffineFactor::is_trivial) {
            return Err(Error::Usage(format!("factor {i} is identically zero")));
        }
        if factors.iter().any(|f| f.multiplicity == 0) {
            return Err(Error::Usage("factor multiplicity must be positive".into()));
        }
        Ok(Self {
            prefactor,
            factors,
            frozen_params,
        })
    }

    pub fn evaluate(&self, x: f64, u: f64, e: f64) -> f64 {
        self.factors
            .iter()
            .fold(self.prefactor, |acc, f| acc * f.value(x, u, e))
    }

    /// Total polynomial degree counted with multiplicity.
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.multiplicity).sum()
    }

    /// Magnitude used to judge whether a boundary value is zero: the prefactor
    /// times the product of the absolute factor values with the vanishing
    /// ones replaced by one.
    pub fn scale_at(&self, x: f64, u: f64, e: f64) -> f64 {
        self.factors.iter().fold(self.prefactor.abs(), |acc, f| {
            let v = f.value(x, u, e).abs();
            if v == 0.0 {
                acc
            } else {
                acc * v.max(1.0)
            }
        })
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.frozen_params
            .get(name)
            .copied()
            .ok_or_else(|| Error::Usage(format!("structure function has no frozen `{name}`")))
    }
}

/// A `(p + 1)`-dimensional unirrep solution of the boundary constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnirrepBranch {
    pub u: f64,
    /// Energy-like parameter: `E` for the flat model, `E'` for Taub-NUT.
    pub energy: f64,
    pub p: u32,
    pub zero_factor_at_0: usize,
    pub zero_factor_at_p1: usize,
    /// `Phi(1), ..., Phi(p)`.
    pub phi_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dedup_tol: f64,
    /// Drop branches that are not positive on `x = 1..=p`.
    pub require_positivity: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dedup_tol: DEFAULT_DEDUP_TOL,
            require_positivity: true,
        }
    }
}

/// Solve `Phi(0) = 0`, `Phi(p + 1) = 0`, `Phi(1..=p) > 0` over all factor pairs.
pub fn solve_unirreps(sf: &StructureFunction, p: u32) -> Vec<UnirrepBranch> {
    solve_unirreps_with(sf, p, &SolveOptions::default())
}

pub fn solve_unirreps_with(
    sf: &StructureFunction,
    p: u32,
    opts: &SolveOptions,
) -> Vec<UnirrepBranch> {
    let x_top = f64::from(p) + 1.0;
    let mut found: Vec<UnirrepBranch> = Vec::new();
    for (i, fi) in sf.factors.iter().enumerate() {
        for (j, fj) in sf.factors.iter().enumerate() {
            // fi(0, u, E) = 0 and fj(p + 1, u, E) = 0
            let (a1, b1, r1) = (fi.coeff_u, fi.coeff_e, -fi.constant);
            let (a2, b2, r2) = (fj.coeff_u, fj.coeff_e, -(fj.coeff_x * x_top + fj.constant));
            let det = a1 * b2 - a2 * b1;
            let scale = (a1.abs() + b1.abs()) * (a2.abs() + b2.abs());
            if scale == 0.0 || det.abs() <= 1e-14 * scale {
                continue;
            }
            let u = (r1 * b2 - r2 * b1) / det;
            let e = (a1 * r2 - a2 * r1) / det;
            let close =
                |a: f64, b: f64| (a - b).abs() <= opts.dedup_tol * a.abs().max(b.abs()).max(1.0);
            if found.iter().any(|br| close(br.u, u) && close(br.energy, e)) {
                continue;
            }
            let phi_values: Vec<f64> = (1..=p).map(|x| sf.evaluate(f64::from(x), u, e)).collect();
            if opts.require_positivity && phi_values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                continue;
            }
            found.push(UnirrepBranch {
                u,
                energy: e,
                p,
                zero_factor_at_0: i,
                zero_factor_at_p1: j,
                phi_values,
            });
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.u.total_cmp(&b.u)));
    found
}

/// Closed-form `(u, E)` branch families listed for the two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchFamily {
    /// `u = (1 + 2 s1 m)/2`, `E = s2 w/2 [2 + s3 (1 + 4p) + 2 s1 m]`
    FlatM,
    /// as `FlatM` with the monopole charge in place of `m`
    FlatQ,
    /// `u = (w + s1 E)/w`, `E = s2 w/2 (3 + 2p + 2 s1 m)`
    FlatUeM,
    FlatUeQ,
    /// `u = (s1 E' + 2 eps (1 + nu2))/(2 eps)`, `E' = -eps (4p - 2 nu1 + 2 s2 nu2 + 3)`
    TaubNut,
}

impl BranchFamily {
    pub const ALL: [BranchFamily; 5] = [
        BranchFamily::FlatM,
        BranchFamily::FlatQ,
        BranchFamily::FlatUeM,
        BranchFamily::FlatUeQ,
        BranchFamily::TaubNut,
    ];

    pub fn is_flat(self) -> bool {
        !matches!(self, BranchFamily::TaubNut)
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchFamily::FlatM => "flat_m",
            BranchFamily::FlatQ => "flat_Q",
            BranchFamily::FlatUeM => "flat_uE_m",
            BranchFamily::FlatUeQ => "flat_uE_Q",
            BranchFamily::TaubNut => "taubnut",
        }
    }
}

impl fmt::Display for BranchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BranchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BranchFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown branch family `{s}`")))
    }
}

/// Sign choices `(s1, s2, s3)`, each `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signs(pub i8, pub i8, pub i8);

impl Signs {
    pub fn new(s1: i8, s2: i8, s3: i8) -> Result<Self> {
        if [s1, s2, s3].iter().any(|s| s.abs() != 1) {
            return Err(Error::Usage(format!(
                "signs must be +-1, got ({s1}, {s2}, {s3})"
            )));
        }
        Ok(Self(s1, s2, s3))
    }

    /// All eight sign triples, `(+,+,+)` first.
    pub fn all() -> impl Iterator<Item = Signs> {
        [1i8, -1].into_iter().flat_map(|a| {
            [1i8, -1]
                .into_iter()
                .flat_map(move |b| [1i8, -1].into_iter().map(move |c| Signs(a, b, c)))
        })
    }

    fn f(self) -> (f64, f64, f64) {
        (f64::from(self.0), f64::from(self.1), f64::from(self.2))
    }
}

/// Closed-form `(u, E)` of a branch family.
///
/// Model scalars are read from the structure function's frozen parameters:
/// `omega`, `m`, `Q` for the flat model and `nu1`, `nu2`, `eps` for Taub-NUT.
pub fn paper_branch(
    sf: &StructureFunction,
    family: BranchFamily,
    signs: Signs,
    p: u32,
) -> Result<(f64, f64)> {
    let (s1, s2, s3) = signs.f();
    let p = f64::from(p);
    match family {
        BranchFamily::FlatM | BranchFamily::FlatQ => {
            let w = sf.param("omega")?;
            let k = if family == BranchFamily::FlatM {
                sf.param("m")?
            } else {
                sf.param("Q")?
            };
            let u = 0.5 * (1.0 + 2.0 * s1 * k);
            let e = 0.5 * s2 * w * (2.0 + s3 * (1.0 + 4.0 * p) + 2.0 * s1 * k);
            Ok((u, e))
        }
        BranchFamily::FlatUeM | BranchFamily::FlatUeQ => {
            let w = sf.param("omega")?;
            let k = if family == BranchFamily::FlatUeM {
                sf.param("m")?
            } else {
                sf.param("Q")?
            };
            let e = 0.5 * s2 * w * (3.0 + 2.0 * p + 2.0 * s1 * k);
            let u = (w + s1 * e) / w;
            Ok((u, e))
        }
        BranchFamily::TaubNut => {
            let nu1 = sf.param("nu1")?;
            let nu2 = sf.param("nu2")?;
            let eps = sf.param("eps")?;
            let e = -eps * (4.0 * p - 2.0 * nu1 + 2.0 * s2 * nu2 + 3.0);
            let u = (s1 * e + 2.0 * eps * (1.0 + nu2)) / (2.0 * eps);
            Ok((u, e))
        }
    }
}

/// Whether `branch` coincides with the closed form of `family` under `signs`.
pub fn verify_branch_against_paper(
    branch: &UnirrepBranch,
    sf: &StructureFunction,
    family: BranchFamily,
    signs: Signs,
) -> Result<bool> {
    verify_branch_with_tol(branch, sf, family, signs, DEFAULT_BRANCH_TOL)
}

pub fn verify_branch_with_tol(
    branch: &UnirrepBranch,
    sf: &StructureFunction,
    family: BranchFamily,
    signs: Signs,
    tol: f64,
) -> Result<bool> {
    let (u, e) = paper_branch(sf, family, signs, branch.p)?;
    Ok((branch.u - u).abs() <= tol && (branch.energy - e).abs() <= tol)
}

/// Every `(family, signs)` of the right model whose closed form matches `branch`.
pub fn matching_families(
    branch: &UnirrepBranch,
    sf: &StructureFunction,
    tol: f64,
) -> Vec<(BranchFamily, Signs)> {
    let taubnut = sf.frozen_params.contains_key("eps");
    let mut out = Vec::new();
    for family in BranchFamily::ALL {
        if family.is_flat() == taubnut {
            continue;
        }
        for signs in Signs::all() {
            // the third sign does not enter the Taub-NUT family
            if family == BranchFamily::TaubNut && signs.2 == -1 {
                continue;
            }
            if let Ok(true) = verify_branch_with_tol(branch, sf, family, signs, tol) {
                out.push((family, signs));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> StructureFunction {
        // Phi = x (x + u - 3) (E - x), zeros at x = 0 always
        StructureFunction::new(
            1.0,
            vec![
                AffineFactor::new(1.0, 0.0, 0.0, 0.0),
                AffineFactor::new(1.0, 1.0, 0.0, -3.0),
                AffineFactor::new(-1.0, 0.0, 1.0, 0.0),
            ],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn multiplicity_squares_the_factor() {
        let f = AffineFactor::new(1.0, 2.0, -1.0, 0.5).squared();
        let v = f.linear_value(0.3, 1.1, 2.0);
        assert_eq!(f.value(0.3, 1.1, 2.0), v * v);
        let sf = StructureFunction::new(2.0, vec![f], BTreeMap::new()).unwrap();
        assert_eq!(sf.evaluate(0.3, 1.1, 2.0), 2.0 * v * v);
        assert_eq!(sf.degree(), 2);
    }

    #[test]
    fn trivial_factor_rejected() {
        let bad = StructureFunction::new(
            1.0,
            vec![AffineFactor::new(0.0, 0.0, 0.0, 0.0)],
            BTreeMap::new(),
        );
        assert!(matches!(bad, Err(Error::Usage(_))));
    }

    #[test]
    fn singular_pairs_are_skipped() {
        // Only factors with u and E dependence can pin both unknowns; the
        // toy has one u-only and one E-only factor.
        let branches = solve_unirreps(&toy(), 2);
        for b in &branches {
            let sf = toy();
            assert!(sf.evaluate(0.0, b.u, b.energy).abs() < 1e-12);
            assert!(sf.evaluate(3.0, b.u, b.energy).abs() < 1e-12);
        }
    }

    #[test]
    fn p_zero_has_no_interior() {
        let sf = StructureFunction::new(
            1.0,
            vec![
                AffineFactor::new(1.0, 1.0, 0.0, 0.0),
                AffineFactor::new(1.0, 0.0, 1.0, -1.0),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let branches = solve_unirreps(&sf, 0);
        assert!(!branches.is_empty());
        for b in branches {
            assert!(b.phi_values.is_empty());
            assert!(sf.evaluate(0.0, b.u, b.energy).abs() < 1e-12);
            assert!(sf.evaluate(1.0, b.u, b.energy).abs() < 1e-12);
        }
    }

    #[test]
    fn family_parsing() {
        assert_eq!(
            "flat_uE_m".parse::<BranchFamily>().unwrap(),
            BranchFamily::FlatUeM
        );
        assert_eq!(
            "TAUBNUT".parse::<BranchFamily>().unwrap(),
            BranchFamily::TaubNut
        );
        assert!(matches!(
            "flat_x".parse::<BranchFamily>(),
            Err(Error::Usage(_))
        ));
        assert!(Signs::new(1, 0, 1).is_err());
        assert_eq!(Signs::all().count(), 8);
    }

    #[test]
    fn missing_frozen_param_is_usage_error() {
        let b = UnirrepBranch {
            u: 0.0,
            energy: 0.0,
            p: 1,
            zero_factor_at_0: 0,
            zero_factor_at_p1: 0,
            phi_values: vec![1.0],
        };
        let r = verify_branch_against_paper(&b, &toy(), BranchFamily::FlatM, Signs(1, 1, 1));
        assert!(matches!(r, Err(Error::Usage(_))));
    }
}
