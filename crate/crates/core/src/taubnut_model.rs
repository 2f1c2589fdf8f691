//! MIC-harmonic oscillator with a monopole on a generalized Taub-NUT background.
//!
//! The Schrodinger problem is traded, by coupling constant metamorphosis, for
//! a flat-looking one in which `E' = c4 + c1 nu2^2 - 2 b E` plays the energy
//! and `eps^2 = c0/2 - 2 a E + d nu2^2` the oscillator strength. Its separated
//! solutions are Laguerre functions in `r` and Jacobi functions in `theta`.
//!
//! Inside the ladder (`K+-`) and shift (`J+-`) operators the commuting
//! symbols are replaced by their values on a fixed sector:
//! `B - Q -> l - nu2 + 1/2`, `Q -> nu2`, `H' -> E'` and `L3 -> l3`, with
//! `l3` fixed by [`calibrate_l3`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defosc::{self, AffineFactor, SolveOptions, StructureFunction, UnirrepBranch};
use crate::error::{Error, Result};
use crate::numgrid::{self, GridSpec};
use crate::relative_residual_re;
use crate::specfun;

/// Metric and potential constants.
///
/// `f(r) = a r^2 + b`, `g(r) = r^2 (a r^2 + b) / (1 + c1 r^2 + d r^4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaubNutParams {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub d: f64,
    pub c0: f64,
    pub c4: f64,
}

impl TaubNutParams {
    /// Build the constants and check `f > 0` and `1 + c1 r^2 + d r^4 > 0` on `(0, r_max]`.
    pub fn new(a: f64, b: f64, c1: f64, d: f64, c0: f64, c4: f64, r_max: f64) -> Result<Self> {
        let p = Self {
            a,
            b,
            c1,
            d,
            c0,
            c4,
        };
        if [a, b, c1, d, c0, c4].iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("metric constants must be finite".into()));
        }
        p.check_window(r_max)?;
        Ok(p)
    }

    /// The flat-space limit `a = c1 = d = c4 = 0`, `b = 1`, `c0 = 2 omega^2`.
    pub fn flat_limit(omega: f64) -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            c1: 0.0,
            d: 0.0,
            c0: 2.0 * omega * omega,
            c4: 0.0,
        }
    }

    pub fn check_window(&self, r_max: f64) -> Result<()> {
        if !(r_max > 0.0) {
            return Err(Error::Domain(format!("r_max = {r_max} must be positive")));
        }
        let t_max = r_max * r_max;
        // f is affine in t = r^2; positive on (0, t_max] iff both ends are
        // non-negative and not both zero.
        let f_end = self.a * t_max + self.b;
        if !(f_end > 0.0 && self.b >= 0.0) {
            return Err(Error::Domain(format!(
                "f(r) = {} r^2 + {} is not positive on (0, {r_max}]",
                self.a, self.b
            )));
        }
        let den = |t: f64| 1.0 + self.c1 * t + self.d * t * t;
        let mut min = den(t_max).min(1.0);
        if self.d > 0.0 {
            let vertex = -self.c1 / (2.0 * self.d);
            if vertex > 0.0 && vertex < t_max {
                min = min.min(den(vertex));
            }
        }
        if !(min > 0.0) {
            return Err(Error::Domain(format!(
                "1 + c1 r^2 + d r^4 is not positive on (0, {r_max}]"
            )));
        }
        Ok(())
    }

    pub fn f(&self, r: f64) -> f64 {
        self.a * r * r + self.b
    }

    pub fn g(&self, r: f64) -> f64 {
        let r2 = r * r;
        r2 * (self.a * r2 + self.b) / (1.0 + self.c1 * r2 + self.d * r2 * r2)
    }
}

/// Which form of the `K+` ladder operator and `J+` shift coefficient to use.
///
/// `Published` reproduces the printed expressions. `Corrected` flips the sign
/// of the `1/r^2` term in `K+` and uses the `J+` coefficient
/// `-2 (l - nu1 + 1)(l + nu1 - 2 nu2 + 1)`; the two agree when `nu1 = 0`
/// (for `J+`) or `l = nu2` (for `K+`). The grid checks in [`numgrid`]
/// decide which one the wavefunctions obey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Published,
    Corrected,
}

impl FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "published" => Ok(Convention::Published),
            "corrected" => Ok(Convention::Corrected),
            _ => Err(Error::Usage(format!("unknown convention `{s}`"))),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Published => "published",
            Convention::Corrected => "corrected",
        })
    }
}

/// A separated sector: radial degree `n`, Jacobi degree `lambda = l - nu1`,
/// the `phi` and `psi` quantum numbers and the oscillator scale `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaubNutSector {
    pub n: u32,
    pub lambda: u32,
    pub nu1: f64,
    pub nu2: f64,
    pub eps: f64,
}

impl TaubNutSector {
    pub fn new(n: u32, lambda: u32, nu1: f64, nu2: f64, eps: f64) -> Result<Self> {
        let s = Self {
            n,
            lambda,
            nu1,
            nu2,
            eps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Domain(format!(
                "eps = {} must be positive",
                self.eps
            )));
        }
        if !(self.jacobi_alpha() > -1.0 && self.jacobi_beta() > -1.0) {
            return Err(Error::Domain(format!(
                "Jacobi parameters ({}, {}) must exceed -1",
                self.jacobi_alpha(),
                self.jacobi_beta()
            )));
        }
        if !(self.laguerre_alpha() > -1.0) {
            return Err(Error::Domain(format!(
                "Laguerre parameter {} must exceed -1",
                self.laguerre_alpha()
            )));
        }
        Ok(())
    }

    /// Orbital label `l = lambda + nu1`.
    pub fn l(&self) -> f64 {
        f64::from(self.lambda) + self.nu1
    }

    /// Power of `r` in the radial function, `l - nu2`.
    pub fn radial_power(&self) -> f64 {
        self.l() - self.nu2
    }

    pub fn laguerre_alpha(&self) -> f64 {
        self.radial_power() + 0.5
    }

    pub fn jacobi_alpha(&self) -> f64 {
        self.nu1
    }

    pub fn jacobi_beta(&self) -> f64 {
        self.nu1 - 2.0 * self.nu2
    }

    /// Exponent of `(1 + cos theta)` in the angular prefactor.
    pub fn jacobi_exp_plus(&self) -> f64 {
        0.5 * self.jacobi_beta()
    }

    /// Exponent of `(1 - cos theta)` in the angular prefactor.
    pub fn jacobi_exp_minus(&self) -> f64 {
        0.5 * self.jacobi_alpha()
    }

    /// `E' = -eps (4n + 2l - 2 nu2 + 3)`.
    pub fn e_prime(&self) -> f64 {
        -self.eps * self.quantum_n()
    }

    /// `4n + 2l - 2 nu2 + 3`.
    pub fn quantum_n(&self) -> f64 {
        4.0 * f64::from(self.n) + 2.0 * self.l() - 2.0 * self.nu2 + 3.0
    }

    /// Eigenvalue of `B = sqrt(L^2 + 1/4)`, i.e. `l + 1/2`.
    pub fn b_eigenvalue(&self) -> f64 {
        self.l() + 0.5
    }

    pub fn separation_constant(&self) -> f64 {
        separation_constant(self.l(), self.nu2)
    }

    /// The sector with shifted degrees, if both stay non-negative.
    pub fn shifted(&self, dn: i32, dlambda: i32) -> Option<TaubNutSector> {
        let n = i64::from(self.n) + i64::from(dn);
        let lambda = i64::from(self.lambda) + i64::from(dlambda);
        if n < 0 || lambda < 0 {
            return None;
        }
        Some(TaubNutSector {
            n: n as u32,
            lambda: lambda as u32,
            ..*self
        })
    }

    /// Every valid sector of the box, ordered by `(nu pair, eps, n, lambda)`.
    pub fn enumerate(
        n_max: u32,
        lambda_max: u32,
        nus: &[(f64, f64)],
        epss: &[f64],
    ) -> Vec<TaubNutSector> {
        let mut out = Vec::new();
        for &(nu1, nu2) in nus {
            for &eps in epss {
                for n in 0..=n_max {
                    for lambda in 0..=lambda_max {
                        if let Ok(s) = TaubNutSector::new(n, lambda, nu1, nu2, eps) {
                            out.push(s);
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for TaubNutSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(n={}, lambda={}, nu1={}, nu2={}, eps={})",
            self.n, self.lambda, self.nu1, self.nu2, self.eps
        )
    }
}

/// Sector values of the commuting operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorScalars {
    /// `B - Q = l - nu2 + 1/2`
    pub s: f64,
    /// `Q = nu2`
    pub q: f64,
    pub l3: f64,
    /// `H' = E'`
    pub e_prime: f64,
}

impl SectorScalars {
    pub fn of(sector: &TaubNutSector, l3: f64) -> Self {
        Self {
            s: sector.radial_power() + 0.5,
            q: sector.nu2,
            l3,
            e_prime: sector.e_prime(),
        }
    }

    pub fn b(&self) -> f64 {
        self.s + self.q
    }
}

/// Candidate values for the scalar standing in for `L3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L3Rule {
    Nu1,
    Nu1MinusNu2,
    Nu1MinusTwoNu2,
}

impl L3Rule {
    pub const ALL: [L3Rule; 3] = [L3Rule::Nu1, L3Rule::Nu1MinusNu2, L3Rule::Nu1MinusTwoNu2];

    pub fn value(self, sector: &TaubNutSector) -> f64 {
        self.value_for(sector.nu1, sector.nu2)
    }

    pub fn value_for(self, nu1: f64, nu2: f64) -> f64 {
        match self {
            L3Rule::Nu1 => nu1,
            L3Rule::Nu1MinusNu2 => nu1 - nu2,
            L3Rule::Nu1MinusTwoNu2 => nu1 - 2.0 * nu2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            L3Rule::Nu1 => "nu1",
            L3Rule::Nu1MinusNu2 => "nu1 - nu2",
            L3Rule::Nu1MinusTwoNu2 => "nu1 - 2 nu2",
        }
    }
}

/// `k1 = (l - nu2)(l - nu2 + 1)`.
pub fn separation_constant(l: f64, nu2: f64) -> f64 {
    (l - nu2) * (l - nu2 + 1.0)
}

/// Unnormalized `e^{-eps r^2 / 2} r^power L_n^alpha(eps r^2)`; `n = -1` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialWave {
    pub n: i32,
    pub power: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl RadialWave {
    /// Value and `d/dr` at `r > 0`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "radial point r = {r} must be positive"
            )));
        }
        if self.n < 0 {
            return Ok((0.0, 0.0));
        }
        let t = self.eps * r * r;
        let lag = specfun::laguerre_continued(self.n, self.alpha, t)?;
        let env = (-0.5 * t).exp() * r.powf(self.power);
        let value = env * lag.value;
        let deriv = env
            * (lag.value * (self.power / r - self.eps * r) + lag.derivative * 2.0 * self.eps * r);
        Ok((value, deriv))
    }
}

/// Unnormalized `sin^nu1(theta/2) cos^(nu1 - 2 nu2)(theta/2) P_degree^(nu1, nu1 - 2 nu2)(cos theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularWave {
    pub degree: i32,
    pub nu1: f64,
    pub nu2: f64,
}

impl AngularWave {
    /// Value and `d/dtheta` at `theta` in `(0, pi)`.
    pub fn eval(&self, theta: f64) -> Result<(f64, f64)> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::Domain(format!("angle {theta} outside (0, pi)")));
        }
        let alpha = self.nu1;
        let beta = self.nu1 - 2.0 * self.nu2;
        let jac = specfun::jacobi(self.degree, alpha, beta, theta.cos())?;
        let half = 0.5 * theta;
        let pre = half.sin().powf(alpha) * half.cos().powf(beta);
        let log_d = 0.5 * alpha / half.tan() - 0.5 * beta * half.tan();
        let value = pre * jac.value;
        let deriv = pre * (jac.value * log_d - jac.derivative * theta.sin());
        Ok((value, deriv))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Wave {
    Radial(RadialWave),
    Angular(AngularWave),
}

impl Wave {
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        match self {
            Wave::Radial(w) => w.eval(x),
            Wave::Angular(w) => w.eval(x),
        }
    }

    /// True for the zero function reached below the bottom of a tower.
    pub fn is_zero(&self) -> bool {
        match self {
            Wave::Radial(w) => w.n < 0,
            Wave::Angular(w) => w.degree < 0,
        }
    }
}

pub fn radial_wavefunction(sector: &TaubNutSector) -> Result<RadialWave> {
    sector.validate()?;
    Ok(RadialWave {
        n: sector.n as i32,
        power: sector.radial_power(),
        alpha: sector.laguerre_alpha(),
        eps: sector.eps,
    })
}

pub fn angular_wavefunction(sector: &TaubNutSector) -> Result<AngularWave> {
    sector.validate()?;
    Ok(AngularWave {
        degree: sector.lambda as i32,
        nu1: sector.nu1,
        nu2: sector.nu2,
    })
}

/// A first-order differential operator with constant sector scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarOp {
    /// `(d / r) d/dr + constant + inv_r2 / r^2`
    Radial { d: f64, constant: f64, inv_r2: f64 },
    /// `sin_d sin(theta) d/dtheta + cos cos(theta) + constant`
    Angular { sin_d: f64, cos: f64, constant: f64 },
}

impl ScalarOp {
    pub fn apply(&self, x: f64, value: f64, deriv: f64) -> f64 {
        self.terms(x, value, deriv).iter().sum()
    }

    /// The individual terms of the operator applied to `(value, deriv)` at `x`.
    pub fn terms(&self, x: f64, value: f64, deriv: f64) -> [f64; 3] {
        match *self {
            ScalarOp::Radial {
                d,
                constant,
                inv_r2,
            } => [d / x * deriv, constant * value, inv_r2 / (x * x) * value],
            ScalarOp::Angular {
                sin_d,
                cos,
                constant,
            } => [
                sin_d * x.sin() * deriv,
                cos * x.cos() * value,
                constant * value,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Plus,
    Minus,
}

/// What a ladder or shift operator is predicted to do to a sector function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPrediction {
    pub source: Wave,
    pub target: Wave,
    pub coefficient: f64,
    pub operator: ScalarOp,
}

/// `K+` maps `psi_n^alpha` to `-2 eps^2 psi_{n-1}^{alpha+2}`; `K-` maps it to
/// `-2 (n+1)(n + l - nu2 + 1/2) psi_{n+1}^{alpha-2}`.
pub fn apply_radial_ladder(
    dir: Direction,
    sector: &TaubNutSector,
    convention: Convention,
) -> Result<LadderPrediction> {
    let src = radial_wavefunction(sector)?;
    let sc = SectorScalars::of(sector, 0.0);
    let s = sc.s;
    let n = f64::from(sector.n);
    Ok(match dir {
        Direction::Plus => {
            let sign = match convention {
                Convention::Published => 1.0,
                Convention::Corrected => -1.0,
            };
            LadderPrediction {
                source: Wave::Radial(src),
                target: Wave::Radial(RadialWave {
                    n: src.n - 1,
                    power: src.power + 2.0,
                    alpha: src.alpha + 2.0,
                    eps: src.eps,
                }),
                coefficient: -2.0 * sector.eps * sector.eps,
                operator: ScalarOp::Radial {
                    d: s + 1.0,
                    constant: -0.5 * sc.e_prime,
                    inv_r2: sign * (s + 1.0) * (s - 0.5),
                },
            }
        }
        Direction::Minus => LadderPrediction {
            source: Wave::Radial(src),
            target: Wave::Radial(RadialWave {
                n: src.n + 1,
                power: src.power - 2.0,
                alpha: src.alpha - 2.0,
                eps: src.eps,
            }),
            coefficient: -2.0 * (n + 1.0) * (n + sector.radial_power() + 0.5),
            operator: ScalarOp::Radial {
                d: -(s - 1.0),
                constant: -0.5 * sc.e_prime,
                inv_r2: -(s - 1.0) * (s + 0.5),
            },
        },
    })
}

/// `J+` coefficient on a sector.
pub fn j_plus_coefficient(sector: &TaubNutSector, convention: Convention) -> f64 {
    let lam = f64::from(sector.lambda);
    match convention {
        Convention::Published => -2.0 * (lam + 1.0) * (lam - 2.0 * sector.nu2 + 1.0),
        Convention::Corrected => {
            -2.0 * (lam + 1.0) * (lam + 2.0 * sector.nu1 - 2.0 * sector.nu2 + 1.0)
        }
    }
}

/// `J-` coefficient, `-2 l (l - 2 nu2)`.
pub fn j_minus_coefficient(sector: &TaubNutSector) -> f64 {
    let l = sector.l();
    -2.0 * l * (l - 2.0 * sector.nu2)
}

/// `K+` coefficient, `-2 eps^2`.
pub fn k_plus_coefficient(sector: &TaubNutSector) -> f64 {
    -2.0 * sector.eps * sector.eps
}

/// `K-` coefficient, `-2 (n + 1)(n + l - nu2 + 1/2)`.
pub fn k_minus_coefficient(sector: &TaubNutSector) -> f64 {
    let n = f64::from(sector.n);
    -2.0 * (n + 1.0) * (n + sector.radial_power() + 0.5)
}

/// `J+` raises the Jacobi degree by one, `J-` lowers it.
pub fn apply_angular_shift(
    dir: Direction,
    sector: &TaubNutSector,
    l3: f64,
    convention: Convention,
) -> Result<LadderPrediction> {
    let src = angular_wavefunction(sector)?;
    let sc = SectorScalars::of(sector, l3);
    let s = sc.s;
    let tail = -2.0 * sc.q * (sc.l3 - sc.q);
    Ok(match dir {
        Direction::Plus => LadderPrediction {
            source: Wave::Angular(src),
            target: Wave::Angular(AngularWave {
                degree: src.degree + 1,
                ..src
            }),
            coefficient: j_plus_coefficient(sector, convention),
            operator: ScalarOp::Angular {
                sin_d: -2.0 * (s + 0.5),
                cos: -2.0 * (s + 0.5).powi(2),
                constant: tail,
            },
        },
        Direction::Minus => LadderPrediction {
            source: Wave::Angular(src),
            target: Wave::Angular(AngularWave {
                degree: src.degree - 1,
                ..src
            }),
            coefficient: j_minus_coefficient(sector),
            operator: ScalarOp::Angular {
                sin_d: 2.0 * (s - 0.5),
                cos: -2.0 * (s - 0.5).powi(2),
                constant: tail,
            },
        },
    })
}

/// Outcome of [`calibrate_l3`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L3Calibration {
    pub rule: L3Rule,
    /// Worst shape residual of `J+` and `J-` over the family, per candidate.
    pub candidate_residuals: Vec<(L3Rule, f64)>,
    pub passing: Vec<L3Rule>,
}

/// Residual below which a candidate reproduces the shift recurrences.
pub const L3_PASS_TOL: f64 = 1e-6;

/// Find the scalar for `L3` in the `J+-` operators.
///
/// Each candidate is scored by the worst shape residual (the distance of
/// `J Theta_lambda` from the line spanned by `Theta_{lambda +- 1}`) over the
/// family. The shape residual is independent of the recurrence coefficient,
/// which [`numgrid::verify_recurrence`] checks separately.
pub fn calibrate_l3(family: &[TaubNutSector], grid: &GridSpec) -> Result<L3Calibration> {
    if family.is_empty() {
        return Err(Error::Usage(
            "calibrate_l3 needs at least one sector".into(),
        ));
    }
    let mut candidate_residuals = Vec::new();
    for rule in L3Rule::ALL {
        let mut worst = 0.0f64;
        for sector in family {
            let l3 = rule.value(sector);
            for dir in [Direction::Plus, Direction::Minus] {
                let pred = apply_angular_shift(dir, sector, l3, Convention::Published)?;
                worst = worst.max(numgrid::shape_residual(&pred, grid)?);
            }
        }
        candidate_residuals.push((rule, worst));
    }
    let passing: Vec<L3Rule> = candidate_residuals
        .iter()
        .filter(|(_, r)| *r < L3_PASS_TOL)
        .map(|(rule, _)| *rule)
        .collect();
    let coincide = |a: L3Rule, b: L3Rule| family.iter().all(|s| a.value(s) == b.value(s));
    let rule = match passing.as_slice() {
        [] => {
            return Err(Error::Calibration(format!(
                "no L3 candidate reaches {L3_PASS_TOL:e}: {candidate_residuals:?}"
            )))
        }
        [only] => *only,
        [first, rest @ ..] => {
            if rest.iter().all(|r| coincide(*first, *r)) {
                *first
            } else {
                return Err(Error::Calibration(format!(
                    "distinct L3 candidates {passing:?} all pass; family does not separate them"
                )));
            }
        }
    };
    Ok(L3Calibration {
        rule,
        candidate_residuals,
        passing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Integral {
    D1,
    D2,
}

/// Closed-form and composed coefficients of an integral on a sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralAction {
    pub which: Integral,
    /// `None` when the action annihilates the sector.
    pub target: Option<TaubNutSector>,
    pub closed_form: f64,
    /// Product of the defining `K`, `J` and `B` coefficients.
    pub composed: f64,
}

/// `D1 = K+ J+ J+ B` and `D2 = B J- J- K-` on a sector.
///
/// `D1` takes `(n, lambda)` to `(n - 1, lambda + 2)` and annihilates `n = 0`;
/// `D2` takes it to `(n + 1, lambda - 2)` and annihilates `lambda < 2`.
pub fn integrals_action(
    which: Integral,
    sector: &TaubNutSector,
    convention: Convention,
) -> Result<IntegralAction> {
    sector.validate()?;
    let l = sector.l();
    let lam = f64::from(sector.lambda);
    let (nu1, nu2, eps) = (sector.nu1, sector.nu2, sector.eps);
    let n = f64::from(sector.n);
    let zero = IntegralAction {
        which,
        target: None,
        closed_form: 0.0,
        composed: 0.0,
    };
    match which {
        Integral::D1 => {
            let Some(target) = sector.shifted(-1, 2) else {
                return Ok(zero);
            };
            let closed = -8.0
                * eps
                * eps
                * l
                * (l + 1.0)
                * (l - nu1 + 1.0)
                * (l - nu1 - 2.0 * nu2 + 1.0)
                * (l - nu1 + 2.0)
                * (l - nu1 - 2.0 * nu2 + 2.0);
            let mid = sector.shifted(0, 1).expect("raising lambda stays valid");
            let composed = k_plus_coefficient(sector)
                * j_plus_coefficient(&mid, convention)
                * j_plus_coefficient(sector, convention)
                * sector.b_eigenvalue();
            debug_assert!(lam >= 0.0);
            target.validate()?;
            Ok(IntegralAction {
                which,
                target: Some(target),
                closed_form: closed,
                composed,
            })
        }
        Integral::D2 => {
            let Some(target) = sector.shifted(1, -2) else {
                return Ok(zero);
            };
            let closed = -8.0
                * l
                * (l - 1.0)
                * (l - 2.0 * nu2)
                * (l - 2.0 * nu2 - 1.0)
                * (l - 1.5)
                * (n + 1.0)
                * (n + l - nu2 + 0.5);
            let mid = sector.shifted(0, -1).expect("lambda >= 2 here");
            let composed = target.b_eigenvalue()
                * j_minus_coefficient(&mid)
                * j_minus_coefficient(sector)
                * k_minus_coefficient(sector);
            if let Err(e) = target.validate() {
                if closed != 0.0 || composed != 0.0 {
                    return Err(Error::InvalidSector(format!("D2 on {sector}: {e}")));
                }
                return Ok(zero);
            }
            Ok(IntegralAction {
                which,
                target: Some(target),
                closed_form: closed,
                composed,
            })
        }
    }
}

/// Closed-form `D1 D2` in the sector scalars `B`, `L3`, `Q`, `H'`.
pub fn d1d2_closed_form(b: f64, l3: f64, q: f64, h: f64, eps: f64) -> f64 {
    (b - 2.0) / 256.0
        * (2.0 * b - 5.0)
        * (2.0 * b - 3.0).powi(2)
        * (2.0 * b - 2.0 * l3 - 4.0 * q - 1.0)
        * (2.0 * b - 2.0 * l3 - 1.0)
        * (2.0 * b - 4.0 * q - 3.0)
        * (2.0 * b - 4.0 * q - 1.0)
        * (2.0 * b - 2.0 * l3 - 4.0 * q - 3.0)
        * (2.0 * b - 1.0)
        * (2.0 * b - 2.0 * l3 - 3.0)
        * (h - 2.0 * eps * (b - q - 1.0))
        * (h + 2.0 * eps * (b - q - 1.0))
}

/// Closed-form `D2 D1`.
pub fn d2d1_closed_form(b: f64, l3: f64, q: f64, h: f64, eps: f64) -> f64 {
    b / 256.0
        * (2.0 * b - 1.0)
        * (2.0 * b + 1.0).powi(2)
        * (2.0 * b - 2.0 * l3 - 4.0 * q + 3.0)
        * (2.0 * b - 2.0 * l3 + 3.0)
        * (2.0 * b - 4.0 * q + 1.0)
        * (2.0 * b - 4.0 * q + 3.0)
        * (2.0 * b - 2.0 * l3 - 4.0 * q + 1.0)
        * (2.0 * b + 3.0)
        * (2.0 * b - 2.0 * l3 + 1.0)
        * (h - 2.0 * eps * (b - q + 1.0))
        * (h + 2.0 * eps * (b - q + 1.0))
}

/// The Taub-NUT structure function with `nu1`, `nu2`, `l3` and `eps` frozen.
///
/// `B` is realized as `2x + u` and the energy slot carries `H'`.
pub fn build_structure_function_taubnut(
    nu1: f64,
    nu2: f64,
    l3: f64,
    eps: f64,
) -> StructureFunction {
    let q = nu2;
    let b = |c: f64| AffineFactor::new(2.0, 1.0, 0.0, c);
    let two_b = |c: f64| AffineFactor::new(4.0, 2.0, 0.0, c);
    let factors = vec![
        b(-2.0),
        two_b(-3.0).squared(),
        two_b(-2.0 * l3 - 1.0),
        two_b(-1.0),
        two_b(-2.0 * l3 - 3.0),
        two_b(-5.0),
        two_b(-2.0 * l3 - 4.0 * q - 3.0),
        AffineFactor::new(-4.0 * eps, -2.0 * eps, 1.0, 2.0 * eps * (q + 1.0)),
        two_b(-4.0 * q - 1.0),
        AffineFactor::new(4.0 * eps, 2.0 * eps, 1.0, -2.0 * eps * (q + 1.0)),
        two_b(-4.0 * q - 3.0),
        two_b(-2.0 * l3 - 4.0 * q - 1.0),
    ];
    let frozen = BTreeMap::from([
        ("nu1".to_string(), nu1),
        ("nu2".to_string(), nu2),
        ("Q".to_string(), q),
        ("l3".to_string(), l3),
        ("eps".to_string(), eps),
    ]);
    StructureFunction::new(1.0 / 256.0, factors, frozen).expect("Taub-NUT factors are non-trivial")
}

/// A unirrep branch of the Taub-NUT structure function at a given `eps` sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaubNutBranch {
    pub eps: f64,
    pub branch: UnirrepBranch,
}

/// Solve the unirrep constraints for `eps = +|eps|` and `eps = -|eps|`.
pub fn solve_unirreps_taubnut(
    nu1: f64,
    nu2: f64,
    l3: f64,
    eps: f64,
    p: u32,
    opts: &SolveOptions,
) -> Vec<TaubNutBranch> {
    let mut out = Vec::new();
    for e in [eps.abs(), -eps.abs()] {
        let sf = build_structure_function_taubnut(nu1, nu2, l3, e);
        for branch in defosc::solve_unirreps_with(&sf, p, opts) {
            out.push(TaubNutBranch { eps: e, branch });
        }
    }
    out
}

/// Largest residuals found by [`verify_algebra_taubnut`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaubNutAlgebraReport {
    pub convention: Convention,
    pub l3_rule: L3Rule,
    pub sectors_checked: usize,
    /// `|E'(target) - E'(source)|` for the D1 and D2 targets.
    pub energy_residual: f64,
    /// `[B, D1] - 2 D1` and `[B, D2] + 2 D2` through the eigenvalue shift.
    pub commutator_residual: f64,
    /// Closed-form D2 action against `B J- J- K-`.
    pub d2_chain_residual: f64,
    /// Closed-form D1 action against `K+ J+ J+ B`.
    pub d1_chain_residual: f64,
    pub d1_chain_worst: Option<TaubNutSector>,
    /// Smallest and largest `closed / composed` ratio for D1 over sectors where
    /// both are non-zero.
    pub d1_ratio_range: Option<(f64, f64)>,
    /// True when that ratio is the same on every sector (relative 1e-10).
    pub d1_ratio_sector_independent: bool,
    /// Composition of the closed-form actions against the D1 D2 product.
    pub d1d2_residual: f64,
    pub d1d2_worst: Option<TaubNutSector>,
    pub d2d1_residual: f64,
    pub d2d1_worst: Option<TaubNutSector>,
    /// `D1 D2 = Phi(B/2)` and `D2 D1 = Phi(B/2 + 1)` with `u = 0`.
    pub phi_realization_residual: f64,
}

/// Check the Taub-NUT polynomial algebra on a list of sectors.
pub fn verify_algebra_taubnut(
    sectors: &[TaubNutSector],
    l3_rule: L3Rule,
    convention: Convention,
) -> Result<TaubNutAlgebraReport> {
    let mut rep = TaubNutAlgebraReport {
        convention,
        l3_rule,
        sectors_checked: sectors.len(),
        energy_residual: 0.0,
        commutator_residual: 0.0,
        d2_chain_residual: 0.0,
        d1_chain_residual: 0.0,
        d1_chain_worst: None,
        d1_ratio_range: None,
        d1_ratio_sector_independent: true,
        d1d2_residual: 0.0,
        d1d2_worst: None,
        d2d1_residual: 0.0,
        d2d1_worst: None,
        phi_realization_residual: 0.0,
    };
    for s in sectors {
        let l3 = l3_rule.value(s);
        let b = s.b_eigenvalue();
        let h = s.e_prime();
        let d1 = integrals_action(Integral::D1, s, convention)?;
        let d2 = integrals_action(Integral::D2, s, convention)?;

        for (act, shift) in [(&d1, 2.0), (&d2, -2.0)] {
            if let Some(t) = act.target {
                rep.energy_residual = rep.energy_residual.max((t.e_prime() - h).abs());
                rep.commutator_residual = rep
                    .commutator_residual
                    .max((t.b_eigenvalue() - b - shift).abs());
            }
        }

        rep.d2_chain_residual = rep
            .d2_chain_residual
            .max(relative_residual_re(d2.closed_form, d2.composed));
        let r1 = relative_residual_re(d1.closed_form, d1.composed);
        if r1 > rep.d1_chain_residual {
            rep.d1_chain_residual = r1;
            rep.d1_chain_worst = Some(*s);
        }
        if d1.closed_form != 0.0 && d1.composed != 0.0 {
            let ratio = d1.closed_form / d1.composed;
            rep.d1_ratio_range = Some(match rep.d1_ratio_range {
                None => (ratio, ratio),
                Some((lo, hi)) => (lo.min(ratio), hi.max(ratio)),
            });
        }

        // D1 D2 |s> = D1(target of D2) * D2(s)
        let d1d2 = match d2.target {
            None => 0.0,
            Some(t) => d2.closed_form * integrals_action(Integral::D1, &t, convention)?.closed_form,
        };
        let d2d1 = match d1.target {
            None => 0.0,
            Some(t) => d1.closed_form * integrals_action(Integral::D2, &t, convention)?.closed_form,
        };
        let r12 = relative_residual_re(d1d2, d1d2_closed_form(b, l3, s.nu2, h, s.eps));
        if r12 > rep.d1d2_residual {
            rep.d1d2_residual = r12;
            rep.d1d2_worst = Some(*s);
        }
        let r21 = relative_residual_re(d2d1, d2d1_closed_form(b, l3, s.nu2, h, s.eps));
        if r21 > rep.d2d1_residual {
            rep.d2d1_residual = r21;
            rep.d2d1_worst = Some(*s);
        }

        let sf = build_structure_function_taubnut(s.nu1, s.nu2, l3, s.eps);
        let x = b / 2.0;
        let rphi = relative_residual_re(d1d2, sf.evaluate(x, 0.0, h))
            .max(relative_residual_re(d2d1, sf.evaluate(x + 1.0, 0.0, h)));
        rep.phi_realization_residual = rep.phi_realization_residual.max(rphi);
    }
    if let Some((lo, hi)) = rep.d1_ratio_range {
        rep.d1_ratio_sector_independent = (hi - lo).abs() <= 1e-10 * lo.abs().max(hi.abs());
    }
    Ok(rep)
}

/// A root of the squared energy equation that failed a consistency filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRoot {
    pub energy: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySolution {
    /// Accepted energies, ascending.
    pub roots: Vec<f64>,
    pub rejected: Vec<RejectedRoot>,
}

/// `(2bE - c1 nu2^2 - c4) / sqrt(c0/2 - 2aE + d nu2^2) - N`.
pub fn energy_equation_residual(params: &TaubNutParams, energy: f64, big_n: f64, nu2: f64) -> f64 {
    let c = params.c1 * nu2 * nu2 + params.c4;
    let k = 0.5 * params.c0 + params.d * nu2 * nu2;
    (2.0 * params.b * energy - c) / (k - 2.0 * params.a * energy).sqrt() - big_n
}

/// Solve `(2bE - c1 nu2^2 - c4) / sqrt(c0/2 - 2aE + d nu2^2) = N` for `E`.
///
/// The equation is squared into
/// `4b^2 E^2 + (2aN^2 - 4bC) E + C^2 - N^2 K = 0` with `C = c1 nu2^2 + c4`,
/// `K = c0/2 + d nu2^2`; roots with a non-positive radicand or with
/// `2bE - C` of the wrong sign are rejected.
pub fn solve_original_energy(
    params: &TaubNutParams,
    big_n: f64,
    nu2: f64,
) -> Result<EnergySolution> {
    let c = params.c1 * nu2 * nu2 + params.c4;
    let k = 0.5 * params.c0 + params.d * nu2 * nu2;
    let qa = 4.0 * params.b * params.b;
    let qb = 2.0 * params.a * big_n * big_n - 4.0 * params.b * c;
    let qc = c * c - big_n * big_n * k;

    let mut candidates = Vec::new();
    if qa == 0.0 {
        if qb == 0.0 {
            if qc == 0.0 {
                return Err(Error::Parameter(
                    "energy equation degenerates to 0 = 0 for these constants".into(),
                ));
            }
        } else {
            candidates.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                candidates.push(q / qa);
                candidates.push(qc / q);
            } else {
                // qb = 0 and disc = 0, hence qc = 0: double root at zero
                candidates.push(0.0);
            }
        }
    }

    let poly = |e: f64| (qa * e + qb) * e + qc;
    let dpoly = |e: f64| 2.0 * qa * e + qb;
    let mut roots = Vec::new();
    let mut rejected = Vec::new();
    for mut e in candidates {
        for _ in 0..2 {
            let dp = dpoly(e);
            if dp == 0.0 {
                break;
            }
            let step = poly(e) / dp;
            if !step.is_finite() {
                break;
            }
            e -= step;
        }
        let radicand = k - 2.0 * params.a * e;
        let lhs_num = 2.0 * params.b * e - c;
        if !(radicand > 0.0) {
            rejected.push(RejectedRoot {
                energy: e,
                reason: format!("radicand c0/2 - 2aE + d nu2^2 = {radicand} is not positive"),
            });
        } else if !(lhs_num * big_n > 0.0 || (lhs_num == 0.0 && big_n == 0.0)) {
            rejected.push(RejectedRoot {
                energy: e,
                reason: format!(
                    "2bE - c1 nu2^2 - c4 = {lhs_num} has the wrong sign for N = {big_n}"
                ),
            });
        } else if !roots
            .iter()
            .any(|r: &f64| (r - e).abs() <= 1e-12 * e.abs().max(1.0))
        {
            roots.push(e);
        }
    }
    roots.sort_by(f64::total_cmp);
    Ok(EnergySolution { roots, rejected })
}

/// `E' = c4 + c1 nu2^2 - 2bE` and `eps^2 = c0/2 - 2aE + d nu2^2`.
pub fn metamorphosis_map(params: &TaubNutParams, energy: f64, nu2: f64) -> Result<(f64, f64)> {
    let e_prime = params.c4 + params.c1 * nu2 * nu2 - 2.0 * params.b * energy;
    let eps2 = 0.5 * params.c0 - 2.0 * params.a * energy + params.d * nu2 * nu2;
    if !(eps2 > 0.0) {
        return Err(Error::Domain(format!(
            "eps^2 = {eps2} is not positive at E = {energy}"
        )));
    }
    Ok((e_prime, eps2))
}
