//! Grid checks of the ladder and shift recurrences, and finite-difference
//! eigenvalue oracles for the separated radial and angular equations.
//!
//! Operators act on sampled wavefunctions through analytic derivatives, so
//! a recurrence residual measures the operator identity and not numerical
//! differentiation. The oracles solve the self-adjoint forms of the two ODEs
//! on cell-centred meshes and Richardson-extrapolate across refinements.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taubnut_model::{
    self, Convention, Direction, LadderPrediction, TaubNutParams, TaubNutSector, Wave,
};

/// Nodes with wavefunction values and analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl GridFunction {
    pub fn sample(wave: &Wave, nodes: &[f64]) -> Result<Self> {
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        let mut values = Vec::with_capacity(nodes.len());
        let mut derivs = Vec::with_capacity(nodes.len());
        for &x in nodes {
            let (v, d) = wave.eval(x)?;
            values.push(v);
            derivs.push(d);
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            values,
            derivs,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest gap between the analytic derivative and a central difference of
    /// the values, over interior nodes, relative to the largest derivative.
    pub fn central_difference_gap(&self) -> f64 {
        let scale = self
            .derivs
            .iter()
            .fold(f64::MIN_POSITIVE, |m, d| m.max(d.abs()));
        let mut worst = 0.0f64;
        for i in 1..self.len().saturating_sub(1) {
            let (x0, x1, x2) = (self.nodes[i - 1], self.nodes[i], self.nodes[i + 1]);
            let (y0, y1, y2) = (self.values[i - 1], self.values[i], self.values[i + 1]);
            // three-point derivative on a non-uniform mesh
            let h0 = x1 - x0;
            let h1 = x2 - x1;
            let fd = (-h1 / (h0 * (h0 + h1))) * y0
                + ((h1 - h0) / (h0 * h1)) * y1
                + (h0 / (h1 * (h0 + h1))) * y2;
            worst = worst.max((fd - self.derivs[i]).abs());
        }
        worst / scale
    }
}

/// Sampling layout for recurrence checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub nodes: usize,
    pub r_min: f64,
    /// Upper radial end as a multiple of `1 / sqrt(eps)`.
    pub r_max_scaled: f64,
    pub theta_margin: f64,
    /// Geometric radial spacing; uniform otherwise.
    pub geometric_r: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes: 400,
            r_min: 0.05,
            r_max_scaled: 8.0,
            theta_margin: 0.05,
            geometric_r: true,
        }
    }
}

impl GridSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::Usage(format!(
                "grid needs at least 3 nodes, got {}",
                self.nodes
            )));
        }
        if !(self.r_min > 0.0 && self.r_max_scaled > 0.0) {
            return Err(Error::Usage("radial grid bounds must be positive".into()));
        }
        if !(self.theta_margin > 0.0 && self.theta_margin < PI / 2.0) {
            return Err(Error::Usage(format!(
                "theta margin {} outside (0, pi/2)",
                self.theta_margin
            )));
        }
        Ok(())
    }

    pub fn r_max(&self, eps: f64) -> f64 {
        self.r_max_scaled / eps.sqrt()
    }

    pub fn radial_nodes(&self, eps: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = (self.r_min, self.r_max(eps));
        if !(hi > lo) {
            return Err(Error::Usage(format!("radial window [{lo}, {hi}] is empty")));
        }
        let k = (self.nodes - 1) as f64;
        Ok((0..self.nodes)
            .map(|i| {
                let t = i as f64 / k;
                if self.geometric_r {
                    lo * (hi / lo).powf(t)
                } else {
                    lo + (hi - lo) * t
                }
            })
            .collect())
    }

    pub fn angular_nodes(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = (self.theta_margin, PI - self.theta_margin);
        let k = (self.nodes - 1) as f64;
        Ok((0..self.nodes)
            .map(|i| lo + (hi - lo) * i as f64 / k)
            .collect())
    }

    pub fn nodes_for(&self, wave: &Wave) -> Result<Vec<f64>> {
        match wave {
            Wave::Radial(w) => self.radial_nodes(w.eps),
            Wave::Angular(_) => self.angular_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub sup_rel_residual: f64,
    pub rms_residual: f64,
    pub reference_scale: f64,
    pub nodes_used: usize,
}

/// The four separated recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceOp {
    KPlus,
    KMinus,
    JPlus,
    JMinus,
}

impl RecurrenceOp {
    pub const ALL: [RecurrenceOp; 4] = [
        RecurrenceOp::KPlus,
        RecurrenceOp::KMinus,
        RecurrenceOp::JPlus,
        RecurrenceOp::JMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecurrenceOp::KPlus => "K+",
            RecurrenceOp::KMinus => "K-",
            RecurrenceOp::JPlus => "J+",
            RecurrenceOp::JMinus => "J-",
        }
    }

    pub fn predict(
        self,
        sector: &TaubNutSector,
        l3: f64,
        convention: Convention,
    ) -> Result<LadderPrediction> {
        match self {
            RecurrenceOp::KPlus => {
                taubnut_model::apply_radial_ladder(Direction::Plus, sector, convention)
            }
            RecurrenceOp::KMinus => {
                taubnut_model::apply_radial_ladder(Direction::Minus, sector, convention)
            }
            RecurrenceOp::JPlus => {
                taubnut_model::apply_angular_shift(Direction::Plus, sector, l3, convention)
            }
            RecurrenceOp::JMinus => {
                taubnut_model::apply_angular_shift(Direction::Minus, sector, l3, convention)
            }
        }
    }
}

impl fmt::Display for RecurrenceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RecurrenceOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K+" | "k_plus" => Ok(RecurrenceOp::KPlus),
            "K-" | "k_minus" => Ok(RecurrenceOp::KMinus),
            "J+" | "j_plus" => Ok(RecurrenceOp::JPlus),
            "J-" | "j_minus" => Ok(RecurrenceOp::JMinus),
            _ => Err(Error::Usage(format!("unknown recurrence `{s}`"))),
        }
    }
}

struct Sampled {
    lhs: Vec<f64>,
    target: Vec<f64>,
    term_scale: f64,
}

fn sample_prediction(
    pred: &LadderPrediction,
    grid: &GridSpec,
    metric: Option<&TaubNutParams>,
) -> Result<Sampled> {
    let nodes = grid.nodes_for(&pred.source)?;
    if let (Some(p), Wave::Radial(_)) = (metric, &pred.source) {
        if let Some(r) = nodes.iter().find(|&&r| !(p.f(r) > 0.0)) {
            return Err(Error::Domain(format!(
                "f(r) = {} <= 0 at grid node r = {r}",
                p.f(*r)
            )));
        }
    }
    let src = GridFunction::sample(&pred.source, &nodes)?;
    let tgt = GridFunction::sample(&pred.target, &nodes)?;
    let mut lhs = Vec::with_capacity(nodes.len());
    let mut term_scale = 0.0f64;
    for i in 0..nodes.len() {
        let terms = pred.operator.terms(nodes[i], src.values[i], src.derivs[i]);
        term_scale = term_scale.max(terms.iter().map(|t| t.abs()).sum());
        lhs.push(terms.iter().sum());
    }
    Ok(Sampled {
        lhs,
        target: tgt.values,
        term_scale,
    })
}

fn report(diffs: &[f64], reference: f64) -> ResidualReport {
    let reference = reference.max(f64::MIN_POSITIVE);
    let sup = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let ms = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len().max(1) as f64;
    ResidualReport {
        sup_rel_residual: sup / reference,
        rms_residual: ms.sqrt() / reference,
        reference_scale: reference,
        nodes_used: diffs.len(),
    }
}

/// True when the prediction is that the operator kills the source.
pub fn is_annihilation(pred: &LadderPrediction) -> bool {
    pred.target.is_zero() || pred.coefficient == 0.0
}

/// Compare `operator(source)` with `coefficient * target` on the grid.
///
/// The residual is normalized by the larger sup-norm of the two sides. When
/// the prediction is annihilation the reference is instead the largest sum of
/// absolute operator terms, so cancellation down to rounding counts as a pass.
/// With `metric` given, radial nodes where `f(r) <= 0` are a domain error.
pub fn verify_recurrence(
    pred: &LadderPrediction,
    grid: &GridSpec,
    metric: Option<&TaubNutParams>,
) -> Result<ResidualReport> {
    let s = sample_prediction(pred, grid, metric)?;
    let rhs: Vec<f64> = s.target.iter().map(|t| pred.coefficient * t).collect();
    let diffs: Vec<f64> = s.lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let reference = if is_annihilation(pred) {
        s.term_scale
    } else {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        sup(&s.lhs).max(sup(&rhs))
    };
    Ok(report(&diffs, reference))
}

/// Distance of `operator(source)` from the span of the target, ignoring the
/// predicted coefficient.
pub fn shape_residual(pred: &LadderPrediction, grid: &GridSpec) -> Result<f64> {
    let s = sample_prediction(pred, grid, None)?;
    if pred.target.is_zero() {
        return Ok(report(&s.lhs, s.term_scale).sup_rel_residual);
    }
    let tt: f64 = s.target.iter().map(|t| t * t).sum();
    let lt: f64 = s.lhs.iter().zip(&s.target).map(|(l, t)| l * t).sum();
    let c = if tt > 0.0 { lt / tt } else { 0.0 };
    let diffs: Vec<f64> = s
        .lhs
        .iter()
        .zip(&s.target)
        .map(|(l, t)| l - c * t)
        .collect();
    Ok(report(&diffs, s.term_scale).sup_rel_residual)
}

/// Fitted `operator(source) / target` ratio; useful when a recurrence fails.
pub fn fitted_coefficient(pred: &LadderPrediction, grid: &GridSpec) -> Result<f64> {
    let s = sample_prediction(pred, grid, None)?;
    let tt: f64 = s.target.iter().map(|t| t * t).sum();
    let lt: f64 = s.lhs.iter().zip(&s.target).map(|(l, t)| l * t).sum();
    Ok(if tt > 0.0 { lt / tt } else { 0.0 })
}

/// Refinement and acceptance settings for the eigenvalue oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Cells on the coarsest mesh; two further meshes double it.
    pub cells: usize,
    /// Allowed relative change between successive extrapolations.
    pub tol: f64,
    /// Radial truncation as a multiple of `1 / sqrt(eps)`.
    pub decay: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            cells: 2000,
            tol: 1e-7,
            decay: 10.0,
        }
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `count` smallest eigenvalues of a symmetric tridiagonal matrix, by bisection.
pub fn tridiagonal_lowest(diag: &[f64], off: &[f64], count: usize) -> Vec<f64> {
    let n = diag.len();
    let count = count.min(n);
    if count == 0 {
        return Vec::new();
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (0..count)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Lowest eigenvalues of `-(p y')' + q y = mu w y` on `[lo, hi]`.
///
/// `cells` cell-centred unknowns; the flux vanishes at `lo` when `p(lo) = 0`
/// and likewise at `hi`, otherwise `hi` carries a Dirichlet condition.
fn sturm_liouville(
    p: impl Fn(f64) -> f64,
    q: impl Fn(f64) -> f64,
    w: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    cells: usize,
    count: usize,
) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    let h2 = h * h;
    let centre = |i: usize| lo + (i as f64 + 0.5) * h;
    let face = |i: usize| p(lo + i as f64 * h);
    let wts: Vec<f64> = (0..cells).map(|i| w(centre(i))).collect();
    let mut diag = Vec::with_capacity(cells);
    let mut off = Vec::with_capacity(cells.saturating_sub(1));
    for i in 0..cells {
        let left = face(i);
        let right = if i + 1 == cells {
            // ghost value -y_i enforces y(hi) = 0; a vanishing p makes it natural
            2.0 * face(cells)
        } else {
            face(i + 1)
        };
        diag.push(((left + right) / h2 + q(centre(i))) / wts[i]);
        if i + 1 < cells {
            off.push(-face(i + 1) / h2 / (wts[i] * wts[i + 1]).sqrt());
        }
    }
    tridiagonal_lowest(&diag, &off, count)
}

fn extrapolate<F>(solve: F, opts: &OracleOptions, count: usize, what: &str) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Vec<f64>,
{
    if count == 0 {
        return Ok(Vec::new());
    }
    if opts.cells < 8 || !(opts.tol > 0.0) {
        return Err(Error::Usage(
            "oracle needs at least 8 cells and a positive tolerance".into(),
        ));
    }
    let meshes: Vec<Vec<f64>> = [1, 2, 4].iter().map(|k| solve(opts.cells * k)).collect();
    let rich = |c: &[f64], f: &[f64]| -> Vec<f64> {
        c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    };
    let first = rich(&meshes[0], &meshes[1]);
    let second = rich(&meshes[1], &meshes[2]);
    for (k, (a, b)) in first.iter().zip(&second).enumerate() {
        if !((a - b).abs() <= opts.tol * b.abs().max(1.0)) {
            return Err(Error::Convergence(format!(
                "{what} eigenvalue {k}: extrapolations {a} and {b} differ by more than {:e}",
                opts.tol
            )));
        }
    }
    if second.len() < count {
        return Err(Error::Convergence(format!(
            "{what}: mesh too coarse for {count} eigenvalues"
        )));
    }
    Ok(second)
}

/// The lowest `count` values of `E'` for
/// `R'' + (2/r) R' - (E' + eps2 r^2 + k1 / r^2) R = 0`, in order of radial degree.
///
/// With `R = r^beta y`, `beta (beta + 1) = k1`, the equation becomes
/// `-(r^(2 beta + 2) y')' + eps2 r^(2 beta + 4) y = -E' r^(2 beta + 2) y`.
pub fn radial_eigenvalues_oracle(
    k1: f64,
    eps2: f64,
    count: usize,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    if !(eps2 > 0.0 && eps2.is_finite()) {
        return Err(Error::Domain(format!("no bound states for eps^2 = {eps2}")));
    }
    if !(k1 >= -0.25 && k1.is_finite()) {
        return Err(Error::Domain(format!("k1 = {k1} is below -1/4")));
    }
    let beta = 0.5 * (-1.0 + (1.0 + 4.0 * k1).sqrt());
    let e = 2.0 * beta + 2.0;
    let hi = opts.decay / eps2.sqrt().sqrt();
    let mus = extrapolate(
        |cells| {
            sturm_liouville(
                |r| r.powf(e),
                |r| eps2 * r.powf(e + 2.0),
                |r| r.powf(e),
                0.0,
                hi,
                cells,
                count,
            )
        },
        opts,
        count,
        "radial",
    )?;
    Ok(mus.into_iter().map(|mu| -mu).collect())
}

/// The lowest `count` separation constants `k1` of the angular equation, ascending.
///
/// With `z = cos theta` and `Theta = (1 - z)^(nu1/2) (1 + z)^((nu1 - 2 nu2)/2) Z`
/// the equation becomes `-((1-z)^(a+1) (1+z)^(b+1) Z')' = kappa (1-z)^a (1+z)^b Z`
/// with `a = nu1`, `b = nu1 - 2 nu2` and `k1 = kappa + (nu1 - nu2)(nu1 - nu2 + 1)`.
pub fn angular_eigenvalues_oracle(
    nu1: f64,
    nu2: f64,
    count: usize,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    let (a, b) = (nu1, nu1 - 2.0 * nu2);
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::Domain(format!(
            "angular exponents ({a}, {b}) must exceed -1"
        )));
    }
    let c = nu1 - nu2;
    let kappas = extrapolate(
        |cells| {
            sturm_liouville(
                |z| (1.0 - z).max(0.0).powf(a + 1.0) * (1.0 + z).max(0.0).powf(b + 1.0),
                |_| 0.0,
                |z| (1.0 - z).powf(a) * (1.0 + z).powf(b),
                -1.0,
                1.0,
                cells,
                count,
            )
        },
        opts,
        count,
        "angular",
    )?;
    Ok(kappas.into_iter().map(|k| k + c * (c + 1.0)).collect())
}
