use std::fmt;
use std::path::Path;
use std::str::FromStr;

use monopole_algebra::numgrid::{GridSpec, OracleOptions};
use monopole_algebra::taubnut_model::{Convention, TaubNutParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Flat,
    Taubnut,
}

impl FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flat" => Ok(Model::Flat),
            "taubnut" => Ok(Model::Taubnut),
            _ => Err(format!("unknown model `{s}` (expected flat or taubnut)")),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Flat => "flat",
            Model::Taubnut => "taubnut",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub omega: f64,
    pub charge: f64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            charge: 1.0,
        }
    }
}

/// Quantum-number box. For the flat model `l_max` bounds `l`; for Taub-NUT it
/// bounds `lambda = l - nu1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxConfig {
    pub n_max: i64,
    pub l_max: f64,
    pub nus: Vec<(f64, f64)>,
    pub eps: Vec<f64>,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            n_max: 4,
            l_max: 4.0,
            nus: vec![(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (2.0, 1.0)],
            eps: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub algebra: f64,
    pub recurrence: f64,
    pub oracle: f64,
    pub branch: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebra: 1e-10,
            recurrence: 1e-8,
            oracle: 1e-6,
            branch: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub flat: FlatConfig,
    pub taubnut: TaubNutParams,
    #[serde(rename = "box")]
    pub box_: BoxConfig,
    pub grid: GridSpec,
    pub oracle: OracleOptions,
    pub tolerances: Tolerances,
    /// Tower size for the unirrep search.
    pub p: u32,
    pub convention: Convention,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Flat,
            flat: FlatConfig::default(),
            taubnut: TaubNutParams {
                a: 0.5,
                b: 1.0,
                c1: 0.3,
                d: 0.25,
                c0: 2.0,
                c4: 1.0,
            },
            box_: BoxConfig::default(),
            grid: GridSpec::default(),
            oracle: OracleOptions::default(),
            tolerances: Tolerances::default(),
            p: 3,
            convention: Convention::Published,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!(
                "config {} line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("algebra", t.algebra),
            ("recurrence", t.recurrence),
            ("oracle", t.oracle),
            ("branch", t.branch),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!(
                    "tolerances.{name} = {v} must be positive"
                )));
            }
        }
        if self.box_.n_max < 0 {
            return Err(CliError::Usage(format!(
                "box.n_max = {} must be >= 0",
                self.box_.n_max
            )));
        }
        if !(self.box_.l_max >= 0.0) {
            return Err(CliError::Usage(format!(
                "box.l_max = {} must be >= 0",
                self.box_.l_max
            )));
        }
        if self.box_.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Usage("box.eps entries must be positive".into()));
        }
        self.grid
            .validate()
            .map_err(|e| CliError::Usage(format!("grid: {e}")))?;
        Ok(())
    }

    pub fn n_max(&self) -> u32 {
        self.box_.n_max as u32
    }

    /// The Jacobi-degree bound for Taub-NUT boxes.
    pub fn lambda_max(&self) -> u32 {
        self.box_.l_max.floor() as u32
    }
}
