//! TOML experiment files.
//!
//! ```toml
//! [system]
//! n = 3
//! k = "(a1^2 + a2^2 + a3^2)/2"
//! epsilon = 0.01                      # optional, default 0
//! domain = [[-3, 3], [-3, 3], [-3, 3]] # optional, default unbounded
//!
//! [structure]
//! "1,2" = "a3"
//!
//! [perturbation]
//! terms = ["cos(alpha1) + cos(alpha1 - alpha2)", "cos(alpha3)"]
//! harmonics = [{ nu = [0, 1, 0], re = "a1", im = "0" }]
//!
//! [experiment]
//! eps_max = 1e-2
//! eps_min = 1e-5
//! eps_count = 8
//! ensemble = 5
//! seed = 0
//! ```
//!
//! Optional `[normalform]`, `[simulate]` and `[reduce]` sections drive the
//! corresponding command-line subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ActionDomain, SystemDefinition};
use crate::error::{Error, Result};
use crate::expr::{parse_polynomial, parse_series};
use crate::fourier::{FourierSeries, FourierTerm};
use crate::structure::StructureMatrixField;

use super::drift::Tolerances;
use super::params::NekhoroshevParams;
use super::stats::geometric_grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    pub k: String,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    /// Expressions in the action-angle grammar, summed.
    #[serde(default)]
    pub terms: Vec<String>,
    /// Individual harmonics, added to `terms`.
    #[serde(default)]
    pub harmonics: Vec<FourierTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub eps_max: f64,
    pub eps_min: f64,
    pub eps_count: usize,
    /// Horizon prefactor `T` in `T eps^-c2`.
    pub horizon_prefactor: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub ensemble: usize,
    pub rtol: f64,
    pub atol: f64,
    pub seed: u64,
    /// Box for initial actions; defaults to the system domain.
    pub initial_box: Option<Vec<[f64; 2]>>,
    /// Initial frequencies satisfy `|omega.nu| > nonresonance_gap` for
    /// `0 < |nu|_1 <= nonresonance_order`.
    pub nonresonance_order: u64,
    pub nonresonance_gap: f64,
    pub convexity_samples: usize,
    /// Relative margin on the a-priori drift ceiling.
    pub apriori_margin: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let tol = Tolerances::default();
        Self {
            eps_max: 1e-2,
            eps_min: 1e-5,
            eps_count: 8,
            horizon_prefactor: 0.01,
            c1: None,
            c2: None,
            ensemble: 5,
            rtol: tol.rtol,
            atol: tol.atol,
            seed: 0,
            initial_box: None,
            nonresonance_order: 6,
            nonresonance_gap: 1e-3,
            convexity_samples: 64,
            apriori_margin: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalFormSection {
    /// Reference actions; defaults to the domain centre.
    pub a_star: Option<Vec<f64>>,
    pub cutoff: u64,
    /// Resonance threshold; defaults to `sqrt(eps) |omega(a*)|`.
    pub delta: Option<f64>,
    /// `eps` values for the remainder scaling check (empty to skip).
    pub scaling_epsilons: Vec<f64>,
    pub scaling_points: usize,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        Self { a_star: None, cutoff: 6, delta: None, scaling_epsilons: Vec::new(), scaling_points: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub actions: Vec<f64>,
    pub angles: Vec<f64>,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    101
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    /// Values of the removed actions, one reduced system per entry.
    pub j: Vec<Vec<f64>>,
    /// Lattice basis; defaults to the computed common kernel lattice.
    #[serde(default)]
    pub lattice: Option<Vec<Vec<i64>>>,
    /// Length of the reduced-versus-full consistency run.
    #[serde(default = "default_check_time")]
    pub check_time: f64,
}

fn default_check_time() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub structure: BTreeMap<String, String>,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub normalform: Option<NormalFormSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub reduce: Option<ReduceSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(src, s.start)).unwrap_or((1, 1));
            Error::Parse { line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    /// Check numeric settings (expressions are checked by [`Self::system`]).
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if self.system.n == 0 {
            return Err(Error::Validation("system.n must be at least 1".into()));
        }
        if !(e.rtol > 0.0 && e.atol > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        if e.ensemble == 0 {
            return Err(Error::Validation("ensemble must have at least one member".into()));
        }
        if !(e.horizon_prefactor > 0.0) {
            return Err(Error::Validation("horizon prefactor must be positive".into()));
        }
        if !(e.apriori_margin >= 0.0) {
            return Err(Error::Validation("apriori margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<ActionDomain> {
        box_domain(self.system.n, self.system.domain.as_deref())
    }

    pub fn perturbation(&self) -> Result<FourierSeries> {
        let n = self.system.n;
        let mut f = FourierSeries::zero(n);
        for (i, t) in self.perturbation.terms.iter().enumerate() {
            f = &f + &parse_series(t, n).map_err(|e| in_field(e, &format!("perturbation.terms[{i}]")))?;
        }
        if !self.perturbation.harmonics.is_empty() {
            f = &f + &FourierSeries::from_terms(n, &self.perturbation.harmonics)?;
        }
        Ok(f)
    }

    pub fn structure(&self) -> Result<StructureMatrixField> {
        StructureMatrixField::from_expr_map(self.system.n, &self.structure).map_err(|e| in_field(e, "structure"))
    }

    pub fn system(&self) -> Result<SystemDefinition> {
        let n = self.system.n;
        SystemDefinition::new(
            parse_polynomial(&self.system.k, n).map_err(|e| in_field(e, "system.k"))?,
            self.perturbation()?,
            self.structure()?,
            self.system.epsilon,
            self.domain()?,
        )
    }

    /// Decreasing geometric grid from `eps_max` to `eps_min`.
    pub fn epsilon_grid(&self) -> Result<Vec<f64>> {
        let e = &self.experiment;
        if e.eps_count == 0 {
            return Err(Error::Validation("epsilon grid has no points".into()));
        }
        if e.eps_count > 1 && !(e.eps_max > e.eps_min) {
            return Err(Error::Validation("eps_max must exceed eps_min".into()));
        }
        geometric_grid(e.eps_max, e.eps_min, e.eps_count)
    }

    pub fn params(&self) -> Result<NekhoroshevParams> {
        let n = self.system.n;
        let d = NekhoroshevParams::defaults(n, self.experiment.horizon_prefactor)?;
        NekhoroshevParams::new(self.experiment.c1.unwrap_or(d.c1), self.experiment.c2.unwrap_or(d.c2), d.t_time)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { rtol: self.experiment.rtol, atol: self.experiment.atol }
    }

    /// Box for initial actions.
    pub fn initial_box(&self) -> Result<ActionDomain> {
        match &self.experiment.initial_box {
            Some(b) => box_domain(self.system.n, Some(b)),
            None => self.domain(),
        }
    }
}

fn box_domain(n: usize, bounds: Option<&[[f64; 2]]>) -> Result<ActionDomain> {
    match bounds {
        None => Ok(ActionDomain::unbounded(n)),
        Some(b) => {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
            ActionDomain::from_box(b.iter().map(|p| (p[0], p[1])).collect())
        }
    }
}

/// Name the config field an expression error came from; positions stay
/// relative to the expression string.
fn in_field(e: Error, field: &str) -> Error {
    match e {
        Error::Parse { line, column, message } => Error::Parse { line, column, message: format!("{message} (in {field})") },
        other => other,
    }
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
