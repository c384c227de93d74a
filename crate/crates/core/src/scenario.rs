//! Scenario files: one JSON document selecting a domain, a potential,
//! profiles, grids, tolerances and suites.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::exponent::Exponent;
use crate::grid::{build_domain, GridDomain, Potential, ShapeSpec};
use crate::multiplier::SchwartzProfile;
use crate::sweep::{log_grid, ResolvedWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kato,
    Semigroup,
    Amalgam,
    Resolvent,
    Commutator,
    Multiplier,
    All,
}

impl Suite {
    /// Concrete suites in execution order.
    pub const ORDER: [Suite; 6] = [
        Suite::Kato,
        Suite::Semigroup,
        Suite::Amalgam,
        Suite::Resolvent,
        Suite::Commutator,
        Suite::Multiplier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kato => "kato",
            Suite::Semigroup => "semigroup",
            Suite::Amalgam => "amalgam",
            Suite::Resolvent => "resolvent",
            Suite::Commutator => "commutator",
            Suite::Multiplier => "multiplier",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| Error::Scenario(format!("unknown suite `{s}`")))
    }
}

/// A single suite or a list; an empty list selects nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteSelection {
    One(Suite),
    Many(Vec<Suite>),
}

impl Default for SuiteSelection {
    fn default() -> Self {
        SuiteSelection::One(Suite::All)
    }
}

impl SuiteSelection {
    pub fn resolve(&self) -> Vec<Suite> {
        let chosen: Vec<Suite> = match self {
            SuiteSelection::One(s) => vec![*s],
            SuiteSelection::Many(v) => v.clone(),
        };
        if chosen.contains(&Suite::All) {
            return Suite::ORDER.to_vec();
        }
        Suite::ORDER.iter().copied().filter(|s| chosen.contains(s)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: ShapeSpec,
    pub h: f64,
}

/// Potential on the scenario domain; wells are negative for positive `depth`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `−depth · e^{−|x−c|²/width²}`
    GaussianWell {
        center: Vec<f64>,
        width: f64,
        depth: f64,
    },
    /// `−depth` on the ball.
    BallWell {
        center: Vec<f64>,
        radius: f64,
        depth: f64,
    },
}

impl PotentialSpec {
    pub fn build(&self, domain: &Arc<GridDomain>) -> Result<Potential> {
        let d = domain.dim();
        let check = |c: &[f64]| {
            if c.len() != d {
                Err(Error::DimensionMismatch { expected: d, got: c.len() })
            } else {
                Ok(())
            }
        };
        match self {
            PotentialSpec::Zero => Ok(Potential::zero(domain.clone())),
            PotentialSpec::Constant { value } => Potential::from_fn(domain.clone(), |_| *value),
            PotentialSpec::GaussianWell { center, width, depth } => {
                check(center)?;
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter("well width must be positive".into()));
                }
                Potential::from_fn(domain.clone(), |x| {
                    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    -depth * (-r2 / (width * width)).exp()
                })
            }
            PotentialSpec::BallWell { center, radius, depth } => {
                check(center)?;
                Potential::from_fn(domain.clone(), |x| {
                    let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    if r2 < radius * radius {
                        -depth
                    } else {
                        0.0
                    }
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profiles {
    #[serde(default = "default_profile")]
    pub phi: SchwartzProfile,
    #[serde(default = "default_profile")]
    pub psi: SchwartzProfile,
}

fn default_profile() -> SchwartzProfile {
    SchwartzProfile::gaussian(1.0)
}

impl Default for Profiles {
    fn default() -> Self {
        Profiles {
            phi: default_profile(),
            psi: default_profile(),
        }
    }
}

/// `θ` values: explicit, log-spaced, or spanning the resolved window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaGrid {
    List(Vec<f64>),
    Log { log: (f64, f64, usize) },
    Window { window: usize },
}

impl ThetaGrid {
    pub fn values(&self, window: &ResolvedWindow) -> Vec<f64> {
        match self {
            ThetaGrid::List(v) => v.clone(),
            ThetaGrid::Log { log: (lo, hi, n) } => log_grid(*lo, *hi, *n),
            ThetaGrid::Window { window: n } => window.grid(*n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Scaling sweeps.
    pub theta: ThetaGrid,
    /// Uniform-bound sweep.
    pub theta_uniform: ThetaGrid,
    /// Heat times.
    pub heat_t: Vec<f64>,
    /// Unitary-group times.
    pub unitary_t: Vec<f64>,
    pub p: Vec<Exponent>,
    pub q: Vec<Exponent>,
    /// Exponents of the uniform `L^p` sweep.
    pub uniform_p: Vec<Exponent>,
    pub k: Vec<usize>,
    pub n: Vec<u32>,
    pub beta: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            theta: ThetaGrid::Window { window: 7 },
            theta_uniform: ThetaGrid::Log { log: (1e-3, 1e3, 13) },
            heat_t: vec![0.07, 0.25, 1.0],
            unitary_t: vec![4.0, 16.0, 64.0, 256.0],
            p: vec![Exponent::ONE],
            q: vec![Exponent::TWO, Exponent::INF],
            uniform_p: vec![Exponent::ONE, Exponent::TWO, Exponent::INF],
            k: vec![1, 2],
            n: vec![2],
            beta: vec![0.8, 1.0, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// `M` of `R_{V,θ} = (θH + M)^{−1}`.
    pub m_shift: f64,
    /// `M` for the unitary-group surface.
    pub commutator_m: f64,
    /// `z = (re, im)` of the resolvent powers.
    pub z: (f64, f64),
    pub axis: usize,
    /// Multiplier offset `θ^{1/2} n_j` is `offset`.
    pub offset: f64,
    /// Heat-kernel proxy padding; `4√t` when absent.
    pub padding: Option<f64>,
    /// Randomized trials per check.
    pub trials: usize,
    /// Node cap for the Duhamel checks; the grid is coarsened to fit.
    pub duhamel_nodes: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            m_shift: 1.0,
            commutator_m: 30.0,
            z: (-1.0, 0.0),
            axis: 0,
            offset: 0.5,
            padding: None,
            trials: 20,
            duhamel_nodes: 216,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity: f64,
    pub oracle: f64,
    pub gaussian_rel: f64,
    pub smoothing_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-8,
            oracle: 1e-7,
            gaussian_rel: 0.1,
            smoothing_rel: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub domain: DomainSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub profiles: Profiles,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub suite: SuiteSelection,
}

impl Scenario {
    /// Parses with field-path diagnostics.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            let (line, column) = (inner.line(), inner.column());
            let full = inner.to_string();
            let message = full.strip_suffix(&format!(" at line {line} column {column}")).unwrap_or(&full);
            Error::Scenario(format!("field `{}`: {message} (line {line}, column {column})", e.path()))
        })?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a file; relative mask paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut s = Self::from_json(&text)?;
        if let ShapeSpec::MaskFile { path: mask } = &mut s.domain.shape {
            if mask.is_relative() {
                if let Some(dir) = path.parent() {
                    *mask = dir.join(&*mask);
                }
            }
            if !mask.exists() {
                return Err(Error::Scenario(format!("mask file {} not found", mask.display())));
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grids;
        let empty = [
            ("grids.heat_t", g.heat_t.is_empty()),
            ("grids.unitary_t", g.unitary_t.is_empty()),
            ("grids.p", g.p.is_empty()),
            ("grids.q", g.q.is_empty()),
            ("grids.uniform_p", g.uniform_p.is_empty()),
            ("grids.k", g.k.is_empty()),
            ("grids.n", g.n.is_empty()),
            ("grids.beta", g.beta.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Scenario(format!("{name} must be nonempty")));
        }
        for (name, grid) in [("grids.theta", &g.theta), ("grids.theta_uniform", &g.theta_uniform)] {
            let bad = match grid {
                ThetaGrid::List(v) => v.is_empty() || v.iter().any(|t| !(*t > 0.0)),
                ThetaGrid::Log { log: (lo, hi, n) } => !(*lo > 0.0 && hi >= lo) || *n == 0,
                ThetaGrid::Window { window } => *window == 0,
            };
            if bad {
                return Err(Error::Scenario(format!("{name} must be a nonempty set of positive values")));
            }
        }
        if g.heat_t.iter().chain(&g.unitary_t).any(|t| !(*t > 0.0)) {
            return Err(Error::Scenario("times must be positive".into()));
        }
        if !(self.params.m_shift > 0.0 && self.params.commutator_m > 0.0) {
            return Err(Error::Scenario("params.m_shift and params.commutator_m must be positive".into()));
        }
        if !(self.params.z.0 < 0.0) {
            return Err(Error::Scenario("params.z must have negative real part".into()));
        }
        self.profiles.phi.validate()?;
        self.profiles.psi.validate()?;
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Arc<GridDomain>> {
        build_domain(&self.domain.shape, self.domain.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_and_errors() {
        let s = Scenario::from_json(
            r#"{"domain": {"shape": {"kind": "box", "lower": [0,0], "upper": [1,1]}, "h": 0.25}, "suite": "semigroup"}"#,
        )
        .unwrap();
        assert_eq!(s.suite.resolve(), vec![Suite::Semigroup]);
        assert_eq!(s.grids.k, vec![1, 2]);
        let e =
            Scenario::from_json(r#"{"domain": {"shape": {"kind": "box", "lower": [0], "upper": [1]}, "h": 0.25}, "grids": {"p": [0.5]}}"#)
                .unwrap_err()
                .to_string();
        assert!(e.contains("grids.p"), "{e}");
        let e = Scenario::from_json(r#"{"domain": {"shape": {"kind": "box", "lower": [0], "upper": [1]}, "h": 0.25}, "grids": {"k": []}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("grids.k"));
        let none =
            Scenario::from_json(r#"{"domain": {"shape": {"kind": "box", "lower": [0], "upper": [1]}, "h": 0.25}, "suite": []}"#).unwrap();
        assert!(none.suite.resolve().is_empty());
        assert_eq!(
            SuiteSelection::Many(vec![Suite::Multiplier, Suite::Kato]).resolve(),
            vec![Suite::Kato, Suite::Multiplier]
        );
        assert_eq!("amalgam".parse::<Suite>().unwrap(), Suite::Amalgam);
    }
}
