use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::graph::{
    build_sht, BranchCoefficients, Branching, CompactComponent, RadialCoefficients, StarLikeGraph,
};
use crate::operator::{make_potential, paste_halflines, PotentialKind};
use crate::sharpness::SharpnessModel;
use crate::spectral::{EpsSchedule, MeasureGrid};

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be a finite positive number, got {x}")))
    }
}

fn finite(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be finite, got {x}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub graph: Option<GraphSpec>,
    /// TOML file holding a `GraphSpec` at top level, relative to the config.
    pub graph_file: Option<PathBuf>,
    pub spectrum: Option<SpectrumParams>,
    pub resolvent: Option<ResolventParams>,
    pub multiplicity: Option<MultiplicityParams>,
    pub subordinacy: Option<SubordinacyParams>,
    pub sharpness: Option<SharpnessParams>,
    pub dims: Option<DimsParams>,
    pub paths: Option<PathsParams>,
    pub tree: Option<TreeParams>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    StarLike {
        compact: CompactComponent,
        branches: Vec<BranchCoefficients>,
    },
    Sharpness {
        m: usize,
        potential: PotentialKind,
        seed: Option<u64>,
    },
    Sht {
        branching: Branching,
        coefficients: Option<RadialCoefficients>,
    },
    Paste {
        factors: Vec<PotentialKind>,
        coupling: Vec<Vec<f64>>,
        seed: Option<u64>,
    },
}

/// The operator a command works on.
#[derive(Debug, Clone)]
pub enum BuiltGraph {
    Plain(StarLikeGraph),
    Sharpness(SharpnessModel),
}

impl BuiltGraph {
    pub fn graph(&self) -> &StarLikeGraph {
        match self {
            BuiltGraph::Plain(g) => g,
            BuiltGraph::Sharpness(s) => s.graph(),
        }
    }
}

fn seeded(field: &str, kind: &PotentialKind, seed: Option<u64>) -> Result<u64, ConfigError> {
    match (kind, seed) {
        (PotentialKind::IidUniform { .. }, None) => Err(bad(field, "a seed is required for iid_uniform potentials")),
        (_, s) => Ok(s.unwrap_or(0)),
    }
}

impl GraphSpec {
    pub fn build(&self) -> Result<BuiltGraph, ConfigError> {
        let lib = |e: crate::Error| bad("graph", e);
        match self {
            GraphSpec::StarLike { compact, branches } => {
                StarLikeGraph::new(compact.clone(), branches.clone()).map(BuiltGraph::Plain).map_err(lib)
            }
            GraphSpec::Sharpness { m, potential, seed } => {
                let v0 = make_potential(potential, seeded("graph.seed", potential, *seed)?).map_err(lib)?;
                SharpnessModel::new(*m, v0).map(BuiltGraph::Sharpness).map_err(lib)
            }
            GraphSpec::Sht { branching, coefficients } => {
                let c = coefficients.clone().unwrap_or_else(RadialCoefficients::free);
                build_sht(branching, &c).map(BuiltGraph::Plain).map_err(lib)
            }
            GraphSpec::Paste { factors, coupling, seed } => {
                let mut coeffs = Vec::with_capacity(factors.len());
                for (i, f) in factors.iter().enumerate() {
                    let s = seeded("graph.seed", f, *seed)?;
                    let mut c = make_potential(f, s).map_err(lib)?;
                    c.b = c.b.with_stream(i as u64);
                    coeffs.push(c);
                }
                paste_halflines(&coeffs, coupling).map(BuiltGraph::Plain).map_err(lib)
            }
        }
    }
}

/// `count` points from `from` to `to`, both included.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl Linspace {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        finite(&format!("{field}.from"), self.from)?;
        finite(&format!("{field}.to"), self.to)?;
        if self.count == 0 {
            return Err(bad(&format!("{field}.count"), "must be >= 1"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.from];
        }
        let h = (self.to - self.from) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.to } else { self.from + h * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyGrid {
    Uniform { from: f64, to: f64, count: usize },
    List { values: Vec<f64> },
    Measure(MeasureGrid),
}

impl EnergyGrid {
    pub fn validate(&self, field: &str) -> Result<(), ConfigError> {
        match self {
            EnergyGrid::Uniform { from, to, count } => Linspace { from: *from, to: *to, count: *count }.validate(field),
            EnergyGrid::List { values } => {
                values.iter().try_for_each(|&x| finite(&format!("{field}.values"), x))
            }
            EnergyGrid::Measure(g) => g.validate().map_err(|e| bad(field, e)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub eps_0: f64,
    pub factor: f64,
    pub count: Option<usize>,
    pub eps_min: Option<f64>,
}

impl ScheduleSpec {
    pub fn build(&self, field: &str) -> Result<EpsSchedule, ConfigError> {
        positive(&format!("{field}.eps_0"), self.eps_0)?;
        positive(&format!("{field}.factor"), self.factor)?;
        let s = match (self.count, self.eps_min) {
            (Some(n), None) => EpsSchedule::new(self.eps_0, self.factor, n),
            (None, Some(e)) => {
                positive(&format!("{field}.eps_min"), e)?;
                EpsSchedule::reaching(self.eps_0, self.factor, e)
            }
            _ => return Err(bad(field, "give exactly one of count and eps_min")),
        };
        s.map_err(|e| bad(field, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub depth: usize,
    pub cluster_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventParams {
    pub energies: Linspace,
    pub eps: Vec<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSpec {
    pub l: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityParams {
    pub grid: EnergyGrid,
    pub schedule: ScheduleSpec,
    pub rank_tol: Option<f64>,
    pub dims: Option<DimsSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubordinacyParams {
    pub branch: Option<usize>,
    pub energies: Vec<f64>,
    pub l_max: f64,
    pub doublings: usize,
    /// Boundary angle under test; the numerically subordinate direction at
    /// `l_max` when absent.
    pub theta: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessParams {
    pub depth: usize,
    pub cluster_tol: Option<f64>,
    pub match_tol: Option<f64>,
    /// Random vectors for the sector checks.
    pub vectors: Option<usize>,
    pub vector_depth: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsParams {
    pub grid: EnergyGrid,
    pub l: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsParams {
    /// Compact source vertices; all of `K` when absent.
    pub sources: Option<Vec<usize>>,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    pub n_max: usize,
}

/// Parse a config file, resolving `graph_file` relative to it.
pub fn load(path: &Path) -> Result<(Config, GraphSpec), ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| bad(&path.display().to_string(), e))?;
    let config: Config = toml::from_str(&text).map_err(|e| bad(&path.display().to_string(), e))?;
    let graph = match (&config.graph, &config.graph_file) {
        (Some(g), None) => g.clone(),
        (None, Some(f)) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(f);
            let text = fs::read_to_string(&full).map_err(|e| bad("graph_file", format!("{}: {e}", full.display())))?;
            toml::from_str(&text).map_err(|e| bad(&full.display().to_string(), e))?
        }
        _ => return Err(bad("graph", "give exactly one of [graph] and graph_file")),
    };
    Ok((config, graph))
}

pub fn parse(text: &str) -> Result<(Config, GraphSpec), ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| bad("config", e))?;
    let graph = config.graph.clone().ok_or_else(|| bad("graph", "missing [graph] section"))?;
    Ok((config, graph))
}

impl SpectrumParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth == 0 {
            return Err(bad("spectrum.depth", "must be >= 1"));
        }
        self.cluster_tol.map_or(Ok(()), |t| positive("spectrum.cluster_tol", t))
    }
}

impl ResolventParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.energies.validate("resolvent.energies")?;
        if self.eps.is_empty() {
            return Err(bad("resolvent.eps", "must not be empty"));
        }
        self.eps.iter().try_for_each(|&e| positive("resolvent.eps", e))?;
        self.tol.map_or(Ok(()), |t| positive("resolvent.tol", t))
    }
}

impl MultiplicityParams {
    pub fn validate(&self) -> Result<EpsSchedule, ConfigError> {
        self.grid.validate("multiplicity.grid")?;
        if let Some(t) = self.rank_tol {
            positive("multiplicity.rank_tol", t)?;
        }
        if let Some(d) = self.dims {
            positive("multiplicity.dims.l", d.l)?;
            positive("multiplicity.dims.tol", d.tol)?;
        }
        self.schedule.build("multiplicity.schedule")
    }
}

impl SubordinacyParams {
    pub fn validate(&self, m: usize) -> Result<(), ConfigError> {
        let b = self.branch.unwrap_or(1);
        if b == 0 || b > m {
            return Err(bad("subordinacy.branch", format!("must be in 1..={m}, got {b}")));
        }
        self.energies.iter().try_for_each(|&e| finite("subordinacy.energies", e))?;
        positive("subordinacy.l_max", self.l_max)?;
        if self.l_max < 2.0 {
            return Err(bad("subordinacy.l_max", "must be >= 2"));
        }
        if let Some(t) = self.theta {
            finite("subordinacy.theta", t)?;
        }
        self.threshold.map_or(Ok(()), |t| positive("subordinacy.threshold", t))
    }
}

impl SharpnessParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth == 0 {
            return Err(bad("sharpness.depth", "must be >= 1"));
        }
        if let Some(t) = self.cluster_tol {
            positive("sharpness.cluster_tol", t)?;
        }
        if let Some(t) = self.match_tol {
            positive("sharpness.match_tol", t)?;
        }
        if self.vector_depth == Some(0) {
            return Err(bad("sharpness.vector_depth", "must be >= 1"));
        }
        Ok(())
    }
}

impl DimsParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid.validate("dims.grid")?;
        positive("dims.l", self.l)?;
        positive("dims.tol", self.tol)
    }
}
