use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CompactResolvent, DEFAULT_M_TOL};
use crate::error::{Error, Result};

/// Default relative threshold for counting singular values of `P(E)`.
pub const DEFAULT_RANK_TOL: f64 = 1e-3;

/// Successive ratio changes must shrink at least by this factor.
const CONTRACTION: f64 = 1.5;
/// Growth of `Im calM` over two schedule steps that flags a singular point.
const SINGULAR_GROWTH: f64 = 1.5;
/// Changes below this are treated as converged regardless of the trend.
const CHANGE_FLOOR: f64 = 1e-10;
/// Largest entrywise gap between the Richardson values of the last two
/// step pairs.
pub const RICHARDSON_TOL: f64 = 1e-5;

/// Geometric schedule `eps_n = eps_0 * factor^n`, `n < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSchedule {
    pub eps_0: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule { eps_0: 0.1, factor: 0.5, count: 20 }
    }
}

impl EpsSchedule {
    pub fn new(eps_0: f64, factor: f64, count: usize) -> Result<Self> {
        let s = EpsSchedule { eps_0, factor, count };
        s.validate()?;
        Ok(s)
    }

    /// Shortest schedule from `eps_0` whose last value is `<= eps_min`.
    pub fn reaching(eps_0: f64, factor: f64, eps_min: f64) -> Result<Self> {
        if !(eps_min > 0.0) || !(eps_min < eps_0) {
            return Err(Error::InvalidParams(format!("eps_min = {eps_min} must lie in (0, eps_0)")));
        }
        let steps = ((eps_min / eps_0).ln() / factor.ln()).ceil() as usize;
        let mut s = EpsSchedule::new(eps_0, factor, (steps + 1).max(3))?;
        while s.eps_min() > eps_min {
            s.count += 1;
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_0 > 0.0) || !self.eps_0.is_finite() {
            return Err(Error::InvalidParams(format!("eps_0 = {} must be positive", self.eps_0)));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidParams(format!("factor = {} must lie in (0, 1)", self.factor)));
        }
        if self.count < 3 {
            return Err(Error::InvalidParams(format!("count = {} must be >= 3", self.count)));
        }
        Ok(())
    }

    pub fn eps(&self, n: usize) -> f64 {
        self.eps_0 * self.factor.powi(n as i32)
    }

    pub fn eps_min(&self) -> f64 {
        self.eps(self.count - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|n| self.eps(n)).collect()
    }
}

/// One schedule step of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStep {
    pub eps: f64,
    pub im_trace: f64,
    /// Largest entrywise change of the ratio matrix from the previous step.
    pub change: f64,
}

/// Ratio history of all entries `Re(M_uv / calM)`.
struct RatioHistory {
    steps: Vec<SampleStep>,
    ratios: Vec<DMatrix<f64>>,
    /// `max eps * |M_uv|` over the history.
    eps_bound: f64,
    failure: Option<Error>,
}

fn ratio_history(src: &dyn CompactResolvent, energy: f64, schedule: &EpsSchedule) -> Result<RatioHistory> {
    schedule.validate()?;
    let mut out = RatioHistory { steps: Vec::new(), ratios: Vec::new(), eps_bound: 0.0, failure: None };
    for eps in schedule.values() {
        let res = match src.resolvent_k(Complex64::new(energy, eps), DEFAULT_M_TOL) {
            Ok(r) => r,
            Err(e @ Error::MFunctionNonConvergence { .. }) if !out.steps.is_empty() => {
                out.failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let trace = res.trace_m;
        let ratio = res.entries.map(|m| (m / trace).re);
        let change = out.ratios.last().map_or(f64::INFINITY, |prev: &DMatrix<f64>| (&ratio - prev).amax());
        out.eps_bound = res.entries.iter().fold(out.eps_bound, |b, m| b.max(eps * m.norm()));
        out.steps.push(SampleStep { eps, im_trace: trace.im, change });
        out.ratios.push(ratio);
    }
    Ok(out)
}

impl RatioHistory {
    fn singular(&self) -> bool {
        let n = self.steps.len();
        n >= 3 && self.steps[n - 1].im_trace >= SINGULAR_GROWTH * self.steps[n - 3].im_trace
    }

    fn converged(&self, factor: f64) -> bool {
        let n = self.steps.len();
        if n < 3 || self.failure.is_some() {
            return false;
        }
        let (d1, d2) = (self.steps[n - 2].change, self.steps[n - 1].change);
        if d2 < CHANGE_FLOOR {
            return true;
        }
        let spread = (self.richardson(n - 1, factor) - self.richardson(n - 2, factor)).amax();
        d2 * CONTRACTION <= d1 && spread <= RICHARDSON_TOL
    }

    /// Richardson step on ratios `i - 1` and `i`, assuming an error linear in eps.
    fn richardson(&self, i: usize, factor: f64) -> DMatrix<f64> {
        (&self.ratios[i] - &self.ratios[i - 1] * factor) / (1.0 - factor)
    }

    fn extrapolated(&self, factor: f64) -> DMatrix<f64> {
        let n = self.ratios.len();
        if n < 2 {
            return self.ratios[n - 1].clone();
        }
        self.richardson(n - 1, factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoltoratskiiRatio {
    pub value: f64,
    /// `(eps, Re(M_uv / calM))` per schedule step.
    pub history: Vec<(f64, f64)>,
    pub converged: bool,
    pub singular: bool,
}

/// `M_uv(E + i eps) / calM(E + i eps)` along the schedule, extrapolated to
/// `eps = 0`. A non-convergent history reports the last ratio.
pub fn poltoratskii_ratio(
    src: &dyn CompactResolvent,
    energy: f64,
    schedule: &EpsSchedule,
    u: usize,
    v: usize,
) -> Result<PoltoratskiiRatio> {
    let n = src.compact_size();
    if u >= n || v >= n {
        return Err(Error::CompactIndex { index: u.max(v), size: n });
    }
    let h = ratio_history(src, energy, schedule)?;
    let history: Vec<(f64, f64)> = h.steps.iter().zip(&h.ratios).map(|(s, r)| (s.eps, r[(u, v)])).collect();
    let converged = h.converged(schedule.factor);
    let value = if converged {
        h.extrapolated(schedule.factor)[(u, v)]
    } else {
        history.last().map_or(f64::NAN, |p| p.1)
    };
    Ok(PoltoratskiiRatio { value, history, converged, singular: h.singular() })
}

/// Per-energy estimate of `P(E)` and its numerical rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub energy: f64,
    pub schedule: EpsSchedule,
    /// Smallest eps actually evaluated.
    pub eps_min: f64,
    pub dim: usize,
    /// Row-major, symmetrized and projected onto the PSD cone.
    pub p_matrix: Vec<f64>,
    pub history: Vec<SampleStep>,
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub converged: bool,
    pub singular: bool,
    /// `max eps * |M_uv(E + i eps)|` over the schedule.
    pub eps_bound: f64,
    pub note: Option<String>,
}

impl SpectralSample {
    pub fn p(&self, u: usize, v: usize) -> f64 {
        self.p_matrix[u * self.dim + v]
    }

    /// Rank at another relative threshold.
    pub fn rank_at(&self, rank_tol: f64) -> usize {
        if !self.singular {
            return 0;
        }
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > rank_tol * top && s > 0.0).count()
    }
}

pub fn p_matrix(
    src: &dyn CompactResolvent,
    energy: f64,
    schedule: &EpsSchedule,
    rank_tol: f64,
) -> Result<SpectralSample> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidParams(format!("rank_tol = {rank_tol} must be positive")));
    }
    let h = ratio_history(src, energy, schedule)?;
    let converged = h.converged(schedule.factor);
    let singular = h.singular();
    let raw = if converged { h.extrapolated(schedule.factor) } else { h.ratios.last().expect("one step").clone() };
    let sym = (&raw + raw.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|x| x.max(0.0));
    let p = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let p = (&p + p.transpose()) * 0.5;
    let mut sv: Vec<f64> = clipped.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let dim = p.nrows();
    let mut sample = SpectralSample {
        energy,
        schedule: *schedule,
        eps_min: h.steps.last().map_or(schedule.eps_0, |s| s.eps),
        dim,
        p_matrix: p.transpose().iter().copied().collect(),
        history: h.steps,
        rank: 0,
        singular_values: sv,
        converged,
        singular,
        eps_bound: h.eps_bound,
        note: h.failure.map(|e| e.to_string()),
    };
    sample.rank = sample.rank_at(rank_tol);
    Ok(sample)
}

/// Samples over an energy grid, computed in parallel and returned in grid
/// order.
pub fn multiplicity_profile(
    src: &dyn CompactResolvent,
    grid: &[f64],
    schedule: &EpsSchedule,
    rank_tol: f64,
) -> Result<Vec<SpectralSample>> {
    grid.par_iter().map(|&e| p_matrix(src, e, schedule, rank_tol)).collect()
}

/// Rank histogram over converged singular-regime samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicitySummary {
    pub histogram: BTreeMap<usize, usize>,
    pub counted: usize,
    /// Most frequent rank; ties go to the smaller rank.
    pub modal: Option<usize>,
    pub max: Option<usize>,
}

pub fn summarize(samples: &[SpectralSample]) -> MultiplicitySummary {
    let mut histogram = BTreeMap::new();
    for s in samples.iter().filter(|s| s.converged && s.singular) {
        *histogram.entry(s.rank).or_insert(0) += 1;
    }
    let counted = histogram.values().sum();
    let modal = histogram.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&r, _)| r);
    let max = histogram.keys().next_back().copied();
    MultiplicitySummary { histogram, counted, modal, max }
}
